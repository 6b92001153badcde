"""Stand-alone experiments driven from the command line."""
import numpy as np

from randnls.harness.config import RunConfig
from randnls.randomization import RadialProfile, synthesize_profile, translate, weighted_square_max
from randnls.spectral import GridSpec, sobolev_norm


def embedding_experiment(cfg: RunConfig, ns=(32, 64), deltas=(0.05, 0.1, 0.2), shift_fraction=0.25):
    """
    Weighted square function of the radial profile against ``||f0||_{H^delta}``.

    The box side and profile come from ``cfg``; only the resolution changes.
    A copy translated by ``shift_fraction * L`` along the first axis is
    evaluated at the coarsest resolution as a non-radial comparison.
    """
    p = cfg.profile
    out = {"L": cfg.grid.L, "d": cfg.grid.d, "runs": []}
    for n in ns:
        g = GridSpec(int(n), cfg.grid.L, cfg.grid.d)
        f0 = synthesize_profile(RadialProfile(p.s, p.decay_margin, p.amplitude, g))
        lhs = weighted_square_max(f0)
        out["runs"].append({"n": int(n), "lhs": lhs,
                            "rhs": {f"{d:g}": sobolev_norm(f0, d) for d in deltas},
                            "ratio": {f"{d:g}": lhs / sobolev_norm(f0, d) for d in deltas}})
    g = GridSpec(int(min(ns)), cfg.grid.L, cfg.grid.d)
    f0 = synthesize_profile(RadialProfile(p.s, p.decay_margin, p.amplitude, g))
    shift = np.zeros(g.d)
    shift[0] = shift_fraction * g.L
    out["translated"] = {"n": g.n, "shift": shift.tolist(),
                         "lhs_radial": weighted_square_max(f0),
                         "lhs_translated": weighted_square_max(translate(f0, shift))}
    return out
