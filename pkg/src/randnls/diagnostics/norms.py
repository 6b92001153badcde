"""
Mixed space-time Lebesgue norms over checkpoint trajectories.

Time integrals use the composite trapezoid rule over checkpoints and
``L^inf_t`` is the checkpoint maximum; spatial norms use lattice quadrature.
"""
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Dict

import numpy as np

from randnls.diagnostics.fits import trapezoid
from randnls.errors import ConfigurationError, EstimationError
from randnls.evolution import Trajectory, linear_propagate
from randnls.spectral import (
    Field,
    IOperatorSpec,
    apply_multiplier,
    i_symbol,
    littlewood_paley,
    l2_norm,
    lp_norm,
    to_physical_array,
)

INF = float("inf")
DEFAULT_PAIRS = ((INF, 2.0), (2.0, 6.0), (10.0 / 3.0, 10.0 / 3.0))


def admissible(q, r, d=3, tol=1e-12):
    """Strichartz scaling condition ``2/q + d (1/r - 1/2) = 0``."""
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    inv_r = 0.0 if np.isinf(r) else 1.0 / r
    return abs(2.0 * inv_q + d * (inv_r - 0.5)) <= tol


def spacetime_norm(arrays, times, q, r, grid):
    """``|| F ||_{L^q_t L^r_x}`` for physical arrays ``F(t_i)``."""
    if len(arrays) < 2:
        raise EstimationError("space-time norms need at least two checkpoints")
    a = np.array([lp_norm(F, r, grid) for F in arrays])
    if np.isinf(q):
        return float(a.max())
    return trapezoid(a ** q, times) ** (1.0 / q)


def _weighted(traj, weight):
    g = traj.grid
    return [to_physical_array(g, u.coefficients() * weight) for u in traj.checkpoints]


def zI_constituents(traj_v: Trajectory, spec: IOperatorSpec, pairs=DEFAULT_PAIRS):
    g = traj_v.grid
    for q, r in pairs:
        if not admissible(q, r, g.d):
            raise ConfigurationError(f"({q}, {r}) is not Strichartz admissible in d={g.d}")
    if len(traj_v) < 2:
        raise EstimationError("Z_I needs at least two checkpoints")
    k = g.kmag()
    arrays = _weighted(traj_v, np.sqrt(1.0 + k * k) * i_symbol(k, spec))
    return {_pair_label(q, r): spacetime_norm(arrays, traj_v.times, q, r, g) for q, r in pairs}


def zI_bundle(traj_v: Trajectory, spec: IOperatorSpec, pairs=DEFAULT_PAIRS) -> float:
    """Largest ``|| <grad> I v ||_{L^q_t L^r_x}`` over the requested admissible pairs."""
    return max(zI_constituents(traj_v, spec, pairs).values())


def _fmt(p):
    if np.isinf(p):
        return "inf"
    fr = Fraction(p).limit_denominator(12)
    return str(fr.numerator) if fr.denominator == 1 else f"{fr.numerator}/{fr.denominator}"


def _pair_label(q, r):
    return f"L{_fmt(q)}_t L{_fmt(r)}_x"


@dataclass
class SpacetimeNormBundle:
    """The three random-data bundles; each is the sum of its constituents."""

    F: float
    F_inf: float
    F2: float
    constituents: Dict[str, float] = dc_field(default_factory=dict)

    def as_dict(self):
        return {"F": self.F, "F_inf": self.F_inf, "F2": self.F2,
                "constituents": dict(self.constituents)}


F_PAIRS = ((10.0, 10.0), (4.0, 4.0), (5.0, 5.0), (4.0, 12.0))
F_INF_PAIRS = ((INF, 4.0), (INF, 6.0))
F2_PAIRS = ((2.0, INF), (2.0, 6.0))


def f_norm_bundle(traj_f: Trajectory, spec: IOperatorSpec, s: float,
                  include_l10_3: bool = False) -> SpacetimeNormBundle:
    """
    Norms of the free evolution ``f = exp(it Lap) f0_omega``.

    * ``F``: ``<grad>^s f`` in ``L^10_{t,x}``, ``L^4_{t,x}``, ``L^5_{t,x}``,
      ``L^4_t L^12_x`` (plus ``L^{10/3}_{t,x}`` when ``include_l10_3``),
    * ``F_inf``: ``f`` in ``L^inf_t L^4_x`` and ``L^inf_t L^6_x``,
    * ``F2``: ``<grad> I f`` in ``L^2_t L^inf_x`` and ``L^2_t L^6_x``.
    """
    if len(traj_f) < 2:
        raise EstimationError("norm bundle needs at least two checkpoints")
    g = traj_f.grid
    k = g.kmag()
    times = traj_f.times
    cons = {}

    ws = _weighted(traj_f, (1.0 + k * k) ** (0.5 * s))
    pairs = F_PAIRS + (((10.0 / 3.0, 10.0 / 3.0),) if include_l10_3 else ())
    F = 0.0
    for q, r in pairs:
        val = spacetime_norm(ws, times, q, r, g)
        cons[f"F: <grad>^s f in {_pair_label(q, r)}"] = val
        F += val
    del ws

    plain = [u.values() for u in traj_f.checkpoints]
    F_inf = 0.0
    for q, r in F_INF_PAIRS:
        val = spacetime_norm(plain, times, q, r, g)
        cons[f"F_inf: f in {_pair_label(q, r)}"] = val
        F_inf += val
    del plain

    wI = _weighted(traj_f, np.sqrt(1.0 + k * k) * i_symbol(k, spec))
    F2 = 0.0
    for q, r in F2_PAIRS:
        val = spacetime_norm(wI, times, q, r, g)
        cons[f"F2: <grad> I f in {_pair_label(q, r)}"] = val
        F2 += val
    return SpacetimeNormBundle(F, F_inf, F2, cons)


def bilinear_strichartz_ratio(u0: Field, K: float, M: float, T: float,
                              n_times: int = 129, smooth: bool = False) -> float:
    """
    ``|| (e^{itLap} P_K u0)(e^{itLap} P_M u0) ||_{L^2_{t,x}([0,T])}`` over
    ``||P_K u0||_{L^2} ||P_M u0||_{L^2}``.
    """
    if T <= 0 or n_times < 2:
        raise ConfigurationError("need T > 0 and at least two time samples")
    a0 = apply_multiplier(u0, littlewood_paley(u0.grid, K, smooth))
    b0 = apply_multiplier(u0, littlewood_paley(u0.grid, M, smooth))
    na, nb = l2_norm(a0), l2_norm(b0)
    if na == 0.0 or nb == 0.0:
        raise EstimationError(f"empty dyadic shell (K={K}: {na:g}, M={M}: {nb:g})")
    g = u0.grid
    times = np.linspace(0.0, T, n_times)
    dens = []
    for t in times:
        a = linear_propagate(a0, t).values()
        b = linear_propagate(b0, t).values()
        ab = a * b
        dens.append(float(np.sum(ab.real ** 2 + ab.imag ** 2)) * g.cell_volume)
    return float(np.sqrt(trapezoid(dens, times))) / (na * nb)
