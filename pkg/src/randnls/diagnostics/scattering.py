"""
Scattering detection and the bootstrap-window monitor.

On the torus dispersion wraps around the box, so every verdict here is a
pre-wrap verdict: callers should restrict the trajectory to times before
:func:`wrap_horizon`.
"""
from dataclasses import dataclass, field as dc_field
from typing import List, Optional

import numpy as np

from randnls.diagnostics.energy import kinetic_energy, mass, modified_energy
from randnls.errors import ConfigurationError
from randnls.evolution import Trajectory, linear_propagate
from randnls.spectral import Field, IOperatorSpec, apply_I, sobolev_norm

MONOTONE_SLACK = 0.10
TAIL_FLOOR = 1e-12


@dataclass(eq=False)
class ScatteringVerdict:
    scattered: bool
    final_state: Optional[Field]
    cauchy_tail: np.ndarray
    times: np.ndarray
    scattering_state: Optional[Field] = None  # final_state - f0_omega, when the forcing is known
    first_time: Optional[float] = None  # end of the first passing window

    def as_dict(self):
        return {"scattered": self.scattered, "cauchy_tail": self.cauchy_tail.tolist(),
                "times": self.times.tolist(), "first_time": self.first_time}


def wrap_horizon(u0: Field) -> float:
    """
    Time for a packet moving at the rms group velocity ``2 |xi|_rms`` to
    cross half the box.
    """
    m = mass(u0)
    if m == 0:
        return float("inf")
    k_rms = np.sqrt(2.0 * kinetic_energy(u0) / m)
    return float("inf") if k_rms == 0 else 0.5 * u0.grid.L / (2.0 * k_rms)


def _window_passes(tail, tol):
    if np.any(tail > tol):
        return False
    return bool(np.all(tail[1:] <= (1.0 + MONOTONE_SLACK) * tail[:-1] + TAIL_FLOOR))


def scattering_detect(traj: Trajectory, sigma: float, tol: float, window: int,
                      f0_omega: Optional[Field] = None,
                      horizon: Optional[float] = None) -> ScatteringVerdict:
    """
    Cauchy test on the pulled-back states ``w_i = exp(-i t_i Lap) u(t_i)``.

    ``cauchy_tail[i] = ||w_{i+1} - w_i||_{H^sigma} / ||w_0||_{H^sigma}``
    (absolute when ``w_0 = 0``).  The run scatters when the trailing
    ``window`` entries are all ``<= tol`` and nonincreasing up to 10% slack.
    Checkpoints later than ``horizon`` (e.g. :func:`wrap_horizon`) are ignored.
    """
    pairs = [(t, u) for t, u in zip(traj.times, traj.checkpoints)
             if horizon is None or t <= horizon]
    window = int(window)
    if window < 1 or window > len(pairs) - 1:
        raise ConfigurationError(
            f"window={window} needs at least {window + 1} checkpoints, trajectory has {len(pairs)}")
    ws = [linear_propagate(u, -t) for t, u in pairs]
    scale = sobolev_norm(ws[0], sigma)
    scale = scale if scale > 0 else 1.0
    tail = np.array([sobolev_norm(b - a, sigma) for a, b in zip(ws[:-1], ws[1:])]) / scale
    times = np.array([t for t, _ in pairs[1:]])
    scattered = _window_passes(tail[-window:], tol)
    first = None
    for i in range(window, tail.size + 1):
        if _window_passes(tail[i - window:i], tol):
            first = float(times[i - 1])
            break
    final = ws[-1]
    return ScatteringVerdict(scattered, final, tail, times,
                             final - f0_omega if f0_omega is not None else None, first)


@dataclass
class ThetaReport:
    """Largest checkpoint time inside the bootstrap set, plus both constraint curves."""

    T: float
    times: np.ndarray
    energy: np.ndarray
    energy_bound: float
    l4_cumulative: np.ndarray
    l4_bound: float
    binding: List[str] = dc_field(default_factory=list)

    def as_dict(self):
        return {"T": self.T, "times": self.times.tolist(), "energy": self.energy.tolist(),
                "energy_bound": self.energy_bound, "l4_cumulative": self.l4_cumulative.tolist(),
                "l4_bound": self.l4_bound, "binding": list(self.binding)}


def theta_monitor(traj: Trajectory, f0_omega: Field, spec: IOperatorSpec, M_cap: float,
                  energy_unit: float = 1.0) -> ThetaReport:
    """
    Bootstrap window: largest ``T`` with ``sup_{t<=T} E(v) <= N^{2(1-sigma)} unit``
    and ``||Iv||^4_{L^4([0,T] x box)} <= M_cap N^{1-sigma}``.

    ``T = 0`` when the energy constraint already fails at ``t = 0``.
    """
    N, sigma = spec.N, spec.sigma
    e_bound = N ** (2.0 * (1.0 - sigma)) * energy_unit
    l4_bound = M_cap * N ** (1.0 - sigma)
    times = np.array(traj.times, dtype=float)
    energy, quart = [], []
    for t, u in zip(times, traj.checkpoints):
        f = linear_propagate(f0_omega, t)
        v = u - f
        energy.append(modified_energy(v, f, spec))
        iv = apply_I(v, spec).values()
        quart.append(float(np.sum((iv.real ** 2 + iv.imag ** 2) ** 2)) * v.grid.cell_volume)
    energy = np.array(energy)
    quart = np.array(quart)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (quart[1:] + quart[:-1]) * np.diff(times))])
    T = 0.0
    binding = []
    for i in range(times.size):
        bad = []
        if energy[i] > e_bound:
            bad.append("energy")
        if cum[i] > l4_bound:
            bad.append("l4")
        if bad:
            binding = bad
            break
        T = float(times[i])
    return ThetaReport(T, times, energy, e_bound, cum, l4_bound, binding)
