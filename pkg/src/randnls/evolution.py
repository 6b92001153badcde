"""
Strang split-step integration of ``i u_t + Laplacian u = |u|^2 u``.

Both sub-flows are solved exactly: the linear one is the phase
``exp(-i t |xi|^2)`` in frequency, the nonlinear one the pointwise rotation
``u exp(-i |u|^2 t)``.  Consecutive linear half steps are fused, so a step
costs one transform pair.

With ``dealias`` on, only the nonlinear *increment* is filtered by the 2/3
mask: modes outside the mask keep evolving under the linear flow.  This
leaves rough data untouched at ``t = 0`` and reduces to plain splitting for
band-limited data.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field, replace
from typing import List, Optional

import numpy as np

from randnls import _kernels
from randnls.errors import BlowUpError, ConfigurationError, StructuralError
from randnls.spectral import (
    PHYSICAL,
    SPECTRAL,
    Field,
    _wrap,
    dealias_mask,
    to_physical_array,
    to_spectral_array,
)

logger = logging.getLogger(__name__)

STABILITY_LIMIT = 0.5


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    t_end: float
    checkpoint_every: int = 10
    dealias: Optional[bool] = None  # None: on for d=3, off otherwise
    defocusing_sign: int = 1
    halve_on_guard: bool = False
    linear_only: bool = False  # validation hook: drop the nonlinearity

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigurationError(f"t_end must be nonnegative, got {self.t_end}")
        if int(self.checkpoint_every) < 1:
            raise ConfigurationError("checkpoint_every must be at least 1")
        if self.defocusing_sign != 1:
            raise ConfigurationError("only the defocusing sign +1 is supported")

    def dealias_for(self, d):
        return (d == 3) if self.dealias is None else bool(self.dealias)


@dataclass(eq=False)
class Trajectory:
    """Checkpoints ``u(t_i)``; ``times[0] = 0`` and ``checkpoints[0]`` is the initial state."""

    times: List[float]
    checkpoints: List[Field]
    initial: Field
    config: Optional[EvolutionConfig] = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def grid(self):
        return self.initial.grid

    def __len__(self):
        return len(self.checkpoints)

    @property
    def horizon(self):
        return self.times[-1] if self.times else 0.0

    def view(self, checkpoints, **meta):
        """Same time stamps, different fields (used for derived quantities such as ``v``)."""
        m = dict(self.meta)
        m.update(meta)
        return Trajectory(list(self.times), list(checkpoints), checkpoints[0], self.config, m)


# --------------------------------------------------------------------------
# sub-flows


def linear_propagate(field: Field, t: float) -> Field:
    """Free Schroedinger group ``exp(i t Laplacian)``; output in the input representation."""
    k2 = field.grid.kmag() ** 2
    out = _wrap(field.grid, SPECTRAL, field.coefficients() * np.exp(-1j * t * k2))
    return out if field.rep == SPECTRAL else out.to_physical()


def nonlinear_substep(field: Field, dt: float) -> Field:
    """Exact flow of ``i u_t = |u|^2 u`` over ``dt``: a pointwise phase rotation."""
    if field.rep != PHYSICAL:
        raise StructuralError("nonlinear_substep needs a physical-space field")
    return _wrap(field.grid, PHYSICAL, _kernels.phase_rotate(field.data, dt))


def _nonlinear_update(c, grid, dt, mask):
    u = to_physical_array(grid, c)
    rotated = to_spectral_array(grid, _kernels.phase_rotate(u, dt))
    if mask is None:
        return rotated, u
    return np.where(mask, rotated, c), u


def step_strang(field: Field, dt: float, config: Optional[EvolutionConfig] = None) -> Field:
    """One Strang step: linear ``dt/2``, nonlinear ``dt``, linear ``dt/2``."""
    g = field.grid
    linear_only = bool(config and config.linear_only)
    dealias = config.dealias_for(g.d) if config is not None else g.d == 3
    half = np.exp(-0.5j * dt * g.kmag() ** 2)
    c = field.coefficients() * half
    if not linear_only:
        c, _ = _nonlinear_update(c, g, dt, dealias_mask(g.n, g.d) if dealias else None)
    out = _wrap(g, SPECTRAL, c * half)
    return out if field.rep == SPECTRAL else out.to_physical()


# --------------------------------------------------------------------------
# driver


def evolve(u0: Field, config: EvolutionConfig, progress=None) -> Trajectory:
    """
    Integrate from ``u0`` up to ``config.t_end``.

    Checkpoints are taken every ``checkpoint_every`` steps and at the final
    time.  If ``t_end`` is not a multiple of ``dt`` the step is shrunk
    uniformly so that it is.

    Raises
    ------
    BlowUpError
        A non-finite value appeared.  The exception carries the trajectory
        up to the last healthy checkpoint.
    """
    g = u0.grid
    n_steps = int(math.ceil(config.t_end / config.dt - 1e-9)) if config.t_end > 0 else 0
    dt = config.t_end / n_steps if n_steps else config.dt
    every = int(config.checkpoint_every)
    mask = dealias_mask(g.n, g.d) if config.dealias_for(g.d) else None
    k2 = g.kmag() ** 2

    traj = Trajectory([0.0], [u0], u0, config, {"dt_effective": dt, "n_steps": n_steps,
                                               "guard_violations": 0, "halvings": 0})
    c = np.array(u0.coefficients())
    if not _kernels.all_finite(c):
        raise BlowUpError("initial data is not finite", traj, 0.0)
    _guard(traj, u0.values(), dt, 0.0)

    t = 0.0
    done = 0
    sub = 1  # sub-steps per nominal step after guard-triggered halvings
    while done < n_steps:
        block = min(every, n_steps - done)
        h = dt / sub
        half = np.exp(-0.5j * h * k2)
        full = half * half
        c = c * half
        u = None
        for i in range(block * sub):
            if not config.linear_only:
                c, u = _nonlinear_update(c, g, h, mask)
                if not _kernels.all_finite(c):
                    raise BlowUpError(f"non-finite field near t={t + (i + 1) * h:.6g}", traj, t)
            c = c * (half if i == block * sub - 1 else full)
        done += block
        t = done * dt
        cp = _wrap(g, SPECTRAL, c)
        if not _kernels.all_finite(c):
            raise BlowUpError(f"non-finite field at t={t:.6g}", traj, t)
        traj.times.append(t)
        traj.checkpoints.append(cp)
        if _guard(traj, cp.values(), h, t) and config.halve_on_guard:
            sub *= 2
            traj.meta["halvings"] += 1
        if progress is not None:
            progress(t, cp)
    return traj


def _guard(traj, u, dt, t):
    amp = _kernels.abs_max(u)
    load = dt * amp * amp
    if load > STABILITY_LIMIT:
        traj.meta["guard_violations"] += 1
        warnings.warn(
            f"stability guard: dt*max|u|^2 = {load:.3g} > {STABILITY_LIMIT} at t={t:.4g}",
            RuntimeWarning,
            stacklevel=3,
        )
        return True
    return False


def forced_remainder(traj: Trajectory, f0_omega: Field) -> Trajectory:
    """``v(t_i) = u(t_i) - exp(i t_i Laplacian) f0_omega`` at every checkpoint."""
    if f0_omega.grid != traj.grid:
        raise StructuralError("forcing and trajectory live on different grids")
    vs = [u - linear_propagate(f0_omega, t) for t, u in zip(traj.times, traj.checkpoints)]
    return traj.view(vs, component="v")


def linear_trajectory(f0: Field, times) -> Trajectory:
    """Free evolution of ``f0`` sampled at ``times`` (``times[0]`` must be 0)."""
    times = [float(t) for t in times]
    if not times or times[0] != 0.0:
        raise ConfigurationError("linear_trajectory needs times starting at 0")
    cps = [f0 if t == 0.0 else linear_propagate(f0, t) for t in times]
    return Trajectory(times, cps, f0, None, {"component": "f"})


def with_linear_only(config: EvolutionConfig) -> EvolutionConfig:
    return replace(config, linear_only=True)
