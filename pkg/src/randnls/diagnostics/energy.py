"""
Mass, energy, the modified energy of the forced remainder and its increments.
"""
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional

import numpy as np

from randnls import _kernels
from randnls.diagnostics.fits import PowerLawFit, power_law_fit
from randnls.errors import EstimationError, StructuralError
from randnls.evolution import Trajectory, linear_propagate
from randnls.spectral import (
    SPECTRAL,
    Field,
    IOperatorSpec,
    _wrap,
    apply_I,
    cubic_product,
    i_symbol,
)


@dataclass(frozen=True)
class ConservedSet:
    mass: float
    kinetic: float
    potential: float

    @property
    def energy(self):
        return self.kinetic + self.potential

    def as_dict(self):
        return {"mass": self.mass, "kinetic": self.kinetic, "potential": self.potential,
                "energy": self.energy}


def kinetic_energy(u: Field) -> float:
    """``(1/2) ||grad u||^2`` from the spectral coefficients."""
    c = u.coefficients()
    k = u.grid.kmag()
    return 0.5 * float(np.sum(k * k * (c.real ** 2 + c.imag ** 2)))


def quartic_integral(u: Field) -> float:
    """``int |u|^4 dx`` by lattice quadrature."""
    return _kernels.abs_pow_sum(u.values(), 4.0) * u.grid.cell_volume


def mass(u: Field) -> float:
    c = u.coefficients()
    return float(np.sum(c.real ** 2 + c.imag ** 2))


def conserved_set(u: Field) -> ConservedSet:
    return ConservedSet(mass(u), kinetic_energy(u), 0.25 * quartic_integral(u))


def modified_energy(v: Field, f: Field, spec: IOperatorSpec, potential: bool = True) -> float:
    """``(1/2) ||grad I v||^2 + (1/4) int |I v + I f|^4``.

    The kinetic part sees only the remainder; the potential part sees the
    whole truncated solution.  ``potential=False`` keeps the kinetic part
    only, which is the energy of the flow with the nonlinearity switched off.
    """
    if v.grid != f.grid:
        raise StructuralError("v and f live on different grids")
    Iv = apply_I(v, spec)
    if not potential:
        return kinetic_energy(Iv)
    Iu = _wrap(v.grid, SPECTRAL, Iv.coefficients() + apply_I(f, spec).coefficients())
    return kinetic_energy(Iv) + 0.25 * quartic_integral(Iu)


def modified_energy_rate(v: Field, f: Field, spec: IOperatorSpec) -> float:
    """
    Instantaneous ``d/dt`` of the modified energy from the flux formula.

    With ``u = v + f``, ``f`` free and ``i v_t + Lap v = |u|^2 u``::

        dE/dt = Re< N(Iu) - I N(u), d_t Iv > + Re< N(Iu), i Lap If >

    where ``<a, b> = int a conj(b)`` and ``N(w) = |w|^2 w``.  The first bracket
    is minus the commutator.  Products are alias-free, so this is the exact
    rate of the spectrally truncated system; it serves as a cross-check of
    finite differences of :func:`modified_energy` on small grids.
    """
    g = v.grid
    k2 = g.kmag() ** 2
    m = i_symbol(g.kmag(), spec)
    vc, fc = v.coefficients(), f.coefficients()
    uc = vc + fc
    Nu = cubic_product(_wrap(g, SPECTRAL, uc)).data
    Iu = _wrap(g, SPECTRAL, m * uc)
    NIu = cubic_product(Iu).data
    dt_Iv = 1j * (-k2 * m * vc - m * Nu)
    lap_If = -k2 * m * fc
    first = np.sum((NIu - m * Nu) * np.conj(dt_Iv))
    second = np.sum(NIu * np.conj(1j * lap_If))
    return float((first + second).real)


@dataclass
class IncrementSeries:
    spec: IOperatorSpec
    times: np.ndarray
    energy: np.ndarray
    increments: np.ndarray
    total_variation: float

    def as_dict(self):
        return {
            "N": self.spec.N,
            "sigma": self.spec.sigma,
            "times": self.times.tolist(),
            "energy": self.energy.tolist(),
            "increments": self.increments.tolist(),
            "total_variation": self.total_variation,
        }


@dataclass
class IncrementReport:
    series: Dict[float, IncrementSeries] = dc_field(default_factory=dict)
    fit: PowerLawFit = None

    def as_dict(self):
        out = {"series": [s.as_dict() for s in self.series.values()]}
        if self.fit is not None:
            out["fit"] = {"exponent": self.fit.exponent, "prefactor": self.fit.prefactor,
                          "residual_rms": self.fit.residual_rms, "n_points": self.fit.n_points}
        return out


def _has_potential(traj, potential):
    if potential is not None:
        return bool(potential)
    return not (traj.config is not None and traj.config.linear_only)


def modified_energy_series(traj: Trajectory, f0_omega: Field, spec: IOperatorSpec,
                           potential: Optional[bool] = None):
    """
    Modified energy of ``v = u - exp(it Lap) f0_omega`` at every checkpoint.

    ``potential=None`` drops the quartic term for trajectories produced with
    the nonlinearity disabled and keeps it otherwise.
    """
    pot = _has_potential(traj, potential)
    out = []
    for t, u in zip(traj.times, traj.checkpoints):
        f = linear_propagate(f0_omega, t)
        out.append(modified_energy(u - f, f, spec, pot))
    return np.array(out)


def energy_increment_series(traj: Trajectory, f0_omega: Field, specs: List[IOperatorSpec],
                            potential: Optional[bool] = None) -> IncrementReport:
    """
    Checkpoint-to-checkpoint increments of the modified energy for each truncation level.

    With more than one distinct ``N`` the total variations are fitted to a
    power law ``TV(N) ~ N^alpha``; a single level gives the series only.
    ``potential`` is passed to :func:`modified_energy_series`.
    """
    if len(traj) < 2:
        raise EstimationError("increment series needs at least two checkpoints")
    report = IncrementReport()
    for spec in specs:
        e = modified_energy_series(traj, f0_omega, spec, potential)
        inc = np.abs(np.diff(e))
        report.series[spec.N] = IncrementSeries(spec, np.array(traj.times), e, inc, float(inc.sum()))
    Ns = sorted(report.series)
    if len(Ns) >= 2:
        tv = [report.series[N].total_variation for N in Ns]
        if all(v > 0 for v in tv):
            report.fit = power_law_fit(Ns, tv)
    return report
