"""Functionals evaluated on fields and checkpoint trajectories."""
from randnls.diagnostics.commutator import CommutatorRecord, commutator_decay, commutator_H
from randnls.diagnostics.energy import (
    ConservedSet,
    IncrementReport,
    IncrementSeries,
    conserved_set,
    energy_increment_series,
    kinetic_energy,
    mass,
    modified_energy,
    modified_energy_rate,
    modified_energy_series,
    quartic_integral,
)
from randnls.diagnostics.fits import PowerLawFit, power_law_fit, trapezoid
from randnls.diagnostics.morawetz import (
    MorawetzCheck,
    MorawetzRecord,
    interaction_direct,
    interaction_morawetz_check,
    interaction_morawetz_report,
    morawetz_record,
)
from randnls.diagnostics.norms import (
    DEFAULT_PAIRS,
    SpacetimeNormBundle,
    admissible,
    bilinear_strichartz_ratio,
    f_norm_bundle,
    spacetime_norm,
    zI_bundle,
    zI_constituents,
)
from randnls.diagnostics.scattering import (
    ScatteringVerdict,
    ThetaReport,
    scattering_detect,
    theta_monitor,
    wrap_horizon,
)
