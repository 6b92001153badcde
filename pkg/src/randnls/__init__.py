"""Pseudospectral cubic defocusing NLS with Wiener-randomised data and I-method diagnostics."""
from randnls._kernels import BACKEND, NUMBA_AVAILABLE
from randnls.errors import (
    BlowUpError,
    ConfigurationError,
    EstimationError,
    RandNLSError,
    StructuralError,
)
from randnls.evolution import EvolutionConfig, Trajectory, evolve, linear_propagate, step_strang
from randnls.randomization import RadialProfile, randomize, synthesize_profile
from randnls.spectral import Field, GridSpec, IOperatorSpec, apply_I

__version__ = "0.1.0"
