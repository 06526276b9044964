"""Random unitary evolutions, their averaged master equations and
application models (phase-damped Jaynes-Cummings, trapped-ion sideband
dephasing, intrinsic decoherence)."""

from .core import (
    ConvergenceError,
    DensityMatrix,
    DimensionError,
    HermitianOperator,
    InvariantError,
    SpectralDecomposition,
    Tolerances,
    eigendecompose,
    louisell_conjugate,
)
from .ensemble import (
    EnsembleConfig,
    EnsembleResult,
    RandomUnitaryModel,
    collapse_ensemble,
    ensemble_average,
)
from .lindblad import LindbladModel, analytic_markov_evolve, integrate
from .stochastic import BrownianIncrementStream, CorrelationSpec, NoiseKernel, TimeGrid

__version__ = "0.1.0"

__all__ = [
    "BrownianIncrementStream",
    "ConvergenceError",
    "CorrelationSpec",
    "DensityMatrix",
    "DimensionError",
    "EnsembleConfig",
    "EnsembleResult",
    "HermitianOperator",
    "InvariantError",
    "LindbladModel",
    "NoiseKernel",
    "RandomUnitaryModel",
    "SpectralDecomposition",
    "TimeGrid",
    "Tolerances",
    "analytic_markov_evolve",
    "collapse_ensemble",
    "eigendecompose",
    "ensemble_average",
    "integrate",
    "louisell_conjugate",
]
