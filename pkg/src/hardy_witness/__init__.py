"""Hardy-paradox Schmidt-rank witness: optimizer, no-go certificates and verdicts."""

from .hardy import ProbabilityTable, Realization, hardy_evaluate, statistics_from_realization
from .linalg import DensityOperator, Ket, PovmSet
from .optimizer import P_HARDY_2, OptimizationConfig, maximize_hardy
from .witness import TolerancePolicy, WitnessVerdict, certify

__all__ = [
    "DensityOperator",
    "Ket",
    "OptimizationConfig",
    "P_HARDY_2",
    "PovmSet",
    "ProbabilityTable",
    "Realization",
    "TolerancePolicy",
    "WitnessVerdict",
    "certify",
    "hardy_evaluate",
    "maximize_hardy",
    "statistics_from_realization",
]
