"""Continuous-state branching processes in a Brownian random environment.

Closed-form Yaglom limits, the weak-regime integral kernels behind them,
and Monte Carlo / SDE estimators used to check them.
"""

from .model import (
    DerivedParams,
    InvalidParameterError,
    ModelParams,
    Regime,
    branching_mechanism,
    classify,
    derive,
)
from .quadrature import QuadResult
from .montecarlo import MCEstimate, PathConfig
from .yaglom import survival_asymptotic_constant, yaglom_curve, yaglom_lt, yaglom_lt_regime

__version__ = "0.1.0"

__all__ = [
    "DerivedParams",
    "InvalidParameterError",
    "MCEstimate",
    "ModelParams",
    "PathConfig",
    "QuadResult",
    "Regime",
    "branching_mechanism",
    "classify",
    "derive",
    "survival_asymptotic_constant",
    "yaglom_curve",
    "yaglom_lt",
    "yaglom_lt_regime",
    "__version__",
]
