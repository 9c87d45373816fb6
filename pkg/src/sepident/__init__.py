"""Online identification of separable nonlinear regression models.

Models of the form ``f(a, c; x) = sum_j c_j phi_j(a; x)`` are fitted either
offline (variable projection, :mod:`sepident.batch_vp`) or online from an
observation stream (:mod:`sepident.recursive`): the three-step recursive
estimator REPI, which pre-eliminates the linear coefficients and moves the
nonlinear parameters along an extended gradient, plus the RGN, HRGN, RVP
and SGD baselines. :mod:`sepident.cli` reproduces the benchmark protocols.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .models import (
    ComplexExponential3,
    Observation,
    ParameterState,
    RbfArx,
    RbfArxSpec,
    SeparableModel,
    SeriesRecord,
    build_regressors,
)
from .recursive import ALGORITHMS, EstimatorConfig, RecursiveState, StepTrace, run_stream

__all__ = [
    "ALGORITHMS",
    "ComplexExponential3",
    "EstimatorConfig",
    "KERNEL_BACKEND",
    "Observation",
    "ParameterState",
    "RbfArx",
    "RbfArxSpec",
    "RecursiveState",
    "SeparableModel",
    "SeriesRecord",
    "StepTrace",
    "build_regressors",
    "run_stream",
]

__version__ = "0.1.0"
