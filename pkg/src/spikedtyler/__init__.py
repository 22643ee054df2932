"""Robust estimation of spiked covariance matrices on a quotient manifold.

Submodules
----------
numkernel
    Hermitian matrix functions, QR, polar factor, principal angles.
manifold
    Quotient geometry: metric, projections, geodesics, retraction, gradients.
model
    Tyler's cost for ``I + U Sigma U^H``, Student t sampling, pSCM baseline.
optim
    Riemannian gradient descent and trust-region solvers.
crb
    Divergence, subspace error, Fisher information and Cramér-Rao bounds.
bench
    Monte Carlo harness comparing estimators to the bounds.
"""

from .crb import (FimBundle, FisherSpec, assemble_fim, bound_subspace, bound_subspace_closed,
                  bound_total, bound_total_tilde, divergence, subspace_error)
from .exceptions import (AlignmentError, ConfigError, DegeneracyError, DimensionError,
                         DomainError, HorizontalityError, SpikedTylerError, StructureError)
from .manifold import Gauge, ManifoldPoint, MetricParams, TangentVector
from .model import SampleSet, StudentTParams, TylerProblem, make_spiked, pscm, sample_student_t
from .optim import Objective, SolveResult, SolverConfig, Status, solve_rgd, solve_rtr

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "ConfigError", "DegeneracyError", "DimensionError", "DomainError",
    "FimBundle", "FisherSpec", "Gauge", "HorizontalityError", "ManifoldPoint", "MetricParams",
    "Objective", "SampleSet", "SolveResult", "SolverConfig", "SpikedTylerError", "Status",
    "StructureError", "StudentTParams", "TangentVector", "TylerProblem", "assemble_fim",
    "bound_subspace", "bound_subspace_closed", "bound_total", "bound_total_tilde",
    "divergence", "make_spiked", "pscm", "sample_student_t", "solve_rgd", "solve_rtr",
    "subspace_error",
]
