"""Quotient geometry of ``(St_{p,k} x HPD_k) / U_k``.

Points of the quotient are handled through representatives ``(U, Sigma)``
with ``U`` a ``p x k`` matrix with orthonormal columns and ``Sigma`` a
``k x k`` Hermitian positive definite matrix. Two representatives are
equivalent when they differ by the action ``(U O, O^H Sigma O)`` of a unitary
``O``. Tangent vectors to the quotient are represented by horizontal vectors
of the product manifold.

The metric is

    <xi, eta> = Re tr(xi_U^H (I - U U^H / 2) eta_U)
                + alpha tr(S^-1 xi_S S^-1 eta_S) + beta tr(S^-1 xi_S) tr(S^-1 eta_S)

with ``alpha > 0`` and ``beta > -alpha / k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
import scipy.linalg

from . import numkernel as nk
from .exceptions import DimensionError, HorizontalityError

ORTHONORMALITY_TOL = 1e-10
HORIZONTAL_TOL = 1e-8


@dataclass(frozen=True)
class MetricParams:
    """Dimensions ``(p, k)`` and metric weights ``(alpha, beta)``."""

    p: int
    k: int
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not (1 <= self.k < self.p):
            raise ValueError(f"need 1 <= k < p, got p={self.p}, k={self.k}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > -self.alpha / self.k:
            raise ValueError(
                f"beta must exceed -alpha/k = {-self.alpha / self.k}, got {self.beta}")

    @classmethod
    def gaussian(cls, p: int, k: int) -> "MetricParams":
        return cls(p, k, 1.0, 0.0)

    @classmethod
    def student_matched(cls, p: int, k: int, dof: float) -> "MetricParams":
        """``alpha = (p + d) / (p + d + 1)`` and ``beta = alpha - 1``."""
        alpha = (p + dof) / (p + dof + 1.0)
        return cls(p, k, alpha, alpha - 1.0)

    @property
    def dim(self) -> int:
        """Dimension of the quotient manifold."""
        return 2 * self.p * self.k - self.k ** 2


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    """Representative ``(U, Sigma)`` of a point of the quotient."""

    U: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        U = np.array(self.U, dtype=complex)
        S = np.array(self.Sigma, dtype=complex)
        if U.ndim != 2 or S.shape != (U.shape[1], U.shape[1]):
            raise DimensionError(f"incompatible shapes U{U.shape}, Sigma{S.shape}")
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(S))):
            raise ValueError("non-finite entries in manifold point")
        k = U.shape[1]
        err = np.linalg.norm(U.conj().T @ U - np.eye(k))
        if err > ORTHONORMALITY_TOL:
            raise ValueError(f"U does not have orthonormal columns (error {err:.2e})")
        S = nk.herm(S)
        w = np.linalg.eigvalsh(S)
        if w[0] <= 0:
            raise ValueError(f"Sigma is not positive definite (min eigenvalue {w[0]:.3e})")
        U.flags.writeable = False
        S.flags.writeable = False
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "Sigma", S)

    @property
    def p(self) -> int:
        return self.U.shape[0]

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @cached_property
    def Sigma_inv(self) -> np.ndarray:
        return nk.herm(np.linalg.inv(self.Sigma))

    @cached_property
    def Sigma_sqrt(self) -> np.ndarray:
        return nk.hermitian_matfun(self.Sigma, "sqrt", rtol=0.0)

    @cached_property
    def Sigma_invsqrt(self) -> np.ndarray:
        return nk.hermitian_matfun(self.Sigma, "invsqrt", rtol=0.0)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Pair ``(xi_U, xi_Sigma)`` in the ambient space ``C^{p x k} x C^{k x k}``."""

    xiU: np.ndarray
    xiSigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xiU", np.asarray(self.xiU, dtype=complex))
        object.__setattr__(self, "xiSigma", np.asarray(self.xiSigma, dtype=complex))

    def __add__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector(self.xiU + other.xiU, self.xiSigma + other.xiSigma)

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector(self.xiU - other.xiU, self.xiSigma - other.xiSigma)

    def __neg__(self) -> "TangentVector":
        return TangentVector(-self.xiU, -self.xiSigma)

    def __mul__(self, c: float) -> "TangentVector":
        return TangentVector(c * self.xiU, c * self.xiSigma)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "TangentVector":
        return TangentVector(self.xiU / c, self.xiSigma / c)

    @classmethod
    def zeros(cls, p: int, k: int) -> "TangentVector":
        return cls(np.zeros((p, k), complex), np.zeros((k, k), complex))

    def euclidean_inner(self, other: "TangentVector") -> float:
        """``Re tr(xi_U^H eta_U) + Re tr(xi_S^H eta_S)``."""
        return float(np.vdot(self.xiU, other.xiU).real
                     + np.vdot(self.xiSigma, other.xiSigma).real)

    def frobenius(self) -> float:
        return float(np.sqrt(self.euclidean_inner(self)))


@dataclass(frozen=True, eq=False)
class Gauge:
    """Unitary ``O`` acting as ``(U, Sigma) -> (U O, O^H Sigma O)``."""

    O: np.ndarray

    def __post_init__(self):
        O = np.asarray(self.O, dtype=complex)
        if O.ndim != 2 or O.shape[0] != O.shape[1]:
            raise DimensionError(f"gauge must be square, got {O.shape}")
        err = np.linalg.norm(O.conj().T @ O - np.eye(O.shape[0]))
        if err > ORTHONORMALITY_TOL:
            raise ValueError(f"gauge is not unitary (error {err:.2e})")
        object.__setattr__(self, "O", O)

    @property
    def inverse(self) -> "Gauge":
        return Gauge(self.O.conj().T)


AmbientPair = Union[TangentVector, tuple]


def _as_pair(Z: AmbientPair) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(Z, TangentVector):
        return Z.xiU, Z.xiSigma
    ZU, ZS = Z
    return np.asarray(ZU, dtype=complex), np.asarray(ZS, dtype=complex)


# --------------------------------------------------------------------------
# metric and projections
# --------------------------------------------------------------------------

def inner(params: MetricParams, point: ManifoldPoint,
          xi: TangentVector, eta: TangentVector) -> float:
    """Riemannian metric at ``point``."""
    U, Si = point.U, point.Sigma_inv
    uu = np.vdot(xi.xiU, eta.xiU) - 0.5 * np.vdot(U.conj().T @ xi.xiU, U.conj().T @ eta.xiU)
    a = Si @ xi.xiSigma
    b = Si @ eta.xiSigma
    aff = np.sum(a.T * b)  # tr(a b)
    return float(uu.real + params.alpha * aff.real
                 + params.beta * np.trace(a).real * np.trace(b).real)


def norm(params: MetricParams, point: ManifoldPoint, xi: TangentVector) -> float:
    return float(np.sqrt(max(inner(params, point, xi, xi), 0.0)))


def project_tangent(point: ManifoldPoint, Z: AmbientPair) -> TangentVector:
    """Metric-orthogonal projection of an ambient pair onto the tangent space."""
    ZU, ZS = _as_pair(Z)
    U = point.U
    return TangentVector(ZU - U @ nk.herm(U.conj().T @ ZU), nk.herm(ZS))


def horizontal_residual(params: MetricParams, point: ManifoldPoint,
                        xi: TangentVector) -> float:
    """Frobenius norm of ``U^H xi_U - 2 alpha (S^-1 xi_S - xi_S S^-1)``."""
    Si = point.Sigma_inv
    r = point.U.conj().T @ xi.xiU - 2 * params.alpha * (Si @ xi.xiSigma - xi.xiSigma @ Si)
    return float(np.linalg.norm(r))


def vertical_vector(point: ManifoldPoint, Omega: np.ndarray) -> TangentVector:
    """Vertical tangent vector ``(U Omega, Sigma Omega - Omega Sigma)``."""
    S = point.Sigma
    return TangentVector(point.U @ Omega, S @ Omega - Omega @ S)


def vertical_component(params: MetricParams, point: ManifoldPoint,
                       xi: TangentVector) -> np.ndarray:
    """Skew-Hermitian ``Omega`` such that ``xi - vertical_vector(Omega)`` is horizontal.

    The defining linear system is diagonal in the eigenbasis of ``Sigma``,
    where each coefficient ``1 - 4 alpha + 2 alpha (l_i/l_j + l_j/l_i)`` is at
    least one.
    """
    a = params.alpha
    Si = point.Sigma_inv
    rhs = point.U.conj().T @ xi.xiU + 2 * a * (xi.xiSigma @ Si - Si @ xi.xiSigma)
    lam, V = nk.eigh(point.Sigma)
    ratio = lam[:, None] / lam[None, :]
    coef = 1.0 - 4.0 * a + 2.0 * a * (ratio + ratio.T)
    Om = V @ ((V.conj().T @ rhs @ V) / coef) @ V.conj().T
    return nk.skewh(Om)


def project_horizontal(params: MetricParams, point: ManifoldPoint,
                       xi: TangentVector) -> TangentVector:
    """Metric-orthogonal projection of a tangent vector onto the horizontal space."""
    Om = vertical_component(params, point, xi)
    return xi - vertical_vector(point, Om)


# --------------------------------------------------------------------------
# connection, geodesics, retraction
# --------------------------------------------------------------------------

def levi_civita(params: MetricParams, point: ManifoldPoint, xi: TangentVector,
                eta: TangentVector, deta_xi: AmbientPair) -> TangentVector:
    """Horizontal representative of the Levi-Civita connection ``nabla_xi eta``.

    ``deta_xi`` is the ambient directional derivative of the vector field
    ``eta`` along ``xi``; obtaining it is the caller's job.
    """
    U, Si = point.U, point.Sigma_inv
    base = project_tangent(point, deta_xi)
    M = nk.herm(eta.xiU @ xi.xiU.conj().T) @ U
    corr_U = M - U @ (U.conj().T @ M)
    corr_S = -nk.herm(eta.xiSigma @ Si @ xi.xiSigma)
    full = TangentVector(base.xiU + corr_U, base.xiSigma + corr_S)
    return project_horizontal(params, point, full)


def _stiefel_block(point: ManifoldPoint, xiU: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """``[U Q]`` and the skew-Hermitian ``2k x 2k`` generator of the canonical geodesic."""
    U = point.U
    k = point.k
    A = U.conj().T @ xiU
    Q, R = nk.thin_qr(xiU - U @ A)
    B = np.zeros((2 * k, 2 * k), dtype=complex)
    B[:k, :k] = nk.skewh(A)
    B[:k, k:] = -R.conj().T
    B[k:, :k] = R
    return np.hstack([U, Q]), B


def geodesic(params: MetricParams, point: ManifoldPoint, xi: TangentVector,
             t: float = 1.0, horizontal_tol: float = HORIZONTAL_TOL) -> ManifoldPoint:
    """Point at time ``t`` on the quotient geodesic leaving ``point`` along ``xi``.

    Raises
    ------
    HorizontalityError
        If ``xi`` is not horizontal to within ``horizontal_tol``.
    """
    res = horizontal_residual(params, point, xi)
    if res > horizontal_tol:
        raise HorizontalityError(
            f"geodesic direction must be horizontal (residual {res:.2e})")
    k = point.k
    UQ, B = _stiefel_block(point, xi.xiU)
    E = scipy.linalg.expm(t * B)
    U_t = UQ @ E[:, :k]
    Sh, Sih = point.Sigma_sqrt, point.Sigma_invsqrt
    S_t = Sh @ nk.hermitian_matfun(t * (Sih @ xi.xiSigma @ Sih), "exp") @ Sh
    return ManifoldPoint(U_t, nk.herm(S_t))


def retract(params: MetricParams, point: ManifoldPoint, xi: TangentVector) -> ManifoldPoint:
    """Second-order retraction: the exponentials of the geodesic replaced by
    ``Gamma(X) = I + X + X^2/2``, followed by a polar factor on the Stiefel part.

    Raises
    ------
    DegeneracyError
        If the Stiefel block becomes singular; reduce the step.
    """
    k = point.k
    UQ, B = _stiefel_block(point, xi.xiU)
    W = nk.polar_unitary_factor(nk.gamma2(B))
    U_new = UQ @ W[:, :k]
    Sh, Sih = point.Sigma_sqrt, point.Sigma_invsqrt
    X = nk.herm(Sih @ xi.xiSigma @ Sih)
    S_new = Sh @ nk.gamma2(X) @ Sh
    return ManifoldPoint(U_new, nk.herm(S_new))


def reorthonormalize(point: ManifoldPoint) -> ManifoldPoint:
    """Replace ``U`` by its closest matrix with exactly orthonormal columns."""
    return ManifoldPoint(nk.polar_unitary_factor(point.U), point.Sigma)


# --------------------------------------------------------------------------
# gradients and Hessians
# --------------------------------------------------------------------------

def egrad_to_rgrad(params: MetricParams, point: ManifoldPoint, G: AmbientPair) -> TangentVector:
    """Riemannian gradient from the Euclidean gradient ``(G_U, G_Sigma)``.

    The result is horizontal whenever the underlying function is invariant
    under the unitary action.
    """
    GU, GS = _as_pair(G)
    U, S = point.U, point.Sigma
    a, b, k = params.alpha, params.beta, params.k
    gU = GU - U @ (GU.conj().T @ U)
    c = b * np.trace(GS @ S).real / (a * (a + k * b))
    gS = S @ nk.herm(GS) @ S / a - c * S
    return TangentVector(gU, nk.herm(gS))


def ehess_to_rhess(params: MetricParams, point: ManifoldPoint, G: AmbientPair,
                   Hdir: AmbientPair, xi: TangentVector) -> TangentVector:
    """Horizontal representative of the Riemannian Hessian applied to ``xi``.

    Parameters
    ----------
    G : pair
        Euclidean gradient ``(G_U, G_Sigma)`` at ``point``.
    Hdir : pair
        Euclidean Hessian-vector product ``D grad_E f [xi]``.
    xi : TangentVector
        Horizontal direction.

    Notes
    -----
    Closed form of ``P^H(nabla_xi grad f)``. The Stiefel part carries
    ``+ skewh(G_U xi_U^H) U``; this sign is the one that agrees with applying
    :func:`levi_civita` to the gradient field.
    """
    GU, GS = _as_pair(G)
    HU, HS = _as_pair(Hdir)
    U, S = point.U, point.Sigma
    a, b, k = params.alpha, params.beta, params.k
    xU, xS = xi.xiU, xi.xiSigma
    UtG = U.conj().T @ GU
    rU = (HU - U @ (HU.conj().T @ U)
          - U @ nk.skewh(GU.conj().T @ xU)
          + nk.skewh(GU @ xU.conj().T) @ U
          - 0.5 * (xU @ UtG - U @ ((U.conj().T @ xU) @ UtG)))
    tr = np.trace(HS @ S + GS @ xS).real
    rS = (S @ nk.herm(HS) @ S + nk.herm(S @ nk.herm(GS) @ xS)) / a \
        - b * tr / (a * (a + k * b)) * S
    out = project_tangent(point, (rU, rS))
    return project_horizontal(params, point, out)


# --------------------------------------------------------------------------
# group action and random sampling
# --------------------------------------------------------------------------

def gauge_transport(obj: Union[ManifoldPoint, TangentVector], g: Gauge):
    """Apply the unitary action to a point ``(U O, O^H S O)`` or tangent vector."""
    if not isinstance(g, Gauge):
        g = Gauge(g)
    O = g.O
    if isinstance(obj, ManifoldPoint):
        return ManifoldPoint(obj.U @ O, nk.herm(O.conj().T @ obj.Sigma @ O))
    if isinstance(obj, TangentVector):
        return TangentVector(obj.xiU @ O, O.conj().T @ obj.xiSigma @ O)
    raise TypeError(f"cannot transport object of type {type(obj).__name__}")


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circular complex Gaussian entries (unit variance)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_unitary(k: int, rng: np.random.Generator) -> Gauge:
    return Gauge(nk.thin_qr(complex_gaussian(rng, (k, k)))[0])


def random_point(params: MetricParams, rng: np.random.Generator,
                 eps: float = 1.0) -> ManifoldPoint:
    """Random point: Haar-like ``U`` and ``Sigma = exp(eps H)`` for Gaussian Hermitian ``H``."""
    p, k = params.p, params.k
    U = nk.thin_qr(complex_gaussian(rng, (p, k)))[0]
    H = nk.herm(complex_gaussian(rng, (k, k)))
    return ManifoldPoint(U, nk.hermitian_matfun(eps * H, "exp"))


def random_tangent(params: MetricParams, point: ManifoldPoint, rng: np.random.Generator,
                   horizontal: bool = False) -> TangentVector:
    """Random unit-norm tangent vector, horizontal on request."""
    p, k = params.p, params.k
    xi = project_tangent(point, (complex_gaussian(rng, (p, k)), complex_gaussian(rng, (k, k))))
    if horizontal:
        xi = project_horizontal(params, point, xi)
    return xi / norm(params, point, xi)
