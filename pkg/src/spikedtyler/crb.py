"""Error measures, Fisher information and intrinsic Cramér-Rao bounds.

The Fisher information is assembled in an orthonormal basis of the product
tangent space at a point. Its kernel is the ``k^2``-dimensional vertical
space, so the total bound uses a pseudo-inverse. The restriction to the
``U_perp`` and ``Sigma`` blocks gives the invertible matrix ``F_tilde``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.linalg

from . import numkernel as nk
from .exceptions import AlignmentError, DomainError, StructureError
from .manifold import ManifoldPoint, MetricParams, TangentVector
from .model import GAUSSIAN_DOF, dembed, embed_full

RANK_RTOL = 1e-10
ALIGNMENT_TOL = 1e-6

BOUND_TOTAL = "total"
BOUND_TOTAL_TILDE = "total_tilde_conjectured"
BOUND_SUBSPACE = "subspace"
BOUND_SUBSPACE_CLOSED = "subspace_closed_form"
BOUND_CSV_COLUMNS = ("p", "k", "n", "alpha_pp", "bound_name", "value")


def alpha_pp_gaussian() -> float:
    return 1.0


def alpha_pp_student(p: int, dof: float) -> float:
    """Density-generator constant for a complex Student t with ``dof`` degrees of freedom."""
    if not dof > 0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    return (p + dof) / (p + dof + 1.0)


def alpha_pp_for_dof(p: int, dof: float) -> float:
    """Constant matched to the sampler: Gaussian mode above ``GAUSSIAN_DOF``."""
    return alpha_pp_gaussian() if dof >= GAUSSIAN_DOF else alpha_pp_student(p, dof)


@dataclass(frozen=True)
class FisherSpec:
    n: int
    alpha_pp: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n}")
        if not self.alpha_pp > 0:
            raise ValueError(f"alpha_pp must be positive, got {self.alpha_pp}")


# --------------------------------------------------------------------------
# error measures
# --------------------------------------------------------------------------

def subspace_error(U: np.ndarray, U_hat: np.ndarray) -> float:
    """Squared Grassmann distance ``sum theta_i^2`` between column spans."""
    _, theta, _ = nk.principal_angles(U, U_hat)
    return float(np.sum(theta ** 2))


def divergence(params: MetricParams, theta: ManifoldPoint, theta_hat: ManifoldPoint) -> float:
    """Symmetric divergence between two points of the quotient.

    ``theta_hat`` is first rotated into the gauge that aligns its subspace
    with that of ``theta`` through the SVD of ``U^H U_hat``. The result is the
    squared metric length of the resulting Stiefel-times-HPD curve.

    Raises
    ------
    AlignmentError
        If the largest principal angle is within ``1e-6`` of ``pi/2``, where
        the alignment is not defined.
    """
    O, angles, O_hat = nk.principal_angles(theta.U, theta_hat.U)
    if angles[-1] > np.pi / 2 - ALIGNMENT_TOL:
        raise AlignmentError(
            f"subspaces are (nearly) orthogonal: largest principal angle {angles[-1]:.6f}")
    rot = O @ O_hat.conj().T
    M = rot @ theta_hat.Sigma @ rot.conj().T
    Sih = theta.Sigma_invsqrt
    L = nk.hermitian_matfun(Sih @ M @ Sih, "log", rtol=0.0)
    trL = np.trace(L).real
    return float(params.alpha * np.linalg.norm(L) ** 2 + params.beta * trL ** 2
                 + np.sum(angles ** 2))


# --------------------------------------------------------------------------
# orthonormal basis and Fisher information
# --------------------------------------------------------------------------

@dataclass
class TangentBasis:
    """Orthonormal basis of the product tangent space, in blocks ``(U_perp, U, Sigma)``."""

    vectors: list
    blocks: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vectors)

    def __getitem__(self, i: int) -> TangentVector:
        return self.vectors[i]


def _sigma_direction(point: ManifoldPoint, params: MetricParams, H: np.ndarray) -> np.ndarray:
    a, b, k = params.alpha, params.beta, params.k
    Sh = point.Sigma_sqrt
    c = (np.sqrt(a) - np.sqrt(a + k * b)) / (k * np.sqrt(a) * np.sqrt(a + k * b))
    return Sh @ H @ Sh / np.sqrt(a) + c * np.trace(H).real * point.Sigma


def tangent_basis(params: MetricParams, point: ManifoldPoint) -> TangentBasis:
    """Orthonormal basis of the ``2pk``-dimensional product tangent space.

    The ``U_perp`` block uses the deterministic complement from a complete QR
    of ``U``. Traces of inverses of the Fisher matrix do not depend on this
    choice.
    """
    p, k = point.p, point.k
    U = point.U
    Up = nk.orth_complement(U)
    zS = np.zeros((k, k), complex)
    zU = np.zeros((p, k), complex)
    vecs = []

    for i in range(p - k):
        for j in range(k):
            K = np.zeros((p - k, k), complex)
            K[i, j] = 1.0
            vecs.append(TangentVector(Up @ K, zS))
            vecs.append(TangentVector(1j * (Up @ K), zS))
    n_perp = len(vecs)

    for i in range(k):
        for j in range(i):
            Om = np.zeros((k, k), complex)
            Om[i, j], Om[j, i] = 1.0, -1.0
            vecs.append(TangentVector(U @ Om, zS))
    for i in range(k):
        for j in range(i + 1):
            Om = np.zeros((k, k), complex)
            if i == j:
                Om[i, i] = np.sqrt(2.0) * 1j
            else:
                Om[i, j] = Om[j, i] = 1j
            vecs.append(TangentVector(U @ Om, zS))
    n_U = len(vecs) - n_perp

    s = 1.0 / np.sqrt(2.0)
    for i in range(k):
        for j in range(i + 1):
            H = np.zeros((k, k), complex)
            if i == j:
                H[i, i] = 1.0
            else:
                H[i, j] = H[j, i] = s
            vecs.append(TangentVector(zU, _sigma_direction(point, params, H)))
    for i in range(k):
        for j in range(i):
            H = np.zeros((k, k), complex)
            H[i, j], H[j, i] = 1j * s, -1j * s
            # traceless, so only the congruence part survives
            vecs.append(TangentVector(zU, point.Sigma_sqrt @ H @ point.Sigma_sqrt
                                      / np.sqrt(params.alpha)))
    n_S = len(vecs) - n_perp - n_U

    blocks = {"U_perp": slice(0, n_perp),
              "U": slice(n_perp, n_perp + n_U),
              "Sigma": slice(n_perp + n_U, n_perp + n_U + n_S)}
    return TangentBasis(vecs, blocks)


def fisher_inner_hpd(spec: FisherSpec, R: np.ndarray, xiR: np.ndarray, etaR: np.ndarray) -> float:
    """Fisher metric of the elliptical model on HPD matrices."""
    Rinv = np.linalg.inv(R)
    a = Rinv @ xiR
    b = Rinv @ etaR
    ta, tb = np.trace(a).real, np.trace(b).real
    return float(spec.n * spec.alpha_pp * np.sum(a.T * b).real
                 + spec.n * (spec.alpha_pp - 1.0) * ta * tb)


def fisher_inner_product(spec: FisherSpec, point: ManifoldPoint,
                         xi: TangentVector, eta: TangentVector) -> float:
    """Fisher metric pulled back to the product manifold by ``I + U Sigma U^H``."""
    R = embed_full(point)
    return fisher_inner_hpd(spec, R, dembed(point, xi), dembed(point, eta))


@dataclass
class FimBundle:
    """Fisher matrix ``F`` with its ``F_tilde`` and ``F_Uperp`` blocks."""

    F: np.ndarray
    F_tilde: np.ndarray
    F_Uperp: np.ndarray
    blocks: dict
    spec: FisherSpec
    rank: int


def _fisher_gram(spec: FisherSpec, point: ManifoldPoint, vecs: Sequence[TangentVector]) -> np.ndarray:
    R = embed_full(point)
    L = scipy.linalg.cholesky(R, lower=True)
    A = []
    for v in vecs:
        D = dembed(point, v)
        X = scipy.linalg.solve_triangular(L, D, lower=True)
        A.append(scipy.linalg.solve_triangular(L, X.conj().T, lower=True))
    A = np.array(A).reshape(len(vecs), -1)
    # tr(A_q A_l) = <A_q, A_l> for Hermitian A
    G = (A.conj() @ A.T).real
    t = np.einsum("qii->q", A.reshape(len(vecs), point.p, point.p)).real
    F = spec.n * spec.alpha_pp * G + spec.n * (spec.alpha_pp - 1.0) * np.outer(t, t)
    return 0.5 * (F + F.T)


def assemble_fim(spec: FisherSpec, params: MetricParams, point: ManifoldPoint) -> FimBundle:
    """Fisher information matrix in the orthonormal basis of :func:`tangent_basis`.

    Raises
    ------
    DomainError
        If ``alpha_pp <= p / (p + 1)``, where the Fisher metric is indefinite
        along the identity direction.
    StructureError
        If the numerical rank of ``F`` differs from ``2pk - k^2``.
    """
    p = point.p
    if spec.alpha_pp <= p / (p + 1.0):
        raise DomainError(f"alpha_pp = {spec.alpha_pp} must exceed p/(p+1) = {p / (p + 1.0):.6f}")
    basis = tangent_basis(params, point)
    F = _fisher_gram(spec, point, basis.vectors)
    w = np.linalg.eigvalsh(F)
    rank = int(np.sum(w > RANK_RTOL * w[-1]))
    expected = params.dim
    if rank != expected:
        raise StructureError(f"Fisher matrix has rank {rank}, expected {expected}")
    bp, bs = basis.blocks["U_perp"], basis.blocks["Sigma"]
    F_perp = F[bp, bp]
    F_tilde = scipy.linalg.block_diag(F_perp, F[bs, bs])
    return FimBundle(F, F_tilde, F_perp, basis.blocks, spec, rank)


def bound_total(bundle: FimBundle) -> float:
    """``tr(F^+)`` keeping the ``2pk - k^2`` leading eigenvalues."""
    w = np.linalg.eigvalsh(bundle.F)
    keep = w[w > RANK_RTOL * w[-1]]
    if keep.size != bundle.rank:
        raise StructureError(f"pseudo-inverse keeps {keep.size} eigenvalues, expected {bundle.rank}")
    return float(np.sum(1.0 / keep))


def _trace_inv_spd(A: np.ndarray, what: str) -> float:
    try:
        c = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"{what} is not positive definite") from exc
    return float(np.trace(scipy.linalg.cho_solve(c, np.eye(A.shape[0]))))


def bound_total_tilde(bundle: FimBundle) -> float:
    """Conjectured bound ``tr(F_tilde^-1)`` on the divergence error."""
    return _trace_inv_spd(bundle.F_tilde, "F_tilde")


def bound_subspace(bundle: FimBundle) -> float:
    """Bound ``tr(F_Uperp^-1)`` on the squared subspace error."""
    return _trace_inv_spd(bundle.F_Uperp, "F_Uperp")


def bound_subspace_closed(spec: FisherSpec, p: int, k: int, sigma_eigs: Iterable[float]) -> float:
    """Closed form ``(p - k) / (n alpha_pp) sum_i (1 + s_i) / s_i^2``."""
    s = np.asarray(list(sigma_eigs), dtype=float)
    if s.shape != (k,):
        raise ValueError(f"expected {k} eigenvalues, got {s.shape}")
    if np.any(s <= 0):
        raise ValueError("eigenvalues of Sigma must be positive")
    return float((p - k) / (spec.n * spec.alpha_pp) * np.sum((1.0 + s) / s ** 2))


def all_bounds(spec: FisherSpec, params: MetricParams, point: ManifoldPoint) -> dict:
    """All four bound values at ``point``, keyed by bound name."""
    b = assemble_fim(spec, params, point)
    sig = np.linalg.eigvalsh(point.Sigma)
    return {BOUND_TOTAL: bound_total(b),
            BOUND_TOTAL_TILDE: bound_total_tilde(b),
            BOUND_SUBSPACE: bound_subspace(b),
            BOUND_SUBSPACE_CLOSED: bound_subspace_closed(spec, point.p, point.k, sig)}


def bound_rows(spec: FisherSpec, p: int, k: int, bounds: dict) -> list:
    return [{"p": p, "k": k, "n": spec.n, "alpha_pp": spec.alpha_pp,
             "bound_name": name, "value": value} for name, value in bounds.items()]


def write_bound_csv(path: Union[str, PathLike], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BOUND_CSV_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({**r, "alpha_pp": repr(float(r["alpha_pp"])), "value": repr(float(r["value"]))})
