"""Spiked covariance model, Tyler's cost and the data side of the problem.

Covariances have the form ``R = I_p + U Sigma U^H``. The Tyler cost on
Hermitian positive definite matrices is

    L(R) = p * sum_i log(x_i^H R^-1 x_i) + n * log det R

and is lifted to the quotient through ``theta -> I_p + U Sigma U^H``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from os import PathLike
from typing import Union

import numpy as np
import scipy.linalg

from . import numkernel as nk
from .exceptions import DimensionError, DomainError
from .manifold import (ManifoldPoint, MetricParams, TangentVector, complex_gaussian,
                       egrad_to_rgrad, ehess_to_rhess)

GAUSSIAN_DOF = 1e6
PSCM_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``n`` complex observations of dimension ``p``, stored as the rows of ``X``."""

    X: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=complex)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionError(f"samples must form a nonempty (n, p) array, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("samples contain non-finite entries")
        zero = np.flatnonzero(~np.any(X != 0, axis=1))
        if zero.size:
            raise ValueError(f"zero sample at row {zero[0]}; Tyler's cost is undefined there")
        X.flags.writeable = False
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def scm(self) -> np.ndarray:
        """Sample covariance ``n^-1 sum_i x_i x_i^H``."""
        return nk.herm(self.X.T @ self.X.conj() / self.n)

    def to_csv(self, path: Union[str, PathLike]) -> None:
        """Write one row per sample: ``re(x_1), im(x_1), ..., re(x_p), im(x_p)``."""
        header = [f"{part}{j + 1}" for j in range(self.p) for part in ("re", "im")]
        inter = np.empty((self.n, 2 * self.p))
        inter[:, 0::2] = self.X.real
        inter[:, 1::2] = self.X.imag
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in inter:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: Union[str, PathLike]) -> "SampleSet":
        """Read the format written by :meth:`to_csv`.

        Raises
        ------
        ValueError
            On malformed rows; the message carries the 1-based line number.
        """
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty file (header row required)") from None
            width = len(header)
            if width == 0 or width % 2:
                raise ValueError(f"{path}:1: header must have an even, nonzero column count")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != width:
                    raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
                try:
                    rows.append([float(c) for c in row])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not rows:
            raise ValueError(f"{path}: no samples (n < 1)")
        arr = np.asarray(rows)
        return cls(arr[:, 0::2] + 1j * arr[:, 1::2])


@dataclass(frozen=True, eq=False)
class StudentTParams:
    """Complex Student t with ``dof`` degrees of freedom and scatter matrix ``scatter``."""

    dof: float
    scatter: np.ndarray

    def __post_init__(self):
        if not self.dof > 0:
            raise ValueError(f"dof must be positive, got {self.dof}")
        object.__setattr__(self, "scatter", nk.herm(np.asarray(self.scatter, dtype=complex)))


# --------------------------------------------------------------------------
# embedding
# --------------------------------------------------------------------------

def embed(point: ManifoldPoint) -> np.ndarray:
    """``U Sigma U^H``."""
    return nk.herm(point.U @ point.Sigma @ point.U.conj().T)


def embed_full(point: ManifoldPoint) -> np.ndarray:
    """``I_p + U Sigma U^H``."""
    return np.eye(point.p) + embed(point)


def dembed(point: ManifoldPoint, xi: TangentVector) -> np.ndarray:
    """Directional derivative ``U S xi_U^H + xi_U S U^H + U xi_S U^H``."""
    U, S = point.U, point.Sigma
    A = xi.xiU @ S @ U.conj().T
    return nk.herm(A + A.conj().T + U @ xi.xiSigma @ U.conj().T)


# --------------------------------------------------------------------------
# Tyler cost on HPD matrices
# --------------------------------------------------------------------------

class _TylerState:
    """Per-``R`` quantities shared by the cost, gradient and Hessian."""

    def __init__(self, R: np.ndarray, data: SampleSet):
        R = nk.herm(np.asarray(R, dtype=complex))
        try:
            self.chol = scipy.linalg.cho_factor(R, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise DomainError(f"covariance is not Hermitian positive definite: {exc}") from None
        L = self.chol[0]
        self.R = R
        self.data = data
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(L).real)))
        # rows a_i = (R^-1 x_i)^T ; quadratic forms q_i = x_i^H R^-1 x_i
        self.A = scipy.linalg.cho_solve(self.chol, data.X.T, check_finite=False).T
        self.q = np.einsum("ij,ij->i", data.X.conj(), self.A).real
        self._Rinv = None
        self._psi = None

    @property
    def Rinv(self) -> np.ndarray:
        if self._Rinv is None:
            p = self.R.shape[0]
            self._Rinv = nk.herm(scipy.linalg.cho_solve(self.chol, np.eye(p), check_finite=False))
        return self._Rinv

    @property
    def psi(self) -> np.ndarray:
        if self._psi is None:
            X = self.data.X
            self._psi = nk.herm((X.T / self.q) @ X.conj())
        return self._psi

    def cost(self) -> float:
        n, p = self.data.n, self.data.p
        return float(p * np.sum(np.log(self.q)) + n * self.logdet)

    def dpsi(self, xiR: np.ndarray) -> np.ndarray:
        X = self.data.X
        w = np.einsum("ij,ij->i", self.A.conj(), self.A @ xiR.T).real / self.q ** 2
        return nk.herm((X.T * w) @ X.conj())

    def egrad(self) -> np.ndarray:
        n, p = self.data.n, self.data.p
        Ri = self.Rinv
        return nk.herm(n * Ri - p * (Ri @ self.psi @ Ri))

    def ehess(self, xiR: np.ndarray) -> np.ndarray:
        n, p = self.data.n, self.data.p
        Ri = self.Rinv
        t1 = 2 * p * (Ri @ nk.herm(xiR @ Ri @ self.psi) @ Ri)
        t2 = Ri @ (p * self.dpsi(xiR) + n * xiR) @ Ri
        return nk.herm(t1 - t2)


def tyler_cost_hpd(R: np.ndarray, data: SampleSet) -> float:
    """Tyler's cost ``p sum log(x^H R^-1 x) + n log det R``.

    Raises
    ------
    DomainError
        If ``R`` is not Hermitian positive definite.
    """
    return _TylerState(R, data).cost()


def tyler_psi(R: np.ndarray, data: SampleSet) -> np.ndarray:
    """``Psi(R) = sum_i x_i x_i^H / (x_i^H R^-1 x_i)``."""
    return _TylerState(R, data).psi


def tyler_dpsi(R: np.ndarray, data: SampleSet, xiR: np.ndarray) -> np.ndarray:
    """Directional derivative of :func:`tyler_psi` along the Hermitian ``xiR``."""
    return _TylerState(R, data).dpsi(np.asarray(xiR, dtype=complex))


def tyler_egrad_hpd(R: np.ndarray, data: SampleSet) -> np.ndarray:
    """Euclidean gradient ``R^-1 (n R - p Psi(R)) R^-1``."""
    return _TylerState(R, data).egrad()


def tyler_ehess_hpd(R: np.ndarray, data: SampleSet, xiR: np.ndarray) -> np.ndarray:
    """Euclidean Hessian of Tyler's cost at ``R`` along ``xiR``."""
    return _TylerState(R, data).ehess(np.asarray(xiR, dtype=complex))


# --------------------------------------------------------------------------
# lifted cost
# --------------------------------------------------------------------------

def tyler_cost(point: ManifoldPoint, data: SampleSet) -> float:
    """Tyler's cost at ``I_p + U Sigma U^H``."""
    return tyler_cost_hpd(embed_full(point), data)


def lift_egrad(point: ManifoldPoint, Gpp: np.ndarray) -> TangentVector:
    """Euclidean gradient ``(2 G U Sigma, U^H G U)`` of the lifted function."""
    U = point.U
    return TangentVector(2 * Gpp @ U @ point.Sigma, nk.herm(U.conj().T @ Gpp @ U))


def lift_ehess(point: ManifoldPoint, Gpp: np.ndarray, Hpp: np.ndarray,
               xi: TangentVector) -> TangentVector:
    """Euclidean Hessian-vector product of the lifted function.

    ``Hpp`` is the HPD-level Hessian evaluated along ``dembed(point, xi)``.
    """
    U, S = point.U, point.Sigma
    xU, xS = xi.xiU, xi.xiSigma
    hU = 2 * Hpp @ U @ S + 2 * Gpp @ (xU @ S + U @ xS)
    GxU = U.conj().T @ Gpp @ xU
    hS = U.conj().T @ Hpp @ U + GxU + GxU.conj().T
    return TangentVector(hU, hS)


class TylerProblem:
    """Tyler's cost on the quotient, with Riemannian gradient and Hessian.

    The HPD-level factorization is cached for the last point visited, so that
    a solver asking for cost, gradient and several Hessian-vector products at
    the same iterate factors ``R`` only once.
    """

    def __init__(self, data: SampleSet, params: MetricParams):
        if data.p != params.p:
            raise DimensionError(f"data dimension {data.p} != metric dimension {params.p}")
        self.data = data
        self.params = params
        self._point = None
        self._state = None
        self._egrad = None

    def _at(self, point: ManifoldPoint) -> _TylerState:
        if point is not self._point:
            self._state = _TylerState(embed_full(point), self.data)
            self._point = point
            self._egrad = None
        return self._state

    def cost(self, point: ManifoldPoint) -> float:
        return self._at(point).cost()

    def egrad(self, point: ManifoldPoint) -> TangentVector:
        st = self._at(point)
        if self._egrad is None:
            self._egrad = lift_egrad(point, st.egrad())
        return self._egrad

    def rgrad(self, point: ManifoldPoint) -> TangentVector:
        return egrad_to_rgrad(self.params, point, self.egrad(point))

    def ehess(self, point: ManifoldPoint, xi: TangentVector) -> TangentVector:
        st = self._at(point)
        Hpp = st.ehess(dembed(point, xi))
        return lift_ehess(point, st.egrad(), Hpp, xi)

    def rhess(self, point: ManifoldPoint, xi: TangentVector) -> TangentVector:
        G = self.egrad(point)
        return ehess_to_rhess(self.params, point, G, self.ehess(point, xi), xi)

    def objective(self):
        from .optim import Objective
        return Objective(cost=self.cost, rgrad=self.rgrad, rhess=self.rhess)


# --------------------------------------------------------------------------
# data generation and baseline
# --------------------------------------------------------------------------

def sample_student_t(params: StudentTParams, n: int, rng: np.random.Generator) -> SampleSet:
    """Draw ``n`` samples ``x = sqrt(d / s) R^{1/2} z`` with ``s ~ Gamma(d, 1)``.

    ``z`` is standard circular complex Gaussian, so the scatter matrix is
    ``R`` and ``E[x x^H] = d / (d - 1) R`` for ``d > 1``. For
    ``dof >= 1e6`` the mixing variable is fixed to ``d`` (Gaussian samples).
    """
    R = params.scatter
    p = R.shape[0]
    root = nk.hermitian_matfun(R, "sqrt", rtol=0.0)
    Z = complex_gaussian(rng, (n, p))
    d = params.dof
    if d >= GAUSSIAN_DOF:
        tex = np.ones(n)
    else:
        tex = np.sqrt(d / rng.gamma(shape=d, scale=1.0, size=n))
    return SampleSet(tex[:, None] * (Z @ root.T))


def make_spiked(p: int, k: int, sigma: float, c: float, rng: np.random.Generator
                ) -> tuple[ManifoldPoint, np.ndarray]:
    """Random spiked covariance ``R = I_p + sigma U Sigma U^H``.

    ``Sigma`` is diagonal with extreme entries ``1/sqrt(c)`` and ``sqrt(c)``,
    the others uniform in between, then rescaled to trace ``k``. For ``k = 1``
    the single entry is 1. Returns the truth ``(U, sigma Sigma)`` and ``R``.
    """
    if c < 1:
        raise ValueError(f"condition number must be >= 1, got {c}")
    if not sigma > 0:
        raise ValueError(f"spike-to-noise ratio must be positive, got {sigma}")
    U = nk.thin_qr(complex_gaussian(rng, (p, k)))[0]
    lo, hi = 1.0 / np.sqrt(c), np.sqrt(c)
    if k == 1:
        diag = np.ones(1)
    else:
        diag = np.concatenate([[lo, hi], rng.uniform(lo, hi, size=k - 2)])
    diag = diag * (k / diag.sum())
    truth = ManifoldPoint(U, np.diag(sigma * diag))
    return truth, embed_full(truth)


def pscm(data: SampleSet, k: int) -> ManifoldPoint:
    """Projection of the sample covariance onto ``I_p + {rank-k PSD}``.

    Keeps the top-``k`` eigenpairs of the SCM with ``Sigma = max(lambda - 1, eps)``;
    the floor ``eps = 1e-8`` keeps ``Sigma`` positive definite.
    """
    lam, V = nk.eigh(data.scm())
    top = np.argsort(lam)[::-1][:k]
    spikes = np.maximum(lam[top] - 1.0, PSCM_FLOOR)
    return ManifoldPoint(V[:, top], np.diag(spikes))
