"""Riemannian gradient descent and trust-region solvers on the quotient.

Both solvers only talk to the problem through an :class:`Objective` and to
the geometry through :mod:`spikedtyler.manifold`. Iterates always stay valid
manifold points; failures are reported through :attr:`SolveResult.status`
rather than raised.
"""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import manifold as mf
from .exceptions import DegeneracyError, DomainError
from .manifold import ManifoldPoint, MetricParams, TangentVector

REORTHONORMALIZE_EVERY = 50


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAILURE = "line_search_failure"
    NUMERICAL_BREAKDOWN = "numerical_breakdown"


@dataclass
class Objective:
    """Cost function on the quotient with its Riemannian derivatives.

    ``rhess`` may be omitted; :func:`solve_rtr` then falls back to finite
    differences of ``rgrad`` when the configuration allows it.
    """

    cost: Callable[[ManifoldPoint], float]
    rgrad: Callable[[ManifoldPoint], TangentVector]
    rhess: Optional[Callable[[ManifoldPoint, TangentVector], TangentVector]] = None


@dataclass
class ArmijoConfig:
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50
    growth: float = 2.0   # next initial step length = growth * last accepted length

    def __post_init__(self):
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")


@dataclass
class TRConfig:
    delta0: Optional[float] = None      # default: delta_max / 8
    delta_max: Optional[float] = None   # default: sqrt(manifold dimension)
    rho_accept: float = 0.1
    kappa: float = 0.1
    theta: float = 1.0
    max_inner: Optional[int] = None     # default: manifold dimension
    fd_hessian: bool = False
    fd_step: float = 1e-6


@dataclass
class SolverConfig:
    max_iters: int = 1000
    grad_tol: float = 1e-6
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    tr: TRConfig = field(default_factory=TRConfig)

    def __post_init__(self):
        if self.max_iters < 0 or not self.grad_tol > 0:
            raise ValueError("max_iters must be >= 0 and grad_tol > 0")


@dataclass
class SolveResult:
    point: ManifoldPoint
    costs: list
    grad_norms: list
    status: Status
    iterations: int
    inner_iterations: int
    seconds: float

    @property
    def cost(self) -> float:
        return self.costs[-1]

    @property
    def grad_norm(self) -> float:
        return self.grad_norms[-1]


@dataclass
class LineSearchResult:
    step: float
    point: ManifoldPoint
    cost: float
    backtracks: int


class LineSearchError(RuntimeError):
    pass


def _emit(sink, record: dict) -> None:
    if sink is None:
        return
    if hasattr(sink, "write"):
        sink.write(json.dumps(record) + "\n")
    else:
        sink(record)


def armijo_linesearch(objective: Objective, params: MetricParams, point: ManifoldPoint,
                      direction: TangentVector, slope: float,
                      config: Optional[ArmijoConfig] = None, *,
                      f0: Optional[float] = None,
                      initial_step: Optional[float] = None) -> LineSearchResult:
    """Backtracking search for ``f(R(t d)) <= f + c1 t slope``.

    ``initial_step`` defaults to ``1 / ||direction||``, i.e. a unit-length
    first trial.

    Raises
    ------
    ValueError
        If ``slope`` is not negative.
    LineSearchError
        If no acceptable step is found within ``max_backtracks`` halvings.
    """
    config = config or ArmijoConfig()
    if not slope < 0:
        raise ValueError(f"direction is not a descent direction (slope {slope:.3e})")
    if f0 is None:
        f0 = objective.cost(point)
    t = initial_step if initial_step is not None else 1.0 / mf.norm(params, point, direction)
    for nb in range(config.max_backtracks + 1):
        try:
            cand = mf.retract(params, point, t * direction)
            fc = objective.cost(cand)
        except (DegeneracyError, DomainError, ValueError, np.linalg.LinAlgError):
            fc = math.inf
        if math.isfinite(fc) and fc <= f0 + config.c1 * t * slope:
            return LineSearchResult(t, cand, fc, nb)
        t *= config.backtrack
    raise LineSearchError(f"no Armijo step after {config.max_backtracks} backtracks")


def solve_rgd(objective: Objective, start: ManifoldPoint, params: MetricParams,
              config: Optional[SolverConfig] = None, sink=None) -> SolveResult:
    """Riemannian steepest descent with Armijo backtracking."""
    config = config or SolverConfig()
    t0 = time.perf_counter()
    x = start
    costs, gnorms = [], []
    status = Status.MAX_ITERS
    it = 0
    try:
        f = objective.cost(x)
        g = objective.rgrad(x)
        gn = mf.norm(params, x, g)
    except (DomainError, np.linalg.LinAlgError, ValueError):
        return SolveResult(x, [math.nan], [math.nan], Status.NUMERICAL_BREAKDOWN,
                           0, 0, time.perf_counter() - t0)
    costs.append(f)
    gnorms.append(gn)
    step_length = 1.0
    while True:
        if not (math.isfinite(f) and math.isfinite(gn)):
            status = Status.NUMERICAL_BREAKDOWN
            break
        if gn < config.grad_tol:
            status = Status.CONVERGED
            break
        if it >= config.max_iters:
            status = Status.MAX_ITERS
            break
        try:
            ls = armijo_linesearch(objective, params, x, -g, -gn * gn, config.armijo,
                                   f0=f, initial_step=step_length / gn)
        except LineSearchError:
            status = Status.LINE_SEARCH_FAILURE
            break
        it += 1
        step_length = config.armijo.growth * ls.step * gn
        x = ls.point
        if it % REORTHONORMALIZE_EVERY == 0:
            x = mf.reorthonormalize(x)
            ls.cost = objective.cost(x)
        f = ls.cost
        try:
            g = objective.rgrad(x)
            gn = mf.norm(params, x, g)
        except (DomainError, np.linalg.LinAlgError, ValueError):
            status = Status.NUMERICAL_BREAKDOWN
            break
        costs.append(f)
        gnorms.append(gn)
        _emit(sink, {"iteration": it, "cost": f, "grad_norm": gn, "step": ls.step})
    return SolveResult(x, costs, gnorms, status, it, 0, time.perf_counter() - t0)


def _fd_hessian(objective: Objective, params: MetricParams, h: float):
    """``P^H((rgrad(R(h xi)) - rgrad(x)) / h)`` with unit-normalized step."""
    def hess(x: ManifoldPoint, xi: TangentVector) -> TangentVector:
        nx = mf.norm(params, x, xi)
        if nx == 0:
            return TangentVector.zeros(x.p, x.k)
        s = h / nx
        g0 = objective.rgrad(x)
        g1 = objective.rgrad(mf.retract(params, x, s * xi))
        d = mf.project_tangent(x, (g1 - g0) / s)
        return mf.project_horizontal(params, x, d)
    return hess


def _truncated_cg(hess, params: MetricParams, x: ManifoldPoint, grad: TangentVector,
                  gnorm: float, delta: float, tr: TRConfig, max_inner: int):
    """Steihaug-Toint truncated CG for ``min <g, e> + <H e, e> / 2, ||e|| <= delta``.

    Returns ``(eta, Heta, inner_iterations, hit_boundary)``.
    """
    inner = lambda a, b: mf.inner(params, x, a, b)
    eta = TangentVector.zeros(x.p, x.k)
    Heta = TangentVector.zeros(x.p, x.k)
    r = grad
    r_r = gnorm * gnorm
    d = -r
    e_e = 0.0
    stop = gnorm * min(gnorm ** tr.theta, tr.kappa)
    j = 0
    for j in range(1, max_inner + 1):
        Hd = hess(x, d)
        dHd = inner(d, Hd)
        e_d = inner(eta, d)
        d_d = inner(d, d)
        alpha = r_r / dHd if dHd != 0 else math.inf
        e_e_new = e_e + 2 * alpha * e_d + alpha * alpha * d_d
        if dHd <= 0 or e_e_new >= delta * delta:
            tau = (-e_d + math.sqrt(max(e_d * e_d + d_d * (delta * delta - e_e), 0.0))) / d_d
            return eta + tau * d, Heta + tau * Hd, j, True
        eta = eta + alpha * d
        Heta = Heta + alpha * Hd
        e_e = e_e_new
        r = r + alpha * Hd
        r = mf.project_horizontal(params, x, r)
        r_r_new = inner(r, r)
        if math.sqrt(r_r_new) <= stop:
            break
        beta = r_r_new / r_r
        d = -r + beta * d
        r_r = r_r_new
    return eta, Heta, j, False


def solve_rtr(objective: Objective, start: ManifoldPoint, params: MetricParams,
              config: Optional[SolverConfig] = None, sink=None) -> SolveResult:
    """Riemannian trust-region method with a truncated-CG inner solver.

    The radius shrinks by 4 when ``rho < 1/4`` and doubles (up to
    ``delta_max``) when ``rho > 3/4`` and the inner step hit the boundary.
    Steps with ``rho > rho_accept`` are accepted.
    """
    config = config or SolverConfig()
    tr = config.tr
    if objective.rhess is not None:
        hess = objective.rhess
    elif tr.fd_hessian:
        hess = _fd_hessian(objective, params, tr.fd_step)
    else:
        raise ValueError("objective has no rhess; set tr.fd_hessian to use finite differences")
    delta_max = tr.delta_max if tr.delta_max is not None else math.sqrt(params.dim)
    delta = tr.delta0 if tr.delta0 is not None else delta_max / 8
    max_inner = tr.max_inner if tr.max_inner is not None else params.dim

    t0 = time.perf_counter()
    x = start
    costs, gnorms = [], []
    it = inner_total = 0
    try:
        f = objective.cost(x)
        g = objective.rgrad(x)
        gn = mf.norm(params, x, g)
    except (DomainError, np.linalg.LinAlgError, ValueError):
        return SolveResult(x, [math.nan], [math.nan], Status.NUMERICAL_BREAKDOWN,
                           0, 0, time.perf_counter() - t0)
    costs.append(f)
    gnorms.append(gn)
    status = Status.MAX_ITERS
    while True:
        if not (math.isfinite(f) and math.isfinite(gn)):
            status = Status.NUMERICAL_BREAKDOWN
            break
        if gn < config.grad_tol:
            status = Status.CONVERGED
            break
        if it >= config.max_iters:
            status = Status.MAX_ITERS
            break
        it += 1
        try:
            eta, Heta, n_inner, boundary = _truncated_cg(hess, params, x, g, gn, delta,
                                                         tr, max_inner)
            inner_total += n_inner
            model_dec = -(mf.inner(params, x, g, eta) + 0.5 * mf.inner(params, x, Heta, eta))
            reg = max(1.0, abs(f)) * np.finfo(float).eps * 1e3
            if not math.isfinite(model_dec) or model_dec + reg <= 0:
                status = Status.NUMERICAL_BREAKDOWN
                break
            try:
                cand = mf.retract(params, x, eta)
                fc = objective.cost(cand)
            except (DegeneracyError, DomainError, ValueError, np.linalg.LinAlgError):
                cand, fc = None, math.inf
            rho = (f - fc + reg) / (model_dec + reg) if math.isfinite(fc) else -math.inf
        except (DomainError, np.linalg.LinAlgError) as exc:  # pragma: no cover - defensive
            status = Status.NUMERICAL_BREAKDOWN
            break
        if rho < 0.25:
            delta *= 0.25
        elif rho > 0.75 and boundary:
            delta = min(2 * delta, delta_max)
        accepted = rho > tr.rho_accept
        if accepted:
            x = cand
            if it % REORTHONORMALIZE_EVERY == 0:
                x = mf.reorthonormalize(x)
                fc = objective.cost(x)
            f = fc
            try:
                g = objective.rgrad(x)
                gn = mf.norm(params, x, g)
            except (DomainError, np.linalg.LinAlgError, ValueError):
                status = Status.NUMERICAL_BREAKDOWN
                break
        costs.append(f)
        gnorms.append(gn)
        _emit(sink, {"iteration": it, "cost": f, "grad_norm": gn, "radius": delta,
                     "rho": rho if math.isfinite(rho) else None, "accepted": bool(accepted),
                     "inner": n_inner})
        if delta < 1e-14 * delta_max:
            status = Status.NUMERICAL_BREAKDOWN
            break
    return SolveResult(x, costs, gnorms, status, it, inner_total, time.perf_counter() - t0)
