import io
import json
import math

import numpy as np
import pytest

from spikedtyler import manifold as mf
from spikedtyler import model as md
from spikedtyler import numkernel as nk
from spikedtyler.optim import (ArmijoConfig, LineSearchError, Objective, SolverConfig, Status,
                               TRConfig, armijo_linesearch, solve_rgd, solve_rtr)


def toy_objective(params, target):
    """``f = ||U S U^H - E*||_F^2`` with its exact derivatives."""
    E = md.embed(target)

    def cost(x):
        return float(np.linalg.norm(md.embed(x) - E) ** 2)

    def egrad(x):
        return md.lift_egrad(x, 2 * (md.embed(x) - E))

    def rgrad(x):
        return mf.egrad_to_rgrad(params, x, egrad(x))

    def rhess(x, xi):
        Gpp = 2 * (md.embed(x) - E)
        H = md.lift_ehess(x, Gpp, 2 * md.dembed(x, xi), xi)
        return mf.ehess_to_rhess(params, x, egrad(x), H, xi)

    return Objective(cost, rgrad, rhess)


def nearby(params, x, rng, scale=0.3):
    return mf.retract(params, x, scale * mf.random_tangent(params, x, rng, horizontal=True))


def tyler_problem(seed, sigma=50.0, c=20.0, n=200, p=16, k=4, dof=3.0):
    rng = np.random.default_rng(seed)
    truth, R = md.make_spiked(p, k, sigma, c, rng)
    data = md.sample_student_t(md.StudentTParams(dof, R), n, rng)
    params = mf.MetricParams.student_matched(p, k, dof)
    start = mf.ManifoldPoint(md.pscm(data, k).U, np.eye(k))
    return params, md.TylerProblem(data, params), start


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        ArmijoConfig(backtrack=1.0)
    with pytest.raises(ValueError):
        ArmijoConfig(c1=0.0)
    with pytest.raises(ValueError):
        SolverConfig(grad_tol=0.0)


# --------------------------------------------------------------------------
# line search
# --------------------------------------------------------------------------

def test_armijo_exact_quadratic(rng):
    """Along a Sigma-only direction the cost ``tr(B U S U^H)`` is exactly quadratic in t."""
    params = mf.MetricParams(5, 2)
    x = mf.random_point(params, rng)
    B = nk.hermitian_matfun(nk.herm(mf.complex_gaussian(rng, (5, 5))), "exp")
    obj = Objective(lambda y: float(np.trace(B @ md.embed(y)).real), None)
    A = x.U.conj().T @ B @ x.U
    d = mf.TangentVector(np.zeros((5, 2)), -x.Sigma @ A @ x.Sigma)
    b = np.trace(A @ d.xiSigma).real                          # slope
    c = np.trace(A @ d.xiSigma @ x.Sigma_inv @ d.xiSigma).real   # curvature
    t_star = -b / c
    cfg = ArmijoConfig()
    res = armijo_linesearch(obj, params, x, d, b, cfg, initial_step=8 * t_star)
    assert res.backtracks == 3 and np.isclose(res.step, t_star)
    for t0 in np.geomspace(2.5, 40, 7) * t_star:
        res = armijo_linesearch(obj, params, x, d, b, cfg, initial_step=t0)
        # first admissible halving lands in ((1-c1) t*, 2 (1-c1) t*]
        assert (1 - cfg.c1) * t_star < res.step <= 2 * (1 - cfg.c1) * t_star


def test_armijo_on_tyler_and_precondition():
    params, prob, start = tyler_problem(3)
    obj = prob.objective()
    g = prob.rgrad(start)
    gn = mf.norm(params, start, g)
    f0 = prob.cost(start)
    res = armijo_linesearch(obj, params, start, -g, -gn ** 2)
    assert res.cost <= f0 - 1e-4 * res.step * gn ** 2
    with pytest.raises(ValueError, match="descent"):
        armijo_linesearch(obj, params, start, g, gn ** 2)
    with pytest.raises(ValueError):
        armijo_linesearch(obj, params, start, g, 0.0)


def test_armijo_exhaustion(rng):
    params = mf.MetricParams(4, 1)
    x = mf.random_point(params, rng)
    obj = Objective(lambda y: 0.0 if y is x else 1.0, None)
    d = mf.random_tangent(params, x, rng)
    with pytest.raises(LineSearchError):
        armijo_linesearch(obj, params, x, d, -1.0, ArmijoConfig(max_backtracks=5))


# --------------------------------------------------------------------------
# toy objective with known minimizer
# --------------------------------------------------------------------------

@pytest.mark.parametrize("solver", [solve_rgd, solve_rtr])
def test_stationary_start_returns_immediately(solver, rng):
    params = mf.MetricParams(6, 2)
    target = mf.random_point(params, rng)
    res = solver(toy_objective(params, target), target, params, SolverConfig())
    assert res.status is Status.CONVERGED and res.iterations == 0
    assert res.point is target


@pytest.mark.parametrize("solver", [solve_rgd, solve_rtr])
def test_toy_known_minimizer(solver, rng):
    params = mf.MetricParams(6, 2)
    target = mf.random_point(params, rng)
    start = nearby(params, target, rng)
    res = solver(toy_objective(params, target), start, params,
                 SolverConfig(max_iters=2000, grad_tol=1e-9))
    assert res.status is Status.CONVERGED
    assert np.linalg.norm(md.embed(res.point) - md.embed(target)) < 1e-6


def test_rtr_fewer_iterations_than_rgd():
    its = {"rgd": [], "rtr": []}
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        params = mf.MetricParams(6, 2)
        target = mf.random_point(params, rng)
        start = nearby(params, target, rng)
        obj = toy_objective(params, target)
        cfg = SolverConfig(max_iters=2000, grad_tol=1e-8)
        a, b = solve_rgd(obj, start, params, cfg), solve_rtr(obj, start, params, cfg)
        assert b.status is Status.CONVERGED
        assert np.linalg.norm(md.embed(b.point) - md.embed(target)) < 1e-6
        its["rgd"].append(a.iterations)
        its["rtr"].append(b.iterations)
    assert np.median(its["rtr"]) < np.median(its["rgd"])


def test_rtr_finite_difference_hessian(rng):
    params = mf.MetricParams(6, 2)
    target = mf.random_point(params, rng)
    start = nearby(params, target, rng)
    obj = toy_objective(params, target)
    obj = Objective(obj.cost, obj.rgrad)
    with pytest.raises(ValueError, match="rhess"):
        solve_rtr(obj, start, params)
    cfg = SolverConfig(max_iters=200, grad_tol=1e-7, tr=TRConfig(fd_hessian=True))
    res = solve_rtr(obj, start, params, cfg)
    assert res.status is Status.CONVERGED
    assert np.linalg.norm(md.embed(res.point) - md.embed(target)) < 1e-6


# --------------------------------------------------------------------------
# Tyler cost
# --------------------------------------------------------------------------

def test_rgd_tyler_convergence():
    # moderate spikes: at sigma = 50 steepest descent stalls at the cost's rounding level
    params, prob, start = tyler_problem(0, sigma=5.0, c=2.0)
    res = solve_rgd(prob.objective(), start, params, SolverConfig(max_iters=500, grad_tol=1e-5))
    assert res.status is Status.CONVERGED and res.iterations <= 500
    assert res.grad_norm < 1e-5
    assert np.all(np.diff(res.costs) <= 0)


def test_rtr_tyler_convergence_superlinear():
    params, prob, start = tyler_problem(0)
    res = solve_rtr(prob.objective(), start, params, SolverConfig(max_iters=100, grad_tol=1e-6))
    assert res.status is Status.CONVERGED and res.iterations <= 100
    g = np.array(res.grad_norms)
    assert np.all(g[-3:] / g[-4:-1] <= 0.1)
    assert np.all(np.diff(res.costs) <= 1e-12 * abs(res.costs[0]))
    assert np.linalg.norm(res.point.U.conj().T @ res.point.U - np.eye(4)) < 1e-8


def test_rgd_iterates_stay_on_manifold_and_reorthonormalize():
    params, prob, start = tyler_problem(1)
    seen = []
    obj = prob.objective()

    def cost(x):
        seen.append(x)
        return obj.cost(x)

    res = solve_rgd(Objective(cost, obj.rgrad), start, params, SolverConfig(max_iters=120))
    assert res.iterations == 120
    for x in seen:
        assert np.linalg.norm(x.U.conj().T @ x.U - np.eye(4)) < 1e-8
    assert np.all(np.diff(res.costs) < 0)


def test_gauge_consistency():
    params, prob, start = tyler_problem(2)
    g = mf.random_unitary(4, np.random.default_rng(9))
    cfg = SolverConfig(max_iters=100, grad_tol=1e-8)
    a = solve_rtr(prob.objective(), start, params, cfg)
    b = solve_rtr(prob.objective(), mf.gauge_transport(start, g), params, cfg)
    assert np.linalg.norm(md.embed(a.point) - md.embed(b.point)) < 1e-6


@pytest.mark.parametrize("solver", [solve_rgd, solve_rtr])
def test_determinism(solver):
    runs = []
    for _ in range(2):
        params, prob, start = tyler_problem(4)
        runs.append(solver(prob.objective(), start, params, SolverConfig(max_iters=60)))
    assert runs[0].iterations == runs[1].iterations
    assert abs(runs[0].cost - runs[1].cost) <= 1e-12 * abs(runs[0].cost)


# --------------------------------------------------------------------------
# failure statuses and tracing
# --------------------------------------------------------------------------

def test_line_search_failure_returns_start(rng):
    params = mf.MetricParams(6, 2)
    target = mf.random_point(params, rng)
    start = nearby(params, target, rng)
    obj = toy_objective(params, target)
    wrong = Objective(obj.cost, lambda x: -1.0 * obj.rgrad(x))
    res = solve_rgd(wrong, start, params)
    assert res.status is Status.LINE_SEARCH_FAILURE
    assert res.point is start and res.iterations == 0


@pytest.mark.parametrize("solver", [solve_rgd, solve_rtr])
def test_numerical_breakdown(solver, rng):
    params = mf.MetricParams(6, 2)
    target = mf.random_point(params, rng)
    obj = toy_objective(params, target)
    bad = Objective(lambda x: math.nan, obj.rgrad, obj.rhess)
    res = solver(bad, nearby(params, target, rng), params)
    assert res.status is Status.NUMERICAL_BREAKDOWN


def test_trace_sinks(rng):
    params = mf.MetricParams(6, 2)
    target = mf.random_point(params, rng)
    start = nearby(params, target, rng)
    obj = toy_objective(params, target)
    records = []
    res = solve_rgd(obj, start, params, SolverConfig(max_iters=5), sink=records.append)
    assert len(records) == res.iterations == 5
    assert set(records[0]) == {"iteration", "cost", "grad_norm", "step"}
    buf = io.StringIO()
    res = solve_rtr(obj, start, params, SolverConfig(max_iters=3), sink=buf)
    lines = [json.loads(s) for s in buf.getvalue().splitlines()]
    assert len(lines) == res.iterations
    assert {"iteration", "cost", "grad_norm", "radius"} <= set(lines[0])
