# %% [markdown]
# # Robust estimation with Tyler's cost
#
# Heavy-tailed Student t samples spoil the sample covariance. Tyler's cost is
# invariant to per-sample scaling, so minimizing it over spiked covariances
# gives a robust estimate. We compare the projected sample covariance (pSCM)
# with steepest descent (RGD) and the trust-region method (RTR).

# %%
import numpy as np

from spikedtyler import crb
from spikedtyler import manifold as mf
from spikedtyler import model as md
from spikedtyler.optim import SolverConfig, solve_rgd, solve_rtr

rng = np.random.default_rng(1)
p, k, n, dof = 16, 4, 200, 3.0
truth, R = md.make_spiked(p, k, sigma=50.0, c=20.0, rng=rng)
data = md.sample_student_t(md.StudentTParams(dof, R), n, rng)
params = mf.MetricParams.student_matched(p, k, dof)
problem = md.TylerProblem(data, params)

# %% [markdown]
# Both solvers start from the pSCM subspace with `Sigma = I`.

# %%
init = md.pscm(data, k)
start = mf.ManifoldPoint(init.U, np.eye(k))
rgd = solve_rgd(problem.objective(), start, params, SolverConfig(max_iters=300))
rtr = solve_rtr(problem.objective(), start, params, SolverConfig(max_iters=100))

for name, est in (("pSCM", init), ("RGD", rgd.point), ("RTR", rtr.point)):
    print(f"{name:5s} subspace error {crb.subspace_error(truth.U, est.U):.4f}   "
          f"divergence {crb.divergence(params, truth, est):.4f}")

# %% [markdown]
# RTR uses the Riemannian Hessian and converges superlinearly. The gradient
# norm falls by orders of magnitude in its last few iterations. RGD is
# slowed by the strong spikes (large curvature spread) and stops at its
# iteration cap.

# %%
print("RTR:", rtr.status.value, rtr.iterations, "iterations")
print("  last gradient norms:", " ".join(f"{g:.1e}" for g in rtr.grad_norms[-5:]))
print("RGD:", rgd.status.value, rgd.iterations, f"iterations, gradient norm {rgd.grad_norm:.2e}")
