# %% [markdown]
# # The quotient geometry of spiked covariances
#
# A spiked covariance `R = I + U Sigma U^H` is represented by a pair
# `(U, Sigma)` with orthonormal `U` (p x k) and HPD `Sigma` (k x k). The pair
# is only defined up to a unitary gauge `O`, since `(U O, O^H Sigma O)` gives
# the same `R`. This script walks through what that means in practice.

# %%
import numpy as np

from spikedtyler import manifold as mf
from spikedtyler import model as md

rng = np.random.default_rng(0)
params = mf.MetricParams.student_matched(p=8, k=2, dof=3.0)
print(params, "quotient dimension:", params.dim)

x = mf.random_point(params, rng)
g = mf.random_unitary(2, rng)
y = mf.gauge_transport(x, g)
print("same covariance after a gauge change:", np.allclose(md.embed(x), md.embed(y)))

# %% [markdown]
# ## Vertical and horizontal directions
#
# Moving along the gauge orbit does not change `R`. Those *vertical*
# directions have the form `(U Omega, Sigma Omega - Omega Sigma)` with skew
# `Omega`. Optimization works in their metric complement, the horizontal space.

# %%
xi = mf.random_tangent(params, x, rng)
h = mf.project_horizontal(params, x, xi)
v = xi - h
print("horizontal residual of h:", mf.horizontal_residual(params, x, h))
print("<h, v> =", mf.inner(params, x, h, v))
print("dR along v:", np.linalg.norm(md.dembed(x, v)))

# %% [markdown]
# ## Geodesics and the cheaper retraction
#
# The exact geodesic needs a `2k x 2k` exponential and an HPD exponential. The
# retraction agrees with it to second order, so halving the step cuts the gap
# by about eight.

# %%
h = mf.random_tangent(params, x, rng, horizontal=True)
for t in (1e-1, 5e-2, 2.5e-2, 1.25e-2):
    a, b = mf.retract(params, x, t * h), mf.geodesic(params, x, h, t)
    print(f"t = {t:<7g} |retraction - geodesic| = {np.linalg.norm(md.embed(a) - md.embed(b)):.3e}")
