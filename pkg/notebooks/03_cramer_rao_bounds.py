# %% [markdown]
# # Intrinsic Cramér-Rao bounds
#
# The Fisher information of the elliptical model, written in an orthonormal
# tangent basis, has a `k^2`-dimensional kernel coming from the gauge
# freedom. The bounds use its pseudo-inverse, or its invertible restriction to
# the `U_perp` and `Sigma` blocks.

# %%
import numpy as np

from spikedtyler import crb
from spikedtyler import manifold as mf

p, k, n, dof = 16, 4, 100, 3.0
params = mf.MetricParams.student_matched(p, k, dof)
spec = crb.FisherSpec(n, crb.alpha_pp_student(p, dof))
point = mf.ManifoldPoint(np.eye(p, k), np.diag([50.0, 20.0, 8.0, 2.5]))

bundle = crb.assemble_fim(spec, params, point)
print("F is", bundle.F.shape, "with rank", bundle.rank, "=", 2 * p * k - k * k)

# %% [markdown]
# The subspace block decouples from the rest and has a closed-form trace.

# %%
for name, value in crb.all_bounds(spec, params, point).items():
    print(f"{name:26s} {value:.6e}   ({10 * np.log10(value):6.2f} dB)")

# %% [markdown]
# Weaker spikes are harder to locate. The subspace bound grows like
# `(1 + s) / s^2` per spike.

# %%
for s in (100.0, 10.0, 1.0, 0.1):
    print(f"sigma = {s:6g}: subspace bound {crb.bound_subspace_closed(spec, p, k, [s] * k):.4e}")
