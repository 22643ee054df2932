# %% [markdown]
# # A small Monte Carlo study
#
# `run_experiment` draws a truth per trial, samples Student t data for every
# `(dof, n)`, runs the estimators and averages the errors in dB next to the
# bounds. The full study (500 trials, ten sample sizes) is a long command-line
# run:
#
#     bench run --config study.ini --out results/
#
# Here we run a few trials to show the shape of the output.

# %%
import tempfile
from pathlib import Path

from spikedtyler import bench

cfg = bench.ExperimentConfig(dofs=(3.0, 100.0), n_grid=(40, 300), trials=10,
                             methods=("pscm", "t-rtr"))
out = Path(tempfile.mkdtemp())
res = bench.run_experiment(cfg, out)
print("wrote", sorted(f.name for f in out.iterdir()), "to", out)

# %% [markdown]
# Subspace errors in dB. At `d = 3` the robust estimator sits on the bound
# while pSCM does not. At `d = 100` the data are nearly Gaussian and both
# estimators are close to the bound.

# %%
print(f"{'dof':>5} {'n':>5} {'pSCM':>8} {'T-RTR':>8} {'bound':>8}")
for dof in cfg.dofs:
    for n in cfg.n_grid:
        row = [res.summary_value(name, dof, n, "err_subspace_db")
               for name in ("pscm", "t-rtr", "subspace")]
        print(f"{dof:5g} {n:5d} " + " ".join(f"{v:8.2f}" for v in row))
