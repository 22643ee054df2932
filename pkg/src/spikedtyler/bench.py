"""Monte Carlo comparison of spiked-covariance estimators against the bounds.

For each degrees-of-freedom value, sample size and trial, a truth is drawn,
Student t data are sampled, every requested estimator is run, and both
error measures are recorded. Means over trials are reported in dB next to
the intrinsic Cramér-Rao bounds averaged over the same truths.

Seeds are derived from the base seed with :class:`numpy.random.SeedSequence`
spawn keys, so every trial has its own stream. A trial's data depend on the
value of ``n`` (not its position in the grid), and its truth on the trial
index only.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from os import PathLike
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import crb
from .exceptions import AlignmentError, ConfigError
from .manifold import ManifoldPoint, MetricParams
from .model import (GAUSSIAN_DOF, SampleSet, StudentTParams, TylerProblem, make_spiked,
                    pscm, sample_student_t)
from .optim import ArmijoConfig, SolverConfig, TRConfig, solve_rgd, solve_rtr

METHODS = ("pscm", "t-rgd", "t-rtr")
METRIC_RULES = ("gaussian", "student-matched", "explicit")
DEFAULT_N_GRID = (12, 14, 15, 17, 20, 40, 70, 100, 200, 300)

TRIAL_COLUMNS = ("n", "dof", "method", "err_total", "err_subspace", "status",
                 "iterations", "seconds", "trial", "seed")
SUMMARY_COLUMNS = ("n", "dof", "name", "metric", "value", "count", "excluded")

_BOUND_METRIC = {crb.BOUND_TOTAL: "err_total_db",
                 crb.BOUND_TOTAL_TILDE: "err_total_db",
                 crb.BOUND_SUBSPACE: "err_subspace_db",
                 crb.BOUND_SUBSPACE_CLOSED: "err_subspace_db"}


def _default_rgd() -> SolverConfig:
    return SolverConfig(max_iters=300, grad_tol=1e-6)


def _default_rtr() -> SolverConfig:
    return SolverConfig(max_iters=100, grad_tol=1e-6)


@dataclass
class ExperimentConfig:
    """Benchmark protocol; defaults reproduce the full study."""

    p: int = 16
    k: int = 4
    dofs: tuple = (3.0, 100.0)
    sigma: float = 50.0
    cond: float = 20.0
    n_grid: tuple = DEFAULT_N_GRID
    trials: int = 500
    seed: int = 0
    metric: str = "student-matched"
    alpha: Optional[float] = None
    beta: Optional[float] = None
    alpha_pp: Optional[float] = None    # explicit override of the Fisher constant
    methods: tuple = METHODS
    fixed_truth: bool = False
    rgd: SolverConfig = field(default_factory=_default_rgd)
    rtr: SolverConfig = field(default_factory=_default_rtr)
    out_dir: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        self.dofs = tuple(float(d) for d in self.dofs)
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.methods = tuple(self.methods)
        if not 1 <= self.k < self.p:
            raise ConfigError(f"need 1 <= k < p, got p={self.p}, k={self.k}")
        if not self.n_grid or list(self.n_grid) != sorted(set(self.n_grid)) or self.n_grid[0] < 1:
            raise ConfigError(f"n grid must be nonempty, positive and strictly ascending: {self.n_grid}")
        if not self.dofs or any(d <= 0 for d in self.dofs):
            raise ConfigError(f"degrees of freedom must be positive: {self.dofs}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.methods:
            raise ConfigError("method set is empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if self.metric not in METRIC_RULES:
            raise ConfigError(f"metric must be one of {METRIC_RULES}, got {self.metric!r}")
        if self.metric == "explicit" and (self.alpha is None or self.beta is None):
            raise ConfigError("explicit metric needs alpha and beta")
        if self.sigma <= 0 or self.cond < 1:
            raise ConfigError("need sigma > 0 and cond >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for d in self.dofs:
            self.metric_params(d)

    def metric_params(self, dof: float) -> MetricParams:
        try:
            if self.metric == "gaussian" or (self.metric == "student-matched" and dof >= GAUSSIAN_DOF):
                return MetricParams.gaussian(self.p, self.k)
            if self.metric == "student-matched":
                return MetricParams.student_matched(self.p, self.k, dof)
            return MetricParams(self.p, self.k, self.alpha, self.beta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def alpha_pp_for(self, dof: float) -> float:
        if self.alpha_pp is not None:
            return self.alpha_pp
        return crb.alpha_pp_for_dof(self.p, dof)

    @classmethod
    def from_ini(cls, path: Union[str, PathLike]) -> "ExperimentConfig":
        """Read an INI file with sections ``[problem]``, ``[solver.rgd]``,
        ``[solver.rtr]`` and ``[output]``. Missing keys keep their defaults.

        Raises
        ------
        ConfigError
            On unknown sections or keys, unparsable values or invalid settings.
        OSError
            If the file cannot be read.
        """
        cp = configparser.ConfigParser()
        with open(path) as fh:
            try:
                cp.read_file(fh)
            except configparser.Error as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        unknown = set(cp.sections()) - {"problem", "solver.rgd", "solver.rtr", "output"}
        if unknown:
            raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
        kw = {}
        try:
            if cp.has_section("problem"):
                kw.update(_parse_problem(cp["problem"]))
            if cp.has_section("solver.rgd"):
                kw["rgd"] = _parse_solver(cp["solver.rgd"], _default_rgd())
            if cp.has_section("solver.rtr"):
                kw["rtr"] = _parse_solver(cp["solver.rtr"], _default_rtr())
            if cp.has_section("output"):
                sec = cp["output"]
                _check_keys(sec, {"dir", "workers"})
                if "dir" in sec:
                    kw["out_dir"] = sec["dir"]
                if "workers" in sec:
                    kw["workers"] = sec.getint("workers")
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dofs"], d["n_grid"], d["methods"] = list(self.dofs), list(self.n_grid), list(self.methods)
        return d


def _check_keys(sec, allowed: set) -> None:
    extra = set(sec.keys()) - allowed
    if extra:
        raise ConfigError(f"unknown keys in [{sec.name}]: {sorted(extra)}")


def _list(s: str, cast) -> tuple:
    return tuple(cast(v) for v in s.replace(",", " ").split())


def _parse_problem(sec) -> dict:
    _check_keys(sec, {"p", "k", "dof", "sigma", "cond", "n", "trials", "seed", "metric",
                      "alpha", "beta", "alpha_pp", "methods", "fixed_truth"})
    kw = {}
    for key in ("p", "k", "trials", "seed"):
        if key in sec:
            kw[key] = sec.getint(key)
    for key in ("sigma", "cond", "alpha", "beta", "alpha_pp"):
        if key in sec:
            kw[key] = sec.getfloat(key)
    if "dof" in sec:
        kw["dofs"] = _list(sec["dof"], float)
    if "n" in sec:
        kw["n_grid"] = _list(sec["n"], int)
    if "metric" in sec:
        kw["metric"] = sec["metric"].strip()
    if "methods" in sec:
        kw["methods"] = _list(sec["methods"], str)
    if "fixed_truth" in sec:
        kw["fixed_truth"] = sec.getboolean("fixed_truth")
    return kw


def _parse_solver(sec, base: SolverConfig) -> SolverConfig:
    _check_keys(sec, {"max_iters", "grad_tol", "c1", "backtrack", "max_backtracks",
                      "delta0", "delta_max", "rho_accept", "kappa", "theta", "max_inner"})
    top = {}
    if "max_iters" in sec:
        top["max_iters"] = sec.getint("max_iters")
    if "grad_tol" in sec:
        top["grad_tol"] = sec.getfloat("grad_tol")
    arm = {key: sec.getfloat(key) for key in ("c1", "backtrack") if key in sec}
    if "max_backtracks" in sec:
        arm["max_backtracks"] = sec.getint("max_backtracks")
    tr = {key: sec.getfloat(key) for key in ("delta0", "delta_max", "rho_accept", "kappa", "theta")
          if key in sec}
    if "max_inner" in sec:
        tr["max_inner"] = sec.getint("max_inner")
    return replace(base, armijo=replace(base.armijo, **arm), tr=replace(base.tr, **tr), **top)


# --------------------------------------------------------------------------
# a single trial
# --------------------------------------------------------------------------

@dataclass
class TrialRecord:
    n: int
    dof: float
    method: str
    err_total: float        # nan when the divergence is undefined
    err_subspace: float
    status: str
    iterations: int
    seconds: float
    trial: int
    seed: int


def truth_seed(cfg: ExperimentConfig, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=(0, 0 if cfg.fixed_truth else trial))


def data_seed(cfg: ExperimentConfig, dof_index: int, n: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=(1, dof_index, n, trial))


def estimate(method: str, data: SampleSet, k: int, params: MetricParams,
             solver: Optional[SolverConfig] = None):
    """Run one estimator. Returns ``(point, status, iterations, seconds, result)``.

    The iterative methods start from the pSCM subspace with ``Sigma = I_k``.
    """
    t0 = time.perf_counter()
    init = pscm(data, k)
    if method == "pscm":
        return init, "closed_form", 0, time.perf_counter() - t0, None
    start = ManifoldPoint(init.U, np.eye(k))
    obj = TylerProblem(data, params).objective()
    if method in ("t-rgd", "rgd"):
        res = solve_rgd(obj, start, params, solver)
    elif method in ("t-rtr", "rtr"):
        res = solve_rtr(obj, start, params, solver)
    else:
        raise ValueError(f"unknown method {method!r}")
    return res.point, res.status.value, res.iterations, time.perf_counter() - t0, res


def _errors(params: MetricParams, truth: ManifoldPoint, est: ManifoldPoint) -> tuple:
    e_sub = crb.subspace_error(truth.U, est.U)
    try:
        e_tot = crb.divergence(params, truth, est)
    except AlignmentError:
        e_tot = math.nan
    return e_tot, e_sub


def run_trial(cfg: ExperimentConfig, dof_index: int, n: int, trial: int) -> list:
    """All method records for one ``(dof, n, trial)`` work unit."""
    dof = cfg.dofs[dof_index]
    truth, R = make_spiked(cfg.p, cfg.k, cfg.sigma, cfg.cond,
                           np.random.default_rng(truth_seed(cfg, trial)))
    ss = data_seed(cfg, dof_index, n, trial)
    data = sample_student_t(StudentTParams(dof, R), n, np.random.default_rng(ss))
    seed_id = int(ss.generate_state(1, np.uint64)[0])
    params = cfg.metric_params(dof)
    out = []
    for m in cfg.methods:
        solver = cfg.rgd if m == "t-rgd" else cfg.rtr
        est, status, iters, secs, _ = estimate(m, data, cfg.k, params, solver)
        e_tot, e_sub = _errors(params, truth, est)
        out.append(TrialRecord(n, dof, m, e_tot, e_sub, status, iters, secs, trial, seed_id))
    return out


def trial_bounds(cfg: ExperimentConfig, dof_index: int, trial: int) -> dict:
    """Bounds at the truth for ``n = 1``; every bound scales as ``1 / n``."""
    dof = cfg.dofs[dof_index]
    truth, _ = make_spiked(cfg.p, cfg.k, cfg.sigma, cfg.cond,
                           np.random.default_rng(truth_seed(cfg, trial)))
    spec = crb.FisherSpec(1, cfg.alpha_pp_for(dof))
    return crb.all_bounds(spec, cfg.metric_params(dof), truth)


def _unit(args):
    cfg, dof_index, n, trial = args
    return run_trial(cfg, dof_index, n, trial)


def _bound_unit(args):
    cfg, dof_index, trial = args
    return trial_bounds(cfg, dof_index, trial)


# --------------------------------------------------------------------------
# experiment driver and outputs
# --------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    bounds: dict      # (dof, n) -> {bound name: mean over trials}
    summary: list

    def mean(self, method: str, dof: float, n: int, metric: str = "err_subspace") -> float:
        vals = [getattr(r, metric) for r in self.records
                if r.method == method and r.dof == dof and r.n == n]
        vals = [v for v in vals if not math.isnan(v)]
        return float(np.mean(vals))

    def summary_value(self, name: str, dof: float, n: int, metric: str) -> float:
        for row in self.summary:
            if row["name"] == name and row["dof"] == dof and row["n"] == n and row["metric"] == metric:
                return row["value"]
        raise KeyError((name, dof, n, metric))


def db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def summarize(cfg: ExperimentConfig, records: Sequence[TrialRecord], bounds: dict) -> list:
    """Aggregate rows: one per (n, dof, method, metric) and per bound."""
    rows = []
    for dof in cfg.dofs:
        for n in cfg.n_grid:
            for m in cfg.methods:
                recs = [r for r in records if r.method == m and r.dof == dof and r.n == n]
                for attr in ("err_total", "err_subspace"):
                    vals = [getattr(r, attr) for r in recs]
                    ok = [v for v in vals if not math.isnan(v)]
                    value = db(math.fsum(ok) / len(ok)) if ok else math.nan
                    rows.append({"n": n, "dof": dof, "name": m, "metric": attr + "_db",
                                 "value": value, "count": len(ok),
                                 "excluded": len(vals) - len(ok)})
            for name, value in bounds[(dof, n)].items():
                rows.append({"n": n, "dof": dof, "name": name, "metric": _BOUND_METRIC[name],
                             "value": db(value), "count": cfg.trials, "excluded": 0})
    return rows


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def write_trials_csv(path: Union[str, PathLike], records: Sequence[TrialRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in TRIAL_COLUMNS])


def read_trials_csv(path: Union[str, PathLike]) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(TrialRecord(
                int(row["n"]), float(row["dof"]), row["method"],
                float(row["err_total"]) if row["err_total"] else math.nan,
                float(row["err_subspace"]), row["status"], int(row["iterations"]),
                float(row["seconds"]), int(row["trial"]), int(row["seed"])))
    return out


def write_summary_csv(path: Union[str, PathLike], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])


def run_experiment(cfg: ExperimentConfig, out_dir: Union[str, PathLike, None] = None,
                   progress=None) -> ExperimentResult:
    """Run the full protocol and, if an output directory is given, write
    ``trials.csv``, ``summary.csv`` and ``config.json`` into it.

    Per-trial solver failures are recorded in the status column and never
    abort the run. The output directory is checked before any work starts.
    """
    out_dir = out_dir if out_dir is not None else cfg.out_dir
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise PermissionError(f"output directory {out_dir} is not writable")

    units = [(cfg, di, n, t) for di in range(len(cfg.dofs)) for n in cfg.n_grid
             for t in range(cfg.trials)]
    bunits = [(cfg, di, t) for di in range(len(cfg.dofs))
              for t in ([0] if cfg.fixed_truth else range(cfg.trials))]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            chunks = list(ex.map(_unit, units, chunksize=8))
            braw = list(ex.map(_bound_unit, bunits, chunksize=8))
    else:
        chunks = []
        for i, u in enumerate(units):
            chunks.append(_unit(u))
            if progress is not None:
                progress(i + 1, len(units))
        braw = [_bound_unit(u) for u in bunits]

    order = {m: i for i, m in enumerate(cfg.methods)}
    records = sorted((r for c in chunks for r in c),
                     key=lambda r: (cfg.dofs.index(r.dof), r.n, r.trial, order[r.method]))

    per_dof = {}
    for (_, di, _), b in zip(bunits, braw):
        per_dof.setdefault(cfg.dofs[di], []).append(b)
    bounds = {}
    for dof, blist in per_dof.items():
        mean1 = {name: math.fsum(b[name] for b in blist) / len(blist) for name in blist[0]}
        for n in cfg.n_grid:
            bounds[(dof, n)] = {name: v / n for name, v in mean1.items()}

    summary = summarize(cfg, records, bounds)
    if out_dir is not None:
        write_trials_csv(out_dir / "trials.csv", records)
        write_summary_csv(out_dir / "summary.csv", summary)
        with open(out_dir / "config.json", "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=2, default=str)
    return ExperimentResult(cfg, records, bounds, summary)


# --------------------------------------------------------------------------
# point and bound I/O used by the command line
# --------------------------------------------------------------------------

def _write_complex_csv(path: Union[str, PathLike], A: np.ndarray) -> None:
    """Rows ``2i`` and ``2i+1`` hold the real and imaginary parts of row ``i``."""
    rows = np.empty((2 * A.shape[0], A.shape[1]))
    rows[0::2], rows[1::2] = A.real, A.imag
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def _read_complex_csv(path: Union[str, PathLike]) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, r in enumerate(csv.reader(fh), start=1):
            try:
                rows.append([float(v) for v in r])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    A = np.array(rows)
    if A.ndim != 2 or A.shape[0] % 2:
        raise ValueError(f"{path}: expected an even number of rows of equal length")
    return A[0::2] + 1j * A[1::2]


def save_point(directory: Union[str, PathLike], point: ManifoldPoint) -> None:
    directory = Path(directory)
    _write_complex_csv(directory / "U.csv", point.U)
    _write_complex_csv(directory / "Sigma.csv", point.Sigma)


def load_point(directory: Union[str, PathLike]) -> ManifoldPoint:
    directory = Path(directory)
    return ManifoldPoint(_read_complex_csv(directory / "U.csv"),
                         _read_complex_csv(directory / "Sigma.csv"))
