"""Monte Carlo harness for bias-rate and transferability studies.

A grid cell ``g`` and replication ``r`` always draw their data from the
stream key ``(g, r)`` under the master seed, and every method in the cell
sees the same draw. Results are written into pre-indexed arrays, so the
report does not depend on how many worker threads ran the replications.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from .baselines import kliep_weights, kmm_weights, oracle_estimate, weighted_estimate
from .estimators import BelowTheoryThresholdWarning, Dataset, EstimatorConfig, estimate_expectation
from .synthdata import SetupConfig, generate, label_function
from .synthdata import truth as setup_truth

METHOD_KINDS = ("matching", "sampling", "poly_L_M", "poly_L_S", "kmm", "kliep", "oracle")
NO_SLOPE = ("kmm", "kliep")
CSV_HEADER = (
    "method",
    "grid_value",
    "mean_bias",
    "mse",
    "std_err_bias",
    "std_err_mse",
    "censored_fraction",
    "replications",
)

DEFAULT_N_GRID = (250, 500, 1000, 2000, 4000)
DEFAULT_MU_GRID = tuple(0.25 * i for i in range(1, 13))

_POLY_NAME = re.compile(r"^poly_(\d+)_([MS])$")


@dataclass(frozen=True)
class MethodSpec:
    """One estimator in a benchmark, with its parameters.

    ``kind`` is one of :data:`METHOD_KINDS`. Polynomial methods take ``L``
    (and optionally ``k``), NN methods take ``k`` and ``r0``, the weighting
    baselines take their solver keywords.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError(f"unknown method {self.kind!r}; expected one of {METHOD_KINDS}")

    @property
    def label(self) -> str:
        if self.kind.startswith("poly"):
            return f"poly_{self.params.get('L', 1)}_{self.kind[-1]}"
        return self.kind

    @classmethod
    def parse(cls, spec) -> "MethodSpec":
        """Accept a MethodSpec, a name such as ``"poly_2_M"``, or a mapping."""
        if isinstance(spec, MethodSpec):
            return spec
        if isinstance(spec, str):
            match = _POLY_NAME.match(spec)
            if match:
                return cls(f"poly_L_{match.group(2)}", {"L": int(match.group(1))})
            return cls(spec)
        spec = dict(spec)
        name = spec.pop("name", None) or spec.pop("kind")
        params = dict(spec.pop("params", {}))
        params.update(spec)
        base = cls.parse(name)
        return cls(base.kind, {**base.params, **params})


@dataclass
class ExperimentConfig:
    setup: SetupConfig
    methods: list
    grid: list
    grid_kind: Literal["n", "mu_p"] = "n"
    replications: int = 200
    seed: int = 0
    threads: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.setup, dict):
            self.setup = SetupConfig(**self.setup)
        self.methods = [MethodSpec.parse(m) for m in self.methods]
        self.grid = [float(g) if self.grid_kind == "mu_p" else int(g) for g in self.grid]
        if not self.methods:
            raise ValueError("at least one method is required")
        if not self.grid:
            raise ValueError("grid must be non-empty")
        if self.grid_kind not in ("n", "mu_p"):
            raise ValueError(f"unknown grid kind {self.grid_kind!r}")
        if self.replications < 2:
            raise ValueError("need at least two replications for standard errors")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate methods in {labels}")

    def cell_setup(self, g: int) -> SetupConfig:
        value = self.grid[g]
        if self.grid_kind == "n":
            return replace(self.setup, n=int(value), m=int(value), seed=self.seed)
        return replace(self.setup, mu_p=float(value), seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "setup": self.setup.to_dict(),
            "methods": [{"name": m.kind, "params": m.params} for m in self.methods],
            "grid": list(self.grid),
            "grid_kind": self.grid_kind,
            "replications": self.replications,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        raw.pop("threads", None)
        return cls(**raw)


@dataclass
class BenchReport:
    rows: list
    fitted: dict
    config: dict

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in CSV_HEADER])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None) -> str:
        text = json.dumps({"fitted": self.fitted, "config": self.config}, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def row(self, method: str, grid_value) -> dict:
        for r in self.rows:
            if r["method"] == method and r["grid_value"] == grid_value:
                return r
        raise KeyError((method, grid_value))

    def column(self, method: str, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows if r["method"] == method])


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("SHIFTMATCH_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


# ---------------------------------------------------------------------------
# single replication
# ---------------------------------------------------------------------------

def run_method(method: MethodSpec, source, target, setup: SetupConfig) -> tuple[float, float]:
    """Estimate of the target expectation and the censored fraction."""
    p = method.params
    if method.kind == "oracle":
        return oracle_estimate(target.label), 0.0
    if method.kind in ("kmm", "kliep"):
        fit = kmm_weights if method.kind == "kmm" else kliep_weights
        w = fit(source.x, target.x, **p)
        return weighted_estimate(source.label, w), 0.0
    sampling = method.kind in ("sampling", "poly_L_S")
    if method.kind in ("matching", "sampling"):
        cfg = EstimatorConfig(k=p.get("k", 1), L=0, r0=p.get("r0", 1.0))
    else:
        cfg = EstimatorConfig(k=p.get("k"), L=p.get("L", 1), r0=p.get("r0", 1.0))
    cfg = replace(cfg, label_mode="sampling" if sampling else "matching")
    data = Dataset(
        source_x=source.x,
        source_label=source.label,
        target_x=target.x,
        source_y=source.y,
        h=label_function(setup),
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BelowTheoryThresholdWarning)
        report = estimate_expectation(data, cfg)
    return report.value, report.censored_fraction


def _replicate(cfg: ExperimentConfig, g: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    setup = cfg.cell_setup(g)
    source, target = generate(setup, key=(g, r))
    est = np.empty(len(cfg.methods))
    cens = np.empty(len(cfg.methods))
    for i, method in enumerate(cfg.methods):
        est[i], cens[i] = run_method(method, source, target, setup)
    return est, cens


def simulate(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    """Raw estimates and censored fractions, shape (methods, grid, replications)."""
    shape = (len(cfg.methods), len(cfg.grid), cfg.replications)
    est = np.empty(shape)
    cens = np.empty(shape)
    jobs = [(g, r) for g in range(len(cfg.grid)) for r in range(cfg.replications)]
    threads = resolve_threads(cfg.threads)
    if threads == 1:
        results = [_replicate(cfg, g, r) for g, r in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _replicate(cfg, *job), jobs))
    for (g, r), (e, c) in zip(jobs, results):
        est[:, g, r] = e
        cens[:, g, r] = c
    return est, cens


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def summarize(cfg: ExperimentConfig, est: np.ndarray, cens: np.ndarray, truth: float) -> list:
    rows = []
    R = est.shape[2]
    for i, method in enumerate(cfg.methods):
        for g, value in enumerate(cfg.grid):
            err = est[i, g] - truth
            sq = err**2
            rows.append(
                {
                    "method": method.label,
                    "grid_value": value,
                    "mean_bias": float(np.mean(err)),
                    "mse": float(np.mean(sq)),
                    "std_err_bias": float(np.std(err, ddof=1) / np.sqrt(R)),
                    "std_err_mse": float(np.std(sq, ddof=1) / np.sqrt(R)),
                    "censored_fraction": float(np.mean(cens[i, g])),
                    "replications": R,
                    "variance": float(np.var(est[i, g])),
                }
            )
    return rows


def fit_loglog_slope(pairs) -> tuple[float, float, float]:
    """OLS of ``log2(value)`` on ``log2(n)``; returns (slope, intercept, r2).

    Non-positive values are dropped with a warning.
    """
    pairs = [(float(n), float(v)) for n, v in pairs]
    kept = [(n, v) for n, v in pairs if v > 0]
    if len(kept) < len(pairs):
        warnings.warn(f"dropped {len(pairs) - len(kept)} non-positive values before log fit")
    if not kept:
        raise ValueError("all values are non-positive")
    if len(kept) < 2:
        raise ValueError("need at least two positive values to fit a slope")
    x = np.log2([n for n, _ in kept])
    y = np.log2([v for _, v in kept])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def _fit_slopes(cfg: ExperimentConfig, rows: list, key: str = "mean_bias") -> dict:
    fitted = {}
    for method in cfg.methods:
        if method.kind in NO_SLOPE:
            continue
        pairs = [(r["grid_value"], abs(r[key])) for r in rows if r["method"] == method.label]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                slope, intercept, r2 = fit_loglog_slope(pairs)
        except ValueError:
            continue
        fitted[method.label] = {"slope": slope, "intercept": intercept, "r2": r2}
    return fitted


def run_bias_experiment(cfg: ExperimentConfig) -> BenchReport:
    """Bias and MSE per (method, n = m), with log-log slopes of |bias|."""
    if cfg.grid_kind != "n":
        raise ValueError("bias experiments need a grid over sample sizes")
    truth = _truth(cfg)
    est, cens = simulate(cfg)
    rows = summarize(cfg, est, cens, truth)
    return BenchReport(rows=rows, fitted=_fit_slopes(cfg, rows), config=_provenance(cfg, truth))


def run_transfer_sweep(cfg: ExperimentConfig) -> BenchReport:
    """MSE per (method, mu_p) at fixed sample sizes."""
    if cfg.grid_kind != "mu_p":
        raise ValueError("transfer sweeps need a grid over mu_p")
    truth = _truth(cfg)
    est, cens = simulate(cfg)
    rows = summarize(cfg, est, cens, truth)
    return BenchReport(rows=rows, fitted={}, config=_provenance(cfg, truth))


def run_experiment(cfg: ExperimentConfig) -> BenchReport:
    return run_bias_experiment(cfg) if cfg.grid_kind == "n" else run_transfer_sweep(cfg)


def _truth(cfg: ExperimentConfig) -> float:
    return setup_truth(cfg.setup)


def _provenance(cfg: ExperimentConfig, truth: float) -> dict:
    out = cfg.to_dict()
    out["truth"] = truth
    return out


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))
