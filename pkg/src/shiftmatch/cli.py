"""``shiftmatch`` command line: gen, estimate, ate, bench, audit.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.
Results go to stdout (or ``--out``) as JSON; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import audit, bench, synthdata
from .datafiles import DataError, ExprError, compile_h, read_table, write_table
from .estimators import (
    AtePanel,
    ConfigError,
    Dataset,
    EstimatorConfig,
    estimate_ate,
    estimate_expectation,
)
from .neighbors import NORMS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _positive_real_or_inf(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number or inf, got {text!r}")
    return value


def _emit(payload: dict, out) -> None:
    text = json.dumps(_jsonable(payload), indent=2, allow_nan=False)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    cfg = synthdata.SetupConfig(
        setup=args.setup, d0=args.d0, d=args.d, mu_p=args.mu_p, n=args.n, m=args.m, seed=args.seed
    )
    source, target = synthdata.generate(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_table(out_dir / "source.csv", source.x, y=source.y, label=source.label)
    write_table(out_dir / "target.csv", target.x, y=target.y, label=target.label)
    meta = {
        "config": cfg.to_dict(),
        "truth": synthdata.truth(cfg),
        "oracle_estimate": float(np.mean(target.label)),
        "files": {"source": "source.csv", "target": "target.csv"},
    }
    if cfg.setup == "normal_poly":
        meta["stated_truth"] = synthdata.normal_poly_stated_truth(cfg.d0)
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    _emit(meta, args.out)
    return EXIT_OK


def _estimator_config(args) -> EstimatorConfig:
    return EstimatorConfig(
        k=args.k, L=args.L, r0=args.r0, norm=args.norm, label_mode=getattr(args, "label_mode", "matching")
    )


def cmd_estimate(args) -> int:
    src = read_table(args.source_csv)
    tgt = read_table(args.target_csv)
    if src.d != tgt.d:
        raise DataError(f"source has {src.d} covariates, target has {tgt.d}")
    h = compile_h(args.h_expr, src.d) if args.h_expr else None
    if src.label is not None:
        label = src.label
    elif src.y is not None and h is not None:
        label = np.asarray(h(src.x, src.y), dtype=float)
        if not np.all(np.isfinite(label)):
            raise FloatingPointError("--h-expr produced non-finite labels")
    else:
        raise UsageError("source needs a 'label' column, or a 'y' column together with --h-expr")
    if args.label_mode == "sampling":
        if src.y is None or h is None:
            raise UsageError("sampling mode needs a 'y' column and --h-expr")
    cfg = _estimator_config(args)
    if args.weights_out and cfg.L != 0:
        raise UsageError("--weights-out is only available with --L 0")
    data = Dataset(src.x, label, tgt.x, source_y=src.y, h=h)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = estimate_expectation(data, cfg, return_weights=bool(args.weights_out))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if not np.isfinite(report.value):
        raise FloatingPointError("estimate is not finite")
    if args.weights_out:
        with open(args.weights_out, "w") as fh:
            fh.write("index,weight\n")
            for i, wt in enumerate(report.per_source_weights):
                fh.write(f"{i},{float(wt)!r}\n")
    _emit(
        {
            "value": report.value,
            "censored_fraction": report.censored_fraction,
            "fallback_count": report.fallback_count,
            "k": report.k,
            "L": cfg.L,
            "r0": cfg.r0,
            "n": data.n,
            "m": data.m,
        },
        args.out,
    )
    return EXIT_OK


def cmd_ate(args) -> int:
    tab = read_table(args.panel_csv)
    if tab.w is None or tab.y is None:
        raise DataError("panel needs 'w' and 'y' columns")
    panel = AtePanel(tab.x, tab.w, tab.y)
    report = estimate_ate(panel, _estimator_config(args))
    payload = {
        "mu_hat": report.mu_hat,
        "censored_treated": report.censored_treated,
        "censored_control": report.censored_control,
        "fallback_count": report.fallback_count,
        "empty_arm": report.empty_arm,
    }
    if report.empty_arm and not args.lenient:
        print("error: one treatment arm is empty (use --lenient to report anyway)", file=sys.stderr)
        return EXIT_DATA
    if not np.isfinite(report.mu_hat):
        raise FloatingPointError("ATE estimate is not finite")
    _emit(payload, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        with open(args.config_json) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {args.config_json}: {exc}") from None
    if not isinstance(raw, dict):
        raise DataError("bench config must be a JSON object")
    try:
        cfg = bench.ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise DataError(f"invalid bench config: {exc}") from None
    report = bench.run_experiment(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.to_csv(out_dir / "bench.csv")
    report.to_json(out_dir / "bench.json")
    _emit(
        {
            "csv": str(out_dir / "bench.csv"),
            "json": str(out_dir / "bench.json"),
            "rows": len(report.rows),
            "fitted": report.fitted,
        },
        args.out,
    )
    return EXIT_OK


def _parse_matrix(text: str) -> np.ndarray:
    """A JSON matrix, or a comma list read as a diagonal."""
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = [float(v) for v in text.split(",")]
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    return np.diag(arr) if arr.ndim == 1 else arr


def _parse_family(text: str) -> synthdata.Family:
    name, _, params = text.partition(":")
    values = tuple(float(v) for v in params.split(",")) if params else ()
    return synthdata.Family(name, values)


def cmd_audit(args) -> int:
    gains = dict(g_res=args.g_res, g_cov=args.g_cov, g_bias=args.g_bias)
    if args.mc:
        if not (args.p and args.q):
            raise UsageError("--mc needs --p and --q family specs, e.g. --p exponential:0.5")
        p, q = _parse_family(args.p), _parse_family(args.q)
        m2, mhalf = audit.estimate_family_integrals(p, q, args.n_samples, seed=args.seed)
        payload = {"p": args.p, "q": args.q, "m2": m2.to_dict(), "m_half": mhalf.to_dict()}
        _emit(payload, args.out)
        return EXIT_OK
    fam = args.family
    need = {
        "gaussian": ("sigma_p", "sigma_q"),
        "gamma": ("mu_p", "s_p", "mu_q", "s_q"),
        "pareto": ("mu_p", "mu_q"),
        "boundary-uniform": ("s", "d", "mu_p", "mu_q"),
    }
    if fam is None:
        raise UsageError("choose --family or --mc")
    missing = [f"--{n.replace('_', '-')}" for n in need[fam] if getattr(args, n) is None]
    if missing:
        raise UsageError(f"--family {fam} needs {' '.join(missing)}")
    if fam == "gaussian":
        verdict = audit.check_gaussian(_parse_matrix(args.sigma_p), _parse_matrix(args.sigma_q), **gains)
    elif fam == "gamma":
        verdict = audit.check_gamma(
            args.mu_p, args.s_p, args.mu_q, args.s_q, fast_rate=args.fast_rate, **gains
        )
    elif fam == "pareto":
        verdict = audit.check_pareto(args.mu_p, args.mu_q, M=args.M, **gains)
    else:
        verdict = audit.check_boundary_uniform(args.s, int(args.d), args.mu_p, args.mu_q, gamma=args.gamma)
    _emit({"family": fam, **verdict.to_dict()}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_estimator_flags(p, label_mode: bool) -> None:
    p.add_argument("--k", type=int, default=None, help="neighbours (default 2*K*(d,L))")
    p.add_argument("--L", type=int, default=0, help="polynomial order")
    p.add_argument("--r0", type=_positive_real_or_inf, default=1.0, help="censor radius; 'inf' disables")
    p.add_argument("--norm", choices=NORMS, default="euclidean")
    if label_mode:
        p.add_argument("--label-mode", choices=("matching", "sampling"), default="matching")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shiftmatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic source/target pair")
    p.add_argument("--setup", choices=synthdata.SETUPS, default="exponential_sin")
    p.add_argument("--d0", type=int, default=2)
    p.add_argument("--d", type=int, default=None, help="ambient dimension (default d0)")
    p.add_argument("--mu-p", type=float, default=0.5)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("estimate", help="estimate a target expectation")
    p.add_argument("source_csv")
    p.add_argument("target_csv")
    _add_estimator_flags(p, label_mode=True)
    p.add_argument("--h-expr", help="label expression over x1..xd and y")
    p.add_argument("--weights-out", help="write per-source weights (L = 0 only)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("ate", help="average treatment effect from a panel")
    p.add_argument("panel_csv")
    _add_estimator_flags(p, label_mode=False)
    p.add_argument("--lenient", action="store_true", help="report even when an arm is empty")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ate)

    p = sub.add_parser("bench", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("config_json")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("audit", help="check transferability conditions")
    p.add_argument("--family", choices=("gaussian", "gamma", "pareto", "boundary-uniform"))
    p.add_argument("--sigma-p", help="covariance of P: JSON matrix or comma-separated diagonal")
    p.add_argument("--sigma-q", help="covariance of Q")
    p.add_argument("--mu-p", type=float)
    p.add_argument("--mu-q", type=float)
    p.add_argument("--s-p", type=float)
    p.add_argument("--s-q", type=float)
    p.add_argument("--M", type=float, default=0.0)
    p.add_argument("--s", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--g-res", type=float, default=1.0)
    p.add_argument("--g-cov", type=float, default=1.0)
    p.add_argument("--g-bias", type=float, default=0.5)
    p.add_argument("--fast-rate", action="store_true")
    p.add_argument("--mc", action="store_true", help="Monte Carlo importance integrals")
    p.add_argument("--p", help="source family, e.g. exponential:0.5")
    p.add_argument("--q", help="target family, e.g. exponential:1")
    p.add_argument("--n-samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "gen" and args.d is None:
        args.d = args.d0
    try:
        return args.func(args)
    except (UsageError, ConfigError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
