"""Command-line harness for the simulation experiments.

Subcommands
-----------
sweep     secret-key lower bound vs rho_ab for a set of schemes
table     optimized correction-scheme grid over (b, rho_ab)
gamma     public-channel cost of the correction scheme vs the baseline
trace     small-n protocol trace CSV for debugging / diffing
optimize  one alternation run; persists the run log and final quantizers

Defaults mirror the reference experiment setup (saturation range +/-6,
rho_ae = rho_be = 0.8, guard width 0.85). A config file (INI, key = value
sections) can override plan fields; command-line flags win over the file.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 partial
sweep (some points failed; details on stderr).
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import quantizer as quantizer_io
from .errors import AdqsimError
from .experiments import (
    TABLE_RHO_GRID,
    ExperimentPlan,
    SeriesSpec,
    design_quantizers,
    run_gamma,
    run_sweep,
    run_table,
)
from .metrics import CSV_HEADER, MetricsReport
from .protocols import SchemeSpec, run_adqc, run_gb, run_nec, write_trace
from .source import GENERATOR_NAME, sample_dataset

_SERIES_LABELS = ("nec_uniform", "nec_opt", "adqc_uniform", "adqc_opt", "gb")


def _parse_rho_grid(text: str) -> tuple[float, ...]:
    """'start:stop:count' or a comma-separated list."""
    if ":" in text:
        start, stop, count = text.split(":")
        return tuple(float(v) for v in np.linspace(float(start), float(stop), int(count)))
    return tuple(float(v) for v in text.split(","))


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _plan_from_args(args: argparse.Namespace) -> ExperimentPlan:
    plan = ExperimentPlan()
    if getattr(args, "config", None):
        plan = _apply_config(plan, args.config)
    overrides = {}
    if getattr(args, "rho_ab", None):
        overrides["rho_grid"] = _parse_rho_grid(args.rho_ab)
    for flag, field_name in [
        ("n_design", "n_design"),
        ("n_eval", "n_eval"),
        ("seed", "base_seed"),
        ("guard", "guard_width"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    return replace(plan, **overrides)


_PLAN_FIELD_TYPES = {
    "rho_grid": _parse_rho_grid,
    "rho_ae": float,
    "rho_be": float,
    "n_design": int,
    "n_eval": int,
    "base_seed": int,
    "t_min": float,
    "t_max": float,
    "uniform_span": float,
    "guard_width": float,
    "max_outer_iters": int,
    "objective_tolerance": float,
    "restarts": int,
    "evaluation_budget": int,
}


def _apply_config(plan: ExperimentPlan, path: str) -> ExperimentPlan:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise AdqsimError(f"config file not found: {path}")
    overrides = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in _PLAN_FIELD_TYPES:
                raise AdqsimError(f"unknown config key [{section}] {key}")
            overrides[key] = _PLAN_FIELD_TYPES[key](raw)
    return replace(plan, **overrides)


def _series_from_labels(labels, b: int, correction_bits, guard: float) -> list[SeriesSpec]:
    series = []
    for label in labels:
        if label not in _SERIES_LABELS:
            raise AdqsimError(
                f"unknown scheme {label!r}; expected one of {_SERIES_LABELS}"
            )
        if label == "gb":
            series.append(SeriesSpec(SchemeSpec("GB", b, guard_width=guard), False))
        elif label.startswith("nec"):
            series.append(SeriesSpec(SchemeSpec("NEC", b), label.endswith("_opt")))
        else:
            for corr in correction_bits:
                series.append(
                    SeriesSpec(SchemeSpec("ADQC", b, corr), label.endswith("_opt"))
                )
    return series


def _config_hash(plan: ExperimentPlan, extra: str = "") -> str:
    return hashlib.sha256((repr(plan) + extra).encode()).hexdigest()[:16]


def _write_rows(
    path: str, command: str, plan: ExperimentPlan, rows: list[MetricsReport], extra: str = ""
) -> None:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    lines = [
        f"# adqsim {command}",
        f"# created: {stamp}",
        f"# generator: {GENERATOR_NAME}",
        f"# base_seed: {plan.base_seed}",
        f"# config_hash: {_config_hash(plan, extra)}",
        CSV_HEADER,
    ]
    lines += [row.csv_row() for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _report_failures(failures) -> int:
    for failure in failures:
        print(
            f"point failed: {failure.series} rho_ab={failure.rho_ab}: {failure.error}",
            file=sys.stderr,
        )
    return 3 if failures else 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    labels = args.scheme.split(",") if args.scheme else list(_SERIES_LABELS[:2]) + ["adqc_opt", "gb"]
    correction_bits = _parse_int_list(args.correction_bits)
    series = _series_from_labels(labels, args.b, correction_bits, plan.guard_width)
    rows, failures = run_sweep(plan, series, workers=args.workers)
    _write_rows(args.out, "sweep", plan, rows, extra=repr([s.label for s in series]))
    print(f"wrote {args.out} ({len(rows)} rows)")
    return _report_failures(failures)


def _cmd_table(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    if not getattr(args, "rho_ab", None):
        plan = replace(plan, rho_grid=TABLE_RHO_GRID)
    bs = _parse_int_list(args.b)
    correction_bits = int(args.correction_bits)
    rows, failures = run_table(plan, bs, correction_bits, workers=args.workers)
    _write_rows(args.out, "table", plan, rows, extra=repr((bs, correction_bits)))
    print(f"wrote {args.out} ({len(rows)} rows)")
    return _report_failures(failures)


def _cmd_gamma(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    bs = _parse_int_list(args.b)
    correction_bits = _parse_int_list(args.correction_bits)
    rows, failures = run_gamma(plan, bs, correction_bits, workers=args.workers)
    _write_rows(args.out, "gamma", plan, rows, extra=repr((bs, correction_bits)))
    print(f"wrote {args.out} ({len(rows)} rows)")
    return _report_failures(failures)


def _trace_scheme(args: argparse.Namespace, plan: ExperimentPlan) -> SchemeSpec:
    kind = args.scheme.upper()
    if kind == "ADQC":
        return SchemeSpec("ADQC", args.b, int(args.correction_bits))
    if kind == "NEC":
        return SchemeSpec("NEC", args.b)
    if kind == "GB":
        return SchemeSpec("GB", args.b, guard_width=plan.guard_width)
    raise AdqsimError(f"unknown scheme {args.scheme!r}")


def _cmd_trace(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    if args.n > 10_000:
        raise AdqsimError("trace is a debugging aid; n must be <= 10000")
    scheme = _trace_scheme(args, plan)
    rho = plan.rho_grid[0] if len(plan.rho_grid) == 1 else args.rho_point
    ds = sample_dataset(plan.correlation(rho), args.n, plan.base_seed)
    from .optimizer import ThresholdVector

    uniform = ThresholdVector.uniform(
        scheme.b, plan.uniform_span, plan.t_min, plan.t_max
    ).to_quantizer()
    if scheme.kind == "NEC":
        outcomes = run_nec(uniform, uniform, uniform, ds)
    elif scheme.kind == "ADQC":
        outcomes = run_adqc(uniform, uniform, uniform, ds, scheme.correction_bits)
    else:
        outcomes = run_gb(scheme.b, scheme.guard_width, ds, plan.t_min, plan.t_max)
    write_trace(ds, outcomes, args.out)
    print(f"wrote {args.out} ({len(outcomes)} rows)")
    return 0


def _cmd_optimize(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    kind = args.scheme.upper()
    if kind == "ADQC":
        scheme = SchemeSpec("ADQC", args.b, int(args.correction_bits))
    elif kind == "NEC":
        scheme = SchemeSpec("NEC", args.b)
    else:
        raise AdqsimError("optimize applies to NEC or ADQC")
    rho = args.rho_point
    series = SeriesSpec(scheme, optimized=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "run_log.txt").open("w") as f:

        def log(record):
            f.write(
                f"outer={record.outer_iter} step={record.half_step} "
                f"objective={record.objective:.6f} "
                f"t_a={list(record.t_a.interior)} t_b={list(record.t_b.interior)} "
                f"t_e={list(record.t_e.interior)}\n"
            )
            f.flush()

        t_a, t_b, t_e, result = design_quantizers(series, rho, plan, log=log)
    for name, tv in [("alice", t_a), ("bob", t_b), ("eve", t_e)]:
        quantizer_io.save(tv.to_quantizer(), out / f"quantizer_{name}.json")
    print(f"wrote {out}/run_log.txt and quantizer_[alice|bob|eve].json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adqsim",
        description="Secret-key agreement simulations: quantization-correction "
        "advantage distillation vs baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--rho-ab", dest="rho_ab",
                       help="grid as start:stop:count or comma list")
        p.add_argument("--n-design", dest="n_design", type=int)
        p.add_argument("--n-eval", dest="n_eval", type=int)
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--guard", type=float, help="guard-band total width")
        p.add_argument("--config", help="INI config file; flags win")
        p.add_argument("--out", default=default_out)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sweep", help="lower bound vs rho_ab for a set of schemes")
    p.add_argument("--b", type=int, default=3)
    p.add_argument("--B", dest="correction_bits", default="1,2",
                   help="comma list of correction bits for ADQC series")
    p.add_argument("--scheme",
                   help="comma list from nec_uniform,nec_opt,adqc_uniform,adqc_opt,gb")
    common(p, "sweep.csv")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("table", help="optimized ADQC grid over (b, rho_ab)")
    p.add_argument("--b", default="2,3,4", help="comma list of symbol widths")
    p.add_argument("--B", dest="correction_bits", default="2")
    common(p, "table.csv")
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("gamma", help="public-channel cost vs rho_ab")
    p.add_argument("--b", default="2,3,4", help="comma list of symbol widths")
    p.add_argument("--B", dest="correction_bits", default="1,2")
    common(p, "gamma.csv")
    p.set_defaults(func=_cmd_gamma)

    p = sub.add_parser("trace", help="per-sample protocol trace (debugging)")
    p.add_argument("--scheme", required=True, help="nec, adqc, or gb")
    p.add_argument("--b", type=int, default=3)
    p.add_argument("--B", dest="correction_bits", default="2")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--rho-point", dest="rho_point", type=float, default=0.9)
    common(p, "trace.csv")
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("optimize", help="one alternation run at a single point")
    p.add_argument("--scheme", required=True, help="nec or adqc")
    p.add_argument("--b", type=int, default=3)
    p.add_argument("--B", dest="correction_bits", default="2")
    p.add_argument("--rho-point", dest="rho_point", type=float, default=0.9)
    common(p, "optimize_out")
    p.set_defaults(func=_cmd_optimize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except (AdqsimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
