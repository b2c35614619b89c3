"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 input parse, 4 infeasible parameters,
5 internal invariant breach.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import fieldio
from .dcart import DyadicCostTable
from .errors import (
    ConsistencyError,
    FieldParseError,
    LatPartError,
    ParameterError,
    ScopeError,
)
from .lattice import RegionPartition, validate_partition
from .merge import naive_two_step_estimate, two_step_estimate
from .metrics import dist1, dist2, induced_partition
from .simulation import (
    AUTO_ETA,
    AUTO_GAMMA,
    DEFAULT_LAMBDA_GRID,
    GRID_PENALTY_SCALE,
    BenchConfig,
    ScenarioSpec,
    bin_ingest,
    corrupt,
    lambda_select,
    monte_carlo,
    scenario_signal,
)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_PARAM, EXIT_INTERNAL = 0, 2, 3, 4, 5

log = logging.getLogger("latpart")


class InputError(Exception):
    """Unreadable or malformed input file."""


def _grid(text: str):
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--grid expects a comma list of numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("--grid is empty")
    return vals


def _echo(args):
    cfg = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items()) if k != "func"}
    print("config: " + json.dumps(cfg, sort_keys=True))


def _read(path):
    try:
        return fieldio.read_field(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except FieldParseError as exc:
        raise InputError(f"{path}: line {exc.line}, offset {exc.offset}: {exc}") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    theta = scenario_signal(ScenarioSpec(args.scenario, args.n))
    y = corrupt(theta, args.sigma, args.seed)
    fieldio.write_field(args.out, y)
    if args.truth:
        fieldio.write_field(args.truth, theta)
    print(f"wrote {args.out} ({args.n}x{args.n}, sigma={args.sigma}, seed={args.seed})")
    return EXIT_OK


def _estimate(y, args):
    table = DyadicCostTable(y)
    if args.lambda1 is None:
        _, auto_fit = lambda_select(y, args.grid, table, args.penalty_scale)
        lambda1 = auto_fit.lam
    else:
        auto_fit, lambda1 = None, args.lambda1
    lambda2 = args.lambda2 if args.lambda2 is not None else lambda1
    print(f"resolved: lambda1={fieldio.fmt(lambda1)} lambda2={fieldio.fmt(lambda2)} eta={args.eta} gamma={args.gamma}")
    trace = None
    if args.estimator == "dcart":
        fit = auto_fit or table.fit(lambda1)
        regions = fit.partition.to_regions()
    elif args.estimator == "two-step":
        fit = table.fit(lambda1, args.eta)
        regions, trace = two_step_estimate(y, lambda1, lambda2, args.eta, fit=fit)
    else:
        fit = auto_fit or table.fit(lambda1)
        regions, trace = naive_two_step_estimate(
            y, lambda1, lambda2, args.eta, args.gamma, policy=args.policy, seed=args.seed, fit=fit
        )
    return fit, regions, trace


def cmd_fit(args):
    y = _read(args.input)
    fit, regions, trace = _estimate(y, args)
    report = validate_partition(regions)
    if not report.ok:
        raise ConsistencyError(f"estimated regions do not partition the lattice: {report.message}")
    out = _out_dir(args.out)
    (out / "fit.json").write_text(fieldio.dumps_fit_json(fit, include_theta=args.with_values))
    (out / "leaves.csv").write_text(fieldio.dumps_leaves_csv(fit))
    fieldio.write_labels(out / "labels.txt", regions)
    if trace is not None:
        (out / "trace.csv").write_text(fieldio.dumps_trace_csv(trace))
    print(f"leaves={fit.leaf_count} regions={len(regions)} objective={fieldio.fmt(fit.objective)}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args):
    try:
        est = fieldio.read_labels(args.labels)
    except FileNotFoundError:
        raise InputError(f"{args.labels}: no such file") from None
    except FieldParseError as exc:
        raise InputError(f"{args.labels}: line {exc.line}, offset {exc.offset}: {exc}") from None
    if args.truth:
        theta = _read(args.truth)
    elif args.scenario:
        theta = scenario_signal(ScenarioSpec(args.scenario, est.shape.n))
    else:
        raise ParameterError("eval needs --truth FILE or --scenario")
    truth = induced_partition(theta)
    d1, d2 = dist1(est, truth), dist2(est, truth)
    print(f"dist1={d1} dist2={d2} regions={len(est)} true_regions={len(truth)}")
    if args.out:
        Path(args.out).write_text(json.dumps({"dist1": d1, "dist2": d2}) + "\n")
    return EXIT_OK


def cmd_bench(args):
    try:
        data = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise InputError(f"{args.config}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: line {exc.lineno}, offset {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InputError(f"{args.config}: top level must be an object")
    cfg = BenchConfig.from_dict(data)
    print("bench: " + json.dumps(cfg.to_dict(), sort_keys=True))
    result = monte_carlo(cfg)
    out = _out_dir(args.out)
    (out / "results.csv").write_text(fieldio.dumps_bench_csv(result))
    (out / "timings.csv").write_text(fieldio.dumps_timings_csv(result))
    summary = fieldio.bench_summary(result)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for m, s in summary["metrics"].items():
        print(f"{m:>18}  {s['formatted']}")
    if result.failures:
        print(f"{result.failures} of {len(result.rows)} reps failed; see results.csv")
    return EXIT_OK


def cmd_ingest(args):
    points = []
    try:
        with open(args.input, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if len(row) != args.d + 1:
                    raise InputError(f"{args.input}: line {lineno}: expected {args.d + 1} columns, got {len(row)}")
                try:
                    nums = [float(t) for t in row]
                except ValueError:
                    if lineno == 1:  # header row
                        continue
                    raise InputError(f"{args.input}: line {lineno}: non-numeric entry") from None
                points.append((nums[:-1], nums[-1]))
    except FileNotFoundError:
        raise InputError(f"{args.input}: no such file") from None
    field = bin_ingest(points, args.d)
    fieldio.write_field(args.out, field)
    print(f"binned {len(points)} points onto a {field.shape.d}-d lattice of side {field.shape.n}; wrote {args.out}")
    return EXIT_OK


def render_levels(values: np.ndarray) -> np.ndarray:
    """Gray level per cell.

    Integer-valued inputs with at most 256 distinct values (label maps,
    scenario signals) get evenly spaced levels by rank; anything else is
    scaled linearly between its minimum and maximum.  Constant input maps
    to a uniform mid-gray.
    """
    levels, inv = np.unique(values, return_inverse=True)
    k = levels.size
    if k == 1:
        return np.full(values.shape, 128, dtype=np.uint8)
    if k <= 256 and np.all(levels == np.round(levels)):
        return np.round(255.0 * inv.reshape(values.shape) / (k - 1)).astype(np.uint8)
    lo, hi = values.min(), values.max()
    return np.round(255.0 * (values - lo) / (hi - lo)).astype(np.uint8)


def label_colors(labels: np.ndarray) -> np.ndarray:
    """RGB per cell from the label index; hues spaced by the golden angle."""
    _, inv = np.unique(labels, return_inverse=True)
    hue = (inv.reshape(labels.shape) * 0.6180339887498949) % 1.0
    h6 = hue * 6.0
    sector = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    v, s = 0.95, 0.65
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    table = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)]
    rgb = np.zeros(labels.shape + (3,))
    for k, comps in enumerate(table):
        m = sector == k
        for c in range(3):
            rgb[..., c][m] = np.broadcast_to(comps[c], labels.shape)[m]
    return np.round(255 * rgb).astype(np.uint8)


def cmd_render(args):
    field = _read(args.input)
    if field.shape.d != 2:
        raise ScopeError(f"render supports d = 2 only, got d = {field.shape.d}")
    if args.color:
        fieldio.write_ppm(args.out, label_colors(field.values))
    else:
        fieldio.write_pgm(args.out, render_levels(field.values))
    print(f"wrote {args.out} ({field.shape.n}x{field.shape.n})")
    return EXIT_OK


def _add_estimator_flags(p):
    p.add_argument("--estimator", choices=("dcart", "two-step", "naive"), default="two-step")
    p.add_argument("--lambda1", type=float, default=None, help="first-step penalty (default: grid selection)")
    p.add_argument("--lambda2", type=float, default=None, help="merge penalty (default: lambda1)")
    p.add_argument("--eta", type=float, default=AUTO_ETA)
    p.add_argument("--gamma", type=float, default=AUTO_GAMMA)
    p.add_argument("--policy", choices=("random", "nearest"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=_grid, default=DEFAULT_LAMBDA_GRID, help="comma list of penalty grid values")
    p.add_argument("--penalty-scale", type=float, default=GRID_PENALTY_SCALE)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latpart", description="Partition recovery on lattices.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a noisy scenario field")
    p.add_argument("--scenario", choices=("S1", "S2", "S3", "S4", "S5"), default="S1")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None, help="also write the noiseless signal here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="estimate a partition from a field file")
    p.add_argument("input")
    _add_estimator_flags(p)
    p.add_argument("--with-values", action="store_true", help="embed fitted values in fit.json")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score a label map against the truth")
    p.add_argument("labels")
    p.add_argument("--truth", default=None, help="noiseless signal file")
    p.add_argument("--scenario", choices=("S1", "S2", "S3", "S4", "S5"), default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="Monte Carlo benchmark from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ingest", help="bin scattered points onto a dyadic lattice")
    p.add_argument("input", help="CSV with columns x1..xd,value")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("render", help="write a field or label map as PGM/PPM")
    p.add_argument("input")
    p.add_argument("--color", action="store_true", help="PPM with one hue per label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    _echo(args)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConsistencyError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except LatPartError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
