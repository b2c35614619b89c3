"""File formats: fields, label maps, fit records, merge traces, bench output.

Field text format::

    d n
    v v v ... (row-major, whitespace separated; line breaks are free)

The binary variant carries the same ASCII header line followed by the
``n**d`` values as little-endian float64.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .dcart import FitResult
from .errors import FieldParseError
from .lattice import LatticeField, LatticeShape, Rect, RectPartition, RegionPartition

BINARY_SUFFIXES = (".bin", ".f64")


def fmt(x: float) -> str:
    """17 significant digits: round-trips every finite float64."""
    return format(float(x), ".17g")


def _parse_header(line: str, lineno: int = 1) -> LatticeShape:
    parts = line.split()
    if len(parts) != 2:
        raise FieldParseError(f"header must be 'd n', got {line.strip()!r}", lineno, 1)
    try:
        d, n = int(parts[0]), int(parts[1])
    except ValueError:
        raise FieldParseError(f"header must hold two integers, got {line.strip()!r}", lineno, 1) from None
    try:
        return LatticeShape(d, n)
    except ValueError as exc:
        raise FieldParseError(f"bad header: {exc}", lineno, 1) from None


def dumps_field(field: LatticeField) -> str:
    shape = field.shape
    out = [f"{shape.d} {shape.n}"]
    rows = field.values.reshape(-1, shape.n)
    out.extend(" ".join(fmt(v) for v in row) for row in rows)
    return "\n".join(out) + "\n"


def loads_field(text: str) -> LatticeField:
    lines = text.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise FieldParseError("empty input", 1, 0)
    shape = _parse_header(lines[0])
    vals = []
    for lineno, line in enumerate(lines[1:], start=2):
        for pos, tok in enumerate(line.split(), start=1):
            try:
                v = float(tok)
            except ValueError:
                raise FieldParseError(f"not a number: {tok!r}", lineno, pos) from None
            if not math.isfinite(v):
                raise FieldParseError(f"non-finite value {tok!r}", lineno, pos)
            vals.append(v)
    if len(vals) != shape.N:
        raise FieldParseError(f"expected {shape.N} values, found {len(vals)}", len(lines), 0)
    return LatticeField(np.array(vals), shape)


def dumps_field_binary(field: LatticeField) -> bytes:
    header = f"{field.shape.d} {field.shape.n}\n".encode("ascii")
    return header + field.flat.astype("<f8").tobytes()


def loads_field_binary(data: bytes) -> LatticeField:
    nl = data.find(b"\n")
    if nl < 0:
        raise FieldParseError("missing header line", 1, 0)
    try:
        shape = _parse_header(data[:nl].decode("ascii"))
    except UnicodeDecodeError:
        raise FieldParseError("header is not ASCII", 1, 0) from None
    body = data[nl + 1 :]
    if len(body) != 8 * shape.N:
        raise FieldParseError(f"expected {8 * shape.N} payload bytes, found {len(body)}", 2, len(body))
    return LatticeField(np.frombuffer(body, dtype="<f8").astype(np.float64), shape)


def write_field(path, field: LatticeField):
    path = Path(path)
    if path.suffix in BINARY_SUFFIXES:
        path.write_bytes(dumps_field_binary(field))
    else:
        path.write_text(dumps_field(field))


def read_field(path) -> LatticeField:
    """Read a field; ``.bin``/``.f64`` files are binary, anything else text."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix in BINARY_SUFFIXES:
        return loads_field_binary(data)
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FieldParseError("non-ASCII byte in text field file", 0, exc.start) from None
    return loads_field(text)


def labels_field(part: RegionPartition) -> LatticeField:
    return LatticeField(part.labels().astype(float))


def write_labels(path, part: RegionPartition):
    write_field(path, labels_field(part))


def read_labels(path) -> RegionPartition:
    field = read_field(path)
    vals = field.flat
    if not np.all(vals == np.round(vals)):
        raise FieldParseError(f"{path}: label map holds non-integer values", 0, 0)
    return RegionPartition.from_labels(field.shape, vals.astype(np.int64))


def fit_to_dict(fit: FitResult, include_theta: bool = False) -> dict:
    shape = fit.partition.shape
    out = {
        "lambda": fit.lam,
        "eta": fit.eta,
        "objective": fit.objective,
        "leaf_count": fit.leaf_count,
        "d": shape.d,
        "n": shape.n,
        "leaves": [{"lo": list(r.lo), "hi": list(r.hi)} for r in fit.partition.rects],
    }
    if include_theta:
        out["theta"] = fit.theta.flat.tolist()
    return out


def fit_from_dict(data: dict, y: LatticeField = None) -> FitResult:
    """Rebuild a fit record; theta comes from the stored blob or from ``y``'s rectangle means."""
    shape = LatticeShape(data["d"], data["n"])
    rects = [Rect(tuple(leaf["lo"]), tuple(leaf["hi"])) for leaf in data["leaves"]]
    if "theta" in data:
        theta = LatticeField(np.array(data["theta"]), shape)
    elif y is not None:
        vals = np.empty(shape.dims)
        for r in rects:
            vals[r.slices()] = y.values[r.slices()].mean()
        theta = LatticeField(vals)
    else:
        raise ValueError("fit record has no theta blob; pass the observations")
    return FitResult(theta, RectPartition(shape, rects), data["objective"], data["leaf_count"], data["lambda"], data["eta"])


def dumps_fit_json(fit: FitResult, include_theta: bool = False) -> str:
    return json.dumps(fit_to_dict(fit, include_theta), indent=2) + "\n"


def dumps_leaves_csv(fit: FitResult) -> str:
    d = fit.partition.shape.d
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index"] + [f"lo{i}" for i in range(d)] + [f"hi{i}" for i in range(d)] + ["volume", "mean"])
    for k, r in enumerate(fit.partition.rects):
        mean = fit.theta.values[tuple(a - 1 for a in r.lo)]
        w.writerow([k, *r.lo, *r.hi, r.volume, fmt(mean)])
    return buf.getvalue()


def dumps_trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "distance", "gain", "merged"])
    for i, j, dist, gain, merged in trace.pairs_tested:
        w.writerow([i, j, fmt(dist), fmt(gain), int(merged)])
    return buf.getvalue()


RESULT_COLUMNS = ("scenario", "sigma", "seed", "dist1", "dist2", "leaf_count_step1", "region_count", "lambda1", "error")


def dumps_bench_csv(result) -> str:
    """Per-rep metrics; wall-clock times are kept out so reruns are byte-identical."""
    cfg = result.config
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in result.rows:
        w.writerow(
            [cfg.scenario, fmt(cfg.sigma), r.seed, fmt(r.dist1), fmt(r.dist2),
             r.leaf_count_step1, r.region_count, fmt(r.lambda1), r.error]
        )
    return buf.getvalue()


def dumps_timings_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "sigma", "seed", "dist1", "dist2", "runtime_ms"])
    for r in result.rows:
        w.writerow([result.config.scenario, fmt(result.config.sigma), r.seed, fmt(r.dist1), fmt(r.dist2), fmt(r.runtime_ms)])
    return buf.getvalue()


def table_cell(mean: float, sd: float) -> str:
    """``mean(sd)`` with one decimal."""
    return f"{mean:.1f}({sd:.1f})"


def bench_summary(result) -> dict:
    agg = result.aggregates()
    return {
        "config": result.config.to_dict(),
        "reps": len(result.rows),
        "failures": result.failures,
        "metrics": {
            m: {"mean": mean, "sd": sd, "formatted": table_cell(mean, sd)} for m, (mean, sd) in agg.items()
        },
    }


def write_pgm(path, img: np.ndarray):
    """8-bit binary graymap."""
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + img.astype(np.uint8).tobytes())


def write_ppm(path, img: np.ndarray):
    """8-bit binary pixmap from an ``(h, w, 3)`` array."""
    h, w, _ = img.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + img.astype(np.uint8).tobytes())
