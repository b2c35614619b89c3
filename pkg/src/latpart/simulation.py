"""Scenario signals, noise, tuning and the Monte Carlo benchmark harness."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

from .dcart import DyadicCostTable, FitResult
from .errors import LatPartError, ParameterError, ScopeError
from .lattice import LatticeField, LatticeShape
from .merge import naive_two_step_estimate, two_step_estimate
from .metrics import dist1, dist2, induced_partition

log = logging.getLogger(__name__)

SCENARIOS = ("S1", "S2", "S3", "S4", "S5")
ESTIMATORS = ("two_step", "naive_two_step", "dcart_raw")
_ESTIMATOR_ALIASES = {
    "two-step": "two_step",
    "naive": "naive_two_step",
    "naive-two-step": "naive_two_step",
    "dcart": "dcart_raw",
}
# Penalty grid used for n = 128 and sigma <= 1.5.
DEFAULT_LAMBDA_GRID = tuple(5 + 25 * l / 14 for l in range(15))
# Grid values penalize the full SSE (SSE + g * #rects); the library objective
# is 0.5 * SSE + lam * #rects, so g maps to lam = g / 2.
GRID_PENALTY_SCALE = 0.5
AUTO_ETA = 8.0
AUTO_GAMMA = 8.0
MEMORY_BUDGET_CELLS = 2**31


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    n: int = 128

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise ParameterError(f"unknown scenario {self.id!r}; expected one of {SCENARIOS}")


def scenario_signal(spec: ScenarioSpec, d: int = 2) -> LatticeField:
    """Piecewise-constant test signal on ``[1, n]^2``.

    The first coordinate ``a`` indexes rows (axis 0), ``b`` columns.
    """
    if d != 2:
        raise ScopeError("scenario signals are defined for d = 2 only")
    n = spec.n
    if n < 8:
        raise ParameterError(f"scenario signals need n >= 8, got {n}")
    a, b = np.meshgrid(np.arange(1, n + 1, dtype=float), np.arange(1, n + 1, dtype=float), indexing="ij")
    if spec.id == "S1":
        conds = [(n / 4 < a) & (a < 3 * n / 4) & (n / 4 < b) & (b < 3 * n / 4)]
        levels = [1.0]
    elif spec.id == "S2":
        r2 = (n / 5) ** 2
        conds = [
            (a - n / 4) ** 2 + (b - n / 4) ** 2 < r2,
            (a - 3 * n / 4) ** 2 + (b - 3 * n / 4) ** 2 < r2,
        ]
        levels = [1.0, 1.0]
    elif spec.id == "S3":
        conds = [
            (n / 4 < a) & (a < 3 * n / 4) & (n / 4 < b) & (b < 3 * n / 8),
            (5 * n / 8 < a) & (a < 3 * n / 4) & (3 * n / 8 <= b) & (b < 3 * n / 4),
            (a > 3 * n / 4) & (b > 3 * n / 4),
        ]
        levels = [1.0, 1.0, -1.0]
    elif spec.id == "S4":
        conds = [
            (a < n / 5) & (b < n / 5),
            (a < n / 5) & (b > 4 * n / 5),
            (a > 4 * n / 5) & (b < 4 * n / 5),
            (a > 4 * n / 5) & (b > 4 * n / 5),
            (3 * n / 8 < a) & (a < 5 * n / 8) & (3 * n / 8 < b) & (b < 5 * n / 8),
        ]
        levels = [1.0, 2.0, 3.0, 4.0, 5.0]
    else:
        conds = [
            (a < n / 5) & (b > 2 * n / 5),
            (a > 4 * n / 5) & (b < 3 * n / 5),
            (np.abs(a - n / 2) < n / 4.5) & (b < n / 4.5),
        ]
        levels = [2.0, 3.0, 4.0]
    return LatticeField(np.select(conds, levels, default=0.0))


def corrupt(theta: LatticeField, sigma: float, seed: int) -> LatticeField:
    """``theta + sigma * Z`` with Z drawn from numpy's PCG64 generator seeded by ``seed``."""
    if not np.isfinite(sigma) or sigma < 0:
        raise ParameterError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return theta
    z = np.random.Generator(np.random.PCG64(seed)).standard_normal(theta.shape.N)
    return LatticeField(theta.flat + sigma * z, theta.shape)


def variance_estimate(y: LatticeField) -> float:
    """Difference-based noise variance estimate over the row-major cell order.

    Divides the sum of ``N - 1`` squared successive differences by ``2N``.
    """
    v = y.flat
    if v.size < 2:
        raise ParameterError("variance estimate needs at least two cells")
    return float(np.sum(np.diff(v) ** 2) / (2 * v.size))


def lambda_select(
    y: LatticeField,
    grid=DEFAULT_LAMBDA_GRID,
    table: DyadicCostTable = None,
    scale: float = GRID_PENALTY_SCALE,
):
    """Grid penalty minimizing ``SSE + sigma_hat^2 * leaves * log N``.

    Each grid value ``g`` is fit with DCART penalty ``lam = scale * g``;
    the default ``scale = 0.5`` reads ``g`` as a penalty on the full SSE.

    Returns
    -------
    (float, FitResult)
        Selected grid value (smallest on ties) and its DCART fit.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ParameterError("penalty grid is empty")
    if table is None:
        table = DyadicCostTable(y)
    s2 = variance_estimate(y)
    log_n = math.log(y.shape.N)
    best = None
    for g in grid:
        fit = table.fit(scale * g)
        sse = float(np.sum((y.values - fit.theta.values) ** 2))
        score = sse + s2 * fit.leaf_count * log_n
        if best is None or score < best[0]:
            best = (score, g, fit)
    return best[1], best[2]


@dataclass(frozen=True)
class BenchConfig:
    scenario: str = "S1"
    n: int = 128
    sigma: float = 0.5
    reps: int = 50
    seed: int = 0
    estimator: str = "naive_two_step"
    tuning: object = "auto"
    grid: tuple = DEFAULT_LAMBDA_GRID
    policy: str = "random"
    penalty_scale: float = GRID_PENALTY_SCALE

    def __post_init__(self):
        est = _ESTIMATOR_ALIASES.get(self.estimator, self.estimator)
        object.__setattr__(self, "estimator", est)
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        problems = []
        if self.scenario not in SCENARIOS:
            problems.append(f"scenario must be one of {SCENARIOS}")
        if int(self.n) != self.n or self.n < 8 or self.n & (self.n - 1):
            problems.append("n must be a power of 2 and at least 8")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            problems.append("sigma must be non-negative")
        if int(self.reps) != self.reps or self.reps < 1:
            problems.append("reps must be a positive integer")
        if int(self.seed) != self.seed:
            problems.append("seed must be an integer")
        if est not in ESTIMATORS:
            problems.append(f"estimator must be one of {ESTIMATORS}")
        if self.policy not in ("random", "nearest"):
            problems.append("policy must be 'random' or 'nearest'")
        if not self.grid:
            problems.append("grid must be non-empty")
        if not (np.isfinite(self.penalty_scale) and self.penalty_scale > 0):
            problems.append("penalty_scale must be positive")
        if self.tuning != "auto":
            if not isinstance(self.tuning, dict):
                problems.append("tuning must be 'auto' or a mapping")
            else:
                extra = set(self.tuning) - {"lambda1", "lambda2", "eta", "gamma"}
                if extra:
                    problems.append(f"unknown tuning keys {sorted(extra)}")
                if "lambda1" not in self.tuning:
                    problems.append("explicit tuning needs lambda1")
        if not problems and self.reps * self.n**2 > MEMORY_BUDGET_CELLS:
            problems.append(f"reps * N exceeds the budget of {MEMORY_BUDGET_CELLS} cells")
        if problems:
            raise ParameterError("invalid bench config: " + "; ".join(problems))

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if not unknown:
            try:
                return cls(**data)
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ParameterError):
                    raise
                raise ParameterError(f"invalid bench config: {exc}") from None
        problems = [f"unknown keys {unknown}"]
        try:
            cls(**{k: v for k, v in data.items() if k in known})
        except ParameterError as exc:
            problems.append(str(exc).removeprefix("invalid bench config: "))
        except TypeError as exc:
            problems.append(str(exc))
        raise ParameterError("invalid bench config: " + "; ".join(problems))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["grid"] = list(self.grid)
        return out


@dataclass
class BenchRow:
    seed: int
    dist1: float = float("nan")
    dist2: float = float("nan")
    leaf_count_step1: int = -1
    region_count: int = -1
    lambda1: float = float("nan")
    runtime_ms: float = float("nan")
    error: str = ""


METRICS = ("dist1", "dist2", "leaf_count_step1", "region_count")


@dataclass
class BenchResult:
    config: BenchConfig
    rows: list = field(default_factory=list)

    def aggregates(self) -> dict:
        """Mean and sample standard deviation of each metric over successful reps."""
        ok = [r for r in self.rows if not r.error]
        out = {}
        for m in METRICS + ("runtime_ms",):
            vals = np.array([getattr(r, m) for r in ok], dtype=float)
            if vals.size == 0:
                out[m] = (float("nan"), float("nan"))
            elif vals.size == 1:
                out[m] = (float(vals[0]), 0.0)
            else:
                out[m] = (float(vals.mean()), float(vals.std(ddof=1)))
        return out

    @property
    def failures(self) -> int:
        return sum(1 for r in self.rows if r.error)


def _tuned_estimate(y: LatticeField, cfg: BenchConfig, rep_seed: int):
    """Run the configured estimator; returns (regions, first-step fit, lambda1)."""
    table = DyadicCostTable(y)
    if cfg.tuning == "auto":
        _, fit = lambda_select(y, cfg.grid, table, cfg.penalty_scale)
        lambda1 = fit.lam
        lambda2, eta, gamma = lambda1, AUTO_ETA, AUTO_GAMMA
    else:
        t = cfg.tuning
        lambda1 = float(t["lambda1"])
        lambda2 = float(t.get("lambda2", lambda1))
        eta = float(t.get("eta", AUTO_ETA))
        gamma = float(t.get("gamma", AUTO_GAMMA))
        fit = None
    if cfg.estimator == "dcart_raw":
        fit = fit or table.fit(lambda1)
        return fit.partition.to_regions(), fit, lambda1
    if cfg.estimator == "two_step":
        first = table.fit(lambda1, eta)
        regions, trace = two_step_estimate(y, lambda1, lambda2, eta, fit=first)
    else:
        first = fit or table.fit(lambda1)
        regions, trace = naive_two_step_estimate(
            y, lambda1, lambda2, eta, gamma, policy=cfg.policy, seed=rep_seed, fit=first
        )
    return regions, trace.fit, lambda1


def _run_rep(args) -> BenchRow:
    cfg, rep, theta, truth = args
    seed = cfg.seed + rep
    row = BenchRow(seed=seed)
    t0 = time.perf_counter()
    try:
        y = corrupt(theta, cfg.sigma, seed)
        regions, fit, lambda1 = _tuned_estimate(y, cfg, seed)
        row.dist1 = dist1(regions, truth)
        row.dist2 = dist2(regions, truth)
        row.leaf_count_step1 = fit.leaf_count
        row.region_count = len(regions)
        row.lambda1 = lambda1
    except LatPartError as exc:
        log.warning("rep %d failed: %s", rep, exc)
        row.error = f"{type(exc).__name__}: {exc}"
    row.runtime_ms = 1000.0 * (time.perf_counter() - t0)
    return row


def _workers(reps: int) -> int:
    try:
        cap = int(os.environ.get("LATPART_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, reps))


def monte_carlo(config: BenchConfig, workers: int = None) -> BenchResult:
    """Repeat generate -> corrupt -> tune -> estimate -> score.

    Rep ``r`` uses seed ``config.seed + r`` both for the noise and for the
    random small-set assignment, so rows do not depend on scheduling.
    Parallelism defaults to ``LATPART_THREADS`` (1 if unset).
    """
    theta = scenario_signal(ScenarioSpec(config.scenario, config.n))
    truth = induced_partition(theta)
    jobs = [(config, rep, theta, truth) for rep in range(config.reps)]
    workers = workers or _workers(config.reps)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_rep, jobs))
    else:
        rows = [_run_rep(job) for job in jobs]
    return BenchResult(config, rows)


def time_dcart(n: int, draws: int = 10, lam: float = 10.0, sigma: float = 1.0, seed: int = 0) -> np.ndarray:
    """Wall times (seconds) of ``draws`` DCART fits on Scenario-5 data of side ``n``."""
    theta = scenario_signal(ScenarioSpec("S5", n))
    times = []
    for k in range(draws):
        y = corrupt(theta, sigma, seed + k)
        t0 = time.perf_counter()
        DyadicCostTable(y).fit(lam)
        times.append(time.perf_counter() - t0)
    return np.array(times)


def bin_ingest(points, d: int) -> LatticeField:
    """Average scattered ``(x, value)`` observations, ``x`` in ``[0, 1]^d``, onto a dyadic lattice.

    The side length is the largest power of 2 not above
    ``(m / log m)^(1/d)`` for ``m`` points (at least 2).  Empty cells copy
    the nearest non-empty cell (cell-centre distance, ties to the lowest
    row-major index).
    """
    points = list(points)
    if not points:
        raise ParameterError("bin_ingest needs at least one point")
    x = np.array([np.asarray(p[0], dtype=float).reshape(d) for p in points])
    v = np.array([float(p[1]) for p in points])
    if np.any(x < 0) or np.any(x > 1):
        raise ParameterError("point coordinates must lie in [0, 1]^d")
    m = len(points)
    target = (m / math.log(m)) ** (1.0 / d) if m > 1 else 2.0
    n = max(2, 1 << int(math.floor(math.log2(max(target, 1.0)))))
    shape = LatticeShape(d, n)
    # Cell i covers [(i-1)/n, i/n); the right edge 1.0 goes to the last cell.
    idx = np.minimum(np.floor(x * n).astype(np.int64), n - 1)
    flat = np.ravel_multi_index(tuple(idx.T), shape.dims)
    counts = np.bincount(flat, minlength=shape.N)
    sums = np.bincount(flat, weights=v, minlength=shape.N)
    filled = np.flatnonzero(counts)
    out = np.zeros(shape.N)
    out[filled] = sums[filled] / counts[filled]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        src = shape.coords(filled).astype(float)
        dst = shape.coords(empty).astype(float)
        tree = cKDTree(src)
        dmin, _ = tree.query(dst, k=1)
        for e, cell, r in zip(empty, dst, dmin):
            cands = tree.query_ball_point(cell, r * (1 + 1e-9) + 1e-12)
            out[e] = out[filled[min(cands)]]
    return LatticeField(out, shape)
