"""Seeded Monte-Carlo tails of U-statistics and comparison with exponential bounds.

Replicates are split into fixed-size chunks; chunk ``k`` draws from its own
stream ``SeedSequence(seed, spawn_key=(k,))``, so results depend only on
(source, seed, reps) and not on the number of worker threads.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import _kernels
from .bounds import BoundParams, active_regime, exp_bound_eval
from .exact import instance_problem
from .model import UStatInstance

CHUNK = 1 << 15
GRID_POINTS = 32
COUNT_REL_SLACK = 1e-9


@dataclass(frozen=True)
class GaussianChaos:
    """sum_ij c_ij g_i g'_j with independent standard normal g, g'."""

    coefficients: np.ndarray

    @property
    def name(self):
        return f"gaussian-chaos-n{self.coefficients.shape[0]}"

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        n = self.coefficients.shape[0]
        g = _normals(rng, (count, n))
        h = _normals(rng, (count, n))
        return np.einsum("ri,ij,rj->r", g, self.coefficients, h)


@dataclass(frozen=True)
class BernoulliProduct:
    """sum_ij X_i Y_j with centered Bernoulli(1/n) coordinates, i.e. (S - 1)(T - 1)."""

    n: int

    @property
    def name(self):
        return f"bernoulli-product-n{self.n}"

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        s = rng.binomial(self.n, 1.0 / self.n, size=count)
        t = rng.binomial(self.n, 1.0 / self.n, size=count)
        # exact for integer counts: sum_i (b_i - 1/n) = S - 1
        return (s - 1.0) * (t - 1.0)


class InstanceSampler:
    """Inverse-CDF sampling of every coordinate, then the compiled term sum."""

    def __init__(self, inst: UStatInstance, backend: str | None = None):
        self.inst = inst
        problem = instance_problem(inst)
        self.flat = problem.flatten()
        self.cdfs = [np.cumsum(p) for p in problem.probs]
        _, self._eval = _kernels.get_backend(backend)

    @property
    def name(self):
        return self.inst.name or "instance"

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        u = rng.random((count, len(self.cdfs)))
        idx = np.empty(u.shape, dtype=np.int64)
        for c, cdf in enumerate(self.cdfs):
            idx[:, c] = np.minimum(np.searchsorted(cdf, u[:, c], side="right"), cdf.size - 1)
        out = np.empty(count)
        f = self.flat
        self._eval(idx, f["tables_flat"], f["table_off"], f["term_coords"], f["term_strides"], out)
        return out


def _normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals by the inverse CDF of a 53-bit uniform on the open interval."""
    k = rng.integers(0, 1 << 53, size=shape, dtype=np.int64)
    return ndtri((k + 0.5) * 2.0 ** -53)


def as_sampler(source, backend: str | None = None):
    if isinstance(source, UStatInstance):
        return InstanceSampler(source, backend)
    if hasattr(source, "sample"):
        return source
    raise TypeError(f"cannot sample from {type(source).__name__}")


def draw(source, reps: int, seed: int, threads: int = 1, chunk: int = CHUNK,
         backend: str | None = None) -> np.ndarray:
    """``reps`` raw replicates of U in chunk order."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    sampler = as_sampler(source, backend)
    starts = list(range(0, reps, chunk))

    def run(k):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))
        return sampler.sample(rng, min(chunk, reps - starts[k]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(starts))))
    else:
        parts = [run(k) for k in range(len(starts))]
    return np.concatenate(parts)


@dataclass
class SampleSummary:
    """Sorted |U| replicates plus tail counts on a grid.

    ``counts[k]`` is the number of replicates with |U| >= grid[k] (up to a
    relative slack of 1e-9 that absorbs summation-order rounding).
    """

    source: str
    seed: int
    reps: int
    grid: np.ndarray
    counts: np.ndarray
    quantiles: dict
    sorted_abs: np.ndarray | None = field(default=None, repr=False)

    def tail(self) -> np.ndarray:
        return self.counts / self.reps

    def to_dict(self) -> dict:
        return {"source": self.source, "seed": self.seed, "reps": self.reps,
                "grid": self.grid.tolist(), "counts": self.counts.tolist(),
                "quantiles": self.quantiles}

    @classmethod
    def from_dict(cls, d: dict) -> "SampleSummary":
        return cls(d["source"], int(d["seed"]), int(d["reps"]), np.asarray(d["grid"], dtype=float),
                   np.asarray(d["counts"], dtype=np.int64), dict(d["quantiles"]))


def count_at_least(sorted_abs: np.ndarray, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    cut = grid - COUNT_REL_SLACK * np.maximum(1.0, np.abs(grid))
    return sorted_abs.size - np.searchsorted(sorted_abs, cut, side="left")


def default_grid(sorted_abs: np.ndarray, points: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced points from the median to the 1 - 10/reps quantile of |U|."""
    reps = sorted_abs.size
    lo = float(np.quantile(sorted_abs, 0.5))
    hi = float(np.quantile(sorted_abs, max(0.5, 1.0 - 10.0 / reps)))
    if lo <= 0:
        pos = sorted_abs[sorted_abs > 0]
        if pos.size == 0:
            return np.array([1.0])
        lo = float(pos[0])
    if hi <= lo:
        return np.array([lo])
    return np.geomspace(lo, hi, points)


def sample_ustat(source, reps: int, seed: int, grid=None, threads: int = 1,
                 chunk: int = CHUNK, backend: str | None = None) -> SampleSummary:
    values = draw(source, reps, seed, threads, chunk, backend)
    sorted_abs = np.sort(np.abs(values))
    grid = default_grid(sorted_abs) if grid is None else np.asarray(grid, dtype=float)
    qs = {f"{q:g}": float(np.quantile(sorted_abs, q)) for q in (0.5, 0.9, 0.99, 0.999)}
    qs["max"] = float(sorted_abs[-1])
    name = getattr(as_sampler(source, backend), "name", "source")
    return SampleSummary(name, seed, reps, grid, count_at_least(sorted_abs, grid), qs, sorted_abs)


# tail curves --------------------------------------------------------------------------------------


def wilson_interval(k, n: int, confidence: float = 0.95):
    """Two-sided Wilson score interval for a binomial proportion."""
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    k = np.asarray(k, dtype=float)
    z = float(ndtri(1 - (1 - confidence) / 2))
    phat = k / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z / denom * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    lo = np.where(k <= 0, 0.0, np.clip(center - half, 0.0, 1.0))
    hi = np.where(k >= n, 1.0, np.clip(center + half, 0.0, 1.0))
    return lo, hi, half


@dataclass
class TailCurve:
    x: np.ndarray
    tail: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    radius: np.ndarray
    reps: int
    confidence: float
    bound: np.ndarray | None = None
    regime: list | None = None
    constant: float | None = None
    form: str | None = None
    majorized: bool | None = None

    def to_dict(self) -> dict:
        d = {"x": self.x.tolist(), "tail": self.tail.tolist(), "lower": self.lower.tolist(),
             "upper": self.upper.tolist(), "radius": self.radius.tolist(), "reps": self.reps,
             "confidence": self.confidence}
        if self.bound is not None:
            d.update(bound=self.bound.tolist(), regime=self.regime, constant=self.constant,
                     form=self.form, majorized=self.majorized)
        return d


def empirical_tail(samples, grid=None, confidence: float = 0.95) -> TailCurve:
    """Tail estimates P(|U| >= x) with Wilson intervals; ``samples`` may be a SampleSummary."""
    if isinstance(samples, SampleSummary):
        if grid is None:
            counts, grid, reps = samples.counts, samples.grid, samples.reps
        elif samples.sorted_abs is None:
            raise ValueError("summary has no stored samples; use its own grid")
        else:
            grid = np.asarray(grid, dtype=float)
            counts, reps = count_at_least(samples.sorted_abs, grid), samples.reps
    else:
        sorted_abs = np.sort(np.abs(np.asarray(samples, dtype=float)))
        grid = default_grid(sorted_abs) if grid is None else np.asarray(grid, dtype=float)
        counts, reps = count_at_least(sorted_abs, grid), sorted_abs.size
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    lo, hi, half = wilson_interval(counts, reps, confidence)
    return TailCurve(grid, np.asarray(counts) / reps, lo, hi, half, reps, confidence)


def bound_curve(form: str, params: BoundParams, x, constant: float) -> np.ndarray:
    return np.array([exp_bound_eval(form, params, float(t), constant) for t in np.atleast_1d(x)])


def fit_majorizing_constant(curve: TailCurve, params: BoundParams, form: str,
                            calibration=None) -> float:
    """Smallest constant whose bound is >= the Wilson upper limit on the calibration points."""
    mask = np.ones(curve.x.size, bool) if calibration is None else np.isin(curve.x, calibration)
    xs, ups = curve.x[mask], curve.upper[mask]
    if xs.size == 0:
        raise ValueError("empty calibration grid")
    pred = lambda c: bool(np.all(bound_curve(form, params, xs, c) >= ups))
    hi = 1.0
    while not pred(hi):
        hi *= 2
        if hi > 1e12:
            return math.inf
    lo = hi / 2
    while pred(lo) and lo > 1e-12:
        hi, lo = lo, lo / 2
    for _ in range(100):
        if hi - lo <= 1e-12 * hi:
            break
        mid = 0.5 * (lo + hi)
        hi, lo = (mid, lo) if pred(mid) else (hi, mid)
    return hi


def tail_vs_bound(curve: TailCurve, params: BoundParams, form: str = "four-regime",
                  constant: float | None = None, calibration=None) -> tuple[TailCurve, float]:
    """Fill bound values, regimes and a majorization verdict.

    Without ``constant`` the minimal majorizing constant on ``calibration``
    (default: the whole grid) is fitted first.
    """
    if curve.x.size == 0:
        raise ValueError("empty grid")
    if constant is None:
        constant = fit_majorizing_constant(curve, params, form, calibration)
    bound = bound_curve(form, params, curve.x, constant)
    regime_form = "three-regime" if form == "three-regime" else "four-regime"
    regimes = (None if form == "bernstein"
               else [active_regime(params, float(t), regime_form) for t in curve.x])
    done = TailCurve(curve.x, curve.tail, curve.lower, curve.upper, curve.radius, curve.reps,
                     curve.confidence, bound, regimes, constant, form,
                     bool(np.all(bound >= curve.upper)))
    return done, constant


def regime_profile(params: BoundParams, x, form: str = "four-regime") -> list:
    return [active_regime(params, float(t), form) for t in np.atleast_1d(x)]


def log_tail_slope(curve: TailCurve) -> dict:
    """Least-squares slope of -log P(|U| >= x) against x^{1/2} log x (points with x > 1, tail > 0)."""
    keep = (curve.x > 1) & (curve.tail > 0)
    if keep.sum() < 2:
        return {"points": int(keep.sum()), "slope": float("nan"), "intercept": float("nan")}
    u = np.sqrt(curve.x[keep]) * np.log(curve.x[keep])
    y = -np.log(curve.tail[keep])
    slope, intercept = np.polyfit(u, y, 1)
    return {"points": int(keep.sum()), "slope": float(slope), "intercept": float(intercept),
            "x": curve.x[keep].tolist(), "neg_log_tail": y.tolist(), "sqrt_x_log_x": u.tolist()}


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj.to_dict() if hasattr(obj, "to_dict") else obj, fh, indent=1, sort_keys=True)
