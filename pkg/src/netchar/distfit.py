"""Heavy-tail distribution modeling.

Covers the Zipf-Mandelbrot count model (pmf, inverse-CDF sampler,
log2-binned histogramming, parameter fitting), the modified-Cauchy
temporal overlap model, and the small categorical / hour-of-day summaries
used in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .assoc import AssocArray, split_col
from .errors import FitError

__all__ = [
    "ZmParams",
    "ZmFit",
    "LogBinnedHistogram",
    "CauchyParams",
    "CauchyFit",
    "zm_pmf",
    "zm_sample",
    "log_bin",
    "binned_model_fractions",
    "fit_zm",
    "cauchy_eval",
    "fit_cauchy",
    "hour_histogram",
    "categorical_distribution",
]

# Exact summation is used for the first _EXACT_HEAD support points during
# fitting; beyond that a midpoint-rule integral is accurate to ~1e-9 in
# log10, far below the sampling noise of any histogram we fit.
_EXACT_HEAD = 4096

_MODEL_FLOOR = 1e-300


@dataclass(frozen=True)
class ZmParams:
    """Zipf-Mandelbrot parameters: p(d) proportional to 1/(d + delta)^alpha
    on the integer support d = 1..dmax."""

    alpha: float
    delta: float
    dmax: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.dmax < 1:
            raise ValueError(f"dmax must be >= 1, got {self.dmax}")
        if 1 + self.delta <= 0:
            raise ValueError(f"delta must exceed -1, got {self.delta}")


@dataclass(frozen=True)
class ZmFit:
    params: ZmParams
    mse: float


@dataclass(frozen=True)
class LogBinnedHistogram:
    """Power-of-two binned histogram: bin label L covers counts in [L, 2L)."""

    bins: tuple[tuple[int, float], ...]
    n: int

    @property
    def labels(self) -> np.ndarray:
        return np.array([label for label, _ in self.bins], dtype=np.int64)

    @property
    def fractions(self) -> np.ndarray:
        return np.array([frac for _, frac in self.bins], dtype=float)


@dataclass(frozen=True)
class CauchyParams:
    """Temporal overlap model: a degree factor log2(d)/log2(sqrt(nv)) scaled
    by the even peak shape beta/(beta + |t - t0|^alpha)."""

    alpha: float
    beta: float
    t0: float
    nv: int

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be > 0")
        if self.nv < 1:
            raise ValueError(f"nv must be >= 1, got {self.nv}")


@dataclass(frozen=True)
class CauchyFit:
    params: CauchyParams
    mse: float
    beta_at_boundary: bool


def zm_pmf(params: ZmParams) -> np.ndarray:
    """Normalized pmf over d = 1..dmax; index i holds p(d = i + 1)."""
    d = np.arange(1, params.dmax + 1, dtype=float)
    w = (d + params.delta) ** -params.alpha
    return w / w.sum()


def zm_sample(n: int, params: ZmParams, seed) -> np.ndarray:
    """Draw n counts by inverse CDF; deterministic for a fixed seed."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdf = np.cumsum(zm_pmf(params))
    cdf[-1] = 1.0  # guard against cumulative rounding at the top
    return (np.searchsorted(cdf, rng.random(n), side="right") + 1).astype(np.int64)


def log_bin(values) -> LogBinnedHistogram:
    """Bin counts into powers of two: d lands in bin 2^floor(log2 d).

    Only populated bins are kept; empty bins are skipped, not smoothed.
    """
    arr = np.asarray(values)
    if arr.size == 0:
        raise ValueError("cannot bin an empty sample")
    if np.any(arr < 1):
        raise ValueError("all counts must be >= 1")
    # frexp gives floor(log2) exactly, immune to log rounding at bin edges
    exponents = np.frexp(arr.astype(float))[1] - 1
    labels, counts = np.unique(exponents, return_counts=True)
    n = int(arr.size)
    bins = tuple((int(1 << int(e)), int(c) / n) for e, c in zip(labels, counts))
    return LogBinnedHistogram(bins=bins, n=n)


def hist_from_binned(label_counts: dict[int, int]) -> LogBinnedHistogram:
    """Histogram from already-binned data (bin label -> occupancy).

    Binning is idempotent, so a histogram rebuilt from stored power-of-two
    bin labels equals the histogram of the raw counts.
    """
    if not label_counts:
        raise ValueError("cannot build a histogram from no bins")
    n = 0
    bins = []
    for label in sorted(label_counts):
        count = label_counts[label]
        if label < 1 or (label & (label - 1)) != 0:
            raise ValueError(f"bin label {label} is not a power of two")
        if count < 1:
            raise ValueError(f"bin {label} has non-positive occupancy {count}")
        bins.append((int(label), int(count)))
        n += int(count)
    return LogBinnedHistogram(bins=tuple((label, count / n) for label, count in bins), n=n)


def _tail_integral(a: float, b: float, alpha: float, delta: float) -> float:
    # Midpoint-rule value of sum_{k=a}^{b} (k+delta)^-alpha for large a.
    lo = a - 0.5 + delta
    hi = b + 0.5 + delta
    if abs(alpha - 1.0) < 1e-12:
        return math.log(hi / lo)
    return (hi ** (1.0 - alpha) - lo ** (1.0 - alpha)) / (1.0 - alpha)


def _segment_summer(alpha: float, delta: float, dmax: int):
    head_n = min(dmax, _EXACT_HEAD)
    k = np.arange(1, head_n + 1, dtype=float)
    head_cum = np.concatenate([[0.0], np.cumsum((k + delta) ** -alpha)])

    def seg(a: int, b: int) -> float:
        if b <= head_n:
            return float(head_cum[b] - head_cum[a - 1])
        total = 0.0
        if a <= head_n:
            total += float(head_cum[head_n] - head_cum[a - 1])
            a = head_n + 1
        return total + _tail_integral(a, b, alpha, delta)

    return seg


def binned_model_fractions(params: ZmParams, labels: Sequence[int]) -> np.ndarray:
    """Mass of each power-of-two bin under the model, normalized over the
    full (unbinned) support 1..dmax."""
    seg = _segment_summer(params.alpha, params.delta, params.dmax)
    total = seg(1, params.dmax)
    out = np.empty(len(labels), dtype=float)
    for i, label in enumerate(labels):
        label = int(label)
        if label > params.dmax:
            raise ValueError(f"bin label {label} outside model support 1..{params.dmax}")
        out[i] = seg(label, min(2 * label - 1, params.dmax)) / total
    return np.maximum(out, _MODEL_FLOOR)


def _default_delta_grid(dmax: int) -> list[float]:
    grid = [-0.9, -0.75, -0.6, -0.45, -0.3, -0.15, 0.0]
    step = 0.25
    while step <= dmax / 4:
        grid.append(step)
        step *= 2
    return grid


def fit_zm(hist: LogBinnedHistogram, dmax: int | None = None,
           alpha_grid: Sequence[float] | None = None,
           delta_grid: Sequence[float] | None = None) -> ZmFit:
    """Fit (alpha, delta) to a log-binned histogram.

    Coarse grid search followed by Nelder-Mead refinement, minimizing the
    count-weighted mean squared error between log10 of the empirical bin
    fractions and log10 of the identically binned model.  The weights are
    the bin occupancies (inverse-variance weights for log fractions), so
    sparsely populated tail bins inform the fit without drowning it in
    their sampling noise.
    """
    labels = hist.labels
    fracs = hist.fractions
    if len(labels) < 3:
        raise FitError(f"need at least 3 nonzero bins to fit, got {len(labels)}")
    if dmax is None:
        dmax = 2 * int(labels.max()) - 1
    elif dmax < int(labels.max()):
        raise ValueError(f"dmax={dmax} does not cover the largest bin {labels.max()}")

    log_emp = np.log10(fracs)
    weights = fracs / fracs.sum()

    def objective(alpha: float, delta: float) -> float:
        if alpha <= 0.05 or delta <= -1 + 1e-9:
            return math.inf
        model = binned_model_fractions(ZmParams(alpha, delta, dmax), labels)
        return float(np.sum(weights * (np.log10(model) - log_emp) ** 2))

    if alpha_grid is None:
        alpha_grid = np.arange(0.5, 4.0 + 1e-9, 0.05)
    if delta_grid is None:
        delta_grid = _default_delta_grid(dmax)

    best_err = math.inf
    best = (1.0, 0.0)
    for alpha in alpha_grid:
        for delta in delta_grid:
            err = objective(alpha, delta)
            if err < best_err:
                best_err = err
                best = (float(alpha), float(delta))

    result = minimize(lambda x: objective(x[0], x[1]), np.array(best),
                      method="Nelder-Mead",
                      options={"xatol": 1e-6, "fatol": 1e-14, "maxiter": 600, "maxfev": 800})
    if result.fun <= best_err:
        best_err = float(result.fun)
        best = (float(result.x[0]), float(result.x[1]))

    return ZmFit(params=ZmParams(best[0], best[1], dmax), mse=best_err)


def cauchy_eval(d: float, t: float, params: CauchyParams) -> float:
    """Modeled enrichment fraction for a low-frequency source of count d at
    observation time t (proportionality constant fixed to 1)."""
    sqrt_nv = math.sqrt(params.nv)
    if not 1 < d < sqrt_nv:
        raise ValueError(
            f"d={d} outside (1, sqrt(nv)={sqrt_nv:.6g}); use overlap_fraction "
            "for high-frequency sources")
    degree = math.log2(d) / math.log2(sqrt_nv)
    return degree * params.beta / (params.beta + abs(t - params.t0) ** params.alpha)


def fit_cauchy(series: Sequence[tuple[float, float]], d: float, nv: int,
               t0: float | None = None,
               alpha_grid: Sequence[float] | None = None,
               beta_grid: Sequence[float] | None = None) -> CauchyFit:
    """Fit (alpha, beta) to an observed (time, fraction) series.

    t0 is normally the known collection time; pass t0=None to fit it as
    well.  A best beta pinned at the top of its grid means the peak shape
    is unresolved (flat series); this is flagged, not raised.
    """
    if len(series) < 4:
        raise FitError(f"need at least 4 time points, got {len(series)}")
    times = np.array([t for t, _ in series], dtype=float)
    observed = np.array([y for _, y in series], dtype=float)
    if alpha_grid is None:
        alpha_grid = np.arange(0.5, 3.0 + 1e-9, 0.05)
    if beta_grid is None:
        beta_grid = np.geomspace(1e-3, 1e6, 91)
    beta_top = float(np.max(beta_grid))
    t0_grid = [float(t0)] if t0 is not None else [float(t) for t in np.unique(times)]

    sqrt_nv = math.sqrt(nv)
    degree = math.log2(d) / math.log2(sqrt_nv)

    def model(alpha: float, beta: float, center: float) -> np.ndarray:
        return degree * beta / (beta + np.abs(times - center) ** alpha)

    def objective(alpha: float, beta: float, center: float) -> float:
        if alpha <= 0.05 or beta <= 0:
            return math.inf
        return float(np.mean((model(alpha, beta, center) - observed) ** 2))

    best_err = math.inf
    best = (1.0, 1.0, t0_grid[0])
    for alpha in alpha_grid:
        for beta in beta_grid:
            for center in t0_grid:
                err = objective(alpha, beta, center)
                if err < best_err:
                    best_err = err
                    best = (float(alpha), float(beta), float(center))

    # Refine in (alpha, log beta[, t0]); log-beta keeps the positivity
    # constraint out of the optimizer's way.
    if t0 is not None:
        x0 = np.array([best[0], math.log(best[1])])
        fun = lambda x: objective(x[0], math.exp(x[1]), float(t0))  # noqa: E731
    else:
        x0 = np.array([best[0], math.log(best[1]), best[2]])
        fun = lambda x: objective(x[0], math.exp(x[1]), x[2])  # noqa: E731
    result = minimize(fun, x0, method="Nelder-Mead",
                      options={"xatol": 1e-7, "fatol": 1e-16, "maxiter": 800, "maxfev": 1000})
    if result.fun <= best_err:
        best_err = float(result.fun)
        center = float(t0) if t0 is not None else float(result.x[2])
        best = (float(result.x[0]), float(math.exp(result.x[1])), center)

    params = CauchyParams(alpha=best[0], beta=best[1], t0=best[2], nv=nv)
    return CauchyFit(params=params, mse=best_err,
                     beta_at_boundary=best[1] >= beta_top * 0.99)


def _hour_of(value) -> int:
    if isinstance(value, datetime):
        return value.hour
    from .ingest import parse_timestamp  # local import avoids a cycle

    return parse_timestamp(str(value)).hour


def hour_histogram(last_seen_values: Iterable) -> np.ndarray:
    """Fraction of records per UTC hour of day (24 bins, sums to 1)."""
    counts = np.zeros(24, dtype=np.int64)
    total = 0
    for value in last_seen_values:
        counts[_hour_of(value)] += 1
        total += 1
    if total == 0:
        raise ValueError("no timestamps to bin")
    return counts / total


# Report defaults: show the 16 most common operating systems and the 25
# most common CVEs; small enums are shown in full.
DEFAULT_TOP_K = {"os": 16, "cve": 25}


def categorical_distribution(array: AssocArray, variable: str,
                             top_k: int | None = None) -> list[tuple[str, float]]:
    """Per-value fractions for one variable, sorted descending.

    Fractions are column sums over the variable's slice normalized by the
    slice's nonzero count, so the top entry matches the dimensional table's
    (maxval, maxfrac).
    """
    if top_k is None:
        top_k = DEFAULT_TOP_K.get(variable)
    sliced = array.select_cols(variable + "|")
    if sliced.nnz == 0:
        return []
    total = sliced.nnz
    entries = [(split_col(col)[1], count / total) for col, count in sliced.col_sums().items()]
    entries.sort(key=lambda item: (-item[1], item[0]))
    if top_k is not None:
        entries = entries[:top_k]
    return entries
