"""Estimators that turn trajectory ensembles into extinction/permanence evidence.

Asymptotic statements (limsup ln I(t)/t, exponential collapse of |S - phi|,
invariant occupation, ergodic averages) are made finite-sample observable as:
trailing-window least-squares slopes, pooled occupation histograms, per-path
time averages, and Kolmogorov-Smirnov distances.  All estimators are pure,
deterministic functions of their path inputs; points at the ln I underflow
floor are excluded from slope fits and occupation/ergodic statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .engine import FLOOR_LOG, TrajectoryPath
from .model import ModelParams


class EstimationError(ValueError):
    """Estimator preconditions violated or too few usable points."""


@dataclass(frozen=True)
class SlopeEstimate:
    """Trailing-window least-squares slope of a log quantity against time.

    truncated is set when more than half the window was unusable (floored
    ln I, or an exactly-zero |S - phi| gap) and the fit fell back to the
    segment before the first unusable point.
    """

    slope: float
    intercept: float
    n_points: int
    truncated: bool


def _fit_line(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(t, y, 1)
    return float(slope), float(intercept)


def _window_slice(n: int, window: float) -> slice:
    if not 0.0 < window < 1.0:
        raise EstimationError(f"window must be in (0, 1), got {window!r}")
    start = int(math.floor(n * (1.0 - window)))
    return slice(min(start, n - 1), n)


def _trailing_fit(times, values, usable, window, what,
                  fallback: str = "first_bad") -> SlopeEstimate:
    """Fit the trailing window, skipping unusable points.

    When more than half the window is unusable the fit falls back to a
    prefix of the path: everything before the first unusable point
    (fallback="first_bad", for the absorbing ln I floor) or everything up to
    the last usable point (fallback="last_good", for gaps that start at an
    exact zero).
    """
    n = len(times)
    sel = _window_slice(n, window)
    w_usable = usable[sel]
    truncated = False
    if w_usable.sum() < 0.5 * (sel.stop - sel.start):
        if not usable.any():
            raise EstimationError(f"no usable points for {what}")
        if fallback == "first_bad":
            cut = int(np.argmin(usable)) if not usable.all() else n
        else:
            cut = int(np.nonzero(usable)[0][-1]) + 1
        times = times[:cut]
        values = values[:cut]
        usable = usable[:cut]
        truncated = True
        if len(times) == 0:
            raise EstimationError(f"no usable points for {what}")
        sel = _window_slice(len(times), window)
        w_usable = usable[sel]
    t = times[sel][w_usable]
    y = values[sel][w_usable]
    if len(t) < 10:
        raise EstimationError(
            f"fewer than 10 usable points for {what} ({len(t)} found)")
    slope, intercept = _fit_line(t, y)
    return SlopeEstimate(slope=slope, intercept=intercept,
                         n_points=int(len(t)), truncated=truncated)


def lyapunov_estimate(path: TrajectoryPath, window: float = 0.5) -> SlopeEstimate:
    """Estimate lim ln I(t)/t as the trailing-window slope of ln I against t."""
    if len(path.times) < 100:
        raise EstimationError("path must have at least 100 stored points")
    usable = path.log_i > FLOOR_LOG
    return _trailing_fit(path.times, path.log_i, usable, window, "ln I slope")


def extinction_rate_estimate(path: TrajectoryPath,
                             window: float = 0.5) -> SlopeEstimate:
    """Trailing-window slope of ln|S - phi|; negative means convergence.

    The gap underflows to exact float zero once |S - phi| decays below the
    resolution of S itself; zero gaps are excluded like floored points, and a
    path with S identically equal to phi reports a -inf sentinel slope.
    """
    if path.log_phi is None:
        raise EstimationError("path has no coupled boundary solution phi")
    diff = np.abs(path.s - path.phi)
    if not np.any(diff > 0.0):
        return SlopeEstimate(slope=-math.inf, intercept=-math.inf,
                             n_points=0, truncated=False)
    usable = diff > 0.0
    logdiff = np.where(usable, np.log(np.maximum(diff, 1e-320)), 0.0)
    return _trailing_fit(path.times, logdiff, usable, window,
                         "ln|S-phi| slope", fallback="last_good")


@dataclass(frozen=True)
class Histogram2D:
    """Normalized pooled occupation histogram over (S, I)."""

    s_edges: np.ndarray
    i_edges: np.ndarray
    mass: np.ndarray
    n_samples: int
    n_dropped: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("s_bin,i_bin,mass\n")
            for a in range(self.mass.shape[0]):
                for b in range(self.mass.shape[1]):
                    fh.write(f"{a},{b},{float(self.mass[a, b])!r}\n")


def percentile_grid(samples_s: np.ndarray, samples_i: np.ndarray,
                    bins: tuple[int, int] = (100, 100),
                    pct: tuple[float, float] = (0.5, 99.5)):
    """Edges covering the central percentile box of the pooled samples."""
    s_lo, s_hi = np.percentile(samples_s, pct)
    i_lo, i_hi = np.percentile(samples_i, pct)
    if not (s_hi > s_lo and i_hi > i_lo):
        raise EstimationError("degenerate sample range for histogram grid")
    return (np.linspace(s_lo, s_hi, bins[0] + 1),
            np.linspace(i_lo, i_hi, bins[1] + 1))


def pooled_samples(paths: Sequence[TrajectoryPath], burn_in: float,
                    t_max: Optional[float] = None):
    ss, ii, dropped = [], [], 0
    for p in paths:
        sel = p.times >= burn_in
        if t_max is not None:
            sel &= p.times <= t_max
        ok = sel & (p.log_i > FLOOR_LOG)
        dropped += int(sel.sum() - ok.sum())
        ss.append(p.s[ok])
        ii.append(p.i[ok])
    s = np.concatenate(ss) if ss else np.empty(0)
    i = np.concatenate(ii) if ii else np.empty(0)
    return s, i, dropped


def occupation_histogram(paths: Sequence[TrajectoryPath], burn_in: float,
                         grid=None, bins: tuple[int, int] = (100, 100),
                         t_max: Optional[float] = None) -> Histogram2D:
    """Pooled normalized histogram of post-burn-in (S, I) samples.

    grid is a pair of edge arrays; if None, the 0.5-99.5 percentile box of
    the pooled samples is used with `bins` cells.  Samples outside the grid
    and numerically-extinct (floored) samples are dropped; the returned mass
    sums to 1 over the kept samples.
    """
    s, i, floored = pooled_samples(paths, burn_in, t_max)
    if s.size == 0:
        raise EstimationError("no post-burn-in samples to histogram")
    if grid is None:
        grid = percentile_grid(s, i, bins)
    s_edges, i_edges = grid
    counts, _, _ = np.histogram2d(s, i, bins=(s_edges, i_edges))
    kept = counts.sum()
    if kept == 0:
        raise EstimationError("all samples fall outside the histogram grid")
    return Histogram2D(
        s_edges=np.asarray(s_edges), i_edges=np.asarray(i_edges),
        mass=counts / kept,
        n_samples=int(kept),
        n_dropped=int(s.size - kept) + floored,
    )


def total_variation(h1: Histogram2D, h2: Histogram2D) -> float:
    """TV distance between two histograms on the same grid."""
    if h1.mass.shape != h2.mass.shape or not (
            np.array_equal(h1.s_edges, h2.s_edges)
            and np.array_equal(h1.i_edges, h2.i_edges)):
        raise EstimationError("histograms must share the same grid")
    return 0.5 * float(np.abs(h1.mass - h2.mass).sum())


@dataclass(frozen=True)
class ErgodicAverages:
    """Per-path time averages of an observable and their dispersion."""

    values: np.ndarray
    mean: float
    std: float
    stderr: float


def _eval_observable(h: Callable, s: np.ndarray, i: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(h(s, i), dtype=float)
        if out.shape == s.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(h(a, b)) for a, b in zip(s, i)])


def ergodic_average(paths: Sequence[TrajectoryPath], h: Callable,
                    burn_in: float) -> ErgodicAverages:
    """Post-burn-in time average of h(S, I) per path, plus dispersion."""
    vals = []
    for p in paths:
        sel = (p.times >= burn_in) & (p.log_i > FLOOR_LOG)
        if sel.sum() < 1:
            raise EstimationError(
                f"path {p.trajectory_index} has no usable post-burn-in samples")
        vals.append(float(np.mean(_eval_observable(h, p.s[sel], p.i[sel]))))
    values = np.asarray(vals)
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return ErgodicAverages(
        values=values,
        mean=float(np.mean(values)),
        std=std,
        stderr=std / math.sqrt(len(values)) if len(values) > 1 else math.nan,
    )


def ks_statistic(samples: np.ndarray, cdf: Callable) -> float:
    """Sup distance between the empirical CDF of samples and cdf."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 10:
        raise EstimationError(f"need at least 10 samples, got {n}")
    try:
        f = np.asarray(cdf(x), dtype=float)
        if f.shape != x.shape:
            raise ValueError
    except (TypeError, ValueError):
        f = np.array([float(cdf(v)) for v in x])
    k = np.arange(n)
    return float(max(np.max((k + 1) / n - f), np.max(f - k / n)))


@dataclass(frozen=True)
class MomentSeries:
    """Ensemble mean of (S+I)^(1+p) + (S+I)^(-p_bar) at each stored time."""

    times: np.ndarray
    values: np.ndarray
    p: float
    p_bar: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,value\n")
            for t, v in zip(self.times, self.values):
                fh.write(f"{float(t)!r},{float(v)!r}\n")


def moment_series(paths: Sequence[TrajectoryPath], params: ModelParams,
                  p: float, p_bar: float) -> MomentSeries:
    """Time-resolved moment proxy for the dissipativity bound.

    Requires 0 < p < min(2 b1/sigma1^2, 2 b2/sigma2^2) and p_bar > 0; these
    are the exponents for which the moment stays bounded.
    """
    p_max1 = 2.0 * params.b1 / params.sigma1 ** 2
    p_max2 = (2.0 * params.b2 / params.sigma2 ** 2
              if params.sigma2 > 0.0 else math.inf)
    p_max = min(p_max1, p_max2)
    if not 0.0 < p < p_max:
        raise EstimationError(
            f"p must satisfy 0 < p < min(2*b1/sigma1^2, 2*b2/sigma2^2) "
            f"= {p_max:g}, got {p!r}")
    if p_bar <= 0.0:
        raise EstimationError(f"p_bar must be positive, got {p_bar!r}")
    if not paths:
        raise EstimationError("no paths given")
    times = paths[0].times
    acc = np.zeros_like(times)
    for path in paths:
        if path.times.shape != times.shape or not np.array_equal(path.times, times):
            raise EstimationError("paths must share one storage grid")
        tot = path.s + path.i
        acc += tot ** (1.0 + p) + tot ** (-p_bar)
    return MomentSeries(times=times, values=acc / len(paths), p=p, p_bar=p_bar)


@dataclass(frozen=True)
class EnsembleStats:
    """Aggregated per-ensemble statistics, CSV-exportable."""

    n_paths: int
    lyapunov_slopes: np.ndarray
    lyapunov_flags: np.ndarray
    s_phi_slopes: Optional[np.ndarray]
    s_phi_flags: Optional[np.ndarray]
    occupation: Optional[Histogram2D]
    time_averages: Dict[str, np.ndarray]
    moments: Optional[MomentSeries]

    def slopes_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("path_index,lyapunov_slope,lyapunov_flag"
                     + (",s_phi_slope,s_phi_flag\n" if self.s_phi_slopes is not None
                        else "\n"))
            for k in range(self.n_paths):
                row = [str(k), repr(float(self.lyapunov_slopes[k])),
                       str(int(self.lyapunov_flags[k]))]
                if self.s_phi_slopes is not None:
                    row += [repr(float(self.s_phi_slopes[k])),
                            str(int(self.s_phi_flags[k]))]
                fh.write(",".join(row) + "\n")


def collect_ensemble_stats(
    paths: Sequence[TrajectoryPath],
    *,
    window: float = 0.5,
    burn_in: float = 0.0,
    observables: Optional[Dict[str, Callable]] = None,
    with_occupation: bool = False,
    occupation_bins: tuple[int, int] = (100, 100),
    params: Optional[ModelParams] = None,
    p: Optional[float] = None,
    p_bar: Optional[float] = None,
) -> EnsembleStats:
    """Run the estimator suite over one ensemble of trajectories."""
    n = len(paths)
    ly = np.empty(n)
    lyf = np.zeros(n, dtype=bool)
    for k, path in enumerate(paths):
        est = lyapunov_estimate(path, window)
        ly[k] = est.slope
        lyf[k] = est.truncated
    has_phi = all(p_.log_phi is not None for p_ in paths)
    sp = spf = None
    if has_phi:
        sp = np.empty(n)
        spf = np.zeros(n, dtype=bool)
        for k, path in enumerate(paths):
            est = extinction_rate_estimate(path, window)
            sp[k] = est.slope
            spf[k] = est.truncated
    occ = (occupation_histogram(paths, burn_in, bins=occupation_bins)
           if with_occupation else None)
    averages: Dict[str, np.ndarray] = {}
    for name, h in (observables or {}).items():
        averages[name] = ergodic_average(paths, h, burn_in).values
    mom = None
    if params is not None and p is not None and p_bar is not None:
        mom = moment_series(paths, params, p, p_bar)
    return EnsembleStats(
        n_paths=n,
        lyapunov_slopes=ly,
        lyapunov_flags=lyf,
        s_phi_slopes=sp,
        s_phi_flags=spf,
        occupation=occ,
        time_averages=averages,
        moments=mom,
    )
