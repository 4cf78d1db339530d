"""Travelling-wave diagnostics.

A travelling wave keeps its shape and moves at constant speed. Three
statistics probe that on a simulated trajectory, all built on the location
of the peak of the infected field ``I``:

* the Pearson correlation between time and peak location (linearity),
* a local L2 difference between peak-aligned profiles (shape),
* the least-squares slope of location on time, compared against the
  minimum speed ``2 sqrt(D1 (r + mu N))``.

:func:`wave_experiment` draws parameter sets uniformly from a box of ranges
and collects the three statistics per sample.
"""
from __future__ import annotations

import logging
import math
import time
from functools import partial
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, NamedTuple

import numpy as np

from .errors import BlightError, DomainError
from .model import ModelParams, min_wave_speed
from .solver import Grid, Trajectory, integrate, standard_initial_condition

logger = logging.getLogger(__name__)

#: Sampling box for the wave experiment (all uniform). ``N`` is not sampled.
WAVE_RANGES: dict[str, tuple[float, float]] = {
    "D1": (20.0, 50.0),
    "D2": (0.0, 20.0),
    "K": (1e6, 1e7),
    "eps": (5.0, 2000.0),
    "r": (0.05, 0.95),
    "mu": (0.05, 0.95),
    "gamma": (0.001, 0.95),
    "M1": (0.1, 1.0),
    "M2": (0.1, 1.0),
    "alpha": (1e7, 1e8),
    "A1": (2e5, 8e5),
    "A2": (0.05, 0.5),
    "n1": (1.0, 5.0),
    "n2": (1.0, 5.0),
}

MAX_HALFWIDTH = 1000


class Peak(NamedTuple):
    index: int
    location: float
    degenerate: bool = False


class PeakSeries(NamedTuple):
    times: np.ndarray
    locations: np.ndarray
    indices: np.ndarray
    degenerate: np.ndarray


class ShapeDiff(NamedTuple):
    l2: float
    neighborhood_cells: int  # half-width of the window, in cells
    truncated: bool


@dataclass
class WaveStats:
    pearson: float
    l2_shape_diff: float
    neighborhood_cells: int
    neighborhood_truncated: bool
    speed: float
    speed_minus_cmin: float
    regression_r2: float
    t_cmp: float = math.nan

    def as_dict(self) -> dict:
        return asdict(self)


def peak_location(field, grid: Grid) -> Peak:
    """Cell index and centre of the maximum; ties go to the smallest index.

    A flat field has no peak: the result carries index 0 and
    ``degenerate=True``.
    """
    u = np.asarray(field, dtype=float)
    if u.shape != (grid.n_cells,):
        raise DomainError(f"field has shape {u.shape}, grid has {grid.n_cells} cells")
    idx = int(np.argmax(u))
    degenerate = bool(u[idx] == u.min())
    if degenerate:
        idx = 0
    return Peak(idx, (idx + 0.5) * grid.dx, degenerate)


def pearson(xs, ys) -> float:
    """Sample Pearson correlation; ``nan`` when either sample is constant."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise DomainError("pearson needs two 1D samples of equal length >= 2")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:  # exact test; mean-centring leaves round-off
        return math.nan
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.sum(dx * dx))
    syy = float(np.sum(dy * dy))
    if sxx == 0.0 or syy == 0.0:  # spread below float resolution
        return math.nan
    value = float(np.sum(dx * dy)) / (math.sqrt(sxx) * math.sqrt(syy))
    return min(1.0, max(-1.0, value))


def track_peaks(traj: Trajectory, t_start: float = 10.0, t_end: float = 30.0,
                n_points: int = 41, compartment: str = "i") -> PeakSeries:
    """Peak of ``I`` at the snapshots nearest ``n_points`` equally spaced times."""
    if n_points < 2:
        raise DomainError("n_points must be >= 2")
    times = traj.times
    if times.size == 0:
        raise DomainError("trajectory has no snapshots")
    half = 0.5 * traj.dt_record + 1e-9
    if t_start < times[0] - half or t_end > times[-1] + half or t_end <= t_start:
        raise DomainError(f"window [{t_start}, {t_end}] not covered by snapshots "
                          f"[{times[0]}, {times[-1]}]")
    targets = np.linspace(t_start, t_end, n_points)
    picked = [traj.index_nearest(t) for t in targets]
    peaks = [peak_location(getattr(traj.snapshots[k], compartment), traj.grid) for k in picked]
    return PeakSeries(times=times[picked],
                      locations=np.array([p.location for p in peaks]),
                      indices=np.array([p.index for p in peaks]),
                      degenerate=np.array([p.degenerate for p in peaks]))


def local_l2(ref, cmp, dx: float, max_halfwidth: int = MAX_HALFWIDTH) -> ShapeDiff:
    """L2 distance between two profiles after aligning their peaks.

    The comparison window extends ``h`` cells either side of each peak, with
    ``h`` the smallest of ``max_halfwidth`` and the distances from either
    peak to the domain ends.
    """
    a = np.asarray(ref, dtype=float)
    b = np.asarray(cmp, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("profiles must be 1D and of equal length")
    n = a.size
    pa, pb = int(np.argmax(a)), int(np.argmax(b))
    if a[pa] == a.min() or b[pb] == b.min():
        raise DomainError("degenerate peak: profile is flat")
    h = min(pa, n - 1 - pa, pb, n - 1 - pb, int(max_halfwidth))
    diff = a[pa - h: pa + h + 1] - b[pb - h: pb + h + 1]
    return ShapeDiff(math.sqrt(float(np.sum(diff * diff)) * dx), h, h < max_halfwidth)


def shape_diff_local_l2(traj: Trajectory, t_ref: float, t_cmp: float,
                        max_halfwidth: int = MAX_HALFWIDTH) -> ShapeDiff:
    """Local L2 shape difference of ``I`` between two recorded times."""
    ref = traj.at(t_ref).i
    cmp = traj.at(t_cmp).i
    return local_l2(ref, cmp, traj.grid.dx, max_halfwidth)


def wave_speed_regression(series_or_times, locations=None) -> tuple[float, float]:
    """Least-squares slope of location on time and the coefficient of determination."""
    if locations is None:
        t = np.asarray(series_or_times.times, dtype=float)
        x = np.asarray(series_or_times.locations, dtype=float)
    else:
        t = np.asarray(series_or_times, dtype=float)
        x = np.asarray(locations, dtype=float)
    if t.size < 2 or np.unique(t).size < 2:
        raise DomainError("need at least two distinct times for a regression")
    tc = t - t.mean()
    xc = x - x.mean()
    stt = float(np.sum(tc * tc))
    slope = float(np.sum(tc * xc)) / stt
    sxx = float(np.sum(xc * xc))
    if sxx == 0.0:
        return slope, 1.0
    resid = xc - slope * tc
    return slope, 1.0 - float(np.sum(resid * resid)) / sxx


def front_position(field, grid: Grid, level: float) -> float:
    """Centre of the right-most cell where ``field >= level`` (0 if none)."""
    u = np.asarray(field, dtype=float)
    above = np.nonzero(u >= level)[0]
    if above.size == 0:
        return 0.0
    return (above[-1] + 0.5) * grid.dx


def track_front(traj: Trajectory, level: float, t_start: float = 10.0, t_end: float = 30.0,
                n_points: int = 41, compartment: str = "b") -> tuple[np.ndarray, np.ndarray]:
    """Level-set position of a monotone front at equally spaced times.

    Used where the tracked field has no interior peak, e.g. the epiphytic
    population alone.
    """
    targets = np.linspace(t_start, t_end, n_points)
    picked = [traj.index_nearest(t) for t in targets]
    times = traj.times[picked]
    locs = np.array([front_position(getattr(traj.snapshots[k], compartment), traj.grid, level)
                     for k in picked])
    return times, locs


@dataclass(frozen=True)
class WaveConfig:
    """Simulation settings for one wave-experiment sample."""

    length: float = 1000.0
    n_cells: int = 10000
    dt: float = 0.1
    t_end: float = 30.0
    N: float = 5.0
    b_seed: float = 1e6
    track_window: tuple[float, float] = (10.0, 30.0)
    n_track: int = 41
    t_ref: float = 20.0
    t_cmp_window: tuple[float, float] = (20.1, 25.0)
    max_halfwidth: int = MAX_HALFWIDTH
    rtol: float = 1e-6
    atol: float = 1e-6
    #: values for parameters that have no sampling range (``N`` always comes from ``N``)
    fixed: Mapping[str, float] = field(default_factory=dict)


@dataclass
class WaveSample:
    index: int
    params: dict
    status: str
    stats: WaveStats | None = None
    message: str = ""
    seconds: float = 0.0


@dataclass
class WaveExperimentResult:
    samples: list[WaveSample]
    summary: dict[str, dict[str, float]]
    seed: int
    config: WaveConfig
    n_failed: int = field(init=False)

    def __post_init__(self):
        self.n_failed = sum(s.status != "ok" for s in self.samples)


def sample_params(rng: np.random.Generator, ranges: Mapping[str, tuple[float, float]],
                  fixed: Mapping[str, float]) -> ModelParams:
    """Uniform draw in declaration order of ``ranges``; ``fixed`` fills the rest."""
    drawn = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in ranges.items()}
    return ModelParams(**{**fixed, **drawn})


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` of an experiment."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def analyse_trajectory(traj: Trajectory, params: ModelParams, rng: np.random.Generator,
                       config: WaveConfig) -> WaveStats:
    """The three wave statistics for one simulated trajectory."""
    series = track_peaks(traj, *config.track_window, config.n_track)
    p = pearson(series.times, series.locations)
    speed, r2 = wave_speed_regression(series)
    times = traj.times
    lo, hi = config.t_cmp_window
    candidates = times[(times >= lo - 1e-9) & (times <= hi + 1e-9)]
    if candidates.size == 0:
        raise DomainError(f"no snapshots in the comparison window [{lo}, {hi}]")
    t_cmp = float(candidates[rng.integers(candidates.size)])
    shape = shape_diff_local_l2(traj, config.t_ref, t_cmp, config.max_halfwidth)
    return WaveStats(pearson=p, l2_shape_diff=shape.l2, neighborhood_cells=shape.neighborhood_cells,
                     neighborhood_truncated=shape.truncated, speed=speed,
                     speed_minus_cmin=speed - min_wave_speed(params), regression_r2=r2,
                     t_cmp=t_cmp)


def run_wave_sample(index: int, seed: int, ranges: Mapping[str, tuple[float, float]],
                    config: WaveConfig) -> WaveSample:
    """Draw, simulate and analyse one sample; failures are captured, not raised."""
    rng = sample_rng(seed, index)
    params = sample_params(rng, ranges, {**config.fixed, "N": config.N})
    grid = Grid(config.length, config.n_cells)
    start = time.perf_counter()
    try:
        traj = integrate(standard_initial_condition(grid, params, config.b_seed), params, grid,
                         config.t_end, dt=config.dt, record_every=config.dt,
                         rtol=config.rtol, atol=config.atol)
        stats = analyse_trajectory(traj, params, rng, config)
    except BlightError as exc:
        logger.warning("wave sample %d failed: %s", index, exc)
        return WaveSample(index, params.as_dict(), "failed", None, str(exc),
                          time.perf_counter() - start)
    return WaveSample(index, params.as_dict(), "ok", stats, "", time.perf_counter() - start)


SUMMARY_STATISTICS = ("pearson", "l2_shape_diff", "speed_minus_cmin")


def summarize(values) -> dict[str, float]:
    """Sample min, max, mean and standard deviation (n - 1 denominator)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return dict(min=math.nan, max=math.nan, mean=math.nan, std=math.nan)
    std = float(np.std(v, ddof=1)) if v.size > 1 else math.nan
    return dict(min=float(v.min()), max=float(v.max()), mean=float(v.mean()), std=std)


def wave_experiment(n_samples: int, seed: int, ranges: Mapping[str, tuple[float, float]] | None = None,
                    config: WaveConfig | None = None, *,
                    progress: Callable[[WaveSample], None] | None = None,
                    workers: int = 1) -> WaveExperimentResult:
    """Sample parameter sets, simulate each, and summarise the wave statistics.

    Every sample owns a generator derived from ``(seed, index)``, so results
    do not depend on evaluation order or on ``workers``.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    ranges = dict(WAVE_RANGES if ranges is None else ranges)
    for name, (lo, hi) in ranges.items():
        if not lo <= hi:
            raise DomainError(f"range for {name} is empty: [{lo}, {hi}]")
    config = config or WaveConfig()
    task = partial(run_wave_sample, seed=seed, ranges=ranges, config=config)
    samples = map_samples(task, range(n_samples), workers, progress)
    ok = [s.stats for s in samples if s.status == "ok"]
    summary = {name: summarize([getattr(st, name) for st in ok]) for name in SUMMARY_STATISTICS}
    return WaveExperimentResult(samples=samples, summary=summary, seed=seed, config=config)


def map_samples(fn, indices, workers=1, progress=None):
    """``[fn(k) for k in indices]``, optionally across worker processes."""
    if workers <= 1:
        out = []
        for k in indices:
            out.append(fn(k))
            if progress:
                progress(out[-1])
        return out
    from concurrent.futures import ProcessPoolExecutor

    indices = list(indices)
    results = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for k, res in zip(indices, pool.map(fn, indices)):
            results[k] = res
            if progress:
                progress(res)
    return [results[k] for k in indices]
