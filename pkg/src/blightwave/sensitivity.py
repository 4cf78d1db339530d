"""Variance-based sensitivity of the infection front position.

The quantity of interest is the location of the peak of ``I`` a fixed number
of days after a point release of the pathogen. Sobol indices are estimated
on an A/B/AB design (``n_base * (k + 2)`` model runs): first-order indices
with the Saltelli (2010) estimator and total-effect indices with Jansen's.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import BlightError, DomainError
from .model import TABLE5_FIXED, ModelParams
from .solver import Grid, integrate, standard_initial_condition
from .waves import map_samples, peak_location

logger = logging.getLogger(__name__)

#: Factor ranges of the sensitivity experiment (uniform).
SOBOL_RANGES: dict[str, tuple[float, float]] = {
    "D2": (0.0, 50.0),
    "mu": (0.05, 1.0),
    "N": (1.0, 5.0),
    "r": (0.05, 1.0),
}

SAMPLERS = ("low_discrepancy", "pseudo_random")


class DegeneratePeakWarning(UserWarning):
    """The infected field was flat, so the front position defaulted to cell 0."""


class SensitivityAborted(BlightError):
    """A model evaluation failed; indices on partial data would be biased."""

    def __init__(self, message, *, row=None):
        super().__init__(message)
        self.row = row


@dataclass(frozen=True)
class SobolDesign:
    """Saltelli A/B/AB design on the unit hypercube."""

    matrix_a: np.ndarray
    matrix_b: np.ndarray
    ab_matrices: tuple[np.ndarray, ...]

    @property
    def n_base(self) -> int:
        return self.matrix_a.shape[0]

    @property
    def k(self) -> int:
        return self.matrix_a.shape[1]

    @property
    def total_runs(self) -> int:
        return self.n_base * (self.k + 2)

    def stacked(self) -> np.ndarray:
        """All rows in evaluation order: A, B, then AB_1 ... AB_k."""
        return np.vstack([self.matrix_a, self.matrix_b, *self.ab_matrices])


def sobol_design(n_base: int, k: int, sampler: str = "low_discrepancy", seed: int = 0) -> SobolDesign:
    """Build the A, B and AB^(i) matrices.

    ``low_discrepancy`` splits a scrambled ``2k``-dimensional Sobol' sequence
    into the A and B halves; ``pseudo_random`` uses the seeded generator.
    """
    if n_base < 2 or k < 1:
        raise DomainError(f"need n_base >= 2 and k >= 1, got n_base={n_base}, k={k}")
    if sampler == "low_discrepancy":
        engine = qmc.Sobol(d=2 * k, scramble=True, seed=np.random.default_rng(seed))
        with warnings.catch_warnings():
            # non power-of-two sizes lose the balance property, which is accepted here
            warnings.simplefilter("ignore", UserWarning)
            points = engine.random(n_base)
    elif sampler == "pseudo_random":
        points = np.random.default_rng(seed).random((n_base, 2 * k))
    else:
        raise DomainError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    a = np.ascontiguousarray(points[:, :k])
    b = np.ascontiguousarray(points[:, k:])
    ab = []
    for i in range(k):
        m = a.copy()
        m[:, i] = b[:, i]
        ab.append(m)
    return SobolDesign(a, b, tuple(ab))


def _pooled_variance(y_a, y_b) -> float:
    return float(np.var(np.concatenate([y_a, y_b]), ddof=1))


def first_order_saltelli(y_a, y_b, y_ab_i) -> float:
    """First-order index ``mean(y_B (y_AB_i - y_A)) / V``; ``nan`` if ``V = 0``."""
    y_a, y_b, y_ab_i = (np.asarray(v, dtype=float) for v in (y_a, y_b, y_ab_i))
    if not (y_a.shape == y_b.shape == y_ab_i.shape):
        raise DomainError("estimator inputs must have equal lengths")
    var = _pooled_variance(y_a, y_b)
    if var == 0.0:
        return math.nan
    return float(np.mean(y_b * (y_ab_i - y_a))) / var


def total_order_jansen(y_a, y_ab_i, y_b=None) -> float:
    """Total-effect index ``mean((y_A - y_AB_i)^2) / (2 V)``; ``nan`` if ``V = 0``.

    ``V`` is pooled over ``y_a`` and ``y_b`` when ``y_b`` is given, else taken
    from ``y_a`` alone.
    """
    y_a = np.asarray(y_a, dtype=float)
    y_ab_i = np.asarray(y_ab_i, dtype=float)
    if y_a.shape != y_ab_i.shape:
        raise DomainError("estimator inputs must have equal lengths")
    var = _pooled_variance(y_a, y_b) if y_b is not None else float(np.var(y_a, ddof=1))
    if var == 0.0:
        return math.nan
    return float(np.mean((y_a - y_ab_i) ** 2)) / (2.0 * var)


def _indices_batch(ya, yb, yab):
    """Vectorised estimators over leading batch axes: ``ya``/``yb`` ``(..., n)``,
    ``yab`` ``(..., k, n)``."""
    pooled = np.concatenate([ya, yb], axis=-1)
    var = np.var(pooled, axis=-1, ddof=1)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.mean(yb[..., None, :] * (yab - ya[..., None, :]), axis=-1) / var
        total = np.mean((ya[..., None, :] - yab) ** 2, axis=-1) / (2.0 * var)
    degenerate = var[..., 0] == 0.0
    first[degenerate] = np.nan
    total[degenerate] = np.nan
    return first, total, var[..., 0]


@dataclass
class SobolResult:
    factors: tuple[str, ...]
    first_order: np.ndarray
    total_order: np.ndarray
    variance: float
    n_base: int
    k: int
    seed: int
    sampler: str = "low_discrepancy"
    first_ci: np.ndarray | None = None  # (k, 2): 95% bootstrap interval
    total_ci: np.ndarray | None = None
    first_se: np.ndarray | None = None
    total_se: np.ndarray | None = None
    outputs: np.ndarray | None = None
    degenerate_runs: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def total_runs(self) -> int:
        return self.n_base * (self.k + 2)

    @property
    def degenerate(self) -> bool:
        return not self.variance > 0

    def noise_tolerance(self) -> np.ndarray:
        """Allowed shortfall of ``T_i`` below ``S_i``: three bootstrap standard errors."""
        if self.first_se is None:
            return np.zeros(self.k)
        return 3.0 * np.hypot(self.first_se, self.total_se)


def sobol_indices(y_a, y_b, y_ab, *, factors: Sequence[str] | None = None, seed: int = 0,
                  n_bootstrap: int = 1000, sampler: str = "low_discrepancy") -> SobolResult:
    """First-order and total indices with row-bootstrap 95% intervals.

    ``y_ab`` has shape ``(k, n_base)``.
    """
    ya = np.asarray(y_a, dtype=float)
    yb = np.asarray(y_b, dtype=float)
    yab = np.asarray(y_ab, dtype=float)
    if yab.ndim != 2 or yab.shape[1] != ya.size or ya.shape != yb.shape:
        raise DomainError("expected y_a, y_b of length n and y_ab of shape (k, n)")
    k, n = yab.shape
    first, total, var = _indices_batch(ya, yb, yab)
    result = SobolResult(factors=tuple(factors or (f"x{i + 1}" for i in range(k))),
                         first_order=first, total_order=total, variance=float(var),
                         n_base=n, k=k, seed=seed, sampler=sampler,
                         outputs=np.concatenate([ya, yb, yab.ravel()]))
    if n_bootstrap > 0 and not result.degenerate:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB007]))
        rows = rng.integers(0, n, size=(n_bootstrap, n))
        bf, bt, _ = _indices_batch(ya[rows], yb[rows], np.moveaxis(yab[:, rows], 0, 1))
        result.first_ci = np.nanpercentile(bf, [2.5, 97.5], axis=0).T
        result.total_ci = np.nanpercentile(bt, [2.5, 97.5], axis=0).T
        result.first_se = np.nanstd(bf, axis=0, ddof=1)
        result.total_se = np.nanstd(bt, axis=0, ddof=1)
    return result


def evaluate_design(model: Callable[[np.ndarray], float], design: SobolDesign,
                    lows, highs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run ``model`` on every design row scaled to ``[lows, highs]``."""
    lows = np.asarray(lows, dtype=float)
    highs = np.asarray(highs, dtype=float)
    x = lows + design.stacked() * (highs - lows)
    y = np.array([model(row) for row in x], dtype=float)
    n = design.n_base
    return y[:n], y[n:2 * n], y[2 * n:].reshape(design.k, n)


@dataclass(frozen=True)
class SobolConfig:
    """Simulation settings for the front-position quantity of interest."""

    length: float = 1000.0
    n_cells: int = 10000
    t_q: float = 7.0
    b_seed: float = 1e6
    dt: float = 0.1
    rtol: float = 1e-6
    atol: float = 1e-6
    fixed: Mapping[str, float] = field(default_factory=lambda: dict(TABLE5_FIXED))


class QoIValue(NamedTuple):
    location: float
    degenerate: bool = False
    failed: bool = False
    message: str = ""


def qoi_peak_at_day(params: ModelParams, config: SobolConfig | None = None,
                    t_q: float | None = None) -> QoIValue:
    """Peak location of ``I`` at day ``t_q`` after a point release at ``x = 0``.

    A flat ``I`` field maps to the centre of cell 0 and is flagged
    ``degenerate`` (with a :class:`DegeneratePeakWarning`); a failed
    integration returns ``nan`` flagged ``failed``.
    """
    config = config or SobolConfig()
    t_q = config.t_q if t_q is None else float(t_q)
    grid = Grid(config.length, config.n_cells)
    try:
        traj = integrate(standard_initial_condition(grid, params, config.b_seed), params, grid,
                         t_q, dt=config.dt, record_times=[t_q], rtol=config.rtol, atol=config.atol)
    except BlightError as exc:
        return QoIValue(math.nan, failed=True, message=str(exc))
    peak = peak_location(traj.snapshots[-1].i, grid)
    if peak.degenerate:
        warnings.warn(f"flat infected field at t={t_q} for {params}; using cell 0",
                      DegeneratePeakWarning, stacklevel=2)
    return QoIValue(peak.location, degenerate=peak.degenerate)


def _evaluate_row(index: int, rows: np.ndarray, names: tuple[str, ...],
                  config: SobolConfig) -> QoIValue:
    values = dict(config.fixed)
    values.update(zip(names, (float(v) for v in rows[index])))
    try:
        params = ModelParams(**values)
    except BlightError as exc:
        return QoIValue(math.nan, failed=True, message=str(exc))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneratePeakWarning)
        return qoi_peak_at_day(params, config)


def run_sensitivity(factors: Mapping[str, tuple[float, float]] | None = None, n_base: int = 300,
                    seed: int = 0, config: SobolConfig | None = None, *,
                    sampler: str = "low_discrepancy", n_bootstrap: int = 1000,
                    workers: int = 1,
                    progress: Callable[[QoIValue], None] | None = None) -> SobolResult:
    """Sobol indices of the day-``t_q`` front position over the factor box.

    Raises
    ------
    SensitivityAborted
        If any model evaluation fails.
    """
    factors = dict(SOBOL_RANGES if factors is None else factors)
    config = config or SobolConfig()
    names = tuple(factors)
    lows = np.array([factors[n][0] for n in names], dtype=float)
    highs = np.array([factors[n][1] for n in names], dtype=float)
    if np.any(highs < lows):
        raise DomainError("every factor range needs low <= high")
    overlap = set(names) & set(config.fixed)
    if overlap:
        raise DomainError(f"factors {sorted(overlap)} are also fixed")
    missing = set(ModelParams.names()) - set(names) - set(config.fixed)
    if missing:
        raise DomainError(f"parameters {sorted(missing)} are neither sampled nor fixed")
    design = sobol_design(n_base, len(names), sampler, seed)
    rows = lows + design.stacked() * (highs - lows)
    task = partial(_evaluate_row, rows=rows, names=names, config=config)
    values = map_samples(task, range(rows.shape[0]), workers, progress)
    for row, v in enumerate(values):
        if v.failed:
            raise SensitivityAborted(
                f"model evaluation failed at design row {row} "
                f"({', '.join(f'{n}={x:.6g}' for n, x in zip(names, rows[row]))}): {v.message}", row=row)
    degenerate = sum(v.degenerate for v in values)
    if degenerate:
        logger.warning("%d of %d runs had a flat infected field (front set to cell 0)",
                       degenerate, len(values))
    y = np.array([v.location for v in values])
    n = n_base
    result = sobol_indices(y[:n], y[n:2 * n], y[2 * n:].reshape(len(names), n), factors=names,
                           seed=seed, n_bootstrap=n_bootstrap, sampler=sampler)
    result.degenerate_runs = degenerate
    result.extra["design_rows"] = rows
    return result
