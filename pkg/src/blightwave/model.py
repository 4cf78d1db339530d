"""Pointwise kinetics of the blossom-blight model.

Five compartments live at every point of the orchard:

* ``B`` -- epiphytic pathogen on flower surfaces (CFU), spread by bees,
* ``O`` -- pathogen carried in ooze (CFU), spread by ooze-feeding insects,
* ``S``, ``I``, ``R`` -- susceptible, infected and removed flowers of a
  cluster holding ``N`` flowers, so ``S + I + R = N``.

Invasion ``f(B)`` and cluster death ``g(I)`` are saturating Hill rates.
Everything here is independent of the spatial discretisation; the grid
solver calls the vectorised helpers (:func:`hill_rate`,
:func:`reaction_terms`) directly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import DomainError

#: Relative tolerance on ``S + I + R = N``.
CONSERVATION_RTOL = 1e-6
#: Tolerance used when comparing real-valued Hill exponents for equality.
EXPONENT_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Model parameters (units: m, day, CFU, Flower).

    Attributes
    ----------
    N : flowers per cluster
    D1 : bee-transport diffusivity, m^2/day
    D2 : ooze-vector diffusivity, m^2/day (may be zero)
    K : per-flower carrying capacity, CFU/Flower
    eps : carrying capacity of a dead cluster, CFU
    r : epiphytic growth rate, 1/day
    mu : ooze-vector visitation rate, 1/(day Flower)
    gamma : ooze decay rate, 1/day
    alpha : ooze secretion rate, CFU/(day Flower)
    M1, M2 : maximum infection and death rates, 1/day
    A1 : invasion threshold, CFU
    A2 : death threshold, Flower
    n1, n2 : Hill exponents (real valued, >= 1)
    """

    N: float
    D1: float
    D2: float
    K: float
    eps: float
    r: float
    mu: float
    gamma: float
    alpha: float
    M1: float
    M2: float
    A1: float
    A2: float
    n1: float
    n2: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float, np.floating, np.integer)):
                raise DomainError(f"parameter {f.name} must be a number, got {value!r}")
            value = float(value)
            object.__setattr__(self, f.name, value)
            if not math.isfinite(value):
                raise DomainError(f"parameter {f.name} must be finite, got {value}")
        if self.D2 < 0:
            raise DomainError(f"D2 must be >= 0, got {self.D2}")
        for name in ("N", "D1", "K", "eps", "r", "mu", "gamma", "alpha",
                     "M1", "M2", "A1", "A2"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("n1", "n2"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1, got {getattr(self, name)}")

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


#: Fixed values used by the sensitivity experiment (Table 5).
TABLE5_FIXED = dict(D1=50.0, K=1e6, eps=10.0, gamma=0.0027, M1=1.0, M2=1.0,
                    alpha=1e8, A1=1e6, A2=1.0, n1=2.0, n2=2.0)

#: Baseline for the sampled factors used by the single-run figures.
BASELINE_FACTORS = dict(r=0.5, mu=0.5, D2=10.0)


def table5_params(**overrides) -> ModelParams:
    """Table 5 values with ``r = mu = 0.5``, ``D2 = 10`` and ``N = 3``."""
    values = dict(TABLE5_FIXED, **BASELINE_FACTORS, N=3.0)
    values.update(overrides)
    return ModelParams(**values)


def figure1_params(**overrides) -> ModelParams:
    """The illustrative configuration: Table 5 values with five flowers."""
    return table5_params(**dict({"N": 5.0}, **overrides))


class PointState(NamedTuple):
    """State (or per-compartment rates) at a single point."""

    B: float
    O: float
    S: float
    I: float
    R: float


class BoundConstants(NamedTuple):
    b_max: float
    o_max: float
    compartment_max: float


@dataclass(frozen=True)
class ConstraintReport:
    """Which travelling-wave existence hypotheses a parameter set meets."""

    d2_le_d1: bool
    exponent_link: bool
    m1_le_gN: bool
    ooze_inequality: bool
    c_min: float

    @property
    def all_satisfied(self) -> bool:
        return self.d2_le_d1 and self.exponent_link and self.m1_le_gN and self.ooze_inequality

    def as_dict(self) -> dict:
        out = asdict(self)
        out["all_satisfied"] = self.all_satisfied
        return out


def hill(x: float, M: float, A: float, n: float) -> float:
    """Saturating Hill rate ``M (x/A)^n / (1 + (x/A)^n)``.

    Zero at ``x = 0``, ``M/2`` at ``x = A``, and strictly below ``M``.
    """
    if not x >= 0:
        raise DomainError(f"hill: x must be >= 0, got {x}")
    if not M > 0 or not A > 0:
        raise DomainError(f"hill: M and A must be > 0, got M={M}, A={A}")
    if not n >= 1:
        raise DomainError(f"hill: exponent must be >= 1, got {n}")
    if x == 0:
        return 0.0
    # written as M / (1 + (A/x)^n): every step rounds monotonically and the
    # result never exceeds M, unlike M u / (1 + u)
    try:
        return M / (1.0 + (A / x) ** n)
    except OverflowError:  # x is negligible against A
        return 0.0


def hill_rate(x, M, A, n):
    """Vectorised :func:`hill`; negative round-off in ``x`` is read as zero."""
    with np.errstate(divide="ignore", over="ignore"):
        return M / (1.0 + (A / np.maximum(x, 0.0)) ** n)


def hill_slope(x, M, A, n):
    """Derivative of :func:`hill_rate` with respect to ``x``."""
    z = np.maximum(x, 0.0) / A
    u = z ** n
    return (M * n / A) * z ** (n - 1.0) / (1.0 + u) ** 2


def reaction_terms(b, o, s, i, r, params: ModelParams):
    """Reaction part of the model, vectorised over points.

    Returns the tuple ``(dB, dO, dS, dI, dR)``. ``R`` does not feed back into
    any rate but is returned so callers can integrate it explicitly.
    """
    p = params
    capacity = p.K * (s + i) + p.eps
    f = hill_rate(b, p.M1, p.A1, p.n1)
    g = hill_rate(i, p.M2, p.A2, p.n2)
    transfer = p.mu * s * o
    invasion = f * s
    death = g * i
    db = p.r * b * (1.0 - b / capacity) + transfer
    do = p.alpha * i - transfer - p.gamma * o
    return db, do, -invasion, invasion - death, death


def _check_point(state: PointState, params: ModelParams) -> None:
    for name, value in zip(PointState._fields, state):
        if not value >= 0:
            raise DomainError(f"compartment {name} must be >= 0, got {value}")
    total = state.S + state.I + state.R
    if abs(total - params.N) > CONSERVATION_RTOL * params.N:
        raise DomainError(f"S + I + R = {total} but N = {params.N}")


def reaction_rhs(state: PointState, params: ModelParams) -> PointState:
    """Per-compartment reaction rates at one point (no transport)."""
    state = PointState(*(float(v) for v in state))
    _check_point(state, params)
    db, do, ds, di, dr = reaction_terms(*state, params)
    return PointState(float(db), float(do), float(ds), float(di), float(dr))


def a_priori_bounds(params: ModelParams, b0_max: float, o0_max: float) -> BoundConstants:
    """Upper bounds on ``B`` and ``O`` implied by the initial maxima.

    ``O`` is bounded by ``max(o0_max, alpha N / gamma)`` and ``B`` by the larger
    root of the super-solution equilibrium using that ooze bound.
    """
    if not b0_max >= 0 or not o0_max >= 0:
        raise DomainError(f"initial maxima must be >= 0, got b0={b0_max}, o0={o0_max}")
    p = params
    o_max = max(o0_max, p.alpha * p.N / p.gamma)
    cap = p.K * p.N + p.eps
    b_eq = 0.5 * cap * (1.0 + math.sqrt(1.0 + 4.0 * p.mu * o_max / (p.r * cap)))
    return BoundConstants(b_max=max(b0_max, b_eq), o_max=o_max, compartment_max=p.N)


def wave_speed_floor(D1: float, r: float, mu: float, N: float) -> float:
    """``2 sqrt(D1 (r + mu N))`` for raw numbers (zero diffusivity gives 0)."""
    if min(D1, r, mu, N) < 0:
        raise DomainError("wave speed inputs must be non-negative")
    return 2.0 * math.sqrt(D1 * (r + mu * N))


def min_wave_speed(params: ModelParams) -> float:
    """Minimum travelling-wave speed in m/day."""
    return wave_speed_floor(params.D1, params.r, params.mu, params.N)


def _exponents_linked(n1: float, n2: float) -> bool:
    if float(n1).is_integer() and float(n2).is_integer():
        return n1 == n2 + 1
    return abs(n1 - (n2 + 1)) <= EXPONENT_TOL


def check_theorem_constraints(params: ModelParams) -> ConstraintReport:
    """Evaluate the parameter constraints under which travelling waves are proven."""
    p = params
    g_of_n = hill(p.N, p.M2, p.A2, p.n2)
    lhs = p.alpha ** p.n1 * p.M1 * p.N * (p.A2 ** p.n2 + p.N ** p.n2)
    rhs = p.A1 ** p.n1 * p.M2 * p.gamma ** p.n1
    return ConstraintReport(
        d2_le_d1=p.D2 <= p.D1,
        exponent_link=_exponents_linked(p.n1, p.n2),
        m1_le_gN=p.M1 <= g_of_n,
        ooze_inequality=lhs <= rhs,
        c_min=min_wave_speed(p),
    )
