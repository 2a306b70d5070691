"""Two-seller sequential search: stopping rule, rank-conditional demands and social values."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy.integrate import quad
from scipy.optimize import brentq

from src.errors import CostOutOfRange, DomainError, UnsupportedDistribution
from src.settings import (
    CUTOFF_TIE_TOL,
    MAX_SEARCH_COST,
    QUADRATURE_ABS_TOL,
    ROOT_XTOL,
)

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ArrayLike = float | FloatArray

# Slack for the closed valid region, so prices built by arithmetic on A stay admissible.
_REGION_SLACK = 1e-12


UNIFORM_NAME = "uniform01"


@dataclass(frozen=True)
class Distribution:
    """Match-value distribution on [0, 1], described by its cdf and pdf."""

    name: str
    cdf: Callable[[float], float]
    pdf: Callable[[float], float]

    @property
    def is_uniform(self) -> bool:
        return self.name == UNIFORM_NAME


def _uniform_cdf(u: float) -> float:
    return min(max(u, 0.0), 1.0)


def _uniform_pdf(u: float) -> float:
    return 1.0 if 0.0 <= u <= 1.0 else 0.0


UNIFORM = Distribution(UNIFORM_NAME, _uniform_cdf, _uniform_pdf)


def general_distribution(
    cdf: Callable[[float], float],
    pdf: Callable[[float], float],
    name: str = "general",
) -> Distribution:
    """
    Wrap a cdf/pdf pair supported on [0, 1] for the quadrature demand layer.

    Raises:
        ValueError: If the name collides with the canonical uniform descriptor.
    """
    if name == UNIFORM_NAME:
        raise ValueError(f"'{UNIFORM_NAME}' is reserved for the closed-form uniform distribution")
    return Distribution(name, cdf, pdf)


def reservation_surplus(p: float, dist: Distribution = UNIFORM) -> float:
    """
    Expected incremental surplus of one more search, V(p) = E[max(0, u - p)].

    Args:
        p: Price in [0, 1].
        dist: Match-value distribution.

    Returns:
        V(p), strictly decreasing in p.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Price {p} is outside [0, 1]")
    if dist.is_uniform:
        return (1.0 - p) ** 2 / 2.0
    value, _ = quad(lambda u: (u - p) * dist.pdf(u), p, 1.0, epsabs=QUADRATURE_ABS_TOL)
    return float(value)


def threshold_from_cost(s: float, dist: Distribution = UNIFORM) -> float:
    """
    Reservation threshold A solving V(A) = s.

    Args:
        s: Search cost in utility units.
        dist: Match-value distribution.

    Returns:
        Threshold A in [0, 1].

    Raises:
        CostOutOfRange: If s is negative or exceeds V(0).
    """
    max_cost = MAX_SEARCH_COST if dist.is_uniform else reservation_surplus(0.0, dist)
    if not math.isfinite(s) or s < 0.0 or s > max_cost:
        raise CostOutOfRange(f"Search cost {s} is outside [0, {max_cost}]")
    if dist.is_uniform:
        return 1.0 - math.sqrt(2.0 * s)
    if s == 0.0:
        return 1.0
    if s == max_cost:
        return 0.0
    return float(
        brentq(lambda a: reservation_surplus(a, dist) - s, 0.0, 1.0, xtol=ROOT_XTOL)
    )


def cost_from_threshold(threshold: float, dist: Distribution = UNIFORM) -> float:
    """Search cost s = V(A) that makes a consumer stop at threshold A."""
    if not 0.0 <= threshold <= 1.0:
        raise CostOutOfRange(f"Threshold {threshold} is outside [0, 1]")
    return reservation_surplus(threshold, dist)


@dataclass(frozen=True)
class SearchEnv:
    """Market primitives: search cost s, threshold A = V^-1(s) and match distribution."""

    s: float
    A: float
    dist: Distribution = UNIFORM

    @classmethod
    def from_cost(cls, s: float, dist: Distribution = UNIFORM) -> SearchEnv:
        return cls(s=s, A=threshold_from_cost(s, dist), dist=dist)

    @classmethod
    def from_threshold(cls, threshold: float, dist: Distribution = UNIFORM) -> SearchEnv:
        return cls(s=cost_from_threshold(threshold, dist), A=threshold, dist=dist)

    @property
    def is_uniform(self) -> bool:
        return self.dist.is_uniform

    def require_uniform(self, operation: str) -> None:
        """Raise UnsupportedDistribution for closed-form-only operations."""
        if not self.is_uniform:
            raise UnsupportedDistribution(
                f"{operation} has closed forms for the uniform distribution only, "
                f"got '{self.dist.name}'"
            )


@dataclass(frozen=True)
class PricePair:
    """Posted prices of seller 1 and seller 2."""

    p1: float
    p2: float

    def __post_init__(self) -> None:
        for label, price in (("p1", self.p1), ("p2", self.p2)):
            if not math.isfinite(price) or not 0.0 <= price <= 1.0:
                raise DomainError(f"{label}={price} is outside [0, 1]")

    @property
    def delta(self) -> float:
        return self.p1 - self.p2

    def swapped(self) -> PricePair:
        return PricePair(self.p2, self.p1)

    def as_tuple(self) -> tuple[float, float]:
        return (self.p1, self.p2)


@dataclass(frozen=True)
class DemandProfile:
    """Rank-conditional demands: d{i}{n} is seller i's demand when ranked n-th."""

    d11: float
    d12: float
    d21: float
    d22: float
    bonus: float


@dataclass(frozen=True)
class SocialValues:
    """Expected match values by search order and the welfare of each order."""

    v11: float
    v22: float
    sw1: float
    sw2: float


class Decision(str, Enum):
    BUY_NOW = "BUY_NOW"
    CONTINUE = "CONTINUE"
    NEVER_BUY_FIRST = "NEVER_BUY_FIRST"


class _OrderedOutcome(NamedTuple):
    """Demands and values with one seller inspected first."""

    first_demand: float
    second_demand: float
    first_value: float
    second_value: float
    welfare: float


def in_valid_region(threshold: float, p1: ArrayLike, p2: ArrayLike) -> bool | npt.NDArray[np.bool_]:
    """Closed nondegenerate region max(p) <= A and |p1 - p2| <= 1 - A."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    inside = (
        (np.maximum(p1, p2) <= threshold + _REGION_SLACK)
        & (np.abs(p1 - p2) <= 1.0 - threshold + _REGION_SLACK)
        & (np.minimum(p1, p2) >= 0.0)
    )
    return bool(inside) if inside.ndim == 0 else inside


def check_valid_region(env: SearchEnv, prices: PricePair) -> None:
    """Raise DomainError outside the nondegenerate region."""
    if not in_valid_region(env.A, prices.p1, prices.p2):
        raise DomainError(
            f"Prices ({prices.p1}, {prices.p2}) leave the region max(p) <= A={env.A}, "
            f"|p1 - p2| <= 1 - A; use the corner-region rules"
        )


def uniform_first_demand(threshold: float, p_first: ArrayLike, p_second: ArrayLike) -> ArrayLike:
    """Demand of the first-inspected seller under uniform match values."""
    a = threshold
    return a**2 / 2 - p_second**2 / 2 - a - p_first + p_second + 1


def uniform_second_demand(threshold: float, p_first: ArrayLike, p_second: ArrayLike) -> ArrayLike:
    """Demand of the second-inspected seller under uniform match values."""
    a = threshold
    return -(a**2) / 2 + p_second**2 / 2 - p_first * p_second + a + p_first - p_second


def _search_cutoff(threshold: float, p_first: FloatArray, p_second: FloatArray) -> FloatArray:
    """First match value above which a consumer stops, clamped to [p_first, 1]."""
    return np.clip(threshold + p_first - p_second, p_first, 1.0)


def clamped_first_demand(threshold: float, p_first: ArrayLike, p_second: ArrayLike) -> ArrayLike:
    """
    First-inspected demand for any prices in [0, 1].

    Agrees with uniform_first_demand while A + p_first - p_second <= 1. Past that
    nobody stops at the first seller before seeing the second, and a second price
    above A means nobody searches on.
    """
    p_first = np.asarray(p_first, dtype=float)
    p_second = np.asarray(p_second, dtype=float)
    delta = p_first - p_second
    cutoff = _search_cutoff(threshold, p_first, p_second)
    demand = 1.0 - cutoff + (cutoff**2 - p_first**2) / 2 - delta * (cutoff - p_first)
    return float(demand) if demand.ndim == 0 else demand


def clamped_second_demand(threshold: float, p_first: ArrayLike, p_second: ArrayLike) -> ArrayLike:
    """Second-inspected demand for any prices in [0, 1]; zero once p_second exceeds A."""
    p_first = np.asarray(p_first, dtype=float)
    p_second = np.asarray(p_second, dtype=float)
    cutoff = _search_cutoff(threshold, p_first, p_second)
    demand = (
        p_first * (1.0 - p_second)
        + (1.0 - p_second + p_first) * (cutoff - p_first)
        - (cutoff**2 - p_first**2) / 2
    )
    demand = np.where(p_second <= threshold, demand, 0.0)
    return float(demand) if demand.ndim == 0 else demand


def uniform_demands(
    threshold: float, p1: ArrayLike, p2: ArrayLike
) -> tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """
    Vectorised polynomial demands, evaluated without a region guard.

    Returns:
        (d11, d12, d21, d22, bonus), each broadcast over p1 and p2.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    d11 = uniform_first_demand(threshold, p1, p2)
    d22 = uniform_second_demand(threshold, p1, p2)
    d21 = uniform_first_demand(threshold, p2, p1)
    d12 = uniform_second_demand(threshold, p2, p1)
    bonus = (1.0 - threshold) ** 2 - (p1 - p2) ** 2 / 2
    return d11, d12, d21, d22, bonus


def _uniform_ordered_values(
    threshold: float, s: float, p_first: FloatArray, p_second: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    a = threshold
    delta = p_first - p_second
    cutoff = a + delta
    first_value = (
        (1.0 - cutoff**2) / 2
        + (cutoff**3 - p_first**3) / 3
        - delta * (cutoff**2 - p_first**2) / 2
    )
    second_value = (
        cutoff * (1.0 - a**2) / 2 + (a**3 - p_second**3) / 3 + delta * (a**2 - p_second**2) / 2
    )
    welfare = first_value + second_value - cutoff * s
    return first_value, second_value, welfare


def uniform_social_values(
    threshold: float, s: float, p1: ArrayLike, p2: ArrayLike
) -> tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """
    Vectorised match values and welfare under uniform match values.

    Returns:
        (v11, v22, sw1, sw2) where sw{i} is welfare with seller i inspected first.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    v11, v22, sw1 = _uniform_ordered_values(threshold, s, p1, p2)
    _, _, sw2 = _uniform_ordered_values(threshold, s, p2, p1)
    return v11, v22, sw1, sw2


def _integrate(func: Callable[[float], float], lower: float, upper: float) -> float:
    if upper <= lower:
        return 0.0
    value, _ = quad(func, lower, upper, epsabs=QUADRATURE_ABS_TOL)
    return float(value)


def _quadrature_outcome(env: SearchEnv, p_first: float, p_second: float) -> _OrderedOutcome:
    cdf, pdf = env.dist.cdf, env.dist.pdf
    a = env.A
    delta = p_first - p_second
    cutoff = a + delta
    reach = cdf(cutoff)

    first_demand = 1.0 - reach + _integrate(lambda u: cdf(u - delta) * pdf(u), p_first, cutoff)
    second_demand = (1.0 - cdf(a)) * reach + _integrate(
        lambda u: cdf(u + delta) * pdf(u), p_second, a
    )
    first_value = _integrate(lambda u: u * pdf(u), cutoff, 1.0) + _integrate(
        lambda u: u * cdf(u - delta) * pdf(u), p_first, cutoff
    )
    second_value = reach * _integrate(lambda u: u * pdf(u), a, 1.0) + _integrate(
        lambda u: u * cdf(u + delta) * pdf(u), p_second, a
    )
    welfare = first_value + second_value - reach * env.s
    return _OrderedOutcome(first_demand, second_demand, first_value, second_value, welfare)


def _closed_form_outcome(env: SearchEnv, p_first: float, p_second: float) -> _OrderedOutcome:
    first_demand = float(uniform_first_demand(env.A, p_first, p_second))
    second_demand = float(uniform_second_demand(env.A, p_first, p_second))
    first_value, second_value, welfare = _uniform_ordered_values(
        env.A, env.s, np.float64(p_first), np.float64(p_second)
    )
    return _OrderedOutcome(
        first_demand, second_demand, float(first_value), float(second_value), float(welfare)
    )


def _resolve_method(env: SearchEnv, method: str | None) -> str:
    if method is None:
        return "closed_form" if env.is_uniform else "quadrature"
    if method not in ("closed_form", "quadrature"):
        raise ValueError(f"Unknown method '{method}', expected 'closed_form' or 'quadrature'")
    if method == "closed_form":
        env.require_uniform("closed-form demands")
    return method


def _ordered_outcomes(
    env: SearchEnv, prices: PricePair, method: str | None
) -> tuple[_OrderedOutcome, _OrderedOutcome]:
    check_valid_region(env, prices)
    closed_form = _resolve_method(env, method) == "closed_form"
    evaluate = _closed_form_outcome if closed_form else _quadrature_outcome
    return evaluate(env, prices.p1, prices.p2), evaluate(env, prices.p2, prices.p1)


def demand_profile(
    env: SearchEnv, prices: PricePair, method: str | None = None
) -> DemandProfile:
    """
    Rank-conditional demands and the prominence bonus at a price pair.

    Args:
        env: Market primitives.
        prices: Posted prices, inside the nondegenerate region.
        method: "closed_form" (uniform only) or "quadrature"; defaults by distribution.

    Returns:
        DemandProfile with d11 - d12 = d21 - d22 = bonus.

    Raises:
        DomainError: If prices leave the nondegenerate region.
    """
    one_first, two_first = _ordered_outcomes(env, prices, method)
    d11, d22 = one_first.first_demand, one_first.second_demand
    d21, d12 = two_first.first_demand, two_first.second_demand
    if env.is_uniform and method != "quadrature":
        bonus = (1.0 - env.A) ** 2 - prices.delta**2 / 2
    else:
        bonus = d11 - d12
    return DemandProfile(d11=d11, d12=d12, d21=d21, d22=d22, bonus=bonus)


def social_values(env: SearchEnv, prices: PricePair, method: str | None = None) -> SocialValues:
    """Expected match values and welfare under each search order."""
    one_first, two_first = _ordered_outcomes(env, prices, method)
    return SocialValues(
        v11=one_first.first_value,
        v22=one_first.second_value,
        sw1=one_first.welfare,
        sw2=two_first.welfare,
    )


def stopping_decision(
    env: SearchEnv, prices: PricePair, first: int, u_first: float
) -> Decision:
    """
    Consumer's choice after inspecting the first-ranked seller.

    Ties at the purchase cutoff u - p_first = A - p_second resolve to CONTINUE.

    Args:
        env: Market primitives.
        prices: Posted prices.
        first: Seller inspected first (1 or 2).
        u_first: Match value drawn at the first seller, in [0, 1].
    """
    if first not in (1, 2):
        raise ValueError(f"first must be 1 or 2, got {first}")
    if not 0.0 <= u_first <= 1.0:
        raise DomainError(f"Match value {u_first} is outside [0, 1]")
    p_first, p_second = (prices.p1, prices.p2) if first == 1 else (prices.p2, prices.p1)
    if u_first <= p_first:
        return Decision.NEVER_BUY_FIRST
    if (u_first - p_first) - (env.A - p_second) > CUTOFF_TIE_TOL:
        return Decision.BUY_NOW
    return Decision.CONTINUE
