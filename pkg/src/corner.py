"""Implementability when a price reaches the threshold A and rank-two demand vanishes."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.deviation import max_rank_two_profit
from src.errors import WrongRegime
from src.feasible import (
    AlphaInterval,
    alpha_interval,
    interval_from_constraints,
    linear_ic_bounds,
    uniform_h,
)
from src.model import PricePair, SearchEnv, clamped_first_demand, clamped_second_demand
from src.settings import CORNER_SWEEP_GRID, MEMBERSHIP_TOL

logger = logging.getLogger(__name__)


class CornerRegime(str, Enum):
    BOTH_BELOW = "BOTH_BELOW"
    P1_ABOVE = "P1_ABOVE"
    P2_ABOVE = "P2_ABOVE"
    BOTH_ABOVE = "BOTH_ABOVE"

    @classmethod
    def of(cls, env: SearchEnv, prices: PricePair) -> CornerRegime:
        """Classify a price pair; p = A counts as above."""
        above1, above2 = prices.p1 >= env.A, prices.p2 >= env.A
        if above1 and above2:
            return cls.BOTH_ABOVE
        if above1:
            return cls.P1_ABOVE
        if above2:
            return cls.P2_ABOVE
        return cls.BOTH_BELOW


@dataclass(frozen=True)
class CornerPoint:
    """One cell of a corner sweep."""

    p1: float
    p2: float
    in_plain: bool
    in_hat: bool
    regime: CornerRegime


def monopoly_first_profit(p: float, env: SearchEnv | None = None) -> float:
    """Profit p (1 - F(p)) of a first-ranked seller whose rival never gets a sale."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Price {p} is outside [0, 1]")
    cdf = env.dist.cdf if env is not None else (lambda u: u)
    return p * (1.0 - cdf(p))


def corner_alpha_interval(env: SearchEnv, prices: PricePair) -> AlphaInterval:
    """
    Search-order interval under the modified incentive constraints.

    A seller priced at or above A sells nothing when ranked second, and a
    first-ranked rival facing it keeps every consumer with u above its price.
    Each constraint stays linear in alpha:

    - P1_ABOVE: alpha pi_1^1 >= max pi_1^2 and alpha pi_2^2 + (1 - alpha) hat-pi_2^1 >= max pi_2^2
    - P2_ABOVE: alpha hat-pi_1^1 + (1 - alpha) pi_1^2 >= max pi_1^2
      and (1 - alpha) pi_2^1 >= max pi_2^2
    - BOTH_ABOVE: alpha hat-pi_1^1 >= max pi_1^2 and (1 - alpha) hat-pi_2^1 >= max pi_2^2

    Raises:
        WrongRegime: If both prices are below A.
    """
    env.require_uniform("corner_alpha_interval")
    regime = CornerRegime.of(env, prices)
    if regime is CornerRegime.BOTH_BELOW:
        raise WrongRegime(
            f"Prices {prices.as_tuple()} are both below A={env.A}; use alpha_interval"
        )

    a = env.A
    p1, p2 = prices.p1, prices.p2
    m1 = float(max_rank_two_profit(a, p2))
    m2 = float(max_rank_two_profit(a, p1))
    hat1 = monopoly_first_profit(p1, env)
    hat2 = monopoly_first_profit(p2, env)

    if regime is CornerRegime.P1_ABOVE:
        first1 = p1 * float(clamped_first_demand(a, p1, p2))
        second2 = p2 * float(clamped_second_demand(a, p1, p2))
        ic1 = linear_ic_bounds(0.0, first1, m1)
        ic2 = linear_ic_bounds(hat2, second2 - hat2, m2)
    elif regime is CornerRegime.P2_ABOVE:
        second1 = p1 * float(clamped_second_demand(a, p2, p1))
        first2 = p2 * float(clamped_first_demand(a, p2, p1))
        ic1 = linear_ic_bounds(second1, hat1 - second1, m1)
        ic2 = linear_ic_bounds(first2, -first2, m2)
    else:
        ic1 = linear_ic_bounds(0.0, hat1, m1)
        ic2 = linear_ic_bounds(hat2, -hat2, m2)
    return interval_from_constraints(ic1, ic2)


def hat_contains(env: SearchEnv, prices: PricePair) -> bool:
    """Membership under the regime-appropriate constraints."""
    if CornerRegime.of(env, prices) is CornerRegime.BOTH_BELOW:
        return not alpha_interval(env, prices).empty
    return not corner_alpha_interval(env, prices).empty


def plain_contains(env: SearchEnv, prices: PricePair) -> bool:
    """Plain membership H <= 0 with the polynomial forms extended past p = A."""
    return float(uniform_h(env.A, prices.p1, prices.p2)) <= MEMBERSHIP_TOL


def corner_sweep(env: SearchEnv, grid: int = CORNER_SWEEP_GRID) -> list[CornerPoint]:
    """
    Compare hat membership with plain membership on a grid x grid sweep of (0, 1)^2.

    Cells where both prices are below A are skipped when they leave the
    nondegenerate region, since neither membership is defined there.
    """
    env.require_uniform("corner_sweep")
    axis = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    points: list[CornerPoint] = []
    for p1 in axis:
        for p2 in axis:
            prices = PricePair(float(p1), float(p2))
            regime = CornerRegime.of(env, prices)
            if regime is CornerRegime.BOTH_BELOW and abs(prices.delta) > 1.0 - env.A:
                continue
            points.append(
                CornerPoint(
                    p1=prices.p1,
                    p2=prices.p2,
                    in_plain=plain_contains(env, prices),
                    in_hat=hat_contains(env, prices),
                    regime=regime,
                )
            )
    violations = sum(point.in_hat and not point.in_plain for point in points)
    logger.info(f"Corner sweep at A={env.A}: {len(points)} points, {violations} hat-only points")
    return points
