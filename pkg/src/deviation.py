"""Best rank-two deviation of a demoted seller, in closed form and by exhaustive search."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from src.errors import DomainError, NoInteriorMaximum
from src.model import (
    ArrayLike,
    PricePair,
    SearchEnv,
    demand_profile,
    uniform_second_demand,
)
from src.settings import DEFAULT_ORACLE_GRID, MIN_ORACLE_GRID

logger = logging.getLogger(__name__)

_SOC_STEP = 1e-5


@dataclass(frozen=True)
class Deviation:
    """Optimal deviation price of a seller ranked second and the profit it earns."""

    price: float
    profit: float


def _as_output(values: np.ndarray) -> ArrayLike:
    return float(values) if values.ndim == 0 else values


def rank_two_profit(threshold: float, own: ArrayLike, rival: ArrayLike) -> ArrayLike:
    """Profit own * D^2(own, rival) of a seller inspected second, without region guard."""
    own = np.asarray(own, dtype=float)
    rival = np.asarray(rival, dtype=float)
    return _as_output(own * uniform_second_demand(threshold, rival, own))


def deviation_price(threshold: float, rival: ArrayLike) -> ArrayLike:
    """
    Lower root of the rank-two first-order condition.

    The profit x * D^2 is a cubic in the own price x; its derivative
    1.5 x^2 - (2 + 2r) x + (r + A - A^2 / 2) has two roots and only the lower
    one is a maximum.

    Args:
        threshold: Reservation threshold A.
        rival: Price of the first-ranked rival, scalar or array.

    Returns:
        Deviation price, same shape as rival.

    Raises:
        NoInteriorMaximum: If the first-order condition has no real root.
    """
    r = np.asarray(rival, dtype=float)
    a = threshold
    discriminant = (2.0 + 2.0 * r) ** 2 - 6.0 * (r + a - a**2 / 2.0)
    if np.any(discriminant < 0.0):
        raise NoInteriorMaximum(
            f"Deviation first-order condition has no real root for A={a}, rival={rival}"
        )
    return _as_output(((2.0 + 2.0 * r) - np.sqrt(discriminant)) / 3.0)


def max_rank_two_profit(threshold: float, rival: ArrayLike) -> ArrayLike:
    """max over own price of the rank-two profit, vectorised over the rival price."""
    x = deviation_price(threshold, rival)
    return rank_two_profit(threshold, x, rival)


def best_deviation(env: SearchEnv, rival_price: float) -> Deviation:
    """
    Closed-form optimal deviation against a first-ranked rival.

    Args:
        env: Market primitives, uniform match values.
        rival_price: Price of the rival who keeps rank one.

    Returns:
        Deviation with the lower-root price and its rank-two profit.

    Raises:
        NoInteriorMaximum: If the root is missing or is not a local maximum.
    """
    env.require_uniform("best_deviation")
    if not 0.0 <= rival_price <= 1.0:
        raise DomainError(f"Rival price {rival_price} is outside [0, 1]")

    price = float(deviation_price(env.A, rival_price))
    profit = float(rank_two_profit(env.A, price, rival_price))

    # Second-order condition by central differences.
    curvature = (
        float(rank_two_profit(env.A, price + _SOC_STEP, rival_price))
        - 2.0 * profit
        + float(rank_two_profit(env.A, price - _SOC_STEP, rival_price))
    ) / _SOC_STEP**2
    if curvature >= 0.0:
        raise NoInteriorMaximum(
            f"Deviation root {price} is not a maximum (curvature {curvature:.3e})"
        )
    return Deviation(price=price, profit=profit)


def _quadrature_rank_two_profits(env: SearchEnv, rival: float, grid: np.ndarray) -> np.ndarray:
    profits = np.empty_like(grid)
    for k, own in enumerate(grid):
        # Seller 2 plays the deviator, seller 1 the rival kept in rank one.
        profile = demand_profile(env, PricePair(rival, float(own)), method="quadrature")
        profits[k] = own * profile.d22
    return profits


def brute_force_best_deviation(
    env: SearchEnv, rival_price: float, grid_n: int = DEFAULT_ORACLE_GRID
) -> Deviation:
    """
    Exhaustive argmax of the rank-two profit over a uniform grid on [0, A].

    The smallest price wins ties. Under a general distribution each grid point
    is evaluated by quadrature, so only the prices inside the nondegenerate
    region are scanned.

    Raises:
        ValueError: If grid_n is below MIN_ORACLE_GRID.
    """
    if grid_n < MIN_ORACLE_GRID:
        raise ValueError(f"grid_n must be at least {MIN_ORACLE_GRID}, got {grid_n}")

    logger.info(f"Scanning {grid_n} deviation prices against rival price {rival_price}")
    grid = np.linspace(0.0, env.A, grid_n)
    if env.is_uniform:
        profits = np.asarray(rank_two_profit(env.A, grid, rival_price))
    else:
        grid = grid[np.abs(grid - rival_price) <= 1.0 - env.A]
        profits = _quadrature_rank_two_profits(env, rival_price, grid)

    best = int(np.argmax(profits))
    return Deviation(price=float(grid[best]), profit=float(profits[best]))


def deviation_price_derivative(env: SearchEnv, rival_price: float) -> float:
    """Slope of the deviation price in the rival price, (1 - 2x) / (2 + 2r - 3x)."""
    env.require_uniform("deviation_price_derivative")
    x = float(deviation_price(env.A, rival_price))
    return (1.0 - 2.0 * x) / (2.0 + 2.0 * rival_price - 3.0 * x)


def deviation_envelope(env: SearchEnv, rival_price: float) -> float:
    """Derivative of the maximal rank-two profit in the rival price, x (1 - x)."""
    env.require_uniform("deviation_envelope")
    x = float(deviation_price(env.A, rival_price))
    return x * (1.0 - x)
