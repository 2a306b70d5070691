"""Tests for the rank-two deviation solver and its brute-force oracle."""

import numpy as np
import pytest

from src.deviation import (
    best_deviation,
    brute_force_best_deviation,
    deviation_envelope,
    deviation_price,
    deviation_price_derivative,
    max_rank_two_profit,
    rank_two_profit,
)
from src.model import SearchEnv, general_distribution


class TestClosedFormDeviation:
    """Test the closed-form deviation price and profit."""

    @pytest.mark.parametrize(
        ("rival", "price", "profit"),
        [(0.5, 0.39722, 0.17401), (0.3, 0.36889, 0.12671)],
    )
    def test_known_values(self, rival: float, price: float, profit: float) -> None:
        """Test deviations at A = 0.7."""
        deviation = best_deviation(SearchEnv.from_threshold(0.7), rival)
        assert deviation.price == pytest.approx(price, abs=1e-5)
        assert deviation.profit == pytest.approx(profit, abs=1e-5)

    def test_zero_search_cost(self) -> None:
        """Test the deviation at A = 1 against a rival pricing at 1."""
        deviation = best_deviation(SearchEnv.from_threshold(1.0), 1.0)
        assert deviation.price == pytest.approx((4.0 - np.sqrt(10.0)) / 3.0, abs=1e-12)
        assert deviation.price == pytest.approx(0.4514, abs=1e-4)

    def test_vectorised(self) -> None:
        """Test array rivals match scalar evaluation."""
        rivals = np.array([0.1, 0.3, 0.5])
        prices = deviation_price(0.7, rivals)
        profits = max_rank_two_profit(0.7, rivals)
        for k, rival in enumerate(rivals):
            assert prices[k] == pytest.approx(deviation_price(0.7, float(rival)))
            assert profits[k] == pytest.approx(rank_two_profit(0.7, prices[k], float(rival)))

    def test_derivative_matches_finite_difference(self) -> None:
        """Test the implicit slope of the deviation price."""
        env = SearchEnv.from_threshold(0.7)
        step = 1e-6
        numeric = (deviation_price(0.7, 0.4 + step) - deviation_price(0.7, 0.4 - step)) / (2 * step)
        assert deviation_price_derivative(env, 0.4) == pytest.approx(numeric, abs=1e-6)

    def test_envelope_matches_finite_difference(self) -> None:
        """Test the envelope slope of the maximal rank-two profit."""
        env = SearchEnv.from_threshold(0.7)
        step = 1e-6
        numeric = (
            max_rank_two_profit(0.7, 0.4 + step) - max_rank_two_profit(0.7, 0.4 - step)
        ) / (2 * step)
        assert deviation_envelope(env, 0.4) == pytest.approx(numeric, abs=1e-6)


class TestBruteForceOracle:
    """Test the exhaustive deviation search."""

    @pytest.mark.parametrize("threshold", [0.55, 0.7, 0.85])
    def test_matches_closed_form(self, threshold: float) -> None:
        """Test the oracle agrees with the closed form to the grid spacing."""
        env = SearchEnv.from_threshold(threshold)
        for rival in (0.1, 0.3, threshold):
            exact = best_deviation(env, rival)
            oracle = brute_force_best_deviation(env, rival)
            assert oracle.price == pytest.approx(exact.price, abs=2e-6)
            assert oracle.profit == pytest.approx(exact.profit, abs=1e-10)
            assert oracle.profit <= exact.profit + 1e-12

    def test_grid_too_small(self) -> None:
        """Test grids below the minimum are rejected."""
        with pytest.raises(ValueError):
            brute_force_best_deviation(SearchEnv.from_threshold(0.7), 0.3, grid_n=10)

    def test_general_distribution(self) -> None:
        """Test the quadrature oracle on a uniform distribution given numerically."""
        exact_env = SearchEnv.from_threshold(0.7)
        flat = general_distribution(
            lambda u: min(max(u, 0.0), 1.0), lambda u: 1.0 if 0.0 <= u <= 1.0 else 0.0, "flat"
        )
        env = SearchEnv(s=exact_env.s, A=exact_env.A, dist=flat)
        oracle = brute_force_best_deviation(env, 0.5, grid_n=1000)
        exact = best_deviation(exact_env, 0.5)
        assert oracle.price == pytest.approx(exact.price, abs=1e-3)
        assert oracle.profit == pytest.approx(exact.profit, abs=1e-6)
