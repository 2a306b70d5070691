"""Tests for the consumer simulator, search algorithms and equilibrium checks."""

from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from src.deviation import deviation_price
from src.feasible import alpha_interval, contains
from src.model import PricePair, SearchEnv, demand_profile, social_values
from src.optimiser import Contract
from src.settings import Z_TOLERANCE
from src.simulation import (
    BestGain,
    SearchAlgorithm,
    VerificationReport,
    best_response,
    find_equilibrium,
    seller_profit,
    simulate,
    simulate_welfare_gap,
    verify_nash,
)


@pytest.fixture(scope="module")
def env():
    return SearchEnv.from_threshold(0.7)


@pytest.fixture(scope="module")
def outcome(env):
    """One million consumers at (0.4, 0.3) with a fair coin for the order."""
    return simulate(env, PricePair(0.4, 0.3), alpha=0.5, n=1_000_000, seed=20240917)


def _within(estimate: float, truth: float, std_error: float) -> bool:
    return abs(estimate - truth) <= Z_TOLERANCE * std_error + 1e-12


class TestSearchAlgorithm:
    """Test the committed search-order maps."""

    def test_fixed_rules(self) -> None:
        """Test prominence, random and price-directed orders."""
        assert SearchAlgorithm.prominence(1).alpha(0.4, 0.3) == 1.0
        assert SearchAlgorithm.prominence(2).alpha(0.4, 0.3) == 0.0
        assert SearchAlgorithm.random().alpha(0.4, 0.3) == 0.5
        directed = SearchAlgorithm.price_directed(tie_alpha=0.25)
        assert directed.alpha(0.3, 0.4) == 1.0
        assert directed.alpha(0.4, 0.3) == 0.0
        assert directed.alpha(0.3, 0.3) == 0.25

    def test_labels(self) -> None:
        """Test algorithm labels."""
        assert SearchAlgorithm.prominence(2).label == "PROMINENCE(2)"
        assert SearchAlgorithm.random().label == "RANDOM"

    def test_invalid_favored_seller(self) -> None:
        """Test prominence needs seller 1 or 2."""
        with pytest.raises(ValueError):
            SearchAlgorithm.prominence(3)

    def test_contract_punishes_deviators(self) -> None:
        """Test on-path, unilateral and joint deviations."""
        algorithm = SearchAlgorithm.from_contract(Contract(0.4, 0.3, 0.6), off_path_alpha=0.5)
        assert algorithm.alpha(0.4, 0.3) == 0.6
        assert algorithm.alpha(0.4, 0.2) == 1.0
        assert algorithm.alpha(0.5, 0.3) == 0.0
        assert algorithm.alpha(0.5, 0.2) == 0.5

    def test_vectorised(self) -> None:
        """Test array prices give array orders."""
        alphas = SearchAlgorithm.price_directed().alpha(np.array([0.2, 0.5]), 0.3)
        np.testing.assert_array_equal(alphas, [1.0, 0.0])

    def test_custom_table(self) -> None:
        """Test nearest-neighbour lookup of a tabulated map."""
        axis = np.array([0.0, 0.5, 1.0])
        table = np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 1.4]])
        algorithm = SearchAlgorithm.custom(axis, axis, table)
        assert algorithm.alpha(0.45, 0.05) == pytest.approx(0.4)
        assert algorithm.alpha(0.9, 0.9) == pytest.approx(1.0)


class TestSimulate:
    """Test the simulator against the analytic demand layer."""

    def test_rank_conditional_demands(self, env, outcome) -> None:
        """Test simulated demands agree with the closed forms within three standard errors."""
        profile = demand_profile(env, PricePair(0.4, 0.3))
        for name in ("d11", "d12", "d21", "d22"):
            assert _within(getattr(outcome, name), getattr(profile, name), outcome.std_errors[name])
        assert _within(outcome.bonus, profile.bonus, outcome.bonus_se)

    def test_trade_and_welfare(self, env, outcome) -> None:
        """Test trade probability, welfare and consumer surplus."""
        prices = PricePair(0.4, 0.3)
        profile = demand_profile(env, prices)
        values = social_values(env, prices)
        sw = 0.5 * values.sw1 + 0.5 * values.sw2
        profit = 0.5 * (0.4 * profile.d11 + 0.3 * profile.d22) + 0.5 * (
            0.4 * profile.d12 + 0.3 * profile.d21
        )

        assert _within(outcome.trade_prob, 0.88, outcome.std_errors["trade_prob"])
        assert _within(outcome.sw, sw, outcome.std_errors["sw"])
        assert outcome.cs == pytest.approx(outcome.sw - outcome.profit, abs=1e-12)
        assert abs(outcome.profit - profit) < 0.01
        assert outcome.n == 1_000_000

    def test_reproducible(self, env) -> None:
        """Test the same seed gives the same outcome."""
        first = simulate(env, PricePair(0.4, 0.3), alpha=0.3, n=50_000, seed=5)
        second = simulate(env, PricePair(0.4, 0.3), alpha=0.3, n=50_000, seed=5)
        assert first == second
        assert first.to_dict()["std_errors"] == second.std_errors

    def test_corner_prices(self, env) -> None:
        """Test a seller priced above A is never searched second."""
        result = simulate(env, PricePair(0.8, 0.3), alpha=0.5, n=200_000, seed=3)
        assert result.d12 == 0.0
        assert _within(result.d21, 0.7, result.std_errors["d21"])

    def test_invalid_arguments(self, env) -> None:
        """Test bad consumer counts and orders are rejected."""
        with pytest.raises(ValueError):
            simulate(env, PricePair(0.4, 0.3), alpha=0.5, n=0)
        with pytest.raises(ValueError):
            simulate(env, PricePair(0.4, 0.3), alpha=1.5)

    @pytest.mark.parametrize(
        "p1, p2", [(0.4, 0.3), (0.3, 0.3), (0.2, 0.45), (0.55, 0.35), (0.65, 0.6)]
    )
    def test_first_and_second_rank_demands(self, env, p1: float, p2: float) -> None:
        """Test d11 and d22 agree with the closed forms within three standard errors."""
        result = simulate(env, PricePair(p1, p2), alpha=1.0, n=1_000_000, seed=41)
        profile = demand_profile(env, PricePair(p1, p2))
        assert _within(result.d11, profile.d11, result.std_errors["d11"])
        assert _within(result.d22, profile.d22, result.std_errors["d22"])

    def test_welfare_gap(self, env) -> None:
        """Test SW1 - SW2 = -delta^3 / 3 on common random numbers."""
        gap = simulate_welfare_gap(env, PricePair(0.4, 0.3), n=1_000_000, seed=9)
        assert _within(gap.estimate, -1 / 3000, gap.std_error)


class TestEquilibrium:
    """Test unilateral deviation checks and best-response dynamics."""

    def test_contract_in_p_is_equilibrium(self, env) -> None:
        """Test an implementable contract survives every grid deviation."""
        prices = PricePair(0.35, 0.3)
        alpha = alpha_interval(env, prices).midpoint
        algorithm = SearchAlgorithm.from_contract(Contract(0.35, 0.3, alpha))
        report = verify_nash(env, algorithm, prices)
        assert report.is_equilibrium
        assert report.seller1.gain < 0.0
        assert report.seller2.gain < 0.0

    def test_contract_outside_p_fails(self, env) -> None:
        """Test a contract outside P has a profitable deviation."""
        prices = PricePair(0.65, 0.65)
        report = verify_nash(env, SearchAlgorithm.from_contract(Contract(0.65, 0.65, 0.5)), prices)
        assert not report.is_equilibrium
        assert max(report.seller1.gain, report.seller2.gain) > 0.0

    def test_best_response_under_prominence(self, env) -> None:
        """Test a demoted seller best-responds with the closed-form deviation."""
        response = best_response(env, SearchAlgorithm.prominence(1), 2, 0.5)
        assert response == pytest.approx(deviation_price(0.7, 0.5), abs=1e-6)

    def test_seller_index(self, env) -> None:
        """Test seller indices other than 1 and 2 are rejected."""
        with pytest.raises(ValueError):
            seller_profit(env, SearchAlgorithm.random(), 3, 0.3, 0.3)

    def test_random_search_equilibrium_is_symmetric(self, env) -> None:
        """Test best-response dynamics under random search settle on equal prices."""
        equilibrium = find_equilibrium(env, SearchAlgorithm.random(), PricePair(0.4, 0.4))
        assert equilibrium is not None
        assert equilibrium.p1 == pytest.approx(equilibrium.p2, abs=1e-6)
        assert equilibrium.p1 == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-5)
        assert contains(env, equilibrium)
        assert alpha_interval(env, equilibrium).contains(0.5)

    @patch("src.simulation.verify_nash")
    def test_failed_verification_returns_none(self, mock_verify: MagicMock, env) -> None:
        """Test a fixed point that fails verification is discarded."""
        mock_verify.return_value = VerificationReport(
            is_equilibrium=False,
            seller1=BestGain(price=0.1, gain=1e-3),
            seller2=BestGain(price=0.1, gain=0.0),
            grid_n=10,
            tol=1e-8,
        )
        assert find_equilibrium(env, SearchAlgorithm.random(), PricePair(0.4, 0.4)) is None
        mock_verify.assert_called_once()

    def test_prominence_equilibrium_favours_prominent_seller(self, env) -> None:
        """Test the prominent seller prices higher and the pair is implementable."""
        equilibrium = find_equilibrium(env, SearchAlgorithm.prominence(1), PricePair(0.4, 0.4))
        assert equilibrium is not None
        assert equilibrium.p1 > equilibrium.p2
        assert contains(env, equilibrium)
        on_path = alpha_interval(env, equilibrium)
        assert on_path.contains(1.0)

    @pytest.mark.parametrize("price", [0.2, 0.3, 0.45, 0.6])
    def test_price_directed_has_no_symmetric_equilibrium(self, env, price: float) -> None:
        """Test undercutting a tied rival to win the top rank always pays."""
        report = verify_nash(env, SearchAlgorithm.price_directed(), PricePair(price, price))
        assert not report.is_equilibrium

    def test_price_directed_has_no_equilibrium_on_grid(self, env) -> None:
        """Test no pair on a 200-point price grid survives every unilateral deviation."""
        axis = np.linspace(0.0, env.A, 200)
        algorithm = SearchAlgorithm.price_directed()
        survivors = [
            (p1, p2)
            for p1 in axis
            for p2 in axis
            if verify_nash(env, algorithm, PricePair(float(p1), float(p2))).is_equilibrium
        ]
        assert survivors == []


class TestSellerProfit:
    """Test deviation payoffs far from the rival's price."""

    def test_first_rank_far_above_rival(self, env) -> None:
        """Test a first-ranked seller at A against a rival at 0.3 matches simulation."""
        expected = seller_profit(env, SearchAlgorithm.prominence(1), 1, 0.7, 0.3)
        # nobody stops early: demand is the integral of u - 0.4 over [0.7, 1]
        assert expected == pytest.approx(0.7 * 0.135, abs=1e-12)
        result = simulate(env, PricePair(0.7, 0.3), alpha=1.0, n=400_000, seed=13)
        assert _within(result.profit1, expected, result.std_errors["profit1"])

    def test_second_rank_far_below_rival(self, env) -> None:
        """Test a second-ranked seller undercutting far below its rival matches simulation."""
        expected = seller_profit(env, SearchAlgorithm.prominence(1), 2, 0.05, 0.7)
        assert expected == pytest.approx(0.05 * 0.905, abs=1e-12)
        result = simulate(env, PricePair(0.7, 0.05), alpha=1.0, n=400_000, seed=17)
        assert _within(result.profit2, expected, result.std_errors["profit2"])

    def test_vectorised_over_own_price(self, env) -> None:
        """Test array prices give the same payoffs as scalar calls."""
        algorithm = SearchAlgorithm.random()
        prices = np.array([0.05, 0.3, 0.7])
        profits = seller_profit(env, algorithm, 1, prices, 0.3)
        for price, profit in zip(prices, profits, strict=True):
            assert profit == pytest.approx(seller_profit(env, algorithm, 1, float(price), 0.3))
