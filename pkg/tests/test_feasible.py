"""Tests for the implementable set: H, search-order intervals, boundary and nesting."""

import numpy as np
import pytest

from src.deviation import max_rank_two_profit
from src.errors import DegenerateBonus, DomainError
from src.feasible import (
    BOUNDARY_TAGS,
    DIAG_HIGH,
    DIAG_LOW,
    M_LEFT,
    M_RIGHT,
    alpha_interval,
    binding_constraints,
    contains,
    diagonal_roots,
    h_partial_p2,
    h_value,
    ic_curves,
    midpoint_violations,
    nesting_check,
    swap_hausdorff,
    trace_boundary,
    uniform_h,
    virtual_demands,
)
from src.model import PricePair, SearchEnv, demand_profile, uniform_demands


@pytest.fixture(scope="module")
def env():
    return SearchEnv.from_threshold(0.7)


@pytest.fixture(scope="module")
def curve(env):
    return trace_boundary(env, 128)


class TestAlphaInterval:
    """Test the search-order correspondence."""

    def test_symmetric_point(self, env) -> None:
        """Test phi(0.3, 0.3) at A = 0.7."""
        interval = alpha_interval(env, PricePair(0.3, 0.3))
        assert not interval.empty
        assert interval.lo == pytest.approx(0.1373, abs=1e-4)
        assert interval.hi == pytest.approx(0.8627, abs=1e-4)
        assert interval.lo + interval.hi == pytest.approx(1.0, abs=1e-12)

    def test_width_matches_h(self, env) -> None:
        """Test hi - lo = -H / (p1 p2 B) for an interior point."""
        prices = PricePair(0.35, 0.3)
        interval = alpha_interval(env, prices)
        bonus = demand_profile(env, prices).bonus
        expected = -h_value(env, prices) / (prices.p1 * prices.p2 * bonus)
        assert interval.hi - interval.lo == pytest.approx(expected, abs=1e-12)

    def test_empty_outside(self, env) -> None:
        """Test prices above the diagonal root give an empty interval."""
        interval = alpha_interval(env, PricePair(0.65, 0.65))
        assert interval.empty
        assert not contains(env, PricePair(0.65, 0.65))
        assert not interval.contains(0.5)

    def test_degenerate_bonus(self) -> None:
        """Test zero search cost leaves the search order undetermined."""
        with pytest.raises(DegenerateBonus):
            alpha_interval(SearchEnv.from_cost(0.0), PricePair(0.5, 0.5))

    def test_outside_region(self, env) -> None:
        """Test prices outside the nondegenerate region are rejected."""
        with pytest.raises(DomainError):
            alpha_interval(env, PricePair(0.6, 0.2))

    def test_binding_at_endpoints(self, env) -> None:
        """Test IC1 binds at lo and IC2 binds at hi."""
        prices = PricePair(0.35, 0.3)
        interval = alpha_interval(env, prices)
        assert "IC1" in binding_constraints(env, prices, interval.lo)
        assert "IC2" in binding_constraints(env, prices, interval.hi)
        assert binding_constraints(env, prices, interval.midpoint) == ()

    def test_virtual_demands_agree_with_membership(self, env) -> None:
        """Test phi1 + phi2 <= 1 - p1 p2 exactly on P."""
        for p1, p2 in [(0.3, 0.3), (0.35, 0.3), (0.65, 0.65), (0.1, 0.1), (0.5, 0.4)]:
            prices = PricePair(p1, p2)
            assert virtual_demands(env, prices).implementable == contains(env, prices)


class TestHFunction:
    """Test the implementability function."""

    def test_symmetry(self) -> None:
        """Test H is symmetric under swapping prices."""
        assert uniform_h(0.7, 0.4, 0.25) == pytest.approx(uniform_h(0.7, 0.25, 0.4), abs=1e-15)

    def test_partial_matches_finite_difference(self) -> None:
        """Test dH/dp2 against a central difference."""
        step = 1e-6
        numeric = (uniform_h(0.7, 0.4, 0.3 + step) - uniform_h(0.7, 0.4, 0.3 - step)) / (2 * step)
        assert h_partial_p2(0.7, 0.4, 0.3) == pytest.approx(numeric, abs=1e-6)

    def test_extended_skips_region_guard(self, env) -> None:
        """Test extended evaluation past the threshold lines."""
        prices = PricePair(0.8, 0.3)
        with pytest.raises(DomainError):
            h_value(env, prices)
        assert h_value(env, prices, extended=True) == pytest.approx(
            uniform_h(0.7, 0.8, 0.3), abs=1e-15
        )


class TestDiagonalRoots:
    """Test the symmetric boundary prices."""

    def test_known_roots(self, env) -> None:
        """Test p_low and p_high at A = 0.7."""
        p_low, p_high = diagonal_roots(env)
        assert p_low == pytest.approx(0.2385, abs=1e-3)
        assert p_high == pytest.approx(0.577, abs=1e-3)
        assert uniform_h(0.7, p_low, p_low) == pytest.approx(0.0, abs=1e-10)
        assert uniform_h(0.7, p_high, p_high) == pytest.approx(0.0, abs=1e-10)

    def test_roots_widen_with_cost(self) -> None:
        """Test the diagonal section grows with the search cost."""
        low_small, high_small = diagonal_roots(SearchEnv.from_cost(0.02))
        low_large, high_large = diagonal_roots(SearchEnv.from_cost(0.045))
        assert low_large < low_small
        assert high_large > high_small


class TestTraceBoundary:
    """Test the traced boundary of P."""

    def test_points_lie_on_boundary(self, env, curve) -> None:
        """Test every boundary point has H close to zero."""
        points = curve.as_array()
        h = np.asarray(uniform_h(env.A, points[:, 0], points[:, 1]))
        assert np.max(np.abs(h)) < 1e-8

    def test_swap_symmetry(self, curve) -> None:
        """Test the curve maps onto itself under the coordinate swap."""
        assert swap_hausdorff(curve) < 1e-8

    def test_tags(self, curve) -> None:
        """Test all extreme tags appear exactly once and the curve starts at p_high."""
        for tag in BOUNDARY_TAGS[1:]:
            assert curve.tags.count(tag) == 1
        assert DIAG_HIGH in (curve.tags[0], curve.tags[-1])
        assert curve.points[curve.index_of(DIAG_LOW)].p1 == pytest.approx(curve.p_low_diag)
        assert curve.m_low == curve.m_left.swapped()
        assert curve.m_high == curve.m_right.swapped()

    def test_extremes_bound_the_curve(self, curve) -> None:
        """Test the polished extremes bound every traced point."""
        points = curve.as_array()
        assert curve.points[curve.index_of(M_LEFT)] == curve.m_left
        assert curve.points[curve.index_of(M_RIGHT)] == curve.m_right
        assert points[:, 0].min() >= curve.m_left.p1 - 1e-9
        assert points[:, 0].max() <= curve.m_right.p1 + 1e-9

    def test_closed_points(self, curve) -> None:
        """Test the closed polygon repeats its first point."""
        closed = curve.closed_points
        assert len(closed) == len(curve.points) + 1
        np.testing.assert_array_equal(closed[0], closed[-1])

    def test_too_few_rays(self, env) -> None:
        """Test ray counts below the minimum are rejected."""
        with pytest.raises(ValueError):
            trace_boundary(env, 16)

    def test_odd_ray_count_keeps_both_diagonals(self, env) -> None:
        """Test an odd ray count still hits both diagonal roots."""
        odd = trace_boundary(env, 65)
        assert DIAG_LOW in odd.tags
        assert DIAG_HIGH in odd.tags

    def test_midpoints_stay_inside(self, env) -> None:
        """Test midpoints of 1000 random boundary pairs all lie in P at A = 0.7."""
        fine = trace_boundary(env, 512)
        violations = midpoint_violations(env, fine, pairs=1000, seed=7)
        assert violations.shape == (0, 2)

    def test_midpoint_violations_are_outside(self, env, curve) -> None:
        """Test any reported midpoint really falls outside P."""
        violations = midpoint_violations(env, curve, pairs=2000, seed=7)
        assert violations.ndim == 2
        if len(violations):
            assert np.all(np.asarray(uniform_h(env.A, violations[:, 0], violations[:, 1])) > 0.0)


class TestNesting:
    """Test that P grows with the search cost."""

    def test_nested(self) -> None:
        """Test P at s = 0.02 lies inside P at s = 0.045."""
        report = nesting_check(SearchEnv.from_cost(0.02), SearchEnv.from_cost(0.045), seed=11)
        assert report.ok
        assert report.max_boundary_h < 0.0
        assert report.samples > 1000

    def test_order_of_arguments(self) -> None:
        """Test the larger cost must come second."""
        with pytest.raises(ValueError):
            nesting_check(SearchEnv.from_cost(0.045), SearchEnv.from_cost(0.02))


class TestIcCurves:
    """Test the IC equality loci."""

    def test_loci_satisfy_equality(self, env) -> None:
        """Test each locus point makes its constraint bind."""
        alpha = 0.5
        curves = ic_curves(env, alpha, n=50)
        assert len(curves.ic1) > 0
        assert len(curves.ic2) > 0

        p1, p2 = curves.ic1[:, 0], curves.ic1[:, 1]
        d11, d12, _, _, _ = uniform_demands(env.A, p1, p2)
        slack1 = p1 * (alpha * d11 + (1 - alpha) * d12) - max_rank_two_profit(env.A, p2)
        np.testing.assert_allclose(slack1, 0.0, atol=1e-10)

        p1, p2 = curves.ic2[:, 0], curves.ic2[:, 1]
        _, _, d21, d22, _ = uniform_demands(env.A, p1, p2)
        slack2 = p2 * (alpha * d22 + (1 - alpha) * d21) - max_rank_two_profit(env.A, p1)
        np.testing.assert_allclose(slack2, 0.0, atol=1e-10)

    def test_invalid_alpha(self, env) -> None:
        """Test alpha outside [0, 1] is rejected."""
        with pytest.raises(ValueError):
            ic_curves(env, 1.5)
