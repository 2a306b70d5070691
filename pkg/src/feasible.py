"""Implementable prices: the H function, search-order intervals and the traced boundary."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial.distance import directed_hausdorff

from src.deviation import deviation_price, max_rank_two_profit
from src.errors import DegenerateBonus, NoRoot
from src.model import (
    ArrayLike,
    FloatArray,
    PricePair,
    SearchEnv,
    check_valid_region,
    demand_profile,
    uniform_demands,
)
from src.settings import (
    BINDING_TOL,
    DEFAULT_BOUNDARY_RAYS,
    DEFAULT_SEED,
    DEGENERATE_BONUS_TOL,
    DIAGONAL_SCAN_POINTS,
    IC_CURVE_POINTS,
    MEMBERSHIP_TOL,
    MIN_BOUNDARY_RAYS,
    RAY_BISECTION_STEPS,
    RAY_MARCH_STEPS,
    RNG_ALGORITHM,
)

logger = logging.getLogger(__name__)

PLAIN = "plain"
M_LEFT = "m_left"
M_RIGHT = "m_right"
M_LOW = "m_low"
M_HIGH = "m_high"
DIAG_LOW = "diag_low"
DIAG_HIGH = "diag_high"
BOUNDARY_TAGS = (PLAIN, M_LEFT, M_RIGHT, M_LOW, M_HIGH, DIAG_LOW, DIAG_HIGH)

_ROOT_XTOL = 1e-13


@dataclass(frozen=True)
class AlphaInterval:
    """Search-order probabilities alpha (seller 1 ranked first) compatible with both ICs."""

    lo: float
    hi: float
    empty: bool = False

    @classmethod
    def empty_set(cls) -> AlphaInterval:
        return cls(lo=math.nan, hi=math.nan, empty=True)

    @property
    def is_singleton(self) -> bool:
        return not self.empty and abs(self.hi - self.lo) <= BINDING_TOL

    @property
    def midpoint(self) -> float:
        return (self.lo + self.hi) / 2.0

    def contains(self, alpha: float, tol: float = BINDING_TOL) -> bool:
        return not self.empty and self.lo - tol <= alpha <= self.hi + tol


@dataclass(frozen=True)
class VirtualDemands:
    """Deviation profit per unit price for each seller against the total demand."""

    phi1: float
    phi2: float
    total_demand: float

    @property
    def implementable(self) -> bool:
        return self.phi1 + self.phi2 <= self.total_demand + MEMBERSHIP_TOL


@dataclass(frozen=True)
class BoundaryCurve:
    """Counterclockwise sample of the boundary of P with tagged extreme points."""

    points: tuple[PricePair, ...]
    tags: tuple[str, ...]
    anchor: PricePair
    m_left: PricePair
    m_right: PricePair
    m_low: PricePair
    m_high: PricePair
    p_low_diag: float
    p_high_diag: float

    def as_array(self) -> FloatArray:
        return np.array([pair.as_tuple() for pair in self.points], dtype=float)

    @property
    def closed_points(self) -> FloatArray:
        """Points with the first repeated at the end."""
        array = self.as_array()
        return np.vstack([array, array[:1]])

    @property
    def bounding_box(self) -> tuple[float, float, float, float]:
        """(p1_min, p1_max, p2_min, p2_max)."""
        return (self.m_left.p1, self.m_right.p1, self.m_low.p2, self.m_high.p2)

    def index_of(self, tag: str) -> int:
        return self.tags.index(tag)


@dataclass(frozen=True)
class NestingReport:
    """Points of the smaller-cost set that fall outside the larger-cost set."""

    s_small: float
    s_large: float
    samples: int
    violations: tuple[PricePair, ...]
    max_boundary_h: float

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class IcCurves:
    """Equality loci of the two incentive constraints at a fixed alpha."""

    alpha: float
    ic1: FloatArray
    ic2: FloatArray


def uniform_h(threshold: float, p1: ArrayLike, p2: ArrayLike) -> ArrayLike:
    """
    Vectorised H = p2 max pi_1^2 + p1 max pi_2^2 + p1 p2 F(p1) F(p2) - p1 p2.

    Uses the polynomial forms without a region guard, so it is defined beyond
    the threshold lines p = A.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    value = (
        p2 * max_rank_two_profit(threshold, p2)
        + p1 * max_rank_two_profit(threshold, p1)
        + p1**2 * p2**2
        - p1 * p2
    )
    return float(value) if np.ndim(value) == 0 else value


def h_partial_p2(threshold: float, p1: ArrayLike, p2: ArrayLike) -> ArrayLike:
    """dH/dp2, using the envelope derivative x (1 - x) of the maximal deviation profit."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    x = deviation_price(threshold, p2)
    value = (
        max_rank_two_profit(threshold, p2) + p2 * x * (1.0 - x) + 2.0 * p1**2 * p2 - p1
    )
    return float(value) if np.ndim(value) == 0 else value


def h_value(env: SearchEnv, prices: PricePair, extended: bool = False) -> float:
    """
    Implementability function H at a price pair; H <= 0 iff the pair is implementable.

    Args:
        env: Market primitives, uniform match values.
        prices: Price pair.
        extended: Skip the region guard and evaluate the polynomial forms anywhere.

    Raises:
        DomainError: If prices leave the nondegenerate region and extended is False.
    """
    env.require_uniform("h_value")
    if not extended:
        check_valid_region(env, prices)
    return float(uniform_h(env.A, prices.p1, prices.p2))


def linear_ic_bounds(intercept: float, slope: float, deviation: float) -> tuple[float, float]:
    """
    Alpha range solving intercept + slope * alpha >= deviation.

    Returns:
        (lo, hi) unclamped; lo > hi when no alpha works.
    """
    gap = deviation - intercept
    if slope > 0.0:
        return gap / slope, math.inf
    if slope < 0.0:
        return -math.inf, gap / slope
    return (-math.inf, math.inf) if gap <= 0.0 else (math.inf, -math.inf)


def interval_from_constraints(
    ic1: tuple[float, float], ic2: tuple[float, float]
) -> AlphaInterval:
    """Intersect two IC ranges with [0, 1]."""
    lo = max(ic1[0], ic2[0], 0.0)
    hi = min(ic1[1], ic2[1], 1.0)
    if lo > hi:
        return AlphaInterval.empty_set()
    return AlphaInterval(lo=lo, hi=hi)


def alpha_interval(env: SearchEnv, prices: PricePair) -> AlphaInterval:
    """
    Search-order correspondence phi(p1, p2) = [lo, hi].

    lo = (max pi_1^2 - pi_1^2) / (p1 B) and hi = 1 - (max pi_2^2 - pi_2^2) / (p2 B),
    clamped to [0, 1]. The set is empty exactly when H exceeds the membership
    tolerance and collapses to its midpoint when rounding leaves lo just above hi.

    Raises:
        DegenerateBonus: If the bonus B vanishes (zero search cost).
        DomainError: If prices leave the nondegenerate region.
    """
    env.require_uniform("alpha_interval")
    profile = demand_profile(env, prices)
    if profile.bonus <= DEGENERATE_BONUS_TOL:
        raise DegenerateBonus(f"Bonus {profile.bonus:.3e} vanishes at s={env.s}")

    p1, p2 = prices.p1, prices.p2
    m1 = float(max_rank_two_profit(env.A, p2))
    m2 = float(max_rank_two_profit(env.A, p1))
    ic1 = linear_ic_bounds(p1 * profile.d12, p1 * profile.bonus, m1)
    ic2 = linear_ic_bounds(p2 * profile.d21, -p2 * profile.bonus, m2)

    h = float(uniform_h(env.A, p1, p2))
    if h > MEMBERSHIP_TOL:
        return AlphaInterval.empty_set()

    lo = min(max(ic1[0], 0.0), 1.0)
    hi = max(min(ic2[1], 1.0), 0.0)
    if lo > hi:
        lo = hi = (lo + hi) / 2.0
    return AlphaInterval(lo=lo, hi=hi)


def contains(env: SearchEnv, prices: PricePair) -> bool:
    """True iff the price pair is implementable by some contract (H <= tolerance)."""
    return h_value(env, prices) <= MEMBERSHIP_TOL


def virtual_demands(env: SearchEnv, prices: PricePair) -> VirtualDemands:
    """Virtual demands max pi_i^2 / p_i and the total demand 1 - F(p1) F(p2)."""
    env.require_uniform("virtual_demands")
    check_valid_region(env, prices)
    p1, p2 = prices.p1, prices.p2
    phi1 = float(max_rank_two_profit(env.A, p2)) / p1 if p1 > 0.0 else math.inf
    phi2 = float(max_rank_two_profit(env.A, p1)) / p2 if p2 > 0.0 else math.inf
    return VirtualDemands(phi1=phi1, phi2=phi2, total_demand=1.0 - p1 * p2)


def binding_constraints(
    env: SearchEnv, prices: PricePair, alpha: float, tol: float = BINDING_TOL
) -> tuple[str, ...]:
    """Names of the incentive constraints that hold with equality at alpha."""
    profile = demand_profile(env, prices)
    p1, p2 = prices.p1, prices.p2
    profit1 = alpha * p1 * profile.d11 + (1.0 - alpha) * p1 * profile.d12
    profit2 = alpha * p2 * profile.d22 + (1.0 - alpha) * p2 * profile.d21
    binding = []
    if abs(profit1 - float(max_rank_two_profit(env.A, p2))) <= tol:
        binding.append("IC1")
    if abs(profit2 - float(max_rank_two_profit(env.A, p1))) <= tol:
        binding.append("IC2")
    return tuple(binding)


def _diagonal_gap(threshold: float, p: ArrayLike) -> ArrayLike:
    """H(p, p) / p^2 = 2 max pi^2(., p) / p + p^2 - 1."""
    p = np.asarray(p, dtype=float)
    value = 2.0 * max_rank_two_profit(threshold, p) / p + p**2 - 1.0
    return float(value) if np.ndim(value) == 0 else value


def diagonal_roots(env: SearchEnv, scan_points: int = DIAGONAL_SCAN_POINTS) -> tuple[float, float]:
    """
    Lowest and highest symmetric boundary prices (p_low, p_high).

    Scans H(p, p) on (0, 1) and refines the sign changes on either side of the
    minimum with brentq.

    Raises:
        NoRoot: If H(p, p) never becomes negative.
    """
    env.require_uniform("diagonal_roots")
    grid = np.linspace(0.0, 1.0, scan_points + 2)[1:-1]
    gap = np.asarray(_diagonal_gap(env.A, grid))
    k_min = int(np.argmin(gap))
    if gap[k_min] >= 0.0:
        raise NoRoot(f"H(p, p) stays nonnegative at A={env.A}; the implementable set is degenerate")

    below = np.flatnonzero(gap[:k_min] >= 0.0)
    above = np.flatnonzero(gap[k_min:] >= 0.0)
    if below.size == 0 or above.size == 0:
        raise NoRoot(f"H(p, p) has no sign change inside (0, 1) at A={env.A}")
    j_low = int(below[-1])
    j_high = k_min + int(above[0])

    def g(p: float) -> float:
        return float(_diagonal_gap(env.A, p))

    p_low = float(brentq(g, grid[j_low], grid[j_low + 1], xtol=_ROOT_XTOL))
    p_high = float(brentq(g, grid[j_high - 1], grid[j_high], xtol=_ROOT_XTOL))
    logger.info(f"Diagonal roots at A={env.A:.6f}: p_low={p_low:.10f}, p_high={p_high:.10f}")
    return p_low, p_high


def _ray_exit_lengths(anchor: float, directions: FloatArray) -> FloatArray:
    """Distance from (anchor, anchor) to the edge of the unit square along each direction."""
    with np.errstate(divide="ignore"):
        upper = np.where(directions > 0.0, (1.0 - anchor) / directions, np.inf)
        lower = np.where(directions < 0.0, -anchor / directions, np.inf)
    return np.min(np.minimum(upper, lower), axis=1)


def _march_rays(threshold: float, anchor: float, directions: FloatArray) -> FloatArray:
    """Radial distance to H = 0 along each direction, by a march then bisection."""
    t_exit = _ray_exit_lengths(anchor, directions)
    fractions = np.linspace(0.0, 1.0, RAY_MARCH_STEPS + 1)
    t_grid = t_exit[:, None] * fractions[None, :]
    h_grid = np.asarray(
        uniform_h(
            threshold,
            anchor + t_grid * directions[:, 0:1],
            anchor + t_grid * directions[:, 1:2],
        )
    )
    outside = h_grid > 0.0
    outside[:, 0] = False
    if not np.all(outside.any(axis=1)):
        raise NoRoot("A boundary ray never leaves the implementable set inside the unit square")
    first_out = np.argmax(outside, axis=1)
    rows = np.arange(directions.shape[0])
    t_in = t_grid[rows, first_out - 1]
    t_out = t_grid[rows, first_out]

    for _ in range(RAY_BISECTION_STEPS):
        t_mid = (t_in + t_out) / 2.0
        h_mid = np.asarray(
            uniform_h(
                threshold,
                anchor + t_mid * directions[:, 0],
                anchor + t_mid * directions[:, 1],
            )
        )
        inside = h_mid <= 0.0
        t_in = np.where(inside, t_mid, t_in)
        t_out = np.where(inside, t_out, t_mid)
    return (t_in + t_out) / 2.0


def _horizontal_roots(threshold: float, p2: float) -> tuple[float, float]:
    """Left and right roots of H(., p2) around its minimum on [0, 1]."""

    def h_row(p1: float) -> float:
        return float(uniform_h(threshold, p1, p2))

    trough = minimize_scalar(h_row, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    if h_row(trough.x) > 0.0:
        raise NoRoot(f"H(., {p2}) is positive on the whole row")
    left = float(brentq(h_row, 0.0, trough.x, xtol=_ROOT_XTOL)) if h_row(0.0) > 0.0 else 0.0
    right = float(brentq(h_row, trough.x, 1.0, xtol=_ROOT_XTOL)) if h_row(1.0) > 0.0 else 1.0
    return left, right


def _polish_horizontal_extreme(
    threshold: float, side: int, p2_bracket: tuple[float, float], fallback: PricePair
) -> PricePair:
    """Leftmost (side 0) or rightmost (side 1) boundary point, where dH/dp2 = 0."""

    def slope(p2: float) -> float:
        p1 = _horizontal_roots(threshold, p2)[side]
        return float(h_partial_p2(threshold, p1, p2))

    lower, upper = p2_bracket
    try:
        if slope(lower) * slope(upper) > 0.0:
            raise NoRoot("no sign change of dH/dp2 between the neighbouring samples")
        p2 = float(brentq(slope, lower, upper, xtol=_ROOT_XTOL))
        p1 = _horizontal_roots(threshold, p2)[side]
    except NoRoot as exc:
        logger.warning(f"Could not polish extreme point near {fallback}: {exc}")
        return fallback
    return PricePair(p1, p2)


def _angle_from(anchor: float, points: FloatArray) -> FloatArray:
    angles = np.arctan2(points[:, 1] - anchor, points[:, 0] - anchor)
    return np.mod(angles - math.pi / 4.0, 2.0 * math.pi)


def trace_boundary(env: SearchEnv, n: int = DEFAULT_BOUNDARY_RAYS) -> BoundaryCurve:
    """
    Trace the boundary of P by radial bisection from a diagonal anchor.

    Rays start at angle pi/4 so that the ray set maps onto itself under the
    coordinate swap. The rays along the diagonal are replaced by the exact
    diagonal roots, and the four extreme points are polished and inserted in
    angular order.

    Args:
        env: Market primitives, uniform match values.
        n: Number of rays, at least MIN_BOUNDARY_RAYS.

    Returns:
        BoundaryCurve ordered counterclockwise, starting at (p_high, p_high).

    Raises:
        ValueError: If n is below MIN_BOUNDARY_RAYS.
        NoRoot: If the implementable set is degenerate.
    """
    if n < MIN_BOUNDARY_RAYS:
        raise ValueError(f"n must be at least {MIN_BOUNDARY_RAYS}, got {n}")
    env.require_uniform("trace_boundary")

    p_low, p_high = diagonal_roots(env)
    anchor = (p_low + p_high) / 2.0
    logger.info(f"Tracing boundary with {n} rays from anchor ({anchor:.6f}, {anchor:.6f})")

    angles = math.pi / 4.0 + 2.0 * math.pi * np.arange(n) / n
    if n % 2 == 1:
        angles = np.sort(np.append(angles, 5.0 * math.pi / 4.0))
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    radii = _march_rays(env.A, anchor, directions)
    traced = anchor + radii[:, None] * directions

    tags = [PLAIN] * len(traced)
    diag_high_idx = 0
    diag_low_idx = int(np.argmin(np.abs(angles - 5.0 * math.pi / 4.0)))
    traced[diag_high_idx] = (p_high, p_high)
    traced[diag_low_idx] = (p_low, p_low)
    tags[diag_high_idx] = DIAG_HIGH
    tags[diag_low_idx] = DIAG_LOW

    def neighbours_p2(k: int) -> tuple[float, float]:
        around = traced[[(k - 1) % len(traced), (k + 1) % len(traced)], 1]
        return float(around.min()), float(around.max())

    k_left = int(np.argmin(traced[:, 0]))
    k_right = int(np.argmax(traced[:, 0]))
    m_left = _polish_horizontal_extreme(
        env.A, 0, neighbours_p2(k_left), PricePair(*traced[k_left])
    )
    m_right = _polish_horizontal_extreme(
        env.A, 1, neighbours_p2(k_right), PricePair(*traced[k_right])
    )
    m_low = m_left.swapped()
    m_high = m_right.swapped()

    extremes = [(M_LEFT, m_left), (M_RIGHT, m_right), (M_LOW, m_low), (M_HIGH, m_high)]
    all_points = np.vstack([traced, [pair.as_tuple() for _, pair in extremes]])
    all_tags = tags + [tag for tag, _ in extremes]
    order = np.argsort(_angle_from(anchor, all_points), kind="stable")

    curve = BoundaryCurve(
        points=tuple(PricePair(float(all_points[k, 0]), float(all_points[k, 1])) for k in order),
        tags=tuple(all_tags[k] for k in order),
        anchor=PricePair(anchor, anchor),
        m_left=m_left,
        m_right=m_right,
        m_low=m_low,
        m_high=m_high,
        p_low_diag=p_low,
        p_high_diag=p_high,
    )
    logger.info(f"Traced {len(curve.points)} boundary points")
    return curve


def swap_hausdorff(curve: BoundaryCurve) -> float:
    """Symmetric Hausdorff distance between the curve and its coordinate swap."""
    points = curve.as_array()
    mirrored = points[:, ::-1]
    return max(directed_hausdorff(points, mirrored)[0], directed_hausdorff(mirrored, points)[0])


def midpoint_violations(
    env: SearchEnv, curve: BoundaryCurve, pairs: int, seed: int = DEFAULT_SEED
) -> FloatArray:
    """Midpoints of random boundary pairs that fall outside P; empty when P is convex."""
    rng = np.random.Generator(getattr(np.random, RNG_ALGORITHM)(seed))
    points = curve.as_array()
    first = rng.integers(0, len(points), size=pairs)
    second = rng.integers(0, len(points), size=pairs)
    midpoints = (points[first] + points[second]) / 2.0
    h = np.asarray(uniform_h(env.A, midpoints[:, 0], midpoints[:, 1]))
    return midpoints[h > MEMBERSHIP_TOL]


def sample_interior(
    env: SearchEnv, curve: BoundaryCurve, samples: int, rng: np.random.Generator
) -> FloatArray:
    """Uniform draws from P by rejection inside the curve's bounding box."""
    p1_min, p1_max, p2_min, p2_max = curve.bounding_box
    accepted: list[FloatArray] = []
    count = 0
    while count < samples:
        draws = rng.uniform(
            low=(p1_min, p2_min), high=(p1_max, p2_max), size=(max(2 * samples, 64), 2)
        )
        h = np.asarray(uniform_h(env.A, draws[:, 0], draws[:, 1]))
        kept = draws[h <= 0.0]
        accepted.append(kept)
        count += len(kept)
    return np.vstack(accepted)[:samples]


def nesting_check(
    env_small_s: SearchEnv,
    env_large_s: SearchEnv,
    samples: int = 1_000,
    seed: int = DEFAULT_SEED,
) -> NestingReport:
    """
    Check that the implementable set grows with the search cost.

    Samples points of P at the smaller cost and tests membership at the larger
    cost; also reports the largest H of the larger-cost set over the
    smaller-cost boundary, which is negative when the boundary is interior.

    Raises:
        ValueError: If the first environment has the larger search cost.
    """
    if env_small_s.s > env_large_s.s:
        raise ValueError(f"Expected s1 <= s2, got s1={env_small_s.s}, s2={env_large_s.s}")

    logger.info(f"Checking nesting of P at s={env_small_s.s} inside s={env_large_s.s}")
    rng = np.random.Generator(getattr(np.random, RNG_ALGORITHM)(seed))
    curve = trace_boundary(env_small_s, MIN_BOUNDARY_RAYS)
    interior = sample_interior(env_small_s, curve, samples, rng)
    candidates = np.vstack([interior, curve.as_array()])
    h_large = np.asarray(uniform_h(env_large_s.A, candidates[:, 0], candidates[:, 1]))
    bad = candidates[h_large > MEMBERSHIP_TOL]
    boundary_h = h_large[len(interior) :]

    report = NestingReport(
        s_small=env_small_s.s,
        s_large=env_large_s.s,
        samples=len(candidates),
        violations=tuple(PricePair(float(a), float(b)) for a, b in bad),
        max_boundary_h=float(boundary_h.max()),
    )
    if not report.ok:
        logger.warning(f"Nesting violated at {len(report.violations)} sampled points")
    return report


def _column_roots(values: FloatArray, grid: FloatArray, func) -> list[float]:
    roots = []
    signs = np.sign(values)
    for k in np.flatnonzero(signs[:-1] * signs[1:] < 0.0):
        roots.append(float(brentq(func, grid[k], grid[k + 1], xtol=_ROOT_XTOL)))
    return roots


def ic_curves(env: SearchEnv, alpha: float, n: int = IC_CURVE_POINTS) -> IcCurves:
    """
    Equality loci of IC1 and IC2 at a fixed alpha, solved column by column in p2.

    IC1 holds where alpha pi_1^1 + (1 - alpha) pi_1^2 >= max pi_1^2, IC2 where
    alpha pi_2^2 + (1 - alpha) pi_2^1 >= max pi_2^2. P at this alpha is the
    intersection of both regions.
    """
    env.require_uniform("ic_curves")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    a = env.A

    def ic1_slack(p1: ArrayLike, p2: float) -> ArrayLike:
        d11, d12, _, _, _ = uniform_demands(a, p1, p2)
        return p1 * (alpha * d11 + (1.0 - alpha) * d12) - max_rank_two_profit(a, p2)

    def ic2_slack(p1: ArrayLike, p2: float) -> ArrayLike:
        _, _, d21, d22, _ = uniform_demands(a, p1, p2)
        return p2 * (alpha * d22 + (1.0 - alpha) * d21) - max_rank_two_profit(a, p1)

    columns = np.linspace(0.0, 1.0, n + 2)[1:-1]
    scan = np.linspace(0.0, 1.0, 4 * n + 1)
    ic1_points: list[tuple[float, float]] = []
    ic2_points: list[tuple[float, float]] = []
    for p2 in columns:
        for slack, sink in ((ic1_slack, ic1_points), (ic2_slack, ic2_points)):
            values = np.asarray(slack(scan, p2))
            for root in _column_roots(values, scan, lambda p1, f=slack, c=p2: float(f(p1, c))):
                sink.append((root, float(p2)))

    logger.info(
        f"IC loci at alpha={alpha}: {len(ic1_points)} IC1 points, {len(ic2_points)} IC2 points"
    )
    return IcCurves(
        alpha=alpha,
        ic1=np.array(ic1_points, dtype=float).reshape(-1, 2),
        ic2=np.array(ic2_points, dtype=float).reshape(-1, 2),
    )
