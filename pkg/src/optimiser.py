"""Contract objectives and the optimal-contract solvers over the implementable set."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from src.deviation import max_rank_two_profit
from src.errors import Infeasible, NoBracket, NoRoot
from src.feasible import (
    BoundaryCurve,
    alpha_interval,
    binding_constraints,
    diagonal_roots,
    trace_boundary,
    uniform_h,
)
from src.model import (
    ArrayLike,
    FloatArray,
    PricePair,
    SearchEnv,
    demand_profile,
    in_valid_region,
    social_values,
    uniform_demands,
    uniform_social_values,
)
from src.settings import (
    CERTIFICATE_RESOLUTION,
    CRITICAL_COST_BRACKET,
    DEFAULT_BOUNDARY_RAYS,
    DEGENERATE_BONUS_TOL,
    DIAGONAL_SCAN_POINTS,
    FIRST_BEST_BRACKET,
    MEMBERSHIP_TOL,
    MIN_CERTIFICATE_RESOLUTION,
    MULTI_STARTS,
    REGIME_BOUNDARY_TOL,
    SOLVER_IMPROVEMENT_TOL,
    SYMMETRIC_OPTIMUM_PRICE,
    SYMMETRY_TOL,
)

logger = logging.getLogger(__name__)

_PRICE_FLOOR = 1e-6
_RESTORE_STEPS = 80


class Objective(str, Enum):
    PROFIT = "profit"
    TP = "tp"
    SW = "sw"
    CS = "cs"


class Direction(str, Enum):
    MAX = "max"
    MIN = "min"


class Regime(str, Enum):
    SYMMETRIC_DIAGONAL = "SYMMETRIC_DIAGONAL"
    ASYMMETRIC_BOUNDARY = "ASYMMETRIC_BOUNDARY"
    INTERIOR = "INTERIOR"
    UNCONSTRAINED_FIRST_BEST = "UNCONSTRAINED_FIRST_BEST"


@dataclass(frozen=True)
class Contract:
    """Recommended prices and the on-path probability that seller 1 is ranked first."""

    p1: float
    p2: float
    alpha: float

    @property
    def prices(self) -> PricePair:
        return PricePair(self.p1, self.p2)

    def mirrored(self) -> Contract:
        return Contract(p1=self.p2, p2=self.p1, alpha=1.0 - self.alpha)


@dataclass(frozen=True)
class ObjectiveValues:
    profit1: float
    profit2: float
    profit: float
    trade_prob: float
    sw: float
    cs: float

    def get(self, objective: Objective) -> float:
        return {
            Objective.PROFIT: self.profit,
            Objective.TP: self.trade_prob,
            Objective.SW: self.sw,
            Objective.CS: self.cs,
        }[objective]


@dataclass(frozen=True)
class Certificate:
    """Full-grid comparison backing a solver result."""

    resolution: int
    grid_value: float
    bound: float
    certified: bool


@dataclass(frozen=True)
class SolveResult:
    objective: Objective
    direction: Direction
    contract: Contract
    value: float
    regime: Regime
    binding: tuple[str, ...]
    mirror: Contract | None = None
    certificate: Certificate | None = None
    restricted: bool = False

    def to_dict(self) -> dict[str, Any]:
        """Flat JSON-ready record."""
        record: dict[str, Any] = {
            "objective": self.objective.value,
            "direction": self.direction.value,
            "p1": self.contract.p1,
            "p2": self.contract.p2,
            "alpha": self.contract.alpha,
            "value": self.value,
            "regime": self.regime.value,
            "binding": list(self.binding),
            "restricted": self.restricted,
            "certificate_resolution": None,
            "grid_value": None,
            "certificate_bound": None,
            "certified": None,
            "mirror": asdict(self.mirror) if self.mirror is not None else None,
        }
        if self.certificate is not None:
            record["certificate_resolution"] = self.certificate.resolution
            record["grid_value"] = self.certificate.grid_value
            record["certificate_bound"] = self.certificate.bound
            record["certified"] = self.certificate.certified
        return record


@dataclass(frozen=True)
class AttainabilityReport:
    first_best_value: float
    constrained_value: float
    gap: float
    unattainable: bool


@dataclass(frozen=True)
class ArcValues:
    """Objective values along a boundary arc, ordered by increasing p1."""

    points: FloatArray
    values: FloatArray
    alphas: FloatArray


def _alpha_choice(
    objective: Objective, direction: Direction, delta: ArrayLike, lo: ArrayLike, hi: ArrayLike
) -> ArrayLike:
    """
    Endpoint of phi that optimises the objective, vectorised.

    dJ_profit/dalpha = delta * B and dJ_sw/dalpha = -delta^3 / 3 share the sign
    pattern of the consumer-surplus slope -delta^3 / 3 - delta * B; trade
    probability does not depend on alpha.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if objective is Objective.TP:
        alpha = (lo + hi) / 2.0
    else:
        direction_sign = 1.0 if direction is Direction.MAX else -1.0
        slope_sign = np.sign(delta) if objective is Objective.PROFIT else -np.sign(delta)
        choice = direction_sign * slope_sign
        alpha = np.where(choice > 0.0, hi, np.where(choice < 0.0, lo, 0.5))
    return float(alpha) if np.ndim(alpha) == 0 else alpha


def _objective_arrays(
    env: SearchEnv, p1: FloatArray, p2: FloatArray, alpha: ArrayLike
) -> dict[Objective, FloatArray]:
    d11, d12, d21, d22, _ = uniform_demands(env.A, p1, p2)
    _, _, sw1, sw2 = uniform_social_values(env.A, env.s, p1, p2)
    profit = p1 * (alpha * d11 + (1.0 - alpha) * d12) + p2 * (alpha * d22 + (1.0 - alpha) * d21)
    sw = alpha * sw1 + (1.0 - alpha) * sw2
    return {
        Objective.PROFIT: profit,
        Objective.TP: 1.0 - p1 * p2,
        Objective.SW: sw,
        Objective.CS: sw - profit,
    }


def value_surface(
    env: SearchEnv,
    p1: ArrayLike,
    p2: ArrayLike,
    objective: Objective,
    direction: Direction,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """
    Vectorised value function J(p1, p2, alpha*(p1, p2)) with the inner alpha chosen optimally.

    Returns:
        (values, alphas, feasible) where feasible marks implementable pairs in the
        nondegenerate region.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    a = env.A
    _, d12, _, d22, bonus = uniform_demands(a, p1, p2)
    m1 = max_rank_two_profit(a, p2)
    m2 = max_rank_two_profit(a, p1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.clip((m1 - p1 * d12) / (p1 * bonus), 0.0, 1.0)
        hi = np.clip(1.0 - (m2 - p2 * d22) / (p2 * bonus), 0.0, 1.0)
    crossed = lo > hi
    middle = (lo + hi) / 2.0
    lo = np.where(crossed, middle, lo)
    hi = np.where(crossed, middle, hi)

    feasible = (
        np.asarray(in_valid_region(a, p1, p2))
        & (np.asarray(uniform_h(a, p1, p2)) <= MEMBERSHIP_TOL)
        & (bonus > DEGENERATE_BONUS_TOL)
        & (p1 > 0.0)
        & (p2 > 0.0)
    )
    alphas = np.asarray(_alpha_choice(objective, direction, p1 - p2, lo, hi))
    values = np.asarray(_objective_arrays(env, p1, p2, alphas)[objective])
    return values, alphas, feasible


def contract_values(env: SearchEnv, c: Contract) -> ObjectiveValues:
    """
    Per-seller profits, trade probability, welfare and consumer surplus of a contract.

    Feasibility is not required; prices must lie in the nondegenerate region.

    Raises:
        DomainError: If prices leave the nondegenerate region.
        ValueError: If alpha is outside [0, 1].
    """
    if not 0.0 <= c.alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {c.alpha}")
    prices = c.prices
    profile = demand_profile(env, prices)
    social = social_values(env, prices)
    a = c.alpha
    profit1 = prices.p1 * (a * profile.d11 + (1.0 - a) * profile.d12)
    profit2 = prices.p2 * (a * profile.d22 + (1.0 - a) * profile.d21)
    profit = profit1 + profit2
    trade_prob = 1.0 - env.dist.cdf(prices.p1) * env.dist.cdf(prices.p2)
    sw = a * social.sw1 + (1.0 - a) * social.sw2
    return ObjectiveValues(
        profit1=profit1,
        profit2=profit2,
        profit=profit,
        trade_prob=trade_prob,
        sw=sw,
        cs=sw - profit,
    )


def optimal_alpha(
    env: SearchEnv, prices: PricePair, objective: Objective, direction: Direction
) -> float:
    """
    Inner search-order choice for fixed prices.

    Profit is linear in alpha with slope (p1 - p2) B, so maximising picks the upper
    end of phi when p1 > p2 and the lower end when p1 < p2. Welfare and consumer
    surplus pick the opposite ends, minimisation mirrors each rule, and equal
    prices (or the trade-probability objective) return the centre of phi.

    Raises:
        Infeasible: If phi(p1, p2) is empty.
    """
    interval = alpha_interval(env, prices)
    if interval.empty:
        raise Infeasible(f"No search order implements prices {prices.as_tuple()}")
    if prices.p1 == prices.p2:
        return 0.5
    return float(_alpha_choice(objective, direction, prices.delta, interval.lo, interval.hi))


def value_at(
    env: SearchEnv, prices: PricePair, objective: Objective, direction: Direction
) -> tuple[float, float]:
    """(objective value, alpha) with alpha chosen by optimal_alpha."""
    alpha = optimal_alpha(env, prices, objective, direction)
    values = contract_values(env, Contract(prices.p1, prices.p2, alpha))
    return values.get(objective), alpha


def symmetric_monopoly_price() -> float:
    """Maximiser of p (1 - p^2) on [0, 1], the joint-profit price under equal prices."""
    result = minimize_scalar(
        lambda p: -(p * (1.0 - p**2)), bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12}
    )
    return float(result.x)


def _first_best_gap(threshold: float, p2: float) -> float:
    return threshold**2 / 2 - threshold + 1 - 2 / (3 * p2) + 2 * p2 - 1.5 * p2**2


def first_best(env: SearchEnv) -> SolveResult:
    """
    Unconstrained joint-profit optimum with seller 1 always searched first.

    The first-order conditions give p1 p2 = 1/3 and a single equation in p2
    solved by brentq on FIRST_BEST_BRACKET.

    Raises:
        NoBracket: If the bracket holds no sign change.
    """
    env.require_uniform("first_best")
    lower, upper = FIRST_BEST_BRACKET
    g_lower, g_upper = _first_best_gap(env.A, lower), _first_best_gap(env.A, upper)
    if g_lower * g_upper > 0.0:
        raise NoBracket(f"First-best condition has no sign change on {FIRST_BEST_BRACKET}")

    p2 = float(brentq(lambda p: _first_best_gap(env.A, p), lower, upper, xtol=1e-15))
    p1 = 1.0 / (3.0 * p2)
    value = float(
        _objective_arrays(env, np.float64(p1), np.float64(p2), 1.0)[Objective.PROFIT]
    )
    if not in_valid_region(env.A, p1, p2):
        logger.info(f"First-best prices ({p1:.6f}, {p2:.6f}) lie outside the region below A")

    contract = Contract(p1=p1, p2=p2, alpha=1.0)
    logger.info(f"First best at A={env.A:.6f}: p1={p1:.8f}, p2={p2:.8f}, profit={value:.10f}")
    return SolveResult(
        objective=Objective.PROFIT,
        direction=Direction.MAX,
        contract=contract,
        value=value,
        regime=Regime.UNCONSTRAINED_FIRST_BEST,
        binding=(),
        mirror=Contract(p1=p2, p2=p1, alpha=0.0),
    )


class _Incumbent:
    """Best candidate so far; later stages must improve by SOLVER_IMPROVEMENT_TOL."""

    def __init__(self) -> None:
        self.score = -math.inf
        self.point: tuple[float, float] | None = None
        self.stage = ""

    def offer(self, stage: str, score: float, p1: float, p2: float) -> None:
        if not math.isfinite(score):
            return
        if self.point is None or score > self.score + SOLVER_IMPROVEMENT_TOL:
            self.score, self.point, self.stage = score, (float(p1), float(p2)), stage


def _restore_feasibility(
    env: SearchEnv, anchor: float, p1: float, p2: float
) -> tuple[float, float] | None:
    """Pull an almost-feasible point back toward the diagonal anchor by bisection."""

    def feasible(x1: float, x2: float) -> bool:
        return bool(in_valid_region(env.A, x1, x2)) and uniform_h(env.A, x1, x2) <= 0.0

    if feasible(p1, p2):
        return p1, p2
    if not feasible(anchor, anchor):
        return None
    t_in, t_out = 0.0, 1.0
    for _ in range(_RESTORE_STEPS):
        t_mid = (t_in + t_out) / 2.0
        if feasible(anchor + t_mid * (p1 - anchor), anchor + t_mid * (p2 - anchor)):
            t_in = t_mid
        else:
            t_out = t_mid
    return anchor + t_in * (p1 - anchor), anchor + t_in * (p2 - anchor)


def _crosses_valid_region(env: SearchEnv) -> bool:
    """True when H <= 0 somewhere on the lines p1 = A or p1 - p2 = 1 - A."""
    a = env.A
    edges = (
        lambda t: float(uniform_h(a, a, t)),
        lambda t: float(uniform_h(a, min(t + 1.0 - a, 1.0), t)),
    )
    for edge in edges:
        trough = minimize_scalar(edge, bounds=(0.0, 1.0), method="bounded")
        if trough.fun <= 0.0:
            return True
    return False


def _certify(
    env: SearchEnv,
    curve: BoundaryCurve,
    objective: Objective,
    direction: Direction,
    resolution: int,
) -> tuple[FloatArray, FloatArray, FloatArray, float, float]:
    """Score the bounding box of P on a resolution x resolution grid."""
    p1_min, p1_max, p2_min, p2_max = curve.bounding_box
    p1_axis = np.linspace(p1_min, min(p1_max, env.A), resolution)
    p2_axis = np.linspace(p2_min, min(p2_max, env.A), resolution)
    grid_p1, grid_p2 = np.meshgrid(p1_axis, p2_axis, indexing="ij")
    values, _, feasible = value_surface(env, grid_p1, grid_p2, objective, direction)
    sign = 1.0 if direction is Direction.MAX else -1.0
    scores = np.where(feasible, sign * values, np.nan)

    step1 = p1_axis[1] - p1_axis[0] if resolution > 1 else 0.0
    step2 = p2_axis[1] - p2_axis[0] if resolution > 1 else 0.0
    if np.all(np.isnan(scores)) or step1 <= 0.0 or step2 <= 0.0:
        lipschitz = 0.0
    else:
        grad1, grad2 = np.gradient(scores, step1, step2)
        slopes = np.hypot(grad1, grad2)
        lipschitz = float(np.nanmax(slopes)) if np.any(np.isfinite(slopes)) else 0.0
    bound = 2.0 * math.hypot(step1, step2) * lipschitz
    return grid_p1, grid_p2, scores, bound, lipschitz


def solve(
    env: SearchEnv,
    objective: Objective,
    direction: Direction,
    resolution: int = CERTIFICATE_RESOLUTION,
    n_rays: int = DEFAULT_BOUNDARY_RAYS,
    starts: int = MULTI_STARTS,
) -> SolveResult:
    """
    Optimal contract over the implementable set.

    The inner alpha is set by optimal_alpha; the outer price search combines a
    diagonal scan, a scan of the traced boundary, SLSQP refinement from the best
    grid cells, and the best grid cell itself. Earlier stages are preferred
    unless a later one improves the objective by more than SOLVER_IMPROVEMENT_TOL.
    Where P reaches past p = A or |p1 - p2| = 1 - A the search is restricted
    to the nondegenerate region and the result is flagged as restricted.

    Args:
        env: Market primitives, uniform match values, s > 0.
        objective: PROFIT, TP, SW or CS.
        direction: MAX or MIN.
        resolution: Side of the certification grid over the bounding box of P.
        n_rays: Rays used to trace the boundary.
        starts: Number of SLSQP starting points.

    Returns:
        SolveResult in canonical order p1 >= p2, with the mirrored optimum and the
        grid certificate.

    Raises:
        Infeasible: If P is empty.
        ValueError: If resolution is below MIN_CERTIFICATE_RESOLUTION.
    """
    env.require_uniform("solve")
    if resolution < MIN_CERTIFICATE_RESOLUTION:
        raise ValueError(
            f"resolution must be at least {MIN_CERTIFICATE_RESOLUTION}, got {resolution}"
        )
    objective, direction = Objective(objective), Direction(direction)
    logger.info(f"Solving {objective.value}/{direction.value} at A={env.A:.6f}, s={env.s:.6f}")

    try:
        curve = trace_boundary(env, n_rays)
    except NoRoot as exc:
        raise Infeasible(f"The implementable set is empty at s={env.s}") from exc

    sign = 1.0 if direction is Direction.MAX else -1.0
    a = env.A

    def score(p1: ArrayLike, p2: ArrayLike) -> FloatArray:
        values, _, feasible = value_surface(env, p1, p2, objective, direction)
        return np.where(feasible, sign * values, -np.inf)

    incumbent = _Incumbent()

    # Diagonal
    p_low, p_high = curve.p_low_diag, curve.p_high_diag
    top = min(p_high, a)
    if top >= p_low:
        for p in (p_low, top):
            incumbent.offer("diagonal", float(score(p, p)), p, p)
        diagonal = np.linspace(p_low, top, DIAGONAL_SCAN_POINTS)
        diagonal_scores = score(diagonal, diagonal)
        k = int(np.argmax(diagonal_scores))
        incumbent.offer("diagonal", float(diagonal_scores[k]), diagonal[k], diagonal[k])
        bracket = (diagonal[max(k - 1, 0)], diagonal[min(k + 1, len(diagonal) - 1)])
        if bracket[1] > bracket[0]:
            polished = minimize_scalar(
                lambda p: -float(score(p, p)),
                bounds=bracket,
                method="bounded",
                options={"xatol": 1e-12},
            )
            incumbent.offer("diagonal", -float(polished.fun), polished.x, polished.x)

    # Boundary arcs
    boundary = curve.as_array()
    boundary_scores = score(boundary[:, 0], boundary[:, 1])
    k = int(np.argmax(boundary_scores))
    incumbent.offer("boundary", float(boundary_scores[k]), boundary[k, 0], boundary[k, 1])

    # Interior refinement from the best grid cells in the half-plane p1 >= p2
    logger.info(f"Certifying on a {resolution}x{resolution} grid")
    grid_p1, grid_p2, grid_scores, bound, lipschitz = _certify(
        env, curve, objective, direction, resolution
    )
    half_scores = np.where(grid_p1 >= grid_p2, grid_scores, np.nan)
    finite = np.isfinite(half_scores)
    start_cells = np.argsort(np.where(finite, half_scores, -np.inf), axis=None)[::-1][:starts]
    anchor = min(curve.anchor.p1, a)

    def neg_value(x: FloatArray) -> float:
        values, _, _ = value_surface(env, x[0], x[1], objective, direction)
        return -sign * float(values)

    constraints = [
        {"type": "ineq", "fun": lambda x: -float(uniform_h(a, x[0], x[1]))},
        {"type": "ineq", "fun": lambda x: a - x[0]},
        {"type": "ineq", "fun": lambda x: x[0] - x[1]},
        {"type": "ineq", "fun": lambda x: (1.0 - a) - (x[0] - x[1])},
    ]
    bounds = ((_PRICE_FLOOR, 1.0), (_PRICE_FLOOR, 1.0))
    for cell in start_cells:
        if not finite.flat[cell]:
            continue
        x0 = np.array([grid_p1.flat[cell], grid_p2.flat[cell]])
        result = minimize(
            neg_value,
            x0,
            method="SLSQP",
            bounds=bounds,
            constraints=constraints,
            options={"ftol": 1e-14, "maxiter": 300},
        )
        if not result.success:
            logger.warning(f"Local polish from {x0} stopped early: {result.message}")
        restored = _restore_feasibility(env, anchor, float(result.x[0]), float(result.x[1]))
        if restored is not None:
            incumbent.offer("interior", float(score(*restored)), *restored)

    grid_best = float(np.nanmax(grid_scores)) if np.any(np.isfinite(grid_scores)) else -math.inf
    if math.isfinite(grid_best):
        cell = int(np.nanargmax(grid_scores))
        incumbent.offer("grid", grid_best, grid_p1.flat[cell], grid_p2.flat[cell])

    if incumbent.point is None:
        raise Infeasible(f"No implementable price pair found at s={env.s}")

    p1, p2 = incumbent.point
    if p1 < p2:
        p1, p2 = p2, p1
    prices = PricePair(p1, p2)
    alpha = optimal_alpha(env, prices, objective, direction)
    contract = Contract(p1=p1, p2=p2, alpha=alpha)
    value = contract_values(env, contract).get(objective)

    h = float(uniform_h(a, p1, p2))
    if abs(p1 - p2) <= SYMMETRY_TOL:
        regime = Regime.SYMMETRIC_DIAGONAL
    elif (
        abs(h) <= REGIME_BOUNDARY_TOL
        or p1 >= a - REGIME_BOUNDARY_TOL
        or p1 - p2 >= 1.0 - a - REGIME_BOUNDARY_TOL
    ):
        regime = Regime.ASYMMETRIC_BOUNDARY
    else:
        regime = Regime.INTERIOR

    certified = (
        math.isfinite(grid_best) and sign * value - grid_best <= bound + SOLVER_IMPROVEMENT_TOL
    )
    certificate = Certificate(
        resolution=resolution,
        grid_value=sign * grid_best,
        bound=bound,
        certified=bool(certified),
    )
    if not certified:
        logger.warning(
            f"Solver value {value:.10f} differs from grid best {sign * grid_best:.10f} "
            f"by more than the bound {bound:.3e} (Lipschitz {lipschitz:.3e})"
        )

    logger.info(
        f"Optimum from {incumbent.stage} stage: ({p1:.8f}, {p2:.8f}, alpha={alpha:.6f}), "
        f"value={value:.10f}, regime={regime.value}"
    )
    return SolveResult(
        objective=objective,
        direction=direction,
        contract=contract,
        value=value,
        regime=regime,
        binding=binding_constraints(env, prices, alpha),
        mirror=contract.mirrored(),
        certificate=certificate,
        restricted=_crosses_valid_region(env),
    )


def critical_threshold(
    bracket: tuple[float, float] = CRITICAL_COST_BRACKET, xtol: float = 1e-12
) -> float:
    """
    Search cost s* at which the highest diagonal root equals sqrt(3)/3.

    Raises:
        NoBracket: If the diagonal-root gap does not change sign on the bracket.
    """

    def gap(s: float) -> float:
        return diagonal_roots(SearchEnv.from_cost(s))[1] - SYMMETRIC_OPTIMUM_PRICE

    lower, upper = bracket
    g_lower, g_upper = gap(lower), gap(upper)
    if g_lower * g_upper > 0.0:
        raise NoBracket(
            f"p_high - sqrt(3)/3 keeps its sign on [{lower}, {upper}]: "
            f"{g_lower:.3e}, {g_upper:.3e}"
        )
    s_star = float(brentq(gap, lower, upper, xtol=xtol))
    logger.info(f"Critical search cost s*={s_star:.10f}, A*={SearchEnv.from_cost(s_star).A:.6f}")
    return s_star


def first_best_attainability_check(
    env: SearchEnv, constrained: SolveResult | None = None
) -> AttainabilityReport:
    """Compare the first best with the seller-optimal implementable contract."""
    best = first_best(env)
    if constrained is None:
        constrained = solve(env, Objective.PROFIT, Direction.MAX)
    gap = best.value - constrained.value
    report = AttainabilityReport(
        first_best_value=best.value,
        constrained_value=constrained.value,
        gap=gap,
        unattainable=gap > SOLVER_IMPROVEMENT_TOL,
    )
    if not report.unattainable:
        logger.warning(f"First-best gap {gap:.3e} is not strictly positive at A={env.A:.6f}")
    return report


def arc_values(
    env: SearchEnv,
    curve: BoundaryCurve,
    objective: Objective,
    start_tag: str,
    end_tag: str,
    direction: Direction = Direction.MAX,
) -> ArcValues:
    """
    Value function along the boundary arc between two tagged points.

    The arc is the stretch of the stored order between the two tags that does
    not wrap past the first point. Points outside the nondegenerate region are
    dropped.
    """
    i, j = sorted((curve.index_of(start_tag), curve.index_of(end_tag)))
    points = curve.as_array()[i : j + 1]
    points = points[np.asarray(in_valid_region(env.A, points[:, 0], points[:, 1]))]
    points = points[np.argsort(points[:, 0], kind="stable")]

    values = np.empty(len(points))
    alphas = np.empty(len(points))
    for k, (p1, p2) in enumerate(points):
        values[k], alphas[k] = value_at(env, PricePair(p1, p2), objective, direction)
    return ArcValues(points=points, values=values, alphas=alphas)
