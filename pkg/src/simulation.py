"""
Monte-Carlo consumer simulation, search algorithms and pure-strategy equilibrium checks.

The simulator is the independent oracle for the analytic demand layer: consumers
draw match values, are ranked by the search algorithm and follow the optimal
stopping rule with free recall.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import minimize_scalar

from src.deviation import deviation_price
from src.model import (
    ArrayLike,
    FloatArray,
    PricePair,
    SearchEnv,
    clamped_first_demand,
    clamped_second_demand,
)
from src.optimiser import Contract
from src.settings import (
    BEST_RESPONSE_GRID,
    CONTRACT_PRICE_TOL,
    CUTOFF_TIE_TOL,
    DEFAULT_CONSUMERS,
    DEFAULT_SEED,
    EQUILIBRIUM_MAX_ITER,
    EQUILIBRIUM_TOL,
    NASH_GRID,
    NASH_TOL,
    OFF_PATH_ALPHA,
    RNG_ALGORITHM,
    SIMULATION_BLOCK_SIZE,
    UNDERCUT_STEP,
)

logger = logging.getLogger(__name__)


class AlgorithmKind(str, Enum):
    PROMINENCE = "PROMINENCE"
    RANDOM = "RANDOM"
    PRICE_DIRECTED = "PRICE_DIRECTED"
    CONTRACT = "CONTRACT"
    CUSTOM = "CUSTOM"


@dataclass(frozen=True)
class SearchAlgorithm:
    """Committed map from posted prices to the probability that seller 1 is inspected first."""

    kind: AlgorithmKind
    favored: int = 1
    tie_alpha: float = 0.5
    contract: Contract | None = None
    off_path_alpha: float = OFF_PATH_ALPHA
    table: RegularGridInterpolator | None = field(default=None, compare=False, repr=False)

    @classmethod
    def prominence(cls, favored: int = 1) -> SearchAlgorithm:
        if favored not in (1, 2):
            raise ValueError(f"favored must be 1 or 2, got {favored}")
        return cls(AlgorithmKind.PROMINENCE, favored=favored)

    @classmethod
    def random(cls) -> SearchAlgorithm:
        return cls(AlgorithmKind.RANDOM)

    @classmethod
    def price_directed(cls, tie_alpha: float = 0.5) -> SearchAlgorithm:
        return cls(AlgorithmKind.PRICE_DIRECTED, tie_alpha=tie_alpha)

    @classmethod
    def from_contract(
        cls, contract: Contract, off_path_alpha: float = OFF_PATH_ALPHA
    ) -> SearchAlgorithm:
        return cls(AlgorithmKind.CONTRACT, contract=contract, off_path_alpha=off_path_alpha)

    @classmethod
    def custom(
        cls, p1_axis: FloatArray, p2_axis: FloatArray, alphas: FloatArray
    ) -> SearchAlgorithm:
        """Tabulated map, read by nearest-neighbour lookup."""
        table = RegularGridInterpolator(
            (np.asarray(p1_axis, dtype=float), np.asarray(p2_axis, dtype=float)),
            np.clip(np.asarray(alphas, dtype=float), 0.0, 1.0),
            method="nearest",
            bounds_error=False,
            fill_value=None,
        )
        return cls(AlgorithmKind.CUSTOM, table=table)

    @property
    def label(self) -> str:
        if self.kind is AlgorithmKind.PROMINENCE:
            return f"PROMINENCE({self.favored})"
        return self.kind.value

    def alpha(self, p1: ArrayLike, p2: ArrayLike) -> ArrayLike:
        """Probability that seller 1 is ranked first, vectorised over prices."""
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        shape = np.broadcast(p1, p2).shape

        match self.kind:
            case AlgorithmKind.PROMINENCE:
                out = np.full(shape, 1.0 if self.favored == 1 else 0.0)
            case AlgorithmKind.RANDOM:
                out = np.full(shape, 0.5)
            case AlgorithmKind.PRICE_DIRECTED:
                out = np.where(p1 < p2, 1.0, np.where(p1 > p2, 0.0, self.tie_alpha))
            case AlgorithmKind.CONTRACT:
                c = self.contract
                if c is None:
                    raise ValueError("CONTRACT algorithm needs a contract")
                on1 = np.abs(p1 - c.p1) <= CONTRACT_PRICE_TOL
                on2 = np.abs(p2 - c.p2) <= CONTRACT_PRICE_TOL
                out = np.select(
                    [on1 & on2, on1, on2],
                    [c.alpha, 1.0, 0.0],
                    default=self.off_path_alpha,
                )
            case AlgorithmKind.CUSTOM:
                if self.table is None:
                    raise ValueError("CUSTOM algorithm needs a table")
                p1b, p2b = np.broadcast_arrays(p1, p2)
                out = self.table(np.column_stack([p1b.ravel(), p2b.ravel()])).reshape(shape)

        out = np.clip(np.asarray(out, dtype=float), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EmpiricalOutcome:
    """Simulated demands, profits and welfare with their standard errors."""

    n: int
    seed: int
    alpha: float
    d11: float
    d12: float
    d21: float
    d22: float
    demand1: float
    demand2: float
    profit1: float
    profit2: float
    profit: float
    sw: float
    cs: float
    trade_prob: float
    std_errors: dict[str, float]

    @property
    def bonus(self) -> float:
        return self.d11 - self.d12

    @property
    def bonus_se(self) -> float:
        return math.hypot(self.std_errors["d11"], self.std_errors["d12"])

    def to_dict(self) -> dict[str, Any]:
        record = asdict(self)
        record["std_errors"] = dict(self.std_errors)
        return record


@dataclass(frozen=True)
class WelfareGap:
    """SW1 - SW2 estimated on common random numbers."""

    estimate: float
    std_error: float
    n: int
    seed: int


@dataclass(frozen=True)
class BestGain:
    price: float
    gain: float


@dataclass(frozen=True)
class VerificationReport:
    is_equilibrium: bool
    seller1: BestGain
    seller2: BestGain
    grid_n: int
    tol: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(getattr(np.random, RNG_ALGORITHM)(seed))


def _consumer_choices(
    env: SearchEnv,
    prices: PricePair,
    u1: FloatArray,
    u2: FloatArray,
    one_first: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Apply the stopping rule to a batch of consumers.

    A consumer who cannot buy at the first seller still searches only while the
    second price is below A.

    Returns:
        (buys_from_1, buys_from_2, searched) boolean arrays.
    """
    p1, p2 = prices.p1, prices.p2
    u_first = np.where(one_first, u1, u2)
    u_second = np.where(one_first, u2, u1)
    p_first = np.where(one_first, p1, p2)
    p_second = np.where(one_first, p2, p1)

    surplus_first = u_first - p_first
    surplus_second = u_second - p_second
    never = u_first <= p_first
    buy_now = ~never & (surplus_first - (env.A - p_second) > CUTOFF_TIE_TOL)
    searched = ~buy_now & (p_second < env.A)

    take_second = searched & (surplus_second > np.maximum(surplus_first, 0.0))
    take_first = ~take_second & (surplus_first > 0.0)
    buys1 = np.where(one_first, take_first, take_second)
    buys2 = np.where(one_first, take_second, take_first)
    return buys1, buys2, searched


def _welfare(
    env: SearchEnv,
    u1: FloatArray,
    u2: FloatArray,
    buys1: np.ndarray,
    buys2: np.ndarray,
    searched: np.ndarray,
) -> FloatArray:
    return np.where(buys1, u1, 0.0) + np.where(buys2, u2, 0.0) - env.s * searched


def _block_sizes(n: int, block_size: int) -> list[int]:
    full, rest = divmod(n, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _share_and_se(hits: float, trials: float) -> tuple[float, float]:
    if trials == 0:
        return math.nan, math.nan
    share = hits / trials
    return share, math.sqrt(share * (1.0 - share) / trials)


def _mean_and_se(total: float, total_sq: float, n: int) -> tuple[float, float]:
    mean = total / n
    variance = max(total_sq / n - mean**2, 0.0)
    return mean, math.sqrt(variance / n)


def simulate(
    env: SearchEnv,
    prices: PricePair,
    alpha: float,
    n: int = DEFAULT_CONSUMERS,
    seed: int = DEFAULT_SEED,
    block_size: int = SIMULATION_BLOCK_SIZE,
) -> EmpiricalOutcome:
    """
    Simulate n consumers facing a price pair and a search order.

    Each consumer draws (u1, u2) uniformly, is ranked with seller 1 first with
    probability alpha, inspects the first seller for free and pays s for the
    second. Blocks are seeded from SeedSequence(seed).spawn, and block totals
    are summed, so the result does not depend on block order.

    Args:
        env: Market primitives.
        prices: Posted prices; the corner behaviour applies automatically when a
            price reaches A.
        alpha: Probability that seller 1 is inspected first.
        n: Number of consumers.
        seed: Seed of the counter-based generator.
        block_size: Consumers per generator block.

    Returns:
        EmpiricalOutcome with rank-conditional and total demands.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")

    logger.info(
        f"Simulating {n} consumers at prices {prices.as_tuple()} with alpha={alpha} "
        f"(seed {seed}, {RNG_ALGORITHM})"
    )
    sizes = _block_sizes(n, block_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    counts = dict.fromkeys(
        ("first1", "b1_first1", "b2_first1", "b1_first2", "b2_first2", "buy1", "buy2", "trade"),
        0,
    )
    sw_sum = sw_sq = cs_sum = cs_sq = 0.0

    for size, child in zip(sizes, children, strict=True):
        rng = _rng(child)
        u = rng.random((size, 2))
        one_first = rng.random(size) < alpha
        buys1, buys2, searched = _consumer_choices(env, prices, u[:, 0], u[:, 1], one_first)

        counts["first1"] += int(one_first.sum())
        counts["b1_first1"] += int((buys1 & one_first).sum())
        counts["b2_first1"] += int((buys2 & one_first).sum())
        counts["b1_first2"] += int((buys1 & ~one_first).sum())
        counts["b2_first2"] += int((buys2 & ~one_first).sum())
        counts["buy1"] += int(buys1.sum())
        counts["buy2"] += int(buys2.sum())
        counts["trade"] += int((buys1 | buys2).sum())

        welfare = _welfare(env, u[:, 0], u[:, 1], buys1, buys2, searched)
        surplus = welfare - prices.p1 * buys1 - prices.p2 * buys2
        sw_sum += float(welfare.sum())
        sw_sq += float((welfare**2).sum())
        cs_sum += float(surplus.sum())
        cs_sq += float((surplus**2).sum())

    first2 = n - counts["first1"]
    d11, se11 = _share_and_se(counts["b1_first1"], counts["first1"])
    d22, se22 = _share_and_se(counts["b2_first1"], counts["first1"])
    d21, se21 = _share_and_se(counts["b2_first2"], first2)
    d12, se12 = _share_and_se(counts["b1_first2"], first2)
    demand1, se1 = _share_and_se(counts["buy1"], n)
    demand2, se2 = _share_and_se(counts["buy2"], n)
    trade, se_trade = _share_and_se(counts["trade"], n)
    sw, se_sw = _mean_and_se(sw_sum, sw_sq, n)
    cs, se_cs = _mean_and_se(cs_sum, cs_sq, n)

    profit1, profit2 = prices.p1 * demand1, prices.p2 * demand2
    return EmpiricalOutcome(
        n=n,
        seed=seed,
        alpha=alpha,
        d11=d11,
        d12=d12,
        d21=d21,
        d22=d22,
        demand1=demand1,
        demand2=demand2,
        profit1=profit1,
        profit2=profit2,
        profit=profit1 + profit2,
        sw=sw,
        cs=cs,
        trade_prob=trade,
        std_errors={
            "d11": se11,
            "d12": se12,
            "d21": se21,
            "d22": se22,
            "demand1": se1,
            "demand2": se2,
            "profit1": prices.p1 * se1,
            "profit2": prices.p2 * se2,
            "sw": se_sw,
            "cs": se_cs,
            "trade_prob": se_trade,
        },
    )


def simulate_welfare_gap(
    env: SearchEnv,
    prices: PricePair,
    n: int = DEFAULT_CONSUMERS,
    seed: int = DEFAULT_SEED,
    block_size: int = SIMULATION_BLOCK_SIZE,
) -> WelfareGap:
    """SW1 - SW2 with each consumer's draws replayed under both search orders."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    sizes = _block_sizes(n, block_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    total = total_sq = 0.0
    for size, child in zip(sizes, children, strict=True):
        u = _rng(child).random((size, 2))
        gaps = np.zeros(size)
        for one_first, sign in ((True, 1.0), (False, -1.0)):
            order = np.full(size, one_first)
            buys1, buys2, searched = _consumer_choices(env, prices, u[:, 0], u[:, 1], order)
            gaps += sign * _welfare(env, u[:, 0], u[:, 1], buys1, buys2, searched)
        total += float(gaps.sum())
        total_sq += float((gaps**2).sum())
    estimate, std_error = _mean_and_se(total, total_sq, n)
    logger.info(f"Welfare gap SW1 - SW2 = {estimate:.3e} +/- {std_error:.1e}")
    return WelfareGap(estimate=estimate, std_error=std_error, n=n, seed=seed)


def seller_profit(
    env: SearchEnv, algorithm: SearchAlgorithm, seller: int, own: ArrayLike, rival: float
) -> ArrayLike:
    """
    Expected profit of one seller under an algorithm, vectorised over its own price.

    Demands are clamped at the search cutoff, so deviations far from the rival
    price are scored with the demand consumers actually generate.
    """
    own = np.asarray(own, dtype=float)
    a = env.A
    if seller == 1:
        alpha_first = np.asarray(algorithm.alpha(own, rival))
    elif seller == 2:
        alpha_first = 1.0 - np.asarray(algorithm.alpha(rival, own))
    else:
        raise ValueError(f"seller must be 1 or 2, got {seller}")
    first = clamped_first_demand(a, own, rival)
    second = clamped_second_demand(a, rival, own)
    profit = own * (alpha_first * first + (1.0 - alpha_first) * second)
    return float(profit) if np.ndim(profit) == 0 else profit


def _deviation_candidates(env: SearchEnv, rival: float, grid_n: int) -> FloatArray:
    upper = min(env.A, 1.0)
    extra = [rival - UNDERCUT_STEP, rival + UNDERCUT_STEP, float(deviation_price(env.A, rival))]
    grid = np.concatenate([np.linspace(0.0, upper, grid_n), extra])
    return np.unique(grid[(grid >= 0.0) & (grid <= upper)])


def verify_nash(
    env: SearchEnv,
    algorithm: SearchAlgorithm,
    prices: PricePair,
    grid_n: int = NASH_GRID,
    tol: float = NASH_TOL,
) -> VerificationReport:
    """
    Check every unilateral grid deviation on [0, min(A, 1)].

    Besides the grid, each seller also tries the closed-form rank-two deviation
    and prices one step either side of the rival's price.
    """
    env.require_uniform("verify_nash")
    best: list[BestGain] = []
    for seller, own, rival in ((1, prices.p1, prices.p2), (2, prices.p2, prices.p1)):
        current = float(seller_profit(env, algorithm, seller, own, rival))
        candidates = _deviation_candidates(env, rival, grid_n)
        candidates = candidates[np.abs(candidates - own) > CONTRACT_PRICE_TOL]
        profits = np.asarray(seller_profit(env, algorithm, seller, candidates, rival))
        k = int(np.argmax(profits))
        best.append(BestGain(price=float(candidates[k]), gain=float(profits[k]) - current))

    report = VerificationReport(
        is_equilibrium=all(item.gain <= tol for item in best),
        seller1=best[0],
        seller2=best[1],
        grid_n=grid_n,
        tol=tol,
    )
    logger.info(
        f"{algorithm.label} at {prices.as_tuple()}: equilibrium={report.is_equilibrium}, "
        f"gains=({best[0].gain:.3e}, {best[1].gain:.3e})"
    )
    return report


def best_response(
    env: SearchEnv,
    algorithm: SearchAlgorithm,
    seller: int,
    rival: float,
    grid_n: int = BEST_RESPONSE_GRID,
) -> float:
    """Coarse grid bracketing on [0, A] followed by golden-section refinement."""
    grid = np.linspace(0.0, env.A, grid_n)
    profits = np.asarray(seller_profit(env, algorithm, seller, grid, rival))
    k = int(np.argmax(profits))
    best_price, best_profit = float(grid[k]), float(profits[k])

    def negative(p: float) -> float:
        return -float(seller_profit(env, algorithm, seller, p, rival))

    lower, upper = grid[max(k - 1, 0)], grid[min(k + 1, grid_n - 1)]
    try:
        if not 0 < k < grid_n - 1:
            raise ValueError("grid maximum on the edge of [0, A]")
        result = minimize_scalar(
            negative, bracket=(lower, grid[k], upper), method="golden", options={"xtol": 1e-12}
        )
    except ValueError:
        result = minimize_scalar(
            negative, bounds=(lower, upper), method="bounded", options={"xatol": 1e-12}
        )
    if lower <= result.x <= upper and -result.fun > best_profit:
        best_price = float(result.x)
    return best_price


def find_equilibrium(
    env: SearchEnv,
    algorithm: SearchAlgorithm,
    start: PricePair,
    max_iter: int = EQUILIBRIUM_MAX_ITER,
    tol: float = EQUILIBRIUM_TOL,
) -> PricePair | None:
    """
    Alternating best-response dynamics.

    Returns:
        The converged price pair when it passes verify_nash, otherwise None with a
        warning.
    """
    env.require_uniform("find_equilibrium")
    p1, p2 = start.p1, start.p2
    for iteration in range(1, max_iter + 1):
        new_p1 = best_response(env, algorithm, 1, p2)
        new_p2 = best_response(env, algorithm, 2, new_p1)
        moved = max(abs(new_p1 - p1), abs(new_p2 - p2))
        p1, p2 = new_p1, new_p2
        if moved < tol:
            logger.info(
                f"{algorithm.label}: converged after {iteration} rounds at ({p1:.8f}, {p2:.8f})"
            )
            break
    else:
        logger.warning(f"{algorithm.label}: best responses did not converge in {max_iter} rounds")
        return None

    equilibrium = PricePair(p1, p2)
    if not verify_nash(env, algorithm, equilibrium).is_equilibrium:
        logger.warning(
            f"{algorithm.label}: fixed point {equilibrium.as_tuple()} fails verification"
        )
        return None
    return equilibrium
