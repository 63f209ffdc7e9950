"""Wealth computations for rebalanced portfolios and probability-induced strategies.

A market is a sequence of daily price-relative rows x_t (end price over start
price per stock).  A constant rebalanced portfolio (CRP) plays a fixed simplex
weight vector every day; a state-CRP plays one weight vector per discrete
state.  A sequential probability assignment p induces a portfolio whose
cumulative wealth equals sum_y p(y^n) x(y^n), the p-weighted mixture of the
single-stock-path wealths; that identity is the basis of the exact
small-horizon oracles here.

All wealth values are log wealth (natural log); zero daily gains yield -inf
rather than an error, since price relatives are allowed to be zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as iter_product

import numpy as np
from scipy.special import logsumexp

from .assignments import SequentialAssignment, _as_state_array
from .covering import FunctionClass, SideInfoSample, minimal_covering
from .epoch_mixture import epoch_segments

BRUTE_FORCE_LIMIT = 2 ** 24


class PortfolioError(ValueError):
    """Dimension or validity errors in market/portfolio inputs."""


class InfeasibleExactError(RuntimeError):
    """Exact enumeration would exceed the brute-force budget; use the Monte Carlo path."""


@dataclass(frozen=True)
class MarketSequence:
    """n x m matrix of nonnegative price relatives; every day has a positive entry."""

    relatives: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.relatives, dtype=np.float64)
        if arr.ndim != 2:
            raise PortfolioError("market must be an (n, m) array of price relatives")
        if arr.shape[1] < 2:
            raise PortfolioError("need at least two stocks")
        if arr.size:
            if arr.min() < 0:
                raise PortfolioError("price relatives must be nonnegative")
            if (arr.max(axis=1) <= 0).any():
                raise PortfolioError("every day needs at least one positive price relative")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "relatives", arr)

    @property
    def n_days(self) -> int:
        return self.relatives.shape[0]

    @property
    def n_stocks(self) -> int:
        return self.relatives.shape[1]

    def prefix(self, k: int) -> "MarketSequence":
        return MarketSequence(self.relatives[:k])

    def window(self, start: int, stop: int) -> "MarketSequence":
        return MarketSequence(self.relatives[start:stop])


@dataclass(frozen=True)
class SimplexVector:
    """Nonnegative weights summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.weights, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise PortfolioError("weights must be a vector")
        if arr.min() < 0:
            raise PortfolioError("weights must be nonnegative")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise PortfolioError(f"weights sum to {arr.sum()!r}, not 1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    @classmethod
    def uniform(cls, m: int) -> "SimplexVector":
        return cls(np.full(m, 1.0 / m))

    @property
    def m(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class StateCRP:
    """One simplex weight vector per state, stacked as an S x m matrix."""

    thetas: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.thetas, dtype=np.float64)
        if arr.ndim != 2:
            raise PortfolioError("state-CRP weights must be an S x m matrix")
        for row in arr:
            SimplexVector(row)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "thetas", arr)

    @classmethod
    def uniform(cls, S: int, m: int) -> "StateCRP":
        return cls(np.full((S, m), 1.0 / m))

    @property
    def S(self) -> int:
        return self.thetas.shape[0]

    @property
    def m(self) -> int:
        return self.thetas.shape[1]


@dataclass(frozen=True)
class WealthTrajectory:
    """Per-day log wealth factors and their running sum."""

    daily_log_factors: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.daily_log_factors, dtype=np.float64).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "daily_log_factors", arr)

    @property
    def log_wealth(self) -> float:
        return float(self.daily_log_factors.sum())

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.daily_log_factors)


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def extremal_log_wealth(market: MarketSequence, symbols) -> float:
    """log x(y^n): the wealth of going all-in on stock y_t each day."""
    ys = np.asarray(list(symbols), dtype=np.int64)
    if len(ys) != market.n_days:
        raise PortfolioError("symbol path length differs from market length")
    return float(_log(market.relatives[np.arange(len(ys)), ys - 1]).sum())


def crp_trajectory(theta: SimplexVector, market: MarketSequence) -> WealthTrajectory:
    if theta.m != market.n_stocks:
        raise PortfolioError("weight dimension differs from stock count")
    # 1 + theta . (x - 1) equals theta . x but is exact on an all-ones day
    gains = 1.0 + (market.relatives - 1.0) @ theta.weights
    return WealthTrajectory(_log(np.maximum(gains, 0.0)))


def crp_wealth(theta: SimplexVector, market: MarketSequence) -> float:
    """Log wealth of the constant rebalanced portfolio theta."""
    return crp_trajectory(theta, market).log_wealth


def state_crp_trajectory(crp: StateCRP, market: MarketSequence, states) -> WealthTrajectory:
    ws = _as_state_array(states, crp.S)
    if len(ws) != market.n_days:
        raise PortfolioError("state sequence length differs from market length")
    if crp.m != market.n_stocks:
        raise PortfolioError("weight dimension differs from stock count")
    gains = 1.0 + np.einsum("ij,ij->i", market.relatives - 1.0, crp.thetas[ws - 1])
    return WealthTrajectory(_log(np.maximum(gains, 0.0)))


def state_crp_wealth(crp: StateCRP, market: MarketSequence, states) -> float:
    """Log wealth of playing theta_{w_t} on day t."""
    return state_crp_trajectory(crp, market, states).log_wealth


def trajectory_table(trajectories: dict[str, WealthTrajectory]) -> list[dict]:
    """Aligned cumulative log-wealth rows: [{'t': 1, '<name>': ...}, ...]."""
    lengths = {len(tr.daily_log_factors) for tr in trajectories.values()}
    if len(lengths) > 1:
        raise PortfolioError("trajectories have different lengths")
    n = lengths.pop() if lengths else 0
    cums = {name: tr.cumulative() for name, tr in trajectories.items()}
    return [
        {"t": t + 1, **{name: float(c[t]) for name, c in cums.items()}}
        for t in range(n)
    ]


def wealth_product_form(weights_fn, market: MarketSequence) -> float:
    """Log of the day-by-day product of portfolio gains for an arbitrary strategy.

    ``weights_fn(prefix_rows)`` must return the weight vector played after
    having seen ``prefix_rows`` (an array of the strictly prior market rows).
    """
    total = 0.0
    for t in range(market.n_days):
        w = np.asarray(weights_fn(market.relatives[:t]), dtype=np.float64)
        gain = 1.0 + w @ (market.relatives[t] - 1.0)
        total += float(_log(np.array([max(gain, 0.0)]))[0])
    return total


def wealth_sum_form(weights_fn, market: MarketSequence) -> float:
    """The same wealth via the distributive expansion over all stock paths."""
    n, m = market.n_days, market.n_stocks
    if m ** n > BRUTE_FORCE_LIMIT:
        raise InfeasibleExactError(
            f"{m}^{n} stock paths exceed the exact budget; use the Monte Carlo estimators"
        )
    step_weights = [
        np.asarray(weights_fn(market.relatives[:t]), dtype=np.float64) for t in range(n)
    ]
    terms = []
    for path in iter_product(range(m), repeat=n):
        logw = 0.0
        for t, j in enumerate(path):
            logw += float(_log(np.array([step_weights[t][j] * market.relatives[t, j]]))[0])
        terms.append(logw)
    return float(logsumexp(terms))


def _batch_log_probs(assignment: SequentialAssignment, paths, side) -> np.ndarray:
    return np.array([assignment.log_prob(list(p), side) for p in paths])


def induced_portfolio_exact(
    assignment: SequentialAssignment, market_prefix: MarketSequence, side_prefix=None
) -> SimplexVector:
    """Exact next-day weights of the portfolio induced by a probability assignment.

    The weight on stock j is proportional to
    sum over histories y^{t-1} of p(y^{t-1} j || side^t) * x(y^{t-1}),
    enumerated by brute force; feasible only while m^t stays within budget.
    """
    m = assignment.m
    t = market_prefix.n_days + 1
    if m ** t > BRUTE_FORCE_LIMIT:
        raise InfeasibleExactError(
            f"{m}^{t} histories exceed the exact budget; use the Monte Carlo estimators"
        )
    if side_prefix is not None and len(side_prefix) < t:
        raise PortfolioError(f"need side information through step {t}")
    if side_prefix is None:
        side_t = None
    elif isinstance(side_prefix, SideInfoSample):
        side_t = side_prefix.prefix(t)
    else:
        side_t = side_prefix[:t]
    log_terms = np.full(m, -np.inf)
    histories = list(iter_product(range(1, m + 1), repeat=t - 1))
    log_x = np.array([extremal_log_wealth(market_prefix, h) for h in histories])
    for j in range(1, m + 1):
        logs = [
            assignment.log_prob(list(h) + [j], side_t) + lx
            for h, lx in zip(histories, log_x)
            if lx > -np.inf
        ]
        log_terms[j - 1] = logsumexp(logs) if logs else -np.inf
    norm = logsumexp(log_terms)
    if norm == -np.inf:
        raise PortfolioError("all histories have zero wealth; induced weights undefined")
    return SimplexVector(np.exp(log_terms - norm))


def induced_wealth_exact(
    assignment: SequentialAssignment, market: MarketSequence, side=None
) -> float:
    """Exact log wealth of the induced portfolio: log sum_y p(y || side) x(y)."""
    n, m = market.n_days, market.n_stocks
    if assignment.m != m:
        raise PortfolioError("assignment alphabet differs from stock count")
    if m ** n > BRUTE_FORCE_LIMIT:
        raise InfeasibleExactError(
            f"{m}^{n} stock paths exceed the exact budget; use the Monte Carlo estimators"
        )
    if n == 0:
        return 0.0
    terms = []
    for path in iter_product(range(1, m + 1), repeat=n):
        lx = extremal_log_wealth(market, path)
        if lx == -np.inf:
            continue
        terms.append(assignment.log_prob(list(path), side) + lx)
    return float(logsumexp(terms)) if terms else -np.inf


def induced_trajectory(
    assignment: SequentialAssignment, market: MarketSequence, side=None
) -> WealthTrajectory:
    """Daily log gains of the induced portfolio, via the exact weights at each step."""
    factors = []
    for t in range(market.n_days):
        w = induced_portfolio_exact(assignment, market.prefix(t), side)
        gain = 1.0 + w.weights @ (market.relatives[t] - 1.0)
        factors.append(float(_log(np.array([max(gain, 0.0)]))[0]))
    return WealthTrajectory(np.array(factors))


def _best_crp_two_stock(rows: np.ndarray, tol: float) -> np.ndarray:
    """Exact two-stock log-optimal weights by bisection on the concave objective.

    The derivative of sum_t log(theta*x1 + (1-theta)*x2) in theta is monotone
    decreasing, so its sign isolates the maximizer to machine precision.
    """
    d = rows[:, 0] - rows[:, 1]

    def deriv(theta: float) -> float:
        gains = theta * rows[:, 0] + (1 - theta) * rows[:, 1]
        if (gains <= 0).any():
            bad = gains <= 0
            return math.inf if d[bad].sum() > 0 else -math.inf
        return float((d / gains).sum())

    eps = 1e-15
    d_lo, d_hi = deriv(eps), deriv(1 - eps)
    if d_lo <= 0 <= d_hi:
        # monotone derivative pinched at zero: the objective is flat and any
        # weights are optimal, so keep the uniform vector
        return np.array([0.5, 0.5])
    if d_lo <= 0:
        return np.array([0.0, 1.0])
    if d_hi >= 0:
        return np.array([1.0, 0.0])
    lo, hi = eps, 1 - eps
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if deriv(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    theta = 0.5 * (lo + hi)
    return np.array([theta, 1.0 - theta])


def _best_crp_multiplicative(rows: np.ndarray, tol: float, max_iters: int) -> np.ndarray:
    """Log-optimal weights by the multiplicative fixed-point ascent.

    theta <- theta * mean_t(x_t / (theta . x_t)), which preserves the simplex
    and never decreases the concave objective; a halving backstop guards the
    rare numerical non-increase.
    """
    m = rows.shape[1]
    theta = np.full(m, 1.0 / m)

    def objective(th: np.ndarray) -> float:
        return float(_log(rows @ th).sum())

    obj = objective(theta)
    for _ in range(max_iters):
        gains = rows @ theta
        grad = (rows / gains[:, None]).mean(axis=0)
        candidate = theta * grad
        s = candidate.sum()
        if not np.isfinite(s) or s <= 0:
            break
        candidate /= s
        new_obj = objective(candidate)
        halvings = 0
        while not (new_obj >= obj - 1e-13) and halvings < 60:
            candidate = 0.5 * (candidate + theta)
            new_obj = objective(candidate)
            halvings += 1
        if new_obj - obj < tol:
            theta, obj = candidate, new_obj
            break
        theta, obj = candidate, new_obj
    return theta


def best_state_crp(
    market: MarketSequence, states, S: int | None = None, tol: float = 1e-9, max_iters: int = 100_000
) -> tuple[StateCRP, float]:
    """Hindsight-optimal state-CRP: per state, maximize sum log(theta . x_t).

    Deterministic (uniform initialization, no randomness).  States with no
    days keep the uniform vector, since any weights are optimal there.  Two
    stocks are solved exactly by bisection; more stocks use the multiplicative
    ascent with tolerance ``tol`` on the objective.
    """
    ws = np.asarray(list(states), dtype=np.int64)
    if len(ws) != market.n_days:
        raise PortfolioError("state sequence length differs from market length")
    if S is None:
        S = int(ws.max()) if len(ws) else 1
    m = market.n_stocks
    thetas = np.full((S, m), 1.0 / m)
    for s in range(1, S + 1):
        rows = market.relatives[ws == s]
        if rows.shape[0] == 0:
            continue
        if m == 2:
            thetas[s - 1] = _best_crp_two_stock(rows, tol)
        else:
            thetas[s - 1] = _best_crp_multiplicative(rows, tol, max_iters)
    crp = StateCRP(thetas)
    return crp, state_crp_wealth(crp, market, ws)


def best_crp(market: MarketSequence, tol: float = 1e-9) -> tuple[SimplexVector, float]:
    """Hindsight-optimal single CRP over the whole market."""
    crp, wealth = best_state_crp(market, np.ones(market.n_days, dtype=np.int64), S=1, tol=tol)
    return SimplexVector(crp.thetas[0]), wealth


# ---------------------------------------------------------------------------
# Exact two-stock wealth of the mixture portfolios via Gauss-Legendre nodes.
# For m = 2 the uniform-prior mixture wealth is a one-dimensional integral of
# a degree-n polynomial in theta, which K >= n/2 + 1 nodes integrate exactly.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _unit_gauss_legendre(k: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(k)
    w = w / w.sum()  # exact mass one on [0, 1]
    return (x + 1.0) / 2.0, w


def universal_crp_wealth_two_stock(market: MarketSequence) -> float:
    """Exact log of integral_0^1 prod_t (theta x_t1 + (1-theta) x_t2) dtheta."""
    if market.n_stocks != 2:
        raise PortfolioError("two-stock quadrature path needs exactly 2 stocks")
    n = market.n_days
    if n == 0:
        return 0.0
    nodes, weights = _unit_gauss_legendre(n // 2 + 1)
    gains = 1.0 + np.outer(nodes, market.relatives[:, 0] - 1.0) + np.outer(
        1 - nodes, market.relatives[:, 1] - 1.0
    )
    log_s = _log(np.maximum(gains, 0.0)).sum(axis=1)
    log_w = np.log(weights)
    return float(logsumexp(log_s + log_w) - logsumexp(log_w))


def statewise_universal_wealth_two_stock(market: MarketSequence, states) -> float:
    """Exact log wealth of the state-conditional mixture portfolio (two stocks)."""
    ws = np.asarray(list(states), dtype=np.int64)
    if len(ws) != market.n_days:
        raise PortfolioError("state sequence length differs from market length")
    total = 0.0
    for s in np.unique(ws):
        total += universal_crp_wealth_two_stock(MarketSequence(market.relatives[ws == s]))
    return total


def epoch_mixture_wealth_two_stock(
    market: MarketSequence, side: SideInfoSample, function_class: FunctionClass
) -> tuple[float, list[dict]]:
    """Exact log wealth of the epoch-doubling covering-mixture portfolio (two stocks).

    Returns the total and a per-epoch breakdown [{'j', 'ell', 'log_factor'}],
    with j = 0 the uniform first day.
    """
    if market.n_stocks != 2:
        raise PortfolioError("two-stock quadrature path needs exactly 2 stocks")
    n = market.n_days
    if len(side) != n:
        raise PortfolioError("side-information length differs from market length")
    if n == 0:
        return 0.0, []
    first = float(_log(np.array([market.relatives[0].mean()]))[0])
    breakdown = [{"j": 0, "ell": 1, "log_factor": first}]
    total = first
    for j, (start, end) in enumerate(epoch_segments(n), start=1):
        covering = minimal_covering(function_class, side.prefix(start - 1))
        seg_market = market.window(start - 1, end)
        seg_side = side.window(start - 1, end)
        per_rep = np.array(
            [
                statewise_universal_wealth_two_stock(seg_market, rep.states(seg_side))
                for rep in covering.representatives
            ]
        )
        log_factor = float(logsumexp(per_rep) - math.log(covering.ell))
        breakdown.append({"j": j, "ell": covering.ell, "log_factor": log_factor})
        total += log_factor
    return total, breakdown
