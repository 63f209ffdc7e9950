"""Monte Carlo wealth simulation for the mixture portfolios.

The mixture portfolios' cumulative wealth is an average of plain CRP wealths
over the uniform prior (per state, per covering representative, per epoch),
so it can be estimated by drawing CRPs uniformly from the simplex, running
buy-and-hold over the draws, and averaging realized wealth.  This estimates
cumulative wealth only; no per-round weights are produced.

Estimates are unbiased in the wealth domain.  Reported standard errors are
delta-method errors of the log estimate: sd(W) / (mean(W) sqrt(N)), computed
on max-shifted values so horizon length cannot overflow.  Draw streams are
split deterministically per state, representative, and epoch, so a config
gives bit-identical results regardless of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covering import FunctionClass, SideInfoSample, minimal_covering
from .epoch_mixture import epoch_segments
from .portfolio import MarketSequence, PortfolioError

_PROD_CHUNK = 32  # days per linear-domain product chunk; bounds the dynamic range


@dataclass(frozen=True)
class McConfig:
    """Sample count per covering representative, seed, and epoch-detail flag."""

    samples: int
    seed: int = 0
    epoch_breakdown: bool = True

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("need at least one Monte Carlo sample")


@dataclass
class McResult:
    """Log-wealth estimate with a delta-method standard error.

    ``per_epoch`` (present for the epoch-doubling strategy) lists one entry
    per epoch: {'j', 'ell', 'log_factor'}; j = 0 is the exact uniform first
    day.  ``degenerate_draws`` counts sampled CRPs with zero realized wealth.
    """

    log_wealth: float
    stderr: float
    per_epoch: list[dict] | None = None
    degenerate_draws: int = 0

    def to_json_dict(self) -> dict:
        out = {
            "log_wealth": self.log_wealth,
            "stderr": self.stderr,
            "degenerate_draws": self.degenerate_draws,
        }
        if self.per_epoch is not None:
            out["per_epoch"] = self.per_epoch
        return out


def sample_uniform_simplex(m: int, rng: np.random.Generator) -> np.ndarray:
    """One draw from the uniform density on the m-simplex (flat Dirichlet)."""
    if m < 2:
        raise ValueError("need at least two coordinates")
    return rng.dirichlet(np.ones(m))


def _crp_log_wealths(thetas: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Per-draw log wealth of CRPs ``thetas`` (N x m) on market ``rows`` (n x m).

    Daily gains are 1 + theta . (x - 1) (equal to theta . x but exact on
    all-ones days), produced by a single augmented matrix product in float32;
    chunked day products are accumulated in float64 before taking logs.  The
    single-precision gains cost ~1e-7 relative error per day, orders below
    Monte Carlo noise at any feasible sample count, and cut the bandwidth of
    the dominant inner loop in half.
    """
    N, m = thetas.shape
    n = rows.shape[0]
    augT = np.empty((m + 1, N), dtype=np.float32)
    augT[:m] = thetas.T
    augT[m] = 1.0
    block = np.empty((n, m + 1), dtype=np.float32)
    block[:, :m] = rows - 1.0
    block[:, m] = 1.0
    gains = block @ augT  # (days, draws); day-axis reductions vectorize
    out = np.zeros(N)
    for a in range(0, n, _PROD_CHUNK):
        part = gains[a : a + _PROD_CHUNK].prod(axis=0, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            # cancellation can leave a -1e-7-sized gain where the true gain
            # is 0; such draws have no wealth either way
            out += np.log(np.maximum(part, 0.0))
    return out


def _log_mean_exp_se(log_values: np.ndarray) -> tuple[float, float, int]:
    """Log of the sample mean of exp(values), its delta-method SE, and the
    count of -inf entries."""
    n = log_values.size
    degenerate = int(np.isneginf(log_values).sum())
    peak = log_values.max()
    if peak == -np.inf:
        return -math.inf, math.inf, degenerate
    w = np.exp(log_values - peak)
    mean = w.mean()
    if n > 1:
        se = float(w.std(ddof=1) / (mean * math.sqrt(n)))
    else:
        se = math.inf
    return float(peak + math.log(mean)), se, degenerate


def _spawn_rngs(seed_seq: np.random.SeedSequence, k: int) -> list[np.random.Generator]:
    return [np.random.default_rng(child) for child in seed_seq.spawn(k)]


def _statewise_estimate(
    market: MarketSequence, states: np.ndarray, S: int, n_samples: int, seed_seq
) -> tuple[float, float, int]:
    """Log wealth of the state-conditional mixture strategy on one market segment.

    Independent uniform draws per state; per-state log estimates add, and the
    per-state delta-method errors combine in quadrature.  Empty states
    contribute a factor of one.
    """
    m = market.n_stocks
    rngs = _spawn_rngs(seed_seq, S)
    total, var, degenerate = 0.0, 0.0, 0
    for s in range(1, S + 1):
        rows = market.relatives[states == s]
        if rows.shape[0] == 0:
            continue
        thetas = rngs[s - 1].dirichlet(np.ones(m), size=n_samples)
        log_est, se, dg = _log_mean_exp_se(_crp_log_wealths(thetas, rows))
        total += log_est
        var += se * se
        degenerate += dg
    return total, math.sqrt(var), degenerate


def mc_wealth_up(market: MarketSequence, config: McConfig) -> McResult:
    """Estimate the uniform-mixture CRP portfolio's log wealth (no side information)."""
    states = np.ones(market.n_days, dtype=np.int64)
    log_w, se, dg = _statewise_estimate(
        market, states, 1, config.samples, np.random.SeedSequence(config.seed)
    )
    return McResult(log_wealth=log_w, stderr=se, degenerate_draws=dg)


def mc_wealth_statewise(market: MarketSequence, states, config: McConfig) -> McResult:
    """Estimate the state-conditional mixture portfolio's log wealth."""
    ws = np.asarray(list(states), dtype=np.int64)
    if len(ws) != market.n_days:
        raise PortfolioError("state sequence length differs from market length")
    S = int(ws.max()) if len(ws) else 1
    log_w, se, dg = _statewise_estimate(
        market, ws, S, config.samples, np.random.SeedSequence(config.seed)
    )
    return McResult(log_wealth=log_w, stderr=se, degenerate_draws=dg)


def mc_wealth_epoch_mixture(
    market: MarketSequence,
    side: SideInfoSample,
    function_class: FunctionClass,
    config: McConfig,
) -> McResult:
    """Estimate the epoch-doubling covering-mixture portfolio's log wealth.

    Per epoch: cover the class with respect to the side-info prefix, estimate
    each representative's state-conditional wealth of the epoch segment with
    ``config.samples`` fresh draws, average the representatives' wealths
    uniformly, and accumulate the log factors (selling out at epoch ends).
    The first day's uniform factor is exact.
    """
    n = market.n_days
    if len(side) != n:
        raise PortfolioError("side-information length differs from market length")
    if n == 0:
        return McResult(0.0, 0.0, per_epoch=[])
    root = np.random.SeedSequence(config.seed)
    with np.errstate(divide="ignore"):
        first = float(np.log(market.relatives[0].mean()))
    per_epoch = [{"j": 0, "ell": 1, "log_factor": first}]
    total, var, degenerate = first, 0.0, 0
    segments = epoch_segments(n)
    epoch_seqs = root.spawn(len(segments))
    for j, (start, end) in enumerate(segments, start=1):
        covering = minimal_covering(function_class, side.prefix(start - 1))
        seg_market = market.window(start - 1, end)
        seg_side = side.window(start - 1, end)
        rep_seqs = epoch_seqs[j - 1].spawn(covering.ell)
        rep_logs = np.empty(covering.ell)
        rep_ses = np.empty(covering.ell)
        for k, rep in enumerate(covering.representatives):
            labels = rep.states(seg_side)
            rep_logs[k], rep_ses[k], dg = _statewise_estimate(
                seg_market, labels, rep.n_states, config.samples, rep_seqs[k]
            )
            degenerate += dg
        peak = rep_logs.max()
        if peak == -np.inf:
            log_factor, se = -math.inf, math.inf
        else:
            w = np.exp(rep_logs - peak)
            mean = w.mean()
            log_factor = float(peak + math.log(mean))
            # sd of the uniform average of independent estimates, relative to it;
            # zero-wealth representatives contribute nothing to the average's sd
            contrib = np.where(w > 0, rep_ses, 0.0) * w
            se = float(math.sqrt(np.sum(contrib ** 2)) / w.sum())
        per_epoch.append({"j": j, "ell": covering.ell, "log_factor": log_factor})
        total += log_factor
        var += se * se
    return McResult(
        log_wealth=total,
        stderr=math.sqrt(var),
        per_epoch=per_epoch if config.epoch_breakdown else None,
        degenerate_draws=degenerate,
    )
