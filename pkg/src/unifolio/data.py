"""Market data ingestion, synthetic process generation, and side-information extraction.

CSV contract: header ``date,ticker1,ticker2,...``, one row per trading day,
ISO dates strictly increasing, strictly positive adjusted prices.  Split and
dividend adjustment is the data supplier's responsibility.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date as _date, timedelta
from pathlib import Path
from typing import Callable, IO, Sequence, Union

import numpy as np

from .covering import SideInfoSample
from .empirical import DisagreementOracle
from .portfolio import MarketSequence


class IngestError(ValueError):
    """Malformed market CSV; message carries the offending line number."""


@dataclass(frozen=True)
class PriceTable:
    """Date-ordered adjusted prices per ticker."""

    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.prices, dtype=np.float64)
        if arr.shape != (len(self.dates), len(self.tickers)):
            raise IngestError("price matrix shape does not match dates/tickers")
        if arr.size and arr.min() <= 0:
            raise IngestError("prices must be strictly positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "prices", arr)

    @property
    def n_rows(self) -> int:
        return len(self.dates)


def ingest_csv(source: Union[str, Path, IO[str]]) -> PriceTable:
    """Parse and validate a price CSV from a path or an open text stream."""
    if isinstance(source, (str, Path)):
        with open(source, "r", newline="") as fh:
            return _ingest(fh)
    return _ingest(source)


def ingest_csv_text(text: str) -> PriceTable:
    return _ingest(io.StringIO(text))


def _ingest(stream: IO[str]) -> PriceTable:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("line 1: empty file") from None
    if not header or header[0].strip().lower() != "date":
        raise IngestError("line 1: header must start with 'date'")
    tickers = tuple(h.strip() for h in header[1:])
    if not tickers:
        raise IngestError("line 1: no ticker columns")
    dates: list[str] = []
    rows: list[list[float]] = []
    prev: _date | None = None
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 1 + len(tickers):
            raise IngestError(
                f"line {lineno}: expected {1 + len(tickers)} fields, got {len(row)}"
            )
        try:
            day = _date.fromisoformat(row[0].strip())
        except ValueError:
            raise IngestError(f"line {lineno}: unparsable date {row[0]!r}") from None
        if prev is not None and day <= prev:
            raise IngestError(f"line {lineno}: dates must be strictly increasing")
        prev = day
        vals = []
        for name, cell in zip(tickers, row[1:]):
            try:
                p = float(cell)
            except ValueError:
                raise IngestError(f"line {lineno}: unparsable price {cell!r} for {name}") from None
            if not math.isfinite(p) or p <= 0:
                raise IngestError(f"line {lineno}: nonpositive price {cell!r} for {name}")
            vals.append(p)
        dates.append(day.isoformat())
        rows.append(vals)
    if not rows:
        raise IngestError("line 2: no data rows")
    return PriceTable(tuple(dates), tickers, np.array(rows))


def to_price_relatives(table: PriceTable) -> MarketSequence:
    """Day-over-day price ratios; n = rows - 1."""
    if table.n_rows < 2:
        raise IngestError("need at least two price rows to form relatives")
    return MarketSequence(table.prices[1:] / table.prices[:-1])


def write_price_csv(table: PriceTable, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *table.tickers])
        for d, row in zip(table.dates, table.prices):
            writer.writerow([d, *[repr(float(p)) for p in row]])


# ---------------------------------------------------------------------------
# Synthetic market processes
# ---------------------------------------------------------------------------


class ProcessError(ValueError):
    """Invalid synthetic process parameters."""


@dataclass(frozen=True)
class IidMarket:
    """i.i.d. price-relative vectors: a finite support with probabilities, or
    log-normal coordinates exp(mu_i + sigma_i * eps)."""

    seed: int = 0
    atoms: tuple[tuple[float, ...], ...] | None = None
    probs: tuple[float, ...] | None = None
    mu: tuple[float, ...] | None = None
    sigma: tuple[float, ...] | None = None

    def __post_init__(self):
        discrete = self.atoms is not None
        lognormal = self.mu is not None
        if discrete == lognormal:
            raise ProcessError("specify exactly one of atoms/probs or mu/sigma")
        if discrete:
            if self.probs is None or len(self.probs) != len(self.atoms):
                raise ProcessError("need one probability per atom")
            if abs(sum(self.probs) - 1.0) > 1e-9 or min(self.probs) < 0:
                raise ProcessError("atom probabilities must form a distribution")
            dims = {len(a) for a in self.atoms}
            if len(dims) != 1:
                raise ProcessError("atoms must share a dimension")
            if min(min(a) for a in self.atoms) < 0:
                raise ProcessError("price relatives must be nonnegative")
        else:
            if self.sigma is None or len(self.sigma) != len(self.mu):
                raise ProcessError("need one sigma per mu")

    @property
    def m(self) -> int:
        return len(self.atoms[0]) if self.atoms is not None else len(self.mu)

    def to_dict(self) -> dict:
        out = {"kind": "iid", "seed": self.seed}
        if self.atoms is not None:
            out.update(atoms=[list(a) for a in self.atoms], probs=list(self.probs))
        else:
            out.update(mu=list(self.mu), sigma=list(self.sigma))
        return out


@dataclass(frozen=True)
class MarkovMarket:
    """Order-k Markov price relatives with a built-in minorized kernel.

    The next row is, with probability ``ball_prob``, uniform in the radius
    ``ball_eps`` ball around the previous row (so the transition density is
    bounded below by ball_prob/vol(ball) on that ball), and otherwise a
    log-normal drift pulled toward the all-ones row.  Values are floored at a
    small positive constant; the stationary regime never approaches it.
    """

    m: int = 2
    order: int = 1
    ball_eps: float = 0.05
    ball_prob: float = 0.3
    drift: float = 0.5
    sigma: float = 0.05
    burn_in: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.m < 2 or self.order < 1:
            raise ProcessError("need m >= 2 and order >= 1")
        if not 0 < self.ball_prob < 1 or self.ball_eps <= 0:
            raise ProcessError("ball component needs prob in (0,1) and eps > 0")
        if not 0 <= self.drift <= 1:
            raise ProcessError("drift must lie in [0, 1]")
        if self.burn_in < 0:
            raise ProcessError("burn-in must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "kind": "markov",
            "m": self.m,
            "order": self.order,
            "ball_eps": self.ball_eps,
            "ball_prob": self.ball_prob,
            "drift": self.drift,
            "sigma": self.sigma,
            "burn_in": self.burn_in,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ArMixing:
    """AR(1) latent factor u_t = phi u_{t-1} + sigma eps_t driving a two-stock
    market, with the factor's previous value exposed as scalar side info.

    Started from the stationary marginal, so the process is stationary from
    step one; geometric correlation decay makes it the mixing surrogate."""

    phi: float = 0.6
    sigma: float = 0.3
    loading: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not -1 < self.phi < 1:
            raise ProcessError("AR coefficient must lie in (-1, 1)")
        if self.sigma <= 0:
            raise ProcessError("noise scale must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": "ar_mixing",
            "phi": self.phi,
            "sigma": self.sigma,
            "loading": self.loading,
            "seed": self.seed,
        }


ProcessSpec = Union[IidMarket, MarkovMarket, ArMixing]


def parse_process_spec(d: dict) -> ProcessSpec:
    kind = d.get("kind")
    params = {k: v for k, v in d.items() if k != "kind"}
    if kind == "iid":
        if "atoms" in params:
            params["atoms"] = tuple(tuple(a) for a in params["atoms"])
            params["probs"] = tuple(params["probs"])
        else:
            params["mu"] = tuple(params["mu"])
            params["sigma"] = tuple(params["sigma"])
        return IidMarket(**params)
    if kind == "markov":
        return MarkovMarket(**params)
    if kind == "ar_mixing":
        return ArMixing(**params)
    raise ProcessError(f"unknown process kind: {kind!r}")


@dataclass(frozen=True)
class GeneratedProcess:
    market: MarketSequence
    side: SideInfoSample | None = None


def generate(spec: ProcessSpec, n: int) -> GeneratedProcess:
    """Draw n days from the process; seed-deterministic."""
    if n < 1:
        raise ProcessError("horizon must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    if isinstance(spec, IidMarket):
        if spec.atoms is not None:
            idx = rng.choice(len(spec.atoms), size=n, p=np.asarray(spec.probs))
            rows = np.asarray(spec.atoms, dtype=np.float64)[idx]
        else:
            eps = rng.standard_normal((n, spec.m))
            rows = np.exp(np.asarray(spec.mu) + np.asarray(spec.sigma) * eps)
        return GeneratedProcess(MarketSequence(rows))
    if isinstance(spec, MarkovMarket):
        return GeneratedProcess(_generate_markov(spec, n, rng))
    if isinstance(spec, ArMixing):
        market, side = _generate_ar(spec, n, rng)
        return GeneratedProcess(market, side)
    raise ProcessError(f"unknown process spec: {spec!r}")


def _uniform_ball(rng: np.random.Generator, center: np.ndarray, eps: float) -> np.ndarray:
    d = center.size
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    radius = eps * rng.random() ** (1.0 / d)
    return center + radius * direction


def _generate_markov(spec: MarkovMarket, n: int, rng: np.random.Generator) -> MarketSequence:
    total = n + spec.burn_in
    rows = np.empty((total, spec.m))
    prev = np.ones(spec.m)
    for t in range(total):
        if rng.random() < spec.ball_prob:
            nxt = _uniform_ball(rng, prev, spec.ball_eps)
        else:
            center = (1 - spec.drift) * np.log(prev)
            nxt = np.exp(center + spec.sigma * rng.standard_normal(spec.m))
        rows[t] = np.maximum(nxt, 1e-3)
        prev = rows[t]
    return MarketSequence(rows[spec.burn_in :])


def _generate_ar(spec: ArMixing, n: int, rng: np.random.Generator):
    stat_sd = spec.sigma / math.sqrt(1 - spec.phi * spec.phi)
    u = np.empty(n + 1)
    u[0] = stat_sd * rng.standard_normal()
    eps = rng.standard_normal(n)
    for t in range(1, n + 1):
        u[t] = spec.phi * u[t - 1] + spec.sigma * eps[t - 1]
    noise = 0.01 * rng.standard_normal((n, 2))
    rows = np.exp(
        np.column_stack([spec.loading * u[1:], -spec.loading * u[1:]]) + noise
    )
    # side info for day t is the factor value from day t-1 (causal)
    return MarketSequence(rows), SideInfoSample(u[:-1])


# ---------------------------------------------------------------------------
# Scalar side-information processes for the empirical diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SideProcess:
    """A scalar stationary side-information process with a known marginal."""

    kind: str
    value: float = 0.0
    phi: float = 0.6
    sigma: float = 0.3
    grid: float = 0.05

    def sampler(self) -> Callable[[int, np.random.Generator], SideInfoSample]:
        if self.kind == "uniform":
            return lambda n, rng: SideInfoSample(rng.random(n))
        if self.kind == "constant":
            return lambda n, rng: SideInfoSample(np.full(n, self.value))
        if self.kind == "ar1":
            spec = self

            def sample(n: int, rng: np.random.Generator) -> SideInfoSample:
                stat_sd = spec.sigma / math.sqrt(1 - spec.phi * spec.phi)
                u = np.empty(n)
                u[0] = stat_sd * rng.standard_normal()
                eps = rng.standard_normal(n - 1) if n > 1 else np.empty(0)
                for t in range(1, n):
                    u[t] = spec.phi * u[t - 1] + spec.sigma * eps[t - 1]
                # quantize to a grid: a discrete-valued mixing process whose
                # marginal is still known exactly through the normal CDF
                return SideInfoSample(spec.grid * np.floor(u / spec.grid))

            return sample
        raise ProcessError(f"unknown side process kind: {self.kind!r}")

    def oracle(self) -> DisagreementOracle:
        if self.kind == "uniform":
            return DisagreementOracle.from_cdf(lambda a: float(np.clip(a, 0.0, 1.0)))
        if self.kind == "constant":
            return DisagreementOracle.from_point(self.value)
        if self.kind == "ar1":
            from scipy.stats import norm

            stat_sd = self.sigma / math.sqrt(1 - self.phi * self.phi)
            g = self.grid

            def cdf(a: float) -> float:
                # P(grid*floor(u/grid) < a) = P(u < grid*ceil(a/grid))
                return float(norm.cdf(g * math.ceil(a / g), scale=stat_sd))

            return DisagreementOracle.from_cdf(cdf)
        raise ProcessError(f"unknown side process kind: {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "constant":
            out["value"] = self.value
        if self.kind == "ar1":
            out.update(phi=self.phi, sigma=self.sigma, grid=self.grid)
        return out


def parse_side_process(d: dict) -> SideProcess:
    kind = d.get("kind")
    if kind not in ("uniform", "constant", "ar1"):
        raise ProcessError(f"unknown side process kind: {kind!r}")
    return SideProcess(**d)


# ---------------------------------------------------------------------------
# Side-information extraction from the market itself
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarPrevFirst:
    """z_t is yesterday's price relative of the first stock (1.0 on day one)."""

    def to_dict(self) -> dict:
        return {"mode": "prev-first"}


@dataclass(frozen=True)
class HistorySuffix:
    """z_t is the flattened concatenation of the previous k market rows,
    padded with all-ones rows before day k+1."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ProcessError("history length must be >= 1")

    def to_dict(self) -> dict:
        return {"mode": f"history:{self.k}"}


SideMode = Union[ScalarPrevFirst, HistorySuffix]


def parse_side_mode(text: str) -> SideMode:
    if text == "prev-first":
        return ScalarPrevFirst()
    if text.startswith("history:"):
        return HistorySuffix(int(text.split(":", 1)[1]))
    raise ProcessError(f"unknown side mode: {text!r}")


def extract_side_info(market: MarketSequence, mode: SideMode) -> SideInfoSample:
    """Causal side information: z_t depends on rows strictly before day t."""
    n, m = market.n_days, market.n_stocks
    if isinstance(mode, ScalarPrevFirst):
        z = np.ones(n)
        if n > 1:
            z[1:] = market.relatives[:-1, 0]
        return SideInfoSample(z)
    if isinstance(mode, HistorySuffix):
        k = mode.k
        padded = np.vstack([np.ones((k, m)), market.relatives])
        out = np.empty((n, m * k))
        for t in range(n):
            out[t] = padded[t : t + k].reshape(-1)
        return SideInfoSample(out)
    raise ProcessError(f"unknown side mode: {mode!r}")


# ---------------------------------------------------------------------------
# Shipped synthetic fixture: a two-stock market whose regime is readable from
# yesterday's first price relative through the threshold at 1.0
# ---------------------------------------------------------------------------


def two_stock_regime_market(
    n: int,
    seed: int = 0,
    up_gain: float = 1.06,
    down_gain: float = 0.95,
    persistence: float = 0.85,
    noise: float = 0.01,
) -> MarketSequence:
    """Markov regime-switching relatives: in the 'up' regime stock one gains
    and stock two loses, reversed in the 'down' regime, with the regime
    persisting with the given probability.  Yesterday's first relative is
    above one exactly when yesterday's regime was 'up', so a threshold at 1.0
    on that value recovers the regime despite the multiplicative noise."""
    if not 0 < persistence < 1:
        raise ProcessError("persistence must lie in (0, 1)")
    if noise < 0 or up_gain * math.exp(-4 * noise) <= 1 or down_gain * math.exp(4 * noise) >= 1:
        raise ProcessError("gains must stay on their side of 1.0 under the noise")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    regime = 1  # start in 'up'
    rows = np.empty((n, 2))
    for t in range(n):
        if rng.random() >= persistence:
            regime = 1 - regime
        hi, lo = (up_gain, down_gain) if regime == 1 else (down_gain, up_gain)
        e = np.clip(rng.standard_normal(2), -4.0, 4.0)
        rows[t] = (hi * math.exp(noise * e[0]), lo * math.exp(noise * e[1]))
    return MarketSequence(rows)


def two_stock_regime_prices(
    n: int, seed: int = 0, start: float = 100.0, first_date: str = "2012-01-02", **kwargs
) -> PriceTable:
    """Price table (n + 1 rows) whose relatives are the regime-switching market."""
    market = two_stock_regime_market(n, seed=seed, **kwargs)
    prices = np.vstack([np.full(2, start), start * np.cumprod(market.relatives, axis=0)])
    d0 = _date.fromisoformat(first_date)
    dates = tuple((d0 + timedelta(days=i)).isoformat() for i in range(n + 1))
    return PriceTable(dates, ("ALPHA", "BETA"), prices)
