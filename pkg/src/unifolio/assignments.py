"""Sequential probability assignments over a finite stock alphabet.

The workhorse is the add-one (Laplace) assignment: the mixture of all i.i.d.
models under the uniform prior on the simplex.  In closed form, a sequence
with symbol counts k_1, ..., k_m (n = sum k_j) receives

    q(y^n) = (m-1)! * k_1! * ... * k_m! / (n + m - 1)!

and sequentially the next-symbol probability is (k_j + 1) / (n + m).  The
state-conditional extension runs one independent Laplace estimator per state
and multiplies the per-state factors.

Everything is computed in the log domain through log-gamma, so counts well
beyond the factorial overflow point are exact to float precision.  Batch
values depend on the count table only; sequential predictors reproduce the
batch values by telescoping.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln


class AssignmentError(ValueError):
    """Inconsistent symbols, states, or count tables."""


def _as_symbol_array(symbols, m: int) -> np.ndarray:
    if isinstance(symbols, SymbolSequence):
        if symbols.m != m:
            raise AssignmentError(f"alphabet mismatch: {symbols.m} != {m}")
        return np.asarray(symbols.symbols, dtype=np.int64)
    arr = np.asarray(list(symbols), dtype=np.int64)
    if arr.size and (arr.min() < 1 or arr.max() > m):
        raise AssignmentError(f"symbols must lie in 1..{m}")
    return arr


def _as_state_array(states, S: int) -> np.ndarray:
    if isinstance(states, StateSequence):
        if states.S != S:
            raise AssignmentError(f"state-count mismatch: {states.S} != {S}")
        return np.asarray(states.states, dtype=np.int64)
    arr = np.asarray(list(states), dtype=np.int64)
    if arr.size and (arr.min() < 1 or arr.max() > S):
        raise AssignmentError(f"states must lie in 1..{S}")
    return arr


@dataclass(frozen=True)
class SymbolSequence:
    """A sequence of stock indices, 1-based over an alphabet of size m."""

    symbols: tuple[int, ...]
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise AssignmentError("alphabet size must be at least 2")
        for y in self.symbols:
            if not 1 <= y <= self.m:
                raise AssignmentError(f"symbol {y} outside 1..{self.m}")

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class StateSequence:
    """A sequence of side-information states, 1-based over 1..S."""

    states: tuple[int, ...]
    S: int

    def __post_init__(self):
        if self.S < 1:
            raise AssignmentError("state count must be at least 1")
        for w in self.states:
            if not 1 <= w <= self.S:
                raise AssignmentError(f"state {w} outside 1..{self.S}")

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class CountTable:
    """Per-state, per-symbol counts; the sufficient statistic for everything here.

    counts[s, j] is the number of time steps with state s+1 and symbol j+1.
    """

    m: int
    S: int
    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (self.S, self.m):
            raise AssignmentError(f"count table must be {self.S}x{self.m}, got {arr.shape}")
        if arr.size and arr.min() < 0:
            raise AssignmentError("counts must be nonnegative")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @classmethod
    def empty(cls, m: int, S: int = 1) -> "CountTable":
        return cls(m=m, S=S, counts=np.zeros((S, m), dtype=np.int64))

    @classmethod
    def from_sequences(cls, y, m: int, states=None, S: int = 1) -> "CountTable":
        ys = _as_symbol_array(y, m)
        if states is None:
            ws = np.ones(len(ys), dtype=np.int64)
            S = 1
        else:
            ws = _as_state_array(states, S)
            if len(ws) != len(ys):
                raise AssignmentError("symbol and state sequences differ in length")
        counts = np.zeros((S, m), dtype=np.int64)
        np.add.at(counts, (ws - 1, ys - 1), 1)
        return cls(m=m, S=S, counts=counts)

    @property
    def state_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, state: int, symbol: int) -> "CountTable":
        """Return a new table with one more (state, symbol) observation."""
        if not 1 <= state <= self.S:
            raise AssignmentError(f"state {state} outside 1..{self.S}")
        if not 1 <= symbol <= self.m:
            raise AssignmentError(f"symbol {symbol} outside 1..{self.m}")
        counts = self.counts.copy()
        counts[state - 1, symbol - 1] += 1
        return CountTable(m=self.m, S=self.S, counts=counts)


@dataclass(frozen=True)
class AdditiveKernel:
    """Add-constant smoothing kernel; alpha = 1 is the Laplace assignment.

    The batch probability of a count vector k with n = sum(k) is the Dirichlet
    integral Gamma(m*a)/Gamma(a)^m * prod_j Gamma(k_j + a) / Gamma(n + m*a),
    and the sequential rule is (k_j + a) / (n + m*a).  Only alpha = 1 is used
    by the rest of the package; alpha = 1/2 would give Krichevsky-Trofimov.
    """

    alpha: float = 1.0

    def log_prob(self, k: np.ndarray) -> float:
        k = np.asarray(k, dtype=np.float64)
        m = k.shape[-1]
        n = k.sum(axis=-1)
        a = self.alpha
        return float(
            np.sum(
                gammaln(m * a)
                - m * gammaln(a)
                + np.sum(gammaln(k + a), axis=-1)
                - gammaln(n + m * a)
            )
        )

    def conditional(self, k: np.ndarray, symbol0: int) -> float:
        k = np.asarray(k, dtype=np.float64)
        m = k.shape[-1]
        return float((k[symbol0] + self.alpha) / (k.sum() + m * self.alpha))

    def conditional_row(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        m = k.shape[-1]
        return (k + self.alpha) / (k.sum() + m * self.alpha)


LAPLACE = AdditiveKernel(alpha=1.0)


def laplace_log_prob(counts: CountTable) -> float:
    """Log probability assigned by the add-one estimator to any sequence with these counts."""
    if counts.S != 1:
        raise AssignmentError("laplace_log_prob expects a single-state count table")
    return LAPLACE.log_prob(counts.counts[0])


def laplace_conditional(counts: CountTable, next_symbol: int) -> float:
    """Next-symbol probability (k_j + 1) / (n + m) given single-state counts so far."""
    if counts.S != 1:
        raise AssignmentError("laplace_conditional expects a single-state count table")
    if not 1 <= next_symbol <= counts.m:
        raise AssignmentError(f"symbol {next_symbol} outside 1..{counts.m}")
    return LAPLACE.conditional(counts.counts[0], next_symbol - 1)


def statewise_laplace_log_prob(y, w, m: int | None = None, S: int | None = None) -> float:
    """Product over states of the add-one probability of that state's subsequence."""
    if isinstance(y, SymbolSequence) and m is None:
        m = y.m
    if isinstance(w, StateSequence) and S is None:
        S = w.S
    if m is None or S is None:
        raise AssignmentError("alphabet and state sizes required")
    table = CountTable.from_sequences(y, m, states=w, S=S)
    return float(sum(LAPLACE.log_prob(row) for row in table.counts))


def statewise_laplace_conditional(counts: CountTable, state: int, next_symbol: int) -> float:
    """Add-one conditional computed from the given state's row of the count table."""
    if not 1 <= state <= counts.S:
        raise AssignmentError(f"state {state} outside 1..{counts.S}")
    if not 1 <= next_symbol <= counts.m:
        raise AssignmentError(f"symbol {next_symbol} outside 1..{counts.m}")
    return LAPLACE.conditional(counts.counts[state - 1], next_symbol - 1)


class SequentialPredictor(ABC):
    """One logical prediction stream: call step(side) for the next-symbol
    distribution, then observe(symbol) to consume the realized symbol."""

    @abstractmethod
    def step(self, side=None) -> np.ndarray: ...

    @abstractmethod
    def observe(self, symbol: int) -> None: ...


class SequentialAssignment(ABC):
    """A conditional probability assignment over symbol sequences.

    Implementations expose an exact batch log probability and a stateful
    sequential predictor whose conditionals telescope to the batch value.
    ``side`` carries whatever per-step side information the assignment uses
    (ignored, discrete states, or continuous points).
    """

    m: int

    @abstractmethod
    def log_prob(self, symbols, side=None) -> float: ...

    @abstractmethod
    def predictor(self) -> SequentialPredictor: ...


class LaplaceAssignment(SequentialAssignment):
    """Add-one mixture of i.i.d. models; side information is ignored."""

    def __init__(self, m: int):
        if m < 2:
            raise AssignmentError("alphabet size must be at least 2")
        self.m = m

    def log_prob(self, symbols, side=None) -> float:
        ys = _as_symbol_array(symbols, self.m)
        counts = np.bincount(ys - 1, minlength=self.m)
        return LAPLACE.log_prob(counts)

    def predictor(self) -> "LaplacePredictor":
        return LaplacePredictor(self.m)


class LaplacePredictor(SequentialPredictor):
    def __init__(self, m: int):
        self.m = m
        self._counts = np.zeros(m, dtype=np.int64)

    def step(self, side=None) -> np.ndarray:
        return LAPLACE.conditional_row(self._counts)

    def observe(self, symbol: int) -> None:
        self._counts[symbol - 1] += 1


class StatewiseLaplaceAssignment(SequentialAssignment):
    """Independent add-one estimator per state; side entries are states in 1..S."""

    def __init__(self, m: int, S: int):
        if m < 2 or S < 1:
            raise AssignmentError("need m >= 2 and S >= 1")
        self.m = m
        self.S = S

    def log_prob(self, symbols, side=None) -> float:
        if side is None:
            raise AssignmentError("state sequence required")
        return statewise_laplace_log_prob(symbols, side, m=self.m, S=self.S)

    def predictor(self) -> "StatewiseLaplacePredictor":
        return StatewiseLaplacePredictor(self.m, self.S)


class StatewiseLaplacePredictor(SequentialPredictor):
    def __init__(self, m: int, S: int):
        self.m = m
        self.S = S
        self._counts = np.zeros((S, m), dtype=np.int64)
        self._pending_state: int | None = None

    def step(self, side=None) -> np.ndarray:
        state = int(side)
        if not 1 <= state <= self.S:
            raise AssignmentError(f"state {state} outside 1..{self.S}")
        self._pending_state = state
        return LAPLACE.conditional_row(self._counts[state - 1])

    def observe(self, symbol: int) -> None:
        if self._pending_state is None:
            raise AssignmentError("observe() before step()")
        self._counts[self._pending_state - 1, symbol - 1] += 1
        self._pending_state = None


class IidAssignment(SequentialAssignment):
    """Fixed i.i.d. model p(y) = theta_y; the reference class member."""

    def __init__(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.ndim != 1 or theta.size < 2:
            raise AssignmentError("theta must be a weight vector of length >= 2")
        if theta.min() < 0 or abs(theta.sum() - 1.0) > 1e-9:
            raise AssignmentError("theta must be a probability vector")
        self.theta = theta
        self.m = theta.size

    def log_prob(self, symbols, side=None) -> float:
        ys = _as_symbol_array(symbols, self.m)
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(self.theta[ys - 1])))

    def predictor(self) -> SequentialPredictor:
        outer = self

        class _P(SequentialPredictor):
            def step(self, side=None):
                return outer.theta.copy()

            def observe(self, symbol):
                pass

        return _P()


class StatewiseIidAssignment(SequentialAssignment):
    """Fixed state-wise i.i.d. model; side entries are states in 1..S."""

    def __init__(self, thetas):
        thetas = np.asarray(thetas, dtype=np.float64)
        if thetas.ndim != 2:
            raise AssignmentError("thetas must be an S x m matrix")
        if thetas.min() < 0 or np.abs(thetas.sum(axis=1) - 1.0).max() > 1e-9:
            raise AssignmentError("each row of thetas must be a probability vector")
        self.thetas = thetas
        self.S, self.m = thetas.shape

    def log_prob(self, symbols, side=None) -> float:
        ys = _as_symbol_array(symbols, self.m)
        ws = _as_state_array(side, self.S)
        if len(ws) != len(ys):
            raise AssignmentError("symbol and state sequences differ in length")
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(self.thetas[ws - 1, ys - 1])))

    def predictor(self) -> SequentialPredictor:
        outer = self

        class _P(SequentialPredictor):
            def step(self, side=None):
                return outer.thetas[int(side) - 1].copy()

            def observe(self, symbol):
                pass

        return _P()


def sequence_log_prob_from_predictor(assignment: SequentialAssignment, symbols, side=None) -> float:
    """Telescoped log probability: the sum of log conditionals along the stream."""
    pred = assignment.predictor()
    total = 0.0
    for i, y in enumerate(symbols):
        entry = None if side is None else side[i]
        cond = pred.step(entry)
        total += math.log(cond[y - 1])
        pred.observe(y)
    return total
