"""Epoch-doubling covering-mixture probability assignment.

Time steps are split into doubling epochs: step 1 gets the uniform 1/m
distribution, and epoch j covers steps 2^(j-1)+1 .. 2^j.  At the start of
epoch j the function class is reduced to a minimal empirical covering with
respect to all side information observed so far (a prefix of length 2^(j-1)),
and within the epoch the assignment is the uniform mixture, over covering
representatives, of state-conditional Laplace assignments applied to the
epoch's own segment.  Counts restart at every epoch boundary, so the joint
probability factorizes exactly across epochs.

Horizons that are not powers of two simply truncate the last epoch; this
leaves every earlier factor unchanged because the mixture is prefix
consistent within an epoch.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .assignments import LAPLACE, SequentialAssignment, SequentialPredictor, AssignmentError
from .covering import (
    EmpiricalCovering,
    FunctionClass,
    SideInfoSample,
    ThresholdFunction,
    labelings,
    minimal_covering,
)


class EpochError(RuntimeError):
    """Epoch bookkeeping misuse: rolling mid-epoch or stepping past a boundary."""


def epoch_index(step: int) -> int:
    """Epoch j containing a step >= 2, i.e. the j with 2^(j-1) < step <= 2^j."""
    if step < 2:
        raise EpochError("step 1 has no epoch; epochs start at step 2")
    return int(math.ceil(math.log2(step)))


def epoch_segments(n: int) -> list[tuple[int, int]]:
    """1-based inclusive (start, end) per epoch, truncated at horizon n.

    Step 1 is not part of any epoch; for n = 8 this returns
    [(2, 2), (3, 4), (5, 8)].
    """
    if n < 1:
        raise EpochError("horizon must be >= 1")
    out = []
    start = 2
    while start <= n:
        end = min(2 * (start - 1), n)
        out.append((start, end))
        start = 2 * (start - 1) + 1
    return out


class CoveringMixtureState:
    """Within-epoch mixture state over one covering.

    Tracks, per representative, the (state, symbol) counts of the epoch
    segment so far and the accumulated segment log probability.  The mixture
    conditional is the exp(L_k)-weighted average of per-representative
    add-one conditionals, aggregated with a max-subtracted log-sum-exp.
    """

    def __init__(self, covering: EmpiricalCovering, m: int, capacity: int):
        self.covering = covering
        self.m = m
        self.capacity = capacity
        S = max(r.n_states for r in covering.representatives)
        self._counts = np.zeros((covering.ell, S, m), dtype=np.int64)
        self._seg_logprob = np.zeros(covering.ell, dtype=np.float64)
        self._steps_seen = 0
        self._pending_states: np.ndarray | None = None
        if all(isinstance(r, ThresholdFunction) for r in covering.representatives):
            self._thresholds = np.array([r.threshold for r in covering.representatives])
        else:
            self._thresholds = None

    @property
    def ell(self) -> int:
        return self.covering.ell

    def _rep_states(self, side_entry) -> np.ndarray:
        if self._thresholds is not None:
            z0 = float(np.atleast_1d(np.asarray(side_entry, dtype=np.float64))[0])
            return 1 + (z0 >= self._thresholds).astype(np.int64)
        point = SideInfoSample(np.atleast_2d(np.asarray(side_entry, dtype=np.float64)))
        return np.array([r.states(point)[0] for r in self.covering.representatives])

    def _conditional_rows(self, rep_states: np.ndarray) -> np.ndarray:
        rows = self._counts[np.arange(self.ell), rep_states - 1, :].astype(np.float64)
        return (rows + 1.0) / (rows.sum(axis=1, keepdims=True) + self.m)

    def conditional(self, side_entry) -> np.ndarray:
        """Mixture next-symbol distribution given the current step's side info."""
        if self._steps_seen >= self.capacity:
            raise EpochError("epoch exhausted; roll a fresh covering before stepping on")
        rep_states = self._rep_states(side_entry)
        conds = self._conditional_rows(rep_states)
        shifted = self._seg_logprob - self._seg_logprob.max()
        weights = np.exp(shifted)
        weights /= weights.sum()
        out = weights @ conds
        self._pending_states = rep_states
        return out

    def observe(self, symbol: int, side_entry=None) -> None:
        if self._steps_seen >= self.capacity:
            raise EpochError("epoch exhausted; roll a fresh covering before observing")
        if self._pending_states is not None:
            rep_states = self._pending_states
        elif side_entry is not None:
            rep_states = self._rep_states(side_entry)
        else:
            raise EpochError("observe() needs side info or a preceding conditional()")
        conds = self._conditional_rows(rep_states)
        self._seg_logprob += np.log(conds[:, symbol - 1])
        idx = np.arange(self.ell)
        self._counts[idx, rep_states - 1, symbol - 1] += 1
        self._steps_seen += 1
        self._pending_states = None

    def segment_log_prob(self) -> float:
        """Log of the uniform mixture probability of the segment consumed so far."""
        return float(logsumexp(self._seg_logprob) - math.log(self.ell))


def roll_epoch(prefix: SideInfoSample, function_class: FunctionClass, m: int) -> CoveringMixtureState:
    """Start a fresh epoch: cover the class w.r.t. the full side-info prefix.

    Must be called exactly at epoch starts, where the prefix length is a power
    of two; the returned state accepts that many steps (the epoch length).
    """
    k = len(prefix)
    if k < 1 or (k & (k - 1)) != 0:
        raise EpochError(
            f"epochs roll at prefix lengths 1, 2, 4, ...; got a prefix of length {k}"
        )
    covering = minimal_covering(function_class, prefix)
    return CoveringMixtureState(covering, m=m, capacity=k)


def _segment_mixture_log_prob(
    covering: EmpiricalCovering, symbols: np.ndarray, segment: SideInfoSample, m: int
) -> float:
    """Batch mixture log probability of one epoch segment."""
    if len(segment) == 0:
        return 0.0
    labels = labelings(covering, segment)
    S = max(r.n_states for r in covering.representatives)
    per_rep = np.empty(covering.ell)
    for k in range(covering.ell):
        counts = np.zeros((S, m), dtype=np.int64)
        np.add.at(counts, (labels[k] - 1, symbols - 1), 1)
        per_rep[k] = sum(LAPLACE.log_prob(row) for row in counts)
    return float(logsumexp(per_rep) - math.log(covering.ell))


class EpochMixtureAssignment(SequentialAssignment):
    """The epoch-doubling covering-mixture assignment for a function class."""

    def __init__(self, m: int, function_class: FunctionClass):
        if m < 2:
            raise AssignmentError("alphabet size must be at least 2")
        self.m = m
        self.function_class = function_class

    def log_prob(self, symbols, side=None) -> float:
        if side is None:
            raise AssignmentError("side-information sample required")
        if not isinstance(side, SideInfoSample):
            side = SideInfoSample(np.asarray(side, dtype=np.float64))
        ys = np.asarray(list(symbols), dtype=np.int64)
        if len(ys) != len(side):
            raise AssignmentError(
                f"{len(ys)} symbols but {len(side)} side-information points"
            )
        if len(ys) == 0:
            return 0.0
        if ys.min() < 1 or ys.max() > self.m:
            raise AssignmentError(f"symbols must lie in 1..{self.m}")
        total = -math.log(self.m)
        for start, end in epoch_segments(len(ys)):
            prefix = side.prefix(start - 1)
            covering = minimal_covering(self.function_class, prefix)
            total += _segment_mixture_log_prob(
                covering, ys[start - 1 : end], side.window(start - 1, end), self.m
            )
        return total

    def epoch_log_factors(self, symbols, side) -> list[dict]:
        """Per-epoch breakdown: [{'j': 0, 'ell': 1, 'log_factor': -log m}, ...]."""
        if not isinstance(side, SideInfoSample):
            side = SideInfoSample(np.asarray(side, dtype=np.float64))
        ys = np.asarray(list(symbols), dtype=np.int64)
        out = [{"j": 0, "ell": 1, "log_factor": -math.log(self.m)}]
        for j, (start, end) in enumerate(epoch_segments(len(ys)), start=1):
            covering = minimal_covering(self.function_class, side.prefix(start - 1))
            lf = _segment_mixture_log_prob(
                covering, ys[start - 1 : end], side.window(start - 1, end), self.m
            )
            out.append({"j": j, "ell": covering.ell, "log_factor": lf})
        return out

    def predictor(self) -> "EpochMixturePredictor":
        return EpochMixturePredictor(self)


class EpochMixturePredictor(SequentialPredictor):
    """Stateful single-stream predictor; rolls a fresh covering at each epoch start."""

    def __init__(self, assignment: EpochMixtureAssignment):
        self.assignment = assignment
        self._step = 0
        self._seen_points: list[np.ndarray] = []
        self._state: CoveringMixtureState | None = None
        self._pending_entry = None

    def step(self, side=None) -> np.ndarray:
        if side is None:
            raise AssignmentError("side-information point required at every step")
        entry = np.atleast_1d(np.asarray(side, dtype=np.float64))
        i = self._step + 1
        if i == 1:
            self._pending_entry = entry
            return np.full(self.assignment.m, 1.0 / self.assignment.m)
        if self._needs_roll(i):
            prefix = SideInfoSample(np.vstack(self._seen_points))
            self._state = roll_epoch(prefix, self.assignment.function_class, self.assignment.m)
        assert self._state is not None
        self._pending_entry = entry
        return self._state.conditional(entry)

    def _needs_roll(self, i: int) -> bool:
        # Epoch starts are the steps i with i - 1 a power of two.
        k = i - 1
        return k >= 1 and (k & (k - 1)) == 0

    def observe(self, symbol: int) -> None:
        if self._pending_entry is None:
            raise AssignmentError("observe() before step()")
        if not 1 <= symbol <= self.assignment.m:
            raise AssignmentError(f"symbol {symbol} outside 1..{self.assignment.m}")
        i = self._step + 1
        if i >= 2:
            assert self._state is not None
            self._state.observe(symbol)
        self._seen_points.append(self._pending_entry)
        self._pending_entry = None
        self._step = i
