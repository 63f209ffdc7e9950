"""Empirical-process diagnostics for state-function classes.

The central quantity is the centered disagreement supremum: over pairs of
functions from the class, the largest absolute gap between the number of
sample points where the pair disagrees and the expected number under the
process's stationary marginal.  The supremum is evaluated at the covering
representatives of the sample; the count term is then exact (labelings are
complete), while the expectation term can differ from the true supremizing
parameter by the marginal's modulus of continuity over one inter-sample gap.

The expectation side needs a known marginal, supplied as a
``DisagreementOracle``; processes without a stationary marginal oracle are
rejected rather than approximated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .covering import (
    FunctionClass,
    SideInfoSample,
    StateFunction,
    ThresholdFunction,
    minimal_covering,
)


class EmpiricalError(ValueError):
    """Missing oracle or inconsistent diagnostic inputs."""


@dataclass(frozen=True)
class DisagreementOracle:
    """P(g1(Z) != g2(Z)) under the process's stationary marginal.

    ``cdf`` is set when the marginal is scalar with a known distribution
    function; threshold pairs then use |F(a1) - F(a2)| and a fast evaluation
    path exists.  Arbitrary pairs fall back to ``prob``.
    """

    prob: Callable[[StateFunction, StateFunction], float]
    cdf: Callable[[float], float] | None = None

    @classmethod
    def from_cdf(cls, cdf: Callable[[float], float]) -> "DisagreementOracle":
        def prob(g1: StateFunction, g2: StateFunction) -> float:
            if not isinstance(g1, ThresholdFunction) or not isinstance(g2, ThresholdFunction):
                raise EmpiricalError("CDF oracle only covers threshold functions")
            return abs(cdf(g1.threshold) - cdf(g2.threshold))

        return cls(prob=prob, cdf=cdf)

    @classmethod
    def from_point(cls, value: float) -> "DisagreementOracle":
        """Degenerate marginal at a single point: disagreement is 0 or 1."""
        point = np.atleast_1d(np.asarray(value, dtype=np.float64))

        def prob(g1: StateFunction, g2: StateFunction) -> float:
            return float(g1.state_of(point) != g2.state_of(point))

        return cls(prob=prob)


def rho_for_representatives(
    reps: Sequence[StateFunction], sample: SideInfoSample, oracle: DisagreementOracle
) -> float:
    """max over representative pairs of |disagreement count - n * P(disagree)|."""
    n = len(sample)
    if n == 0:
        return 0.0
    if oracle.cdf is not None and all(isinstance(r, ThresholdFunction) for r in reps):
        # For thresholds a1 < a2 the count is #(a1 <= z < a2) and the mean is
        # n (F(a2) - F(a1)); both difference across A(a) = #(z < a) - n F(a),
        # so the pair supremum is the range of A over the representatives.
        values = np.sort(sample.points[:, 0])
        a = np.array([r.threshold for r in reps])
        counts_below = np.searchsorted(values, a, side="left")
        centered = counts_below - n * np.array([oracle.cdf(x) for x in a])
        return float(centered.max() - centered.min())
    labels = [r.states(sample) for r in reps]
    worst = 0.0
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            count = int((labels[i] != labels[j]).sum())
            worst = max(worst, abs(count - n * oracle.prob(reps[i], reps[j])))
    return worst


def rho_gxg(
    function_class: FunctionClass, sample: SideInfoSample, oracle: DisagreementOracle
) -> float:
    """Centered disagreement supremum of the class on the sample.

    Evaluated at minimal-covering representatives; see the module docstring
    for the approximation this entails on the expectation term.
    """
    if oracle is None:
        raise EmpiricalError("a stationary-marginal disagreement oracle is required")
    covering = minimal_covering(function_class, sample)
    return rho_for_representatives(covering.representatives, sample, oracle)


def epoch_hamming(fn: StateFunction, covering_match: StateFunction, segment: SideInfoSample) -> int:
    """Number of segment points where a function and its covering match disagree."""
    if len(segment) == 0:
        return 0
    return int((fn.states(segment) != covering_match.states(segment)).sum())


def fit_loglog_exponent(horizons: Sequence[int], means: Sequence[float]) -> float:
    """Least-squares slope of log(mean) against log(n)."""
    x = np.log(np.asarray(horizons, dtype=np.float64))
    y = np.log(np.asarray(means, dtype=np.float64))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def rho_growth_report(
    side_sampler: Callable[[int, np.random.Generator], SideInfoSample],
    function_class: FunctionClass,
    oracle: DisagreementOracle,
    horizons: Sequence[int],
    trials: int,
    seed: int = 0,
) -> dict:
    """Monte Carlo means of the disagreement supremum per horizon, plus the
    fitted log-log growth exponent."""
    if trials < 1:
        raise EmpiricalError("need at least one trial")
    root = np.random.SeedSequence(seed)
    rows = []
    for idx, n in enumerate(horizons):
        rngs = [np.random.default_rng(c) for c in root.spawn(trials)]
        vals = np.array(
            [rho_gxg(function_class, side_sampler(n, rngs[t]), oracle) for t in range(trials)]
        )
        rows.append(
            {
                "n": int(n),
                "trials": trials,
                "mean_rho": float(vals.mean()),
                "stderr": float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
            }
        )
    means = [r["mean_rho"] for r in rows]
    exponent = (
        fit_loglog_exponent([r["n"] for r in rows], means)
        if len(rows) >= 2 and min(means) > 0
        else float("nan")
    )
    for r in rows:
        r["fitted_exponent"] = exponent
    return {"rows": rows, "fitted_exponent": exponent}
