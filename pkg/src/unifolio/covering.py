"""Minimal empirical coverings of state-function classes.

A state function maps a side-information point to a state in 1..S.  Given a
sample of points, an empirical covering is a smallest set of functions from
the class realizing every labeling the class can produce on that sample.
Supported families: scalar thresholds (two states), coordinatewise products
of thresholds (2^dim states), and explicit finite sets.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np


class CoveringError(ValueError):
    """Unknown family, inconsistent dimensions, or a broken covering invariant."""


@dataclass(frozen=True)
class SideInfoSample:
    """A sequence of side-information points, each a vector of fixed dimension."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise CoveringError("points must form an (n, D) array")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def prefix(self, k: int) -> "SideInfoSample":
        return SideInfoSample(self.points[:k])

    def window(self, start: int, stop: int) -> "SideInfoSample":
        """Half-open 0-based slice [start, stop)."""
        return SideInfoSample(self.points[start:stop])

    def concat(self, other: "SideInfoSample") -> "SideInfoSample":
        if len(self) and len(other) and self.dim != other.dim:
            raise CoveringError("dimension mismatch in concat")
        return SideInfoSample(np.vstack([self.points, other.points]))


class StateFunction(ABC):
    """An evaluable map from side-information points to states in 1..n_states."""

    @property
    @abstractmethod
    def n_states(self) -> int: ...

    @abstractmethod
    def states(self, sample: SideInfoSample) -> np.ndarray: ...

    @abstractmethod
    def params(self) -> dict: ...

    def state_of(self, point) -> int:
        return int(self.states(SideInfoSample(np.atleast_2d(point)))[0])


@dataclass(frozen=True)
class ThresholdFunction(StateFunction):
    """1 + 1{z >= a} on the first coordinate: state 1 below, state 2 at or above."""

    threshold: float

    @property
    def n_states(self) -> int:
        return 2

    def states(self, sample: SideInfoSample) -> np.ndarray:
        return 1 + (sample.points[:, 0] >= self.threshold).astype(np.int64)

    def params(self) -> dict:
        return {"kind": "threshold", "threshold": self.threshold}


@dataclass(frozen=True)
class ProductThresholdFunction(StateFunction):
    """Coordinatewise thresholds; the bit vector (1{z_i >= a_i}) is encoded as
    state 1 + sum_i bit_i * 2^i (coordinate 0 is the least significant bit)."""

    thresholds: tuple[float, ...]

    @property
    def n_states(self) -> int:
        return 2 ** len(self.thresholds)

    def states(self, sample: SideInfoSample) -> np.ndarray:
        a = np.asarray(self.thresholds, dtype=np.float64)
        if sample.dim != a.size:
            raise CoveringError(f"point dimension {sample.dim} != {a.size} thresholds")
        bits = (sample.points >= a).astype(np.int64)
        weights = 1 << np.arange(a.size)
        return 1 + bits @ weights

    def params(self) -> dict:
        return {"kind": "product_threshold", "thresholds": list(self.thresholds)}


@dataclass(frozen=True)
class CallableStateFunction(StateFunction):
    """Wraps an arbitrary point -> state callable; handy for finite families."""

    fn: Callable[[np.ndarray], int]
    states_count: int
    name: str = "callable"

    @property
    def n_states(self) -> int:
        return self.states_count

    def states(self, sample: SideInfoSample) -> np.ndarray:
        out = np.array([int(self.fn(p)) for p in sample.points], dtype=np.int64)
        if out.size and (out.min() < 1 or out.max() > self.states_count):
            raise CoveringError(f"{self.name} produced a state outside 1..{self.states_count}")
        return out

    def params(self) -> dict:
        return {"kind": "callable", "name": self.name}


@dataclass(frozen=True)
class Threshold1D:
    """All scalar threshold functions z -> 1 + 1{z >= a}."""

    @property
    def n_states(self) -> int:
        return 2

    @property
    def natarajan_dim(self) -> int:
        return 1

    def to_dict(self) -> dict:
        return {"family": "threshold1d"}


@dataclass(frozen=True)
class ProductThreshold:
    """All coordinatewise-threshold functions on dim coordinates (2^dim states)."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise CoveringError("product-threshold dimension must be >= 1")

    @property
    def n_states(self) -> int:
        return 2 ** self.dim

    @property
    def natarajan_dim(self) -> int:
        if self.dim == 1:
            return 1
        return int(math.ceil(self.dim * math.log2(self.dim)))

    def to_dict(self) -> dict:
        return {"family": "product_threshold", "dim": self.dim}


@dataclass(frozen=True)
class FiniteSet:
    """An explicit finite family of state functions."""

    functions: tuple[StateFunction, ...]
    states_count: int | None = None

    def __post_init__(self):
        if not self.functions:
            raise CoveringError("finite family must be nonempty")
        s = self.states_count or max(f.n_states for f in self.functions)
        for f in self.functions:
            if f.n_states > s:
                raise CoveringError("member function range exceeds declared state count")
        object.__setattr__(self, "states_count", s)

    @property
    def n_states(self) -> int:
        return int(self.states_count)

    @property
    def natarajan_dim(self) -> int:
        return max(1, int(math.ceil(math.log2(len(self.functions)))))

    def to_dict(self) -> dict:
        return {"family": "finite", "size": len(self.functions)}


FunctionClass = Union[Threshold1D, ProductThreshold, FiniteSet]


@dataclass(frozen=True)
class EmpiricalCovering:
    """Representatives realizing every labeling of the class on the sample.

    Rows of label_matrix are the pairwise-distinct labelings, one per
    representative, in the order of ``representatives``.
    """

    representatives: tuple[StateFunction, ...]
    sample: SideInfoSample
    label_matrix: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.label_matrix, dtype=np.int64)
        if arr.shape != (len(self.representatives), len(self.sample)):
            raise CoveringError("label matrix shape does not match representatives/sample")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "label_matrix", arr)

    @property
    def ell(self) -> int:
        return len(self.representatives)

    def to_json_dict(self) -> dict:
        return {
            "family": type(self.representatives[0]).__name__,
            "parameters": [r.params() for r in self.representatives],
            "ell": self.ell,
        }


def _check_natarajan(ell: int, n: int, S: int, d: int) -> None:
    if n >= 1 and ell > (S * S * n) ** d:
        raise CoveringError(
            f"covering size {ell} exceeds the dimension bound ({S}^2*{n})^{d}"
        )


def _threshold_covering(sample: SideInfoSample) -> EmpiricalCovering:
    values = sample.points[:, 0]
    if values.size == 0:
        rep = ThresholdFunction(1.0)
        return EmpiricalCovering((rep,), sample, np.zeros((1, 0), dtype=np.int64))
    distinct = np.unique(values)
    # Each distinct value realizes the labeling that flips exactly at it; one
    # sentinel strictly above the maximum realizes the all-below labeling.
    thresholds = list(distinct) + [float(distinct[-1]) + 1.0]
    reps = tuple(ThresholdFunction(float(a)) for a in thresholds)
    labels = np.stack([r.states(sample) for r in reps])
    return EmpiricalCovering(reps, sample, labels)


def _product_threshold_covering(sample: SideInfoSample, dim: int) -> EmpiricalCovering:
    if sample.dim != dim:
        raise CoveringError(f"sample dimension {sample.dim} != class dimension {dim}")
    if len(sample) == 0:
        rep = ProductThresholdFunction(tuple(1.0 for _ in range(dim)))
        return EmpiricalCovering((rep,), sample, np.zeros((1, 0), dtype=np.int64))
    per_coord: list[list[float]] = []
    total = 1
    for i in range(dim):
        distinct = np.unique(sample.points[:, i])
        cands = list(distinct) + [float(distinct[-1]) + 1.0]
        per_coord.append([float(a) for a in cands])
        total *= len(cands)
    if total > 200_000:
        raise CoveringError(
            f"product-threshold covering would enumerate {total} candidates; "
            "reduce the sample or the dimension"
        )
    reps: list[ProductThresholdFunction] = []
    rows: list[np.ndarray] = []
    seen: set[bytes] = set()
    for combo in itertools.product(*per_coord):
        fn = ProductThresholdFunction(tuple(combo))
        lab = fn.states(sample)
        key = lab.tobytes()
        if key not in seen:
            seen.add(key)
            reps.append(fn)
            rows.append(lab)
    return EmpiricalCovering(tuple(reps), sample, np.stack(rows))


def _finite_covering(family: FiniteSet, sample: SideInfoSample) -> EmpiricalCovering:
    reps: list[StateFunction] = []
    rows: list[np.ndarray] = []
    seen: set[bytes] = set()
    for fn in family.functions:
        lab = fn.states(sample)
        key = lab.tobytes()
        if key not in seen:
            seen.add(key)
            reps.append(fn)
            rows.append(lab)
    matrix = np.stack(rows) if rows else np.zeros((0, len(sample)), dtype=np.int64)
    return EmpiricalCovering(tuple(reps), sample, matrix)


def minimal_covering(function_class: FunctionClass, sample: SideInfoSample) -> EmpiricalCovering:
    """Build a minimal empirical covering of the class with respect to the sample.

    The representative realizing a labeling is chosen deterministically (the
    smallest sample value achieving it for threshold families, first member in
    declaration order for finite families), so repeated runs agree exactly.
    """
    if isinstance(function_class, Threshold1D):
        cov = _threshold_covering(sample)
    elif isinstance(function_class, ProductThreshold):
        cov = _product_threshold_covering(sample, function_class.dim)
    elif isinstance(function_class, FiniteSet):
        cov = _finite_covering(function_class, sample)
    else:
        raise CoveringError(f"unknown function-class family: {function_class!r}")
    _check_natarajan(cov.ell, len(sample), function_class.n_states, function_class.natarajan_dim)
    return cov


def labelings(covering: EmpiricalCovering, new_points: SideInfoSample) -> np.ndarray:
    """Apply every representative to fresh points; entry (j, i) is rep j's state of point i."""
    if len(new_points) == 0:
        return np.zeros((covering.ell, 0), dtype=np.int64)
    if len(covering.sample) and covering.sample.dim != new_points.dim:
        raise CoveringError(
            f"point dimension {new_points.dim} != covering dimension {covering.sample.dim}"
        )
    return np.stack([r.states(new_points) for r in covering.representatives])
