"""Prediction sets as sorted unions of disjoint closed intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IntervalUnion:
    """A sorted union of disjoint closed intervals [lowers[j], uppers[j]].

    Touching or overlapping member intervals are merged at construction, so
    uppers[j] < lowers[j+1] holds strictly. The empty union has zero members.
    """

    lowers: np.ndarray
    uppers: np.ndarray

    def __post_init__(self):
        lowers = np.atleast_1d(np.asarray(self.lowers, dtype=float))
        uppers = np.atleast_1d(np.asarray(self.uppers, dtype=float))
        if lowers.shape != uppers.shape:
            raise ValueError("lowers and uppers must have equal length")
        if np.any(uppers < lowers):
            raise ValueError("each interval needs lower <= upper")
        if len(lowers) > 1:
            if np.any(np.diff(lowers) < 0):
                raise ValueError("intervals must be sorted by lower endpoint")
            if np.any(lowers[1:] <= uppers[:-1]):
                raise ValueError("intervals must be disjoint and non-touching")
        object.__setattr__(self, "lowers", lowers)
        object.__setattr__(self, "uppers", uppers)

    @classmethod
    def from_pairs(cls, pairs) -> "IntervalUnion":
        """Build a union from (lower, upper) pairs, merging touching intervals.

        Pairs with lower > upper are dropped as empty.
        """
        kept = sorted((lo, up) for lo, up in pairs if lo <= up)
        merged: list[list[float]] = []
        for lo, up in kept:
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], up)
            else:
                merged.append([lo, up])
        if not merged:
            return cls.empty()
        arr = np.asarray(merged, dtype=float)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def single(cls, lower: float, upper: float) -> "IntervalUnion":
        """A one-interval union, or the empty union if lower > upper."""
        if lower > upper:
            return cls.empty()
        return cls(np.asarray([lower]), np.asarray([upper]))

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls(np.empty(0), np.empty(0))

    @property
    def is_empty(self) -> bool:
        return len(self.lowers) == 0

    @property
    def count(self) -> int:
        return len(self.lowers)

    @property
    def total_width(self) -> float:
        return float(np.sum(self.uppers - self.lowers))

    @property
    def hull_width(self) -> float:
        if self.is_empty:
            return 0.0
        return float(self.uppers[-1] - self.lowers[0])

    def hull(self) -> "IntervalUnion":
        """Single-interval convex hull; empty stays empty."""
        if self.is_empty:
            return self
        return IntervalUnion.single(float(self.lowers[0]), float(self.uppers[-1]))

    def covered(self, y: float) -> bool:
        """True iff y lies in some member interval (closed endpoints)."""
        if self.is_empty:
            return False
        j = int(np.searchsorted(self.lowers, y, side="right")) - 1
        return j >= 0 and y <= self.uppers[j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return (
            self.lowers.shape == other.lowers.shape
            and bool(np.all(self.lowers == other.lowers))
            and bool(np.all(self.uppers == other.uppers))
        )


def covered(union: IntervalUnion, y: float) -> bool:
    """Coverage indicator: whether y falls inside the prediction set."""
    return union.covered(y)


def hull_interval(union: IntervalUnion) -> IntervalUnion:
    """Convex hull of a union as a single-interval union."""
    return union.hull()
