"""Closed time intervals in seconds and canonical merged interval sets.

Every reward and metric in this package reduces to three primitives:
pairwise IoU, merging a list of intervals into canonical disjoint form,
and IoU between two merged sets. All comparisons are exact on the stored
doubles; there is no epsilon anywhere, so canonical forms are unique and
deterministic.

Degenerate (zero-length) intervals are allowed. The IoU of two identical
points is defined as 1 and the IoU of distinct points as 0, which keeps
IoU total without rewarding empty predictions (two empty sets score 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True, order=True)
class Interval:
    """A closed segment [start, end] in seconds; zero length is allowed."""

    start: float
    end: float

    def __post_init__(self) -> None:
        start = float(self.start)
        end = float(self.end)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise ValueError(f"interval endpoints must be finite, got ({self.start}, {self.end})")
        if start < 0.0 or end < 0.0:
            raise ValueError(f"interval endpoints must be >= 0, got ({start}, {end})")
        if end < start:
            raise ValueError(f"interval end < start: ({start}, {end})")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class IntervalSet:
    """Canonical form of a union of intervals: sorted, pairwise non-touching.

    Build instances through :func:`merge`; the constructor rejects anything
    that is not already canonical (touching intervals must have been merged).
    """

    intervals: tuple[Interval, ...]

    def __post_init__(self) -> None:
        ivs = tuple(self.intervals)
        for prev, cur in zip(ivs, ivs[1:]):
            if cur.start <= prev.end:
                raise ValueError(f"not canonical: {prev} and {cur} overlap or touch")
        object.__setattr__(self, "intervals", ivs)

    @property
    def measure(self) -> float:
        return sum(iv.length for iv in self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)


def iou(a: Interval, b: Interval) -> float:
    """Temporal intersection-over-union of two intervals, in [0, 1].

    The union in the denominator is |a| + |b| - |a∩b|. When both intervals
    are zero-length the ratio is 0/0; identical points count as 1, distinct
    points as 0.
    """
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter < 0.0:
        inter = 0.0
    union = a.length + b.length - inter
    if union <= 0.0:
        return 1.0 if a == b else 0.0
    return inter / union


def merge(xs: Iterable[Interval]) -> IntervalSet:
    """Merge intervals into canonical disjoint sorted form.

    Intervals that overlap or share an endpoint are coalesced. Idempotent:
    merging a canonical set's members reproduces it exactly.
    """
    ordered = sorted(xs)
    if not ordered:
        return IntervalSet(())
    out: list[Interval] = []
    cur_start, cur_end = ordered[0].start, ordered[0].end
    for iv in ordered[1:]:
        if iv.start <= cur_end:
            if iv.end > cur_end:
                cur_end = iv.end
        else:
            out.append(Interval(cur_start, cur_end))
            cur_start, cur_end = iv.start, iv.end
    out.append(Interval(cur_start, cur_end))
    return IntervalSet(tuple(out))


def _intersection_measure(a: IntervalSet, b: IntervalSet) -> float:
    i = j = 0
    total = 0.0
    while i < len(a.intervals) and j < len(b.intervals):
        x = a.intervals[i]
        y = b.intervals[j]
        lo = max(x.start, y.start)
        hi = min(x.end, y.end)
        if hi > lo:
            total += hi - lo
        if x.end <= y.end:
            i += 1
        else:
            j += 1
    return total


def set_iou(a: IntervalSet, b: IntervalSet) -> float:
    """IoU between two canonical interval sets, in [0, 1].

    Two empty sets score 0 by convention: an empty prediction earns nothing.
    Sets of identical degenerate points score 1, mirroring :func:`iou`.
    """
    inter = _intersection_measure(a, b)
    union = a.measure + b.measure - inter
    if union <= 0.0:
        return 1.0 if (a.intervals and a.intervals == b.intervals) else 0.0
    return inter / union
