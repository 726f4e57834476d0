"""
Finite unions of closed real intervals, used for the envelope of the pointwise model spectra
and for gap queries.
"""

from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

INFINITY = float("inf")


def union_overlapping(intervals: Iterable[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Merge overlapping or touching closed intervals, result sorted by lower end"""
    ordered = sorted((float(lo), float(hi)) for lo, hi in intervals)
    merged: List[Tuple[float, float]] = []
    for lo, hi in ordered:
        if hi < lo:
            raise ValueError(f"interval [{lo}, {hi}] has its ends reversed")
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


class IntervalUnion:
    """
    Sorted disjoint closed intervals [l_m, u_m] with u_m < l_{m+1}

    :param intervals: Arbitrary closed intervals, merged on construction
    :type intervals: Iterable[Tuple[float, float]]
    """

    def __init__(self, intervals: Iterable[Tuple[float, float]] = ()) -> None:
        self.components: Tuple[Tuple[float, float], ...] = tuple(union_overlapping(intervals))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return iter(self.components)

    def __getitem__(self, index: int) -> Tuple[float, float]:
        return self.components[index]

    def __contains__(self, value: float) -> bool:
        return self.contains(value)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IntervalUnion) and self.components == other.components

    def __repr__(self) -> str:
        inner = ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self.components)
        return f"IntervalUnion({inner})"

    def truncate(self, cutoff: float) -> "IntervalUnion":
        """Intersection with (-inf, cutoff]"""
        return IntervalUnion((lo, min(hi, cutoff)) for lo, hi in self.components if lo <= cutoff)

    def contains(self, value: float, tolerance: float = 0.0) -> bool:
        return self.distance(value) <= tolerance

    def distance(self, value: float) -> float:
        """Distance from ``value`` to the union, infinity for the empty union"""
        if not self.components:
            return INFINITY
        return min(max(lo - value, value - hi, 0.0) for lo, hi in self.components)

    def distances(self, values: Sequence[float]) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if not self.components:
            return np.full(values.shape, INFINITY)
        lows = np.array([lo for lo, _ in self.components])
        highs = np.array([hi for _, hi in self.components])
        gaps = np.maximum(np.maximum(lows[None, :] - values[:, None], values[:, None] - highs[None, :]), 0.0)
        return gaps.min(axis=1)

    def component_index(self, value: float, tolerance: float = 0.0) -> Optional[int]:
        """Index of the nearest component if it lies within ``tolerance``, else None"""
        if not self.components:
            return None
        distances = [max(lo - value, value - hi, 0.0) for lo, hi in self.components]
        nearest = int(np.argmin(distances))
        return nearest if distances[nearest] <= tolerance else None

    def gaps(self) -> List[Tuple[float, float]]:
        """Bounded open gaps (u_m, l_{m+1}) between consecutive components"""
        return [(self.components[i][1], self.components[i + 1][0]) for i in range(len(self.components) - 1)]

    def min_gap(self) -> float:
        gaps = self.gaps()
        return min(hi - lo for lo, hi in gaps) if gaps else INFINITY

    def widths(self) -> List[float]:
        return [hi - lo for lo, hi in self.components]

    def to_list(self) -> List[List[float]]:
        return [[lo, hi] for lo, hi in self.components]
