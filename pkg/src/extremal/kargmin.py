"""Extraction of the ordered k smallest distinct values and their argmin sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import EmptyFunctionError
from .field import FloatArray

if TYPE_CHECKING:
    from .sampler import SampleFunction


@dataclass(frozen=True, eq=False)
class KArgminRecord:
    """Ordered list of (m_i, M_i): the i-th smallest distinct value and every
    location attaining it.  Values are strictly increasing and argmin sets
    disjoint.  `truncated` is set when fewer distinct values exist than were
    requested."""

    entries: tuple[tuple[float, FloatArray], ...]
    truncated: bool = False

    @property
    def k(self) -> int:
        return len(self.entries)

    @property
    def values(self) -> FloatArray:
        return np.array([e[0] for e in self.entries])

    def argmin_points(self) -> FloatArray:
        """First location of each entry, shape (k, dim). Ties beyond the first
        location are dropped (they have probability zero under continuous noise)."""
        return np.vstack([e[1][0] for e in self.entries])


def extract_k_argmins(f: "SampleFunction", k: int) -> KArgminRecord:
    """Group the points of `f` by exactly equal values and return the k smallest groups.

    Tie detection is exact floating-point equality: distinct stored values are
    distinct records, however close.  Locations within a group are sorted
    lexicographically so the result is independent of input ordering.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    values = np.asarray(f.values, dtype=np.float64)
    points = np.atleast_2d(np.asarray(f.points, dtype=np.float64))
    if values.shape[0] == 0:
        raise EmptyFunctionError("cannot extract argmins of a function with no points")

    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    starts = np.concatenate([[0], np.nonzero(np.diff(sorted_vals) != 0.0)[0] + 1])
    n_groups = starts.shape[0]
    take = min(k, n_groups)
    ends = np.concatenate([starts[1:], [sorted_vals.shape[0]]])

    entries = []
    for i in range(take):
        locs = points[order[starts[i] : ends[i]]]
        if locs.shape[0] > 1:
            locs = locs[np.lexsort(locs.T[::-1])]
        entries.append((float(sorted_vals[starts[i]]), locs))
    return KArgminRecord(entries=tuple(entries), truncated=take < k)
