"""Pure-numpy implementations of the scan kernels.

Semantically identical to the compiled versions in ``_scan.pyx``: minima are
exact regardless of accumulation order and top-k selection uses the total
order (value, id), so both backends return bit-identical results.
"""

from __future__ import annotations

import numpy as np


def interval_mins(pos, vals, los, his):
    """Min of vals over points with los[j] <= pos <= his[j], +inf when empty."""
    out = np.empty(los.shape[0])
    for j in range(los.shape[0]):
        inside = (pos >= los[j]) & (pos <= his[j])
        out[j] = np.min(np.where(inside, vals, np.inf))
    return out


def topk_smallest(vals, ids, k):
    """Positions of the k smallest (vals, ids) pairs, sorted ascending."""
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((ids, vals))
    return order[: min(k, vals.shape[0])].astype(np.int64)
