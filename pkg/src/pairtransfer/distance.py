"""Univariate time series distances: Euclidean and dynamic time warping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
DTW = "dtw"


@dataclass(frozen=True)
class DistanceMetric:
    """Distance selection.

    ``dtw_window`` is an optional Sakoe-Chiba band half-width; ``None`` means
    unconstrained warping. It is ignored for the Euclidean metric.
    """

    kind: str = DTW
    dtw_window: int | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in (EUCLIDEAN, DTW):
            raise ValueError(f"unknown distance {self.kind!r}; expected 'dtw' or 'euclidean'")
        object.__setattr__(self, "kind", kind)
        if self.dtw_window is not None and self.dtw_window < 0:
            raise ValueError("dtw_window must be non-negative")

    @property
    def name(self) -> str:
        if self.kind == DTW and self.dtw_window is not None:
            return f"dtw[w={self.dtw_window}]"
        return self.kind

    def to_dict(self) -> dict:
        return {"distance": self.kind, "dtw_window": self.dtw_window}

    @classmethod
    def from_config(cls, name: str, dtw_window: int | None = None) -> "DistanceMetric":
        return cls(name, dtw_window)


def _check_pairs(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    if a.shape[-1] == 0 or b.shape[-1] == 0:
        raise ValueError("distance of an empty series is undefined")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"batch sizes differ: {a.shape[0]} vs {b.shape[0]}")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ValueError("NaN in distance input")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("non-finite distance input")
    return a, b


def euclidean_batch(a, b) -> np.ndarray:
    """Row-wise Euclidean distance between two (P, T) arrays."""
    a, b = _check_pairs(a, b)
    if a.shape != b.shape:
        raise ValueError(f"Euclidean distance needs equal lengths, got {a.shape[1]} and {b.shape[1]}")
    return np.sqrt(np.sum((a - b) ** 2, axis=1))


def dtw_batch(a, b, window: int | None = None) -> np.ndarray:
    """DTW cost for each row pair of ``a`` (P, n) and ``b`` (P, m).

    Local cost is ``|a_i - b_j|``; steps (1,0), (0,1), (1,1); the path runs
    from (0, 0) to (n-1, m-1). With a window ``w`` only cells with
    ``|i - j| <= w`` are admissible, and ``w`` must be at least ``|n - m|``.

    The recursion is vectorised over the P pairs and keeps two rows of the
    accumulated cost matrix.
    """
    a, b = _check_pairs(a, b)
    P, n = a.shape
    m = b.shape[1]
    if window is not None and window < abs(n - m):
        raise ValueError(f"window {window} cannot reach the corner of a {n} x {m} grid")
    w = max(n, m) if window is None else window

    # pair axis last so each inner update touches contiguous memory
    at = np.ascontiguousarray(a.T)
    bt = np.ascontiguousarray(b.T)
    prev = np.full((m + 1, P), np.inf)
    prev[0] = 0.0
    cur = np.empty_like(prev)
    for i in range(1, n + 1):
        cur.fill(np.inf)
        lo, hi = max(1, i - w), min(m, i + w)
        cost = np.abs(at[i - 1] - bt[lo - 1:hi])
        # diagonal and vertical predecessors are known for the whole row
        vert_diag = np.minimum(prev[lo - 1:hi], prev[lo:hi + 1])
        left = cur[lo - 1]
        for c in range(hi - lo + 1):
            left = cost[c] + np.minimum(vert_diag[c], left)
            cur[lo + c] = left
        prev, cur = cur, prev
    return prev[m].copy()


def pairwise_batch(metric: DistanceMetric, a, b) -> np.ndarray:
    if metric.kind == EUCLIDEAN:
        return euclidean_batch(a, b)
    return dtw_batch(a, b, metric.dtw_window)


def distance(metric: DistanceMetric, a, b) -> float:
    """Distance between two univariate series under ``metric``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("distance expects two one-dimensional series")
    return float(pairwise_batch(metric, a, b)[0])
