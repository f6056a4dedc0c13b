"""Exact k-th nearest neighbor search under squared L2 distance.

Candidates come from the fast inner-product expansion; the k-th neighbor is
then chosen among them using distances recomputed from explicit differences,
with ties resolved to the lowest index. The candidate margin is a rigorous
bound on the expansion's rounding error, so results are identical to a full
exact sort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .linalg_stats import as_mat, expansion_error_bound, pairwise_sq_dists, row_sq_norms

SELF = "self"  # exclusion rule: query i excludes point i

_CHUNK_ELEMENTS = 1 << 22


@dataclass
class PointSet:
    points: np.ndarray
    generation: int = 0
    sq_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.points = as_mat(self.points, "points")
        self.sq_norms = row_sq_norms(self.points)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def rebuild(self, points) -> "PointSet":
        """Replace the points; the generation counter advances."""
        return PointSet(points, self.generation + 1)


@dataclass
class NeighborResult:
    index: int
    sq_dist: float


@dataclass
class NeighborResults:
    index: np.ndarray
    sq_dist: np.ndarray
    generation: int

    def __len__(self) -> int:
        return self.index.shape[0]

    def __getitem__(self, i) -> NeighborResult:
        return NeighborResult(int(self.index[i]), float(self.sq_dist[i]))


class KnnBackend(Protocol):
    """Interface an alternative (e.g. approximate) search backend must provide."""

    def batch_kth_neighbors(self, pset: PointSet, queries, k: int, exclude=None) -> NeighborResults:
        ...


def _resolve_exclusion(exclude, n_queries: int, n_points: int) -> np.ndarray | None:
    if exclude is None:
        return None
    if isinstance(exclude, str):
        if exclude != SELF:
            raise ValueError(f"unknown exclusion rule {exclude!r}")
        if n_queries > n_points:
            raise ValueError("self exclusion needs at least as many points as queries")
        return np.arange(n_queries)
    ex = np.asarray(exclude, dtype=np.int64).reshape(-1)
    if ex.shape[0] != n_queries:
        raise ValueError("need one exclusion index per query (use -1 for none)")
    if np.any(ex >= n_points):
        raise ValueError("exclusion index out of range")
    return ex


class ExactBackend:
    """Exhaustive O(N) search per query."""

    def batch_kth_neighbors(self, pset: PointSet, queries, k: int, exclude=None) -> NeighborResults:
        q = as_mat(queries, "queries")
        n, d = pset.points.shape
        if n == 0:
            raise ValueError("empty point set")
        if q.shape[1] != d:
            raise ValueError(f"query dimension {q.shape[1]} does not match point set dimension {d}")
        ex = _resolve_exclusion(exclude, q.shape[0], n)
        if k < 1:
            raise ValueError("k must be >= 1")
        effective = n - (1 if ex is not None and np.any(ex >= 0) else 0)
        if k > effective:
            raise ValueError(f"k={k} exceeds the {effective} searchable points")

        out_idx = np.empty(q.shape[0], dtype=np.int64)
        out_dist = np.empty(q.shape[0], dtype=np.float64)
        chunk = max(1, _CHUNK_ELEMENTS // max(n, 1))
        pmax = float(pset.sq_norms.max())
        for s in range(0, q.shape[0], chunk):
            qs = q[s:s + chunk]
            rows = np.arange(qs.shape[0])
            approx = pairwise_sq_dists(qs, pset.points, pset.sq_norms)
            if ex is not None:
                ex_s = ex[s:s + chunk]
                has = ex_s >= 0
                approx[rows[has], ex_s[has]] = np.inf
            kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
            margin = expansion_error_bound(row_sq_norms(qs), pmax, d)
            cand_r, cand_c = np.nonzero(approx <= (kth + margin)[:, None])
            diff = qs[cand_r] - pset.points[cand_c]
            exact = np.einsum("ij,ij->i", diff, diff)
            order = np.lexsort((cand_c, exact, cand_r))
            starts = np.searchsorted(cand_r[order], rows)
            pick = order[starts + k - 1]
            out_idx[s:s + chunk] = cand_c[pick]
            out_dist[s:s + chunk] = exact[pick]
        return NeighborResults(out_idx, out_dist, pset.generation)


DEFAULT_BACKEND = ExactBackend()


def batch_kth_neighbors(pset: PointSet, queries, k: int, exclude=None,
                        backend: KnnBackend = DEFAULT_BACKEND) -> NeighborResults:
    """k-th neighbor of every query row.

    ``exclude`` is ``None``, ``"self"`` (query i skips point i), or an array
    of per-query point indices to skip (``-1`` for none).
    """
    return backend.batch_kth_neighbors(pset, queries, k, exclude)


def kth_neighbor(pset: PointSet, query, k: int, exclude: int | None = None,
                 backend: KnnBackend = DEFAULT_BACKEND) -> NeighborResult:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("query must be a single vector")
    ex = None if exclude is None else [exclude]
    return backend.batch_kth_neighbors(pset, q[None, :], k, ex)[0]
