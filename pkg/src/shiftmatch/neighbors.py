"""Exact k-nearest-neighbour search.

Neighbours are ranked by (distance, point index). ``I_k(z)`` is the first
``k`` points in that order and the radius is the distance of the
``(k+1)``-th, or ``inf`` when fewer than ``k+1`` points exist.

Two routes answer the same query: :func:`knn_bruteforce` scans every
point, and :class:`NeighborIndex` prunes with a k-d tree. The tree only
proposes candidates; every candidate distance is recomputed with
:func:`distances`, which is also what the brute-force scan uses, so both
routes agree bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

NORMS = ("euclidean", "l1", "linf")
_MINKOWSKI_P = {"euclidean": 2.0, "l1": 1.0, "linf": np.inf}

# Tree distances may differ from `distances` by a few ulps.
_TREE_SLACK = 1e-9
MAX_TREE_DIM = 16


@dataclass(frozen=True)
class PointSet:
    rows: np.ndarray
    norm: str = "euclidean"

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError(f"need a non-empty (n, d) array, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("point coordinates must be finite")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}; expected one of {NORMS}")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class NeighborResult:
    indices: np.ndarray
    radius: float


def distances(rows: np.ndarray, z: np.ndarray, norm: str = "euclidean") -> np.ndarray:
    """Distances from ``z`` to each point, accumulated coordinate by coordinate.

    ``rows`` has shape (..., d) and ``z`` broadcasts against it. The fixed
    accumulation order makes the value of a (row, z) pair independent of
    the batch shape it was computed in.
    """
    diff = np.abs(np.asarray(rows, dtype=float) - np.asarray(z, dtype=float))
    acc = diff[..., 0].copy()
    if norm == "euclidean":
        acc *= acc
        for j in range(1, diff.shape[-1]):
            acc += diff[..., j] * diff[..., j]
        return np.sqrt(acc)
    if norm == "l1":
        for j in range(1, diff.shape[-1]):
            acc += diff[..., j]
        return acc
    if norm == "linf":
        for j in range(1, diff.shape[-1]):
            np.maximum(acc, diff[..., j], out=acc)
        return acc
    raise ValueError(f"unknown norm {norm!r}")


def _check_query(z, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (d,):
        raise ValueError(f"query has dimension {z.size}, index has dimension {d}")
    return z


def _check_k(k) -> int:
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    return int(k)


def _rank(dist: np.ndarray, idx: np.ndarray, k: int) -> NeighborResult:
    order = np.lexsort((idx, dist))
    ranked = idx[order]
    radius = float(dist[order[k]]) if k < len(order) else np.inf
    return NeighborResult(indices=ranked[:k].copy(), radius=radius)


def knn_bruteforce(points: PointSet, z, k: int) -> NeighborResult:
    """O(n d) reference scan."""
    k = _check_k(k)
    z = _check_query(z, points.d)
    dist = distances(points.rows, z, points.norm)
    return _rank(dist, np.arange(points.n), k)


class NeighborIndex:
    """Immutable exact k-NN index over a :class:`PointSet`.

    Uses a k-d tree for ``d <= 16`` and a brute-force scan above that.
    Queries do not mutate state and may run concurrently.
    """

    def __init__(self, points: PointSet):
        if not isinstance(points, PointSet):
            points = PointSet(np.asarray(points))
        self.points = points
        self._p = _MINKOWSKI_P[points.norm]
        self._tree = cKDTree(points.rows) if points.d <= MAX_TREE_DIM else None

    @property
    def n(self) -> int:
        return self.points.n

    @property
    def d(self) -> int:
        return self.points.d

    def query(self, z, k: int) -> NeighborResult:
        k = _check_k(k)
        z = _check_query(z, self.d)
        if self._tree is None or k + 1 >= self.n:
            return knn_bruteforce(self.points, z, k)
        # Take every point the tree places within a slightly inflated
        # (k+1)-th radius, then rank them exactly.
        tree_dist, _ = self._tree.query(z, k=k + 1, p=self._p)
        bound = tree_dist[-1] * (1 + _TREE_SLACK) + 1e-300
        cand = np.asarray(self._tree.query_ball_point(z, bound, p=self._p), dtype=np.int64)
        dist = distances(self.points.rows[cand], z, self.points.norm)
        return _rank(dist, cand, k)

    def query_many(self, Z, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Batch version of :meth:`query`.

        Returns
        -------
        indices : ndarray of shape (m, k)
            Neighbour indices, nearest first. Entries past ``n`` are -1.
        radius : ndarray of shape (m,)
            Distance to the (k+1)-th neighbour, ``inf`` if ``k + 1 > n``.
        """
        k = _check_k(k)
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z.reshape(-1, self.d)
        if Z.ndim != 2 or Z.shape[1] != self.d:
            raise ValueError(f"queries must have shape (m, {self.d}), got {Z.shape}")
        m = Z.shape[0]
        if self._tree is None:
            return self._brute_many(Z, k)

        width = min(k + 2, self.n)
        tree_dist, cand = self._tree.query(Z, k=width, p=self._p)
        tree_dist = tree_dist.reshape(m, width)
        cand = cand.reshape(m, width)
        dist = distances(self.points.rows[cand], Z[:, None, :], self.points.norm)
        order = np.lexsort((cand, dist), axis=-1)
        cand = np.take_along_axis(cand, order, axis=1)
        dist = np.take_along_axis(dist, order, axis=1)

        indices = np.full((m, k), -1, dtype=np.int64)
        take = min(k, self.n)
        indices[:, :take] = cand[:, :take]
        radius = np.full(m, np.inf)
        if k + 1 > self.n:
            return indices, radius
        radius[:] = dist[:, k]
        if width == self.n:
            return indices, radius
        # Rows where an unseen point could still tie or beat the (k+1)-th
        # candidate are re-answered one by one.
        unsafe = dist[:, k] >= tree_dist[:, -1] * (1 - _TREE_SLACK)
        for i in np.flatnonzero(unsafe):
            res = self.query(Z[i], k)
            indices[i] = res.indices
            radius[i] = res.radius
        return indices, radius

    def _brute_many(self, Z: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        m = Z.shape[0]
        indices = np.full((m, k), -1, dtype=np.int64)
        radius = np.empty(m)
        take = min(k, self.n)
        for i in range(m):
            res = knn_bruteforce(self.points, Z[i], k)
            indices[i, :take] = res.indices
            radius[i] = res.radius
        return indices, radius


def build_index(points) -> NeighborIndex:
    return NeighborIndex(points if isinstance(points, PointSet) else PointSet(np.asarray(points)))


def knn(index: NeighborIndex, z, k: int) -> NeighborResult:
    return index.query(z, k)
