"""Uniform cell-list index for ball and k-nearest-neighbour queries.

Queries are vectorised over many query points.  A k-NN search scans the
``(2R+1)^d`` block of cells around each query for ``R = 1, 2, ...`` and
stops once the k-th candidate distance is at most ``R`` cell widths, which
guarantees no closer point lies outside the block.
"""

import math

import numpy as np

from .errors import DomainError
from .window import HARD, SimWindow, torus_displacement


class GridIndex:
    """Bucket the points of ``positions`` into a uniform grid over ``window``.

    Parameters
    ----------
    positions : ndarray, shape (n, d)
    window : SimWindow, optional
        Metric and extent.  Without one, a hard window around the bounding
        box of the points is used.
    cell : float, optional
        Target cell width; defaults to the mean spacing ``(volume / n) ** (1/d)``.
    """

    def __init__(self, positions, window=None, cell=None):
        pos = np.asarray(positions, dtype=float)
        if pos.ndim != 2:
            raise ValueError("positions must have shape (n, d)")
        n, d = pos.shape
        if window is None:
            lo = pos.min(axis=0) if n else np.zeros(d)
            hi = pos.max(axis=0) if n else np.ones(d)
            window = SimWindow(tuple(np.maximum(hi - lo, 1e-9)), HARD, tuple(lo))
        self.window = window
        self.positions = window.wrap(pos)
        self.n, self.dim = n, d
        sides = window.sides_arr
        if cell is None:
            cell = (window.volume / max(n, 1)) ** (1.0 / d)
        if not cell > 0:
            raise ValueError("cell width must be positive")
        ncell = np.maximum(1, np.floor(sides / cell)).astype(np.int64)
        # keep the table size proportional to n
        while np.prod(ncell.astype(float)) > max(64.0, 8.0 * n) and np.any(ncell > 1):
            ncell = np.maximum(1, ncell // 2)
        self.ncell = ncell
        self.cellsize = sides / ncell
        self.strides = np.concatenate([np.cumprod(ncell[::-1])[::-1][1:], [1]]).astype(np.int64)
        flat = self._flat(self._cells(self.positions))
        self.order = np.argsort(flat, kind="stable")
        total = int(np.prod(ncell))
        sorted_flat = flat[self.order]
        self.starts = np.searchsorted(sorted_flat, np.arange(total))
        self.counts = np.searchsorted(sorted_flat, np.arange(total), side="right") - self.starts

    def _cells(self, x):
        c = np.floor((x - self.window.lower_arr) / self.cellsize).astype(np.int64)
        return np.clip(c, 0, self.ncell - 1)

    def _flat(self, cells):
        return cells @ self.strides

    def _block(self, qcells, R):
        """Flat ids of cells within ``R`` rings of each query cell, -1 for none."""
        q = len(qcells)
        flat = np.zeros((q, 1), dtype=np.int64)
        valid = np.ones((q, 1), dtype=bool)
        for j in range(self.dim):
            nj = self.ncell[j]
            if self.window.torus:
                if 2 * R + 1 >= nj:
                    idx = np.broadcast_to(np.arange(nj), (q, nj))
                else:
                    idx = np.mod(qcells[:, j:j + 1] + np.arange(-R, R + 1), nj)
                ok = np.ones(idx.shape, dtype=bool)
            else:
                idx = qcells[:, j:j + 1] + np.arange(-R, R + 1)
                ok = (idx >= 0) & (idx < nj)
                idx = np.clip(idx, 0, nj - 1)
            flat = (flat[:, :, None] + idx[:, None, :] * self.strides[j]).reshape(q, -1)
            valid = (valid[:, :, None] & ok[:, None, :]).reshape(q, -1)
        return np.where(valid, flat, -1)

    def _covers_all(self, R):
        if self.window.torus:
            return bool(np.all(2 * R + 1 >= self.ncell))
        return bool(np.all(R >= self.ncell - 1))

    def _gather(self, block):
        """Candidate ``(query, point)`` pairs from a block of cell ids."""
        q, m = block.shape
        ok = block >= 0
        cells = np.where(ok, block, 0).ravel()
        cnt = np.where(ok.ravel(), self.counts[cells], 0)
        st = self.starts[cells]
        qid = np.repeat(np.arange(q), m)
        tot = int(cnt.sum())
        pair_q = np.repeat(qid, cnt)
        offs = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        pair_p = self.order[np.repeat(st, cnt) + offs]
        return pair_q, pair_p

    def distances(self, a, b):
        return np.linalg.norm(torus_displacement(a, b, self.window), axis=-1)

    def knn(self, queries, k, exclude=None):
        """k nearest indexed points of each query.

        Parameters
        ----------
        queries : ndarray, shape (q, d)
        k : int
        exclude : ndarray of int, shape (q,), optional
            Index of a point to ignore per query (the query itself).

        Returns
        -------
        dist, idx : ndarrays of shape (q, k)
            Sorted by distance; ties are broken by smaller point index.
        """
        queries = self.window.wrap(np.asarray(queries, dtype=float).reshape(-1, self.dim))
        q = len(queries)
        dist = np.full((q, k), np.inf)
        idx = np.full((q, k), -1, dtype=np.int64)
        if q == 0 or k == 0:
            return dist, idx
        qcells = self._cells(queries)
        todo = np.arange(q)
        R = 1
        while len(todo):
            covered = self._covers_all(R)
            pq, pp = self._gather(self._block(qcells[todo], R))
            if exclude is not None:
                keep = pp != np.asarray(exclude)[todo][pq]
                pq, pp = pq[keep], pp[keep]
            dd = self.distances(queries[todo][pq], self.positions[pp])
            srt = np.lexsort((pp, dd, pq))
            pq, pp, dd = pq[srt], pp[srt], dd[srt]
            first = np.searchsorted(pq, np.arange(len(todo)))
            rank = np.arange(len(pq)) - first[pq]
            take = rank < k
            have = np.bincount(pq, minlength=len(todo))
            kth = np.full(len(todo), np.inf)
            full = have >= k
            kth[full] = dd[first[full] + k - 1]
            done = (full & (kth <= R * self.cellsize.min())) | covered
            if covered and not full.all():
                raise DomainError(f"fewer than {k} neighbours available")
            sel = take & done[pq]
            rows = todo[pq[sel]]
            dist[rows, rank[sel]] = dd[sel]
            idx[rows, rank[sel]] = pp[sel]
            todo = todo[~done]
            R += 1
        return dist, idx

    def ball(self, queries, radius):
        """Indices (ascending) of points within closed distance ``radius`` of each query."""
        queries = self.window.wrap(np.asarray(queries, dtype=float).reshape(-1, self.dim))
        q = len(queries)
        R = max(0, int(math.ceil(radius / self.cellsize.min())))
        if R > 0 and self._covers_all(R):
            R = int(self.ncell.max())
        pq, pp = self._gather(self._block(self._cells(queries), R))
        dd = self.distances(queries[pq], self.positions[pp])
        keep = dd <= radius
        pq, pp = pq[keep], pp[keep]
        srt = np.lexsort((pp, pq))
        pq, pp = pq[srt], pp[srt]
        # a wrapped block may visit a cell twice on tiny tori
        if len(pp):
            uniq = np.ones(len(pp), dtype=bool)
            uniq[1:] = (pq[1:] != pq[:-1]) | (pp[1:] != pp[:-1])
            pq, pp = pq[uniq], pp[uniq]
        bounds = np.searchsorted(pq, np.arange(q + 1))
        return [pp[bounds[i]:bounds[i + 1]] for i in range(q)]


def build_grid_index(positions, w=None, cell=None):
    """Convenience constructor for :class:`GridIndex`."""
    return GridIndex(positions, w, cell)


def knn_distance(t, others, k, window=None):
    """Distance from ``t`` to its k-th nearest point among ``others`` (excluding ``t`` itself)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    others = np.asarray(others, dtype=float).reshape(-1, t.size)
    others = others[~np.all(others == t, axis=1)]
    if len(others) < k:
        raise DomainError(f"need at least {k} other points, got {len(others)}")
    if window is None:
        d = np.linalg.norm(others - t, axis=1)
    else:
        d = np.linalg.norm(torus_displacement(t, others, window), axis=1)
    return float(np.partition(d, k - 1)[k - 1])
