"""Block partition of ``[0, tau]^d``, extremal-block extraction and cluster metrics.

The metrics compare finite patterns:

``metric_m0``
    bottleneck matching distance, 1 when point counts differ;
``metric_m``
    ``int_0^inf m0(a^{1/u}, b^{1/u}) e^{-u} du`` where ``a^{1/u}`` keeps the
    scores above ``1/u``.  The integrand is piecewise constant between the
    reciprocal scores, so the integral is a finite sum;
``metric_m_tilde``
    the infimum of ``metric_m`` over translations, searched over the
    point-alignment shifts and refined by coordinate descent.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import ConfigurationError, DataError
from .pattern import Box, Pattern, from_rows, restrict, scale, shift, to_rows


@dataclass(frozen=True)
class BlockGrid:
    """Blocks ``prod_j [(i_j - 1) b, i_j b]`` for ``i in {1..k}^d`` with ``k = floor(tau / b)``."""

    tau: float
    b_tau: float
    dim: int

    def __post_init__(self):
        if not (self.tau > 0 and self.b_tau > 0):
            raise ConfigurationError("tau and b_tau must be positive", "b_tau")
        if self.b_tau > self.tau:
            raise ConfigurationError(f"block side {self.b_tau} exceeds tau {self.tau}", "b_tau")

    @property
    def k_tau(self):
        # tolerate b_tau dividing tau up to rounding
        return int(math.floor(self.tau / self.b_tau * (1 + 1e-12)))

    @property
    def n_blocks(self):
        return self.k_tau ** self.dim

    def block_box(self, index):
        i = np.asarray(index, dtype=float)
        return Box(tuple((i - 1) * self.b_tau), tuple(i * self.b_tau))

    def block_indices(self, positions):
        """1-based block index of each position; rows of zeros mark points outside all blocks.

        A point on a shared face belongs to the lower-index block.
        """
        x = np.asarray(positions, dtype=float)
        i = np.ceil(x / self.b_tau).astype(np.int64)
        i = np.where(x == 0, 1, i)
        inside = np.all((i >= 1) & (i <= self.k_tau), axis=1)
        i[~inside] = 0
        return i

    def grid_position(self, index):
        return np.asarray(index, dtype=float) * self.b_tau / self.tau


@dataclass(frozen=True)
class ClusterEntry:
    grid_position: tuple
    cluster: Pattern
    raw_max: float
    a_tau: float
    epsilon: float
    index: tuple = None

    def to_json(self):
        return json.dumps({
            "grid_position": [float(x) for x in self.grid_position],
            "raw_max": float(self.raw_max),
            "a_tau": float(self.a_tau),
            "epsilon": float(self.epsilon),
            "cluster": to_rows(self.cluster),
        })

    @classmethod
    def from_json(cls, line):
        obj = json.loads(line)
        dim = len(obj["grid_position"])
        return cls(tuple(obj["grid_position"]), from_rows(obj["cluster"], dim=dim),
                   obj["raw_max"], obj["a_tau"], obj["epsilon"])


def default_b_tau(tau, r_a):
    """Geometric mean ``sqrt(tau * r(a_tau))`` of the admissible range; ``sqrt(tau)`` when r = 1."""
    return math.sqrt(tau * r_a)


def default_l_tau(b_tau, r_a):
    return math.sqrt(b_tau * r_a)


def partition_blocks(x, tau, b_tau):
    """Nonempty blocks of ``x`` as ``[(index, Pattern), ...]`` sorted by index."""
    grid = BlockGrid(tau, b_tau, x.dim)
    idx = grid.block_indices(x.positions)
    inside = np.flatnonzero(idx[:, 0] > 0)
    if len(inside) == 0:
        return []
    keys = idx[inside]
    order = np.lexsort(keys.T[::-1])
    keys, inside = keys[order], inside[order]
    cut = np.flatnonzero(np.any(keys[1:] != keys[:-1], axis=1)) + 1
    out = []
    for grp in np.split(np.arange(len(inside)), cut):
        out.append((tuple(int(v) for v in keys[grp[0]]), x.take(inside[grp])))
    return out


def trim_block(block, index, b_tau, l_tau):
    """Restrict ``block`` to its block box shrunk by ``l_tau`` on every side."""
    if not 2 * l_tau < b_tau:
        raise ConfigurationError(f"trimming {l_tau} empties blocks of side {b_tau}", "l_tau")
    i = np.asarray(index, dtype=float)
    box = Box(tuple((i - 1) * b_tau + l_tau), tuple(i * b_tau - l_tau))
    return restrict(block, box)


def extract_N_tau(x, grid, a_tau, law, epsilon=1.0, l_tau=None):
    """Extremal blocks (block max > ``a_tau * epsilon``) rescaled by ``T_{r(a_tau), a_tau}``.

    With ``l_tau`` a block is selected only when the exceedance lies in its
    trimmed part (at distance at least ``l_tau`` from every face); the
    returned cluster is still the whole block.  Clusters straddling a face
    are then dropped instead of being cut in two.
    """
    if not (a_tau > 0 and epsilon > 0):
        raise ConfigurationError("a_tau and epsilon must be positive", "epsilon")
    idx = grid.block_indices(x.positions)
    inside = idx[:, 0] > 0
    exceed = inside & (x.scores > a_tau * epsilon)
    if l_tau:
        if not 2 * l_tau < grid.b_tau:
            raise ConfigurationError(f"trimming {l_tau} empties blocks of side {grid.b_tau}",
                                     "l_tau")
        rel = x.positions - (idx - 1) * grid.b_tau
        exceed &= np.all((rel >= l_tau) & (rel <= grid.b_tau - l_tau), axis=1)
    if not exceed.any():
        return []
    hot = np.unique(idx[exceed], axis=0)
    in_hot = inside & _rows_in(idx, hot)
    entries = []
    sm = law.scaling(a_tau)
    pts, keys = np.flatnonzero(in_hot), idx[in_hot]
    for h in hot:
        members = pts[np.all(keys == h, axis=1)]
        block = Pattern(x.positions[members], x.scores[members], dim=x.dim, check=False)
        entries.append(ClusterEntry(tuple(grid.grid_position(h)), scale(block, sm),
                                    float(block.scores.max()), float(a_tau), float(epsilon),
                                    tuple(int(v) for v in h)))
    return entries


def _rows_in(rows, table):
    table = {tuple(r) for r in table}
    return np.array([tuple(r) in table for r in rows], dtype=bool)


def write_entries(entries, path):
    with open(path, "w") as fh:
        for e in entries:
            fh.write(e.to_json() + "\n")


def read_entries(path):
    with open(path) as fh:
        return [ClusterEntry.from_json(line) for line in fh if line.strip()]


# --- metrics -------------------------------------------------------------------

def _bottleneck(cost):
    """Smallest ``c`` such that a perfect matching exists using entries ``<= c``."""
    k = cost.shape[0]
    cand = np.unique(cost)
    # any perfect matching uses an entry at least as large as every row/column minimum
    lower = max(cost.min(axis=1).max(), cost.min(axis=0).max())
    cand = cand[cand >= lower]
    lo, hi = 0, len(cand) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        graph = csr_matrix(cost <= cand[mid])
        if np.all(maximum_bipartite_matching(graph, perm_type="column") >= 0):
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo]) if k else 0.0


def _m0_arrays(pa, sa, pb, sb):
    if len(sa) != len(sb):
        return 1.0
    if len(sa) == 0:
        return 0.0
    dt = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
    ds = np.abs(sa[:, None] - sb[None, :])
    cost = np.minimum(np.maximum(dt, ds), 1.0)
    return _bottleneck(cost)


def metric_m0(a, b):
    """Bottleneck distance between equal-size patterns; 1 if sizes differ."""
    return _m0_arrays(a.positions, a.scores, b.positions, b.scores)


def metric_m(a, b):
    """Exact value of ``int_0^inf m0(a^{1/u}, b^{1/u}) e^{-u} du``."""
    if len(a) == 0 and len(b) == 0:
        return 0.0
    # a point with score s is present for u > 1/s
    breaks = np.unique(np.concatenate([1.0 / a.scores, 1.0 / b.scores]))
    total = 0.0
    for j, c in enumerate(breaks):
        nxt = breaks[j + 1] if j + 1 < len(breaks) else np.inf
        # present on (c, nxt) are exactly the points with 1/s <= c
        ka = 1.0 / a.scores <= c
        kb = 1.0 / b.scores <= c
        m0 = _m0_arrays(a.positions[ka], a.scores[ka], b.positions[kb], b.scores[kb])
        if m0:
            total += m0 * (math.exp(-c) - (0.0 if nxt == np.inf else math.exp(-nxt)))
    return float(total)


def metric_m_tilde(a, b, tol=1e-6):
    """Upper bound (within ``tol``) on ``inf_z m(shift(a, z), b)``.

    Candidate shifts align one point of ``a`` with one point of ``b``; the
    best candidate is refined by coordinate descent with step halving.
    """
    if a.dim != b.dim:
        raise DataError("patterns differ in dimension")
    d = a.dim
    cands = [np.zeros(d)]
    if len(a) and len(b):
        cands.extend((a.positions[:, None, :] - b.positions[None, :, :]).reshape(-1, d))

    def f(z):
        return metric_m(shift(a, z), b)

    best_z, best = cands[0], f(cands[0])
    for z in cands[1:]:
        if best == 0.0:
            break
        v = f(z)
        if v < best:
            best_z, best = z, v
    if best == 0.0 or not (len(a) and len(b)):
        return best
    spread = np.ptp(np.vstack([a.positions, b.positions]), axis=0).max()
    step = max(spread, 1e-3) / 4.0
    z = np.array(best_z, dtype=float)
    while step > tol:
        improved = False
        for j in range(d):
            for sgn in (1.0, -1.0):
                trial = z.copy()
                trial[j] += sgn * step
                v = f(trial)
                if v < best:
                    z, best, improved = trial, v, True
        if not improved:
            step /= 2.0
    return best


__all__ = [
    "BlockGrid", "ClusterEntry", "default_b_tau", "default_l_tau", "extract_N_tau",
    "metric_m", "metric_m0", "metric_m_tilde", "partition_blocks", "read_entries",
    "trim_block", "write_entries",
]
