"""Finite simple counting measures on R^d x (0, inf).

A :class:`Pattern` holds point positions and strictly positive scores.
Instances are immutable; every operation returns a new pattern.
"""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError
from .window import SimWindow


@dataclass(frozen=True)
class ScalingMap:
    """The map (t, s) -> (t / space_factor, s / score_factor)."""

    space_factor: float
    score_factor: float

    def __post_init__(self):
        if not (self.space_factor > 0 and self.score_factor > 0):
            raise DataError("scaling factors must be positive")

    def inverse(self):
        return ScalingMap(1.0 / self.space_factor, 1.0 / self.score_factor)


class Pattern:
    """Marked point pattern with positive scores.

    Parameters
    ----------
    positions : array_like, shape (n, d)
    scores : array_like, shape (n,)
    dim : int, optional
        Required when the pattern is empty and ``positions`` carries no shape.
    domain : SimWindow, optional
        Simulation window; torus windows make distance queries periodic.
    drop_zero : bool
        Silently drop points with score 0 (negative scores still raise).
    check : bool
        Validate finiteness and simpleness.  Internal callers that already
        hold validated arrays pass ``False``.
    """

    __slots__ = ("positions", "scores", "domain")

    def __init__(self, positions, scores, dim=None, domain=None, drop_zero=True, check=True):
        scores = np.asarray(scores, dtype=float).reshape(-1)
        positions = np.asarray(positions, dtype=float)
        if positions.size == 0:
            if dim is None:
                dim = positions.shape[-1] if positions.ndim == 2 else (
                    domain.dim if domain is not None else None)
            if dim is None:
                raise DataError("dimension of an empty pattern must be given")
            positions = positions.reshape(0, dim)
        elif positions.ndim == 1:
            positions = positions.reshape(-1, 1) if dim in (None, 1) else positions.reshape(-1, dim)
        if positions.ndim != 2 or positions.shape[0] != scores.shape[0]:
            raise DataError(f"positions {positions.shape} and scores {scores.shape} do not match")
        if dim is not None and positions.shape[1] != dim:
            raise DataError(f"expected dimension {dim}, got {positions.shape[1]}")
        if domain is not None and domain.dim != positions.shape[1]:
            raise DataError("domain dimension differs from pattern dimension")
        if check:
            if not np.all(np.isfinite(positions)) or not np.all(np.isfinite(scores)):
                raise DataError("positions and scores must be finite")
            if np.any(scores < 0):
                raise DataError("scores must be positive")
        if drop_zero and np.any(scores == 0):
            keep = scores > 0
            positions, scores = positions[keep], scores[keep]
        elif check and np.any(scores == 0):
            raise DataError("scores must be positive")
        if check and len(scores) > 1:
            if len(np.unique(positions, axis=0)) != len(scores):
                raise DataError("pattern is not simple: duplicate positions")
        positions = np.array(positions, dtype=float, copy=True)
        scores = np.array(scores, dtype=float, copy=True)
        positions.flags.writeable = False
        scores.flags.writeable = False
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):
        raise AttributeError("Pattern is immutable")

    @classmethod
    def empty(cls, dim, domain=None):
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim, domain=domain)

    @classmethod
    def from_points(cls, points, dim=None, domain=None):
        """Build from ``[(position, score), ...]``; scalar positions mean d=1."""
        points = list(points)
        if not points:
            return cls.empty(dim if dim is not None else 1, domain)
        pos = np.array([np.atleast_1d(np.asarray(t, dtype=float)) for t, _ in points])
        return cls(pos, [s for _, s in points], dim=dim, domain=domain)

    @property
    def dim(self):
        return self.positions.shape[1]

    def __len__(self):
        return len(self.scores)

    def __iter__(self):
        for t, s in zip(self.positions, self.scores):
            yield t, s

    def __repr__(self):
        return f"Pattern(n={len(self)}, dim={self.dim})"

    def _replace(self, positions=None, scores=None, domain=False, check=False):
        return Pattern(self.positions if positions is None else positions,
                       self.scores if scores is None else scores,
                       dim=self.dim,
                       domain=self.domain if domain is False else domain,
                       check=check)

    def take(self, mask_or_index):
        return self._replace(self.positions[mask_or_index], self.scores[mask_or_index])

    def with_scores(self, scores):
        return self._replace(scores=np.asarray(scores, dtype=float), check=False)

    def canonical(self):
        """Positions and scores sorted lexicographically by position."""
        order = lexicographic_order(self.positions)
        return self.positions[order], self.scores[order]

    def allclose(self, other, atol=1e-12):
        if self.dim != other.dim or len(self) != len(other):
            return False
        p1, s1 = self.canonical()
        p2, s2 = other.canonical()
        return bool(np.allclose(p1, p2, rtol=0, atol=atol) and np.allclose(s1, s2, rtol=0, atol=atol))

    def __eq__(self, other):
        if not isinstance(other, Pattern):
            return NotImplemented
        return self.allclose(other, atol=0.0)

    __hash__ = None

    def score_at(self, t, default=0.0):
        """Score of the point located exactly at ``t`` (``default`` if none)."""
        hit = np.all(self.positions == np.asarray(t, dtype=float), axis=1)
        return float(self.scores[hit][0]) if hit.any() else default

    def origin_index(self):
        hit = np.flatnonzero(np.all(self.positions == 0.0, axis=1))
        return int(hit[0]) if len(hit) else None


def lexicographic_order(positions):
    """Indices sorting rows of ``positions`` with the first coordinate most significant."""
    positions = np.asarray(positions)
    if positions.shape[0] == 0:
        return np.zeros(0, dtype=int)
    return np.lexsort(positions.T[::-1])


def shift(p, z):
    """Translate positions by ``-z``; scores are unchanged."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (p.dim,):
        raise DataError(f"shift vector has shape {z.shape}, pattern dimension is {p.dim}")
    domain = p.domain.shifted(z) if p.domain is not None else None
    return p._replace(p.positions - z, domain=domain)


def scale(p, m):
    """Apply ``(t, s) -> (t / v, s / u)`` for ``m = ScalingMap(v, u)``."""
    domain = p.domain.scaled(m.space_factor) if p.domain is not None else None
    return p._replace(p.positions / m.space_factor, p.scores / m.score_factor, domain=domain)


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball."""

    center: tuple
    radius: float

    def contains(self, positions):
        c = np.asarray(self.center, dtype=float)
        return np.linalg.norm(np.asarray(positions) - c, axis=-1) < self.radius


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box."""

    lower: tuple
    upper: tuple

    def contains(self, positions):
        x = np.asarray(positions)
        return np.all((x >= np.asarray(self.lower)) & (x <= np.asarray(self.upper)), axis=-1)


def restrict(p, region=None, score_floor=0.0):
    """Keep points inside ``region`` (``None`` = everywhere) with score > ``score_floor``."""
    keep = p.scores > score_floor
    if region is not None:
        keep &= region.contains(p.positions)
    return p.take(keep)


def max_score(p):
    """Largest score; 0 for the empty pattern."""
    return float(p.scores.max()) if len(p) else 0.0


def _lexmin(positions):
    return positions[lexicographic_order(positions)[0]]


def anchor_first_max(p):
    """Lexicographically smallest position among the points attaining the maximal score."""
    if len(p) == 0:
        raise DomainError("first-maximum anchor is undefined for the empty pattern")
    top = p.positions[p.scores == p.scores.max()]
    return _lexmin(top).copy()


def anchor_first_exceedance(p, y=1.0):
    """Lexicographically smallest position with score > ``y``; the origin if there is none."""
    exc = p.positions[p.scores > y]
    if len(exc) == 0:
        return np.zeros(p.dim)
    return _lexmin(exc).copy()


# --- serialization -------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def to_csv(p):
    """CSV text with header ``x1,...,xd,score``; floats use round-trip repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{j + 1}" for j in range(p.dim)] + ["score"])
    for t, s in p:
        writer.writerow([_fmt(x) for x in t] + [_fmt(s)])
    return buf.getvalue()


def from_csv(text, domain=None):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError("empty CSV document")
    header = rows[0]
    dim = len(header) - 1
    if dim < 1 or header[-1] != "score" or header[:-1] != [f"x{j + 1}" for j in range(dim)]:
        raise DataError(f"bad pattern CSV header {header}")
    body = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float).reshape(-1, dim + 1)
    return Pattern(body[:, :dim], body[:, dim], dim=dim, domain=domain)


def write_csv(p, path):
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(p))


def read_csv(path, domain=None):
    with open(path) as fh:
        return from_csv(fh.read(), domain=domain)


def to_rows(p):
    return [[float(x) for x in t] + [float(s)] for t, s in p]


def from_rows(rows, dim=None, domain=None):
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return Pattern.empty(dim if dim is not None else 1, domain)
    return Pattern(arr[:, :-1], arr[:, -1], dim=dim, domain=domain)


def to_json(p):
    """JSON array of ``[x1, ..., xd, score]`` rows."""
    return json.dumps(to_rows(p))


def from_json(text, dim=None, domain=None):
    return from_rows(json.loads(text), dim=dim, domain=domain)


__all__ = [
    "Ball", "Box", "Pattern", "ScalingMap", "SimWindow",
    "anchor_first_exceedance", "anchor_first_max", "from_csv", "from_json",
    "from_rows", "lexicographic_order", "max_score", "read_csv", "restrict",
    "scale", "shift", "to_csv", "to_json", "to_rows", "write_csv",
]
