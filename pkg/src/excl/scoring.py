"""Scoring rules: reciprocal k-NN distance and moving maxima over neighbourhoods.

``apply_scores`` attaches to every point ``t`` of a pattern the score
``psi(t, pattern)``.  Geometric queries run on a :class:`GridIndex` built
over the pattern's domain, so torus domains give periodic neighbourhoods.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import GridIndex, build_grid_index, knn_distance
from .pattern import Pattern
from .simulate import as_generator
from .window import torus_displacement

# --- neighbourhoods and weights -----------------------------------------


@dataclass(frozen=True)
class KNN:
    """``t`` together with its ``k`` nearest neighbours."""

    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError("k must be a positive integer", "neighborhood.k")

    @property
    def max_size(self):
        return self.k + 1


@dataclass(frozen=True)
class BallNeighborhood:
    """All points within closed distance ``radius`` of ``t`` (including ``t``)."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError("radius must be positive", "neighborhood.radius")

    max_size = None


@dataclass(frozen=True)
class Dirac:
    """``w(0) = 1`` and ``w = 0`` elsewhere."""

    sup = 1.0

    def __call__(self, x):
        return np.all(np.asarray(x) == 0, axis=-1).astype(float)


@dataclass(frozen=True)
class Const1:
    sup = 1.0

    def __call__(self, x):
        return np.ones(np.shape(x)[:-1])


@dataclass(frozen=True)
class Exponential:
    """``w(x) = exp(-rate * |x|)``."""

    rate: float

    sup = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ConfigurationError("rate must be positive", "weight.rate")

    def __call__(self, x):
        return np.exp(-self.rate * np.linalg.norm(x, axis=-1))


@dataclass(frozen=True)
class UserGrid:
    """Radial weight interpolated from ``(radii, values)``; zero beyond the last radius."""

    radii: tuple
    values: tuple

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.shape != v.shape or r.size < 1 or r[0] != 0 or np.any(np.diff(r) <= 0):
            raise ConfigurationError("radii must start at 0 and increase", "weight.radii")
        if v[0] != 1.0 or np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigurationError("weights must be finite, nonnegative with w(0) = 1",
                                     "weight.values")
        object.__setattr__(self, "radii", tuple(r))
        object.__setattr__(self, "values", tuple(v))

    @property
    def sup(self):
        return float(max(self.values))

    def __call__(self, x):
        return np.interp(np.linalg.norm(x, axis=-1), self.radii, self.values, right=0.0)


# --- rules ----------------------------------------------------------------


@dataclass(frozen=True)
class KNNReciprocal:
    """Score ``1 / rho_k(t)``: reciprocal distance to the k-th nearest neighbour."""

    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError("k must be a positive integer", "rule.k")


@dataclass(frozen=True)
class MovingMax:
    """Score ``max_{x in nb(t)} w(x - t) * mark(x)``."""

    nb: object
    w: object


def rule_from_dict(spec):
    """Parse ``{"type": "knn", "k": 2}`` or a ``movmax`` specification."""
    try:
        kind = spec["type"]
        if kind == "knn":
            return KNNReciprocal(int(spec["k"]))
        if kind == "movmax":
            return MovingMax(neighborhood_from_dict(spec["neighborhood"]),
                             weight_from_dict(spec["weight"]))
    except KeyError as exc:
        raise ConfigurationError(f"missing key {exc}", "rule") from None
    raise ConfigurationError(f"unknown rule type {kind!r}", "rule.type")


def neighborhood_from_dict(spec):
    kind = spec.get("type")
    if kind == "knn":
        return KNN(int(spec["k"]))
    if kind == "ball":
        return BallNeighborhood(float(spec["radius"]))
    raise ConfigurationError(f"unknown neighborhood {kind!r}", "rule.neighborhood.type")


def weight_from_dict(spec):
    kind = spec.get("type")
    if kind == "dirac":
        return Dirac()
    if kind == "const1":
        return Const1()
    if kind == "exponential":
        return Exponential(float(spec["rate"]))
    if kind == "grid":
        return UserGrid(tuple(spec["radii"]), tuple(spec["values"]))
    raise ConfigurationError(f"unknown weight {kind!r}", "rule.weight.type")


def rule_to_dict(rule):
    if isinstance(rule, KNNReciprocal):
        return {"type": "knn", "k": rule.k}
    nb = rule.nb
    nbd = {"type": "knn", "k": nb.k} if isinstance(nb, KNN) else {"type": "ball",
                                                                  "radius": nb.radius}
    w = rule.w
    if isinstance(w, Dirac):
        wd = {"type": "dirac"}
    elif isinstance(w, Const1):
        wd = {"type": "const1"}
    elif isinstance(w, Exponential):
        wd = {"type": "exponential", "rate": w.rate}
    else:
        wd = {"type": "grid", "radii": list(w.radii), "values": list(w.values)}
    return {"type": "movmax", "neighborhood": nbd, "weight": wd}


# --- neighbourhood queries ------------------------------------------------


def _index(p, cell=None):
    return GridIndex(p.positions, p.domain, cell)


def neighborhoods(p, nb, index=None, which=None):
    """Neighbourhoods as index arrays (the point itself first).

    ``which`` restricts the computation to the given point indices (all
    points by default).  Returns an ``(m, k + 1)`` array for :class:`KNN`
    and a list of arrays for :class:`BallNeighborhood`.
    """
    n = len(p)
    index = index or _index(p)
    rows = np.arange(n) if which is None else np.asarray(which, dtype=np.int64).reshape(-1)
    if isinstance(nb, KNN):
        if n < nb.k + 1:
            raise DomainError(f"k-NN neighbourhood needs at least {nb.k + 1} points, got {n}")
        _, idx = index.knn(p.positions[rows], nb.k, exclude=rows)
        return np.hstack([rows[:, None], idx])
    found = index.ball(p.positions[rows], nb.radius)
    return [np.concatenate([[i], f[f != i]]) for i, f in zip(rows, found)]


def _displacements(p, origin_pos, target_pos):
    if p.domain is None:
        return np.asarray(target_pos) - np.asarray(origin_pos)
    return torus_displacement(origin_pos, target_pos, p.domain)


def knn_scores(p, k, index=None):
    """Reciprocal k-NN distances of every point of ``p``."""
    n = len(p)
    if n < k + 1:
        raise DomainError(f"k-NN scoring needs at least {k + 1} points, got {n}")
    index = index or _index(p)
    dist, _ = index.knn(p.positions, k, exclude=np.arange(n))
    return 1.0 / dist[:, k - 1]


def moving_max_scores(p, nb, w, index=None):
    """Moving-maxima scores; the input scores of ``p`` are the marks."""
    nbs = neighborhoods(p, nb, index)
    marks = p.scores
    if isinstance(nbs, np.ndarray):
        disp = _displacements(p, p.positions[:, None, :], p.positions[nbs])
        return np.max(w(disp) * marks[nbs], axis=1)
    out = np.empty(len(p))
    for i, nb_i in enumerate(nbs):
        disp = _displacements(p, p.positions[i], p.positions[nb_i])
        out[i] = np.max(w(disp) * marks[nb_i])
    return out


def apply_scores(p, rule, cell=None):
    """Return ``p`` with every score replaced by the rule's score; zero scores are dropped."""
    index = _index(p, cell) if len(p) else None
    if isinstance(rule, KNNReciprocal):
        scores = knn_scores(p, rule.k, index)
    elif isinstance(rule, MovingMax):
        if len(p) == 0:
            return p
        scores = moving_max_scores(p, rule.nb, rule.w, index)
    else:
        raise ConfigurationError(f"unsupported rule {rule!r}", "rule")
    return Pattern(p.positions, scores, dim=p.dim, domain=p.domain, check=False)


def palm_score_at_origin(p_palm, rule):
    """Score of the point at the origin of a Palm configuration."""
    i0 = p_palm.origin_index()
    if i0 is None:
        raise DomainError("Palm pattern has no point at the origin")
    others = np.delete(np.arange(len(p_palm)), i0)
    if isinstance(rule, KNNReciprocal):
        pos = p_palm.positions[others]
        if p_palm.domain is not None and p_palm.domain.torus:
            d = np.sort(np.linalg.norm(torus_displacement(np.zeros(p_palm.dim), pos,
                                                          p_palm.domain), axis=1))
            if len(d) < rule.k:
                raise DomainError("too few points for k-NN score")
            return 1.0 / d[rule.k - 1]
        return 1.0 / knn_distance(np.zeros(p_palm.dim), pos, rule.k)
    scored = apply_scores(p_palm, rule)
    s = scored.score_at(np.zeros(p_palm.dim), default=0.0)
    return s


def sample_palm_knn_scores(k, d, n, rng, half_width=None, chunk=50_000):
    """``n`` i.i.d. copies of the score at the origin of ``P + delta_0`` for the k-NN rule.

    ``P`` is a unit-rate Poisson process on the cube ``[-h, h]^d``; draws in
    which fewer than ``k`` points fall inside the inscribed ball of radius
    ``h`` are redrawn with a doubled ``h``, so the returned scores are exact
    Palm draws.
    """
    gen = as_generator(rng)
    if half_width is None:
        half_width = max(2.0, 2.0 * (k / 1.0) ** (1.0 / d))
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = min(chunk, n - filled)
        rho = _kth_distance_from_origin(k, d, m, gen, half_width)
        bad = ~np.isfinite(rho)
        h = half_width
        while bad.any():
            h *= 2.0
            rho[bad] = _kth_distance_from_origin(k, d, int(bad.sum()), gen, h)
            bad = ~np.isfinite(rho)
        out[filled:filled + m] = 1.0 / rho
        filled += m
    return out


def _kth_distance_from_origin(k, d, m, gen, h):
    counts = gen.poisson((2.0 * h) ** d, size=m)
    total = int(counts.sum())
    pts = (gen.random((total, d)) * 2.0 - 1.0) * h
    r = np.linalg.norm(pts, axis=1)
    owner = np.repeat(np.arange(m), counts)
    order = np.lexsort((r, owner))
    r, owner = r[order], owner[order]
    first = np.searchsorted(owner, np.arange(m))
    rho = np.full(m, np.inf)
    ok = counts >= k
    cand = r[np.minimum(first + k - 1, max(total - 1, 0))] if total else np.zeros(m)
    rho[ok] = cand[ok]
    rho[rho >= h] = np.inf
    return rho


__all__ = [
    "BallNeighborhood", "Const1", "Dirac", "Exponential", "GridIndex", "KNN",
    "KNNReciprocal", "MovingMax", "UserGrid", "apply_scores", "build_grid_index",
    "knn_distance", "knn_scores", "moving_max_scores", "neighborhoods",
    "neighborhood_from_dict", "palm_score_at_origin", "rule_from_dict",
    "rule_to_dict", "sample_palm_knn_scores", "weight_from_dict",
]
