"""Exact samplers for tail, spectral and typical-cluster configurations.

Two worked models are covered:

* reciprocal k-NN distance scores on a unit-rate Poisson process, whose
  limits are built from k uniform points in the unit ball (scaling index
  ``beta = -1``, tail index ``alpha = d k``);
* moving maxima of i.i.d. heavy-tailed marks over k-NN or ball
  neighbourhoods (``beta = 0``), sampled through Palm configurations of the
  ground process.

Fixed-size k-NN samples come in a :class:`TailBatch` (arrays of shape
``(n, k + 1, d)``) so that Monte Carlo over 10^5 draws stays vectorised.
Each batch row has the origin at index 0.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigurationError, DataError
from .grid import GridIndex
from .pattern import Pattern, ScalingMap, lexicographic_order, scale
from .scoring import KNN, BallNeighborhood, neighborhoods
from .simulate import as_generator, centered_window, sample_poisson
from .window import torus_displacement

KINDS = ("Y", "Theta", "Q", "W")


@dataclass(frozen=True)
class ScalingLaw:
    """Tail index ``alpha`` and pure-power scaling function ``r(u) = u ** beta``."""

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("tail index must be positive", "alpha")

    def r(self, u):
        return np.asarray(u, dtype=float) ** self.beta

    def scaling(self, u):
        """The map ``T_{r(u), u}``."""
        return ScalingMap(float(self.r(u)), float(u))

    @classmethod
    def knn(cls, k, d):
        return cls(alpha=float(d * k), beta=-1.0)


@dataclass(frozen=True)
class TailSample:
    config: Pattern
    kind: str
    eta: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown sample kind {self.kind!r}")


@dataclass(frozen=True)
class TailBatch:
    """``n`` configurations of equal size; row ``i`` is ``positions[i], scores[i]``.

    Scores equal to 0 mark padding (absent points).
    """

    positions: np.ndarray
    scores: np.ndarray
    kind: str
    eta: np.ndarray = None

    def __len__(self):
        return self.scores.shape[0]

    @property
    def dim(self):
        return self.positions.shape[2]

    def sample(self, i):
        keep = self.scores[i] > 0
        cfg = Pattern(self.positions[i][keep], self.scores[i][keep], dim=self.dim, check=False)
        return TailSample(cfg, self.kind, None if self.eta is None else float(self.eta[i]))

    def to_list(self):
        return [self.sample(i) for i in range(len(self))]

    def subset(self, mask):
        eta = None if self.eta is None else self.eta[mask]
        return TailBatch(self.positions[mask], self.scores[mask], self.kind, eta)


def as_batch(samples):
    """Pad a list of :class:`TailSample` into a :class:`TailBatch` (origin not reordered)."""
    if isinstance(samples, TailBatch):
        return samples
    samples = list(samples)
    if not samples:
        raise DataError("no samples")
    kinds = {s.kind for s in samples}
    if len(kinds) != 1:
        raise DataError(f"mixed sample kinds {sorted(kinds)}")
    d = samples[0].config.dim
    m = max(len(s.config) for s in samples)
    pos = np.zeros((len(samples), m, d))
    sc = np.zeros((len(samples), m))
    for i, s in enumerate(samples):
        n = len(s.config)
        pos[i, :n] = s.config.positions
        sc[i, :n] = s.config.scores
    eta = None
    if all(s.eta is not None for s in samples):
        eta = np.array([s.eta for s in samples])
    return TailBatch(pos, sc, kinds.pop(), eta)


# --- polar maps -------------------------------------------------------------

def spectral_from_tail(y, law):
    """``Theta = T_{eta^beta, eta} Y`` with ``eta`` the score at the origin."""
    eta = y.config.score_at(np.zeros(y.config.dim), default=None)
    if eta is None:
        raise DataError("tail configuration has no point at the origin")
    cfg = scale(y.config, ScalingMap(eta ** law.beta, eta))
    return TailSample(cfg, "Theta", eta)


def tail_from_spectral(theta, eta, law):
    """``Y = T_{eta^-beta, 1/eta} Theta``."""
    cfg = scale(theta.config, ScalingMap(eta ** -law.beta, 1.0 / eta))
    return TailSample(cfg, "Y", float(eta))


def batch_tail_from_spectral(batch, eta, law):
    eta = np.asarray(eta, dtype=float)
    pos = batch.positions * (eta ** law.beta)[:, None, None]
    sc = batch.scores * eta[:, None]
    return TailBatch(pos, sc, "Y", eta)


def batch_spectral_from_tail(batch, law):
    eta = batch.scores[:, 0]
    pos = batch.positions / (eta ** law.beta)[:, None, None]
    sc = batch.scores / eta[:, None]
    sc[:, 0] = 1.0
    return TailBatch(pos, sc, "Theta", eta)


# --- elementary draws ---------------------------------------------------------

def sample_pareto_eta(alpha, rng, size=None):
    """Pareto(alpha) on [1, inf): ``P(eta > y) = y ** -alpha``."""
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive", "alpha")
    u = 1.0 - as_generator(rng).random(size)
    return u ** (-1.0 / alpha)


def uniform_sphere(n, d, rng):
    gen = as_generator(rng)
    if d == 1:
        return np.where(gen.random((n, 1)) < 0.5, -1.0, 1.0)
    g = gen.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def uniform_ball(n, d, rng):
    gen = as_generator(rng)
    direction = uniform_sphere(n, d, gen)
    return direction * gen.random((n, 1)) ** (1.0 / d)


def batch_knn_rho(positions, k):
    """k-th nearest-neighbour distance of every point within each row.

    Distances come from one antisymmetric difference array so that
    ``|a - b|`` and ``|b - a|`` are bitwise equal; ties in the limit
    configurations are therefore resolved exactly.
    """
    diff = positions[:, :, None, :] - positions[:, None, :, :]
    dist = np.sqrt(np.einsum("nijk,nijk->nij", diff, diff))
    # column 0 of the sorted rows is the zero self-distance
    return np.sort(dist, axis=2)[:, :, k]


# --- k-NN model ---------------------------------------------------------------

def knn_tail_Y_batch(k, d, n, rng):
    """``n`` draws of the tail configuration ``Psi({0, U_1, ..., U_k})``."""
    gen = as_generator(rng)
    pos = np.zeros((n, k + 1, d))
    pos[:, 1:, :] = uniform_ball(n * k, d, gen).reshape(n, k, d)
    scores = 1.0 / batch_knn_rho(pos, k)
    return TailBatch(pos, scores, "Y", scores[:, 0].copy())


def knn_theta_batch(k, d, n, rng):
    """``n`` draws of the spectral configuration ``Psi({0, U_1, .., U_{k-1}, U'_k})``.

    ``U'_k`` is uniform on the unit sphere.  Scores are returned as
    ``rho_k(0) / rho_k(t)`` so that the origin carries exactly 1.
    """
    gen = as_generator(rng)
    pos = np.zeros((n, k + 1, d))
    if k > 1:
        pos[:, 1:k, :] = uniform_ball(n * (k - 1), d, gen).reshape(n, k - 1, d)
    pos[:, k, :] = uniform_sphere(n, d, gen)
    rho = batch_knn_rho(pos, k)
    scores = rho[:, :1] / rho
    return TailBatch(pos, scores, "Theta")


def knn_Q_batch(k, d, n, rng, max_rounds=10_000):
    """``n`` draws of the typical cluster: spectral draws accepted when the first maximum is at 0."""
    gen = as_generator(rng)
    parts, got = [], 0
    for _ in range(max_rounds):
        need = n - got
        if need <= 0:
            break
        th = knn_theta_batch(k, d, max(64, int(need * 2.2)), gen)
        ok = batch_anchor_index(th.positions, th.scores, "fm") == 0
        acc = th.subset(ok)
        parts.append(acc.subset(np.arange(min(need, len(acc)))))
        got += len(parts[-1])
    pos = np.concatenate([p.positions for p in parts])
    sc = np.concatenate([p.scores for p in parts])
    return TailBatch(pos, sc, "Q")


def sample_knn_tail_Y(k, d, rng):
    return knn_tail_Y_batch(k, d, 1, rng).sample(0)


def sample_knn_spectral_Theta(k, d, rng):
    return knn_theta_batch(k, d, 1, rng).sample(0)


def sample_knn_typical_Q(k, d, rng):
    return knn_Q_batch(k, d, 1, rng).sample(0)


# --- anchors on batches ---------------------------------------------------------

def _lexmin_index(positions, mask):
    """Index of the lexicographically smallest masked position per row (-1 if none)."""
    mask = mask.copy()
    for j in range(positions.shape[2]):
        coord = np.where(mask, positions[:, :, j], np.inf)
        mask &= coord == coord.min(axis=1, keepdims=True)
    idx = np.argmax(mask, axis=1)
    idx[~mask.any(axis=1)] = -1
    return idx


def batch_anchor_index(positions, scores, anchor="fm", level=1.0):
    """Row-wise anchor point index.

    ``"fm"``: first position attaining the maximal score.  ``"fe"``: first
    position with score above ``level`` (``-1`` when there is none; the
    anchor is then the origin by convention).
    """
    present = scores > 0
    if anchor == "fm":
        mask = present & (scores == np.where(present, scores, -np.inf).max(axis=1, keepdims=True))
    elif anchor == "fe":
        mask = present & (scores > level)
    else:
        raise ConfigurationError(f"unknown anchor {anchor!r}", "anchor")
    return _lexmin_index(positions, mask)


def batch_anchor_at_origin(positions, scores, anchor="fm", level=1.0):
    idx = batch_anchor_index(positions, scores, anchor, level)
    rows = np.arange(len(idx))
    at = np.all(positions[rows, np.maximum(idx, 0)] == 0.0, axis=1)
    if anchor == "fe":
        # no exceedance: the anchor is the origin by convention
        at = np.where(idx < 0, True, at)
    return at


# --- moving maxima --------------------------------------------------------------

def neighborhood_quantile_radius(nb, d, q=0.99):
    """Radius containing the whole neighbourhood of 0 with probability ``q`` (unit intensity)."""
    if isinstance(nb, BallNeighborhood):
        return nb.radius
    vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    # P(rho_k <= r) = P(Poisson(vol r^d) >= k) = gammainc(k, vol r^d)
    x = special.gammaincinv(nb.k, q)
    return (x / vol) ** (1.0 / d)


def default_moving_max_window(nb, d):
    side = 10.0 * 2.0 * neighborhood_quantile_radius(nb, d)
    return centered_window(side, d)


def _palm_ground(nb, window, gen, which=None):
    """``P' + delta_0`` on ``window`` with the origin at index 0, plus neighbourhoods.

    ``which`` selects the points whose neighbourhoods are computed (all by default).
    """
    ground = sample_poisson(window, 1.0, gen)
    pos = np.vstack([np.zeros((1, window.dim)), ground.positions])
    p = Pattern(pos, np.ones(len(pos)), dim=window.dim, domain=window, check=False)
    return p, neighborhoods(p, nb, GridIndex(p.positions, window), which)


def _members(nbs, target):
    """Boolean mask of points whose neighbourhood contains index ``target``."""
    if isinstance(nbs, np.ndarray):
        return np.any(nbs == target, axis=1)
    return np.array([target in nb_i for nb_i in nbs])


def _check_extent(p, nb0, window):
    reach = np.linalg.norm(torus_displacement(np.zeros(window.dim), p.positions[nb0], window),
                           axis=1).max()
    if reach > min(window.sides) / 4.0:
        warnings.warn(f"neighbourhood of the origin reaches {reach:.3g}, more than a quarter "
                      f"of the window side; enlarge the window", RuntimeWarning, stacklevel=3)


def sample_moving_max_W(nb, w, window=None, rng=None):
    """Reversed-neighbourhood weights ``{(t, w(-t)) : 0 in Phi(t)}`` of a Palm configuration."""
    if window is None:
        raise ConfigurationError("a window (or default_moving_max_window) is required", "window")
    gen = as_generator(rng)
    d = window.dim
    p, nbs = _palm_ground(nb, window, gen)
    _check_extent(p, nbs[0], window)
    hit = np.flatnonzero(_members(nbs, 0))
    t = p.positions[hit]
    s = w(torus_displacement(t, np.zeros(d), window))
    keep = s > 0
    return TailSample(Pattern(t[keep], s[keep], dim=d, check=False), "W")


def sample_phi0(nb, window, rng):
    """Displacements of the points of ``Phi(0)`` in a Palm configuration (origin first)."""
    p, nbs = _palm_ground(nb, window, as_generator(rng), which=[0])
    return torus_displacement(np.zeros(window.dim), p.positions[nbs[0]], window)


def sample_moving_max_Theta(nb, w, alpha, window=None, rng=None, envelope=None,
                            max_tries=100_000):
    """Spectral configuration of the moving-maxima model via the tilted Palm law.

    A Palm ground configuration is accepted with probability
    ``sum_{x in Phi(0)} w(x)^alpha / envelope``; ``envelope`` defaults to
    ``(k + 1) * sup(w)^alpha`` for k-NN neighbourhoods and must be supplied
    (as an almost-sure bound) for ball neighbourhoods.  Then ``V`` is picked
    in ``Phi(0)`` proportionally to ``w(V)^alpha`` and the configuration
    ``{(t, w(V - t) / w(V)) : V in Phi(t)}`` is returned without zero scores.
    """
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive", "alpha")
    if window is None:
        raise ConfigurationError("a window (or default_moving_max_window) is required", "window")
    gen = as_generator(rng)
    d = window.dim
    if envelope is None:
        if nb.max_size is None:
            raise ConfigurationError("ball neighbourhoods need an explicit envelope bound",
                                     "envelope")
        envelope = nb.max_size * w.sup ** alpha
    for _ in range(max_tries):
        p, nbs = _palm_ground(nb, window, gen)
        nb0 = np.asarray(nbs[0])
        wx = w(torus_displacement(np.zeros(d), p.positions[nb0], window)) ** alpha
        total = wx.sum()
        if total > envelope * (1 + 1e-12):
            raise ConfigurationError(f"envelope {envelope} below realised weight {total}",
                                     "envelope")
        if total <= 0 or gen.random() * envelope >= total:
            continue
        _check_extent(p, nb0, window)
        v = nb0[gen.choice(len(nb0), p=wx / total)]
        hit = np.flatnonzero(_members(nbs, v))
        t = p.positions[hit]
        wv = w(torus_displacement(np.zeros(d), p.positions[v], window))
        s = w(torus_displacement(t, p.positions[v], window)) / wv
        keep = s > 0
        return TailSample(Pattern(t[keep], s[keep], dim=d, check=False), "Theta")
    raise RuntimeError("tilted sampler did not accept a configuration")


# --- empirical extraction --------------------------------------------------------

def empirical_tail_configs(x, u, law, cutoff_radius=None, index=None):
    """Rescaled neighbourhoods of every exceedance of level ``u`` in ``x``.

    Each point ``(t, s)`` with ``s > u`` is moved to the origin, positions
    are divided by ``r(u)`` and scores by ``u``, and the result is restricted
    to the (scaled) ball of radius ``cutoff_radius``.  The default cutoff is
    half the scaled window side.
    """
    if not u > 0:
        raise DataError("threshold must be positive")
    exc = np.flatnonzero(x.scores > u)
    if len(exc) == 0:
        return []
    ru = float(law.r(u))
    if cutoff_radius is None:
        if x.domain is None:
            raise DataError("cutoff_radius is required for patterns without a domain")
        cutoff_radius = min(x.domain.sides) / (2.0 * ru)
    index = index or GridIndex(x.positions, x.domain)
    found = index.ball(x.positions[exc], cutoff_radius * ru)
    out = []
    for i, nb_i in zip(exc, found):
        if x.domain is not None:
            disp = torus_displacement(x.positions[i], x.positions[nb_i], x.domain)
        else:
            disp = x.positions[nb_i] - x.positions[i]
        disp[nb_i == i] = 0.0
        keep = np.linalg.norm(disp, axis=1) < cutoff_radius * ru
        out.append(Pattern(disp[keep] / ru, x.scores[nb_i][keep] / u, dim=x.dim, check=False))
    return out


def tail_configs_to_batch(patterns, kind="Y"):
    samples = []
    for cfg in patterns:
        # put the origin first so batch conventions hold
        i0 = cfg.origin_index()
        order = np.concatenate([[i0], np.delete(np.arange(len(cfg)), i0)])
        c = cfg.take(order)
        samples.append(TailSample(c, kind, float(c.scores[0])))
    return as_batch(samples)


def sort_lexicographic(cfg):
    return cfg.take(lexicographic_order(cfg.positions))


__all__ = [
    "ScalingLaw", "TailBatch", "TailSample", "as_batch", "batch_anchor_at_origin",
    "batch_anchor_index", "batch_knn_rho", "batch_spectral_from_tail",
    "batch_tail_from_spectral", "default_moving_max_window", "empirical_tail_configs",
    "knn_Q_batch", "knn_tail_Y_batch", "knn_theta_batch", "neighborhood_quantile_radius",
    "sample_knn_spectral_Theta", "sample_knn_tail_Y", "sample_knn_typical_Q",
    "sample_moving_max_Theta", "sample_moving_max_W", "sample_pareto_eta", "sample_phi0",
    "spectral_from_tail", "tail_configs_to_batch", "tail_from_spectral",
    "uniform_ball", "uniform_sphere",
]
