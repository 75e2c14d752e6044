"""Seeded generation of Poisson configurations and i.i.d. marks.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=(stream,))``.  A given ``(seed, stream)``
pair always reproduces the same draws, and distinct stream ids give
statistically independent sequences.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .pattern import Pattern
from .window import HARD, TORUS, SimWindow, torus_displacement

MAX_EXPECTED_POINTS = 5e8


@dataclass
class RngStream:
    """Stateful random stream identified by ``(seed, stream)``."""

    seed: int
    stream: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(self.stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, index):
        """Independent sub-stream, e.g. one per replicate."""
        return RngStream(self.seed, self.stream * 1_000_003 + int(index) + 1)


def as_generator(rng):
    """Accept an :class:`RngStream`, a numpy ``Generator`` or an integer seed."""
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(0 if rng is None else int(rng)).generator
    raise TypeError(f"cannot use {type(rng).__name__} as a random stream")


# --- mark laws -----------------------------------------------------------

@dataclass(frozen=True)
class Pareto:
    """Survival ``P(Z > u) = (u / scale) ** -alpha`` for ``u >= scale``."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.scale > 0):
            raise ConfigurationError("Pareto needs alpha > 0 and scale > 0", "mark_law")

    def sample(self, n, rng):
        # 1 - U avoids a zero base for U = 0
        u = 1.0 - as_generator(rng).random(n)
        return self.scale * u ** (-1.0 / self.alpha)

    def survival(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u < self.scale, 1.0, (np.maximum(u, self.scale) / self.scale) ** -self.alpha)

    def quantile(self, q):
        return self.scale * (1.0 - np.asarray(q, dtype=float)) ** (-1.0 / self.alpha)


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __post_init__(self):
        if not self.value > 0:
            raise ConfigurationError("constant mark must be positive", "mark_law")

    def sample(self, n, rng):
        return np.full(n, float(self.value))

    def survival(self, u):
        return np.where(np.asarray(u, dtype=float) < self.value, 1.0, 0.0)


@dataclass(frozen=True)
class UserTable:
    """Law given by a quantile grid: ``values[i]`` is the ``probs[i]`` quantile.

    Sampling interpolates the quantile function linearly.
    """

    probs: tuple
    values: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if p.shape != v.shape or p.size < 2 or p[0] != 0.0 or p[-1] != 1.0:
            raise ConfigurationError("quantile grid must span probabilities 0..1", "mark_law")
        if np.any(np.diff(p) <= 0) or np.any(np.diff(v) < 0) or v[0] <= 0:
            raise ConfigurationError("quantile grid must be increasing with positive values",
                                     "mark_law")
        object.__setattr__(self, "probs", tuple(p))
        object.__setattr__(self, "values", tuple(v))

    def sample(self, n, rng):
        return np.interp(as_generator(rng).random(n), self.probs, self.values)

    def survival(self, u):
        return 1.0 - np.interp(u, self.values, self.probs, left=0.0, right=1.0)


MarkLaw = (Pareto, Constant, UserTable)


# --- sampling ------------------------------------------------------------

def sample_poisson(w, intensity, rng):
    """Homogeneous Poisson process on ``w``; every score is the placeholder 1."""
    if intensity < 0:
        raise ConfigurationError("intensity must be nonnegative", "intensity")
    mean = intensity * w.volume
    if not np.isfinite(mean) or mean > MAX_EXPECTED_POINTS:
        raise ConfigurationError(f"expected point count {mean:.3g} is not representable",
                                 "intensity")
    gen = as_generator(rng)
    n = gen.poisson(mean) if mean > 0 else 0
    pos = w.lower_arr + gen.random((n, w.dim)) * w.sides_arr
    return Pattern(pos, np.ones(n), dim=w.dim, domain=w, check=False)


def sample_marks(p, law, rng):
    """Replace scores by i.i.d. draws from ``law``."""
    return p.with_scores(law.sample(len(p), rng))


def palm_augment(p, origin_mark, rng=None):
    """Add a point at the origin carrying ``origin_mark`` (a number or a mark law)."""
    if p.origin_index() is not None:
        raise DomainError("pattern already has a point at the origin")
    if isinstance(origin_mark, MarkLaw):
        origin_mark = float(origin_mark.sample(1, rng)[0])
    if not origin_mark > 0:
        raise DomainError("origin mark must be positive")
    pos = np.vstack([np.zeros((1, p.dim)), p.positions])
    scores = np.concatenate([[float(origin_mark)], p.scores])
    return Pattern(pos, scores, dim=p.dim, domain=p.domain, check=False)


def centered_window(side, dim, boundary=TORUS):
    """Cube of the given side centred at the origin (used for Palm draws)."""
    return SimWindow.cube(side, dim, boundary, centered=True)


__all__ = [
    "Constant", "HARD", "MarkLaw", "Pareto", "RngStream", "SimWindow", "TORUS",
    "UserTable", "as_generator", "centered_window", "palm_augment",
    "sample_marks", "sample_poisson", "torus_displacement",
]
