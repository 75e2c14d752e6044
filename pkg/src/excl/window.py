"""Axis-aligned simulation windows with torus or hard boundaries."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

TORUS = "torus"
HARD = "hard"


@dataclass(frozen=True)
class SimWindow:
    """Box ``lower + [0, sides]`` in R^d.

    With ``boundary="torus"`` opposite faces are identified and all
    displacements use the minimal-image convention.
    """

    sides: tuple
    boundary: str = TORUS
    lower: tuple = None

    def __post_init__(self):
        sides = tuple(float(s) for s in np.atleast_1d(self.sides))
        if not sides or any(not np.isfinite(s) or s <= 0 for s in sides):
            raise ConfigurationError(f"window sides must be positive, got {sides}", "sides")
        if self.boundary not in (TORUS, HARD):
            raise ConfigurationError(f"unknown boundary mode {self.boundary!r}", "boundary")
        lower = (0.0,) * len(sides) if self.lower is None else tuple(
            float(x) for x in np.atleast_1d(self.lower))
        if len(lower) != len(sides):
            raise ConfigurationError("lower corner and sides differ in dimension", "lower")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "lower", lower)

    @classmethod
    def cube(cls, side, dim, boundary=TORUS, centered=False):
        lower = (-side / 2.0,) * dim if centered else None
        return cls((float(side),) * dim, boundary, lower)

    @property
    def dim(self):
        return len(self.sides)

    @property
    def torus(self):
        return self.boundary == TORUS

    @property
    def volume(self):
        return float(np.prod(self.sides))

    @property
    def lower_arr(self):
        return np.asarray(self.lower)

    @property
    def sides_arr(self):
        return np.asarray(self.sides)

    def contains(self, positions):
        x = np.asarray(positions, dtype=float) - self.lower_arr
        return np.all((x >= 0) & (x <= self.sides_arr), axis=-1)

    def wrap(self, positions):
        """Map positions into the window (torus only; hard windows pass through)."""
        x = np.asarray(positions, dtype=float)
        if not self.torus:
            return x
        lo = self.lower_arr
        return lo + np.mod(x - lo, self.sides_arr)

    def displacement(self, a, b):
        """Vector from ``a`` to ``b``; minimal image on the torus."""
        return torus_displacement(a, b, self)

    def shifted(self, z):
        return SimWindow(self.sides, self.boundary, tuple(self.lower_arr - np.asarray(z)))

    def scaled(self, v):
        return SimWindow(tuple(self.sides_arr / v), self.boundary, tuple(self.lower_arr / v))


def torus_displacement(a, b, w):
    """Displacement ``b - a`` under the window's metric.

    Broadcasts over leading axes.  On a torus each coordinate is reduced to
    the minimal image in ``[-L/2, L/2]``; on a hard window this is plain
    ``b - a``.
    """
    dx = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    if w.torus:
        L = w.sides_arr
        dx = dx - L * np.round(dx / L)
    return dx
