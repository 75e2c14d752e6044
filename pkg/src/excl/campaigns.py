"""Replicate campaigns over simulated windows ``[0, tau]^d``.

Each replicate ``i`` draws from its own stream ``RngStream(seed, i + 1)``
so results do not depend on the number of workers.  Replicates that hit a
:class:`~excl.errors.DomainError` (too few points for the rule) are counted
as failed and skipped.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clusters import BlockGrid, default_b_tau, extract_N_tau
from .errors import ConfigurationError, DomainError
from .scoring import KNN, KNNReciprocal, MovingMax, apply_scores
from .simulate import Pareto, RngStream, sample_marks, sample_poisson
from .stats import threshold_a_tau, threshold_a_tau_movmax
from .tail import ScalingLaw, empirical_tail_configs
from .window import TORUS, SimWindow


@dataclass(frozen=True)
class KnnModel:
    k: int
    d: int

    @property
    def rule(self):
        return KNNReciprocal(self.k)

    @property
    def law(self):
        return ScalingLaw.knn(self.k, self.d)

    @property
    def kappa(self):
        return 1.0

    def a_tau(self, tau):
        return threshold_a_tau(tau, self.k, self.d)

    def simulate(self, tau, rng, boundary=TORUS):
        w = SimWindow.cube(tau, self.d, boundary)
        return apply_scores(sample_poisson(w, 1.0, rng), self.rule)


@dataclass(frozen=True)
class MovMaxModel:
    """Moving maxima of Pareto marks; ``kappa`` must be supplied for non-trivial weights."""

    nb: object
    w: object
    alpha: float
    d: int
    mark_scale: float = 1.0
    kappa_value: float = None

    @property
    def rule(self):
        return MovingMax(self.nb, self.w)

    @property
    def law(self):
        return ScalingLaw(self.alpha, 0.0)

    @property
    def kappa(self):
        if self.kappa_value is not None:
            return self.kappa_value
        from .scoring import Const1, Dirac
        if isinstance(self.w, Dirac):
            return 1.0
        if isinstance(self.w, Const1) and isinstance(self.nb, KNN):
            return float(self.nb.k + 1)
        raise ConfigurationError("kappa must be given for this weight/neighbourhood", "kappa")

    def a_tau(self, tau):
        return threshold_a_tau_movmax(tau, self.d, self.kappa, self.alpha, self.mark_scale)

    def simulate(self, tau, rng, boundary=TORUS):
        w = SimWindow.cube(tau, self.d, boundary)
        p = sample_marks(sample_poisson(w, 1.0, rng), Pareto(self.alpha, self.mark_scale), rng)
        return apply_scores(p, self.rule)


@dataclass
class CampaignResult:
    values: list
    n_failed: int = 0
    meta: dict = field(default_factory=dict)


def _run_one(args):
    fn, seed, i, payload = args
    try:
        return fn(RngStream(seed, i + 1), **payload)
    except DomainError:
        return None


def run_replicates(fn, n, seed, threads=1, **payload):
    """Evaluate ``fn(rng, **payload)`` for ``n`` independent streams, in stream order."""
    if n < 1:
        raise ConfigurationError("replicate count must be at least 1", "replicates")
    jobs = [(fn, seed, i, payload) for i in range(n)]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_run_one, jobs, chunksize=max(1, n // (4 * threads))))
    else:
        out = [_run_one(j) for j in jobs]
    ok = [o for o in out if o is not None]
    return CampaignResult(ok, n - len(ok))


# --- per-replicate functions (module level so they pickle) ---------------------------

def _window_max(rng, model, tau):
    return float(model.simulate(tau, rng).scores.max())


def _window_etas(rng, model, tau, u, cutoff_radius):
    x = model.simulate(tau, rng)
    cfgs = empirical_tail_configs(x, u, model.law, cutoff_radius=cutoff_radius)
    return [(float(c.score_at(np.zeros(c.dim))), len(c)) for c in cfgs]


def _window_blocks(rng, model, tau, b_tau, epsilon, l_tau):
    x = model.simulate(tau, rng)
    grid = BlockGrid(tau, b_tau, model.d)
    return extract_N_tau(x, grid, model.a_tau(tau), model.law, epsilon, l_tau=l_tau)


def window_maxima(model, tau, n, seed, threads=1):
    """Maximal score of ``n`` independent windows."""
    res = run_replicates(_window_max, n, seed, threads, model=model, tau=tau)
    res.values = np.asarray(res.values)
    res.meta["a_tau"] = model.a_tau(tau)
    return res


def empirical_etas(model, tau, n, seed, u=None, cutoff_radius=2.0, threads=1):
    """Origin scores (and configuration sizes) of empirical tail configurations at level ``u``."""
    u = model.a_tau(tau) if u is None else u
    res = run_replicates(_window_etas, n, seed, threads, model=model, tau=tau, u=u,
                         cutoff_radius=cutoff_radius)
    flat = [e for rep in res.values for e in rep]
    res.meta.update(u=u, n_windows=n - res.n_failed,
                    sizes=np.array([s for _, s in flat], dtype=int))
    res.values = np.array([e for e, _ in flat])
    return res


def block_campaign(model, tau, n, seed, b_tau=None, epsilon=1.0, l_tau=None, threads=1):
    """``N_tau`` per window; ``values`` is a list of entry lists."""
    a = model.a_tau(tau)
    if b_tau is None:
        b_tau = default_b_tau(tau, float(model.law.r(a)))
    res = run_replicates(_window_blocks, n, seed, threads, model=model, tau=tau, b_tau=b_tau,
                         epsilon=epsilon, l_tau=l_tau)
    res.meta.update(a_tau=a, b_tau=b_tau, grid=BlockGrid(tau, b_tau, model.d),
                    k_tau=BlockGrid(tau, b_tau, model.d).k_tau)
    return res


def boundary_split_rate(model, tau, b_tau):
    """First-order probability that a k = 1 nearest-neighbour pair straddles a block face.

    Given an exceedance the pair distance is ``rho = a^-1 V^(1/d)`` with ``V``
    uniform, so ``E rho = a^-1 d / (d + 1)``, and a face orthogonal to axis
    ``j`` is crossed with probability ``E|rho u_j| / b``.
    """
    d = model.d
    a = model.a_tau(tau)
    mean_rho = d / (d + 1) / a
    # E|u_1| for u uniform on the sphere
    mean_abs = math.gamma(d / 2) / (math.sqrt(math.pi) * math.gamma((d + 1) / 2))
    return d * mean_rho * mean_abs / b_tau


__all__ = [
    "CampaignResult", "KnnModel", "MovMaxModel", "block_campaign", "boundary_split_rate",
    "empirical_etas", "run_replicates", "window_maxima",
]
