"""Extremal index estimation, thresholds and goodness-of-fit diagnostics.

The extremal index is available by three routes:

``anchor``
    fraction of spectral configurations whose anchor sits at the origin;
``ratio``
    ``E[M^alpha / sum s^alpha]`` over spectral configurations, or the ratio
    of means ``E[max s^alpha] / E[sum s^alpha]`` over moving-maxima W draws;
``closed_form``
    the k = 2 nearest-neighbour value as a one-dimensional integral.

Identity checks (exceedance stationarity, time change) are evaluated on
padded batches of fixed-size configurations; a functional is a callable
``h(t, pos, sc)`` broadcasting over leading axes, with ``t`` of shape
``(..., d)``, ``pos`` of shape ``(..., m, d)`` and ``sc`` of shape
``(..., m)`` where a zero score marks a padding slot.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .errors import ConfigurationError, DataError, DomainError
from .pattern import anchor_first_max, scale, shift
from .tail import TailBatch, as_batch, batch_anchor_at_origin, sample_pareto_eta

MIN_KS_SAMPLES = 100


@dataclass(frozen=True)
class ThetaEstimate:
    value: float
    std_error: float
    method: str
    n_samples: int

    def __post_init__(self):
        if not 0 < self.value <= 1 + 1e-12:
            raise DomainError(f"extremal index estimate {self.value} outside (0, 1]")
        if not self.std_error >= 0:
            raise DomainError("standard error must be nonnegative")


@dataclass(frozen=True)
class GofReport:
    """Outcome of a goodness-of-fit test.

    ``passed`` is ``None`` when the sample is too small for the asymptotic
    critical values to be trusted.
    """

    statistic: float
    n: int
    passed: object
    target_law: str
    p_value: float = float("nan")
    significance: float = 0.01
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.statistic >= 0:
            raise DomainError("test statistic must be nonnegative")


@dataclass(frozen=True)
class IdentityCheck:
    """Paired comparison of the two sides of a distributional identity."""

    name: str
    lhs: float
    rhs: float
    std_error: float
    n: int
    tolerance_se: float = 3.0

    @property
    def z(self):
        diff = self.lhs - self.rhs
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.std_error

    @property
    def passed(self):
        return abs(self.z) <= self.tolerance_se


# --- thresholds ------------------------------------------------------------------

def unit_ball_volume(d):
    return math.exp(0.5 * d * math.log(math.pi) - special.gammaln(d / 2 + 1))


def threshold_a_tau(tau, k, d):
    """Solve ``tau^d P(xi > a) = 1`` with ``P(xi > u) ~ (C_d u^-d)^k / k!``."""
    if not (tau > 0 and k >= 1 and d >= 1):
        raise ConfigurationError("need tau > 0, k >= 1, d >= 1", "tau")
    log_c = math.log(unit_ball_volume(d))
    return math.exp(math.log(tau) / k + (k * log_c - special.gammaln(k + 1)) / (d * k))


def threshold_a_tau_movmax(tau, d, kappa, alpha, mark_scale=1.0):
    """Solve ``tau^d kappa (a / mark_scale)^-alpha = 1``."""
    if not (kappa > 0 and alpha > 0 and tau > 0 and mark_scale > 0):
        raise ConfigurationError("tau, kappa, alpha and mark_scale must be positive", "kappa")
    return mark_scale * (kappa * tau ** d) ** (1.0 / alpha)


# --- extremal index ---------------------------------------------------------------

def anchor_at_origin(samples, anchor="fm", alpha=None, beta=-1.0, rng=None):
    """Per-sample indicator that the anchor of the configuration is the origin.

    For ``"fm"`` the indicator is evaluated on the samples themselves.  The
    first-exceedance anchor of level 1 is taken on the tail configuration
    ``Y``: spectral samples are lifted with an independent Pareto(``alpha``)
    score, which only changes the exceedance level to ``1 / eta`` because a
    positive rescaling of positions keeps the lexicographic order.
    """
    batch = as_batch(samples)
    if len(batch) == 0:
        raise DomainError("no samples")
    if anchor == "fm":
        return batch_anchor_at_origin(batch.positions, batch.scores, "fm")
    if anchor != "fe":
        raise ConfigurationError(f"unknown anchor {anchor!r}", "anchor")
    if batch.kind == "Y":
        return batch_anchor_at_origin(batch.positions, batch.scores, "fe", 1.0)
    if alpha is None:
        raise ConfigurationError("alpha is required to lift spectral samples", "alpha")
    eta = batch.eta if batch.eta is not None else sample_pareto_eta(alpha, rng, len(batch))
    level = (1.0 / np.asarray(eta))[:, None]
    return batch_anchor_at_origin(batch.positions, batch.scores, "fe", level)


def extremal_index_anchor(samples, anchor="fm", alpha=None, rng=None):
    """Fraction of configurations anchored at the origin, with binomial standard error."""
    hit = anchor_at_origin(samples, anchor, alpha, rng=rng)
    n = len(hit)
    p = float(hit.mean())
    return ThetaEstimate(p, math.sqrt(p * (1 - p) / n), f"anchor-{anchor}", n)


def paired_anchor_difference(samples, alpha, rng=None):
    """Mean and standard error of ``1{fm at 0} - 1{fe at 0}`` on shared samples."""
    fm = anchor_at_origin(samples, "fm").astype(float)
    fe = anchor_at_origin(samples, "fe", alpha, rng=rng).astype(float)
    diff = fm - fe
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(len(diff)))


def extremal_index_ratio(samples, alpha):
    """Ratio representation of the extremal index.

    Theta samples give the mean of ``M^alpha / sum s^alpha``; W samples give
    ``E[max s^alpha] / E[sum s^alpha]`` with a delta-method standard error.
    """
    batch = as_batch(samples)
    n = len(batch)
    if n == 0:
        raise DomainError("no samples")
    sa = np.where(batch.scores > 0, batch.scores, 0.0) ** alpha
    top, tot = sa.max(axis=1), sa.sum(axis=1)
    if np.any(tot <= 0):
        raise DataError("empty configuration in sample")
    if batch.kind == "W":
        ma, mb = top.mean(), tot.mean()
        value = ma / mb
        if n > 1:
            cov = np.cov(top, tot)
            var = (cov[0, 0] - 2 * value * cov[0, 1] + value ** 2 * cov[1, 1]) / mb ** 2
            se = math.sqrt(max(var, 0.0) / n)
        else:
            se = 0.0
        return ThetaEstimate(float(value), se, "ratio-W", n)
    r = top / tot
    se = float(r.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return ThetaEstimate(float(r.mean()), se, "ratio", n)


def theta2_closed_form(d):
    """Extremal index of the 2-NN model in dimension ``d``.

    ``1 - 2 G(1 + d/2) / (sqrt(pi) G((d + 1)/2)) * int_0^{pi/3} sin^d u du``.
    The second term is the probability that the uniform point of the
    sphere falls inside the ball around the point ``U_1`` conditioned to be
    at distance 1, halved by symmetry.
    """
    if int(d) != d or d < 1:
        raise ConfigurationError("d must be a positive integer", "d")
    integral, _ = integrate.quad(lambda u: math.sin(u) ** d, 0.0, math.pi / 3,
                                 epsabs=1e-14, epsrel=1e-14)
    log_c = special.gammaln(1 + d / 2) - 0.5 * math.log(math.pi) - special.gammaln((d + 1) / 2)
    return 1.0 - 2.0 * math.exp(log_c) * integral


# --- one-sample goodness of fit -----------------------------------------------------

def _ks_one_sample(values, cdf, law, significance):
    x = np.sort(np.asarray(values, dtype=float))
    n = len(x)
    if n == 0:
        raise DataError("no values")
    f = cdf(x)
    i = np.arange(1, n + 1)
    stat = float(max(np.max(i / n - f), np.max(f - (i - 1) / n), 0.0))
    p = float(stats.kstwobign.sf(stat * math.sqrt(n)))
    passed = None if n < MIN_KS_SAMPLES else bool(p > significance)
    return GofReport(stat, n, passed, law, p, significance)


def frechet_cdf(y, theta, alpha):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(y > 0, np.exp(-theta * np.maximum(y, 1e-300) ** -alpha), 0.0)


def fit_frechet_max(max_scores, a_tau, theta, alpha, significance=0.01):
    """KS test of ``max / a_tau`` against ``exp(-theta y^-alpha)``."""
    y = np.asarray(max_scores, dtype=float) / a_tau
    return _ks_one_sample(y, lambda v: frechet_cdf(v, theta, alpha),
                          f"Frechet(theta={theta:g}, alpha={alpha:g})", significance)


def weibull_survival(v, theta, d, k):
    return np.exp(-theta * np.maximum(np.asarray(v, dtype=float), 0.0) ** (d * k))


def fit_weibull_min_knn(min_distances, a_tau, theta, d, k, significance=0.01):
    """KS test of ``a_tau * m`` against survival ``exp(-theta v^(d k))``."""
    v = a_tau * np.asarray(min_distances, dtype=float)
    return _ks_one_sample(v, lambda x: 1.0 - weibull_survival(x, theta, d, k),
                          f"Weibull(theta={theta:g}, shape={d * k})", significance)


def fit_pareto_eta(etas, alpha, significance=0.01, collapse_ties=False):
    """KS test against Pareto(``alpha``) on ``[1, inf)``.

    ``collapse_ties`` keeps one copy of exactly repeated values (scores
    shared by mutual nearest neighbours), which the continuous test assumes
    away.
    """
    x = np.asarray(etas, dtype=float)
    if np.any(x < 1):
        raise DataError("Pareto samples must be at least 1")
    if collapse_ties:
        x = np.unique(x)
    return _ks_one_sample(x, lambda v: 1.0 - v ** -alpha, f"Pareto({alpha:g})", significance)


def poisson_block_count_test(counts, expected_mean, significance=0.01):
    """Dispersion index with a chi-square confidence interval, and a Poisson chi-square fit.

    ``passed`` requires the dispersion interval to cover 1 and the
    goodness-of-fit p-value to exceed ``significance``.
    """
    c = np.asarray(counts, dtype=float)
    n = len(c)
    if n < 2:
        raise DataError("need at least two counts")
    mean = c.mean()
    disp = c.var(ddof=1) / mean if mean > 0 else float("nan")
    lo = disp * (n - 1) / stats.chi2.ppf(1 - significance / 2, n - 1)
    hi = disp * (n - 1) / stats.chi2.ppf(significance / 2, n - 1)
    # bins 0..K-1 and a tail bin, merged until every expectation is at least 5
    k_max = int(c.max()) + 1
    probs = stats.poisson.pmf(np.arange(k_max), expected_mean)
    probs = np.append(probs, stats.poisson.sf(k_max - 1, expected_mean))
    obs = np.append(np.bincount(c.astype(int), minlength=k_max).astype(float), 0.0)
    exp_ = probs * n
    while len(exp_) > 2 and exp_[-1] < 5:
        exp_[-2] += exp_[-1]
        obs[-2] += obs[-1]
        exp_, obs = exp_[:-1], obs[:-1]
    chi2 = float(np.sum((obs - exp_) ** 2 / exp_))
    p = float(stats.chi2.sf(chi2, len(exp_) - 1))
    covers = bool(lo <= 1.0 <= hi)
    return GofReport(chi2, n, covers and p > significance, f"Poisson({expected_mean:g})", p,
                     significance, {"mean": float(mean), "dispersion": float(disp),
                                    "dispersion_ci": (float(lo), float(hi)),
                                    "dispersion_covers_1": covers})


def uniform_positions_test(positions, bins=4, grid=None, significance=0.01):
    """Chi-square test of uniformity over a ``bins^d`` grid of ``[0, 1]^d``.

    With a :class:`~excl.clusters.BlockGrid` the positions are block corners
    and the expected bin counts are proportional to the number of blocks per
    bin, which removes the lattice bias when ``k_tau`` is not a multiple of
    ``bins``.
    """
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    n, d = x.shape
    if n == 0:
        raise DataError("no positions")
    if grid is not None:
        k = grid.k_tau
        idx = np.rint(x * grid.tau / grid.b_tau).astype(int)
        cell = (idx - 1) * bins // k
        per_axis = np.bincount((np.arange(k) * bins) // k, minlength=bins) / k
        prob = per_axis
        for _ in range(d - 1):
            prob = np.multiply.outer(prob, per_axis)
        prob = prob.ravel()
    else:
        cell = np.clip(np.floor(x * bins).astype(int), 0, bins - 1)
        prob = np.full(bins ** d, 1.0 / bins ** d)
    flat = np.ravel_multi_index(cell.T, (bins,) * d)
    obs = np.bincount(flat, minlength=bins ** d)
    exp_ = prob * n
    chi2 = float(np.sum((obs - exp_) ** 2 / exp_))
    p = float(stats.chi2.sf(chi2, bins ** d - 1))
    passed = bool(p > significance) if np.all(exp_ >= 5) else None
    return GofReport(chi2, n, passed, f"Uniform([0,1]^{d}) on {bins}^{d} bins", p, significance)


# --- clusters versus the typical cluster --------------------------------------------

def normalize_cluster(pattern, law):
    """Rescale so the maximal score is 1 and move the first maximum to the origin."""
    m = float(pattern.scores.max())
    p = scale(pattern, law.scaling(m))
    return shift(p, anchor_first_max(p))


def count_above(pattern, level=0.5):
    return float(np.sum(pattern.scores > level))


def diameter_above(pattern, level=0.5):
    x = pattern.positions[pattern.scores > level]
    if len(x) < 2:
        return 0.0
    return float(np.max(np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)))


def ties_at_max(pattern):
    """Number of points sharing the maximal score."""
    return float(np.sum(pattern.scores == pattern.scores.max()))


def _round_sig(x, digits):
    x = np.asarray(x, dtype=float)
    mag = np.where(x == 0, 1.0, 10.0 ** np.floor(np.log10(np.abs(np.where(x == 0, 1.0, x)))))
    return np.round(x / mag, digits - 1) * mag


def cluster_vs_Q_test(entries, q_samples, functional, law, significance=0.01, digits=9):
    """Two-sample KS test of ``functional`` on normalised pipeline clusters and exact Q draws.

    Values are rounded to ``digits`` significant digits first, so that
    rounding noise in degenerate functionals (e.g. a diameter that equals 1
    exactly in the limit) does not count as a difference.
    """
    if not entries or not len(q_samples):
        raise DataError("both populations must be nonempty")
    a = _round_sig([functional(normalize_cluster(e.cluster, law)) for e in entries], digits)
    qs = q_samples.to_list() if isinstance(q_samples, TailBatch) else list(q_samples)
    b = _round_sig([functional(s.config) for s in qs], digits)
    res = stats.ks_2samp(a, b)
    name = getattr(functional, "__name__", "functional")
    return GofReport(float(res.statistic), len(a), bool(res.pvalue > significance),
                     f"Q law of {name}", float(res.pvalue), significance,
                     {"n_q": len(b), "pipeline_mean": float(a.mean()), "q_mean": float(b.mean())})


def _tally(x):
    values, counts = np.unique(x, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def exceedance_count_test(entries, q_samples, alpha, rng=None, significance=0.01):
    """Compare the number of exceedances per extremal block with its limit law.

    A pipeline cluster (scores already divided by ``a_tau``) counts its
    points above ``epsilon``.  In the limit the block is ``eta Q`` with an
    independent Pareto(``alpha``) ``eta``, so a typical-cluster draw counts
    its points with ``eta s > 1``.
    """
    if not entries or not len(q_samples):
        raise DataError("both populations must be nonempty")
    a = np.array([count_above(e.cluster, e.epsilon) for e in entries])
    qs = q_samples.to_list() if isinstance(q_samples, TailBatch) else list(q_samples)
    eta = sample_pareto_eta(alpha, rng, len(qs))
    b = np.array([float(np.sum(s.config.scores * e > 1.0)) for s, e in zip(qs, eta)])
    res = stats.ks_2samp(a, b)
    return GofReport(float(res.statistic), len(a), bool(res.pvalue > significance),
                     "exceedance count of eta Q", float(res.pvalue), significance,
                     {"n_q": len(b), "pipeline_counts": _tally(a), "q_counts": _tally(b)})


# --- moving maxima ---------------------------------------------------------------------

@dataclass(frozen=True)
class KappaEstimate:
    value: float
    std_error: float
    n: int
    w_value: float = float("nan")
    w_std_error: float = float("nan")
    w_n: int = 0


def kappa_estimate(phi0_draws, w, alpha, w_samples=None):
    """``kappa = E sum_{t in Phi(0)} w(t)^alpha``, with the W-based estimate ``E sum s^alpha``.

    ``phi0_draws`` are displacement arrays of the neighbourhood of the origin.
    """
    per = np.array([float(np.sum(w(np.asarray(x)) ** alpha)) for x in phi0_draws])
    if len(per) == 0:
        raise DataError("no neighbourhood draws")
    se = float(per.std(ddof=1) / math.sqrt(len(per))) if len(per) > 1 else 0.0
    if w_samples is None:
        return KappaEstimate(float(per.mean()), se, len(per))
    alt = np.array([float(np.sum(s.config.scores ** alpha)) for s in w_samples])
    ase = float(alt.std(ddof=1) / math.sqrt(len(alt))) if len(alt) > 1 else 0.0
    return KappaEstimate(float(per.mean()), se, len(per), float(alt.mean()), ase, len(alt))


# --- identity checks on batches -----------------------------------------------------------

def score_at(t, pos, sc):
    """Score of the configuration at position ``t`` (0 if no point sits there)."""
    hit = np.all(pos == t[..., None, :], axis=-1) & (sc > 0)
    return np.max(np.where(hit, sc, 0.0), axis=-1)


def h_near(c=0.5):
    def h(t, pos, sc):
        return (np.linalg.norm(t, axis=-1) <= c).astype(float)
    h.__name__ = f"near_{c:g}"
    return h


def h_exp_decay(t, pos, sc):
    return np.exp(-np.linalg.norm(t, axis=-1))


def h_score_above(level=1.5):
    def h(t, pos, sc):
        return (score_at(t, pos, sc) > level).astype(float)
    h.__name__ = f"score_above_{level:g}"
    return h


def h_first_coord_positive(t, pos, sc):
    return (t[..., 0] > 0).astype(float)


def h_is_max(t, pos, sc):
    """Indicator that the configuration's maximal score is at most 1."""
    top = np.max(np.where(sc > 0, sc, -np.inf), axis=-1)
    return (top <= 1.0).astype(float) * np.ones(t.shape[:-1])


def h_half_plane_near(t, pos, sc):
    return (t[..., 0] > 0) * np.minimum(1.0, np.linalg.norm(t, axis=-1))


def _paired(name, lhs, rhs):
    diff = lhs - rhs
    n = len(diff)
    se = float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return IdentityCheck(name, float(lhs.mean()), float(rhs.mean()), se, n)


def _pairwise_views(batch):
    pos, sc = batch.positions, batch.scores
    n, m, d = pos.shape
    own = np.broadcast_to(pos[:, None, :, :], (n, m, m, d))
    shifted = pos[:, None, :, :] - pos[:, :, None, :]
    sc_b = np.broadcast_to(sc[:, None, :], (n, m, m))
    return pos, sc, own, shifted, sc_b


def exceedance_stationarity_check(samples, functionals):
    """Compare ``E sum_{s > 1} h(t, Y)`` with ``E sum_{s > 1} h(-t, shift(Y, t))`` per functional."""
    batch = as_batch(samples)
    pos, sc, own, shifted, sc_b = _pairwise_views(batch)
    exc = (sc > 1.0).astype(float)
    out = []
    for h in functionals:
        lhs = np.sum(exc * h(pos, own, sc_b), axis=1)
        rhs = np.sum(exc * h(-pos, shifted, sc_b), axis=1)
        out.append(_paired(getattr(h, "__name__", "h"), lhs, rhs))
    return out


def time_change_check(samples, law, functionals):
    """Compare ``E sum h(-y / s^beta, T_{s^beta, s} shift(Theta, y))`` with ``E sum h(y, Theta) s^alpha``."""
    batch = as_batch(samples)
    pos, sc, own, shifted, sc_b = _pairwise_views(batch)
    present = sc > 0
    s = np.where(present, sc, 1.0)
    sb = s ** law.beta
    moved_t = -pos / sb[..., None]
    moved_pos = shifted / sb[:, :, None, None]
    moved_sc = sc_b / s[:, :, None]
    out = []
    for h in functionals:
        lhs = np.sum(present * h(moved_t, moved_pos, moved_sc), axis=1)
        rhs = np.sum(present * h(pos, own, sc_b) * s ** law.alpha, axis=1)
        out.append(_paired(getattr(h, "__name__", "h"), lhs, rhs))
    return out


def pareto_eta_correlation(samples, functional, eta):
    """Correlation between ``eta`` and a scalar functional of Theta, with its null standard error."""
    values = np.array([functional(s.config) for s in samples])
    n = len(values)
    if np.std(values) == 0:
        return 0.0, 1.0 / math.sqrt(n)
    return float(np.corrcoef(values, eta)[0, 1]), 1.0 / math.sqrt(n)


__all__ = [
    "GofReport", "IdentityCheck", "KappaEstimate", "ThetaEstimate", "anchor_at_origin",
    "cluster_vs_Q_test", "count_above", "diameter_above", "exceedance_count_test",
    "exceedance_stationarity_check",
    "extremal_index_anchor", "extremal_index_ratio", "fit_frechet_max", "fit_pareto_eta",
    "fit_weibull_min_knn", "frechet_cdf", "h_exp_decay", "h_first_coord_positive",
    "h_half_plane_near", "h_is_max", "h_near", "h_score_above", "kappa_estimate",
    "normalize_cluster", "paired_anchor_difference", "poisson_block_count_test", "score_at",
    "theta2_closed_form", "threshold_a_tau", "threshold_a_tau_movmax", "ties_at_max",
    "time_change_check", "uniform_positions_test", "unit_ball_volume", "weibull_survival",
]
