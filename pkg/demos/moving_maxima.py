"""
Moving maxima of heavy-tailed marks
===================================

Each point of a Poisson process carries an independent Pareto mark, and its
score is the largest weighted mark in its neighbourhood.  One large mark
then raises the scores of every point whose neighbourhood contains it, so
the cluster size depends on the neighbourhood and the weight.
"""

from excl import stats
from excl.scoring import KNN, Const1, Dirac, Exponential
from excl.simulate import RngStream
from excl.tail import default_moving_max_window, sample_moving_max_W, sample_phi0

alpha, d = 2.0, 2
nb = KNN(1)
window = default_moving_max_window(nb, d)
rng = RngStream(7)

###############################################################################
# Weights
# -------
# A Dirac weight only keeps a point's own mark, so there is no clustering.
# A constant weight spreads each mark over all of its reverse neighbours.

for w in (Dirac(), Exponential(1.0), Const1()):
    ws = [sample_moving_max_W(nb, w, window, rng) for _ in range(2000)]
    est = stats.extremal_index_ratio(ws, alpha)
    phi0 = [sample_phi0(nb, window, rng) for _ in range(2000)]
    kappa = stats.kappa_estimate(phi0, w, alpha)
    print(f"{type(w).__name__:12s} theta = {est.value:.3f} +- {est.std_error:.3f}, "
          f"kappa = {kappa.value:.3f}")

###############################################################################
# Threshold
# ---------
# The level with one expected exceedance cluster per window of side ``tau``.

print(f"a_tau(40) = {stats.threshold_a_tau_movmax(40.0, d, 2.0, alpha):.2f}")
