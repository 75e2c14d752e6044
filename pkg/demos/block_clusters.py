"""
From a simulated window to extremal clusters
============================================

Simulate reciprocal 1-NN scores on a torus, cut the window into blocks and
keep the blocks whose maximum exceeds the level ``a_tau`` at which about
one exceedance cluster is expected per window.  The rescaled blocks should
look like draws of the typical cluster ``Q`` and their number should be
roughly Poisson with mean ``theta``.
"""

import numpy as np

from excl import stats
from excl.campaigns import KnnModel, block_campaign
from excl.simulate import RngStream
from excl.tail import knn_Q_batch

model = KnnModel(k=1, d=2)
tau = 60.0
print(f"a_tau = {model.a_tau(tau):.3f}")

###############################################################################
# Block campaign
# --------------
# Every replicate is an independent window with its own random stream.

res = block_campaign(model, tau, 300, seed=5)
counts = np.array([len(v) for v in res.values])
print(f"b_tau = {res.meta['b_tau']:.3f}, {res.meta['k_tau']}^2 blocks per window")
print(f"mean number of extremal blocks {counts.mean():.3f} (theta = 0.5)")
rep = stats.poisson_block_count_test(counts, 0.5)
print(f"dispersion {rep.details['dispersion']:.3f}, Poisson fit p = {rep.p_value:.3f}")

###############################################################################
# Cluster shapes
# --------------
# For k = 1 the typical cluster is a mutual nearest-neighbour pair at
# distance 1 with equal scores.  Normalised block clusters mostly match it.

entries = [e for v in res.values for e in v]
q = knn_Q_batch(1, 2, 2000, RngStream(6))
ties = [stats.ties_at_max(stats.normalize_cluster(e.cluster, model.law)) for e in entries]
values, freq = np.unique(ties, return_counts=True)
print("ties at the maximum:", {int(v): int(c) for v, c in zip(values, freq)})

###############################################################################
# Comparison with the typical cluster
# -----------------------------------
# A two-sample KS test on the number of points scoring above half the
# maximum.  Pairs cut by a block face show up as singletons and pull the
# pipeline towards smaller counts.

rep = stats.cluster_vs_Q_test(entries, q, stats.count_above, model.law)
print(f"count_above: pipeline mean {rep.details['pipeline_mean']:.3f}, "
      f"Q mean {rep.details['q_mean']:.3f}, KS p = {rep.p_value:.3f}")
