"""Extremes of scored spatial point processes: simulation, exact limit samplers and diagnostics."""

from .campaigns import KnnModel, MovMaxModel, block_campaign, empirical_etas, window_maxima
from .clusters import (BlockGrid, ClusterEntry, default_b_tau, default_l_tau, extract_N_tau,
                       metric_m, metric_m0, metric_m_tilde, partition_blocks, read_entries,
                       trim_block, write_entries)
from .errors import ConfigurationError, DataError, DomainError, ExclError
from .grid import GridIndex, build_grid_index, knn_distance
from .pattern import (Ball, Box, Pattern, ScalingMap, anchor_first_exceedance, anchor_first_max,
                      from_csv, from_json, max_score, read_csv, restrict, scale, shift, to_csv,
                      to_json, write_csv)
from .runner import ExperimentConfig, ResultRecord, emit_summary, run_experiment
from .scoring import (KNN, BallNeighborhood, Const1, Dirac, Exponential, KNNReciprocal,
                      MovingMax, UserGrid, apply_scores, palm_score_at_origin,
                      rule_from_dict, sample_palm_knn_scores)
from .simulate import (Constant, Pareto, RngStream, SimWindow, UserTable, palm_augment,
                       sample_marks, sample_poisson, torus_displacement)
from .stats import (GofReport, ThetaEstimate, cluster_vs_Q_test, extremal_index_anchor,
                    extremal_index_ratio, fit_frechet_max, fit_pareto_eta, fit_weibull_min_knn,
                    kappa_estimate, poisson_block_count_test, theta2_closed_form,
                    threshold_a_tau, threshold_a_tau_movmax, uniform_positions_test)
from .tail import (ScalingLaw, TailBatch, TailSample, empirical_tail_configs,
                   sample_knn_spectral_Theta, sample_knn_tail_Y, sample_knn_typical_Q,
                   sample_moving_max_Theta, sample_moving_max_W, sample_pareto_eta)

__version__ = "0.1.0"
