"""Declarative experiments: configuration, seeded campaigns and result records."""

import copy
import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from . import stats
from .campaigns import KnnModel, MovMaxModel, block_campaign, empirical_etas, window_maxima
from .clusters import default_l_tau, metric_m, metric_m0, metric_m_tilde, write_entries
from .errors import ConfigurationError
from .pattern import Pattern, shift, write_csv
from .scoring import neighborhood_from_dict, weight_from_dict
from .simulate import RngStream
from .tail import (default_moving_max_window, knn_Q_batch, knn_theta_batch,
                   sample_moving_max_Theta, sample_moving_max_W, sample_phi0)

SCHEMA_VERSION = 1
KINDS = ("tail-extract", "theta", "limit-law", "cluster-compare", "metric-bench")
# fields that do not change results and are left out of the hash
_UNHASHED = ("seed", "out", "threads", "dump")


@dataclass
class ExperimentConfig:
    """Experiment description; see ``from_dict`` for the accepted document."""

    kind: str
    model: dict
    tau: list = field(default_factory=lambda: [40.0])
    replicates: int = 100
    epsilon: float = 1.0
    b_tau: float = None
    seed: int = 0
    out: str = "results"
    threads: int = 1
    dump: bool = False
    options: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment kind {self.kind!r}", "kind")
        if not isinstance(self.model, dict) or self.model.get("type") not in ("knn", "movmax"):
            raise ConfigurationError("model.type must be 'knn' or 'movmax'", "model.type")
        if isinstance(self.tau, (int, float)):
            self.tau = [self.tau]
        self.tau = [float(t) for t in self.tau]
        if not self.tau or any(not t > 0 for t in self.tau):
            raise ConfigurationError("every tau must be positive", "tau")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ConfigurationError("replicates must be a positive integer", "replicates")
        self.replicates = int(self.replicates)
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive", "epsilon")
        if self.b_tau is not None and not self.b_tau > 0:
            raise ConfigurationError("b_tau must be positive", "b_tau")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema version {self.schema_version}",
                                     "schema_version")
        build_model(self.model)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigurationError(f"unknown fields {sorted(unknown)}", sorted(unknown)[0])
        if "kind" not in doc or "model" not in doc:
            raise ConfigurationError("kind and model are required", "kind")
        return cls(**doc)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON: {exc}", "config") from None
        if not isinstance(doc, dict):
            raise ConfigurationError("configuration must be a JSON object", "config")
        return cls.from_dict(doc)

    def to_dict(self):
        return copy.deepcopy(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def config_hash(self):
        doc = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class ResultRecord:
    experiment_id: str
    config_hash: str
    seed: int
    metric: str
    value: float
    std_error: float = float("nan")
    n: int = 0
    statistic: float = float("nan")
    passed: object = None
    wall_time: float = 0.0
    method: str = ""
    details: dict = field(default_factory=dict)

    def to_json(self, timing=True):
        doc = asdict(self)
        if not timing:
            doc.pop("wall_time")
        return json.dumps(_jsonable(doc), sort_keys=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def build_model(spec):
    try:
        if spec["type"] == "knn":
            return KnnModel(int(spec["k"]), int(spec["d"]))
        return MovMaxModel(neighborhood_from_dict(spec["neighborhood"]),
                           weight_from_dict(spec["weight"]), float(spec["alpha"]),
                           int(spec["d"]), float(spec.get("mark_scale", 1.0)),
                           spec.get("kappa"))
    except KeyError as exc:
        raise ConfigurationError(f"missing key {exc}", f"model.{exc.args[0]}") from None


# --- experiments --------------------------------------------------------------------

class _Recorder:
    def __init__(self, cfg):
        self.cfg = cfg
        self.hash = cfg.config_hash()
        self.records = []
        self.plots = {}
        self.t0 = time.perf_counter()

    def add(self, metric, value, **kw):
        wall = time.perf_counter() - self.t0
        self.records.append(ResultRecord(f"{self.cfg.kind}-{self.hash}", self.hash,
                                         self.cfg.seed, metric, float(value), wall_time=wall,
                                         **kw))
        self.t0 = time.perf_counter()

    def add_gof(self, metric, rep):
        self.add(metric, rep.p_value, n=rep.n, statistic=rep.statistic, passed=rep.passed,
                 method="gof", details={"target": rep.target_law, **rep.details})


def _theta_target(model):
    if isinstance(model, KnnModel):
        if model.k == 1 or model.d == 1:
            return 0.5
        if model.k == 2:
            return stats.theta2_closed_form(model.d)
    return None


def _run_theta(cfg, model, rec):
    n = int(cfg.options.get("n_samples", 10 ** 5))
    tol = float(cfg.options.get("tolerance", 0.01))
    rng = RngStream(cfg.seed, 1)
    if isinstance(model, KnnModel):
        th = knn_theta_batch(model.k, model.d, n, rng)
        target = _theta_target(model)
        for anchor in ("fm", "fe"):
            est = stats.extremal_index_anchor(th, anchor, alpha=model.law.alpha, rng=rng)
            ok = None if target is None else abs(est.value - target) <= tol
            rec.add(f"theta_anchor_{anchor}", est.value, std_error=est.std_error, n=n,
                    passed=ok, method=est.method, details={"target": target})
        diff, se = stats.paired_anchor_difference(th, model.law.alpha, rng)
        rec.add("anchor_difference", diff, std_error=se, n=n, passed=abs(diff) <= 3 * se,
                method="paired")
        est = stats.extremal_index_ratio(th, model.law.alpha)
        ok = None if target is None else abs(est.value - target) <= tol
        rec.add("theta_ratio", est.value, std_error=est.std_error, n=n, passed=ok,
                method=est.method, details={"target": target})
        if model.k == 2:
            rec.add("theta_closed_form", stats.theta2_closed_form(model.d), method="closed_form")
        for d in cfg.options.get("d_sweep", []):
            value = stats.theta2_closed_form(int(d))
            mc = stats.extremal_index_anchor(knn_theta_batch(2, int(d), n, rng.child(int(d))))
            ok = abs(mc.value - value) <= max(3 * mc.std_error, tol)
            rec.add(f"theta2_d{int(d)}", mc.value, std_error=mc.std_error, n=n, passed=ok,
                    method="anchor-fm", details={"closed_form": value})
        return
    window = default_moving_max_window(model.nb, model.d)
    w_samples = [sample_moving_max_W(model.nb, model.w, window, rng) for _ in range(n)]
    est = stats.extremal_index_ratio(w_samples, model.alpha)
    rec.add("theta_ratio_W", est.value, std_error=est.std_error, n=n, method=est.method)
    phi0 = [sample_phi0(model.nb, window, rng) for _ in range(n)]
    kap = stats.kappa_estimate(phi0, model.w, model.alpha, w_samples)
    both = math.hypot(kap.std_error, kap.w_std_error)
    rec.add("kappa", kap.value, std_error=kap.std_error, n=kap.n,
            passed=abs(kap.value - kap.w_value) <= 3 * both if both > 0
            else kap.value == kap.w_value,
            method="neighbourhood", details={"w_value": kap.w_value,
                                             "w_std_error": kap.w_std_error})
    n_theta = int(cfg.options.get("n_theta", min(n, 2000)))
    thetas = [sample_moving_max_Theta(model.nb, model.w, model.alpha, window, rng)
              for _ in range(n_theta)]
    an = stats.extremal_index_anchor(thetas, "fm")
    se = math.hypot(an.std_error, est.std_error)
    rec.add("theta_anchor_fm", an.value, std_error=an.std_error, n=n_theta,
            passed=abs(an.value - est.value) <= max(3 * se, 1e-12), method=an.method,
            details={"ratio_value": est.value})


def _cdf_pairs(sample, cdf):
    x = np.sort(np.asarray(sample))
    return np.column_stack([np.arange(1, len(x) + 1) / len(x), cdf(x)])


def _run_limit_law(cfg, model, rec):
    theta = float(cfg.options.get("theta", _theta_target(model) or 1.0))
    for tau in cfg.tau:
        res = window_maxima(model, tau, cfg.replicates, cfg.seed, cfg.threads)
        a = res.meta["a_tau"]
        fr = stats.fit_frechet_max(res.values, a, theta, model.law.alpha)
        rec.add_gof(f"frechet_tau{tau:g}", fr)
        rec.plots[f"frechet_cdf_tau{tau:g}"] = _cdf_pairs(
            res.values / a, lambda y: stats.frechet_cdf(y, theta, model.law.alpha))
        if isinstance(model, KnnModel):
            m = 1.0 / res.values
            wb = stats.fit_weibull_min_knn(m, a, theta, model.d, model.k)
            rec.add_gof(f"weibull_tau{tau:g}", wb)
            rec.plots[f"weibull_cdf_tau{tau:g}"] = _cdf_pairs(
                a * m, lambda v: 1 - stats.weibull_survival(v, theta, model.d, model.k))
        if res.n_failed:
            rec.add(f"failed_replicates_tau{tau:g}", res.n_failed, n=cfg.replicates)


def _run_tail_extract(cfg, model, rec):
    for tau in cfg.tau:
        res = empirical_etas(model, tau, cfg.replicates, cfg.seed, threads=cfg.threads)
        rep = stats.fit_pareto_eta(res.values, model.law.alpha, collapse_ties=True)
        rec.add_gof(f"pareto_eta_tau{tau:g}", rep)
        rec.add(f"exceedances_tau{tau:g}", len(res.values), n=res.meta["n_windows"],
                details={"u": res.meta["u"]})
        rec.plots[f"eta_cdf_tau{tau:g}"] = _cdf_pairs(
            np.unique(res.values), lambda v: 1 - v ** -model.law.alpha)


def _run_cluster_compare(cfg, model, rec):
    theta = float(cfg.options.get("theta", _theta_target(model) or 1.0))
    for tau in cfg.tau:
        trimmed = bool(cfg.options.get("trimmed_selection", False))
        l_tau = None
        if trimmed:
            a = model.a_tau(tau)
            b = cfg.b_tau or math.sqrt(tau * float(model.law.r(a)))
            l_tau = default_l_tau(b, float(model.law.r(a)))
        res = block_campaign(model, tau, cfg.replicates, cfg.seed, cfg.b_tau, cfg.epsilon,
                             l_tau, cfg.threads)
        counts = [len(v) for v in res.values]
        entries = [e for v in res.values for e in v]
        grid = res.meta["grid"]
        # only the part of the window covered by (trimmed) blocks can select
        covered = (grid.k_tau * grid.b_tau / tau) ** model.d
        if l_tau:
            covered *= (1.0 - 2.0 * l_tau / grid.b_tau) ** model.d
        expected = theta * cfg.epsilon ** -model.law.alpha * covered
        pc = stats.poisson_block_count_test(counts, expected)
        rec.add_gof(f"block_count_tau{tau:g}", pc)
        mean = float(np.mean(counts))
        se = float(np.std(counts, ddof=1) / math.sqrt(len(counts)))
        rec.add(f"block_count_mean_tau{tau:g}", mean, std_error=se, n=len(counts),
                passed=abs(mean - expected) <= max(0.1 * expected, 3 * se),
                details={"expected": expected})
        if entries:
            up = stats.uniform_positions_test([e.grid_position for e in entries], grid=grid)
            rec.add_gof(f"uniform_positions_tau{tau:g}", up)
        if isinstance(model, KnnModel) and entries:
            q = knn_Q_batch(model.k, model.d, max(len(entries), 1000), RngStream(cfg.seed, 0))
            rep = stats.exceedance_count_test(entries, q, model.law.alpha, RngStream(cfg.seed, 3))
            rec.add_gof(f"cluster_exceedance_count_tau{tau:g}", rep)
            for f in (stats.count_above, stats.diameter_above, stats.ties_at_max):
                rep = stats.cluster_vs_Q_test(entries, q, f, model.law)
                rec.add_gof(f"cluster_{f.__name__}_tau{tau:g}", rep)
        if cfg.dump:
            write_entries(entries, os.path.join(cfg.out, f"n_tau_{tau:g}.jsonl"))


def _random_pattern(gen, n, d):
    return Pattern(gen.random((n, d)) * 2.0, gen.random(n) * 2.0 + 0.1, dim=d)


def quadrature_m(a, b):
    """``metric_m`` by adaptive quadrature of its defining integral (independent of the exact sum)."""
    def integrand(u):
        keep_a = a.scores > 1.0 / u
        keep_b = b.scores > 1.0 / u
        return metric_m0(a.take(keep_a), b.take(keep_b)) * math.exp(-u)

    breaks = sorted(set((1.0 / np.concatenate([a.scores, b.scores])).tolist()))
    edges = [1e-300] + breaks + [60.0]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            v, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200)
            total += v
    return total


def _run_metric_bench(cfg, model, rec):
    n = int(cfg.options.get("pairs", 1000))
    d = int(cfg.model.get("d", 2))
    gen = RngStream(cfg.seed, 1).generator
    worst_shift = worst_quad = 0.0
    violations = 0
    t0 = time.perf_counter()
    for _ in range(n):
        p = _random_pattern(gen, int(gen.integers(1, 5)), d)
        z = gen.normal(size=d) * 3
        worst_shift = max(worst_shift, metric_m_tilde(p, shift(p, z)))
        q = _random_pattern(gen, int(gen.integers(0, 5)), d)
        worst_quad = max(worst_quad, abs(metric_m(p, q) - quadrature_m(p, q)))
        k = int(gen.integers(1, 5))
        x, y, w = (_random_pattern(gen, k, d) for _ in range(3))
        if metric_m0(x, y) > metric_m0(x, w) + metric_m0(w, y) + 1e-12:
            violations += 1
    rec.add("m_tilde_shift_max", worst_shift, n=n, passed=worst_shift <= 1e-12)
    rec.add("m_vs_quadrature_max_error", worst_quad, n=n, passed=worst_quad <= 1e-10)
    rec.add("m0_triangle_violations", violations, n=n, passed=violations == 0,
            details={"seconds": time.perf_counter() - t0})


_DISPATCH = {
    "theta": _run_theta,
    "limit-law": _run_limit_law,
    "tail-extract": _run_tail_extract,
    "cluster-compare": _run_cluster_compare,
    "metric-bench": _run_metric_bench,
}


def run_experiment(cfg):
    """Run ``cfg`` and return ``(records, plot_data)``."""
    model = build_model(cfg.model)
    if cfg.dump:
        os.makedirs(cfg.out, exist_ok=True)
    rec = _Recorder(cfg)
    _DISPATCH[cfg.kind](cfg, model, rec)
    if cfg.dump and cfg.kind in ("theta", "tail-extract") and isinstance(model, KnnModel):
        _dump_samples(cfg, model)
    return rec.records, rec.plots


def _dump_samples(cfg, model, n=20):
    th = knn_theta_batch(model.k, model.d, n, RngStream(cfg.seed, 2))
    for i, s in enumerate(th.to_list()):
        write_csv(s.config, os.path.join(cfg.out, f"theta_{i:03d}.csv"))


# --- output ---------------------------------------------------------------------------

SUMMARY_COLUMNS = ("metric", "value", "std_error", "n", "statistic", "passed")


def format_table(records):
    rows = [SUMMARY_COLUMNS] + [tuple(_cell(getattr(r, c)) for c in SUMMARY_COLUMNS)
                                for r in records]
    widths = [max(len(r[j]) for r in rows) for j in range(len(SUMMARY_COLUMNS))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def _cell(v):
    if isinstance(v, float):
        return "nan" if not math.isfinite(v) else f"{v:.6g}"
    return "-" if v is None else str(v)


def emit_summary(records, out_dir=None, plots=None, stream=None):
    """Print an aligned table; with ``out_dir`` also write ``summary.csv``, ``records.jsonl`` and ``*.dat``."""
    if not records:
        raise ConfigurationError("no records to summarise", "records")
    table = format_table(records)
    if stream is not None:
        print(table, file=stream)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for r in records:
            writer.writerow([_cell(getattr(r, c)) for c in SUMMARY_COLUMNS])
        with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
            fh.write(buf.getvalue())
        with open(os.path.join(out_dir, "records.jsonl"), "w") as fh:
            for r in records:
                fh.write(r.to_json() + "\n")
        for name, xy in (plots or {}).items():
            np.savetxt(os.path.join(out_dir, f"{name}.dat"), np.asarray(xy), fmt="%.10g",
                       header="empirical theoretical")
    return table


def all_passed(records):
    return all(r.passed is not False for r in records)


__all__ = [
    "ExperimentConfig", "ResultRecord", "all_passed", "build_model", "emit_summary",
    "format_table", "quadrature_m", "run_experiment",
]
