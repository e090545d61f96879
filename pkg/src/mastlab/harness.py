"""Experiment orchestration: configs, replicate scheduling, rows, fits.

Experiments are pure functions of (config, master seed): every replicate
draws its generator from ``substream(seed, *key)`` with a key that encodes
its position in the run, so any single output row can be reproduced
bit-exactly in isolation.  Replicates may execute in a process pool;
aggregation sorts by replicate index, so results are identical at any
worker count.  Output is JSONL (one row per record) with an optional CSV
projection.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.stats import ks_2samp

from . import audit as _audit
from .cascade import MAX_DEPTH, build_cascade, good_scales, zoom_trace
from .cladogram import sample_uniform
from .errors import BudgetError, DomainError
from .excursion import glue_coupling, sample_excursion
from .mast import mast_size
from .randkit import substream

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "ExperimentRow",
    "write_jsonl",
    "write_csv",
    "fit_power_law",
    "run_mast_scaling",
    "run_cascade_stats",
    "run_audit_suite",
    "run_bounds_suite",
    "run_coupling_check",
    "run_experiment",
]

SCHEMA_VERSION = 1

MAST_N_BUDGET = 2048
AUDIT_DEPTH_BUDGET = 12

_KINDS = (
    "mast-scaling",
    "cascade-stats",
    "coupling-check",
    "audit-suite",
    "bounds-suite",
)


@dataclass
class ExperimentConfig:
    """One experiment request.  Unknown JSON fields are rejected."""

    kind: str
    seed: int = 0
    replicates: int = 100
    n_grid: tuple = ()
    k_grid: tuple = ()
    epsilon: float = 0.3
    alpha: float = 1e-6
    delta: float = 0.1
    workers: int = 1
    # coupling-check
    n: int = 5
    grid_size: int = 1 << 14
    samples: int = 2000
    # audit-suite
    chernoff_depth: int = 50
    chernoff_paths: int = 10000
    delta_grid: tuple = (0.05, 0.1, 0.3)
    alpha_grid: tuple = (0.01, 0.05)
    # bounds-suite
    exch_m: int = 20
    exch_pairs: int = 10000
    inter_n: int = 10000
    inter_m: int = 1000
    inter_replicates: int = 10000
    refined_n: int = 128
    refined_replicates: int = 200
    region_pairs: int = 50
    # output
    out: str | None = None
    format: str = "jsonl"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        if self.format not in ("jsonl", "csv"):
            raise DomainError("format must be 'jsonl' or 'csv'")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        self.n_grid = tuple(int(x) for x in self.n_grid)
        self.k_grid = tuple(int(x) for x in self.k_grid)
        self.delta_grid = tuple(float(x) for x in self.delta_grid)
        self.alpha_grid = tuple(float(x) for x in self.alpha_grid)
        for grid, name in ((self.n_grid, "n_grid"), (self.k_grid, "k_grid")):
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise DomainError(f"{name} must be strictly increasing")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise DomainError("config must be a JSON object")
        schema = data.pop("schema", None)
        if schema != SCHEMA_VERSION:
            raise DomainError(
                f"config schema must be {SCHEMA_VERSION}, got {schema!r}"
            )
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        d = {"schema": SCHEMA_VERSION}
        d.update(asdict(self))
        return json.dumps(d)


@dataclass
class ExperimentRow:
    """One output record: a named statistic with provenance.

    ``substream`` is the key tuple under the master seed that regenerates
    exactly the randomness this row consumed; re-running the row reproduces
    ``value`` bit-exactly (wall time of course varies).
    """

    experiment: str
    statistic: str
    params: dict
    value: float
    stderr: float | None
    replicates: int
    seed: int
    substream: tuple
    wall_time_s: float

    def as_dict(self) -> dict:
        d = asdict(self)
        d["substream"] = list(self.substream)
        return d


def write_jsonl(rows, fp) -> None:
    for row in rows:
        fp.write(json.dumps(row.as_dict()) + "\n")


def write_csv(rows, fp) -> None:
    """Flat CSV projection of the JSONL rows (params as a JSON column)."""
    writer = csv.writer(fp)
    writer.writerow(
        ["experiment", "statistic", "params", "value", "stderr", "replicates",
         "seed", "substream", "wall_time_s"]
    )
    for row in rows:
        writer.writerow(
            [
                row.experiment,
                row.statistic,
                json.dumps(row.params, sort_keys=True),
                repr(row.value),
                "" if row.stderr is None else repr(row.stderr),
                row.replicates,
                row.seed,
                json.dumps(list(row.substream)),
                f"{row.wall_time_s:.6f}",
            ]
        )


# -- fitting -------------------------------------------------------------------


def fit_power_law(ns, samples_per_n, n_bootstrap: int = 200, seed: int = 0) -> dict:
    """OLS fit of log(mean) against log(n) with a replicate-bootstrap band.

    ``samples_per_n`` is a list of per-replicate value arrays, one per grid
    point.  Returns the fitted exponent, intercept, and a percentile
    confidence band from resampling replicates within each grid point.
    """
    ns = np.asarray(ns, dtype=float)
    if len(ns) < 2:
        raise DomainError("power-law fit needs at least two grid points")
    logn = np.log(ns)

    def slope(means):
        x = np.vstack([logn, np.ones_like(logn)]).T
        coef, *_ = np.linalg.lstsq(x, np.log(means), rcond=None)
        return coef

    means = np.array([np.mean(v) for v in samples_per_n])
    beta, intercept = slope(means)
    rng = substream(seed, 0xB007)
    boots = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        bm = np.array(
            [np.mean(rng.choice(v, size=len(v), replace=True)) for v in samples_per_n]
        )
        boots[b] = slope(bm)[0]
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return {
        "beta_hat": float(beta),
        "intercept": float(intercept),
        "ci_low": float(lo),
        "ci_high": float(hi),
    }


# -- replicate scheduling ------------------------------------------------------


def _run_replicates(task, args_list, workers: int):
    """Run ``task`` over argument tuples, serially or in a process pool;
    results are returned sorted by the replicate index the task reports."""
    if workers <= 1:
        out = [task(a) for a in args_list]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(task, args_list, chunksize=8))
    return [v for _, v in sorted(out, key=lambda t: t[0])]


def _mast_pair_size(args):
    seed, n, rep = args
    rng = substream(seed, n, rep)
    t1 = sample_uniform(n, rng)
    t2 = sample_uniform(n, rng)
    return rep, mast_size(t1, t2)


# -- experiment kinds ----------------------------------------------------------


def run_mast_scaling(cfg: ExperimentConfig):
    """Mean/quantile MAST sizes per n plus the fitted scaling exponent."""
    if not cfg.n_grid:
        raise DomainError("mast-scaling requires n_grid")
    if max(cfg.n_grid) > MAST_N_BUDGET:
        est = cfg.replicates * sum((n / 1024.0) ** 2 * 0.2 for n in cfg.n_grid)
        raise BudgetError(
            f"n_grid exceeds the solver budget ({MAST_N_BUDGET}); "
            f"estimated cost ~{est:.0f}s of solver time"
        )
    rows = []
    per_n_values = []
    for n in cfg.n_grid:
        t0 = time.perf_counter()
        args = [(cfg.seed, n, r) for r in range(cfg.replicates)]
        sizes = np.array(_run_replicates(_mast_pair_size, args, cfg.workers), dtype=float)
        wall = time.perf_counter() - t0
        per_n_values.append(sizes)
        params = {"n": n}
        base = dict(
            experiment="mast-scaling",
            params=params,
            replicates=cfg.replicates,
            seed=cfg.seed,
            substream=(n,),
            wall_time_s=wall,
        )
        rows.append(
            ExperimentRow(
                statistic="mast_mean",
                value=float(sizes.mean()),
                stderr=float(sizes.std(ddof=1) / math.sqrt(len(sizes)))
                if len(sizes) > 1
                else None,
                **base,
            )
        )
        rows.append(
            ExperimentRow(
                statistic="mast_mean_over_sqrt_n",
                value=float(sizes.mean() / math.sqrt(n)),
                stderr=None,
                **base,
            )
        )
        for qname, q in (("q10", 10), ("q50", 50), ("q90", 90)):
            rows.append(
                ExperimentRow(
                    statistic=f"mast_{qname}",
                    value=float(np.percentile(sizes, q)),
                    stderr=None,
                    **base,
                )
            )
    fit = None
    if len(cfg.n_grid) >= 2:
        fit = fit_power_law(cfg.n_grid, per_n_values, seed=cfg.seed)
        for key, val in fit.items():
            rows.append(
                ExperimentRow(
                    experiment="mast-scaling",
                    statistic=f"fit_{key}",
                    params={"n_grid": list(cfg.n_grid)},
                    value=val,
                    stderr=None,
                    replicates=cfg.replicates,
                    seed=cfg.seed,
                    substream=(0xB007,),
                    wall_time_s=0.0,
                )
            )
    return rows, fit


def run_cascade_stats(cfg: ExperimentConfig):
    """Good-scale counts, W_I moments, BRW envelopes, leaf-mass sums."""
    if not cfg.k_grid:
        raise DomainError("cascade-stats requires k_grid")
    if max(cfg.k_grid) > MAX_DEPTH:
        raise BudgetError(
            f"cascade depth budget is {MAX_DEPTH}: 3^k masses are materialised"
        )
    rows = []
    for k in cfg.k_grid:
        t0 = time.perf_counter()
        good_rate = np.empty(cfg.replicates)
        w_chosen = np.empty(cfg.replicates)
        min_log = np.empty(cfg.replicates)
        leaf_err = np.empty(cfg.replicates)
        n_odd = max(len(range(1, k, 2)), 1)
        for r in range(cfg.replicates):
            rng = substream(cfg.seed, k, r)
            tr = zoom_trace(k, rng)
            good_rate[r] = len(good_scales(tr, cfg.alpha)) / n_odd
            w_chosen[r] = tr.chosen_weights().mean()
            c = build_cascade(k, rng)
            logs = np.log(c.levels[k])
            min_log[r] = logs.min()
            leaf_err[r] = abs(float(c.levels[k].sum()) - 1.0)
        wall = time.perf_counter() - t0
        base = dict(
            experiment="cascade-stats",
            params={"k": k, "alpha": cfg.alpha},
            replicates=cfg.replicates,
            seed=cfg.seed,
            substream=(k,),
            wall_time_s=wall,
        )
        for stat, vals in (
            ("good_scale_rate_per_odd", good_rate),
            ("w_chosen_mean", w_chosen),
            ("min_log_mass", min_log),
            ("leaf_mass_abs_error", leaf_err),
        ):
            rows.append(
                ExperimentRow(
                    statistic=stat,
                    value=float(vals.mean()),
                    stderr=float(vals.std(ddof=1) / math.sqrt(len(vals)))
                    if len(vals) > 1
                    else None,
                    **base,
                )
            )
    return rows


def run_audit_suite(cfg: ExperimentConfig):
    """Sqrt-product decay, identity checks, supermartingale grid."""
    if not cfg.k_grid:
        raise DomainError("audit-suite requires k_grid")
    kmax = max(cfg.k_grid)
    if kmax > AUDIT_DEPTH_BUDGET:
        raise BudgetError(f"audit-suite depth budget is {AUDIT_DEPTH_BUDGET}")
    rows = []
    t0 = time.perf_counter()
    sums = np.empty((cfg.replicates, len(cfg.k_grid)))
    ident_err = 0.0
    for r in range(cfg.replicates):
        rng1 = substream(cfg.seed, 0, r)
        rng2 = substream(cfg.seed, 1, r)
        pair = _audit.Correspondence.of_pair(
            build_cascade(kmax, rng1), build_cascade(kmax, rng2)
        )
        for i, k in enumerate(cfg.k_grid):
            sums[r, i] = _audit.sqrt_product_sum(pair, k)
        ident = _audit.Correspondence.identity(pair.source)
        ident_err = max(
            ident_err,
            max(abs(_audit.sqrt_product_sum(ident, k) - 1.0) for k in cfg.k_grid),
        )
    wall = time.perf_counter() - t0
    for i, k in enumerate(cfg.k_grid):
        rows.append(
            ExperimentRow(
                experiment="audit-suite",
                statistic="sqrt_product_sum_mean",
                params={"k": k},
                value=float(sums[:, i].mean()),
                stderr=float(sums[:, i].std(ddof=1) / math.sqrt(cfg.replicates)),
                replicates=cfg.replicates,
                seed=cfg.seed,
                substream=(0, k),
                wall_time_s=wall / len(cfg.k_grid),
            )
        )
    # geometric decay ratio via log-mean slope over k
    if len(cfg.k_grid) >= 2:
        ks = np.asarray(cfg.k_grid, dtype=float)
        x = np.vstack([ks, np.ones_like(ks)]).T
        coef, *_ = np.linalg.lstsq(x, np.log(sums.mean(axis=0)), rcond=None)
        rows.append(
            ExperimentRow(
                experiment="audit-suite",
                statistic="sqrt_sum_decay_ratio",
                params={"k_grid": list(cfg.k_grid)},
                value=float(np.exp(coef[0])),
                stderr=None,
                replicates=cfg.replicates,
                seed=cfg.seed,
                substream=(0,),
                wall_time_s=0.0,
            )
        )
    rows.append(
        ExperimentRow(
            experiment="audit-suite",
            statistic="identity_sqrt_sum_max_abs_error",
            params={"k_grid": list(cfg.k_grid)},
            value=float(ident_err),
            stderr=None,
            replicates=cfg.replicates,
            seed=cfg.seed,
            substream=(0,),
            wall_time_s=0.0,
        )
    )
    # supermartingale grid at ensemble depth
    sub = 2
    for delta in cfg.delta_grid:
        for alpha in cfg.alpha_grid:
            t1 = time.perf_counter()
            mu = delta**2 / 10.0
            res = _audit.chernoff_path_ensemble(
                cfg.chernoff_depth,
                cfg.chernoff_paths,
                mu,
                delta,
                alpha,
                substream(cfg.seed, sub),
                image="independent",
            )
            rows.append(
                ExperimentRow(
                    experiment="audit-suite",
                    statistic="chernoff_mean",
                    params={
                        "delta": delta,
                        "alpha": alpha,
                        "mu": mu,
                        "k": cfg.chernoff_depth,
                        "within_bound": res.within_bound,
                    },
                    value=res.mean,
                    stderr=res.stderr,
                    replicates=cfg.chernoff_paths,
                    seed=cfg.seed,
                    substream=(sub,),
                    wall_time_s=time.perf_counter() - t1,
                )
            )
            sub += 1
    # designed sensitivity control: adversarial image, mu far out of regime
    delta, alpha = 0.1, 0.05
    mu_bad = 10.0 * _audit.mu_admissible_bound(delta)
    res = _audit.chernoff_path_ensemble(
        cfg.chernoff_depth,
        cfg.chernoff_paths,
        mu_bad,
        delta,
        alpha,
        substream(cfg.seed, sub),
        image="perturbed",
    )
    rows.append(
        ExperimentRow(
            experiment="audit-suite",
            statistic="chernoff_mean_negative_control",
            params={
                "delta": delta,
                "alpha": alpha,
                "mu": mu_bad,
                "k": cfg.chernoff_depth,
                "expected_fail": True,
                "within_bound": res.within_bound,
            },
            value=res.mean,
            stderr=res.stderr,
            replicates=cfg.chernoff_paths,
            seed=cfg.seed,
            substream=(sub,),
            wall_time_s=0.0,
        )
    )
    return rows


def run_bounds_suite(cfg: ExperimentConfig):
    """Exceedance experiments vs their formula bounds, plus designed failures."""
    rows = []

    def add(statistic, params, value, stderr, replicates, sub, wall):
        rows.append(
            ExperimentRow(
                experiment="bounds-suite",
                statistic=statistic,
                params=params,
                value=value,
                stderr=stderr,
                replicates=replicates,
                seed=cfg.seed,
                substream=sub,
                wall_time_s=wall,
            )
        )

    # exchangeable MAST tail probed at the 2 sqrt(m) scale (the asymptotic
    # 2e sqrt(m) index would exceed m at desk sizes)
    t0 = time.perf_counter()
    m = cfg.exch_m
    s = math.ceil(2.0 * math.sqrt(m))
    bound = _audit.exchangeable_tail_bound(m, s)
    rng = substream(cfg.seed, 10)
    hits = 0
    for _ in range(cfg.exch_pairs):
        t1 = sample_uniform(m, rng)
        t2 = sample_uniform(m, rng)
        if mast_size(t1, t2) >= s:
            hits += 1
    freq = hits / cfg.exch_pairs
    add(
        "exchangeable_tail",
        {"m": m, "s": s, "bound": bound, "passed": freq <= bound},
        freq,
        math.sqrt(max(freq * (1 - freq), 1.0 / cfg.exch_pairs) / cfg.exch_pairs),
        cfg.exch_pairs,
        (10,),
        time.perf_counter() - t0,
    )
    # designed failure: shrink the bound far below the observable frequency
    s_low = max(2, int(np.percentile([mast_size(sample_uniform(m, rng), sample_uniform(m, rng)) for _ in range(200)], 30)))
    bound_scaled = _audit.exchangeable_tail_bound(m, s_low) * 1e-6
    rng2 = substream(cfg.seed, 11)
    hits = sum(
        1
        for _ in range(min(cfg.exch_pairs, 2000))
        if mast_size(sample_uniform(m, rng2), sample_uniform(m, rng2)) >= s_low
    )
    freq2 = hits / min(cfg.exch_pairs, 2000)
    add(
        "exchangeable_tail_negative_control",
        {
            "m": m,
            "s": s_low,
            "bound": bound_scaled,
            "expected_fail": True,
            "passed": freq2 <= bound_scaled,
        },
        freq2,
        None,
        min(cfg.exch_pairs, 2000),
        (11,),
        0.0,
    )

    # subset intersection tail
    t0 = time.perf_counter()
    res = _audit.intersection_tail_experiment(
        cfg.inter_n,
        cfg.inter_m,
        cfg.inter_m,
        cfg.epsilon,
        cfg.inter_replicates,
        substream(cfg.seed, 12),
    )
    add(
        "intersection_tail",
        {
            "n": cfg.inter_n,
            "m": cfg.inter_m,
            "epsilon": cfg.epsilon,
            "threshold": res.threshold,
            "bound": res.bound,
            "passed": res.within_bound,
        },
        res.frequency,
        res.stderr,
        cfg.inter_replicates,
        (12,),
        time.perf_counter() - t0,
    )
    neg = _audit.intersection_tail_experiment(
        cfg.inter_n,
        cfg.inter_m,
        cfg.inter_m,
        cfg.epsilon,
        min(cfg.inter_replicates, 2000),
        substream(cfg.seed, 13),
        threshold_factor=0.05,
    )
    add(
        "intersection_tail_negative_control",
        {
            "n": cfg.inter_n,
            "m": cfg.inter_m,
            "epsilon": cfg.epsilon,
            "threshold": neg.threshold,
            "bound": neg.bound,
            "expected_fail": True,
            "passed": neg.within_bound,
        },
        neg.frequency,
        neg.stderr,
        neg.replicates,
        (13,),
        0.0,
    )

    # refined region MAST bound
    t0 = time.perf_counter()
    ref = _audit.refined_sqrt_bound_experiment(
        cfg.refined_n,
        0.2,
        cfg.refined_replicates,
        substream(cfg.seed, 14),
        region_pairs=cfg.region_pairs,
    )
    add(
        "refined_sqrt_bound_violations",
        {
            "n": cfg.refined_n,
            "epsilon": 0.2,
            "constant": ref.constant,
            "passed": ref.violating_tree_fraction <= 0.05,
        },
        ref.violating_tree_fraction,
        None,
        cfg.refined_replicates,
        (14,),
        time.perf_counter() - t0,
    )
    ref_neg = _audit.refined_sqrt_bound_experiment(
        cfg.refined_n,
        0.2,
        min(cfg.refined_replicates, 50),
        substream(cfg.seed, 15),
        region_pairs=cfg.region_pairs,
        constant_scale=0.02,
    )
    add(
        "refined_sqrt_bound_negative_control",
        {
            "n": cfg.refined_n,
            "epsilon": 0.2,
            "constant": ref_neg.constant,
            "expected_fail": True,
            "passed": ref_neg.violating_tree_fraction <= 0.05,
        },
        ref_neg.violating_tree_fraction,
        None,
        ref_neg.replicates,
        (15,),
        0.0,
    )
    return rows


def _coupling_sample(args):
    seed, n, grid, rep = args
    rng = substream(seed, 20, rep)
    _, dist = glue_coupling(n, rng, N=grid)
    return rep, float(dist[0, 1])


def _single_tree_sample(args):
    seed, grid, rep = args
    rng = substream(seed, 21, rep)
    e = sample_excursion(grid, rng)
    s, t = rng.integers(0, grid, size=2)
    return rep, float(e.distance(int(s), int(t)))


def run_coupling_check(cfg: ExperimentConfig):
    """Two-sample comparison of d(X1, X2) laws: glued tree vs one excursion."""
    t0 = time.perf_counter()
    args1 = [(cfg.seed, cfg.n, cfg.grid_size, r) for r in range(cfg.samples)]
    args2 = [(cfg.seed, cfg.grid_size, r) for r in range(cfg.samples)]
    d_glued = np.array(_run_replicates(_coupling_sample, args1, cfg.workers))
    d_single = np.array(_run_replicates(_single_tree_sample, args2, cfg.workers))
    ks = ks_2samp(d_glued, d_single)
    wall = time.perf_counter() - t0
    base = dict(
        experiment="coupling-check",
        params={"n": cfg.n, "grid": cfg.grid_size, "samples": cfg.samples},
        replicates=cfg.samples,
        seed=cfg.seed,
        substream=(20, 21),
        wall_time_s=wall,
    )
    return [
        ExperimentRow(statistic="ks_distance", value=float(ks.statistic), stderr=None, **base),
        ExperimentRow(statistic="glued_mean", value=float(d_glued.mean()), stderr=float(d_glued.std(ddof=1) / math.sqrt(len(d_glued))), **base),
        ExperimentRow(statistic="single_mean", value=float(d_single.mean()), stderr=float(d_single.std(ddof=1) / math.sqrt(len(d_single))), **base),
    ]


def run_experiment(cfg: ExperimentConfig):
    """Dispatch a config to its runner; returns the list of rows."""
    if cfg.kind == "mast-scaling":
        rows, _ = run_mast_scaling(cfg)
        return rows
    if cfg.kind == "cascade-stats":
        return run_cascade_stats(cfg)
    if cfg.kind == "audit-suite":
        return run_audit_suite(cfg)
    if cfg.kind == "bounds-suite":
        return run_bounds_suite(cfg)
    if cfg.kind == "coupling-check":
        return run_coupling_check(cfg)
    raise DomainError(f"unknown experiment kind {cfg.kind!r}")
