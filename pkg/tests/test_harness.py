"""Tests for experiment configs, runners, persistence and reproducibility."""

import csv
import io
import json
import math

import numpy as np
import pytest

from mastlab.errors import BudgetError, DomainError
from mastlab.harness import (
    ExperimentConfig,
    fit_power_law,
    run_audit_suite,
    run_bounds_suite,
    run_cascade_stats,
    run_coupling_check,
    run_experiment,
    run_mast_scaling,
    write_csv,
    write_jsonl,
)


# -- config ---------------------------------------------------------------


def test_config_parse_and_round_trip():
    text = json.dumps(
        {"schema": 1, "kind": "mast-scaling", "seed": 4, "replicates": 3,
         "n_grid": [8, 16]}
    )
    cfg = ExperimentConfig.from_json(text)
    assert cfg.kind == "mast-scaling"
    assert cfg.n_grid == (8, 16)
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg


def test_config_rejects_unknown_fields():
    with pytest.raises(DomainError):
        ExperimentConfig.from_json(
            '{"schema": 1, "kind": "mast-scaling", "n_grid": [8], "bogus": 1}'
        )


def test_config_requires_schema():
    with pytest.raises(DomainError):
        ExperimentConfig.from_json('{"kind": "mast-scaling"}')
    with pytest.raises(DomainError):
        ExperimentConfig.from_json('{"schema": 2, "kind": "mast-scaling"}')


def test_config_rejects_bad_grid_and_kind():
    with pytest.raises(DomainError):
        ExperimentConfig(kind="mast-scaling", n_grid=(16, 8))
    with pytest.raises(DomainError):
        ExperimentConfig(kind="nope")
    with pytest.raises(DomainError):
        ExperimentConfig(kind="mast-scaling", replicates=0)


# -- persistence ------------------------------------------------------------


def _tiny_rows():
    cfg = ExperimentConfig(kind="mast-scaling", seed=5, replicates=4, n_grid=(8, 12))
    rows, fit = run_mast_scaling(cfg)
    return rows, fit


def test_jsonl_and_csv_projections():
    rows, _ = _tiny_rows()
    buf = io.StringIO()
    write_jsonl(rows, buf)
    lines = [json.loads(line) for line in buf.getvalue().strip().split("\n")]
    assert len(lines) == len(rows)
    assert all("seed" in r and "substream" in r and "wall_time_s" in r for r in lines)
    cbuf = io.StringIO()
    write_csv(rows, cbuf)
    reader = list(csv.reader(io.StringIO(cbuf.getvalue())))
    assert reader[0][0] == "experiment"
    assert len(reader) == len(rows) + 1


def test_rows_reproduce_bit_exactly():
    rows1, fit1 = _tiny_rows()
    rows2, fit2 = _tiny_rows()
    for a, b in zip(rows1, rows2):
        assert a.statistic == b.statistic
        assert a.value == b.value  # bit-exact, wall time may differ
        assert a.stderr == b.stderr
    assert fit1 == fit2


def test_single_row_reproducible_from_substream():
    # re-running one grid point alone reproduces its statistics bit-exactly
    full = run_mast_scaling(
        ExperimentConfig(kind="mast-scaling", seed=5, replicates=4, n_grid=(8, 12))
    )[0]
    only = run_mast_scaling(
        ExperimentConfig(kind="mast-scaling", seed=5, replicates=4, n_grid=(12,))
    )[0]
    pick = {r.statistic: r.value for r in full if r.params.get("n") == 12}
    pick_only = {r.statistic: r.value for r in only if r.params.get("n") == 12}
    assert pick == pick_only


def test_workers_do_not_change_values():
    cfg1 = ExperimentConfig(kind="mast-scaling", seed=6, replicates=6, n_grid=(8,))
    cfg2 = ExperimentConfig(
        kind="mast-scaling", seed=6, replicates=6, n_grid=(8,), workers=2
    )
    r1, _ = run_mast_scaling(cfg1)
    r2, _ = run_mast_scaling(cfg2)
    assert [(a.statistic, a.value) for a in r1] == [(b.statistic, b.value) for b in r2]


# -- budgets ------------------------------------------------------------------


def test_mast_scaling_budget_refusal():
    cfg = ExperimentConfig(kind="mast-scaling", n_grid=(1024, 4096), replicates=1)
    with pytest.raises(BudgetError) as exc:
        run_mast_scaling(cfg)
    assert "estimated cost" in str(exc.value)


def test_cascade_stats_budget_refusal():
    with pytest.raises(BudgetError):
        run_cascade_stats(ExperimentConfig(kind="cascade-stats", k_grid=(15,)))


def test_audit_suite_budget_refusal():
    with pytest.raises(BudgetError):
        run_audit_suite(ExperimentConfig(kind="audit-suite", k_grid=(13,)))


# -- fitting --------------------------------------------------------------------


def test_fit_power_law_recovers_exponent():
    rng = np.random.default_rng(0)
    ns = [32, 64, 128, 256]
    samples = [3.0 * n**0.47 * (1.0 + 0.01 * rng.standard_normal(200)) for n in ns]
    fit = fit_power_law(ns, samples)
    assert fit["beta_hat"] == pytest.approx(0.47, abs=0.01)
    assert fit["ci_low"] <= fit["beta_hat"] <= fit["ci_high"]


def test_fit_needs_two_points():
    with pytest.raises(DomainError):
        fit_power_law([8], [np.ones(4)])


# -- runners at desk scale --------------------------------------------------------


def test_run_mast_scaling_small():
    cfg = ExperimentConfig(kind="mast-scaling", seed=7, replicates=10, n_grid=(16, 32, 64))
    rows, fit = run_mast_scaling(cfg)
    stats = {r.statistic for r in rows}
    assert {"mast_mean", "mast_mean_over_sqrt_n", "mast_q50", "fit_beta_hat"} <= stats
    assert 0.1 < fit["beta_hat"] < 0.9


def test_run_cascade_stats_small():
    cfg = ExperimentConfig(
        kind="cascade-stats", seed=7, replicates=60, k_grid=(4, 6), alpha=1e-6
    )
    rows = run_cascade_stats(cfg)
    by = {(r.statistic, r.params["k"]): r.value for r in rows}
    assert abs(by[("w_chosen_mean", 6)] - 0.6) < 0.05
    assert by[("leaf_mass_abs_error", 6)] < 1e-10
    assert by[("min_log_mass", 6)] < by[("min_log_mass", 4)]


def test_run_audit_suite_small():
    cfg = ExperimentConfig(
        kind="audit-suite", seed=7, replicates=60, k_grid=(2, 4, 6),
        chernoff_depth=30, chernoff_paths=2000,
    )
    rows = run_audit_suite(cfg)
    by = {r.statistic: r for r in rows}
    assert abs(by["sqrt_sum_decay_ratio"].value - 0.75) < 0.03
    assert by["identity_sqrt_sum_max_abs_error"].value < 1e-9
    cher = [r for r in rows if r.statistic == "chernoff_mean"]
    assert len(cher) == 6
    assert all(r.params["within_bound"] for r in cher)
    neg = by["chernoff_mean_negative_control"]
    assert neg.params["expected_fail"]
    assert not neg.params["within_bound"]


def test_run_bounds_suite_small():
    cfg = ExperimentConfig(
        kind="bounds-suite", seed=7, replicates=1,
        exch_m=20, exch_pairs=400,
        inter_n=2000, inter_m=200, inter_replicates=500,
        refined_n=32, refined_replicates=30, region_pairs=10,
    )
    rows = run_bounds_suite(cfg)
    by = {r.statistic: r for r in rows}
    assert by["exchangeable_tail"].params["passed"]
    assert by["intersection_tail"].params["passed"]
    assert by["refined_sqrt_bound_violations"].params["passed"]
    for neg in (
        "exchangeable_tail_negative_control",
        "intersection_tail_negative_control",
        "refined_sqrt_bound_negative_control",
    ):
        assert by[neg].params["expected_fail"]
        assert not by[neg].params["passed"]


def test_run_coupling_check_small():
    cfg = ExperimentConfig(
        kind="coupling-check", seed=7, n=5, grid_size=1 << 10, samples=300
    )
    rows = run_coupling_check(cfg)
    by = {r.statistic: r for r in rows}
    assert by["ks_distance"].value < 0.15
    assert abs(by["glued_mean"].value - by["single_mean"].value) < 0.1


def test_run_experiment_dispatch():
    cfg = ExperimentConfig(kind="cascade-stats", seed=1, replicates=5, k_grid=(3,))
    rows = run_experiment(cfg)
    assert rows and rows[0].experiment == "cascade-stats"


def test_config_output_fields():
    cfg = ExperimentConfig(kind="cascade-stats", k_grid=(3,), out="rows.jsonl", format="csv")
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(DomainError):
        ExperimentConfig(kind="cascade-stats", k_grid=(3,), format="xml")


def test_mast_rarely_exceeds_2e_sqrt_n():
    # per-replicate MAST at n = 256 sits far below 2 e sqrt(n)
    from mastlab.cladogram import sample_uniform
    from mastlab.mast import mast_size
    from mastlab.randkit import substream

    n = 256
    cap = 2.0 * math.e * math.sqrt(n)
    rng = substream(77, 0)
    violations = sum(
        1 for _ in range(100)
        if mast_size(sample_uniform(n, rng), sample_uniform(n, rng)) > cap
    )
    assert violations / 100 < 0.01


def test_cascade_stats_good_scale_rate_floor():
    cfg = ExperimentConfig(
        kind="cascade-stats", seed=8, replicates=400, k_grid=(12,), alpha=1e-6
    )
    rows = run_cascade_stats(cfg)
    rate = next(r for r in rows if r.statistic == "good_scale_rate_per_odd")
    assert rate.value >= 0.997 / 9.0 - 3 * rate.stderr - 0.005
