"""
Tests for config handling, the experiment runner and its CSV artifacts.

Runs use small replication counts; they check structure, determinism and the
exact identities, not the statistical pass/fail of the limit comparisons.
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app import settings
from app.schemas import RESULT_COLUMNS, TIMING_COLUMNS, ExperimentConfig
from app.services import harness
from app.services.errors import ConfigError
from app.services.parallel import chunk_ranges, run_indexed
from app.services.subord import _passage_chunk

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


# --- Helpers ---

def make_raw(**overrides) -> dict:
    """A small renewal_count config as a plain dict."""
    raw = {
        "kind": "renewal_count",
        "model": {"dependence": "independent", "alpha": 0.5},
        "t_grid": [100.0, 1000.0],
        "reps": 200,
        "seed": 5,
        "w_bank_size": 2000,
    }
    raw.update(overrides)
    return raw


def make_config(out: Path, **overrides) -> ExperimentConfig:
    return harness.parse_config(make_raw(out=str(out), **overrides))


def rows_by_statistic(result, statistic: str):
    return [row for row in result.rows if row.statistic == statistic]


# --- Config handling ---

@pytest.mark.parametrize("bad", [
    {"t_grid": []},
    {"t_grid": [100.0, 10.0]},
    {"t_grid": [-1.0]},
    {"reps": 50},
    {"colour": "blue"},
    {"kind": "ctrw_sojourn"},
    {"quantile_pairs": [[0.5, 0.9]]},
])
def test_parse_config_rejects_invalid(bad):
    """Bad fields raise ConfigError with field diagnostics."""
    with pytest.raises(ConfigError) as exc:
        harness.parse_config(make_raw(**bad))
    assert exc.value.diagnostics


def test_unit_waits_only_for_excursion():
    """Deterministic waits are refused outside ctrw_excursion."""
    model = {"dependence": "ctrw_cycle", "observation": {"kind": "deterministic", "param": 1.0}}
    with pytest.raises(ConfigError):
        harness.parse_config(make_raw(kind="ctrw_sojourn", model=model))
    assert harness.parse_config(make_raw(kind="ctrw_excursion", model=model)).model.observation.kind == "deterministic"


def test_load_config_reports_json_position(tmp_path):
    """JSON syntax errors carry line and column."""
    path = tmp_path / "broken.json"
    path.write_text('{\n  "kind": ,\n}')
    with pytest.raises(ConfigError) as exc:
        harness.load_config(path)
    assert exc.value.diagnostics[0].startswith("line 2")


def test_load_config_missing_file(tmp_path):
    """A missing file is a config error."""
    with pytest.raises(ConfigError):
        harness.load_config(tmp_path / "nope.json")


def test_apply_overrides_revalidates(tmp_path):
    """Overrides replace fields, None keeps them, bad values are refused."""
    config = make_config(tmp_path)
    updated = harness.apply_overrides(config, seed=9, reps=None)
    assert updated.seed == 9
    assert updated.reps == config.reps
    with pytest.raises(ConfigError):
        harness.apply_overrides(config, reps=10)


def test_shipped_configs_are_valid():
    """Every config under configs/ parses."""
    paths = sorted(CONFIG_DIR.glob("*.json"))
    assert paths
    for path in paths:
        assert harness.load_config(path).reps >= 100


# --- Parallel helpers ---

def test_chunk_ranges_cover_all_indices():
    """Chunks are contiguous and cover 0..n once."""
    ranges = chunk_ranges(1000, 4)
    assert ranges[0][0] == 0 and ranges[-1][1] == 1000
    assert all(a[1] == b[0] for a, b in zip(ranges, ranges[1:]))
    assert chunk_ranges(0, 4) == []


def test_run_indexed_independent_of_workers():
    """Results come back in index order whatever the worker count."""
    args = (0.5, 1e-2, "series", 3, settings.BANK_STREAM_OFFSET)
    serial = run_indexed(_passage_chunk, 40, 1, *args)
    pooled = run_indexed(_passage_chunk, 40, 2, *args)
    assert serial == pooled


# --- Runs ---

def test_renewal_run_is_deterministic(tmp_path):
    """Same seed gives byte-identical results.csv, with 1 or 2 workers."""
    first = harness.run(make_config(tmp_path / "a"), workers=1)
    harness.run(make_config(tmp_path / "b"), workers=1)
    harness.run(make_config(tmp_path / "c"), workers=2)
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    assert a == (tmp_path / "c" / "results.csv").read_bytes()
    assert b"\r\n" not in a
    assert len(rows_by_statistic(first, "tau_scaled")) == 2
    assert len(rows_by_statistic(first, "ks_trend")) == 1


def test_renewal_run_writes_artifacts(tmp_path):
    """results.csv, timings.csv and per-comparison plot data."""
    harness.run(make_config(tmp_path), workers=1)
    results = harness.read_results(tmp_path)
    assert list(results.columns) == RESULT_COLUMNS
    timings = pd.read_csv(tmp_path / "timings.csv")
    assert list(timings.columns) == TIMING_COLUMNS
    folder = tmp_path / "plots" / "renewal_count_t100_tau_scaled"
    assert list(pd.read_csv(folder / "ecdf.csv").columns) == ["x", "F_emp"]
    assert list(pd.read_csv(folder / "limit.csv").columns) == ["x", "F_limit", "err"]
    qq = pd.read_csv(folder / "qq.csv")
    assert list(qq.columns) == ["p", "q_emp", "q_limit"]
    assert len(qq) == 99


def test_identity_rows_are_zero(tmp_path):
    """No identity violations on renewal and point-process paths."""
    for kind in ("renewal_count", "max_limit"):
        config = make_config(tmp_path, kind=kind, t_grid=[1e4], model={
            "dependence": "independent", "observation": {"kind": "exponential", "param": 1.0}, "alpha": 0.5,
        })
        result = harness.run(config, workers=1, write=False)
        rows = rows_by_statistic(result, "identity_violations")
        assert rows and all(row.empirical == 0 for row in rows)


def test_max_limit_rows(tmp_path):
    """A max_limit run reports the comparison, counts and route agreement."""
    config = make_config(tmp_path, kind="max_limit", t_grid=[1e4], model={
        "dependence": "independent", "observation": {"kind": "exponential", "param": 1.0}, "alpha": 0.5,
    })
    result = harness.run(config, workers=1, write=False)
    names = {row.statistic for row in result.rows}
    assert {"max", "count_above_median", "route_agreement", "identity_violations"} <= names


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_max_limit_route_agreement_away_from_half(tmp_path, alpha):
    """Route agreement is computed, not raised, for alpha other than 1/2."""
    config = make_config(tmp_path, kind="max_limit", t_grid=[1e4], model={
        "dependence": "independent", "observation": {"kind": "exponential", "param": 1.0}, "alpha": alpha,
    })
    result = harness.run(config, workers=1, write=False)
    (row,) = rows_by_statistic(result, "route_agreement")
    assert np.isfinite(row.empirical)
    assert row.n == 2000


def test_kth_order_reduces_to_max(tmp_path):
    """The k = 1 mixture equals the max law on the same bank."""
    config = make_config(tmp_path, kind="kth_order", t_grid=[1e4], k=2, model={
        "dependence": "independent", "observation": {"kind": "exponential", "param": 1.0}, "alpha": 0.5,
    })
    result = harness.run(config, workers=1, write=False)
    (row,) = rows_by_statistic(result, "k1_reduces_to_max")
    assert row.passed
    assert rows_by_statistic(result, "kth_2")


def test_two_largest_rows(tmp_path):
    """One joint row and one route row per quantile pair."""
    config = make_config(tmp_path, kind="ctrw_two_largest", t_grid=[1e4], model={
        "dependence": "independent", "observation": {"kind": "exponential", "param": 1.0}, "alpha": 0.5,
    })
    result = harness.run(config, workers=1, write=False)
    names = {row.statistic for row in result.rows}
    assert {"two_largest_p0.9_p0.5", "two_largest_p0.9_p0.5_routes", "two_largest_p0.95_p0.75"} <= names
    for row in result.rows:
        if row.statistic.startswith("two_largest") and not row.statistic.endswith("_routes"):
            assert 0.0 <= row.empirical <= 1.0


def test_ctrw_fidelity_run(tmp_path):
    """Cycle and step fidelity rows, with zero identity violations."""
    config = make_config(
        tmp_path,
        kind="ctrw_sojourn",
        t_grid=[200.0],
        reps=100,
        fidelity="both",
        limit_check=False,
        model={"dependence": "ctrw_cycle", "observation": {"kind": "exponential", "param": 1.0}},
    )
    result = harness.run(config, workers=1, write=False)
    names = {row.statistic for row in result.rows}
    assert {"tau_fidelity", "q_raw_fidelity", "normalizer_check"} <= names
    (violations,) = rows_by_statistic(result, "identity_violations")
    assert violations.empirical == 0


def test_unit_wait_excursion_run(tmp_path):
    """Unit waits compare M^{tau-1}/t against both V banks."""
    config = make_config(
        tmp_path,
        kind="ctrw_excursion",
        t_grid=[1000.0],
        reps=100,
        v_bank_size=10**4,
        subord_tol=1e-2,
        model={"dependence": "ctrw_cycle", "observation": {"kind": "deterministic", "param": 1.0}},
    )
    result = harness.run(config, workers=1, write=False)
    names = {row.statistic for row in result.rows}
    assert {"v_support", "v_bank_retries", "v_series_vs_thinning", "excursion_vs_series", "excursion_vs_thinning"} <= names
    (support,) = rows_by_statistic(result, "v_support")
    assert support.passed


def test_resource_cap_failures_reported(tmp_path, monkeypatch):
    """Replications that hit tau caps are counted and fail the run."""
    monkeypatch.setattr(settings, "TAU_CAP", 1)
    config = make_config(tmp_path, t_grid=[1e4])
    result = harness.run(config, workers=1, write=False)
    (row,) = rows_by_statistic(result, "resource_cap_failures")
    assert row.empirical > 0
    assert not result.all_passed


def test_export_limit_grid(tmp_path):
    """A limit grid CSV over the quantiles of the W law."""
    path = harness.export_limit_grid(make_config(tmp_path), tmp_path, points=11)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["x", "value", "error_estimate"]
    assert len(frame) == 11
    assert np.all(np.diff(frame["value"]) >= 0)


def test_config_file_round_trip_through_cli(tmp_path):
    """The CLI simulate command runs a config file and exits 0 or 1."""
    from cli import main

    path = tmp_path / "config.json"
    path.write_text(json.dumps(make_raw(out=str(tmp_path / "out"))))
    code = main(["simulate", "--config", str(path), "--workers", "1"])
    assert code in (0, 1)
    assert (tmp_path / "out" / "results.csv").exists()
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
