import json
import math

import numpy as np
import pytest

from adaptive_qdrift.compiler import FixedQDrift, FluctuationAdaptive, channel_fidelity, fixed_probabilities
from adaptive_qdrift.harness import (
    SWEEP_COLUMNS,
    ConfigError,
    ExperimentResult,
    ResourceGuardError,
    build,
    config_from_dict,
    emit,
    extrapolate_zero_step,
    fit_result,
    load_config,
    monte_carlo_fidelity,
    render,
    run_point,
    shadow_bench,
    steps_for,
    sweep_steps,
    sweep_stepsize,
    trace_probabilities,
    trajectory_rng,
)
from adaptive_qdrift.models import RabiSpec

SINGLE = {"kind": "mfim", "chain_length": 4, "h_x": 0.0, "h_z": 0.0, "initial_state": ["0110"]}
MFIM = {"kind": "mfim"}


def _config(model=MFIM, strategy="adaptive", **kw):
    return config_from_dict({"model": model, "strategy": strategy, **kw})


def _col(result, name):
    return [row[result.columns.index(name)] for row in result.rows]


# -- configuration --------------------------------------------------------------------


def test_defaults():
    cfg = _config()
    assert (cfg.t, cfg.n_steps, cfg.n_samples, cfg.master_seed) == (1.0, 50, 10_000, 0)
    assert cfg.sweep_step_sizes == (0.01, 0.02, 0.03, 0.04, 0.05)
    echo = cfg.echo()
    assert echo["model"]["kind"] == "mfim" and echo["model"]["J"] == 1.0
    assert echo["strategy"] == {"kind": "adaptive", "var_floor": 1e-12, "moments": "exact"}
    json.dumps(echo)


@pytest.mark.parametrize("raw, match", [
    ({"strategy": "adaptive"}, "model"),
    ({"model": MFIM}, "strategy"),
    ({"model": {"kind": "ising"}, "strategy": "adaptive"}, "unknown model"),
    ({"model": MFIM, "strategy": "greedy"}, "strategy kind"),
    ({"model": MFIM, "strategy": "adaptive", "t": 0}, "t must"),
    ({"model": MFIM, "strategy": "adaptive", "n_samples": 0}, "n_samples"),
    ({"model": MFIM, "strategy": "adaptive", "n_steps": 0}, "n_steps"),
    ({"model": MFIM, "strategy": "adaptive", "colour": "red"}, "colour"),
    ({"model": {"kind": "mfim", "J": 1, "bogus": 2}, "strategy": "adaptive"}, "bogus"),
    ({"model": MFIM, "strategy": {"kind": "adaptive", "moments": "guess"}}, "moments"),
    ({"model": MFIM, "strategy": {"kind": "adaptive", "moments": "shadows",
                                  "shadows": {"n_shots": 10, "mom_batches": 3}}}, "divide"),
])
def test_config_errors(raw, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(raw)


def test_load_config_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "model:\n  kind: rabi\n  g: 0.8\n  D: 10\n  initial_state: [[2, 0], [5, 0]]\n"
        "strategy:\n  kind: adaptive\nn_samples: 64\n"
    )
    cfg = load_config(path)
    assert isinstance(cfg.model, RabiSpec) and cfg.model.g == 0.8
    assert cfg.model.initial == ((2, 0), (5, 0))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "bad.yaml").write_text("model: [unclosed\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(tmp_path / "bad.yaml")


def test_equal_weight_builds_unweighted_bosonic_terms():
    terms, _ = build(_config({"kind": "kerr", "D": 8}, "equal"))
    assert terms.weights == [None, None, None]
    terms, _ = build(_config({"kind": "kerr", "D": 8}, "hard-truncation"))
    assert all(w > 0 for w in terms.weights)


# -- Monte Carlo --------------------------------------------------------------------------


def test_single_term_model_is_exact():
    res = run_point(_config(SINGLE, n_samples=300))
    (row,) = res.rows
    assert _col(res, "mean_fidelity")[0] == pytest.approx(1.0, abs=1e-12)
    assert _col(res, "std_error")[0] == pytest.approx(0.0, abs=1e-12)
    assert res.columns == SWEEP_COLUMNS


def test_single_sample_is_flagged_degenerate(caplog):
    res = run_point(_config(n_samples=1, n_steps=5))
    assert _col(res, "std_error") == [0.0]
    assert res.metadata["degenerate_samples"] is True
    assert "degenerate" in caplog.text


def test_monte_carlo_matches_channel_small():
    cfg = _config({"kind": "mfim", "chain_length": 2, "boundary": "open", "initial_state": ["00"]},
                  "qdrift")
    terms, psi0 = build(cfg)
    exact = channel_fidelity(terms, psi0, fixed_probabilities(terms, FixedQDrift()), 1.0, 10)
    stats = monte_carlo_fidelity(terms, psi0, 1.0, 10, FixedQDrift(), 5000, master_seed=3)
    assert abs(stats["mean_fidelity"] - exact) < 3 * stats["std_error"]


def test_monte_carlo_jobs_do_not_change_results():
    terms, psi0 = build(_config())
    a = monte_carlo_fidelity(terms, psi0, 0.4, 20, FluctuationAdaptive(), 600, master_seed=5, jobs=1)
    b = monte_carlo_fidelity(terms, psi0, 0.4, 20, FluctuationAdaptive(), 600, master_seed=5, jobs=3)
    assert a == b


def test_resource_guard():
    terms, psi0 = build(_config({"kind": "kerr"}))
    with pytest.raises(ResourceGuardError, match="budget"):
        monte_carlo_fidelity(terms, psi0, 1.0, 50, FixedQDrift(), 10_000, budget=1e6)


def test_trajectory_streams_are_distinct():
    draws = {trajectory_rng(0, p, i).integers(2**63) for p in range(3) for i in range(2000)}
    assert len(draws) == 6000
    assert trajectory_rng(0, 1, 2).random() == trajectory_rng(0, 1, 2).random()


# -- sweeps ---------------------------------------------------------------------------------


def test_sweep_steps_single_term():
    res = sweep_steps(_config(SINGLE, n_samples=50, sweep_n_steps=[5, 1, 3, 2, 4]))
    assert _col(res, "abscissa") == [1, 2, 3, 4, 5]
    assert _col(res, "t") == pytest.approx([0.02, 0.04, 0.06, 0.08, 0.1])
    assert _col(res, "mean_fidelity") == pytest.approx([1.0] * 5, abs=1e-12)


def test_sweep_steps_error_accumulates():
    res = sweep_steps(_config(n_samples=2000, sweep_n_steps=[10, 50], master_seed=1))
    (f10, f50), (s10, s50) = _col(res, "mean_fidelity"), _col(res, "std_error")
    assert f50 <= f10 + 3 * math.hypot(s10, s50)


def test_steps_for():
    assert [steps_for(1.0, s) for s in (0.5, 1.0)] == [2, 1]
    assert steps_for(1.0, 0.03) == 33


def test_sweep_stepsize_single_term():
    res = sweep_stepsize(_config(SINGLE, n_samples=20, sweep_step_sizes=[1.0, 0.5]))
    assert _col(res, "abscissa") == [0.5, 1.0]
    assert _col(res, "n_steps") == [2, 1]
    assert _col(res, "mean_fidelity") == pytest.approx([1.0, 1.0], abs=1e-12)


def test_sweep_stepsize_adaptive_mfim_trend_and_limit():
    res = sweep_stepsize(_config(n_samples=2000, master_seed=2))
    f, s = _col(res, "mean_fidelity"), _col(res, "std_error")
    for k in range(len(f) - 1):
        assert f[k + 1] <= f[k] + 3 * math.hypot(s[k], s[k + 1])
    fit = fit_result(res)
    assert abs(fit.intercept - 1) < 5e-3
    assert all(0 <= x <= 1 for x in f) and all(x >= 0 for x in s)


def test_extrapolation_examples():
    fit = extrapolate_zero_step([(0.01, 0.99), (0.02, 0.98)])
    assert fit.intercept == pytest.approx(1.0) and fit.slope == pytest.approx(-1.0)
    assert math.isnan(fit.intercept_se)
    flat = extrapolate_zero_step([(0.01, 1.0), (0.02, 1.0)])
    assert flat.intercept == pytest.approx(1.0) and flat.slope == pytest.approx(0.0, abs=1e-12)


def test_extrapolation_standard_error_against_scipy():
    from scipy import stats

    x = np.array([0.01, 0.02, 0.03, 0.04, 0.05])
    y = 1 - 0.7 * x + np.array([1e-3, -2e-3, 0.5e-3, 1.5e-3, -1e-3])
    fit = extrapolate_zero_step(list(zip(x, y)))
    ref = stats.linregress(x, y)
    assert fit.intercept == pytest.approx(ref.intercept, rel=1e-12)
    assert fit.slope == pytest.approx(ref.slope, rel=1e-12)
    assert fit.intercept_se == pytest.approx(ref.intercept_stderr, rel=1e-10)


def test_extrapolation_rejects_degenerate_input():
    with pytest.raises(ValueError):
        extrapolate_zero_step([(0.01, 1.0)])
    with pytest.raises(ValueError):
        extrapolate_zero_step([(0.01, 1.0), (0.01, 0.9)])


# -- traces ---------------------------------------------------------------------------------


def test_trace_rejected_for_fixed_strategy():
    with pytest.raises(ConfigError, match="adaptive"):
        trace_probabilities(_config(strategy="qdrift"))


def test_trace_single_term_is_constant_one():
    res = trace_probabilities(_config(SINGLE, n_steps=10))
    assert res.columns == ["step", "tau", "sampled_index", "p_1"]
    assert _col(res, "p_1") == [1.0] * 10


def test_trace_rabi_rows_are_distributions():
    res = trace_probabilities(_config({"kind": "rabi"}, n_steps=50))
    assert res.columns == ["step", "tau", "sampled_index", "p_1", "p_2", "p_3"]
    assert len(res.rows) == 50
    for row in res.rows:
        assert abs(sum(row[3:]) - 1) <= 1e-12
        assert row[1] == pytest.approx(0.02 / row[3 + row[2]])


# -- shadow bench ------------------------------------------------------------------------------


def test_shadow_bench_small():
    cfg = _config(bench={"n_shots": 2000, "mom_batches": 10, "scaling_shots": [200, 800],
                         "repeats": 20})
    res = shadow_bench(cfg)
    assert _col(res, "term") == ["zz", "x", "z"]
    assert _col(res, "exact_deviation")[0] == 0.0
    assert _col(res, "exact_mean") == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_shadow_bench_rejects_bosons():
    with pytest.raises(ConfigError, match="qubit"):
        shadow_bench(_config({"kind": "kerr"}))


# -- emission ----------------------------------------------------------------------------------


def test_empty_result_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    emit(ExperimentResult(list(SWEEP_COLUMNS)), "csv", path)
    assert path.read_text() == ",".join(SWEEP_COLUMNS) + "\n"


def test_one_record_is_two_lines(tmp_path):
    res = run_point(_config(SINGLE, n_samples=4, n_steps=3))
    path = tmp_path / "r.csv"
    emit(res, "csv", path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2 and lines[0].split(",") == SWEEP_COLUMNS
    meta = json.loads((tmp_path / "r.csv.meta.json").read_text())
    assert meta["master_seed"] == 0 and meta["config"]["n_samples"] == 4
    assert meta["version"].startswith("adaptive_qdrift ")


def test_json_mirrors_csv():
    res = run_point(_config(n_samples=16, n_steps=4))
    doc = json.loads(render(res, "json"))
    assert doc["columns"] == SWEEP_COLUMNS
    assert doc["rows"][0]["mean_fidelity"] == res.rows[0][1]
    assert doc["metadata"]["config"] == res.metadata["config"]


def test_json_nan_becomes_null():
    res = ExperimentResult(["a"], [[float("nan")]], {"x": float("inf")})
    assert json.loads(render(res, "json")) == {"metadata": {"x": None}, "columns": ["a"],
                                               "rows": [{"a": None}]}


def test_rerun_is_byte_identical(tmp_path):
    cfg = _config(n_samples=300, n_steps=10, master_seed=9)
    for fmt in ("csv", "json"):
        a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
        emit(run_point(cfg), fmt, a)
        emit(run_point(cfg), fmt, b)
        assert a.read_bytes() == b.read_bytes()


def test_emit_reports_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit(ExperimentResult(["a"]), "csv", tmp_path / "missing" / "x.csv")
