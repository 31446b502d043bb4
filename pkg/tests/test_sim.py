import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wprior.errors import DomainError, ProprietyError
from wprior.infer import McmcConfig, PosteriorSummary
from wprior.sim import (
    PRESETS,
    Scenario,
    aggregate,
    emit_report,
    generate_design,
    preset,
    read_report_csv,
    report_csv,
    run_replicate,
    run_scenario,
)

QUICK = McmcConfig(iterations=2000, burnin=1000, thinning=2)


def _summary(mean, lo, hi, rmse=None):
    a = lambda v: np.atleast_1d(np.asarray(v, dtype=float))
    return PosteriorSummary(a(mean), a(0.1), a(lo), a(hi), None if rmse is None else a(rmse))


def test_aggregate_examples():
    agg = aggregate([(_summary(1.0, 0.0, 1.0), [1.9]), (_summary(3.0, 0.0, 3.0), [2.1])], [2.0])
    assert agg["m_mean"][0] == pytest.approx(2.0)
    assert agg["coverage"][0] == pytest.approx(0.5)
    assert agg["m_mle"][0] == pytest.approx(2.0)
    assert agg["rmse_mle"][0] == pytest.approx(0.1)
    with pytest.raises(DomainError):
        aggregate([], [2.0])


def test_design_unit_variance_single_covariate():
    X = generate_design(10000, 1, 0.3, 1)
    assert np.all(X[:, 0] == 1.0)
    assert np.var(X[:, 1], ddof=1) == pytest.approx(1.0, rel=0.1)


def test_design_equicorrelation():
    X = generate_design(100000, 3, 0.5, 2)
    C = np.corrcoef(X[:, 1:], rowvar=False)
    assert np.all(np.abs(C[np.triu_indices(3, 1)] - 0.5) < 0.02)


def test_design_independent_case():
    n = 5000
    C = np.corrcoef(generate_design(n, 4, 0.0, 3)[:, 1:], rowvar=False)
    assert np.all(np.abs(C[np.triu_indices(4, 1)]) < 3 / math.sqrt(n))


def test_design_rejects_indefinite_correlation():
    with pytest.raises(DomainError):
        generate_design(10, 3, -0.6, 0)
    with pytest.raises(DomainError):
        generate_design(10, 3, 1.0, 0)


def test_scenario_validation_and_json(tmp_path):
    sc = preset("desk_regression", seed=3)
    path = tmp_path / "sc.json"
    sc.save(path)
    assert Scenario.load(path) == sc
    assert set(PRESETS) >= {"desk_regression", "desk_sn1", "full_sn5"}
    with pytest.raises(DomainError):
        replace(sc, replicates=0)
    with pytest.raises(DomainError):
        Scenario.from_json({**sc.to_json(), "colour": "red"})
    with pytest.raises(DomainError):
        Scenario("skew_normal", (0.0, -1.0, 1.0), ("independence_wasserstein",), (10,), 1)


def test_propriety_precheck_refuses():
    sc = Scenario("normal_linreg", (1.0, 0.0, 0.5, 1.0, 0.5), ("wasserstein",), (5,), 2, QUICK, seed=1)
    with pytest.raises(ProprietyError) as info:
        run_scenario(sc)
    assert "n > p + 1" in info.value.verdict.failing()


def test_missing_seed_is_an_error():
    with pytest.raises(DomainError, match="seed"):
        run_scenario(replace(preset("desk_regression", seed=None), replicates=1))


def test_single_replicate_report_equals_its_summary():
    sc = Scenario("skew_normal", (10.0, 1.0, 3.0), ("independence_wasserstein",), (40,), 1, QUICK, seed=8)
    rep = run_scenario(sc)
    one = run_replicate(sc, 40, 0)
    s = one["summaries"]["independence_wasserstein"]
    for j, pname in enumerate(sc.param_names):
        row = rep.row("independence_wasserstein", 40, pname)
        assert row.m_mean == s.mean[j] and row.m_sd == s.sd[j] and row.m_rmse == s.rmse[j]
        assert row.m_mle == one["mle"][j]
        assert row.coverage in (0.0, 1.0)


@pytest.fixture(scope="module")
def small_report():
    sc = Scenario("normal_linreg", (1.0, 0.0, 0.5, 1.0, 0.5), ("wasserstein", "flat"), (20, 40), 3, QUICK, seed=5)
    return sc, run_scenario(sc)


def test_report_shape_and_invariants(small_report):
    sc, rep = small_report
    assert len(rep.rows) == len(sc.priors) * len(sc.sample_sizes) * sc.dim
    for r in rep.rows:
        assert 0.0 <= r.coverage <= 1.0
        assert math.isfinite(r.m_mean)
        truth = dict(zip(sc.param_names, sc.truth))[r.parameter]
        assert r.m_rmse >= abs(r.m_mean - truth) - 1e-12
    # MLE metrics are shared across priors at the same n
    for n in sc.sample_sizes:
        a = rep.row("wasserstein", n, "sigma")
        b = rep.row("flat", n, "sigma")
        assert (a.m_mle, a.rmse_mle) == (b.m_mle, b.rmse_mle)


def test_csv_roundtrip_and_markdown_rows(small_report, tmp_path):
    _, rep = small_report
    (path,) = emit_report(rep, "csv", tmp_path)
    back = read_report_csv(path, name=rep.name)
    assert back.rows == rep.rows
    (md,) = emit_report(rep, "markdown", tmp_path)
    table = [l for l in open(md).read().splitlines() if l.startswith("| ") and not l.startswith("| n |")]
    assert len(table) == len(rep.rows)


def test_plotdata_densities_integrate_to_one(small_report, tmp_path):
    _, rep = small_report
    paths = emit_report(rep, "plotdata", tmp_path)
    assert len(paths) == 4
    for p in paths:
        data = np.genfromtxt(p, delimiter=",", names=True)
        assert data.dtype.names == ("x", "pdf_true", "pdf_pred", "pdf_mle")
        for col in ("pdf_true", "pdf_pred", "pdf_mle"):
            assert np.trapezoid(data[col], data["x"]) == pytest.approx(1.0, abs=0.02)


def test_emit_rejects_unknown_format(small_report, tmp_path):
    with pytest.raises(DomainError):
        emit_report(small_report[1], "xlsx", tmp_path)


def test_unwritable_destination(small_report, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(small_report[1], "csv", blocker / "sub")


def test_deterministic_regardless_of_workers():
    sc = Scenario("skew_normal", (10.0, 1.0, 3.0), ("independence_wasserstein", "independence_jeffreys"),
                  (30,), 2, McmcConfig(600, 300, 1), seed=12)
    serial = report_csv(run_scenario(sc))
    again = report_csv(run_scenario(sc))
    pooled = report_csv(run_scenario(sc, workers=2))
    assert serial == again == pooled


def test_fixed_design_reuses_the_design():
    from wprior.sim import _data_for

    sc = replace(preset("desk_regression", seed=2), fix_design=True)
    m0, y0 = _data_for(sc, 50, 0)
    m1, y1 = _data_for(sc, 50, 1)
    assert np.array_equal(m0.design, m1.design) and not np.array_equal(y0, y1)
    m2, _ = _data_for(replace(sc, fix_design=False), 50, 1)
    assert not np.array_equal(m0.design, m2.design)


def test_progress_sink_sees_every_replicate():
    events = []
    sc = Scenario("exponential", (2.0,), ("wasserstein",), (10, 20), 2, McmcConfig(300, 100, 1), seed=3)
    run_scenario(sc, events.append)
    assert sorted((e["n"], e["replicate"]) for e in events) == [(10, 0), (10, 1), (20, 0), (20, 1)]


@pytest.mark.slow
def test_desk_regression_small_n():
    rep = run_scenario(replace(preset("desk_regression", seed=31), sample_sizes=(50,)))
    row = rep.row("wasserstein", 50, "beta_2")
    assert abs(row.m_mean - 0.5) <= 0.05
    assert 0.88 <= row.coverage <= 1.0


@pytest.mark.slow
def test_flat_regression_coverage_near_nominal():
    sc = Scenario("normal_linreg", (1.0, 0.0, 0.5, 1.0, 0.5), ("wasserstein",), (50,), 200,
                  McmcConfig(4000, 1500, 5), seed=77)
    rep = run_scenario(sc)
    bound = 2 * math.sqrt(0.95 * 0.05 / 200)
    for r in rep.rows:
        assert abs(r.coverage - 0.95) <= bound, (r.parameter, r.coverage)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 3), st.floats(-5, 5)), min_size=1, max_size=20),
       st.floats(-5, 5))
def test_aggregate_rmse_bounds_bias(reps, truth):
    items = []
    for m, w, mle in reps:
        items.append((_summary(m, m - w, m + w, rmse=abs(m - truth) + w), [mle]))
    agg = aggregate(items, [truth])
    assert agg["m_rmse"][0] >= abs(agg["m_mean"][0] - truth) - 1e-9
    assert agg["rmse_mle"][0] >= abs(agg["m_mle"][0] - truth) - 1e-9
    assert 0.0 <= agg["coverage"][0] <= 1.0
