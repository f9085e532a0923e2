import json
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_fe_panel
from tempfe.errors import (DofExhaustedError, EmptySampleError, InsufficientClustersError,
                           RankError, ValidationError)
from tempfe.estimator import (Estimate, FitResult, RegressionSpec, classical_vcov, cluster_vcov,
                              fit, ols, stars, summarize_fit)
from tempfe.synth import oracle_ols_dummies


# ---------------------------------------------------------------- ols
def test_ols_exact_line():
    res = ols([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    assert res.beta[0] == pytest.approx(2.0, abs=1e-14)
    np.testing.assert_allclose(res.residuals, 0.0, atol=1e-14)


def test_ols_drops_later_collinear_column():
    x1 = np.array([1.0, 2.0, 3.0, 4.0])
    x = np.column_stack([x1, 2 * x1])
    res = ols([1.0, 3.0, 2.0, 5.0], x, labels=["x1", "x2"])
    assert res.labels == ("x1",)
    assert res.dropped_collinear == ["x2"]


def test_ols_all_zero_column_raises():
    with pytest.raises(RankError):
        ols([1.0, 2.0], np.zeros((2, 1)))


@pytest.mark.parametrize("seed", range(10))
def test_ols_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(50, 4)) * [1.0, 10.0, 0.1, 1e3]
    y = rng.normal(size=50)
    res = ols(y, x)
    ref = np.linalg.solve(x.T @ x, x.T @ y)
    np.testing.assert_allclose(res.beta, ref, rtol=1e-10)
    np.testing.assert_allclose(res.bread, np.linalg.inv(x.T @ x), rtol=1e-9)


# ---------------------------------------------------------------- covariance
def brute_classical(e, x, m):
    n, k = x.shape
    return (e @ e) / (n - k - m) * np.linalg.inv(x.T @ x)


def brute_cluster(e, x, groups, m):
    n, k = x.shape
    bread = np.linalg.inv(x.T @ x)
    meat = np.zeros((k, k))
    levels = sorted(set(groups))
    for g in levels:
        rows = [i for i in range(n) if groups[i] == g]
        s = x[rows].T @ e[rows]
        meat += np.outer(s, s)
    G = len(levels)
    return G / (G - 1) * (n - 1) / (n - k - m) * bread @ meat @ bread


@pytest.mark.parametrize("seed", range(8))
def test_vcov_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, k, m = 60, 3, int(rng.integers(0, 10))
    x = rng.normal(size=(n, k))
    e = rng.normal(size=n)
    groups = rng.integers(0, 7, n)
    np.testing.assert_allclose(classical_vcov(e, x, n, k, m), brute_classical(e, x, m), rtol=1e-12)
    np.testing.assert_allclose(cluster_vcov(e, x, groups, n, k, m), brute_cluster(e, x, groups, m),
                               rtol=1e-12, atol=1e-16)


@pytest.mark.parametrize("seed", range(5))
def test_singleton_clusters_are_hc1(seed):
    rng = np.random.default_rng(seed)
    n, k = 40, 3
    x = rng.normal(size=(n, k))
    e = rng.normal(size=n)
    bread = np.linalg.inv(x.T @ x)
    hc0 = bread @ (x.T * e ** 2) @ x @ bread
    hc1 = n / (n - k) * hc0
    v = cluster_vcov(e, x, np.arange(n), n, k, 0)
    np.testing.assert_allclose(v, hc1, rtol=1e-12)


def test_zero_residuals_zero_vcov():
    x = np.arange(1.0, 7.0)[:, None]
    e = np.zeros(6)
    assert np.all(classical_vcov(e, x, 6, 1, 0) == 0)
    assert np.all(cluster_vcov(e, x, [0, 0, 1, 1, 2, 2], 6, 1, 0) == 0)


def test_dof_exhausted():
    with pytest.raises(DofExhaustedError):
        classical_vcov(np.ones(4), np.ones((4, 1)), 4, 1, 3)


def test_single_cluster():
    with pytest.raises(InsufficientClustersError):
        cluster_vcov(np.ones(4), np.arange(4.0)[:, None], ["a"] * 4, 4, 1, 0)


# ---------------------------------------------------------------- summary
def test_summarize_fit_example():
    r = summarize_fit([0.001], [[0.0005 ** 2]], ["b"], n_obs=100, k=1, m=10, rss=1.0,
                      tss_raw=2.0, tss_within=1.5)
    assert r.t_stat[0] == pytest.approx(2.0)
    assert r.p_value[0] == pytest.approx(0.0455, abs=5e-5)
    assert r.stars("b") == "**"
    np.testing.assert_allclose(r.ci95[0], [0.00002, 0.00198], atol=1e-15)


def test_summarize_zero_se():
    r = summarize_fit([0.5, 0.0], np.zeros((2, 2)), ["a", "b"], n_obs=10, k=2, m=0, rss=0.0,
                      tss_raw=1.0, tss_within=1.0)
    assert math.isinf(r.t_stat[0]) and r.p_value[0] == 0.0 and r.stars("a") == "***"
    assert r.t_stat[1] == 0.0 and r.p_value[1] == 1.0
    assert r.r2_full == 1.0 and r.r2_within == 1.0


@pytest.mark.parametrize("p,mark", [(0.009, "***"), (0.01, "**"), (0.049, "**"), (0.05, "*"),
                                    (0.0999, "*"), (0.10, ""), (0.5, "")])
def test_star_thresholds(p, mark):
    assert stars(p) == mark


# ---------------------------------------------------------------- full estimator
def two_way_frame():
    return pd.DataFrame({
        "firm_id": ["A", "A", "B", "B", "C", "C"],
        "year": [1, 2, 1, 2, 1, 2],
        "x1": [0.0, 1.0, 0.5, 2.0, 1.0, 1.5],
        "cvalue": [0.1, 0.4, 0.2, 0.8, 0.5, 0.55],
    })


def test_unknown_variable():
    with pytest.raises(ValidationError):
        fit(two_way_frame(), RegressionSpec(["nope"]))


def test_empty_sample():
    with pytest.raises(EmptySampleError):
        fit(two_way_frame(), RegressionSpec(["x1"], sample="year > 5"))


def test_regressor_collinear_with_fe_dropped():
    df = two_way_frame()
    df["firm_const"] = df["firm_id"].map({"A": 1.0, "B": 2.0, "C": 7.0})
    r = fit(df, RegressionSpec(["x1", "firm_const"]))
    assert r.labels == ("x1",) and r.dropped_collinear == ["firm_const"]
    assert any("firm_const" in note for note in r.notes)


def test_fit_matches_oracle_hand_case():
    df = two_way_frame()
    r = fit(df, RegressionSpec(["x1"]))
    o = oracle_ols_dummies(df, ["x1"])
    assert r.m_absorbed == o.dummy_rank == 4
    np.testing.assert_allclose(r.beta, o.beta, rtol=1e-10)
    np.testing.assert_allclose(r.vcov, o.vcov, rtol=1e-8)


@pytest.mark.parametrize("seed", range(12))
def test_fit_matches_oracle_random(seed):
    rng = np.random.default_rng(seed)
    frame, labels = random_fe_panel(rng, max_rows=120)
    est = Estimate(frame, RegressionSpec(labels, cluster="city_code"))
    if len(est.ols.labels) < len(labels) or est.n - est.k - est.m < 1:
        pytest.skip("unidentified draw")
    kept = est.data
    for kind in ("classical", "cluster"):
        r = est.result(kind)
        o = oracle_ols_dummies(kept, labels, vcov=kind, cluster="city_code")
        np.testing.assert_allclose(r.beta, o.beta, rtol=1e-8, atol=1e-10)
        if kind == "cluster" and r.n_clusters < 2:
            continue
        np.testing.assert_allclose(r.vcov, o.vcov, rtol=1e-8, atol=1e-14)


def test_beta_identical_across_vcov():
    frame, labels = random_fe_panel(np.random.default_rng(4))
    a = fit(frame, RegressionSpec(labels))
    b = fit(frame, RegressionSpec(labels, vcov="cluster", cluster="city_code"))
    assert a.beta.tobytes() == b.beta.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_scale_equivariance(seed, a, c):
    frame, labels = random_fe_panel(np.random.default_rng(seed), max_rows=80)
    base = Estimate(frame, RegressionSpec(labels))
    if len(base.ols.labels) < len(labels) or base.n - base.k - base.m < 1:
        return
    r0 = base.result()
    scaled = frame.copy()
    scaled["cvalue"] = a * scaled["cvalue"]
    scaled["x1"] = c * scaled["x1"]
    r1 = fit(scaled, RegressionSpec(labels))
    factor = np.array([a / c] + [a] * (len(labels) - 1))
    np.testing.assert_allclose(r1.beta, factor * r0.beta, rtol=1e-6, atol=1e-9 * a)
    np.testing.assert_allclose(r1.se, factor * r0.se, rtol=1e-6, atol=1e-9 * a)


@pytest.mark.parametrize("seed", range(6))
def test_vcov_positive_semidefinite(seed):
    frame, labels = random_fe_panel(np.random.default_rng(seed))
    r = fit(frame, RegressionSpec(labels, vcov="cluster", cluster="city_code"))
    eig = np.linalg.eigvalsh(r.vcov)
    assert eig.min() >= -1e-12 * max(eig.max(), 1.0)


def test_fit_result_json_round_trip():
    frame, labels = random_fe_panel(np.random.default_rng(2))
    r = fit(frame, RegressionSpec(labels))
    back = FitResult.from_dict(json.loads(json.dumps(r.to_dict())))
    for name in ("beta", "vcov", "se", "t_stat", "p_value", "ci95"):
        assert np.array_equal(getattr(back, name), getattr(r, name))
    assert back.labels == r.labels and back.n_obs == r.n_obs and back.r2_full == r.r2_full
    assert back.to_dict() == r.to_dict()


def test_reported_constant_and_r2():
    frame, labels = random_fe_panel(np.random.default_rng(7))
    r = fit(frame, RegressionSpec(labels))
    assert 0.0 <= r.r2_within <= r.r2_full <= 1.0
    assert math.isfinite(r.reported_constant)
