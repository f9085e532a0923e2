import json
import statistics

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from tempfe.coefplot import emit_coefplot
from tempfe.errors import EmptySampleError, ValidationError
from tempfe.estimator import RegressionSpec, fit
from tempfe.paneldata import PanelDataset
from tempfe.study import (StudyConfig, TableArtifact, baseline_coefplot, fmt_num, industry_screen,
                          lagged_panel, load_config, run_baseline, run_descriptives, run_industry_het,
                          run_ownership_het, run_pipeline, run_robustness)
from tempfe.tembin import CONTROL_KEYS, DEFAULT_SPEC

BINS = list(DEFAULT_SPEC.keys)
REGS = BINS + list(CONTROL_KEYS)


def frame_panel(**cols):
    return PanelDataset(pd.DataFrame(cols))


# ---------------------------------------------------------------- descriptives
def test_descriptives_example():
    t = run_descriptives(frame_panel(v=[1.0, 2.0, 3.0]), ["v"])
    s = t.stats[0]
    assert (s["mean"], s["sd"], s["min"], s["max"], s["n"]) == (2.0, 1.0, 1.0, 3.0, 3)


def test_descriptives_constant_column():
    s = run_descriptives(frame_panel(v=[4.0] * 5), ["v"]).stats[0]
    assert s["sd"] == 0.0 and s["min"] == s["max"] == 4.0


def test_descriptives_unknown():
    with pytest.raises(ValidationError):
        run_descriptives(frame_panel(v=[1.0]), ["w"])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=60))
def test_descriptives_match_statistics_module(values):
    s = run_descriptives(frame_panel(v=values), ["v"]).stats[0]
    scale = max(1.0, max(abs(v) for v in values))
    assert s["mean"] == pytest.approx(statistics.fmean(values), abs=1e-12 * scale)
    assert s["sd"] == pytest.approx(statistics.stdev(values), rel=1e-9, abs=1e-9 * scale)
    assert s["min"] == min(values) and s["max"] == max(values)


def test_descriptives_skip_missing():
    s = run_descriptives(frame_panel(v=[1.0, np.nan, 3.0]), ["v"]).stats[0]
    assert s["n"] == 2 and s["mean"] == 2.0


def test_default_descriptives_rows(small_panel):
    t = run_descriptives(small_panel)
    assert [r[0] for r in t.rows] == ["cvalue", "wind", "sea", "visb", "25~30°C", ">30°C"]


@pytest.mark.parametrize("x,text", [(0.0, "0"), (-0.000506, "-0.000506"), (1234567.0, "1.23457e+06"),
                                    (0.5, "0.5"), (float("nan"), "")])
def test_fmt_num(x, text):
    assert fmt_num(x) == text


# ---------------------------------------------------------------- baseline
def test_baseline_structure(small_panel):
    t = run_baseline(small_panel)
    f1, f2, f3, f4 = (t.fit(i) for i in range(4))
    assert f1.beta.tobytes() == f3.beta.tobytes()
    assert f2.beta.tobytes() == f4.beta.tobytes()
    assert "10_15" not in f2.labels
    assert f1.labels == tuple(BINS) and f2.labels == tuple(REGS)
    assert f3.vcov_kind == "cluster" and f3.n_clusters == small_panel.frame["city_code"].nunique()
    text = t.to_text()
    assert "10~15°C" not in text and ">30°C" in text and "Constant" in text


def test_baseline_matches_direct_fit(small_panel):
    t = run_baseline(small_panel)
    direct = fit(small_panel.frame, RegressionSpec(REGS, vcov="cluster", cluster="city_code"))
    np.testing.assert_array_equal(t.fit(3).beta, direct.beta)
    np.testing.assert_allclose(t.fit(3).se, direct.se, rtol=1e-12)


def test_table_json_round_trip(small_panel):
    t = run_baseline(small_panel)
    back = TableArtifact.from_json(t.to_json())
    assert back.to_text() == t.to_text()
    assert back.to_json() == t.to_json()


def test_baseline_parallel_identical(small_panel):
    a = run_baseline(small_panel, StudyConfig(n_jobs=1))
    b = run_baseline(small_panel, StudyConfig(n_jobs=4))
    assert a.to_json() == b.to_json()


# ---------------------------------------------------------------- robustness
def test_lag_uses_later_year_only():
    p = frame_panel(firm_id=["A", "A"], year=[2005, 2006], city_code=["c", "c"],
                    **{k: [1.0, 2.0] for k in REGS})
    trimmed, labels = lagged_panel(p, 1)
    assert trimmed.frame["year"].tolist() == [2006]
    assert labels[0] == "L" + BINS[0]
    assert trimmed.frame["L" + BINS[0]].tolist() == [1.0]


def test_robustness_recovers_lagged_effect(default_panel):
    frame = default_panel.frame.copy()
    prev = frame[["firm_id", "year", "gt30"]].assign(year=frame["year"] + 1)
    merged = frame[["firm_id", "year"]].merge(prev, on=["firm_id", "year"], how="left")
    rng = np.random.default_rng(0)
    firm_fe = frame["firm_id"].map(dict(zip(frame["firm_id"].unique(), rng.normal(0, 0.05, 10_000))))
    frame["cvalue"] = (0.5 - 0.002 * merged["gt30"].fillna(0.0).to_numpy() + firm_fe
                       + 0.01 * (frame["year"] - 2005) + rng.normal(0, 1e-4, len(frame)))
    t = run_robustness(PanelDataset(frame))
    f = t.fit(1)
    assert f.coef("Lgt30") == pytest.approx(-0.002, abs=5 * f.se[f.index("Lgt30")] + 1e-6)
    assert all(lab.startswith("L") for lab in f.labels)
    assert f.n_obs <= len(frame) - frame["firm_id"].nunique()


def test_robustness_empty():
    p = frame_panel(firm_id=["A", "B"], year=[2005, 2005], city_code=["c", "c"], cvalue=[0.1, 0.2],
                    **{k: [1.0, 2.0] for k in REGS})
    with pytest.warns(RuntimeWarning), pytest.raises(EmptySampleError):
        run_robustness(p)


def test_robustness_rejects_lag_zero(small_panel):
    with pytest.raises(ValidationError):
        run_robustness(small_panel, StudyConfig(lag=0))


# ---------------------------------------------------------------- ownership
def test_ownership_private_only(small_panel):
    frame = small_panel.frame.assign(ownership="Private")
    t = run_ownership_het(PanelDataset(frame))
    assert t.fits[0] is not None
    assert sum(f is None for f in t.fits) == 4
    assert t.rows[-1][1:] == ["estimated"] + ["insufficient sample"] * 4


def test_ownership_refit(default_panel):
    t = run_ownership_het(default_panel)
    total = sum(f["n_obs"] for f in t.fits if f is not None)
    assert total <= len(default_panel)
    frame = default_panel.frame
    for col, name in enumerate(["Private", "StateOwned", "Collective", "Mixed", "Foreign"]):
        if t.fits[col] is None:
            continue
        direct = fit(frame[frame["ownership"] == name], RegressionSpec(REGS))
        np.testing.assert_array_equal(t.fit(col).beta, direct.beta)


# ---------------------------------------------------------------- industry
def test_industry_screen_threshold():
    p = frame_panel(industry_code=["A"] * 6 + ["B"] * 3)
    assert industry_screen(p, 5) == [("A", 6)]


def test_industry_screen_order():
    p = frame_panel(industry_code=["A"] * 4 + ["B"] * 7 + ["C"] * 4 + ["D"] * 2)
    assert industry_screen(p, 3) == [("B", 7), ("C", 4), ("A", 4)]


def test_industry_empty(small_panel):
    with pytest.raises(EmptySampleError):
        run_industry_het(small_panel, StudyConfig(industry_min_obs=10**6))


def test_industry_refit(default_panel):
    config = StudyConfig(industry_min_obs=100)
    table, plot = run_industry_het(default_panel, config)
    kept = industry_screen(default_panel, 100)
    assert table.header[1:] == [code for code, _ in kept]
    frame = default_panel.frame
    code = kept[0][0]
    direct = fit(frame[frame["industry_code"] == code],
                 RegressionSpec(["gt30"] + list(CONTROL_KEYS), fe=("year", "city_code")))
    assert table.fit(0).coef("gt30") == direct.coef("gt30")
    assert plot.labels[0] == code and plot.estimates[0] == direct.coef("gt30")


def test_industry_all_bins(default_panel):
    table, _ = run_industry_het(default_panel, StudyConfig(industry_min_obs=100, all_bins=True))
    assert set(BINS) <= set(table.fit(0).labels)


# ---------------------------------------------------------------- coefplot
def test_coefplot_order_and_ci(small_panel):
    t = run_baseline(small_panel)
    plot = baseline_coefplot(t)
    assert plot.labels == tuple(BINS)
    assert plot.display[0] == "≤-10°C" and plot.display[-1] == ">30°C"
    for b, lo, hi in zip(plot.estimates, plot.lo, plot.hi):
        assert b - lo == pytest.approx(hi - b, rel=1e-12)
    f = t.fit(1)
    assert plot.estimates == tuple(float(f.coef(k)) for k in BINS)
    svg = plot.to_svg()
    assert svg.count('class="coef"') == 9 and 'class="zero-line"' in svg
    assert baseline_coefplot(t).to_svg() == svg


def test_coefplot_missing_label(small_panel):
    f = run_baseline(small_panel).fit(0)
    with pytest.raises(ValidationError):
        emit_coefplot(f, ["wind"])


# ---------------------------------------------------------------- config
def test_load_config(tmp_path):
    path = tmp_path / "study.cfg"
    path.write_text("# comment\ncoverage = 200\ncluster = city\nall_bins = yes\nlag=2\n")
    c = load_config(path)
    assert (c.coverage, c.cluster, c.all_bins, c.lag) == (200, "city_code", True, 2)


@pytest.mark.parametrize("text", ["coverage = many\n", "no_equals_sign\n", "colour = red\n", "lag = -1\n"])
def test_bad_config(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ValidationError):
        load_config(path)


def test_pipeline_artifacts(small_panel):
    out = run_pipeline(StudyConfig(industry_min_obs=30), small_panel)
    for name in ("descriptives.txt", "baseline.json", "coefplot_baseline.svg", "robustness.txt",
                 "het_ownership.txt", "het_industry.txt", "join_report.json"):
        assert name in out
    json.loads(out["baseline.json"])
