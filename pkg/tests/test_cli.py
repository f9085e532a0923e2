import json

import pytest

from tempfe.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(d), "--seed", "3", "--n-firms", "80", "--n-years", "4",
                 "--n-cities", "6", "--n-industries", "3"]) == 0
    return d


def inputs(d):
    return ["--firms", str(d / "firms.csv"), "--weather", str(d / "weather.csv")]


def test_synth_writes_files(synth_dir):
    assert {p.name for p in synth_dir.iterdir()} >= {"firms.csv", "weather.csv", "truth.json"}


def test_ingest_then_panel(synth_dir, tmp_path, capsys):
    out = tmp_path / "ingest"
    assert main(["ingest", *inputs(synth_dir), "--out", str(out)]) == 0
    assert "rows_joined" in capsys.readouterr().out
    report = json.loads((out / "join_report.json").read_text())
    assert report["rows_in"] == 320
    assert main(["baseline", "--panel", str(out / "panel.csv"), "--out", str(tmp_path / "b")]) == 0
    from_panel = (tmp_path / "b" / "baseline.txt").read_text()
    assert main(["baseline", *inputs(synth_dir), "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "baseline.txt").read_text() == from_panel


@pytest.mark.parametrize("cmd,files", [
    ("describe", ["descriptives.txt"]),
    ("robustness", ["robustness.txt", "robustness.json"]),
    ("het-ownership", ["het_ownership.txt"]),
    ("coefplot", ["coefplot_baseline.svg", "coefplot_baseline.csv"]),
])
def test_subcommands(synth_dir, tmp_path, cmd, files):
    assert main([cmd, *inputs(synth_dir), "--out", str(tmp_path)]) == 0
    for name in files:
        assert (tmp_path / name).stat().st_size > 0


def test_het_industry(synth_dir, tmp_path):
    assert main(["het-industry", *inputs(synth_dir), "--out", str(tmp_path), "--industry-min-obs", "20"]) == 0
    assert (tmp_path / "coefplot_industry.svg").exists()


def test_coefplot_from_fit(synth_dir, tmp_path):
    assert main(["baseline", *inputs(synth_dir), "--out", str(tmp_path)]) == 0
    out = tmp_path / "plot"
    assert main(["coefplot", "--fit", str(tmp_path / "baseline.json"), "--out", str(out)]) == 0
    assert main(["coefplot", *inputs(synth_dir), "--out", str(tmp_path / "direct")]) == 0
    assert (out / "coefplot_baseline.csv").read_text() == \
        (tmp_path / "direct" / "coefplot_baseline.csv").read_text()


def test_pipeline_with_config(synth_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"firms = {synth_dir / 'firms.csv'}\nweather = {synth_dir / 'weather.csv'}\n"
                   f"out = {tmp_path / 'all'}\nindustry_min_obs = 20\n")
    assert main(["pipeline", "--config", str(cfg)]) == 0
    names = {p.name for p in (tmp_path / "all").iterdir()}
    assert {"baseline.txt", "robustness.txt", "het_ownership.txt", "het_industry.txt",
            "coefplot_baseline.svg", "descriptives.txt"} <= names


def test_missing_input_exit_2(tmp_path, capsys):
    assert main(["baseline", "--firms", str(tmp_path / "nope.csv"), "--weather", str(tmp_path / "x.csv"),
                 "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("coverage = lots\n")
    assert main(["describe", "--config", str(cfg)]) == 2


def test_estimation_failure_exit_3(synth_dir, tmp_path):
    assert main(["het-industry", *inputs(synth_dir), "--out", str(tmp_path),
                 "--industry-min-obs", "100000"]) == 3


def test_unknown_cluster_exit(synth_dir, tmp_path):
    assert main(["baseline", *inputs(synth_dir), "--out", str(tmp_path), "--cluster", "nowhere"]) == 2
