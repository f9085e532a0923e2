"""Command line entry point: ``tempfe <subcommand> [options]``.

Exit status is 0 on success, 2 on invalid input or configuration and 3
when an estimation fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import study
from .errors import EstimationError, ValidationError
from .estimator import FitResult
from .synth import SynthScenario, generate_panel
from .tembin import build_features

EXIT_OK, EXIT_VALIDATION, EXIT_ESTIMATION = 0, 2, 3

log = logging.getLogger("tempfe")


def _common(p):
    p.add_argument("--firms", help="firm-year CSV")
    p.add_argument("--weather", help="daily weather CSV")
    p.add_argument("--panel", help="joined panel CSV written by 'ingest' (instead of --firms/--weather)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--coverage", type=int, help="minimum valid temperature days per firm-year")
    p.add_argument("--cluster", help="cluster variable (city = city_code)")
    p.add_argument("--lag", type=int, help="lag depth for the robustness analysis")
    p.add_argument("--industry-min-obs", type=int, dest="industry_min_obs")
    p.add_argument("--all-bins", action="store_const", const=True, dest="all_bins",
                   help="industry analysis on all nine bins instead of the hottest")
    p.add_argument("--n-jobs", type=int, dest="n_jobs")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="tempfe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("ingest", "parse and join inputs; write panel.csv, features.csv and the join report"),
        ("describe", "descriptive statistics table"),
        ("baseline", "four-column benchmark regression table"),
        ("robustness", "lagged-regressor version of the benchmark table"),
        ("het-ownership", "benchmark spec (2) by ownership type"),
        ("het-industry", "hottest-bin effect by industry with coefficient plot"),
        ("coefplot", "coefficient plot of the benchmark spec (2) bins"),
        ("pipeline", "run every analysis and write all artifacts"),
    ]:
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "coefplot":
            p.add_argument("--fit", help="FitResult JSON (or a table JSON, column 2 is used)")
    p = sub.add_parser("synth", help="write a synthetic panel with planted coefficients")
    _common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-firms", type=int, default=200)
    p.add_argument("--n-years", type=int, default=10)
    p.add_argument("--n-cities", type=int, default=20)
    p.add_argument("--n-industries", type=int, default=6)
    p.add_argument("--start-year", type=int, default=2005)
    p.add_argument("--noise-sd", type=float)
    return parser


def _config(args):
    config = study.load_config(args.config) if args.config else study.StudyConfig()
    keys = ("firms", "weather", "panel", "out", "coverage", "cluster", "lag", "industry_min_obs",
            "all_bins", "n_jobs")
    config.update(**{k: getattr(args, k, None) for k in keys})
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _print(text):
    sys.stdout.write(text)


def _run(args):
    config = _config(args)
    out = config.out
    cmd = args.command

    if cmd == "synth":
        kw = dict(n_firms=args.n_firms, n_years=args.n_years, n_cities=args.n_cities,
                  n_industries=args.n_industries, start_year=args.start_year, seed=config.seed)
        if args.noise_sd is not None:
            kw["noise_sd"] = args.noise_sd
        paths = generate_panel(SynthScenario(**kw)).write(out)
        _print("".join(f"{k}: {v}\n" for k, v in paths.items()))
        return

    if cmd == "coefplot" and args.fit:
        with open(args.fit, encoding="utf-8") as fh:
            d = json.load(fh)
        fit = FitResult.from_dict(d["fits"][1] if "fits" in d else d)
        plot = study.baseline_coefplot(fit, config.bin_spec)
        os.makedirs(out, exist_ok=True)
        study.write_plot(out, "coefplot_baseline", plot)
        _print(plot.to_csv())
        return

    panel, errors = study.load_panel(config)
    os.makedirs(out, exist_ok=True)

    if cmd == "ingest":
        study.write_text(os.path.join(out, "panel.csv"), panel.to_csv())
        study.write_text(os.path.join(out, "features.csv"),
                         build_features(panel, spec=panel.spec).to_csv())
        study.write_text(os.path.join(out, "join_report.txt"), panel.join_report.to_text())
        study.write_text(os.path.join(out, "join_report.json"), panel.join_report.to_json())
        study.write_text(os.path.join(out, "parse_errors.txt"), "".join(f"{e}\n" for e in errors))
        _print(panel.join_report.to_text())
        if errors:
            _print(f"parse errors: {len(errors)} (see parse_errors.txt)\n")
        return
    if cmd == "describe":
        table = study.run_descriptives(panel)
        study.write_table(out, "descriptives", table)
    elif cmd == "baseline":
        table = study.run_baseline(panel, config)
        study.write_table(out, "baseline", table)
    elif cmd == "robustness":
        table = study.run_robustness(panel, config)
        study.write_table(out, "robustness", table)
    elif cmd == "het-ownership":
        table = study.run_ownership_het(panel, config)
        study.write_table(out, "het_ownership", table)
    elif cmd == "het-industry":
        table, plot = study.run_industry_het(panel, config)
        study.write_table(out, "het_industry", table)
        study.write_plot(out, "coefplot_industry", plot)
    elif cmd == "coefplot":
        table = study.run_baseline(panel, config)
        plot = study.baseline_coefplot(table, panel.spec)
        study.write_plot(out, "coefplot_baseline", plot)
        _print(plot.to_csv())
        return
    elif cmd == "pipeline":
        artifacts = study.run_pipeline(config, panel)
        study.write_artifacts(out, artifacts)
        _print("".join(f"{name}\n" for name in sorted(artifacts)))
        return
    _print(table.to_text())


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
