"""Reproduction of the study's tables and figures on a joined panel.

Each ``run_*`` function returns a :class:`TableArtifact` (plus a
:class:`~tempfe.coefplot.CoefPlotArtifact` where a figure belongs to the
analysis).  Artifacts render to aligned UTF-8 text and to JSON, and both
renderings are byte-stable for fixed inputs regardless of ``n_jobs``.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .coefplot import CoefPlotArtifact, emit_coefplot
from .errors import EmptySampleError, EstimationError, ValidationError
from .estimator import CLASSICAL, CLUSTER, FIT_TOL, Estimate, FitResult, RegressionSpec, stars
from .hdfe import DEFAULT_MAX_ITERS
from .paneldata import (DEFAULT_MIN_COVERAGE, OWNERSHIP_ORDER, Ownership, PanelDataset,
                        join_firm_weather, parse_firm_csv, parse_weather_csv)
from .tembin import CONTROL_KEYS, BinSpec, build_features, build_lagged, lag_prefix

log = logging.getLogger(__name__)

DEFAULT_INDUSTRY_MIN_OBS = 10_000
DEFAULT_DESCRIPTIVES = ("cvalue", "wind", "sea", "visb", "25_30", "gt30")

OWNERSHIP_HEADERS = {
    Ownership.PRIVATE: "Private",
    Ownership.STATE_OWNED: "State-owned",
    Ownership.COLLECTIVE: "Collective",
    Ownership.MIXED: "Mixed",
    Ownership.FOREIGN: "Foreign-owned",
}


@dataclass
class StudyConfig:
    firms: Optional[str] = None
    weather: Optional[str] = None
    panel: Optional[str] = None
    out: str = "out"
    coverage: int = DEFAULT_MIN_COVERAGE
    lag: int = 1
    cluster: str = "city_code"
    het_dimension: str = "ownership"
    industry_min_obs: int = DEFAULT_INDUSTRY_MIN_OBS
    all_bins: bool = False
    bin_edges: Optional[tuple] = None
    seed: int = 0
    n_jobs: int = 1
    tolerance: float = FIT_TOL
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        if self.cluster == "city":
            self.cluster = "city_code"
        if int(self.industry_min_obs) < 1:
            raise ValidationError("industry_min_obs must be >= 1")
        if int(self.lag) < 0:
            raise ValidationError("lag must be >= 0")
        if self.het_dimension not in ("ownership", "industry"):
            raise ValidationError(f"unknown heterogeneity dimension {self.het_dimension!r}")

    @property
    def bin_spec(self):
        return BinSpec(tuple(self.bin_edges)) if self.bin_edges else BinSpec()

    def update(self, **values):
        """Set fields from strings or typed values, ignoring ``None``."""
        types = {f.name: f.type for f in fields(self)}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if raw is None:
                continue
            if key not in types:
                raise ValidationError(f"unknown configuration key {key!r}")
            setattr(self, key, _coerce(key, raw, getattr(self, key)))
        self.__post_init__()
        return self


def _coerce(key, raw, current):
    if not isinstance(raw, str):
        return raw
    try:
        if key == "bin_edges":
            return tuple(float(v) for v in raw.split(","))
        if key == "all_bins":
            return raw.strip().lower() in ("1", "true", "yes", "y")
        if key in ("coverage", "lag", "industry_min_obs", "seed", "n_jobs", "max_iters"):
            return int(raw)
        if key == "tolerance":
            return float(raw)
    except ValueError:
        raise ValidationError(f"bad value for {key}: {raw!r}") from None
    return raw


def load_config(path):
    """Read a ``key = value`` text file (``#`` starts a comment)."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
    return StudyConfig().update(**values)


def load_panel(config):
    """Panel from an ingested CSV, or by parsing and joining raw inputs."""
    spec = config.bin_spec
    if config.panel:
        if not os.path.exists(config.panel):
            raise ValidationError(f"panel file not found: {config.panel}")
        return PanelDataset.from_csv(config.panel, spec), []
    if not config.firms or not config.weather:
        raise ValidationError("need --firms and --weather (or --panel)")
    for path in (config.firms, config.weather):
        if not os.path.exists(path):
            raise ValidationError(f"input file not found: {path}")
    weather = parse_weather_csv(config.weather)
    firms = parse_firm_csv(config.firms)
    errors = [f"{config.weather}: {e}" for e in weather.errors] + [f"{config.firms}: {e}" for e in firms.errors]
    for e in errors[:20]:
        log.warning("parse error %s", e)
    panel = join_firm_weather(firms, weather, config.coverage, spec)
    return panel, errors


# ----------------------------------------------------------------------------
# formatting


def fmt_num(x):
    """Six significant digits; exponents below -4 switch to scientific."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if x == 0:
        return "0"
    return format(float(x), ".6g")


def fmt_int(n):
    return f"{int(n):,}"


@dataclass
class TableArtifact:
    kind: str
    title: str
    header: list
    rows: list
    footnote: str = ""
    fits: list = field(default_factory=list)
    stats: list = field(default_factory=list)

    def to_text(self):
        table = [self.header] + self.rows
        ncol = max(len(r) for r in table)
        table = [list(r) + [""] * (ncol - len(r)) for r in table]
        widths = [max(len(r[j]) for r in table) for j in range(ncol)]

        def line(r):
            cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
            return "  ".join(cells).rstrip()

        rule = "-" * (sum(widths) + 2 * (ncol - 1))
        out = [self.title, rule, line(table[0]), rule]
        out += [line(r) for r in table[1:]]
        out.append(rule)
        if self.footnote:
            out.append(self.footnote)
        return "\n".join(out) + "\n"

    def to_dict(self):
        return {"kind": self.kind, "title": self.title, "header": list(self.header),
                "rows": [list(r) for r in self.rows], "footnote": self.footnote,
                "fits": list(self.fits), "stats": list(self.stats)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def fit(self, column):
        d = self.fits[column]
        return None if d is None else FitResult.from_dict(d)


# ----------------------------------------------------------------------------
# descriptives


def run_descriptives(panel, variables=DEFAULT_DESCRIPTIVES):
    frame = panel.frame
    unknown = [v for v in variables if v not in frame.columns]
    if unknown:
        raise ValidationError(f"unknown variable(s): {', '.join(unknown)}")
    stats = []
    rows = []
    spec = panel.spec
    for v in variables:
        col = frame[v].to_numpy(dtype=float)
        col = col[~np.isnan(col)]
        n = col.size
        mean = float(col.mean()) if n else float("nan")
        sd = float(col.std(ddof=1)) if n > 1 else float("nan")
        lo = float(col.min()) if n else float("nan")
        hi = float(col.max()) if n else float("nan")
        stats.append({"variable": v, "mean": mean, "sd": sd, "min": lo, "max": hi, "n": int(n)})
        rows.append([spec.display_label(v), fmt_num(mean), fmt_num(sd), fmt_num(lo), fmt_num(hi), fmt_int(n)])
    return TableArtifact("Descriptives", "Descriptive Statistics",
                         ["Variable", "Mean", "SD", "Min", "Max", "N"], rows, "", [], stats)


# ----------------------------------------------------------------------------
# regression tables


def _regression_rows(fits, order, spec):
    rows = []
    for label in order:
        if not any(f is not None and (label in f.labels or label in f.dropped_collinear) for f in fits):
            continue
        coef, se = [spec.display_label(label)], [""]
        for f in fits:
            if f is None or (label not in f.labels and label not in f.dropped_collinear):
                coef.append("")
                se.append("")
            elif label in f.dropped_collinear:
                coef.append("omitted")
                se.append("")
            else:
                j = f.index(label)
                coef.append(fmt_num(f.beta[j]) + stars(float(f.p_value[j])))
                se.append(f"({fmt_num(f.se[j])})")
        rows.extend([coef, se])
    rows.append(["Constant"] + ["" if f is None else fmt_num(f.reported_constant) for f in fits])
    return rows


def _footer(fits, flags):
    rows = [[name] + vals for name, vals in flags]
    rows.append(["Observations"] + ["" if f is None else fmt_int(f.n_obs) for f in fits])
    rows.append(["R-squared"] + ["" if f is None else f"{f.r2_full:.3f}" for f in fits])
    rows.append(["Within R-squared"] + ["" if f is None else f"{f.r2_within:.3f}" for f in fits])
    return rows


FOOTNOTE = ("Standard errors in parentheses. *** p<0.01, ** p<0.05, * p<0.1 (normal approximation). "
            "Constant is the point estimate ybar - xbar'b; its standard error is not reported.")


def _map(fn, items, n_jobs):
    if n_jobs and n_jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _annotate(exc, where):
    return type(exc)(f"{where}: {exc}")


def _four_spec(frame, bins, controls, config, spec_fe=("firm_id", "year")):
    """(1) bins, (2) bins+controls, (3)=(1) clustered, (4)=(2) clustered."""
    designs = [list(bins), list(bins) + list(controls)]

    def estimate(i):
        try:
            return Estimate(frame, RegressionSpec(designs[i], fe=spec_fe, tolerance=config.tolerance,
                                                  max_iters=config.max_iters))
        except EstimationError as exc:
            raise _annotate(exc, f"spec ({i + 1})") from exc

    est = _map(estimate, [0, 1], config.n_jobs)
    fits = []
    for col, (i, kind) in enumerate([(0, CLASSICAL), (1, CLASSICAL), (0, CLUSTER), (1, CLUSTER)]):
        try:
            fits.append(est[i].result(kind, config.cluster))
        except EstimationError as exc:
            raise _annotate(exc, f"spec ({col + 1})") from exc
    for col, f in enumerate(fits, 1):
        log.info("spec (%d): n=%d k=%d m=%d iterations=%d singletons=%d", col, f.n_obs, f.k_regressors,
                 f.m_absorbed, f.iterations, f.singletons_dropped)
    return fits


def _four_spec_table(kind, title, fits, order, spec, extra_note=""):
    header = ["VARIABLES", "cvalue (1)", "cvalue (2)", "cvalue (3)", "cvalue (4)"]
    rows = _regression_rows(fits, order, spec)
    rows += _footer(fits, [("Controls", ["N", "Y", "N", "Y"]), ("Year FE", ["Y"] * 4),
                           ("Firm FE", ["Y"] * 4), ("City-clustered SE", ["N", "N", "Y", "Y"])])
    note = FOOTNOTE + (" " + extra_note if extra_note else "")
    return TableArtifact(kind, title, header, rows, note, [f.to_dict() for f in fits])


def run_baseline(panel, config=None):
    config = config or StudyConfig()
    spec = panel.spec
    fits = _four_spec(panel.frame, spec.keys, CONTROL_KEYS, config)
    order = list(spec.keys) + list(CONTROL_KEYS)
    return _four_spec_table("Baseline", "Benchmark Regression Results", fits, order, spec)


def lagged_panel(panel, lag):
    """Trimmed panel carrying lag-``lag`` copies of all bin and control columns."""
    feats = build_features(panel, include_controls=True, spec=panel.spec)
    lagged, trimmed = build_lagged(panel, feats, lag)
    cols = {lab: lagged.values[:, j] for j, lab in enumerate(lagged.labels)}
    return trimmed.with_columns(**cols), lagged.labels


def run_robustness(panel, config=None):
    config = config or StudyConfig()
    lag = int(config.lag)
    if lag < 1:
        raise ValidationError("robustness analysis needs lag >= 1")
    spec = panel.spec
    trimmed, labels = lagged_panel(panel, lag)
    if len(trimmed) == 0:
        raise EmptySampleError(f"no firm-years have an observed year t-{lag}")
    prefix = lag_prefix(lag)
    bins = [prefix + k for k in spec.keys]
    controls = [prefix + k for k in CONTROL_KEYS]
    fits = _four_spec(trimmed.frame, bins, controls, config)
    note = f"All bin and control regressors, the hottest bin included, are lagged {lag} year(s)."
    return _four_spec_table("Robustness", "Robustness Test", fits, bins + controls, spec, note)


def _het_fit(frame, regs, fe, config):
    try:
        return Estimate(frame, RegressionSpec(regs, fe=fe, tolerance=config.tolerance,
                                              max_iters=config.max_iters)).result(CLASSICAL)
    except EstimationError as exc:
        log.warning("insufficient sample: %s", exc)
        return None


def run_ownership_het(panel, config=None):
    config = config or StudyConfig()
    spec = panel.spec
    regs = list(spec.keys) + list(CONTROL_KEYS)
    frame = panel.frame
    subs = [frame[frame["ownership"] == o.value] for o in OWNERSHIP_ORDER]
    fits = _map(lambda sub: _het_fit(sub, regs, ("firm_id", "year"), config), subs, config.n_jobs)
    header = ["VARIABLES"] + [OWNERSHIP_HEADERS[o] for o in OWNERSHIP_ORDER]
    rows = _regression_rows(fits, regs, spec)
    rows += _footer(fits, [("Controls", ["Y"] * 5), ("Year FE", ["Y"] * 5), ("Firm FE", ["Y"] * 5)])
    rows.append(["Status"] + ["estimated" if f else "insufficient sample" for f in fits])
    return TableArtifact("OwnershipHet", "Ownership Heterogeneity Analysis", header, rows, FOOTNOTE,
                         [None if f is None else f.to_dict() for f in fits])


def industry_screen(panel, min_obs):
    """Industries with at least ``min_obs`` rows, largest first (ties: code descending)."""
    counts = panel.frame["industry_code"].value_counts()
    kept = [(code, int(n)) for code, n in counts.items() if n >= min_obs]
    kept.sort(key=lambda t: t[0], reverse=True)
    kept.sort(key=lambda t: t[1], reverse=True)
    return kept


def run_industry_het(panel, config=None):
    config = config or StudyConfig()
    spec = panel.spec
    hot = spec.keys[-1]
    kept = industry_screen(panel, int(config.industry_min_obs))
    if not kept:
        raise EmptySampleError(f"no industry has >= {config.industry_min_obs} observations")
    regs = (list(spec.keys) if config.all_bins else [hot]) + list(CONTROL_KEYS)
    frame = panel.frame
    subs = [frame[frame["industry_code"] == code] for code, _ in kept]
    fits = _map(lambda sub: _het_fit(sub, regs, ("year", "city_code"), config), subs, config.n_jobs)

    header = ["VARIABLES"] + [code for code, _ in kept]
    rows = _regression_rows(fits, regs, spec)
    rows += _footer(fits, [("Controls", ["Y"] * len(kept)), ("Year FE", ["Y"] * len(kept)),
                           ("City FE", ["Y"] * len(kept))])
    rows.append(["Industry rows"] + [fmt_int(n) for _, n in kept])
    rows.append(["Status"] + ["estimated" if f else "insufficient sample" for f in fits])
    note = (FOOTNOTE + f" Industries with fewer than {fmt_int(config.industry_min_obs)} observations excluded;"
            " columns sorted by observation count.")
    table = TableArtifact("IndustryHet", "Industry Heterogeneity Analysis", header, rows, note,
                          [None if f is None else f.to_dict() for f in fits])

    est = [(code, f) for (code, _), f in zip(kept, fits) if f is not None and hot in f.labels]
    plot = CoefPlotArtifact.from_series(
        [code for code, _ in est], [f.coef(hot) for _, f in est], [f.se[f.index(hot)] for _, f in est],
        title=f"Industry heterogeneity: {spec.display_label(hot)} days")
    return table, plot


def baseline_coefplot(table_or_fit, spec=None):
    """Bin coefficients of baseline spec (2), coldest (temp9) to hottest (temp1)."""
    spec = spec or BinSpec()
    fit = table_or_fit.fit(1) if isinstance(table_or_fit, TableArtifact) else table_or_fit
    order = [k for k in spec.keys if k in fit.labels]
    return emit_coefplot(fit, order, title="Benchmark regression coefficients",
                         display=[spec.display_label(k) for k in order])


# ----------------------------------------------------------------------------
# artifact output


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_table(out_dir, name, table):
    write_text(os.path.join(out_dir, f"{name}.txt"), table.to_text())
    write_text(os.path.join(out_dir, f"{name}.json"), table.to_json())


def write_plot(out_dir, name, plot):
    write_text(os.path.join(out_dir, f"{name}.svg"), plot.to_svg())
    write_text(os.path.join(out_dir, f"{name}.csv"), plot.to_csv())


def run_pipeline(config, panel=None):
    """Every analysis on one panel; returns ``{artifact name: text}``."""
    if panel is None:
        panel, _ = load_panel(config)
    out = {
        "join_report.txt": panel.join_report.to_text(),
        "join_report.json": panel.join_report.to_json(),
    }

    def add_table(name, t):
        out[f"{name}.txt"] = t.to_text()
        out[f"{name}.json"] = t.to_json()

    def add_plot(name, p):
        out[f"{name}.svg"] = p.to_svg()
        out[f"{name}.csv"] = p.to_csv()

    add_table("descriptives", run_descriptives(panel))
    base = run_baseline(panel, config)
    add_table("baseline", base)
    add_plot("coefplot_baseline", baseline_coefplot(base, panel.spec))
    add_table("robustness", run_robustness(panel, config))
    add_table("het_ownership", run_ownership_het(panel, config))
    try:
        table, plot = run_industry_het(panel, config)
        add_table("het_industry", table)
        add_plot("coefplot_industry", plot)
    except EmptySampleError as exc:
        log.warning("industry heterogeneity skipped: %s", exc)
        out["het_industry.txt"] = f"Industry Heterogeneity Analysis\nnot estimated: {exc}\n"
    return out


def write_artifacts(out_dir, artifacts):
    os.makedirs(out_dir, exist_ok=True)
    for name in sorted(artifacts):
        write_text(os.path.join(out_dir, name), artifacts[name])
