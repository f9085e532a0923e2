"""Weather and firm-year ingestion, unit handling and the firm-weather join.

Both inputs are header-prefixed CSV files where an empty field means
missing.  Weather columns: ``county_code,date,temp_c,wind,sea_hpa,visb``.
Firm columns: ``firm_id,year,city_code,ownership,industry_code,cvalue``.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from .errors import SchemaError, ValidationError
from .tembin import CONTROL_KEYS, DEFAULT_SPEC, N_INTERVALS, BinCounts, count_bins_grouped

TEMP_RANGE = (-90.0, 60.0)
SEA_RANGE = (850.0, 1100.0)
DEFAULT_MIN_COVERAGE = 300

KNOT_TO_MS = 0.514444
MILE_TO_KM = 1.609344
# GSOD "missing" sentinels
_GSOD_MISSING = {"temp_f": 9999.9, "wind_knots": 999.9, "visb_miles": 999.9, "sea_hpa": 9999.9}


class Ownership(str, enum.Enum):
    PRIVATE = "Private"
    STATE_OWNED = "StateOwned"
    COLLECTIVE = "Collective"
    MIXED = "Mixed"
    FOREIGN = "Foreign"

    @classmethod
    def parse(cls, text):
        key = "".join(ch for ch in str(text).lower() if ch.isalnum())
        try:
            return _OWNERSHIP_ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown ownership {text!r}") from None


_OWNERSHIP_ALIASES = {
    "private": Ownership.PRIVATE,
    "stateowned": Ownership.STATE_OWNED,
    "soe": Ownership.STATE_OWNED,
    "state": Ownership.STATE_OWNED,
    "collective": Ownership.COLLECTIVE,
    "mixed": Ownership.MIXED,
    "mix": Ownership.MIXED,
    "foreign": Ownership.FOREIGN,
    "foreignowned": Ownership.FOREIGN,
}

OWNERSHIP_ORDER = tuple(Ownership)


@dataclass(frozen=True)
class DailyWeatherRecord:
    county_code: str
    date: dt.date
    mean_temp_c: Optional[float] = None
    wind: Optional[float] = None
    sea_pressure: Optional[float] = None
    visibility: Optional[float] = None


@dataclass(frozen=True)
class FirmYearRecord:
    firm_id: str
    year: int
    city_code: str
    ownership: Ownership
    industry_code: str
    cvalue: Optional[float]


@dataclass(frozen=True)
class LineError:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class WeatherSchema:
    """Column mapping plus unit metadata for a weather CSV.

    ``columns`` maps canonical names to header names in the file.  Unit
    fields describe the file; values are normalised to degrees Celsius,
    m/s and km on read.
    """

    columns: dict = field(default_factory=lambda: {
        "county_code": "county_code", "date": "date", "temp_c": "temp_c",
        "wind": "wind", "sea_hpa": "sea_hpa", "visb": "visb",
    })
    mandatory: tuple = ("county_code", "date", "temp_c")
    temp_unit: str = "C"      # "C" or "F"
    wind_unit: str = "m/s"    # "m/s" or "knots"
    visb_unit: str = "km"     # "km" or "miles"


FIRM_COLUMNS = ("firm_id", "year", "city_code", "ownership", "industry_code", "cvalue")
WEATHER_COLUMNS = ("county_code", "date", "temp_c", "wind", "sea_hpa", "visb")


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def _read_rows(source, canonical, mandatory, mapping=None):
    """Read a CSV into per-column string lists, recording bad lines."""
    mapping = mapping or {c: c for c in canonical}
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty input: no header row") from None
        header = [h.strip() for h in header]
        pos = {}
        for name in canonical:
            col = mapping.get(name, name)
            if col in header:
                pos[name] = header.index(col)
            elif name in mandatory:
                raise SchemaError(f"missing mandatory column {col!r} in header")
        width = len(header)
        cols = {name: [] for name in pos}
        lines = []
        errors = []
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                errors.append(LineError(reader.line_num, f"expected {width} fields, got {len(row)}"))
                continue
            for name, p in pos.items():
                cols[name].append(row[p].strip())
            lines.append(reader.line_num)
    finally:
        if owned:
            fh.close()
    return cols, np.asarray(lines, dtype=np.int64), errors


def _numeric(values, name, lines, errors, bad):
    s = pd.Series(values, dtype=object)
    empty = s.eq("").to_numpy()
    num = pd.to_numeric(s.where(~empty, None), errors="coerce").to_numpy(dtype=float)
    invalid = np.isnan(num) & ~empty
    for i in np.flatnonzero(invalid & ~bad):
        errors.append(LineError(int(lines[i]), f"{name}: not a number: {values[i]!r}"))
    bad |= invalid
    return num, empty


def _range_check(num, lo, hi, name, lines, errors, bad):
    out = ~np.isnan(num) & ((num < lo) | (num > hi))
    for i in np.flatnonzero(out & ~bad):
        errors.append(LineError(int(lines[i]), f"{name}={num[i]} outside [{lo}, {hi}]"))
    bad |= out


@dataclass
class WeatherData:
    """Parsed daily weather: a tidy frame plus the per-line error log."""

    frame: pd.DataFrame
    errors: list = field(default_factory=list)
    missing: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frame)

    def records(self):
        f = self.frame
        for row in f.itertuples(index=False):
            yield DailyWeatherRecord(
                row.county_code, row.date.date(),
                *(None if pd.isna(v) else float(v) for v in (row.temp_c, row.wind, row.sea_hpa, row.visb)),
            )


@dataclass
class FirmData:
    frame: pd.DataFrame
    errors: list = field(default_factory=list)

    def __len__(self):
        return len(self.frame)

    def records(self):
        for row in self.frame.itertuples(index=False):
            yield FirmYearRecord(row.firm_id, int(row.year), row.city_code, Ownership(row.ownership),
                                 row.industry_code, None if pd.isna(row.cvalue) else float(row.cvalue))


def parse_weather_csv(source, schema=None):
    """Parse a daily weather CSV.

    Malformed lines are collected in ``errors`` with their line numbers
    (the header is line 1); well-formed lines each yield one record.
    Missing header columns listed in ``schema.mandatory`` raise
    :class:`SchemaError`; IO failures propagate unchanged.
    """
    schema = schema or WeatherSchema()
    cols, lines, errors = _read_rows(source, WEATHER_COLUMNS, schema.mandatory, schema.columns)
    n = len(lines)
    bad = np.zeros(n, dtype=bool)

    county = np.asarray(cols["county_code"], dtype=object)
    no_county = county == ""
    for i in np.flatnonzero(no_county):
        errors.append(LineError(int(lines[i]), "county_code is empty"))
    bad |= no_county

    dates = pd.to_datetime(pd.Series(cols["date"], dtype=object), format="%Y-%m-%d", errors="coerce")
    no_date = dates.isna().to_numpy()
    for i in np.flatnonzero(no_date & ~bad):
        errors.append(LineError(int(lines[i]), f"invalid date {cols['date'][i]!r}"))
    bad |= no_date

    values = {}
    missing = {}
    for name in ("temp_c", "wind", "sea_hpa", "visb"):
        if name in cols:
            num, empty = _numeric(cols[name], name, lines, errors, bad)
        else:
            num, empty = np.full(n, np.nan), np.ones(n, dtype=bool)
        values[name] = num
        missing[name] = empty

    if schema.temp_unit.upper() == "F":
        values["temp_c"] = (values["temp_c"] - 32.0) * 5.0 / 9.0
    if schema.wind_unit == "knots":
        values["wind"] = values["wind"] * KNOT_TO_MS
    if schema.visb_unit == "miles":
        values["visb"] = values["visb"] * MILE_TO_KM

    _range_check(values["temp_c"], *TEMP_RANGE, "temp_c", lines, errors, bad)
    _range_check(values["sea_hpa"], *SEA_RANGE, "sea_hpa", lines, errors, bad)

    keep = ~bad
    frame = pd.DataFrame({
        "county_code": county[keep].astype(str),
        "date": dates[keep].reset_index(drop=True),
        **{k: v[keep] for k, v in values.items()},
    })
    errors.sort(key=lambda e: e.line)
    missing_counts = {k: int((v & keep).sum()) for k, v in missing.items()}
    return WeatherData(frame, errors, missing_counts)


def parse_firm_csv(source):
    """Parse a firm-year CSV; ``cvalue`` may be empty (missing outcome)."""
    cols, lines, errors = _read_rows(source, FIRM_COLUMNS, FIRM_COLUMNS)
    n = len(lines)
    bad = np.zeros(n, dtype=bool)

    for name in ("firm_id", "city_code", "industry_code"):
        arr = np.asarray(cols[name], dtype=object)
        empty = arr == ""
        for i in np.flatnonzero(empty & ~bad):
            errors.append(LineError(int(lines[i]), f"{name} is empty"))
        bad |= empty

    year, year_empty = _numeric(cols["year"], "year", lines, errors, bad)
    non_int = year_empty | (~np.isnan(year) & (year != np.round(year)))
    for i in np.flatnonzero(non_int & ~bad):
        errors.append(LineError(int(lines[i]), f"year is not an integer: {cols['year'][i]!r}"))
    bad |= non_int

    own = []
    for i, text in enumerate(cols["ownership"]):
        try:
            own.append(Ownership.parse(text).value)
        except ValueError as exc:
            own.append("")
            if not bad[i]:
                errors.append(LineError(int(lines[i]), str(exc)))
            bad[i] = True

    cvalue, _ = _numeric(cols["cvalue"], "cvalue", lines, errors, bad)
    _range_check(cvalue, 0.0, 1.0, "cvalue", lines, errors, bad)

    keep = ~bad
    frame = pd.DataFrame({
        "firm_id": np.asarray(cols["firm_id"], dtype=object)[keep].astype(str),
        "year": year[keep].astype(np.int64),
        "city_code": np.asarray(cols["city_code"], dtype=object)[keep].astype(str),
        "ownership": np.asarray(own, dtype=object)[keep].astype(str),
        "industry_code": np.asarray(cols["industry_code"], dtype=object)[keep].astype(str),
        "cvalue": cvalue[keep],
    })
    errors.sort(key=lambda e: e.line)
    return FirmData(frame, errors)


def _opt(v, sentinel=None):
    if v is None:
        return None
    v = float(v)
    if np.isnan(v) or (sentinel is not None and v == sentinel):
        return None
    return v


def convert_gsod_units(record_raw):
    """Convert one imperial-unit GSOD-style record to metric.

    ``record_raw`` is a mapping with ``county_code``, ``date``, ``temp_f``,
    ``wind_knots``, ``sea_hpa`` and ``visb_miles``.  ``None``, NaN and the
    GSOD 999.9/9999.9 sentinels are treated as missing.
    """
    temp_f = _opt(record_raw.get("temp_f"), _GSOD_MISSING["temp_f"])
    wind = _opt(record_raw.get("wind_knots"), _GSOD_MISSING["wind_knots"])
    visb = _opt(record_raw.get("visb_miles"), _GSOD_MISSING["visb_miles"])
    sea = _opt(record_raw.get("sea_hpa"), _GSOD_MISSING["sea_hpa"])
    date = record_raw["date"]
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    return DailyWeatherRecord(
        county_code=str(record_raw["county_code"]),
        date=date,
        mean_temp_c=None if temp_f is None else (temp_f - 32.0) * 5.0 / 9.0,
        wind=None if wind is None else wind * KNOT_TO_MS,
        sea_pressure=sea,
        visibility=None if visb is None else visb * MILE_TO_KM,
    )


def to_gsod_units(record):
    """Inverse of :func:`convert_gsod_units`."""
    return {
        "county_code": record.county_code,
        "date": record.date,
        "temp_f": None if record.mean_temp_c is None else record.mean_temp_c * 9.0 / 5.0 + 32.0,
        "wind_knots": None if record.wind is None else record.wind / KNOT_TO_MS,
        "sea_hpa": record.sea_pressure,
        "visb_miles": None if record.visibility is None else record.visibility / MILE_TO_KM,
    }


@dataclass
class JoinReport:
    rows_in: int = 0
    rows_joined: int = 0
    dropped_no_station: int = 0
    dropped_low_coverage: int = 0
    dropped_missing_outcome: int = 0

    def to_dict(self):
        return asdict(self)

    def to_text(self):
        width = max(len(k) for k in self.to_dict())
        return "".join(f"{k:<{width}}: {v}\n" for k, v in self.to_dict().items())

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: int(d[k]) for k in cls.__dataclass_fields__})


@dataclass
class PanelDataset:
    """Joined firm-year rows with annual weather controls and bin counts.

    ``frame`` columns: firm and location identifiers, ``cvalue``, the
    annual controls ``wind``/``sea``/``visb``, one column per regressor bin
    (ASCII keys, cold to hot), the reference-bin column and ``total_days``.
    """

    frame: pd.DataFrame
    join_report: JoinReport = field(default_factory=JoinReport)
    spec: object = DEFAULT_SPEC

    def __len__(self):
        return len(self.frame)

    def subset(self, rows):
        """New dataset holding ``rows`` (positional indices or boolean mask)."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return PanelDataset(self.frame.iloc[rows].reset_index(drop=True), self.join_report, self.spec)

    def with_columns(self, **columns):
        f = self.frame.copy()
        for k, v in columns.items():
            f[k] = v
        return PanelDataset(f, self.join_report, self.spec)

    def bin_counts(self, i):
        row = self.frame.iloc[i]
        return BinCounts(tuple(int(row[k]) for k in self.spec.keys),
                         int(row[self.spec.reference_key]), int(row["total_days"]))

    def to_csv(self, path_or_buf=None):
        return self.frame.to_csv(path_or_buf, index=False, lineterminator="\n")

    @classmethod
    def from_csv(cls, path, spec=DEFAULT_SPEC):
        frame = pd.read_csv(path, dtype={"firm_id": str, "city_code": str, "industry_code": str,
                                         "ownership": str}, keep_default_na=False, na_values=[""])
        missing = [c for c in FIRM_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaError(f"panel CSV lacks columns {missing}")
        n = len(frame)
        return cls(frame, JoinReport(n, n, 0, 0, 0), spec)


def _as_weather_frame(weather):
    if isinstance(weather, WeatherData):
        return weather.frame
    if isinstance(weather, pd.DataFrame):
        return weather
    recs = list(weather)
    return pd.DataFrame({
        "county_code": [r.county_code for r in recs],
        "date": pd.to_datetime([r.date for r in recs]),
        "temp_c": np.array([np.nan if r.mean_temp_c is None else r.mean_temp_c for r in recs], dtype=float),
        "wind": np.array([np.nan if r.wind is None else r.wind for r in recs], dtype=float),
        "sea_hpa": np.array([np.nan if r.sea_pressure is None else r.sea_pressure for r in recs], dtype=float),
        "visb": np.array([np.nan if r.visibility is None else r.visibility for r in recs], dtype=float),
    })


def _as_firm_frame(firms):
    if isinstance(firms, FirmData):
        return firms.frame
    if isinstance(firms, pd.DataFrame):
        return firms
    recs = list(firms)
    return pd.DataFrame({
        "firm_id": [r.firm_id for r in recs],
        "year": np.array([r.year for r in recs], dtype=np.int64),
        "city_code": [r.city_code for r in recs],
        "ownership": [Ownership(r.ownership).value for r in recs],
        "industry_code": [r.industry_code for r in recs],
        "cvalue": np.array([np.nan if r.cvalue is None else r.cvalue for r in recs], dtype=float),
    })


def county_year_summary(weather, spec=DEFAULT_SPEC):
    """Per (county, year): valid temperature days, bin counts, control means.

    Several records for one county-day (multiple stations) are averaged
    field-wise first.  A day is valid when its temperature is present;
    control means run over valid days on which the control is present.
    """
    w = _as_weather_frame(weather)
    w = w.assign(year=w["date"].dt.year.astype(np.int64))
    if w.duplicated(["county_code", "date"]).any():
        w = (w.groupby(["county_code", "date"], sort=True, as_index=False)
             [["temp_c", "wind", "sea_hpa", "visb"]].mean())
        w["year"] = w["date"].dt.year.astype(np.int64)
    valid = w[~w["temp_c"].isna()]
    keys = valid[["county_code", "year"]]
    codes, uniques = pd.MultiIndex.from_frame(keys).factorize(sort=True)
    n_groups = len(uniques)
    counts = count_bins_grouped(codes, valid["temp_c"].to_numpy(), n_groups, spec)

    out = pd.DataFrame({
        "county_code": uniques.get_level_values(0).astype(str),
        "year": uniques.get_level_values(1).astype(np.int64),
        "coverage": counts.sum(axis=1),
    })
    for src, dst in (("wind", "wind"), ("sea_hpa", "sea"), ("visb", "visb")):
        v = valid[src].to_numpy(dtype=float)
        present = ~np.isnan(v)
        s = np.bincount(codes[present], weights=v[present], minlength=n_groups)
        c = np.bincount(codes[present], minlength=n_groups)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[dst] = np.where(c > 0, s / np.maximum(c, 1), np.nan)
    for j, key in enumerate(spec.interval_keys):
        out[key] = counts[:, j]
    return out, set(w["county_code"].astype(str).unique())


def join_firm_weather(firms, weather, min_coverage_days=DEFAULT_MIN_COVERAGE, spec=DEFAULT_SPEC):
    """Attach annual weather features to each firm-year.

    The join key is (city_code, year) against the weather county code and
    calendar year.  Rows are dropped, in this order of precedence, when the
    county has no weather at all, when fewer than ``min_coverage_days``
    valid temperature days exist for that year, or when ``cvalue`` is
    missing.  The returned report accounts for every input row.
    """
    if not 1 <= int(min_coverage_days) <= 366:
        raise ValidationError(f"min_coverage_days must lie in [1, 366], got {min_coverage_days}")
    f = _as_firm_frame(firms).reset_index(drop=True)
    dup = f.duplicated(["firm_id", "year"], keep="first")
    if dup.any():
        row = f[dup].iloc[0]
        raise ValidationError(f"duplicate firm-year key (firm_id={row['firm_id']!r}, year={int(row['year'])})")

    summary, counties = county_year_summary(weather, spec)
    merged = f.merge(summary.rename(columns={"county_code": "city_code"}),
                     on=["city_code", "year"], how="left", sort=False)
    coverage = merged["coverage"].fillna(0).to_numpy()
    has_station = merged["city_code"].astype(str).isin(counties).to_numpy()
    low = has_station & (coverage < min_coverage_days)
    no_outcome = has_station & ~low & merged["cvalue"].isna().to_numpy()
    keep = has_station & ~low & ~no_outcome

    report = JoinReport(
        rows_in=len(f),
        rows_joined=int(keep.sum()),
        dropped_no_station=int((~has_station).sum()),
        dropped_low_coverage=int(low.sum()),
        dropped_missing_outcome=int(no_outcome.sum()),
    )
    out = merged[keep].reset_index(drop=True)
    for key in spec.interval_keys:
        out[key] = out[key].astype(np.int64)
    out["total_days"] = out["coverage"].astype(np.int64)
    cols = list(FIRM_COLUMNS) + list(CONTROL_KEYS) + list(spec.keys) + [spec.reference_key, "total_days"]
    return PanelDataset(out[cols], report, spec)


__all__ = [
    "DailyWeatherRecord", "FirmYearRecord", "Ownership", "OWNERSHIP_ORDER", "LineError",
    "WeatherSchema", "WeatherData", "FirmData", "JoinReport", "PanelDataset",
    "parse_weather_csv", "parse_firm_csv", "convert_gsod_units", "to_gsod_units",
    "county_year_summary", "join_firm_weather", "N_INTERVALS",
]
