"""Synthetic firm-weather panels with planted coefficients, and a brute-force
dummy-variable regression used as an independent oracle in tests.

The outcome follows the two-way fixed-effects bin model::

    cvalue = alpha + sum_j beta_j * bin_j + phi' (wind, sea, visb)
             + firm effect + year effect + noise

Daily temperatures come from a sinusoidal annual cycle per city with a
city-year anomaly and i.i.d. Gaussian daily noise.
"""

from __future__ import annotations

import datetime as dt
import io
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .errors import DofExhaustedError, RankError, ValidationError
from .paneldata import OWNERSHIP_ORDER, county_year_summary
from .tembin import CONTROL_KEYS, DEFAULT_SPEC

# Benchmark magnitudes (controls included), cold to hot
BENCHMARK_BETA_BINS = (-0.000319, -6.22e-05, 0.000135, 7.74e-05, 0.000175,
                    7.79e-05, 5.88e-05, -0.000163, -0.000506)
BENCHMARK_BETA_CONTROLS = (-0.0129, -0.00148, 0.00187)
# relative firm counts by ownership type
OWNERSHIP_SHARES = (54432, 20688, 19012, 32976, 11992)


@dataclass
class SynthScenario:
    n_firms: int = 200
    n_years: int = 10
    n_cities: int = 20
    n_industries: int = 6
    start_year: int = 2005
    beta_bins: tuple = BENCHMARK_BETA_BINS
    beta_controls: tuple = BENCHMARK_BETA_CONTROLS
    alpha: Optional[float] = None  # None: centre the mean outcome at ``target_mean``
    target_mean: float = 0.5
    firm_fe_sd: float = 0.05
    year_fe_sd: float = 0.01
    noise_sd: float = 0.03
    seed: int = 0
    # climate profile
    temp_mean_range: tuple = (-2.0, 22.0)
    temp_amplitude_range: tuple = (8.0, 16.0)
    temp_daily_sd: float = 4.0
    temp_year_sd: float = 1.5
    missing_day_rate: float = 0.0
    drop_rows: int = 0  # firm-years removed at random after generation

    def __post_init__(self):
        for name in ("n_firms", "n_years", "n_cities", "n_industries"):
            if getattr(self, name) < 2:
                raise ValidationError(f"{name} must be >= 2")
        for name in ("firm_fe_sd", "year_fe_sd", "noise_sd", "temp_daily_sd", "temp_year_sd"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if len(self.beta_bins) != 9 or len(self.beta_controls) != 3:
            raise ValidationError("need 9 bin and 3 control coefficients")
        self.beta_bins = tuple(float(b) for b in self.beta_bins)
        self.beta_controls = tuple(float(b) for b in self.beta_controls)

    @property
    def planted(self):
        """Planted coefficients keyed by regressor name."""
        keys = DEFAULT_SPEC.keys + CONTROL_KEYS
        return dict(zip(keys, self.beta_bins + self.beta_controls))


@dataclass
class SynthTruth:
    alpha: float
    planted: dict
    firm_effects: dict
    year_effects: dict
    noise: list  # aligned with the firm CSV rows
    formula: str = "cvalue = alpha + sum(beta_j * bin_j) + phi . (wind, sea, visb) + firm + year + noise"

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["year_effects"] = {str(k): v for k, v in d["year_effects"].items()}
        return cls(**d)

    def outcome(self, frame):
        """Recompute cvalue for rows of a firm frame carrying bins and controls."""
        y = np.full(len(frame), self.alpha)
        for key, b in self.planted.items():
            y = y + b * frame[key].to_numpy(dtype=float)
        y = y + frame["firm_id"].map(self.firm_effects).to_numpy(dtype=float)
        y = y + frame["year"].astype(str).map(self.year_effects).to_numpy(dtype=float)
        return y + np.asarray(self.noise, dtype=float)


@dataclass
class GeneratedPanel:
    weather: pd.DataFrame
    firms: pd.DataFrame
    truth: SynthTruth
    scenario: SynthScenario = field(repr=False, default=None)

    def weather_csv(self):
        w = self.weather.assign(date=self.weather["date"].dt.strftime("%Y-%m-%d"))
        return w.to_csv(index=False, lineterminator="\n", na_rep="")

    def firms_csv(self):
        return self.firms.to_csv(index=False, lineterminator="\n", na_rep="")

    def write(self, directory):
        os.makedirs(directory, exist_ok=True)
        paths = {
            "weather": os.path.join(directory, "weather.csv"),
            "firms": os.path.join(directory, "firms.csv"),
            "truth": os.path.join(directory, "truth.json"),
        }
        with open(paths["weather"], "w", encoding="utf-8", newline="") as fh:
            fh.write(self.weather_csv())
        with open(paths["firms"], "w", encoding="utf-8", newline="") as fh:
            fh.write(self.firms_csv())
        with open(paths["truth"], "w", encoding="utf-8") as fh:
            fh.write(self.truth.to_json())
        return paths


def _city_weather(rng, code, years, sc, profile):
    mean, amp, wind0, sea0, visb0 = profile
    frames = []
    for year in years:
        start = dt.date(year, 1, 1)
        n_days = (dt.date(year + 1, 1, 1) - start).days
        doy = np.arange(n_days)
        anomaly = rng.normal(0.0, sc.temp_year_sd)
        temp = (mean + anomaly - amp * np.cos(2 * np.pi * (doy - 15) / n_days)
                + rng.normal(0.0, sc.temp_daily_sd, n_days))
        temp = np.clip(np.round(temp, 1), -89.9, 59.9)
        wind = np.round(np.abs(wind0 + rng.normal(0, 0.5) + rng.normal(0, 1.5, n_days)), 1)
        sea = np.round(np.clip(sea0 + rng.normal(0, 0.8) + rng.normal(0, 5.0, n_days), 860, 1090), 1)
        visb = np.round(np.abs(visb0 + rng.normal(0, 0.6) + rng.normal(0, 2.5, n_days)), 1)
        if sc.missing_day_rate > 0:
            temp[rng.random(n_days) < sc.missing_day_rate] = np.nan
        frames.append(pd.DataFrame({
            "county_code": code,
            "date": pd.date_range(start, periods=n_days, freq="D"),
            "temp_c": temp, "wind": wind, "sea_hpa": sea, "visb": visb,
        }))
    return frames


def generate_panel(scenario=None):
    """Draw weather and firm-year data for ``scenario``; pure in the seed."""
    sc = scenario or SynthScenario()
    root = np.random.SeedSequence(sc.seed)
    city_seq, firm_seq = root.spawn(2)
    city_rngs = [np.random.default_rng(s) for s in city_seq.spawn(sc.n_cities)]
    rng = np.random.default_rng(firm_seq)

    width = len(str(sc.n_cities))
    cities = [f"C{i + 1:0{width}d}" for i in range(sc.n_cities)]
    years = list(range(sc.start_year, sc.start_year + sc.n_years))

    frames = []
    for code, crng in zip(cities, city_rngs):
        profile = (crng.uniform(*sc.temp_mean_range), crng.uniform(*sc.temp_amplitude_range),
                   crng.normal(5.8, 1.0), crng.normal(1015.75, 1.5), crng.normal(8.8, 1.5))
        frames.extend(_city_weather(crng, code, years, sc, profile))
    weather = pd.concat(frames, ignore_index=True)

    fw = len(str(sc.n_firms))
    firm_ids = np.array([f"F{i + 1:0{fw}d}" for i in range(sc.n_firms)], dtype=object)
    firm_city = rng.integers(0, sc.n_cities, sc.n_firms)
    ind_p = 1.0 / np.arange(1, sc.n_industries + 1)
    firm_ind = rng.choice(sc.n_industries, size=sc.n_firms, p=ind_p / ind_p.sum())
    own_p = np.asarray(OWNERSHIP_SHARES, dtype=float)
    firm_own = rng.choice(len(OWNERSHIP_ORDER), size=sc.n_firms, p=own_p / own_p.sum())
    firm_fe = rng.normal(0.0, sc.firm_fe_sd, sc.n_firms)
    year_fe = rng.normal(0.0, sc.year_fe_sd, sc.n_years)

    n = sc.n_firms * sc.n_years
    fi = np.repeat(np.arange(sc.n_firms), sc.n_years)
    yi = np.tile(np.arange(sc.n_years), sc.n_firms)
    noise = rng.normal(0.0, sc.noise_sd, n)
    keep = np.ones(n, dtype=bool)
    if sc.drop_rows:
        keep[rng.choice(n, size=sc.drop_rows, replace=False)] = False
    fi, yi, noise = fi[keep], yi[keep], noise[keep]

    ind_width = len(str(sc.n_industries))
    firms = pd.DataFrame({
        "firm_id": firm_ids[fi],
        "year": np.asarray(years, dtype=np.int64)[yi],
        "city_code": np.asarray(cities, dtype=object)[firm_city[fi]],
        "ownership": np.asarray([o.value for o in OWNERSHIP_ORDER], dtype=object)[firm_own[fi]],
        "industry_code": np.asarray([f"I{j + 1:0{ind_width}d}" for j in range(sc.n_industries)],
                                    dtype=object)[firm_ind[fi]],
    })

    summary, _ = county_year_summary(weather)
    feats = firms[["city_code", "year"]].merge(
        summary.rename(columns={"county_code": "city_code"}), on=["city_code", "year"], how="left")
    planted = sc.planted
    signal = np.zeros(len(firms))
    for key, b in planted.items():
        signal += b * feats[key].to_numpy(dtype=float)
    fe_part = firm_fe[fi] + year_fe[yi]
    alpha = sc.alpha
    if alpha is None:
        alpha = float(sc.target_mean - np.mean(signal))
    firms["cvalue"] = alpha + signal + fe_part + noise

    truth = SynthTruth(
        alpha=float(alpha),
        planted=planted,
        firm_effects={fid: float(v) for fid, v in zip(firm_ids, firm_fe)},
        year_effects={str(y): float(v) for y, v in zip(years, year_fe)},
        noise=[float(v) for v in noise],
    )
    return GeneratedPanel(weather, firms, truth, sc)


@dataclass
class OracleFit:
    beta: np.ndarray
    vcov: np.ndarray
    se: np.ndarray
    residuals: np.ndarray
    n_obs: int
    rank: int
    dummy_rank: int


def _dummies(values):
    levels = sorted(set(values.tolist()), key=str)
    return np.array([[1.0 if v == lev else 0.0 for lev in levels] for v in values.tolist()])


def oracle_ols_dummies(frame, regressors, fe=("firm_id", "year"), vcov="classical",
                       cluster=None, outcome="cvalue", max_rows=2000):
    """Dummy-variable least squares through the SVD pseudo-inverse of the design.

    Every level of every fixed-effect factor gets its own indicator column;
    the covariance formulas are coded directly from their definitions.
    """
    if len(frame) > max_rows:
        raise ValidationError(f"oracle limited to {max_rows} rows, got {len(frame)}")
    y = frame[outcome].to_numpy(dtype=float)
    x = frame[list(regressors)].to_numpy(dtype=float)
    dummies = [_dummies(frame[name].to_numpy()) for name in fe]
    d = np.hstack(dummies) if dummies else np.zeros((len(frame), 0))
    z = np.hstack([x, d])
    rank = int(np.linalg.matrix_rank(z))
    if rank == 0:
        raise RankError("dummy design has rank 0")
    dummy_rank = int(np.linalg.matrix_rank(d)) if d.shape[1] else 0
    z_pinv = np.linalg.pinv(z)
    ztz_pinv = z_pinv @ z_pinv.T  # (Z'Z)^+
    theta = z_pinv @ y
    e = y - z @ theta
    n = len(y)
    k = x.shape[1]
    if n - rank < 1:
        raise DofExhaustedError(f"dummy design leaves {n} - {rank} residual dof")
    if vcov == "classical":
        s2 = float(e @ e) / (n - rank)
        v = s2 * ztz_pinv
    else:
        groups = frame[cluster].to_numpy()
        meat = np.zeros((z.shape[1], z.shape[1]))
        labels = sorted(set(groups.tolist()), key=str)
        for g in labels:
            idx = [i for i in range(n) if groups[i] == g]
            s = z[idx].T @ e[idx]
            meat += np.outer(s, s)
        G = len(labels)
        c = G / (G - 1) * (n - 1) / (n - rank)
        v = c * ztz_pinv @ meat @ ztz_pinv
    vb = v[:k, :k]
    return OracleFit(theta[:k], vb, np.sqrt(np.clip(np.diag(vb), 0, None)), e, n, rank, dummy_rank)
