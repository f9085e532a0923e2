"""Temperature-bin day counts and lagged feature construction.

Daily mean temperatures are sorted into ten left-open/right-closed
intervals: (-inf,-10], (-10,-5], ..., (25,30], (30,inf).  The (10,15]
interval is the omitted reference group, leaving nine regressors.  All
outputs list the regressors from cold to hot.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ValidationError

DEFAULT_EDGES = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
DEFAULT_REFERENCE = 5  # (10, 15]
N_INTERVALS = 10

CONTROL_KEYS = ("wind", "sea", "visb")


def _edge_token(x):
    x = float(x)
    s = f"{abs(x):g}"
    return ("m" + s) if x < 0 else s


def _edge_text(x):
    return f"{float(x):g}"


@dataclass(frozen=True)
class BinSpec:
    """Interval breakpoints (degrees Celsius) plus the omitted reference bin.

    ``edges`` holds the nine interior breakpoints; the ten intervals they
    induce are indexed 0 (coldest) to 9 (hottest).
    """

    edges: tuple = DEFAULT_EDGES
    reference_bin: int = DEFAULT_REFERENCE

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) != N_INTERVALS - 1:
            raise ValidationError(
                f"bin spec needs {N_INTERVALS - 1} edges ({N_INTERVALS} intervals), got {len(edges)}"
            )
        if not all(math.isfinite(e) for e in edges):
            raise ValidationError("bin edges must be finite")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValidationError(f"bin edges must be strictly increasing: {edges}")
        if not 0 <= self.reference_bin < N_INTERVALS:
            raise ValidationError(f"reference_bin out of range: {self.reference_bin}")

    @property
    def interval_keys(self):
        """ASCII keys for all ten intervals, cold to hot."""
        e = self.edges
        keys = [f"le_{_edge_token(e[0])}"]
        keys += [f"{_edge_token(a)}_{_edge_token(b)}" for a, b in zip(e, e[1:])]
        keys.append(f"gt{_edge_token(e[-1])}")
        return tuple(keys)

    @property
    def interval_labels(self):
        """Human-readable labels for all ten intervals, cold to hot."""
        e = self.edges
        labels = [f"≤{_edge_text(e[0])}°C"]
        labels += [f"{_edge_text(a)}~{_edge_text(b)}°C" for a, b in zip(e, e[1:])]
        labels.append(f">{_edge_text(e[-1])}°C")
        return tuple(labels)

    @property
    def regressor_bins(self):
        """Interval indices entering the regression (reference excluded)."""
        return tuple(i for i in range(N_INTERVALS) if i != self.reference_bin)

    @property
    def keys(self):
        """ASCII keys of the nine regressors, cold to hot."""
        k = self.interval_keys
        return tuple(k[i] for i in self.regressor_bins)

    @property
    def labels(self):
        lab = self.interval_labels
        return tuple(lab[i] for i in self.regressor_bins)

    @property
    def reference_key(self):
        return self.interval_keys[self.reference_bin]

    @property
    def stata_names(self):
        """``temp1`` is the hottest regressor and ``temp9`` the coldest."""
        n = len(self.regressor_bins)
        return tuple(f"temp{n - j}" for j in range(n))

    def display_label(self, key):
        """Map a regressor key (possibly lag-prefixed) to its table label."""
        lookup = dict(zip(self.interval_keys, self.interval_labels))
        prefix, base = split_lag_prefix(key)
        return prefix + lookup.get(base, base)


DEFAULT_SPEC = BinSpec()


def lag_prefix(lag):
    return "L" if lag == 1 else f"L{lag}_"


def split_lag_prefix(key):
    """Split ``'L25_30'`` into ``('L', '25_30')``; non-lagged keys get ``''``."""
    spec_keys = set(DEFAULT_SPEC.interval_keys) | set(CONTROL_KEYS)
    if key in spec_keys:
        return "", key
    if key.startswith("L"):
        rest = key[1:]
        if rest in spec_keys:
            return "L", rest
        head, sep, tail = rest.partition("_")
        if sep and head.isdigit():
            return f"L{head}_", tail
    return "", key


def bin_codes(temps, spec=DEFAULT_SPEC):
    """Vectorised interval index (0..9) for each temperature."""
    t = np.asarray(temps, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValidationError("temperatures must be finite")
    # side="left" puts a value equal to an edge into the interval it closes
    return np.searchsorted(np.asarray(spec.edges), t, side="left")


def bin_index(temp_c, spec=DEFAULT_SPEC):
    """Return the interval key that ``temp_c`` falls into.

    The reference interval key is returned for reference-bin days; callers
    check ``spec.reference_key`` to exclude it.
    """
    if not math.isfinite(temp_c):
        raise ValidationError(f"temperature must be finite, got {temp_c!r}")
    return spec.interval_keys[int(bin_codes([temp_c], spec)[0])]


@dataclass(frozen=True)
class BinCounts:
    counts: tuple
    reference_days: int
    total_days: int

    def __post_init__(self):
        if sum(self.counts) + self.reference_days != self.total_days:
            raise ValueError("bin counts do not partition total_days")

    def as_dict(self, spec=DEFAULT_SPEC):
        return dict(zip(spec.keys, self.counts))


def count_bins(daily_temps, spec=DEFAULT_SPEC):
    codes = bin_codes(daily_temps, spec)
    per = np.bincount(codes, minlength=N_INTERVALS)
    counts = tuple(int(per[i]) for i in spec.regressor_bins)
    return BinCounts(counts, int(per[spec.reference_bin]), int(codes.size))


def count_bins_grouped(group_codes, temps, n_groups, spec=DEFAULT_SPEC):
    """Day counts for every (group, interval) pair.

    Returns an ``(n_groups, 10)`` integer array; column ``spec.reference_bin``
    holds the reference days.
    """
    codes = bin_codes(temps, spec)
    flat = np.asarray(group_codes, dtype=np.int64) * N_INTERVALS + codes
    out = np.bincount(flat, minlength=n_groups * N_INTERVALS)
    return out.reshape(n_groups, N_INTERVALS)


@dataclass
class FeatureMatrix:
    labels: tuple
    values: np.ndarray
    lag_depth: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.labels):
            raise ValueError("values must be 2-D with one column per label")

    @property
    def n_rows(self):
        return self.values.shape[0]

    def to_frame(self):
        return pd.DataFrame(self.values, columns=list(self.labels))

    def to_csv(self, path_or_buf=None):
        """CSV with one header row of ASCII labels."""
        return self.to_frame().to_csv(path_or_buf, index=False, lineterminator="\n")


def build_features(panel, include_controls=True, spec=DEFAULT_SPEC):
    """Regressor matrix (bins cold to hot, then controls) aligned with ``panel``."""
    cols = list(spec.keys)
    if include_controls:
        cols += list(CONTROL_KEYS)
    frame = panel.frame
    missing = [c for c in cols if c not in frame.columns]
    if missing:
        raise ValidationError(f"panel lacks feature columns: {missing}")
    return FeatureMatrix(cols, frame[cols].to_numpy(dtype=float), 0)


def build_lagged(panel, features, lag, keep_current=False):
    """Give row (firm, year) the features observed at (firm, year - lag).

    Rows without a source year are dropped; gaps are never interpolated.

    Returns
    -------
    (FeatureMatrix, PanelDataset)
        Lagged features and the correspondingly trimmed panel.  With
        ``keep_current`` the contemporaneous columns are kept in front of
        the lagged copies.
    """
    if lag < 0:
        raise ValidationError(f"lag must be >= 0, got {lag}")
    frame = panel.frame
    if features.n_rows != len(frame):
        raise ValidationError("features are not aligned with the panel")
    if lag == 0:
        return features, panel

    years = frame["year"].to_numpy()
    target = pd.DataFrame({"firm_id": frame["firm_id"].to_numpy(), "year": years,
                           "_dst": np.arange(len(frame))})
    source = pd.DataFrame({"firm_id": frame["firm_id"].to_numpy(), "year": years + lag,
                           "_src": np.arange(len(frame))})
    joined = target.merge(source, on=["firm_id", "year"], how="inner", sort=False)
    joined = joined.sort_values("_dst", kind="stable")
    dst = joined["_dst"].to_numpy()
    src = joined["_src"].to_numpy()

    if dst.size == 0:
        warnings.warn(f"lag {lag} leaves no rows with an observed source year", RuntimeWarning)

    prefix = lag_prefix(lag)
    labels = tuple(prefix + lab for lab in features.labels)
    values = features.values[src]
    if keep_current:
        labels = features.labels + labels
        values = np.hstack([features.values[dst], values])
    trimmed = panel.subset(dst)
    return FeatureMatrix(labels, values, lag), trimmed
