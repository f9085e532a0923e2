"""Least squares on absorbed data with classical and CR1 covariance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import scipy.linalg as la
import scipy.sparse as sp

from .errors import (DofExhaustedError, EmptySampleError, InsufficientClustersError,
                     RankError, ValidationError)
from .hdfe import DEFAULT_MAX_ITERS, FESpec, factorize, within_transform

COLLINEAR_TOL = 1e-10
# relative pivot threshold on demeaned data, measured against raw norms
FE_COLLINEAR_TOL = 1e-6
Z95 = 1.96
# Absorption tolerance used when estimating.  Cluster score sums can cancel
# by an order of magnitude, so projections accurate to 1e-8 of the column
# scale leave CR1 covariances accurate to only a few 1e-8; two more decimals
# cost a handful of extra sweeps.
FIT_TOL = 1e-10

CLASSICAL = "classical"
CLUSTER = "cluster"


@dataclass
class OLSResult:
    beta: np.ndarray
    residuals: np.ndarray
    labels: tuple
    dropped_collinear: list
    kept: np.ndarray
    bread: np.ndarray  # (X'X)^-1 over kept columns


def _qr_r(x):
    return la.qr(x, mode="r", check_finite=False)[0][: x.shape[1]]


def ols(y, x, labels=None, ref_norms=None, tol=COLLINEAR_TOL):
    """Least squares with left-to-right removal of collinear columns.

    A column is dropped when the diagonal of an unpivoted QR factor falls
    below ``tol`` times the column's reference norm (its own norm unless
    ``ref_norms`` is given), i.e. when it is (nearly) spanned by the
    columns before it.  The check is repeated until the remaining design
    has full column rank.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    labels = tuple(labels) if labels is not None else tuple(f"x{j + 1}" for j in range(p))
    if n == 0:
        raise EmptySampleError("no observations")

    kept = list(range(p))
    dropped = []
    norms = np.linalg.norm(x, axis=0) if ref_norms is None else np.asarray(ref_norms, dtype=float)
    while kept:
        r = _qr_r(x[:, kept])
        diag = np.abs(np.diag(r))
        rel = np.where(norms[kept] > 0, diag / np.where(norms[kept] > 0, norms[kept], 1.0), 0.0)
        bad = np.flatnonzero(rel < tol)
        if bad.size == 0:
            break
        dropped.append(kept.pop(int(bad[0])))
    if not kept:
        raise RankError("all regressors are collinear")
    if n < len(kept):
        raise RankError(f"{n} observations for {len(kept)} regressors")

    xk = x[:, kept]
    q, r = la.qr(xk, mode="economic", check_finite=False)
    beta = la.solve_triangular(r, q.T @ y, check_finite=False)
    resid = y - xk @ beta
    rinv = la.solve_triangular(r, np.eye(len(kept)), check_finite=False)
    bread = rinv @ rinv.T
    return OLSResult(beta, resid, tuple(labels[j] for j in kept),
                     [labels[j] for j in sorted(dropped)], np.asarray(kept), bread)


def _bread(x):
    r = _qr_r(np.asarray(x, dtype=float))
    rinv = la.solve_triangular(r, np.eye(r.shape[0]), check_finite=False)
    return rinv @ rinv.T


def classical_vcov(residuals, regressors, n, k, m, bread=None):
    """Homoskedastic covariance ``RSS/(n-k-m) * (X'X)^-1``."""
    dof = n - k - m
    if dof < 1:
        raise DofExhaustedError(f"residual dof n-k-m = {n}-{k}-{m} = {dof} < 1")
    e = np.asarray(residuals, dtype=float)
    if bread is None:
        bread = _bread(regressors)
    sigma2 = float(e @ e) / dof
    return sigma2 * bread


def cluster_sums(values, clusters):
    """Column sums of ``values`` within each cluster, in sorted cluster order."""
    codes = factorize(clusters)
    g = int(codes.max()) + 1 if codes.size else 0
    agg = sp.csr_matrix((np.ones(codes.size), (codes, np.arange(codes.size))), shape=(g, codes.size))
    return agg @ values, g


def cluster_vcov(residuals, regressors, clusters, n, k, m, bread=None):
    """CR1 sandwich with factor ``G/(G-1) * (N-1)/(N-k-m)``."""
    x = np.asarray(regressors, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    e = np.asarray(residuals, dtype=float)
    scores, g = cluster_sums(x * e[:, None], clusters)
    if g < 2:
        raise InsufficientClustersError(f"cluster-robust covariance needs >= 2 clusters, got {g}")
    k_total = k + m
    if n - k_total < 1:
        raise DofExhaustedError(f"N - K = {n} - {k_total} < 1")
    if bread is None:
        bread = _bread(x)
    meat = scores.T @ scores
    c = (g / (g - 1)) * ((n - 1) / (n - k_total))
    v = c * (bread @ meat @ bread)
    return (v + v.T) / 2


def stars(p):
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def _p_normal(t):
    if math.isinf(t):
        return 0.0
    return math.erfc(abs(t) / math.sqrt(2.0))


@dataclass
class FitResult:
    labels: tuple
    beta: np.ndarray
    vcov: np.ndarray
    se: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    ci95: np.ndarray
    n_obs: int
    k_regressors: int
    m_absorbed: int
    r2_full: float
    r2_within: float
    sigma2: float
    reported_constant: float
    dropped_collinear: list = field(default_factory=list)
    vcov_kind: str = CLASSICAL
    n_clusters: Optional[int] = None
    fe_names: tuple = ()
    iterations: int = 0
    singletons_dropped: int = 0
    dof_exact: bool = True
    notes: list = field(default_factory=list)

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"{label!r} not among fitted coefficients {list(self.labels)}") from None

    def coef(self, label):
        return float(self.beta[self.index(label)])

    def stars(self, label):
        return stars(float(self.p_value[self.index(label)]))

    def to_dict(self):
        return {
            "labels": list(self.labels),
            "beta": [float(v) for v in self.beta],
            "vcov": [[float(v) for v in row] for row in self.vcov],
            "se": [float(v) for v in self.se],
            "t_stat": [float(v) for v in self.t_stat],
            "p_value": [float(v) for v in self.p_value],
            "ci95": [[float(a), float(b)] for a, b in self.ci95],
            "n_obs": int(self.n_obs),
            "k_regressors": int(self.k_regressors),
            "m_absorbed": int(self.m_absorbed),
            "r2_full": float(self.r2_full),
            "r2_within": float(self.r2_within),
            "sigma2": float(self.sigma2),
            "reported_constant": float(self.reported_constant),
            "dropped_collinear": list(self.dropped_collinear),
            "vcov_kind": self.vcov_kind,
            "n_clusters": self.n_clusters,
            "fe_names": list(self.fe_names),
            "iterations": int(self.iterations),
            "singletons_dropped": int(self.singletons_dropped),
            "dof_exact": bool(self.dof_exact),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        k = len(d["labels"])
        return cls(
            labels=tuple(d["labels"]),
            beta=np.asarray(d["beta"], dtype=float),
            vcov=np.asarray(d["vcov"], dtype=float).reshape(k, k),
            se=np.asarray(d["se"], dtype=float),
            t_stat=np.asarray(d["t_stat"], dtype=float),
            p_value=np.asarray(d["p_value"], dtype=float),
            ci95=np.asarray(d["ci95"], dtype=float).reshape(k, 2),
            **{key: d[key] for key in (
                "n_obs", "k_regressors", "m_absorbed", "r2_full", "r2_within", "sigma2",
                "reported_constant", "dropped_collinear", "vcov_kind", "n_clusters",
                "iterations", "singletons_dropped", "dof_exact", "notes")},
            fe_names=tuple(d["fe_names"]),
        )


def summarize_fit(beta, vcov, labels, *, n_obs, k, m, rss, tss_raw, tss_within,
                  reported_constant=float("nan"), **extra):
    """Assemble inference statistics around point estimates and a covariance.

    p-values are two-sided under the normal approximation.
    """
    beta = np.asarray(beta, dtype=float)
    vcov = np.asarray(vcov, dtype=float)
    se = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    t = np.empty_like(beta)
    for j, (b, s) in enumerate(zip(beta, se)):
        if s > 0:
            t[j] = b / s
        else:
            t[j] = math.copysign(math.inf, b) if b != 0 else 0.0
    p = np.array([_p_normal(v) for v in t])
    ci = np.column_stack([beta - Z95 * se, beta + Z95 * se])
    dof = n_obs - k - m
    sigma2 = rss / dof if dof >= 1 else float("nan")
    r2_full = 1.0 - rss / tss_raw if tss_raw > 0 else 1.0
    r2_within = 1.0 - rss / tss_within if tss_within > 0 else 1.0
    return FitResult(tuple(labels), beta, vcov, se, t, p, ci, int(n_obs), int(k), int(m),
                     float(r2_full), float(r2_within), float(sigma2), float(reported_constant), **extra)


@dataclass
class RegressionSpec:
    """What to regress on what, which effects to absorb, how to compute SEs.

    ``sample`` is an optional :meth:`pandas.DataFrame.query` predicate;
    ``fe`` names frame columns (``"year*city_code"`` is an interaction).
    """

    regressors: Sequence[str]
    fe: Sequence[str] = ("firm_id", "year")
    vcov: str = CLASSICAL
    cluster: Optional[str] = None
    outcome: str = "cvalue"
    sample: Optional[str] = None
    tolerance: float = FIT_TOL
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        if self.vcov not in (CLASSICAL, CLUSTER):
            raise ValidationError(f"unknown vcov kind {self.vcov!r}")
        if self.vcov == CLUSTER and not self.cluster:
            raise ValidationError("cluster-robust covariance needs a cluster variable")


class Estimate:
    """Point estimates for one design; covariances are computed on demand.

    Fitting once and deriving several covariance flavours guarantees the
    coefficient vectors are identical across them.
    """

    def __init__(self, frame, spec):
        self.spec = spec
        regs = list(spec.regressors)
        fe_cols = [p.strip() for name in spec.fe for p in name.split("*")]
        needed = [spec.outcome] + regs + fe_cols + ([spec.cluster] if spec.cluster else [])
        missing = [c for c in dict.fromkeys(needed) if c not in frame.columns]
        if missing:
            raise ValidationError(f"unknown variables: {missing}")
        data = frame.query(spec.sample) if spec.sample else frame
        numeric = [spec.outcome] + regs
        complete = ~data[numeric].isna().any(axis=1)
        for c in fe_cols + ([spec.cluster] if spec.cluster else []):
            complete &= data[c].notna()
        data = data[complete.to_numpy()]
        if len(data) == 0:
            raise EmptySampleError("estimation sample is empty")

        y = data[spec.outcome].to_numpy(dtype=float)
        x = data[regs].to_numpy(dtype=float) if regs else np.zeros((len(data), 0))
        fes = FESpec.from_frame(data, list(spec.fe), tolerance=spec.tolerance, max_iters=spec.max_iters)
        absorbed = within_transform(np.column_stack([y, x]), fes)
        kept = absorbed.kept_row_index
        if kept.size == 0:
            raise EmptySampleError("no observations survive singleton removal")

        self.data = data.iloc[kept]
        self.absorption = absorbed
        yd = absorbed.demeaned[:, 0]
        xd = absorbed.demeaned[:, 1:]
        y_raw = y[kept]
        x_raw = x[kept]

        # demeaned columns carry absorption noise of order tolerance, so
        # collinearity (including with the fixed effects) is judged against
        # the centred raw norms with a looser threshold
        raw_norm = np.linalg.norm(x_raw - x_raw.mean(axis=0), axis=0)
        if not len(regs):
            raise RankError("no regressors")
        res = ols(yd, xd, regs, ref_norms=raw_norm, tol=FE_COLLINEAR_TOL)
        self.ols = res
        cols = list(res.kept)
        self.x = xd[:, cols]
        self.dropped = list(res.dropped_collinear)
        self.n = len(kept)
        self.k = len(cols)
        self.m = absorbed.absorbed_dof
        self.rss = float(res.residuals @ res.residuals)
        self.tss_raw = float(((y_raw - y_raw.mean()) ** 2).sum())
        self.tss_within = float(yd @ yd)
        self.constant = float(y_raw.mean() - x_raw[:, cols].mean(axis=0) @ res.beta)

    def result(self, vcov=None, cluster=None):
        vcov = vcov or self.spec.vcov
        cluster = cluster or self.spec.cluster
        notes = []
        n_clusters = None
        if vcov == CLASSICAL:
            v = classical_vcov(self.ols.residuals, self.x, self.n, self.k, self.m, bread=self.ols.bread)
        elif vcov == CLUSTER:
            if not cluster or cluster not in self.data.columns:
                raise ValidationError(f"unknown cluster variable {cluster!r}")
            groups = self.data[cluster].to_numpy()
            v = cluster_vcov(self.ols.residuals, self.x, groups, self.n, self.k, self.m, bread=self.ols.bread)
            n_clusters = int(pd.Series(groups).nunique())
        else:
            raise ValidationError(f"unknown vcov kind {vcov!r}")
        if self.dropped:
            notes.append("omitted (collinear): " + ", ".join(self.dropped))
        if not self.absorption.dof_exact:
            notes.append("absorbed dof approximate (3+ fixed-effect factors)")
        return summarize_fit(
            self.ols.beta, v, self.ols.labels, n_obs=self.n, k=self.k, m=self.m, rss=self.rss,
            tss_raw=self.tss_raw, tss_within=self.tss_within, reported_constant=self.constant,
            dropped_collinear=list(self.dropped), vcov_kind=vcov, n_clusters=n_clusters,
            fe_names=tuple(self.spec.fe), iterations=self.absorption.iterations_used,
            singletons_dropped=self.absorption.singleton_rows_dropped,
            dof_exact=self.absorption.dof_exact, notes=notes,
        )


def fit(frame, spec):
    """Absorb, solve and summarise in one call."""
    return Estimate(frame, spec).result()
