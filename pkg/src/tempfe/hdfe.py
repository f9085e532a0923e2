"""High-dimensional fixed-effect absorption.

Fixed effects are removed by cyclic alternating projections: each sweep
subtracts level means group by group until a full sweep moves no column by
more than ``tolerance`` times that column's scale.  Singleton observations
are pruned to a fixed point beforehand, and the number of absorbed
parameters is counted exactly for up to two factors via the connected
components of the bipartite level graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, ValidationError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 10_000


def factorize(values):
    """Dense integer codes (0..L-1, sorted level order) for a categorical column."""
    codes, _ = pd.factorize(pd.Series(values), sort=True)
    if (codes < 0).any():
        raise ValidationError("fixed-effect factor has missing levels")
    return codes.astype(np.int64)


def interact(*columns):
    """Single factor for the cross product of several columns (e.g. year x city)."""
    frame = pd.DataFrame({f"c{i}": np.asarray(c) for i, c in enumerate(columns)})
    codes, _ = pd.MultiIndex.from_frame(frame).factorize(sort=True)
    return codes.astype(np.int64)


@dataclass
class FESpec:
    """Ordered fixed-effect factors plus convergence settings.

    ``groups`` is a list of ``(name, codes)`` pairs where ``codes`` assigns
    every row an integer level.
    """

    groups: list
    tolerance: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        self.groups = [(str(name), np.asarray(codes, dtype=np.int64)) for name, codes in self.groups]
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        sizes = {len(c) for _, c in self.groups}
        if len(sizes) > 1:
            raise ValidationError("fixed-effect factors have different lengths")
        for name, codes in self.groups:
            if codes.size and codes.min() < 0:
                raise ValidationError(f"factor {name!r} has rows without a level")

    @classmethod
    def from_frame(cls, frame, names, **kwargs):
        """Build factors from frame columns; ``"a*b"`` requests an interaction."""
        groups = []
        for name in names:
            parts = [p.strip() for p in name.split("*")]
            if len(parts) == 1:
                groups.append((name, factorize(frame[parts[0]].to_numpy())))
            else:
                groups.append((name, interact(*(frame[p].to_numpy() for p in parts))))
        return cls(groups, **kwargs)

    @property
    def n_rows(self):
        return len(self.groups[0][1]) if self.groups else 0

    @property
    def names(self):
        return [name for name, _ in self.groups]

    def subset(self, rows):
        """Restrict to ``rows`` and re-code levels densely."""
        rows = np.asarray(rows)
        groups = []
        for name, codes in self.groups:
            sub = codes[rows]
            _, dense = np.unique(sub, return_inverse=True)
            groups.append((name, dense.astype(np.int64)))
        return FESpec(groups, self.tolerance, self.max_iters)

    def n_levels(self):
        return [int(codes.max()) + 1 if codes.size else 0 for _, codes in self.groups]


def drop_singletons(spec):
    """Iteratively remove rows that are alone in some level of some factor.

    Returns
    -------
    keep : ndarray of bool
        Survivors; the fixed point does not depend on removal order.
    n_dropped : int
    """
    n = spec.n_rows
    keep = np.ones(n, dtype=bool)
    while True:
        drop = np.zeros(n, dtype=bool)
        for _, codes in spec.groups:
            counts = np.bincount(codes[keep], minlength=int(codes.max()) + 1 if n else 0)
            drop |= keep & (counts[codes] == 1)
        if not drop.any():
            break
        keep &= ~drop
    return keep, int(n - keep.sum())


@dataclass
class AbsorptionResult:
    demeaned: np.ndarray
    iterations_used: int
    singleton_rows_dropped: int = 0
    absorbed_dof: int = 0
    dof_exact: bool = True
    kept_row_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    last_change: float = 0.0


def _level_operators(spec):
    ops = []
    n = spec.n_rows
    rows = np.arange(n)
    for _, codes in spec.groups:
        n_lev = int(codes.max()) + 1 if n else 0
        # level x row summation operator, fixed CSR order keeps sums bit-stable
        agg = sp.csr_matrix((np.ones(n), (codes, rows)), shape=(n_lev, n))
        counts = np.bincount(codes, minlength=n_lev).astype(float)
        ops.append((codes, agg, np.where(counts > 0, counts, 1.0)))
    return ops


def absorb(columns, spec):
    """Project the fixed effects in ``spec`` out of every column.

    Parameters
    ----------
    columns : array_like, shape (n,) or (n, p)
    spec : FESpec
        Singletons should already be removed.

    Raises
    ------
    ConvergenceError
        If ``spec.max_iters`` sweeps do not reach ``spec.tolerance``.
    """
    x = np.array(columns, dtype=float, copy=True)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if not spec.groups:
        raise ValidationError("absorb needs at least one fixed-effect factor")
    if x.shape[0] != spec.n_rows:
        raise ValidationError("columns and factors have different row counts")
    x = np.ascontiguousarray(x)
    if x.shape[0] == 0:
        return AbsorptionResult(x[:, 0] if squeeze else x, 0, kept_row_index=np.arange(0))

    scale = np.abs(x).max(axis=0)
    scale[scale == 0] = 1.0
    ops = _level_operators(spec)

    # Convergence is judged on level sums (count * level mean): when they are
    # all below tolerance * scale the orthogonality postcondition holds, and
    # the largest mean step is then below the tolerance as well.
    change = np.inf
    it = 0
    while it < spec.max_iters:
        it += 1
        change = 0.0
        for codes, agg, counts in ops:
            sums = agg @ x
            step = (sums / counts[:, None])[codes]
            x -= step
            change = max(change, float(np.max(np.abs(sums).max(axis=0) / scale)))
        if len(ops) == 1 or change < spec.tolerance:
            break
    else:
        raise ConvergenceError(
            f"alternating projections did not converge in {spec.max_iters} iterations "
            f"(last relative change {change:.3e})", last_change=change, iterations=it)

    out = x[:, 0] if squeeze else x
    return AbsorptionResult(out, it, kept_row_index=np.arange(x.shape[0]), last_change=change)


def count_absorbed_dof(spec):
    """Number of fixed-effect parameters absorbed (rank of the dummy design).

    Returns
    -------
    m : int
    exact : bool
        False when three or more factors are present; the first two are
        then counted exactly and each further factor adds ``levels - 1``.
    """
    levels = spec.n_levels()
    if not levels:
        return 0, True
    if len(levels) == 1:
        return levels[0], True
    (_, a), (_, b) = spec.groups[:2]
    l1, l2 = levels[:2]
    n = len(a)
    graph = sp.coo_matrix((np.ones(n), (a, l1 + b)), shape=(l1 + l2, l1 + l2))
    n_comp, _ = connected_components(graph, directed=False)
    m = l1 + l2 - n_comp
    extra = sum(lv - 1 for lv in levels[2:])
    return m + extra, len(levels) <= 2


def within_transform(columns, spec):
    """Drop singletons, absorb the fixed effects and count absorbed dof."""
    keep, n_dropped = drop_singletons(spec)
    kept = np.flatnonzero(keep)
    sub = spec.subset(kept)
    cols = np.asarray(columns, dtype=float)[kept]
    if kept.size == 0:
        return AbsorptionResult(cols, 0, n_dropped, 0, True, kept)
    res = absorb(cols, sub)
    m, exact = count_absorbed_dof(sub)
    res.singleton_rows_dropped = n_dropped
    res.absorbed_dof = m
    res.dof_exact = exact
    res.kept_row_index = kept
    return res
