"""Empirical distributions on the real line and 1D optimal transport.

All computations go through step quantile functions. Two quantile functions
are compared on the union of their breakpoints, where both are constant, so
every transport integral below is a finite weighted sum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .exceptions import (
    EmptyCollection,
    EmptySample,
    InstanceTooLarge,
    InvalidOrder,
    NonFiniteValue,
    OutOfRange,
)

ORACLE_MAX_CELLS = 10_000
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuantileFunction:
    """Left-continuous step quantile function.

    ``Q(t) = levels[k]`` for ``breakpoints[k-1] < t <= breakpoints[k]``
    (with ``breakpoints[-1] == 0``).
    """

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        bp = _readonly(self.breakpoints)
        lv = _readonly(self.levels)
        if bp.ndim != 1 or bp.shape != lv.shape or bp.size == 0:
            raise ValueError("breakpoints and levels must be 1D arrays of equal, nonzero length")
        if bp[-1] != 1.0 or bp[0] <= 0.0 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must increase strictly within (0, 1] and end at 1")
        if np.any(np.diff(lv) < 0):
            raise ValueError("quantile levels must be nondecreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t <= 0) | (t > 1)):
            raise OutOfRange("quantile level must lie in (0, 1]")
        return self.levels[np.searchsorted(self.breakpoints, t, side="left")]

    @property
    def weights(self):
        """Lengths of the constant pieces."""
        return np.diff(self.breakpoints, prepend=0.0)

    def equals(self, other, atol=0.0):
        return (
            self.breakpoints.shape == other.breakpoints.shape
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.allclose(self.levels, other.levels, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Sorted sample; the uniform measure on its values."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise EmptySample("an empirical distribution needs at least one value")
        if np.any(np.diff(v) < 0):
            raise ValueError("values must be sorted ascending; use from_samples")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n(self):
        return self.values.size

    def quantile_function(self):
        n = self.n
        return QuantileFunction(np.arange(1, n + 1) / n, self.values)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"EmpiricalDistribution(n={self.n})"


def from_samples(raw):
    """Build an :class:`EmpiricalDistribution` from raw, unsorted values."""
    a = np.asarray(raw, dtype=float).ravel()
    if a.size == 0:
        raise EmptySample("sample is empty")
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue("sample contains NaN or infinite values")
    return EmpiricalDistribution(np.sort(a, kind="stable"))


def _as_distribution(d):
    return d if isinstance(d, EmpiricalDistribution) else from_samples(d)


def _as_quantile(q):
    if isinstance(q, QuantileFunction):
        return q
    return _as_distribution(q).quantile_function()


def quantile(d, t):
    """Generalized inverse ``x_(ceil(n t))`` of an empirical distribution."""
    d = _as_distribution(d)
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr <= 0) | (t_arr > 1)) or np.any(np.isnan(t_arr)):
        raise OutOfRange(f"t must lie in (0, 1], got {t!r}")
    out = d.quantile_function()(t_arr)
    return float(out) if out.ndim == 0 else out


def merge_quantiles(qs):
    """Put several quantile functions on their common breakpoint grid.

    Returns
    -------
    weights : ndarray, shape (K,)
        Lengths of the cells of the merged grid (they sum to one).
    levels : ndarray, shape (J, K)
        Value of each quantile function on each cell.
    breakpoints : ndarray, shape (K,)
    """
    qs = [_as_quantile(q) for q in qs]
    if not qs:
        raise EmptyCollection("no quantile functions given")
    first = qs[0].breakpoints
    if all(q.breakpoints.shape == first.shape and np.array_equal(q.breakpoints, first) for q in qs):
        bp = first
        levels = np.stack([q.levels for q in qs])
    else:
        bp = np.unique(np.concatenate([q.breakpoints for q in qs]))
        idx = [np.searchsorted(q.breakpoints, bp, side="left") for q in qs]
        levels = np.stack([q.levels[i] for q, i in zip(qs, idx)])
    weights = np.diff(bp, prepend=0.0)
    return weights, levels, bp


def _check_order(r):
    r = float(r)
    if not r >= 1.0:
        raise InvalidOrder(f"Wasserstein order must be >= 1, got {r}")
    return r


def wasserstein_r(a, b, r=2.0):
    """Wasserstein distance of order ``r`` between two 1D distributions.

    Accepts :class:`EmpiricalDistribution`, :class:`QuantileFunction` or raw
    sample arrays.
    """
    r = _check_order(r)
    if (
        isinstance(a, EmpiricalDistribution)
        and isinstance(b, EmpiricalDistribution)
        and a.n == b.n
    ):
        diff = np.abs(a.values - b.values)
        w = None
    else:
        w, levels, _ = merge_quantiles([a, b])
        diff = np.abs(levels[0] - levels[1])
    if r == 1.0:
        cost = diff.mean() if w is None else float(w @ diff)
        return float(cost)
    scale = diff.max()
    if scale == 0.0:
        return 0.0
    # normalize before powering so large r neither overflows nor underflows
    d = diff / scale
    cost = (d**r).mean() if w is None else float(w @ d**r)
    return float(scale * cost ** (1.0 / r))


def barycenter_quantile(qs):
    """Quantile function of the W2 barycenter: the pointwise average."""
    qs = [_as_quantile(q) for q in qs]
    if not qs:
        raise EmptyCollection("barycenter of an empty collection")
    if len(qs) == 1:
        return qs[0]
    _, levels, bp = merge_quantiles(qs)
    mean = levels.mean(axis=0)
    # averaging nondecreasing rows can only break monotonicity by rounding
    return QuantileFunction(bp, np.maximum.accumulate(mean))


def _golden_section_columns(levels, r, tol):
    """Per-column minimizer of ``z -> mean_j |levels[j] - z|**r``."""
    lo = levels.min(axis=0).copy()
    hi = levels.max(axis=0).copy()

    def f(z):
        return np.mean(np.abs(levels - z) ** r, axis=0)

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    scale = np.maximum(1.0, np.abs(levels).max(axis=0))
    for _ in range(400):
        if np.all(hi - lo <= tol * scale):
            break
        left = f1 < f2
        # shrink towards the smaller value, reusing one interior point
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        nx1 = np.where(left, hi - _GOLDEN * (hi - lo), x2)
        nx2 = np.where(left, x1, lo + _GOLDEN * (hi - lo))
        nf1 = np.where(left, f(nx1), f2)
        nf2 = np.where(left, f1, f(nx2))
        x1, x2, f1, f2 = nx1, nx2, nf1, nf2
    return 0.5 * (lo + hi)


def frechet_levels(levels, r, tol=1e-10):
    """Per-level center minimizing the average ``r``-th power deviation."""
    if r == 2.0:
        return levels.mean(axis=0)
    if r == 1.0:
        return np.median(levels, axis=0)
    return _golden_section_columns(levels, r, tol)


def _variation_parts(ds, r):
    r = _check_order(r)
    ds = list(ds)
    if len(ds) < 2:
        raise EmptyCollection("variation needs at least two distributions")
    w, levels, bp = merge_quantiles(ds)
    center = frechet_levels(levels, r)
    dev = np.mean(np.abs(levels - center) ** r, axis=0)
    return r, w, levels, bp, center, float(w @ dev)


def variation_r(ds, r=2.0):
    """Wasserstein ``r``-variation of a collection of 1D distributions."""
    r, *_, vr = _variation_parts(ds, r)
    return max(vr, 0.0) ** (1.0 / r)


def variation_squared(ds):
    """``V_2**2``, without the square root round trip."""
    *_, v2 = _variation_parts(ds, 2.0)
    return v2


def frechet_mean(ds, r=2.0):
    """Quantile function of a measure attaining the ``r``-variation."""
    _, _, _, bp, center, _ = _variation_parts(ds, r)
    return QuantileFunction(bp, np.maximum.accumulate(center))


def _T(points, r):
    """``min_z mean_j |y_j - z|**r`` for each row of ``points``."""
    if r == 2.0:
        z = points.mean(axis=1, keepdims=True)
    else:
        z = np.median(points, axis=1, keepdims=True)
    return np.mean(np.abs(points - z) ** r, axis=1)


def multimarginal_variation_oracle(ds, r=2):
    """Brute-force ``V_r**r`` by optimizing over all couplings.

    Solves the multimarginal transport problem directly, without using the
    1D comonotone structure: permutations for two equal-size samples (the
    vertices of the Birkhoff polytope), a dense linear program otherwise.
    Only meant for tiny instances.
    """
    r = float(r)
    if r not in (1.0, 2.0):
        raise InvalidOrder("the coupling oracle supports r in {1, 2}")
    ds = [_as_distribution(d) for d in ds]
    if not ds:
        raise EmptyCollection("no distributions given")
    sizes = [d.n for d in ds]
    cells = math.prod(sizes)
    if cells > ORACLE_MAX_CELLS:
        raise InstanceTooLarge(f"{cells} coupling cells exceed the cap of {ORACLE_MAX_CELLS}")
    J = len(ds)
    if J == 1:
        return 0.0
    grids = np.array(list(itertools.product(*[range(n) for n in sizes])))
    points = np.stack([ds[j].values[grids[:, j]] for j in range(J)], axis=1)
    cost = _T(points, r)
    if J == 2 and sizes[0] == sizes[1] and sizes[0] <= 8:
        n = sizes[0]
        C = cost.reshape(n, n)
        best = min(C[np.arange(n), perm].sum() for perm in itertools.permutations(range(n)))
        return float(best / n)
    rows = []
    rhs = []
    for j, n in enumerate(sizes):
        for i in range(n):
            rows.append((grids[:, j] == i).astype(float))
            rhs.append(1.0 / n)
    A_eq = np.array(rows)
    res = linprog(
        cost,
        A_eq=A_eq,
        b_eq=np.array(rhs),
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"coupling LP failed: {res.message}")
    return float(cost @ np.clip(res.x, 0.0, None))


def resample(d, m, stream):
    """Draw ``m`` values with replacement from ``d`` using ``stream``."""
    d = _as_distribution(d)
    m = int(m)
    if m < 1:
        raise ValueError("resample size must be at least 1")
    idx = stream.integers(0, d.n, size=m)
    return EmpiricalDistribution(np.sort(d.values[idx]))
