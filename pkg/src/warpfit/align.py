"""Empirical alignment cost and its minimization over a parametric family."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .deform import ParameterVector, get_family, push_quantile
from .empirical import _as_distribution, merge_quantiles, variation_squared
from .exceptions import DegenerateDenominator, EmptyCollection, NoConvergenceWarning

# coefficient-space tie tolerance for the exact solve, relative to the cost
_TIE_RTOL = 1e-12
_BOX_ATOL = 1e-12
_CHUNK_FLOATS = 4_000_000


@dataclass
class OptimizerConfig:
    """Settings for :func:`minimize_alignment`.

    ``method="auto"`` solves exactly when the family is affine in a
    reparametrization and the solution lies in the box, and falls back to
    multi-start Nelder-Mead otherwise. ``method="nelder-mead"`` always
    searches.
    """

    method: str = "auto"
    ftol: float = 1e-10
    xtol: float = 1e-8
    budget_per_dim: int = 2000
    n_starts: int = 5
    seed: int = 0
    n_jobs: int = 1


@dataclass
class AlignmentResult:
    theta_hat: ParameterVector
    cost: float
    evaluations: int
    converged: bool
    restarts_used: int
    method: str = "exact"


def _sample_arrays(ds):
    ds = [_as_distribution(d) for d in ds]
    if len(ds) < 2:
        raise EmptyCollection("alignment needs at least two samples")
    return ds


def _resolve_ref(ref_index, J):
    ref = J - 1 if ref_index is None else int(ref_index)
    if ref < 0:
        ref += J
    if not 0 <= ref < J:
        raise ValueError(f"reference index {ref_index} out of range for J={J}")
    return ref


def alignment_cost(ds, fam, theta):
    """``V_2**2`` of the samples after warping sample ``j`` by ``theta[j]``."""
    fam = get_family(fam)
    ds = _sample_arrays(ds)
    thetas = theta.thetas if isinstance(theta, ParameterVector) else np.asarray(theta, dtype=float)
    thetas = np.asarray(thetas, dtype=float).reshape(len(ds), fam.param_dim)
    pushed = [push_quantile(d, fam, lam) for d, lam in zip(ds, thetas)]
    return variation_squared(pushed)


def _cost_on_grid(levels, weights, fam, thetas):
    # levels: (J, K) data quantiles on the merged grid
    q = np.stack([np.maximum.accumulate(fam.apply(lam, row)) for lam, row in zip(thetas, levels)])
    dev = np.mean(np.abs(q - q.mean(axis=0)) ** 2, axis=0)
    return float(weights @ dev)


def _linear_solve(levels, weights, fam, ref_index, ref_value):
    """Exact minimizer for families affine in their coefficients.

    Parameters
    ----------
    levels : ndarray, shape (B, J, K)
        Sorted samples (or merged-grid quantile levels) for ``B`` problems.
    weights : ndarray, shape (K,)

    Returns
    -------
    coefs : ndarray, shape (B, J - 1, n_coef)
    costs : ndarray, shape (B,)
    """
    lf = fam.linear_form
    B, J, K = levels.shape
    k = lf.n_coef
    free = [j for j in range(J) if j != ref_index]
    P = k * (J - 1)
    z0 = np.tile(lf.coef(fam.identity), J - 1)
    ref_coef = lf.coef(ref_value)
    coefs = np.empty((B, J - 1, k))
    costs = np.empty(B)
    sw = np.sqrt(weights)[None, :, None]
    chunk = max(1, _CHUNK_FLOATS // max(1, K * J * P))
    for start in range(0, B, chunk):
        L = levels[start : start + chunk]
        b = L.shape[0]
        phi = np.zeros((b, K, J, P))
        g = lf.offset(L).transpose(0, 2, 1).copy()
        for slot, j in enumerate(free):
            phi[:, :, j, slot * k : (slot + 1) * k] = lf.basis(L[:, j, :])
        g[:, :, ref_index] += lf.basis(L[:, ref_index, :]) @ ref_coef
        phi -= phi.mean(axis=2, keepdims=True)
        g -= g.mean(axis=2, keepdims=True)
        phi *= sw[..., None]
        g *= sw
        G = np.einsum("bkjp,bkjq->bpq", phi, phi)
        h = np.einsum("bkjp,bkj->bp", phi, g)
        # among minimizers, the one closest to the identity coefficients
        rhs = -h - np.einsum("bpq,q->bp", G, z0)
        z = z0 + np.einsum("bpq,bq->bp", np.linalg.pinv(G, rcond=1e-13, hermitian=True), rhs)
        resid = np.einsum("bkjp,bp->bkj", phi, z) + g
        costs[start : start + b] = np.einsum("bkj,bkj->b", resid, resid) / J
        coefs[start : start + b] = z.reshape(b, J - 1, k)
    return coefs, costs


def _coefs_to_thetas(fam, coefs, ref_index, ref_value):
    """Map exact-solve coefficients to parameters; ``None`` if outside the box."""
    lf = fam.linear_form
    blocks = []
    for c in coefs:
        lam = lf.param(c)
        if not np.all(np.isfinite(lam)) or not fam.in_box(lam, atol=_BOX_ATOL):
            return None
        blocks.append(fam.project(lam))
    return np.insert(np.array(blocks), ref_index, ref_value, axis=0)


def _lhs_starts(fam, J, n, seed):
    d = fam.param_dim * (J - 1)
    if n <= 0:
        return np.empty((0, d))
    sampler = qmc.LatinHypercube(d=d, seed=np.random.default_rng(seed))
    lo = np.tile(fam.lower, J - 1)
    hi = np.tile(fam.upper, J - 1)
    return qmc.scale(sampler.random(n), lo, hi) if np.all(hi > lo) else np.tile(lo, (n, 1))


def _nelder_mead(levels, weights, fam, ref_index, ref_value, config, warm):
    J = levels.shape[0]
    p = fam.param_dim
    lo = np.tile(fam.lower, J - 1)
    hi = np.tile(fam.upper, J - 1)
    budget = int(config.budget_per_dim) * p * (J - 1)
    starts = [np.delete(warm, ref_index, axis=0).ravel()]
    starts += list(_lhs_starts(fam, J, config.n_starts - 1, config.seed))

    def run(x0):
        best = [np.inf, None]
        count = [0]

        def f(z):
            # evaluate at the projection onto the box; the penalty keeps the
            # simplex from collapsing onto a face (scipy's own bound
            # handling clips vertices there and reports false convergence)
            zc = np.clip(z, lo, hi)
            th = np.insert(zc.reshape(J - 1, p), ref_index, ref_value, axis=0)
            val = _cost_on_grid(levels, weights, fam, th)
            count[0] += 1
            if val < best[0]:
                best[0], best[1] = val, zc.copy()
            gap = float(np.sum((z - zc) ** 2))
            return val + gap * (1.0 + abs(val))

        res = minimize(
            f,
            np.clip(x0, lo, hi),
            method="Nelder-Mead",
            options={"xatol": config.xtol, "fatol": config.ftol, "maxfev": budget},
        )
        return best[0], best[1], bool(res.success), count[0]

    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as ex:
            runs = list(ex.map(run, starts))
    else:
        runs = [run(x0) for x0 in starts]
    return runs


def _pick(runs, fam, J):
    """Winner by cost; near-ties go to the point closest to the identity."""
    best_cost = min(r[0] for r in runs)
    tol = _TIE_RTOL * max(1.0, abs(best_cost))
    ident = np.tile(fam.identity, J - 1)
    tied = [i for i, r in enumerate(runs) if r[0] <= best_cost + tol]
    return min(tied, key=lambda i: (float(np.linalg.norm(runs[i][1] - ident)), i))


def minimize_alignment(ds, fam, ref_index=None, config=None, ref_value=None):
    """Minimal alignment cost of ``ds`` over ``fam`` with one sample pinned.

    Parameters
    ----------
    ds : sequence of EmpiricalDistribution or array_like
    fam : DeformationFamily or str
    ref_index : int, optional
        Sample whose parameters are pinned; defaults to the last one.
    config : OptimizerConfig, optional
    ref_value : array_like, optional
        Pinned parameter value; defaults to the family identity.

    Returns
    -------
    AlignmentResult
    """
    fam = get_family(fam)
    config = config or OptimizerConfig()
    ds = _sample_arrays(ds)
    J = len(ds)
    ref = _resolve_ref(ref_index, J)
    ref_value = fam.identity if ref_value is None else fam.check_param(ref_value)
    weights, levels, _ = merge_quantiles(ds)

    if config.method == "auto" and fam.linear_form is not None:
        coefs, _ = _linear_solve(levels[None], weights, fam, ref, ref_value)
        thetas = _coefs_to_thetas(fam, coefs[0], ref, ref_value)
        if thetas is not None:
            theta = ParameterVector(thetas, ref, ref_value)
            cost = alignment_cost(ds, fam, theta)
            return AlignmentResult(theta, cost, 1, True, 0, "exact")
    elif config.method not in ("auto", "nelder-mead"):
        raise ValueError(f"unknown optimizer method {config.method!r}")

    warm = fam.warm_start([d.values for d in ds], ref, ref_value)
    warm[ref] = ref_value
    runs = _nelder_mead(levels, weights, fam, ref, ref_value, config, warm)
    win = _pick(runs, fam, J)
    cost, z, converged, _ = runs[win]
    theta = ParameterVector.from_free(z, ref, ref_value, J)
    evaluations = sum(r[3] for r in runs)
    if not converged:
        warnings.warn(
            "Nelder-Mead budget exhausted before reaching tolerance", NoConvergenceWarning, stacklevel=2
        )
    return AlignmentResult(theta, cost, evaluations, converged, len(runs), "nelder-mead")


def batch_alignment_costs(samples, fam, ref_index=None, config=None, ref_value=None):
    """Minimal alignment costs for a stack of equal-size problems.

    Parameters
    ----------
    samples : ndarray, shape (B, J, m)
        Each ``samples[b, j]`` sorted ascending.

    Returns
    -------
    costs : ndarray, shape (B,)
    n_failed : int
        Problems whose optimizer did not converge (their best cost is kept).
    """
    fam = get_family(fam)
    config = config or OptimizerConfig()
    samples = np.asarray(samples, dtype=float)
    B, J, m = samples.shape
    ref = _resolve_ref(ref_index, J)
    ref_value = fam.identity if ref_value is None else fam.check_param(ref_value)
    costs = np.empty(B)
    todo = list(range(B))
    if config.method == "auto" and fam.linear_form is not None:
        weights = np.full(m, 1.0 / m)
        coefs, exact = _linear_solve(samples, weights, fam, ref, ref_value)
        todo = []
        for b in range(B):
            if _coefs_to_thetas(fam, coefs[b], ref, ref_value) is None:
                todo.append(b)
            else:
                costs[b] = max(exact[b], 0.0)
    n_failed = 0
    for b in todo:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoConvergenceWarning)
            res = minimize_alignment(list(samples[b]), fam, ref, config, ref_value)
        costs[b] = res.cost
        n_failed += not res.converged
    return costs, n_failed


def scale_closed_form(d1, d2):
    """Scale factor for sample 2 minimizing the alignment cost to sample 1."""
    w, levels, _ = merge_quantiles([d1, d2])
    den = float(w @ levels[1] ** 2)
    if den == 0.0:
        raise DegenerateDenominator("second sample is identically zero")
    return float(w @ (levels[0] * levels[1])) / den
