"""Samplers and quadrature for the asymptotic laws of the alignment cost.

All integrals over ``(0, 1)`` use the interior grid ``t_k = k / (N + 1)``,
``k = 1..N`` and the trapezoid rule. Where the integrand is bounded near the
ends, the two truncated end pieces are filled with the nearest grid value
(``caps=True``), which makes constants integrate exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid
from scipy.linalg import cho_factor, cho_solve

from .deform import ParameterVector, dpsi, get_family
from .exceptions import QuadratureDivergence, SingularSigma
from .rng import as_stream

DEFAULT_N = 2047
_OVERFLOW = 1e150
_MAX_COND = 1e12


class ErrorDistribution:
    """Continuous error law ``G`` with density ``g`` and quantile ``G^{-1}``.

    Wraps a frozen :mod:`scipy.stats` distribution. ``tail_integrable``
    records whether ``int t(1-t) / g(G^{-1}(t))**2 dt`` is finite; when not
    given it is estimated numerically.
    """

    def __init__(self, frozen, name=None, tail_integrable=None):
        self.frozen = frozen
        self.name = name or frozen.dist.name
        if tail_integrable is None:
            tail_integrable = _looks_tail_integrable(self)
        self.tail_integrable = bool(tail_integrable)

    def __repr__(self):
        return f"ErrorDistribution({self.name})"

    def cdf(self, x):
        return self.frozen.cdf(x)

    def pdf(self, x):
        return self.frozen.pdf(x)

    def ppf(self, t):
        return self.frozen.ppf(t)

    def density_at_quantile(self, t):
        return self.frozen.pdf(self.frozen.ppf(t))

    def sample(self, size, stream):
        """Inverse-CDF draws from the stream's uniforms."""
        u = stream.uniform(size)
        # uniform draws lie in [0, 1); keep ppf away from the point 0
        u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
        return self.frozen.ppf(u)

    @classmethod
    def uniform(cls, a=0.0, b=1.0):
        return cls(stats.uniform(loc=a, scale=b - a), f"uniform({a:g},{b:g})", True)

    @classmethod
    def normal(cls, mu=0.0, sigma=1.0):
        return cls(stats.norm(loc=mu, scale=sigma), f"normal({mu:g},{sigma:g})", False)

    @classmethod
    def laplace(cls, mu=0.0, b=1.0):
        return cls(stats.laplace(loc=mu, scale=b), f"laplace({mu:g},{b:g})", False)

    @classmethod
    def exponential(cls, rate=1.0):
        return cls(stats.expon(scale=1.0 / rate), f"exp({rate:g})", False)

    @classmethod
    def student_t(cls, df):
        return cls(stats.t(df), f"t({df:g})", False)


def _looks_tail_integrable(err):
    # compare truncations at 1e-4 and 1e-8: divergent integrals keep growing
    a = _weighted_variance_integral(err, 1e-4, 4097)
    b = _weighted_variance_integral(err, 1e-8, 16385)
    return np.isfinite(b) and b - a < 1e-2 * max(a, 1e-12)


def _weighted_variance_integral(err, lo, N):
    # log-spaced near the ends so small truncations are resolved
    half = np.geomspace(lo, 0.5, N // 2)
    t = np.unique(np.concatenate([half, 1.0 - half[::-1]]))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = t * (1 - t) / err.density_at_quantile(t) ** 2
    return float(trapezoid(f, t))


def interior_grid(N):
    N = int(N)
    if N < 1:
        raise ValueError("grid size must be at least 1")
    return np.arange(1, N + 1) / (N + 1)


def quadrature_weights(N, caps=True):
    """Trapezoid weights on :func:`interior_grid`, optionally with end caps."""
    h = 1.0 / (N + 1)
    w = np.full(N, h)
    w[0] = w[-1] = h / 2 if N > 1 else 0.0
    if caps:
        w[0] += h
        w[-1] += h
    return w


@dataclass(frozen=True, eq=False)
class BridgePath:
    grid: np.ndarray
    values: np.ndarray


def sample_bridge(N, stream, size=None):
    """Brownian bridge ``W(t) - t W(1)`` on :func:`interior_grid`.

    With ``size``, ``values`` has shape ``(size, N)``.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    stream = as_stream(stream)
    t = interior_grid(N)
    shape = (N + 1,) if size is None else (int(size), N + 1)
    inc = stream.normal(shape) * np.sqrt(1.0 / (N + 1))
    W = np.cumsum(inc, axis=-1)
    values = W[..., :N] - t * W[..., N : N + 1]
    return BridgePath(t, values)


def _dpsi_on_grid(fam, theta_star, t, err):
    x = err.ppf(t)
    return np.stack([dpsi(fam, lam, lam, x) for lam in theta_star.thetas])  # (J, N, p)


def _check_finite(a, what):
    if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > _OVERFLOW:
        raise QuadratureDivergence(f"{what} is not finite on the quadrature grid")


def sigma_matrix(fam, theta_star, err, N=DEFAULT_N, pinned=True):
    """Curvature matrix of the population alignment cost at ``theta_star``.

    Returns the ``pJ x pJ`` matrix, or with ``pinned`` the
    ``p(J-1) x p(J-1)`` matrix with the reference block removed.
    """
    fam = get_family(fam)
    N = int(N)
    if N < 16:
        raise ValueError("use at least 16 quadrature points")
    if not isinstance(theta_star, ParameterVector):
        theta_star = ParameterVector(theta_star, -1)
    J = theta_star.J
    p = fam.param_dim
    t = interior_grid(N)
    D = _dpsi_on_grid(fam, theta_star, t, err)
    _check_finite(D, "parameter derivative")
    w = quadrature_weights(N, caps=True)
    inner = np.einsum("n,inp,jnq->ijpq", w, D, D)  # (J, J, p, p)
    S = -2.0 / J**2 * inner
    for i in range(J):
        S[i, i] = 2.0 * (J - 1) / J**2 * inner[i, i]
    full = S.transpose(0, 2, 1, 3).reshape(J * p, J * p)
    full = 0.5 * (full + full.T)
    if pinned:
        keep = np.ones(J * p, dtype=bool)
        keep[theta_star.ref_index * p : (theta_star.ref_index + 1) * p] = False
        full = full[np.ix_(keep, keep)]
    return full


def _factor(sigma):
    cond = np.linalg.cond(sigma)
    if not np.isfinite(cond) or cond > _MAX_COND:
        raise SingularSigma(f"curvature matrix is singular (condition number {cond:.3g})")
    return cho_factor(sigma)


def sample_gof_limit(fam, theta_star, err, N=DEFAULT_N, J=None, stream=None, size=None,
                     centered=False):
    """Draws from the limit law of ``n * A_n`` under the deformation model.

    Parameters
    ----------
    fam : DeformationFamily or str
    theta_star : ParameterVector
        True parameters; its ``ref_index`` is the pinned sample.
    err : ErrorDistribution
    N : int
        Quadrature grid size.
    J : int, optional
        Checked against ``theta_star`` when given.
    stream : RandomStream or int
    size : int, optional
        Number of draws; a scalar is returned when omitted.
    centered : bool
        Use the centered functional, whose target is
        ``n * A_n - (J - 1) * c_n / J**2``. Required when the error law
        has tails too heavy for the plain functional (e.g. Gaussian).
    """
    fam = get_family(fam)
    if not isinstance(theta_star, ParameterVector):
        theta_star = ParameterVector(theta_star, -1)
    if J is not None and int(J) != theta_star.J:
        raise ValueError("J does not match theta_star")
    J = theta_star.J
    if not centered and not err.tail_integrable:
        raise QuadratureDivergence(
            f"the limit functional diverges for {err.name}; pass centered=True"
        )
    stream = as_stream(stream)
    t = interior_grid(N)
    w = quadrature_weights(N, caps=False)
    gq = err.density_at_quantile(t)
    _check_finite(1.0 / gq, "inverse density")
    D = _dpsi_on_grid(fam, theta_star, t, err)  # (J, N, p)
    factor = _factor(sigma_matrix(fam, theta_star, err, N, pinned=True))
    keep = [j for j in range(J) if j != theta_star.ref_index]
    total = 1 if size is None else int(size)
    out = np.empty(total)
    chunk = max(1, 2_000_000 // (J * N))
    done = 0
    while done < total:
        b = min(chunk, total - done)
        B = sample_bridge(N, stream, size=b * J).values.reshape(b, J, N)
        Bt = B - B.mean(axis=1, keepdims=True)
        sq = Bt**2
        if centered:
            sq = sq - (J - 1) / J * t * (1 - t)
        quad = (sq / gq**2) @ w  # (b, J)
        first = quad.mean(axis=1)
        Y = 2.0 / J * np.einsum("n,bjn,jnp->bjp", w / gq, Bt, D)
        Yt = Y[:, keep, :].reshape(b, -1)
        second = 0.5 * np.einsum("bp,bp->b", Yt, cho_solve(factor, Yt.T).T)
        out[done : done + b] = first - second
        done += b
    return float(out[0]) if size is None else out


def centering_constant(err, n, N=DEFAULT_N):
    """``int_{1/n}^{1-1/n} t(1-t) / g(G^{-1}(t))**2 dt`` by the trapezoid rule."""
    n = int(n)
    if n < 2:
        raise ValueError("n must be at least 2")
    lo, hi = 1.0 / n, 1.0 - 1.0 / n
    if hi <= lo:
        return 0.0
    t = np.linspace(lo, hi, int(N))
    f = t * (1 - t) / err.density_at_quantile(t) ** 2
    _check_finite(f, "centering integrand")
    h = (hi - lo) / (t.size - 1)
    return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))


def _warp_parts(warp, x):
    # returns (phi(x), phi'(x)) for None, (family, lam) or (phi, dphi) pairs
    if warp is None:
        return x, np.ones_like(x)
    a, b = warp
    if hasattr(a, "apply"):
        lam = np.atleast_1d(np.asarray(b, dtype=float))
        return a.apply(lam, x), a.dx(lam, x)
    return a(x), b(x)


def bridge_functional_variance(a, w):
    """``Var int B(t) a(t) dt`` for a Brownian bridge, by double quadrature."""
    t = interior_grid(a.size)
    K = np.minimum.outer(t, t) - np.outer(t, t)
    wa = w * a
    return float(wa @ K @ wa)


def nonpar_clt_variance(dists, warps=None, N=DEFAULT_N):
    """Variance of the Gaussian limit of ``sqrt(n) (A_n - A)`` at a fixed warping.

    Parameters
    ----------
    dists : sequence of ErrorDistribution
        Population laws ``F_j``.
    warps : sequence, optional
        Per-sample warping: ``None`` (identity), ``(family, lam)`` or a
        ``(phi, dphi)`` pair of callables.
    N : int
    """
    J = len(dists)
    warps = [None] * J if warps is None else list(warps)
    t = interior_grid(N)
    w = quadrature_weights(N, caps=True)
    comps = []
    for d, warp in zip(dists, warps):
        x = d.ppf(t)
        phi, dphi = _warp_parts(warp, x)
        comps.append((phi, dphi, d.density_at_quantile(t)))
    bary = np.mean([c[0] for c in comps], axis=0)
    total = 0.0
    for phi, dphi, f in comps:
        a = 2.0 * dphi * (phi - bary) / f
        _check_finite(a, "variance kernel")
        total += bridge_functional_variance(a, w)
    return max(total / J**2, 0.0)
