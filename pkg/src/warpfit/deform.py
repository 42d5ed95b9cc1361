"""Parametric warping families and the parameter vectors that index them.

A family maps data to the common scale: ``apply(lam, X_j)`` is meant to be
distributed like the shared error law when ``lam`` is the true parameter of
sample ``j``. Location-scale therefore applies ``(x - mu) / sigma``.

Families whose warped value is affine in some reparametrization of ``lam``
(``apply(lam, x) = offset(x) + basis(x) @ coef(lam)``) expose that structure
through :class:`LinearForm`; the alignment code uses it for an exact solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .empirical import QuantileFunction, _as_distribution
from .exceptions import ParamOutOfBox


@dataclass(frozen=True)
class LinearForm:
    """``apply(lam, x) == offset(x) + basis(x) @ coef(lam)``.

    ``param`` is the inverse of ``coef``; it may return parameters outside
    the family box, which callers must check.
    """

    offset: callable
    basis: callable
    coef: callable
    param: callable
    n_coef: int


class DeformationFamily:
    """Base class for a family of increasing warpings ``x -> apply(lam, x)``.

    Subclasses define ``apply``, ``inverse``, ``dx``, ``dparam`` and
    ``dparam2``, all vectorized over ``x``. ``dparam`` returns shape
    ``x.shape + (p,)`` and ``dparam2`` shape ``x.shape + (p, p)``.
    """

    name = "family"
    linear_form = None

    def __init__(self, lower, upper, identity):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        self.identity = np.atleast_1d(np.asarray(identity, dtype=float))
        if not (self.lower.shape == self.upper.shape == self.identity.shape):
            raise ValueError("bounds and identity must have the same length")
        if np.any(self.lower > self.upper):
            raise ValueError("empty parameter box")

    @property
    def param_dim(self):
        return self.lower.size

    @property
    def param_box(self):
        return np.column_stack([self.lower, self.upper])

    def in_box(self, lam, atol=0.0):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        return bool(np.all(lam >= self.lower - atol) and np.all(lam <= self.upper + atol))

    def check_param(self, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.shape != self.lower.shape:
            raise ParamOutOfBox(f"expected {self.param_dim} parameters, got {lam.shape}")
        if not self.in_box(lam):
            raise ParamOutOfBox(f"parameter {lam} outside the box {self.param_box.tolist()}")
        return lam

    def project(self, lam):
        return np.clip(lam, self.lower, self.upper)

    def warm_start(self, samples, ref_index, ref_value):
        """Data-driven starting parameters; defaults to the identity."""
        return np.tile(self.identity, (len(samples), 1))

    def __repr__(self):
        return f"{type(self).__name__}(box={self.param_box.tolist()})"

    def apply(self, lam, x):
        raise NotImplementedError

    def inverse(self, lam, y):
        raise NotImplementedError

    def dx(self, lam, x):
        raise NotImplementedError

    def dparam(self, lam, x):
        raise NotImplementedError

    def dparam2(self, lam, x):
        raise NotImplementedError


class LocationScaleFamily(DeformationFamily):
    """``(x - mu) / sigma`` with ``lam = (mu, sigma)``."""

    name = "location-scale"

    def __init__(self, mu_bounds=(-100.0, 100.0), sigma_bounds=(1e-2, 100.0)):
        if sigma_bounds[0] <= 0:
            raise ValueError("sigma must be bounded away from zero")
        super().__init__(
            [mu_bounds[0], sigma_bounds[0]], [mu_bounds[1], sigma_bounds[1]], [0.0, 1.0]
        )
        self.linear_form = LinearForm(
            offset=np.zeros_like,
            basis=lambda x: np.stack([x, np.ones_like(x)], axis=-1),
            coef=lambda lam: np.array([1.0 / lam[1], -lam[0] / lam[1]]),
            param=_locscale_from_coef,
            n_coef=2,
        )

    def apply(self, lam, x):
        return (np.asarray(x, dtype=float) - lam[0]) / lam[1]

    def inverse(self, lam, y):
        return lam[0] + lam[1] * np.asarray(y, dtype=float)

    def dx(self, lam, x):
        return np.full_like(np.asarray(x, dtype=float), 1.0 / lam[1])

    def dparam(self, lam, x):
        x = np.asarray(x, dtype=float)
        mu, s = lam
        return np.stack([np.full_like(x, -1.0 / s), -(x - mu) / s**2], axis=-1)

    def dparam2(self, lam, x):
        x = np.asarray(x, dtype=float)
        mu, s = lam
        out = np.zeros(x.shape + (2, 2))
        out[..., 0, 1] = out[..., 1, 0] = 1.0 / s**2
        out[..., 1, 1] = 2.0 * (x - mu) / s**3
        return out

    def warm_start(self, samples, ref_index, ref_value):
        # match mean and standard deviation to the pinned reference
        ref = samples[ref_index]
        target_mean = (ref.mean() - ref_value[0]) / ref_value[1]
        target_sd = ref.std() / ref_value[1]
        out = []
        for x in samples:
            sd = x.std()
            sigma = sd / target_sd if sd > 0 and target_sd > 0 else 1.0
            out.append([x.mean() - sigma * target_mean, sigma])
        return self.project(np.array(out))


def _locscale_from_coef(c):
    if c[0] == 0:
        return np.array([np.nan, np.inf])
    sigma = 1.0 / c[0]
    return np.array([-c[1] * sigma, sigma])


def _first(lam):
    # one-parameter families accept a scalar or a length-1 vector
    return float(np.asarray(lam, dtype=float).reshape(-1)[0])


class ScaleFamily(DeformationFamily):
    """``sigma * x`` with ``lam = (sigma,)``."""

    name = "scale"

    def __init__(self, sigma_bounds=(1e-2, 100.0)):
        if sigma_bounds[0] <= 0:
            raise ValueError("sigma must be positive")
        super().__init__([sigma_bounds[0]], [sigma_bounds[1]], [1.0])
        self.linear_form = LinearForm(
            offset=np.zeros_like,
            basis=lambda x: x[..., None],
            coef=lambda lam: np.array([lam[0]]),
            param=lambda c: np.array([c[0]]),
            n_coef=1,
        )

    def apply(self, lam, x):
        return _first(lam) * np.asarray(x, dtype=float)

    def inverse(self, lam, y):
        return np.asarray(y, dtype=float) / _first(lam)

    def dx(self, lam, x):
        return np.full_like(np.asarray(x, dtype=float), _first(lam))

    def dparam(self, lam, x):
        return np.asarray(x, dtype=float)[..., None].copy()

    def dparam2(self, lam, x):
        return np.zeros(np.shape(x) + (1, 1))


class LocationFamily(DeformationFamily):
    """``x - mu`` with ``lam = (mu,)``."""

    name = "location"

    def __init__(self, mu_bounds=(-100.0, 100.0)):
        super().__init__([mu_bounds[0]], [mu_bounds[1]], [0.0])
        self.linear_form = LinearForm(
            offset=lambda x: np.asarray(x, dtype=float).copy(),
            basis=lambda x: np.ones(np.shape(x) + (1,)),
            coef=lambda lam: np.array([-lam[0]]),
            param=lambda c: np.array([-c[0]]),
            n_coef=1,
        )

    def apply(self, lam, x):
        return np.asarray(x, dtype=float) - _first(lam)

    def inverse(self, lam, y):
        return np.asarray(y, dtype=float) + _first(lam)

    def dx(self, lam, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def dparam(self, lam, x):
        return -np.ones(np.shape(x) + (1,))

    def dparam2(self, lam, x):
        return np.zeros(np.shape(x) + (1, 1))


class FiniteDifferenceFamily(DeformationFamily):
    """Adapter that supplies derivatives of a user map by central differences.

    Parameters
    ----------
    apply, inverse : callable
        ``apply(lam, x)`` and its inverse in ``x``, vectorized over ``x``.
    lower, upper, identity : array_like
        Parameter box and the identity parameter.
    """

    name = "finite-difference"

    def __init__(self, apply, inverse, lower, upper, identity, name=None):
        super().__init__(lower, upper, identity)
        self._apply = apply
        self._inverse = inverse
        if name:
            self.name = name

    def _h(self, v):
        return 1e-5 * (1.0 + np.abs(v))

    def apply(self, lam, x):
        return self._apply(np.asarray(lam, dtype=float), np.asarray(x, dtype=float))

    def inverse(self, lam, y):
        return self._inverse(np.asarray(lam, dtype=float), np.asarray(y, dtype=float))

    def dx(self, lam, x):
        x = np.asarray(x, dtype=float)
        h = self._h(x)
        return (self.apply(lam, x + h) - self.apply(lam, x - h)) / (2 * h)

    def dparam(self, lam, x):
        lam = np.asarray(lam, dtype=float)
        cols = []
        for k in range(lam.size):
            e = np.zeros_like(lam)
            e[k] = self._h(lam[k])
            cols.append((self.apply(lam + e, x) - self.apply(lam - e, x)) / (2 * e[k]))
        return np.stack(cols, axis=-1)

    def dparam2(self, lam, x):
        lam = np.asarray(lam, dtype=float)
        p = lam.size
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (p, p))
        for k in range(p):
            e = np.zeros_like(lam)
            e[k] = self._h(lam[k])
            diff = (self.dparam(lam + e, x) - self.dparam(lam - e, x)) / (2 * e[k])
            out[..., k, :] = diff
        return 0.5 * (out + np.swapaxes(out, -1, -2))


_FAMILIES = {
    "location-scale": LocationScaleFamily,
    "scale": ScaleFamily,
    "location": LocationFamily,
}


def location_scale_family(mu_bounds=(-100.0, 100.0), sigma_bounds=(1e-2, 100.0)):
    return LocationScaleFamily(mu_bounds, sigma_bounds)


def scale_family(sigma_bounds=(1e-2, 100.0)):
    return ScaleFamily(sigma_bounds)


def location_family(mu_bounds=(-100.0, 100.0)):
    return LocationFamily(mu_bounds)


def get_family(family):
    """Resolve a family name (``"location-scale"``, ``"scale"``, ``"location"``)."""
    if isinstance(family, DeformationFamily):
        return family
    try:
        return _FAMILIES[str(family).lower().replace("_", "-")]()
    except KeyError:
        raise ValueError(
            f"unknown deformation family {family!r}; choose from {sorted(_FAMILIES)}"
        ) from None


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Parameters of all ``J`` samples, one block pinned for identifiability."""

    thetas: np.ndarray
    ref_index: int
    ref_value: np.ndarray = field(default=None)

    def __post_init__(self):
        th = np.array(self.thetas, dtype=float)
        if th.ndim == 1:
            th = th[:, None]
        J = th.shape[0]
        ref = int(self.ref_index)
        if ref < 0:
            ref += J
        if not 0 <= ref < J:
            raise ValueError(f"reference index {self.ref_index} out of range for J={J}")
        rv = th[ref].copy() if self.ref_value is None else np.atleast_1d(np.asarray(self.ref_value, dtype=float))
        if rv.shape != th[ref].shape:
            raise ValueError("reference value has the wrong dimension")
        th[ref] = rv
        th.setflags(write=False)
        rv.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "ref_index", ref)
        object.__setattr__(self, "ref_value", rv)

    @property
    def J(self):
        return self.thetas.shape[0]

    @property
    def free(self):
        """Free blocks, stacked, excluding the reference."""
        mask = np.arange(self.J) != self.ref_index
        return self.thetas[mask]

    @classmethod
    def from_free(cls, free, ref_index, ref_value, J):
        p = np.atleast_1d(ref_value).size
        free = np.asarray(free, dtype=float).reshape(J - 1, p)
        ref = ref_index % J
        th = np.insert(free, ref, ref_value, axis=0)
        return cls(th, ref, ref_value)

    def check(self, fam):
        for lam in self.thetas:
            fam.check_param(lam)
        return self

    def __repr__(self):
        return f"ParameterVector(thetas={self.thetas.tolist()}, ref_index={self.ref_index})"


def push_quantile(d, fam, lam):
    """Quantile function of the warped sample ``apply(lam, X)``."""
    lam = fam.check_param(lam)
    q = _as_distribution(d).quantile_function()
    levels = fam.apply(lam, q.levels)
    return QuantileFunction(q.breakpoints, np.maximum.accumulate(levels))


def psi(fam, theta_star, lam, x):
    """``apply(lam, inverse(theta_star, x))``; the identity at ``lam == theta_star``."""
    return fam.apply(lam, fam.inverse(theta_star, x))


def dpsi(fam, theta_star, lam, x):
    """Parameter gradient of :func:`psi`."""
    return fam.dparam(lam, fam.inverse(theta_star, x))


def dpsi2(fam, theta_star, lam, x):
    return fam.dparam2(lam, fam.inverse(theta_star, x))


def lipschitz_bound(fam, x_range, grid=64):
    """Largest ``dx`` over a lattice of the parameter box times ``x_range``.

    The lattice has ``grid`` points per parameter axis and ``grid`` points
    in ``x``; the value is a lower estimate of the true supremum.
    """
    grid = int(grid)
    if grid < 2:
        raise ValueError("grid must be at least 2")
    axes = [np.linspace(lo, hi, grid) for lo, hi in zip(fam.lower, fam.upper)]
    xs = np.linspace(float(x_range[0]), float(x_range[1]), grid)
    best = -np.inf
    for lam in np.array(np.meshgrid(*axes, indexing="ij")).reshape(fam.param_dim, -1).T:
        best = max(best, float(np.max(fam.dx(lam, xs))))
    return best
