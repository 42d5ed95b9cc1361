"""scikit-learn style wrappers around the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .align import OptimizerConfig, alignment_cost, minimize_alignment
from .boot import BootstrapConfig, gof_test, threshold_test
from .deform import ParameterVector, get_family
from .empirical import EmpiricalDistribution, frechet_mean, from_samples, variation_r, wasserstein_r
from .exceptions import EmptyCollection


def check_samples(X, y=None, min_samples=2):
    """Validate input into a list of :class:`EmpiricalDistribution`.

    Accepted layouts:

    * ``X`` of shape ``(n, J)``: one sample per column, equal sizes;
    * ``X`` a sequence of 1D arrays or distributions (sizes may differ);
    * ``X`` of shape ``(N,)`` or ``(N, 1)`` with labels ``y`` of length
      ``N``: long form, samples ordered by first appearance of each label.
    """
    if y is not None:
        x = np.asarray(X, dtype=float)
        if x.ndim == 2 and x.shape[1] == 1:
            x = x[:, 0]
        if x.ndim != 1:
            raise ValueError("with labels, X must have shape (N,) or (N, 1)")
        y = np.asarray(y)
        if y.shape != x.shape:
            raise ValueError(f"X has {x.size} values but y has {y.size} labels")
        _, first, inv = np.unique(y, return_index=True, return_inverse=True)
        order = np.argsort(first)
        ds = [from_samples(x[inv == k]) for k in order]
    elif isinstance(X, np.ndarray) and X.ndim == 2:
        ds = [from_samples(col) for col in np.asarray(X, dtype=float).T]
    elif isinstance(X, np.ndarray):
        raise ValueError("X must be 2D (one column per sample) or given with labels y")
    else:
        ds = [d if isinstance(d, EmpiricalDistribution) else from_samples(d) for d in X]
    if len(ds) < min_samples:
        raise EmptyCollection(f"need at least {min_samples} samples, got {len(ds)}")
    return ds


class WassersteinVariation(BaseEstimator):
    """Wasserstein ``r``-variation of a collection of samples.

    Parameters
    ----------
    r : float, default=2.0

    Attributes
    ----------
    variation_ : float
    distances_ : ndarray of shape (J,)
        ``W_r`` from each sample to the barycenter.
    barycenter_ : QuantileFunction
    """

    def __init__(self, r=2.0):
        self.r = r

    def fit(self, X, y=None):
        ds = check_samples(X, y)
        self.barycenter_ = frechet_mean(ds, self.r)
        self.variation_ = variation_r(ds, self.r)
        self.distances_ = np.array([wasserstein_r(d, self.barycenter_, self.r) for d in ds])
        self.n_samples_ = len(ds)
        return self

    def score(self, X, y=None):
        """Negative variation of ``X`` (higher is more alike)."""
        return -variation_r(check_samples(X, y), self.r)


class WarpingAligner(TransformerMixin, BaseEstimator):
    """Fit per-sample warpings that minimize the alignment cost.

    Parameters
    ----------
    family : str or DeformationFamily, default="location-scale"
    ref_index : int, optional
        Pinned sample; the last one by default.
    optimizer : OptimizerConfig, optional

    Attributes
    ----------
    theta_ : ParameterVector
    cost_ : float
        Minimal alignment cost ``A_n``.
    n_samples_ : int
    """

    def __init__(self, family="location-scale", ref_index=None, optimizer=None):
        self.family = family
        self.ref_index = ref_index
        self.optimizer = optimizer

    def fit(self, X, y=None):
        ds = check_samples(X, y)
        self.family_ = get_family(self.family)
        res = minimize_alignment(ds, self.family_, self.ref_index, self.optimizer or OptimizerConfig())
        self.theta_ = res.theta_hat
        self.cost_ = res.cost
        self.converged_ = res.converged
        self.n_samples_ = len(ds)
        return self

    def _check_layout(self, ds):
        if len(ds) != self.n_samples_:
            raise ValueError(f"fitted on {self.n_samples_} samples, got {len(ds)}")

    def transform(self, X, y=None):
        """Warp each sample with its fitted parameters.

        Returns an array shaped like ``X`` for 2D input, else a list.
        """
        check_is_fitted(self, "theta_")
        ds = check_samples(X, y)
        self._check_layout(ds)
        if y is None and isinstance(X, np.ndarray) and X.ndim == 2:
            X = np.asarray(X, dtype=float)
            return np.column_stack(
                [self.family_.apply(lam, X[:, j]) for j, lam in enumerate(self.theta_.thetas)]
            )
        return [self.family_.apply(lam, d.values) for d, lam in zip(ds, self.theta_.thetas)]

    def inverse_transform(self, X):
        check_is_fitted(self, "theta_")
        X = np.asarray(X, dtype=float)
        return np.column_stack(
            [self.family_.inverse(lam, X[:, j]) for j, lam in enumerate(self.theta_.thetas)]
        )

    def score(self, X, y=None):
        """Negative alignment cost of ``X`` under the fitted parameters."""
        check_is_fitted(self, "theta_")
        ds = check_samples(X, y)
        self._check_layout(ds)
        return -alignment_cost(ds, self.family_, ParameterVector(self.theta_.thetas, self.theta_.ref_index))


class _BootstrapTest(BaseEstimator):
    def _config(self, default_exp):
        m_exp = default_exp if self.m_exponent is None and self.m is None else self.m_exponent
        return BootstrapConfig(B=self.B, m_exponent=m_exp, m=self.m, seed=self.seed,
                               alpha=self.alpha, scheme=self.scheme)

    def predict(self, X=None, y=None):
        """``1`` if the null hypothesis is rejected, else ``0``."""
        check_is_fitted(self, "report_")
        return int(self.report_.reject)


class DeformationGofTest(_BootstrapTest):
    """Bootstrap goodness-of-fit test of the deformation model.

    ``fit`` runs the test; the outcome is in ``report_`` (a
    :class:`~warpfit.boot.TestReport`), ``reject_`` and ``p_value_``.
    """

    def __init__(self, family="location-scale", ref_index=None, alpha=0.05, B=500,
                 m_exponent=0.9, m=None, seed=0, scheme=None, optimizer=None):
        self.family = family
        self.ref_index = ref_index
        self.alpha = alpha
        self.B = B
        self.m_exponent = m_exponent
        self.m = m
        self.seed = seed
        self.scheme = scheme
        self.optimizer = optimizer

    def fit(self, X, y=None):
        ds = check_samples(X, y)
        self.report_ = gof_test(ds, self.family, self.ref_index, self._config(0.9), self.optimizer)
        self.reject_ = self.report_.reject
        self.p_value_ = self.report_.p_value
        return self


class ThresholdTest(_BootstrapTest):
    """Bootstrap test of ``A >= delta0``; rejecting supports approximate fit."""

    def __init__(self, delta0=None, family="location-scale", ref_index=None, alpha=0.05, B=500,
                 m_exponent=0.5, m=None, seed=0, scheme=None, optimizer=None):
        self.delta0 = delta0
        self.family = family
        self.ref_index = ref_index
        self.alpha = alpha
        self.B = B
        self.m_exponent = m_exponent
        self.m = m
        self.seed = seed
        self.scheme = scheme
        self.optimizer = optimizer

    def fit(self, X, y=None):
        ds = check_samples(X, y)
        self.report_ = threshold_test(ds, self.family, self.ref_index, self.delta0,
                                      self._config(0.5), self.optimizer)
        self.reject_ = self.report_.reject
        self.p_value_ = self.report_.p_value
        return self
