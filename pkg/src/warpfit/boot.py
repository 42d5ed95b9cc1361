"""m-out-of-n bootstrap for the minimal alignment cost, and the two tests.

The goodness-of-fit test rejects the deformation model when ``n * A_n``
exceeds the ``(1 - alpha)`` bootstrap quantile of ``m * A*_m``. By default
its resamples are drawn from the pooled sample after each sample has been
warped onto the reference with the fitted parameters, so the bootstrap law
is computed under the null. The
threshold test rejects ``A >= delta0`` (i.e. finds evidence that the model
holds approximately) when ``sqrt(n) (A_n - delta0)`` falls below the
``alpha`` bootstrap quantile of ``sqrt(m) (A*_m - delta0)``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .align import OptimizerConfig, batch_alignment_costs, minimize_alignment
from .deform import get_family
from .empirical import _as_distribution
from .exceptions import EmptyStats, WarpfitError
from .rng import RandomStream

# guards ceil() against products like 500 * 0.95 = 474.99999999999994
_CEIL_EPS = 1e-9
_SCHEMES = (None, "pooled", "independent")


def _ceil(x):
    return int(math.ceil(x - _CEIL_EPS))


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings.

    Parameters
    ----------
    B : int
        Number of bootstrap replicates.
    m_exponent : float, optional
        Resample size rule ``m = ceil(n ** m_exponent)``.
    m : int, optional
        Explicit resample size; overrides ``m_exponent``.
    seed : int
    alpha : float
    scheme : {None, "pooled", "independent"}
        ``"independent"`` resamples every sample from its own empirical
        law. ``"pooled"`` warps the samples onto the reference with the
        fitted parameters and draws every resample from the pooled values.
        ``None`` picks ``"pooled"`` for the goodness-of-fit test and
        ``"independent"`` for the threshold test.
    """

    B: int = 500
    m_exponent: float | None = 0.9
    m: int | None = None
    seed: int = 0
    alpha: float = 0.05
    scheme: str | None = None

    def __post_init__(self):
        if int(self.B) < 1:
            raise ValueError("B must be at least 1")
        if not 0.0 < float(self.alpha) < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.m is None and self.m_exponent is None:
            raise ValueError("give either m or m_exponent")
        if self.m is not None and int(self.m) < 1:
            raise ValueError("m must be at least 1")
        if self.m_exponent is not None and not float(self.m_exponent) > 0:
            raise ValueError("m_exponent must be positive")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}")

    def resample_size(self, n):
        m = int(self.m) if self.m is not None else _ceil(n ** float(self.m_exponent))
        return max(1, min(m, int(n)))


@dataclass
class TestReport:
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    n: int
    m_n: int
    B: int
    seed: int
    kind: str
    alpha: float
    family: str = ""
    ref_index: int = -1
    A_n: float = float("nan")
    delta0: float | None = None
    failed_replicates: int = 0
    extra: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        d = asdict(self)
        d["reject"] = bool(d["reject"])
        return d


def _equal_size_samples(ds):
    ds = [_as_distribution(d) for d in ds]
    if len(ds) < 2:
        raise WarpfitError("tests need at least two samples")
    sizes = {d.n for d in ds}
    if len(sizes) != 1:
        raise WarpfitError("bootstrap tests require samples of equal size")
    return ds, ds[0].n


def resample_stack(ds, m, B, seed, pool=None):
    """Bootstrap resamples as an array of shape ``(B, J, m)``, rows sorted.

    Replicate ``b`` of sample ``j`` is drawn from the counter block
    ``(b, j)`` of ``RandomStream(seed)``, so any subset of replicates can be
    regenerated independently. With ``pool`` every row is drawn from that
    array instead of from its own sample.
    """
    root = RandomStream(seed)
    J = len(ds)
    out = np.empty((B, J, m))
    sources = [d.values for d in ds] if pool is None else [np.asarray(pool, dtype=float)] * J
    for b in range(B):
        for j, src in enumerate(sources):
            idx = root.at(b, j).integers(0, src.size, size=m)
            out[b, j] = src[idx]
    out.sort(axis=2)
    return out


def null_pool(ds, fam, theta_hat):
    """All samples warped by their fitted parameters, concatenated.

    Under the deformation model each warped sample estimates the same law,
    so the pool is a null-restricted estimate of it.
    """
    fam = get_family(fam)
    return np.concatenate(
        [fam.apply(lam, d.values) for d, lam in zip(ds, theta_hat.thetas)]
    )


def bootstrap_statistics(ds, fam, ref_index=None, cfg=None, config=None, return_failures=False,
                         theta_hat=None):
    """Sorted bootstrap minimal alignment costs ``A*_m`` (length ``B``).

    Each of the ``J`` samples is resampled to size ``cfg.resample_size(n)``,
    either from itself or, for ``cfg.scheme == "pooled"``, from
    :func:`null_pool` (``theta_hat`` is fitted when not supplied). A
    ``scheme`` of ``None`` means ``"independent"`` here.
    """
    cfg = cfg or BootstrapConfig()
    fam = get_family(fam)
    ds, n = _equal_size_samples(ds)
    m = cfg.resample_size(n)
    pool = None
    if cfg.scheme == "pooled":
        if theta_hat is None:
            theta_hat = minimize_alignment(ds, fam, ref_index, config).theta_hat
        pool = null_pool(ds, fam, theta_hat)
    stack = resample_stack(ds, m, int(cfg.B), cfg.seed, pool)
    costs, n_failed = batch_alignment_costs(stack, fam, ref_index, config)
    costs = np.sort(costs)
    return (costs, n_failed) if return_failures else costs


def empirical_quantile_of(sorted_stats, level):
    """Order statistic ``ceil(B * level)`` (1-based) of sorted values."""
    s = np.asarray(sorted_stats, dtype=float)
    if s.size == 0:
        raise EmptyStats("no bootstrap statistics")
    if not 0.0 < float(level) < 1.0:
        raise ValueError("level must lie in (0, 1)")
    k = min(max(_ceil(s.size * float(level)), 1), s.size)
    return float(s[k - 1])


def _observed(ds, fam, ref_index, config):
    res = minimize_alignment(ds, fam, ref_index, config)
    return res.cost, res


def gof_test(ds, fam, ref_index=None, cfg=None, config=None):
    """Bootstrap goodness-of-fit test of ``A = 0`` (the model holds exactly).

    ``p_value`` is the fraction of bootstrap values ``m * A*`` at or above
    ``n * A_n``. With the order-statistic critical value this gives
    ``reject == (p_value <= alpha)`` exactly.
    """
    cfg = cfg or BootstrapConfig()
    if cfg.scheme is None:
        cfg = replace(cfg, scheme="pooled")
    fam = get_family(fam)
    ds, n = _equal_size_samples(ds)
    m = cfg.resample_size(n)
    if m > n**0.95:
        warnings.warn(
            f"resample size m={m} is close to n={n}; the bootstrap needs m/n -> 0",
            UserWarning,
            stacklevel=2,
        )
    A_n, res = _observed(ds, fam, ref_index, config)
    boot, n_failed = bootstrap_statistics(
        ds, fam, res.theta_hat.ref_index, cfg, config, return_failures=True, theta_hat=res.theta_hat
    )
    scaled = m * boot
    statistic = n * A_n
    crit = empirical_quantile_of(scaled, 1.0 - cfg.alpha)
    p_value = float(np.count_nonzero(scaled >= statistic)) / scaled.size
    return TestReport(
        statistic=float(statistic),
        critical_value=float(crit),
        p_value=p_value,
        reject=bool(statistic > crit),
        n=n,
        m_n=m,
        B=int(cfg.B),
        seed=int(cfg.seed),
        kind="gof",
        alpha=float(cfg.alpha),
        family=fam.name,
        ref_index=res.theta_hat.ref_index,
        A_n=float(A_n),
        failed_replicates=int(n_failed),
        extra={"scheme": cfg.scheme},
    )


def threshold_test(ds, fam, ref_index=None, delta0=None, cfg=None, config=None):
    """Bootstrap test of ``A >= delta0`` against ``A < delta0``.

    Rejection is evidence that the deformation model holds up to an
    alignment cost of ``delta0``. ``cfg`` defaults to ``m = ceil(sqrt(n))``.
    Resampling is always per sample: a pooled bootstrap would impose
    ``A = 0`` rather than ``A = delta0``. ``reject == (p_value < alpha)``.
    """
    if delta0 is None or not float(delta0) > 0:
        raise ValueError("delta0 must be positive")
    delta0 = float(delta0)
    cfg = cfg or BootstrapConfig(m_exponent=0.5)
    if cfg.scheme == "pooled":
        raise ValueError("the threshold test needs scheme='independent'")
    cfg = replace(cfg, scheme="independent")
    fam = get_family(fam)
    ds, n = _equal_size_samples(ds)
    m = cfg.resample_size(n)
    A_n, res = _observed(ds, fam, ref_index, config)
    boot, n_failed = bootstrap_statistics(ds, fam, ref_index, cfg, config, return_failures=True)
    scaled = math.sqrt(m) * (boot - delta0)
    statistic = math.sqrt(n) * (A_n - delta0)
    crit = empirical_quantile_of(scaled, cfg.alpha)
    p_value = float(np.count_nonzero(scaled <= statistic)) / scaled.size
    return TestReport(
        statistic=float(statistic),
        critical_value=float(crit),
        p_value=p_value,
        reject=bool(statistic < crit),
        n=n,
        m_n=m,
        B=int(cfg.B),
        seed=int(cfg.seed),
        kind="threshold",
        alpha=float(cfg.alpha),
        family=fam.name,
        ref_index=res.theta_hat.ref_index,
        A_n=float(A_n),
        delta0=delta0,
        failed_replicates=int(n_failed),
        extra={"scheme": cfg.scheme},
    )


def rejection_frequency(scenario, K, cfg=None, test="gof", delta0=None, family=None,
                        ref_index=None, seed=None, key=(0,), threads=1, config=None):
    """Fraction of ``K`` simulated datasets on which the chosen test rejects.

    Repetition ``k`` draws its data from ``RandomStream(seed, *key, k, 0)``
    and its bootstrap seed from the key ``(seed, *key, k, 1)``; the result
    does not depend on ``threads``.
    """
    from .scenarios import generate

    K = int(K)
    if K < 1:
        raise ValueError("K must be at least 1")
    cfg = cfg or BootstrapConfig()
    seed = scenario.seed if seed is None else int(seed)
    family = family or scenario.family
    key = tuple(int(k) for k in key)

    def one(k):
        data = generate(scenario, RandomStream(seed, *key, k, 0))
        rep_cfg = replace(cfg, seed=RandomStream(seed, *key, k, 1).derive_seed())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            if test == "gof":
                rep = gof_test(data, family, ref_index, rep_cfg, config)
            elif test == "threshold":
                rep = threshold_test(data, family, ref_index, delta0, rep_cfg, config)
            else:
                raise ValueError(f"unknown test {test!r}")
        return rep.reject

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            rejects = list(ex.map(one, range(K)))
    else:
        rejects = [one(k) for k in range(K)]
    return sum(rejects) / K
