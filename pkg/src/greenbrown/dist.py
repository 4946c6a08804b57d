"""Scalar probability kernels: standard normal and standardized skew-normal.

The skew-normal law SN(0, 1, alpha) has density ``2 * phi(x) * Phi(alpha * x)``.
Its cdf is evaluated through Owen's T function,

    F(x; alpha) = Phi(x) - 2 T(x, alpha),

and the quantile by a bracketed, safeguarded Newton iteration on ``F``.
Every function is pure; randomness only enters through an explicit
``numpy.random.Generator``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def norm_cdf(x):
    return special.ndtr(x)


def norm_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise DomainError("norm_quantile needs 0 < p < 1")
    q = special.ndtri(p)
    return float(q) if q.ndim == 0 else q


def sn_pdf(x, shape):
    """Density of SN(0, 1, shape)."""
    x = np.asarray(x, dtype=float)
    out = 2.0 * norm_pdf(x) * special.ndtr(shape * x)
    return float(out) if out.ndim == 0 else out


def sn_cdf(x, shape):
    """Cdf of SN(0, 1, shape), accurate to about 1e-15 absolute."""
    x = np.asarray(x, dtype=float)
    out = special.ndtr(x) - 2.0 * special.owens_t(x, shape)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def sn_sf(x, shape):
    """Survival function ``1 - sn_cdf(x, shape)`` without cancellation."""
    x = np.asarray(x, dtype=float)
    out = special.ndtr(-x) + 2.0 * special.owens_t(x, shape)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _sn_quantile_scalar(p, shape, tol):
    cdf = lambda t: float(sn_cdf(t, shape))
    x = float(special.ndtri(p))
    # Expand a bracket [lo, hi] with cdf(lo) <= p <= cdf(hi).
    step = 1.0
    lo, hi = x - step, x + step
    while cdf(lo) > p:
        step *= 2.0
        lo = x - step
    step = 1.0
    while cdf(hi) < p:
        step *= 2.0
        hi = x + step
    x = min(max(x, lo), hi)
    for _ in range(200):
        f = cdf(x) - p
        if f == 0.0:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        dens = float(sn_pdf(x, shape))
        nxt = x - f / dens if dens > 0.0 else math.nan
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 4e-16 * max(1.0, abs(x)) or hi - lo <= 4e-16 * max(1.0, abs(x)):
            x = nxt
            break
        x = nxt
    if abs(cdf(x) - p) > tol:
        raise DomainError(f"sn_quantile failed to reach tolerance at p={p}, shape={shape}")
    return x


def sn_quantile(p, shape, tol=1e-10):
    """Inverse of :func:`sn_cdf` in its first argument.

    Raises DomainError unless ``0 < p < 1``.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError("sn_quantile needs 0 < p < 1")
    if arr.ndim == 0:
        return _sn_quantile_scalar(float(arr), float(shape), tol)
    flat = [_sn_quantile_scalar(float(v), float(shape), tol) for v in arr.ravel()]
    return np.asarray(flat).reshape(arr.shape)


def sn_sample(rng, delta, size=None):
    """Draw ``sqrt(1 - delta**2) * X1 + delta * |W|`` with X1, W iid N(0, 1).

    The result is SN(0, 1, delta / sqrt(1 - delta**2)). The two normal draws
    are taken from ``rng`` in the order X1 then W.
    """
    if not abs(delta) < 1.0:
        raise DomainError("delta must satisfy |delta| < 1")
    x1 = rng.standard_normal(size)
    w = np.abs(rng.standard_normal(size))
    return math.sqrt(1.0 - delta * delta) * x1 + delta * w


def shape_from_loading(rho, delta):
    """Marginal skew-normal shape of a latent return with loading rho."""
    beta = rho * delta
    return beta / math.sqrt(1.0 - beta * beta)


def factor_shape(delta):
    """Shape of the composite systematic factor for mixing weight delta."""
    if not abs(delta) < 1.0:
        raise DomainError("delta must satisfy |delta| < 1")
    return delta / math.sqrt(1.0 - delta * delta)


def delta_from_shape(shape):
    return shape / math.sqrt(1.0 + shape * shape)


def sn_mean(shape):
    return _SQRT_2_OVER_PI * delta_from_shape(shape)


def sn_variance(shape):
    d = delta_from_shape(shape)
    return 1.0 - 2.0 * d * d / math.pi


@dataclass(frozen=True)
class SkewNormalParams:
    """Standardized skew-normal law SN(0, 1, shape)."""

    shape: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.shape):
            raise DomainError("shape must be finite")

    @classmethod
    def from_delta(cls, delta):
        return cls(factor_shape(delta))

    @property
    def delta(self):
        return delta_from_shape(self.shape)

    def pdf(self, x):
        return sn_pdf(x, self.shape)

    def cdf(self, x):
        return sn_cdf(x, self.shape)

    def quantile(self, p):
        return sn_quantile(p, self.shape)

    def mean(self):
        return sn_mean(self.shape)

    def variance(self):
        return sn_variance(self.shape)
