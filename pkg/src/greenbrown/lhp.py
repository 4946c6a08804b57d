"""Limiting (large homogeneous portfolio) loss law of a green/brown portfolio.

With a common mixing weight delta, the limit loss is ``v(X)`` where

    v(x) = omega_b * L_b(x) + omega_g * L_g(x),
    L_a(x) = Phi((K_a - rho_a * x) / sqrt(1 - rho_a**2)),

and X ~ SN(0, 1, gamma), gamma = delta / sqrt(1 - delta**2). The map v is
strictly decreasing whenever some class with positive exposure has
rho_a > 0, so P(v(X) <= l) = P(X >= v^{-1}(l)).

For distinct deltas the limit is ``omega_b L_b(X^b) + omega_g L_g(X^g)``;
:func:`general_mix_cdf` evaluates its cdf by quadrature over the factors.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .copula import LoanClassParams, default_threshold
from .dist import delta_from_shape, factor_shape, norm_cdf, norm_quantile, shape_from_loading, sn_quantile, sn_sf
from .errors import DomainError, NonInvertibleError

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_X_LIMIT = 1e8


def _as_out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def _decreasing_root(fun, dfun, target, x0=None, max_iter=200):
    """Solve fun(x) = target elementwise for a strictly decreasing ``fun``.

    The caller guarantees each target lies strictly inside the range of
    ``fun``. Brackets are grown geometrically from [-1, 1]; iterates are
    Newton steps, replaced by bisection whenever they leave the bracket.
    """
    target = np.asarray(target, dtype=float)
    lo = np.full(target.shape, -1.0)
    hi = np.full(target.shape, 1.0)
    while True:
        grow = fun(lo) < target
        if not grow.any():
            break
        lo = np.where(grow, 2.0 * lo, lo)
        if np.any(lo < -_X_LIMIT):
            raise DomainError("cannot bracket root: level too close to the upper end of the range")
    while True:
        grow = fun(hi) > target
        if not grow.any():
            break
        hi = np.where(grow, 2.0 * hi, hi)
        if np.any(hi > _X_LIMIT):
            raise DomainError("cannot bracket root: level too close to the lower end of the range")
    x = np.clip(np.zeros(target.shape) if x0 is None else np.asarray(x0, dtype=float), lo, hi)
    active = np.ones(target.shape, dtype=bool)
    for _ in range(max_iter):
        fx = fun(x) - target
        lo = np.where(fx > 0, x, lo)
        hi = np.where(fx < 0, x, hi)
        d = dfun(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = x - fx / d
        bad = ~((nxt > lo) & (nxt < hi)) | ~np.isfinite(nxt)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        nxt = np.where(fx == 0, x, nxt)
        scale = np.maximum(1.0, np.abs(x))
        done = (np.abs(nxt - x) <= 2e-16 * scale) | (hi - lo <= 2e-16 * scale)
        x = np.where(active, nxt, x)
        active &= ~done
        if not active.any():
            break
    return x


@dataclass(frozen=True)
class LimitModel:
    """Common-delta limit model; immutable, thresholds cached at construction."""

    green: LoanClassParams
    brown: LoanClassParams
    k_green: float = field(init=False)
    k_brown: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        if abs(self.green.delta - self.brown.delta) > 1e-14:
            raise DomainError("the analytic limit needs green.delta == brown.delta")
        if abs(self.green.omega + self.brown.omega - 1.0) > 1e-12:
            raise DomainError("green.omega + brown.omega must equal 1")
        object.__setattr__(self, "k_green", default_threshold(self.green))
        object.__setattr__(self, "k_brown", default_threshold(self.brown))
        object.__setattr__(self, "gamma", factor_shape(self.green.delta))

    @classmethod
    def from_spec(cls, spec):
        return cls(spec.green, spec.brown)

    @classmethod
    def from_shape(cls, pd_green, pd_brown, rho_green, rho_brown, omega_green, shape):
        """Build from the factor shape gamma instead of delta."""
        delta = delta_from_shape(shape)
        g = LoanClassParams(pd_green, rho_green, delta, omega_green)
        b = LoanClassParams(pd_brown, rho_brown, delta, 1.0 - omega_green)
        return cls(g, b)

    @property
    def delta(self):
        return self.green.delta

    def _terms(self):
        return ((self.brown, self.k_brown), (self.green, self.k_green))

    @property
    def loss_range(self):
        """Infimum and supremum of v over the real line."""
        low = 0.0
        span = 0.0
        for cls, _ in self._terms():
            if cls.rho == 0.0:
                low += cls.omega * cls.pd
            else:
                span += cls.omega
        return low, low + span

    @property
    def invertible(self):
        return any(cls.rho > 0 and cls.omega > 0 for cls, _ in self._terms())


def conditional_loss(cls, x, threshold=None):
    """Limit loss rate of one class given the composite factor value x."""
    k = default_threshold(cls) if threshold is None else threshold
    return _as_out(norm_cdf((k - cls.rho * np.asarray(x, dtype=float)) / math.sqrt(1.0 - cls.rho**2)))


def mix_loss(model, x):
    """The mixture map v(x) = omega_b L_b(x) + omega_g L_g(x)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for cls, k in model._terms():
        if cls.omega > 0:
            out = out + cls.omega * norm_cdf((k - cls.rho * x) / math.sqrt(1.0 - cls.rho**2))
    return _as_out(out)


def mix_slope(model, x):
    """Derivative v'(x); negative wherever some loaded class has exposure."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for cls, k in model._terms():
        if cls.omega > 0 and cls.rho > 0:
            s = math.sqrt(1.0 - cls.rho**2)
            z = (k - cls.rho * x) / s
            out = out - cls.omega * cls.rho / s * np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
    return _as_out(out)


def _x_star(model, loss_level):
    """v^{-1} extended with +inf below the range of v and -inf above it."""
    ell = np.asarray(loss_level, dtype=float)
    low, high = model.loss_range
    out = np.empty(ell.shape)
    below = ell <= low
    above = ell >= high
    inside = ~(below | above)
    out[below] = np.inf
    out[above] = -np.inf
    if inside.any():
        out[inside] = _decreasing_root(lambda t: mix_loss(model, t), lambda t: mix_slope(model, t), ell[inside])
    return out


def invert_v(model, loss_level):
    """Unique x with v(x) = loss_level.

    Raises DomainError outside (0, 1) or outside the range of v, and
    NonInvertibleError when v is constant.
    """
    ell = np.asarray(loss_level, dtype=float)
    if np.any(~((ell > 0) & (ell < 1))):
        raise DomainError("loss level must lie in (0, 1)")
    if not model.invertible:
        raise NonInvertibleError("v is constant: every loaded class has rho = 0 or zero exposure")
    low, high = model.loss_range
    if np.any((ell <= low) | (ell >= high)):
        raise DomainError(f"loss level outside the range ({low}, {high}) of v")
    return _as_out(_x_star(model, ell))


def _log_abs_slope(model, x):
    parts = []
    for cls, k in model._terms():
        if cls.omega > 0 and cls.rho > 0:
            s = math.sqrt(1.0 - cls.rho**2)
            z = (k - cls.rho * x) / s
            parts.append(math.log(cls.omega * cls.rho / s) - 0.5 * z * z - _LOG_SQRT_2PI)
    return special.logsumexp(np.stack(parts), axis=0)


def mix_density(model, loss_level):
    """Density of the limit loss: sn_pdf(x*, gamma) / |v'(x*)| at x* = v^{-1}(l).

    Evaluated in log space; zero outside (0, 1) and outside the range of v.
    """
    ell = np.asarray(loss_level, dtype=float)
    out = np.zeros(ell.shape)
    if not model.invertible:
        return _as_out(out)
    ok = (ell > 0) & (ell < 1)
    if ok.any():
        x = _x_star(model, ell[ok])
        finite = np.isfinite(x)
        vals = np.zeros(x.shape)
        xf = x[finite]
        log_fx = math.log(2.0) - 0.5 * xf * xf - _LOG_SQRT_2PI + special.log_ndtr(model.gamma * xf)
        vals[finite] = np.exp(log_fx - _log_abs_slope(model, xf))
        out[ok] = vals
    return _as_out(out)


def mix_cdf(model, loss_level):
    """P(v(X) <= l) = 1 - F_SN(v^{-1}(l); gamma)."""
    ell = np.asarray(loss_level, dtype=float)
    out = np.where(ell >= 1, 1.0, 0.0)
    if not model.invertible:
        mean = model.loss_range[0]
        return _as_out(np.where(ell >= mean, 1.0, 0.0))
    ok = (ell > 0) & (ell < 1)
    if ok.any():
        out[ok] = sn_sf(_x_star(model, ell[ok]), model.gamma)
    return _as_out(out)


def mix_var(model, beta):
    """Value-at-risk of the limit loss: v evaluated at the (1 - beta)-quantile of X."""
    b = np.asarray(beta, dtype=float)
    if np.any(~((b > 0) & (b < 1))):
        raise DomainError("beta must lie in (0, 1)")
    return _as_out(mix_loss(model, sn_quantile(1.0 - b, model.gamma)))


def single_class_density(p, rho, gamma, loss_level):
    """Closed-form density of the one-class skew-normal limit loss."""
    if rho <= 0:
        raise DomainError("single_class_density needs rho > 0")
    ell = np.asarray(loss_level, dtype=float)
    delta = delta_from_shape(gamma)
    k = sn_quantile(p, shape_from_loading(rho, delta))
    s = math.sqrt(1.0 - rho * rho)
    out = np.zeros(ell.shape)
    ok = (ell > 0) & (ell < 1)
    if ok.any():
        z = norm_quantile(ell[ok])
        xinv = (k - s * z) / rho
        out[ok] = 2.0 * s / rho * norm_cdf(gamma * xinv) * np.exp(-0.5 * (xinv * xinv - z * z))
    return _as_out(out)


_X2_UPPER = 10.0


def _half_normal_nodes(n):
    t, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * _X2_UPPER * (t + 1.0)
    weights = 0.5 * _X2_UPPER * w * 2.0 * np.exp(-0.5 * x * x - _LOG_SQRT_2PI)
    return x, weights


def general_mix_cdf(green, brown, loss_level, n_nodes=192):
    """P(omega_b L_b(X^b) + omega_g L_g(X^g) <= l) for arbitrary deltas.

    For each Gauss-Legendre node w of the half-normal factor X2 on [0, 10],
    the conditional loss is strictly decreasing in X1, so the event is
    {X1 >= x1*(w)} and its conditional probability is Phi(-x1*(w)) exactly.
    """
    ell = np.asarray(loss_level, dtype=float)
    if abs(green.omega + brown.omega - 1.0) > 1e-12:
        raise DomainError("green.omega + brown.omega must equal 1")
    terms = [(c, default_threshold(c)) for c in (brown, green) if c.omega > 0]
    loaded = [(c, k) for c, k in terms if c.rho > 0]
    fixed = sum(c.omega * c.pd for c, _ in terms if c.rho == 0)
    span = sum(c.omega for c, _ in loaded)
    if not loaded:
        return _as_out(np.where(ell >= fixed, 1.0, 0.0))

    nodes, weights = _half_normal_nodes(n_nodes)

    def inner(x1, w):
        out = np.full(x1.shape, fixed)
        for c, k in loaded:
            x = math.sqrt(1.0 - c.delta**2) * x1 + c.delta * w
            out = out + c.omega * norm_cdf((k - c.rho * x) / math.sqrt(1.0 - c.rho**2))
        return out

    def inner_slope(x1, w):
        out = np.zeros(x1.shape)
        for c, k in loaded:
            s = math.sqrt(1.0 - c.rho**2)
            cx = math.sqrt(1.0 - c.delta**2)
            z = (k - c.rho * (cx * x1 + c.delta * w)) / s
            out = out - c.omega * c.rho * cx / s * np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
        return out

    result = np.empty(ell.shape)
    for idx, level in np.ndenumerate(ell):
        if level <= fixed:
            result[idx] = 0.0
            continue
        if level >= fixed + span:
            result[idx] = 1.0
            continue
        target = np.full(nodes.shape, level)
        x1 = _decreasing_root(lambda t: inner(t, nodes), lambda t: inner_slope(t, nodes), target)
        result[idx] = float(weights @ norm_cdf(-x1))
    return _as_out(np.clip(result, 0.0, 1.0))
