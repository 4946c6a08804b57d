"""Two-factor skew-normal copula for a green/brown loan portfolio.

Latent returns of obligor ``h`` in class ``a`` are

    Y = rho_a * sqrt(1 - delta_a**2) * X1 + rho_a * delta_a * X2
        + sqrt(1 - rho_a**2) * Z_h,

with X1 ~ N(0, 1), X2 = |W| (W ~ N(0, 1)) and iid N(0, 1) shocks Z.
Obligors are ordered brown first, then green.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dist import norm_cdf, shape_from_loading, sn_quantile
from .errors import DomainError
from .exposure import ExposureLaw

_TWO_OVER_PI = 2.0 / math.pi


@dataclass(frozen=True)
class LoanClassParams:
    """Parameters of one loan class.

    pd is the long-run default probability, rho the factor loading, delta the
    weight of the half-normal factor, omega the share of total exposure and
    count the number of obligors.
    """

    pd: float
    rho: float
    delta: float = 0.0
    omega: float = 1.0
    count: int = 1

    def __post_init__(self):
        if not 0.0 < self.pd < 1.0:
            raise DomainError(f"pd must lie in (0, 1), got {self.pd}")
        if not 0.0 <= self.rho < 1.0:
            raise DomainError(f"rho must lie in [0, 1), got {self.rho}")
        if not abs(self.delta) < 1.0:
            raise DomainError(f"delta must lie in (-1, 1), got {self.delta}")
        if not 0.0 <= self.omega <= 1.0:
            raise DomainError(f"omega must lie in [0, 1], got {self.omega}")
        if int(self.count) != self.count or self.count < 0:
            raise DomainError(f"count must be a nonnegative integer, got {self.count}")

    @property
    def beta(self):
        return self.rho * self.delta

    @property
    def marginal_shape(self):
        return shape_from_loading(self.rho, self.delta)

    def replace(self, **changes):
        values = dict(pd=self.pd, rho=self.rho, delta=self.delta, omega=self.omega, count=self.count)
        values.update(changes)
        return LoanClassParams(**values)


@dataclass(frozen=True)
class PortfolioSpec:
    green: LoanClassParams
    brown: LoanClassParams
    exposure_law: ExposureLaw = field(default_factory=ExposureLaw.uniform)

    def __post_init__(self):
        if abs(self.green.omega + self.brown.omega - 1.0) > 1e-12:
            raise DomainError("green.omega + brown.omega must equal 1")

    @property
    def size(self):
        return self.brown.count + self.green.count

    @property
    def classes(self):
        """Classes in obligor order: brown, then green."""
        return (self.brown, self.green)


def default_threshold(cls):
    """Latent-return level K with P(Y <= K) = pd under the class marginal."""
    return sn_quantile(cls.pd, cls.marginal_shape)


def conditional_default_probability(cls, x1, x2, threshold=None):
    """P(Y <= K | X1 = x1, X2 = x2) for an obligor of class ``cls``."""
    k = default_threshold(cls) if threshold is None else threshold
    x = math.sqrt(1.0 - cls.delta**2) * np.asarray(x1) + cls.delta * np.asarray(x2)
    return norm_cdf((k - cls.rho * x) / math.sqrt(1.0 - cls.rho**2))


def _within_class_corr(cls):
    b2 = cls.beta**2
    return (cls.rho**2 - b2) / (1.0 - b2)


def build_sigma(spec):
    """Correlation matrix of the Gaussian part V in ``Y = b X2 + D V``.

    Dense (N_b + N_g) square matrix; meant for validation at modest N.
    """
    nb, ng = spec.brown.count, spec.green.count
    if nb == 0 or ng == 0:
        raise DomainError("build_sigma needs both classes to be nonempty")
    sb, sg = _within_class_corr(spec.brown), _within_class_corr(spec.green)
    n = nb + ng
    sigma = np.empty((n, n))
    sigma[:nb, :nb] = sb
    sigma[nb:, nb:] = sg
    sigma[:nb, nb:] = math.sqrt(sb * sg)
    sigma[nb:, :nb] = math.sqrt(sb * sg)
    np.fill_diagonal(sigma, 1.0)
    return sigma


def skew_vector(spec):
    """The vector b = (beta_b 1_b, beta_g 1_g)."""
    return np.concatenate([np.full(spec.brown.count, spec.brown.beta), np.full(spec.green.count, spec.green.beta)])


def scale_diagonal(spec):
    """Diagonal of D = diag(sqrt(1 - beta_a**2))."""
    return np.concatenate(
        [
            np.full(spec.brown.count, math.sqrt(1.0 - spec.brown.beta**2)),
            np.full(spec.green.count, math.sqrt(1.0 - spec.green.beta**2)),
        ]
    )


def scale_matrix(spec):
    """Skew-normal scale matrix ``b b' + D Sigma D``, equal to E[Y Y'].

    It has unit diagonal; it is the covariance only when b = 0.
    """
    b = skew_vector(spec)
    d = scale_diagonal(spec)
    return np.outer(b, b) + d[:, None] * build_sigma(spec) * d[None, :]


def covariance(spec):
    """Covariance of Y: the scale matrix minus (2/pi) b b', since E[X2] = sqrt(2/pi)."""
    b = skew_vector(spec)
    return scale_matrix(spec) - _TWO_OVER_PI * np.outer(b, b)


def sample_returns(spec, rng, size=None):
    """Joint draw(s) of the latent return vector, brown block first.

    Uses the factor construction, O(N) per draw. With ``size=m`` the result
    has shape (m, N). Draw order from ``rng``: X1, W, then the Z block.
    """
    m = 1 if size is None else int(size)
    x1 = rng.standard_normal(m)
    x2 = np.abs(rng.standard_normal(m))
    z = rng.standard_normal((m, spec.size))
    blocks = []
    offset = 0
    for cls in spec.classes:
        sys = cls.rho * (math.sqrt(1.0 - cls.delta**2) * x1 + cls.delta * x2)
        zc = z[:, offset : offset + cls.count]
        blocks.append(sys[:, None] + math.sqrt(1.0 - cls.rho**2) * zc)
        offset += cls.count
    y = np.concatenate(blocks, axis=1)
    return y[0] if size is None else y
