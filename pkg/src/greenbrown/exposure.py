"""Exposure weights, Herfindahl-Hirschman concentration and power-law fits.

Ranked exposures follow ``u_i = c / (b + i)**a`` for i = 1..n. Generated
weights are normalized exactly to a budget after truncation at n terms.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize, special, stats

from .errors import BoundaryCaseError, DomainError, FitError, IngestionError


class ExposureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ExposureLaw:
    kind: str = "uniform"
    decay: float = 0.0
    shift: float = 0.0
    scale: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "power"):
            raise DomainError(f"unknown exposure law kind {self.kind!r}")
        if self.decay < 0:
            raise DomainError("decay must be nonnegative")
        if self.shift <= -1:
            raise DomainError("shift must exceed -1")
        if (self.kind == "uniform") != (self.decay == 0):
            raise DomainError("uniform laws have decay 0 and power laws a positive decay")

    @classmethod
    def uniform(cls):
        return cls("uniform", 0.0, 0.0)

    @classmethod
    def power(cls, decay, shift=0.0):
        if decay == 0:
            return cls.uniform()
        return cls("power", float(decay), float(shift))


@dataclass(frozen=True, eq=False)
class ExposureVector:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise DomainError("weights must be one-dimensional")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    @property
    def budget(self):
        return float(self.weights.sum())

    @property
    def is_uniform(self):
        w = self.weights
        return len(w) == 0 or bool(np.all(w == w[0]))

    def hhi(self):
        return hhi(self)

    def normalized(self, budget=1.0):
        return ExposureVector(self.weights * (budget / self.weights.sum()))


def make_weights(n, law, budget=1.0):
    """Weights proportional to (shift + i)**(-decay), i = 1..n, summing to budget."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if budget <= 0:
        raise DomainError("budget must be positive")
    if law.kind == "uniform":
        return ExposureVector(np.full(n, budget / n))
    i = np.arange(1, n + 1, dtype=float)
    raw = (law.shift + i) ** (-law.decay)
    return ExposureVector(raw * (budget / raw.sum()))


def hhi(v):
    w = v.weights if isinstance(v, ExposureVector) else np.asarray(v, dtype=float)
    return float(np.dot(w, w))


class HHILimit(NamedTuple):
    limit: float
    rate_exponent: Optional[float]
    exact_limit: Optional[float]


def hhi_powerlaw_limit(a):
    """Large-N behaviour of the HHI of weights proportional to i**(-a).

    ``limit`` is the integral-approximation value: 0 for a < 1 and
    (a - 1)**2 / (2a - 1) for a > 1. ``rate_exponent`` is the power of N at
    which HHI vanishes (a < 1 only). ``exact_limit`` is zeta(2a) / zeta(a)**2,
    the true limit for a > 1; the integral value underestimates it.
    """
    if a < 0:
        raise DomainError("a must be nonnegative")
    if a == 1 or a == 0.5:
        raise BoundaryCaseError(f"a = {a} is a boundary case of the asymptotic approximation")
    if a < 0.5:
        return HHILimit(0.0, -1.0, None)
    if a < 1:
        return HHILimit(0.0, -2.0 * (1.0 - a), None)
    return HHILimit((a - 1) ** 2 / (2 * a - 1), None, float(special.zeta(2 * a) / special.zeta(a) ** 2))


def hhi_powerlaw_approx(n, a):
    """Finite-n HHI from the integral approximation of the power sums."""
    if a == 1 or a == 0.5:
        raise BoundaryCaseError(f"a = {a} is a boundary case of the asymptotic approximation")
    if a == 0:
        return 1.0 / n
    num = (n ** (1 - 2 * a) - 1) / (1 - 2 * a)
    den = (n ** (1 - a) - 1) / (1 - a)
    return num / den**2


class PowerLawFit(NamedTuple):
    a: float
    b: float
    c: float
    rmse: float
    r2: float
    ci95: dict
    n_iter: int


def _power_model(theta, i):
    a, logc, s = theta
    return np.exp(logc - a * np.log(np.expm1(s) + i))


def _power_jac(theta, i):
    a, logc, s = theta
    b = np.expm1(s)
    m = _power_model(theta, i)
    lb = np.log(b + i)
    return np.column_stack([-m * lb, m, -a * m / (b + i) * np.exp(s)])


def fit_power_law(observed, max_nfev=2000):
    """Least-squares fit of ``u_i = c / (b + i)**a`` to ranked exposures.

    Solved by Levenberg-Marquardt in (a, log c, log(1 + b)), started from
    the log-log slope of the top decile with b = 0 and c = u_1. ``rmse`` is
    sqrt(SSE / (n - 3)); ``ci95`` maps each parameter to its 95% interval
    from the linearized covariance.
    """
    u = observed.weights if isinstance(observed, ExposureVector) else np.asarray(observed, dtype=float)
    n = len(u)
    if n < 4:
        raise DomainError("need at least 4 observations")
    if np.any(u <= 0):
        raise DomainError("observations must be strictly positive")
    if np.any(np.diff(u) > 0):
        raise DomainError("observations must be sorted nonincreasing")
    i = np.arange(1, n + 1, dtype=float)

    top = max(2, n // 10)
    slope = np.polyfit(np.log(i[:top]), np.log(u[:top]), 1)[0]
    theta0 = np.array([max(-slope, 0.0), math.log(u[0]), 0.0])

    res = optimize.least_squares(
        lambda t: _power_model(t, i) - u,
        theta0,
        jac=lambda t: _power_jac(t, i),
        method="lm",
        x_scale="jac",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_nfev,
    )
    a, logc, s = res.x
    b, c = float(np.expm1(s)), float(math.exp(logc))
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError(f"power-law fit did not converge: {res.message}", params=(float(a), b, c))

    resid = res.fun
    sse = float(resid @ resid)
    dfe = max(n - 3, 1)
    rmse = math.sqrt(sse / dfe)
    sst = float(np.sum((u - u.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else 0.0)

    # Linearized covariance in the natural (a, b, c) coordinates.
    m = _power_model(res.x, i)
    jac = np.column_stack([-m * np.log(b + i), -a * m / (b + i), m / c])
    tq = stats.t.ppf(0.975, dfe)
    try:
        cov = np.linalg.inv(jac.T @ jac) * rmse**2
        half = tq * np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        half = np.full(3, np.nan)
    ci = {name: (float(val - h), float(val + h)) for name, val, h in zip("abc", (float(a), b, c), half)}
    return PowerLawFit(float(a), b, c, rmse, r2, ci, int(res.nfev))


def read_exposure_csv(path, tol=1e-6):
    """Read ranked exposures from a ``rank,weight`` CSV with one header row.

    Weights are returned in rank order. If they do not sum to 1 within
    ``tol`` they are renormalized and an :class:`ExposureWarning` is issued.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = [h.strip().lower() for h in row]
                if header != ["rank", "weight"]:
                    raise IngestionError(f"expected header 'rank,weight', got {','.join(row)!r}", lineno)
                continue
            if len(row) != 2:
                raise IngestionError(f"expected 2 columns, got {len(row)}", lineno)
            try:
                rank, weight = int(row[0]), float(row[1])
            except ValueError:
                raise IngestionError(f"cannot parse {','.join(row)!r}", lineno) from None
            if not math.isfinite(weight) or weight < 0:
                raise IngestionError(f"weight must be finite and nonnegative, got {weight}", lineno)
            rows.append((rank, weight, lineno))
    if header is None:
        raise IngestionError("file is empty")
    if not rows:
        raise IngestionError("no data rows")
    rows.sort(key=lambda r: r[0])
    ranks = [r[0] for r in rows]
    if len(set(ranks)) != len(ranks):
        dup = next(r for k, r in enumerate(rows[1:], 1) if r[0] == rows[k - 1][0])
        raise IngestionError(f"duplicate rank {dup[0]}", dup[2])
    w = np.array([r[1] for r in rows])
    total = w.sum()
    if total <= 0:
        raise IngestionError("weights sum to zero")
    if abs(total - 1.0) > tol:
        warnings.warn(f"exposure weights sum to {total:.8g}; renormalizing to 1", ExposureWarning, stacklevel=2)
        w = w / total
    return ExposureVector(w)
