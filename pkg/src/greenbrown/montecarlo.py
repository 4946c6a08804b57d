"""Monte Carlo simulation of finite green/brown portfolio losses.

Replications are split into chunks of ``chunk_size``; chunk ``k`` draws from
its own PCG64 stream seeded by ``SeedSequence(seed, spawn_key=(k,))``, so
results depend only on (seed, chunk_size, n_samples), never on how chunks
are scheduled across workers.

Given the factors (X1, X2), defaults are independent Bernoulli(p_a) with
p_a = Phi(h_a(X^a)). Three samplers produce the same loss law:

* ``binomial``: class default counts ~ Binomial(N_a, p_a); needs uniform
  weights within each class.
* ``geometric``: walks each class's obligors with geometric gaps between
  defaults, costing O(defaults) rather than O(N) per replication.
* ``obligor``: draws every idiosyncratic shock Z and tests Y <= K.

``auto`` picks ``binomial`` when weights are uniform within classes and
``geometric`` otherwise.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .copula import PortfolioSpec, default_threshold
from .dist import norm_cdf
from .errors import DomainError
from .exposure import ExposureVector, hhi, make_weights
from .lhp import LimitModel, mix_var

METHODS = ("auto", "binomial", "geometric", "obligor")
_TINY_P = 1e-15
_BLOCK_ELEMS = 1 << 22


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 1_000_000
    seed: int = 20250101
    quantile_levels: tuple = (0.99, 0.995, 0.999)
    chunk_size: int = 50_000
    workers: int = 1
    method: str = "auto"

    def __post_init__(self):
        if self.n_samples < 1 or self.chunk_size < 1 or self.workers < 1:
            raise DomainError("n_samples, chunk_size and workers must be positive")
        levels = tuple(float(q) for q in self.quantile_levels)
        if any(not 0 < q < 1 for q in levels):
            raise DomainError("quantile levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise DomainError("quantile levels must be strictly increasing")
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "quantile_levels", levels)

    def replace(self, **changes):
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return McConfig(**values)


@dataclass
class LossSampleSummary:
    empirical_quantiles: dict
    mean: float
    variance: float
    n_samples: int
    hhi_g: float
    hhi_b: float
    losses: Optional[np.ndarray] = field(default=None, repr=False)


def class_weights(spec):
    """Exposure vectors (brown, green), each summing to its class budget.

    Power-law weights are ranked separately within each class.
    """
    out = []
    for cls in spec.classes:
        if cls.count == 0:
            out.append(ExposureVector(np.zeros(0)))
        elif cls.omega == 0:
            out.append(ExposureVector(np.zeros(cls.count)))
        else:
            out.append(make_weights(cls.count, spec.exposure_law, cls.omega))
    return tuple(out)


def class_hhi(spec):
    """Per-class HHI on weights renormalized to sum to one within each class.

    Returns (hhi_g, hhi_b); nan for an empty class.
    """
    vals = []
    for cls in (spec.green, spec.brown):
        vals.append(hhi(make_weights(cls.count, spec.exposure_law, 1.0)) if cls.count else math.nan)
    return tuple(vals)


def empirical_quantile(samples, level):
    """Upper order statistic: the ceil(level * n)-th smallest of sorted samples."""
    s = np.asarray(samples)
    n = len(s)
    if n == 0:
        raise DomainError("empirical_quantile needs at least one sample")
    lv = np.asarray(level, dtype=float)
    if np.any(~((lv > 0) & (lv < 1))):
        raise DomainError("level must lie in (0, 1)")
    # round() absorbs representation error such as 0.99 * 1e6 = 989999.99...
    k = np.ceil(np.round(lv * n, 9)).astype(int)
    k = np.clip(k, 1, n)
    out = s[k - 1]
    return float(out) if out.ndim == 0 else out


def conditional_loss_given_factors(spec, x1, x2):
    """E[L | X1 = x1, X2 = x2] = omega_b L_b(X^b) + omega_g L_g(X^g)."""
    x2 = np.asarray(x2, dtype=float)
    if np.any(x2 < 0):
        raise DomainError("x2 is half-normal and must be nonnegative")
    x1 = np.asarray(x1, dtype=float)
    out = np.zeros(np.broadcast(x1, x2).shape)
    for cls in spec.classes:
        if cls.omega > 0:
            k = default_threshold(cls)
            x = math.sqrt(1.0 - cls.delta**2) * x1 + cls.delta * x2
            out = out + cls.omega * norm_cdf((k - cls.rho * x) / math.sqrt(1.0 - cls.rho**2))
    return float(out) if out.ndim == 0 else out


def _resolve_method(method, weights):
    if method != "auto":
        return method
    return "binomial" if all(w.is_uniform for w in weights) else "geometric"


def _weighted_bernoulli_sum(rng, p, u):
    """Per row r, sum of u_i over obligors defaulting independently w.p. p[r]."""
    n = len(u)
    total = np.zeros(len(p))
    if n == 0:
        return total
    pos = np.zeros(len(p), dtype=np.int64)
    idx = np.nonzero(p >= _TINY_P)[0]
    rare = np.nonzero((p > 0) & (p < _TINY_P))[0]
    while idx.size:
        pos[idx] += rng.geometric(p[idx])
        hit = pos[idx] <= n
        idx = idx[hit]
        total[idx] += u[pos[idx] - 1]
    if rare.size:
        # Geometric gaps would overflow int64; defaults here are vanishingly rare.
        counts = rng.binomial(n, p[rare])
        for r, k in zip(rare[counts > 0], counts[counts > 0]):
            total[r] = u[rng.choice(n, size=k, replace=False)].sum()
    return total


def _chunk_rng(seed, chunk_index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(chunk_index),))))


def _simulate_chunk(args):
    spec, thresholds, weights, method, seed, chunk_index, m, want_cond = args
    rng = _chunk_rng(seed, chunk_index)
    x1 = rng.standard_normal(m)
    x2 = np.abs(rng.standard_normal(m))
    loss = np.zeros(m)
    cond = np.zeros(m) if want_cond else None

    if method == "obligor":
        n_total = spec.size
        rows = max(1, _BLOCK_ELEMS // max(n_total, 1))
        u_all = np.concatenate([w.weights for w in weights])
        k_all = np.concatenate([np.full(c.count, k) for c, k in zip(spec.classes, thresholds)])
        rho_all = np.concatenate([np.full(c.count, c.rho) for c in spec.classes])
        dl_all = np.concatenate([np.full(c.count, c.delta) for c in spec.classes])
        sys_scale = rho_all * np.sqrt(1.0 - dl_all**2)
        skew = rho_all * dl_all
        idio = np.sqrt(1.0 - rho_all**2)
        for start in range(0, m, rows):
            stop = min(m, start + rows)
            z = rng.standard_normal((stop - start, n_total))
            y = x1[start:stop, None] * sys_scale + x2[start:stop, None] * skew + idio * z
            loss[start:stop] = (y <= k_all) @ u_all
    for cls, k, w in zip(spec.classes, thresholds, weights):
        if cls.count == 0:
            continue
        x = math.sqrt(1.0 - cls.delta**2) * x1 + cls.delta * x2
        p = norm_cdf((k - cls.rho * x) / math.sqrt(1.0 - cls.rho**2))
        if want_cond:
            cond += w.budget * p
        if method == "binomial":
            loss += (cls.omega / cls.count) * rng.binomial(cls.count, p)
        elif method == "geometric":
            loss += _weighted_bernoulli_sum(rng, p, w.weights)
    return loss, cond


def _run_chunks(spec, mc, want_cond=False):
    weights = class_weights(spec)
    method = _resolve_method(mc.method, weights)
    if method == "binomial" and not all(w.is_uniform for w in weights):
        raise DomainError("the binomial sampler needs uniform weights within each class")
    thresholds = tuple(default_threshold(c) for c in spec.classes)
    n_chunks = -(-mc.n_samples // mc.chunk_size)
    jobs = []
    for k in range(n_chunks):
        m = min(mc.chunk_size, mc.n_samples - k * mc.chunk_size)
        jobs.append((spec, thresholds, weights, method, mc.seed, k, m, want_cond))
    if mc.workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=mc.workers) as pool:
            parts = list(pool.map(_simulate_chunk, jobs))
    else:
        parts = [_simulate_chunk(j) for j in jobs]
    losses = np.concatenate([p[0] for p in parts])
    cond = np.concatenate([p[1] for p in parts]) if want_cond else None
    return losses, cond, weights


def simulate_losses(spec, mc, keep_samples=False):
    """Simulate ``mc.n_samples`` portfolio losses and summarize them.

    With ``keep_samples`` the sorted loss sample is attached as ``losses``.
    """
    losses, _, _ = _run_chunks(spec, mc)
    ordered = np.sort(losses)
    quantiles = {q: empirical_quantile(ordered, q) for q in mc.quantile_levels}
    hhi_g, hhi_b = class_hhi(spec)
    return LossSampleSummary(
        empirical_quantiles=quantiles,
        mean=float(losses.mean()),
        variance=float(losses.var(ddof=1)) if len(losses) > 1 else 0.0,
        n_samples=len(losses),
        hhi_g=hhi_g,
        hhi_b=hhi_b,
        losses=ordered if keep_samples else None,
    )


class VarianceCheck(NamedTuple):
    lhs: float
    stderr: float
    bound: float


def variance_decomposition_check(spec, mc):
    """Estimate E[(L - E[L | X1, X2])**2] and the bound (1/4) * sum u_i**2.

    The bound uses the portfolio weights themselves (summing to one), not
    the within-class renormalized weights.
    """
    losses, cond, weights = _run_chunks(spec, mc, want_cond=True)
    sq = (losses - cond) ** 2
    n = len(sq)
    stderr = float(sq.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    bound = 0.25 * sum(hhi(w) for w in weights)
    return VarianceCheck(float(sq.mean()), stderr, bound)


class ConvergenceRow(NamedTuple):
    n: int
    a: float
    level: float
    var_empirical: float
    var_analytic: float
    error: float
    hhi_g: float
    hhi_b: float


def resize_portfolio(spec, n, green_share=0.3):
    """Copy of ``spec`` with n obligors, round(green_share * n) of them green."""
    n_green = int(round(green_share * n))
    return PortfolioSpec(
        spec.green.replace(count=n_green),
        spec.brown.replace(count=n - n_green),
        spec.exposure_law,
    )


def convergence_experiment(scenario, sizes, mc, analytic=None, green_share=0.3):
    """Empirical vs analytic VaR along a grid of portfolio sizes.

    Every size reuses ``mc.seed``, so the factor draws are common across
    sizes. Errors are empirical minus analytic.
    """
    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DomainError("sizes must be strictly increasing")
    if analytic is None:
        analytic = LimitModel.from_spec(scenario)
    var_limit = {q: mix_var(analytic, q) for q in mc.quantile_levels}
    rows = []
    for n in sizes:
        spec = resize_portfolio(scenario, n, green_share)
        summary = simulate_losses(spec, mc)
        for q in mc.quantile_levels:
            emp = summary.empirical_quantiles[q]
            rows.append(
                ConvergenceRow(n, spec.exposure_law.decay, q, emp, var_limit[q], emp - var_limit[q], summary.hhi_g, summary.hhi_b)
            )
    return rows
