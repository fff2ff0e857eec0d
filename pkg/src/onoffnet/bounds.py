"""Tail laws behind the throughput upper bound, and Monte Carlo checks of them.

Under Rayleigh fading, an active set of size ``k`` chosen independently of
the gains gives every receiver an interference that is a sum of ``k - 1``
unit exponentials. The closed-form SINR and rate tails follow, and the
transform ``X = r + (e^r - 1) / (rho (k - 1))`` of a link rate is exactly
exponential with rate ``k - 1``. The rest of this module measures how often
the concentration events used by the achievability argument fail at finite n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, special, stats

from onoffnet.errors import DomainError, OutOfRegimeError
from onoffnet.fading import FadingSpec, SeedSpec
from onoffnet.tblas import SlackRule

_MC_BATCH = 200_000


@dataclass(frozen=True)
class BoundsConfig:
    k: int
    rho: float = 1.0
    phi: SlackRule = SlackRule("loglog")
    samples: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "phi", SlackRule.of(self.phi))
        if self.k < 1 or self.rho <= 0 or self.samples < 1:
            raise DomainError("BoundsConfig needs k >= 1, rho > 0 and samples >= 1")


@dataclass(frozen=True)
class TailCheckReport:
    """Outcome of one empirical check.

    ``ks_distance`` is the sup-distance between the empirical and the
    reference distribution (None for frequency checks). For frequency
    checks ``sample_mean`` is the observed event frequency.
    """

    name: str
    samples: int
    ks_distance: Optional[float]
    sample_mean: float
    target_mean: float
    tolerance: float
    passed: bool


def sinr_ccdf(x, k: int, rho: float):
    """``P(gamma > x) = e^{-x/rho} / (1 + x)^{k-1}``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or k < 1 or rho <= 0:
        raise DomainError("sinr_ccdf needs x >= 0, k >= 1 and rho > 0")
    out = np.exp(-x / rho - (k - 1) * np.log1p(x))
    return float(out) if out.ndim == 0 else out


def rate_ccdf(x, k: int, rho: float):
    """``P(r > x) = e^{-(e^x - 1)/rho} / e^{(k-1) x}``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or k < 1 or rho <= 0:
        raise DomainError("rate_ccdf needs x >= 0, k >= 1 and rho > 0")
    out = np.exp(-np.expm1(x) / rho - (k - 1) * x)
    return float(out) if out.ndim == 0 else out


def xi_transform(r, k: int, rho: float):
    if k < 2:
        raise DomainError(f"the exponential transform needs k >= 2, got {k}")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("rates must be nonnegative")
    out = r + np.expm1(r) / (rho * (k - 1))
    return float(out) if out.ndim == 0 else out


def xi_inverse(X: float, k: int, rho: float) -> float:
    """Rate ``r`` with ``xi_transform(r) == X``.

    Both terms of the transform are nonnegative, so ``r <= X`` and
    ``r <= log1p(X rho (k - 1))`` bracket the root.
    """
    if X < 0:
        raise DomainError("transform values are nonnegative")
    if X == 0:
        return 0.0
    hi = min(X, math.log1p(X * rho * (k - 1)))
    if xi_transform(hi, k, rho) <= X:
        return hi
    return optimize.brentq(
        lambda r: xi_transform(r, k, rho) - X, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500
    )


def throughput_tail_exponent(x: float, k: float, n) -> float:
    """Exponent ``E(x, k)`` of the union bound on ``P(some size-k set beats x)``.

    ``k (log n - x - log k + log x + 2) + log(k) / 2 + x``. Refuses
    ``x <= k / (k - 1)``, where the largest-summand step of the bound fails.
    """
    if k < 2 or x <= 0 or n < k:
        raise DomainError("exponent needs x > 0, k >= 2 and n >= k")
    if x <= k / (k - 1):
        raise DomainError(f"x={x} is not above k/(k-1)={k / (k - 1)}")
    L = math.log(n)
    return k * (L - x - math.log(k) + math.log(x) + 2) + 0.5 * math.log(k) + x


def throughput_tail_exact(x: float, k: int) -> float:
    """``P(sum of k Exp(rate k-1) > x)``, the exact chi-square tail."""
    return float(special.gammaincc(k, (k - 1) * x))


def throughput_tail_stirling(x: float, k: int) -> float:
    """Stirling form ``sqrt(k) e^{-(k-1)(x-1)} x^{k-1}`` of the same tail."""
    return math.exp(0.5 * math.log(k) - (k - 1) * (x - 1) + (k - 1) * math.log(x))


def k_star_lower_bound(n, rho: float = 1.0, phi: float = None) -> float:
    """Leading-term lower bound on the optimal number of active links.

    ``(log n - 2 log log n + log(2/e)) / log(1 + rho (log n + phi))``;
    ``phi`` defaults to ``log log n``.
    """
    if n < 16:
        raise DomainError(f"k* lower bound needs n >= 16, got {n}")
    if rho <= 0:
        raise DomainError("rho must be positive")
    L = math.log(n)
    LL = math.log(L)
    if phi is None:
        phi = LL
    if phi < 0:
        raise DomainError("phi must be nonnegative")
    return (L - 2 * LL + math.log(2 / math.e)) / math.log1p(rho * (L + phi))


# --- Monte Carlo ---------------------------------------------------------


def _ks_vs_ccdf(samples: np.ndarray, ccdf) -> float:
    """Sup-distance between the empirical ccdf of ``samples`` and ``ccdf``."""
    xs = np.sort(samples)
    m = xs.size
    model_cdf = 1.0 - ccdf(xs)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - model_cdf), np.max(model_cdf - (i - 1) / m)))


def ks_critical(m: int, alpha: float = 0.01) -> float:
    """One-sample KS critical value at level ``alpha`` for ``m`` samples."""
    return float(stats.kstwo.isf(alpha, m))


def sample_active_sinr(k: int, rho: float, samples: int, seed: SeedSpec, fading: Optional[FadingSpec] = None) -> np.ndarray:
    """SINRs of links in random size-``k`` active sets, straight from the SINR definition.

    Draws ``ceil(samples / k)`` independent ``k x k`` gain matrices and keeps
    every link's SINR: the links of one matrix use disjoint gains (own column
    plus own diagonal), so all values are i.i.d.
    """
    fading = fading or FadingSpec.rayleigh()
    rng = seed.generator()
    out = []
    need = samples
    per = max(1, _MC_BATCH // (k * k))
    while need > 0:
        m = min(per, -(-need // k))
        G = fading.sample(rng, (m, k, k))
        diag = np.diagonal(G, axis1=1, axis2=2)
        interf = G.sum(axis=1) - diag
        out.append((diag / (1.0 / rho + interf)).ravel())
        need -= m * k
    return np.concatenate(out)[:samples]


def sinr_tail_check(k: int, rho: float, samples: int, seed: SeedSpec, tol: float = 0.01) -> TailCheckReport:
    g = sample_active_sinr(k, rho, samples, seed)
    d = _ks_vs_ccdf(g, lambda x: sinr_ccdf(x, k, rho))
    # mean of gamma: E[g] E[1/(1/rho + Gamma(k-1))] has no short form; report the sample mean only
    return TailCheckReport(f"sinr_ccdf(k={k},rho={rho})", samples, d, float(g.mean()), math.nan, tol, d < tol)


def xi_exponential_check(k: int, rho: float, samples: int, seed: SeedSpec, alpha: float = 0.01, mean_rtol: float = 0.02) -> TailCheckReport:
    """KS test of transformed rates against Exp(mean 1/(k-1))."""
    r = np.log1p(sample_active_sinr(k, rho, samples, seed))
    X = xi_transform(r, k, rho)
    target = 1.0 / (k - 1)
    d = _ks_vs_ccdf(X, lambda x: np.exp(-x / target))
    crit = ks_critical(samples, alpha)
    mean = float(X.mean())
    ok = d < crit and abs(mean - target) <= mean_rtol * target
    return TailCheckReport(f"xi_exponential(k={k},rho={rho})", samples, d, mean, target, crit, ok)


def max_gain_check(n: int, trials: int, phi: float, seed: SeedSpec) -> TailCheckReport:
    """Frequency of ``max_i g_ii > log n + phi`` against its exact value."""
    level = math.log(n) + phi
    exact = -math.expm1(n * math.log1p(-math.exp(-level)))
    rng = seed.generator()
    hits = 0
    per = max(1, _MC_BATCH * 5 // n)
    done = 0
    while done < trials:
        m = min(per, trials - done)
        hits += int(np.count_nonzero(rng.standard_exponential((m, n)).max(axis=1) > level))
        done += m
    freq = hits / trials
    se = math.sqrt(exact * (1 - exact) / trials)
    tol = 3 * se
    return TailCheckReport(f"max_gain(n={n},phi={phi:.6g})", trials, None, freq, exact, tol, abs(freq - exact) <= tol)


def concentration_check(
    n: int,
    delta: float,
    trials: int,
    seed: SeedSpec,
    xi: SlackRule = SlackRule("sqrt_loglog"),
    psi: SlackRule = SlackRule("log"),
    limit: float = 0.05,
) -> tuple[TailCheckReport, TailCheckReport]:
    """Violation frequencies of the mean-interference and active-count bounds.

    Rayleigh gains. Trial ``t`` draws ``k ~ Binomial(n, e^-delta)`` and the
    ``k (k - 1)`` cross gains among the active links from substream
    ``seed.stream + t``. Returns the reports for
    ``mean_i I_i >= (k - 1) + psi`` and ``k <= n q - xi sqrt(n q)``; each
    passes when its frequency is at most ``limit``.
    """
    xi, psi = SlackRule.of(xi), SlackRule.of(psi)
    q = math.exp(-delta)
    nq = n * q
    if nq < 1:
        raise OutOfRegimeError(f"n q = {nq:.4g} < 1 at threshold {delta}")
    k_floor = nq - xi(n) * math.sqrt(nq)
    pad = psi(n)
    viol_i = viol_k = 0
    for t in range(trials):
        rng = seed.child(seed.stream + t).generator()
        k = int(rng.binomial(n, q))
        if not k > k_floor:
            viol_k += 1
        if k >= 1:
            cross = rng.standard_exponential((k, k))
            np.fill_diagonal(cross, 0.0)
            if cross.sum() / k >= (k - 1) + pad:
                viol_i += 1
    fi, fk = viol_i / trials, viol_k / trials
    return (
        TailCheckReport(f"mean_interference(n={n})", trials, None, fi, 0.0, limit, fi <= limit),
        TailCheckReport(f"active_count(n={n})", trials, None, fk, 0.0, limit, fk <= limit),
    )
