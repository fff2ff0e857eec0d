"""Threshold-based link activation and its threshold optimization.

Link ``i`` switches on iff its direct gain ``g_ii`` strictly exceeds the
threshold. The decision needs nothing but the link's own gain, so it runs
fully decentralized. This module also evaluates the deterministic
achievable throughput of a threshold, searches for the best threshold and
provides the Rayleigh closed forms (with the zero-order root solver).

Quantities depending on ``n`` are computed from ``log n`` so that formula
work stays finite for ``n`` far beyond float range (pass a Python int).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from onoffnet.errors import BracketError, ConfigurationError, DomainError, OutOfRegimeError
from onoffnet.fading import FadingSpec
from onoffnet.netmodel import ActiveSet

INV_PHI = (math.sqrt(5) - 1) / 2
GRID_POINTS = 2048
BRACKET_MARGIN = 3.0


def _loglog(n) -> float:
    L = math.log(n)
    return math.log(L) if L > 1 else 0.0


_RULES: dict[str, Callable[[float], float]] = {
    "zero": lambda n: 0.0,
    "log": lambda n: math.log(n),
    "loglog": lambda n: max(_loglog(n), 0.0),
    "sqrt_loglog": lambda n: math.sqrt(max(_loglog(n), 0.0)),
}


@dataclass(frozen=True)
class SlackRule:
    """A slack function of ``n``: a named rule or a constant.

    >>> SlackRule("sqrt_loglog")(10**4) == math.sqrt(math.log(math.log(10**4)))
    True
    >>> SlackRule.of(0.5)(123)
    0.5
    """

    name: str
    value: Optional[float] = None

    def __post_init__(self):
        if self.name == "const":
            if self.value is None or not math.isfinite(self.value) or self.value < 0:
                raise ConfigurationError(f"constant slack must be finite and >= 0, got {self.value}")
        elif self.name not in _RULES:
            raise ConfigurationError(f"unknown slack rule {self.name!r}; expected one of {sorted(_RULES)} or a number")

    @classmethod
    def of(cls, spec: Union["SlackRule", str, float, int]) -> "SlackRule":
        if isinstance(spec, SlackRule):
            return spec
        if isinstance(spec, str):
            return cls(spec)
        return cls("const", float(spec))

    def __call__(self, n) -> float:
        if self.name == "const":
            return self.value
        return _RULES[self.name](n)

    def describe(self):
        return self.value if self.name == "const" else self.name


@dataclass(frozen=True)
class ThresholdPolicy:
    """Threshold plus the slack rules of the achievable-throughput formula.

    ``xi`` discounts the binomial active count, ``psi`` pads the mean
    interference. ``delta`` may stay ``None`` for a policy family whose
    threshold is chosen per ``n``.
    """

    delta: Optional[float] = None
    xi: SlackRule = field(default_factory=lambda: SlackRule("sqrt_loglog"))
    psi: SlackRule = field(default_factory=lambda: SlackRule("log"))
    fading: FadingSpec = field(default_factory=FadingSpec.rayleigh)

    def __post_init__(self):
        object.__setattr__(self, "xi", SlackRule.of(self.xi))
        object.__setattr__(self, "psi", SlackRule.of(self.psi))
        if self.delta is not None and not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ConfigurationError(f"threshold must be finite and >= 0, got {self.delta}")

    @classmethod
    def idealized(cls, fading: Optional[FadingSpec] = None, delta: Optional[float] = None) -> "ThresholdPolicy":
        return cls(delta, SlackRule("zero"), SlackRule("zero"), fading or FadingSpec.rayleigh())

    def with_delta(self, delta: float) -> "ThresholdPolicy":
        return replace(self, delta=float(delta))


@dataclass(frozen=True)
class ThresholdSolution:
    delta: float
    throughput: float
    k_pred: float
    rbar_pred: float
    method: str


def activate(direct_gains, delta: float) -> ActiveSet:
    """Indices ``i`` with ``direct_gains[i] > delta`` (ties stay silent)."""
    g = np.asarray(direct_gains, dtype=float)
    if np.any(g < 0):
        raise DomainError("channel gains must be nonnegative")
    return tuple(int(i) for i in np.flatnonzero(g > delta))


def effective_count(n, delta: float, policy: ThresholdPolicy) -> float:
    """``n q - xi sqrt(n q)``, the active count the bound can rely on."""
    nq = math.exp(math.log(n) + policy.fading.log_ccdf(delta))
    return nq - policy.xi(n) * math.sqrt(nq)


def achievable_throughput(n, delta: float, policy: ThresholdPolicy) -> float:
    """Throughput the threshold ``delta`` achieves with probability tending to one.

    ``m log(1 + delta / (mu m + psi))`` with ``m = n q - xi sqrt(n q)``.
    """
    if delta < 0:
        raise DomainError(f"threshold must be nonnegative, got {delta}")
    m = effective_count(n, delta, policy)
    if not m > 0:
        raise OutOfRegimeError(f"effective active count {m:.4g} <= 0 at threshold {delta:.6g} for n={n}")
    return m * math.log1p(delta / (policy.fading.mean * m + policy.psi(n)))


def _objective(n, policy):
    def f(d):
        try:
            return achievable_throughput(n, d, policy)
        except OutOfRegimeError:
            return -math.inf

    return f


def search_bracket(n, fading: FadingSpec) -> float:
    """Upper end of the threshold search: the 1/n upper quantile plus 3 means."""
    return fading.upper_quantile(-math.log(n)) + BRACKET_MARGIN * fading.mean


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Maximize ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _solution(n, delta, value, policy, method) -> ThresholdSolution:
    nq = math.exp(math.log(n) + policy.fading.log_ccdf(delta))
    m = effective_count(n, delta, policy)
    return ThresholdSolution(delta, value, nq, value / m, method)


def optimize_threshold(n, policy: ThresholdPolicy, points: int = GRID_POINTS) -> ThresholdSolution:
    """Threshold maximizing the achievable throughput.

    Scans a log-uniform grid over ``(0, search_bracket]`` without assuming
    unimodality, then refines by golden-section search between the grid
    neighbours of the best point. The refined point is kept only if it
    beats the best grid value.
    """
    if n < 3:
        raise DomainError(f"threshold optimization needs n >= 3, got {n}")
    hi = search_bracket(n, policy.fading)
    grid = np.geomspace(hi * 1e-4, hi, points)
    f = _objective(n, policy)
    values = np.array([f(d) for d in grid])
    best = int(np.argmax(values))
    if not np.isfinite(values[best]):
        raise ConfigurationError(f"every threshold on the search grid is out of regime for n={n}")
    lo_b = grid[best - 1] if best > 0 else 0.0
    hi_b = grid[min(best + 1, points - 1)]
    d, v = golden_section_max(f, lo_b, hi_b)
    if not v >= values[best]:
        d, v = float(grid[best]), float(values[best])
    return _solution(n, d, v, policy, "grid+golden")


def zero_order_residual(n, delta: float) -> float:
    """``2 n e^-delta - 2 delta - delta^2``, evaluated through ``log n``."""
    return 2.0 * math.exp(math.log(n) - delta) - 2.0 * delta - delta * delta


def _zero_order_gap(log_n: float, delta: float) -> float:
    # log(2 n e^-delta) - log(2 delta + delta^2): same sign as the residual, never overflows
    if delta <= 0:
        return math.inf
    return math.log(2.0) + log_n - delta - math.log(delta * (2.0 + delta))


def solve_zero_order(n, xtol: float = 1e-13) -> float:
    """Root of ``2 n e^-delta = 2 delta + delta^2`` by bisection on ``(0, log n + 3]``.

    The left side falls and the right side rises in delta, so the root is
    unique once the bracket changes sign. Signs are taken in the log domain,
    so ``n`` may exceed float range.
    """
    if n < 3:
        raise DomainError(f"zero-order solver needs n >= 3, got {n}")
    log_n = math.log(n)
    lo, hi = 0.0, log_n + BRACKET_MARGIN
    if not (_zero_order_gap(log_n, lo) > 0 > _zero_order_gap(log_n, hi)):
        raise BracketError(f"no sign change of the zero-order residual on [0, {hi}]")
    while hi - lo > xtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _zero_order_gap(log_n, mid) > 0:
            lo = mid
        else:
            hi = mid
    # pick the endpoint with the smaller residual
    return lo if abs(_zero_order_gap(log_n, lo)) <= abs(_zero_order_gap(log_n, hi)) else hi


@dataclass(frozen=True)
class RayleighAsymptotics:
    delta: float
    throughput: float
    k: float
    rbar: float


def _check_asymptotic_n(n):
    if n < 16:
        raise DomainError(f"Rayleigh leading terms need n >= 16, got {n}")


def rayleigh_asymptotics(n) -> RayleighAsymptotics:
    """Leading terms of the optimal threshold, throughput, active count and rate-per-link.

    Lower-order corrections are omitted on purpose.
    """
    _check_asymptotic_n(n)
    L = math.log(n)
    LL = math.log(L)
    return RayleighAsymptotics(
        delta=L - 2 * LL + math.log(2),
        throughput=L - 2 * LL + math.log(2 / math.e),
        k=0.5 * L * L,
        rbar=2 / L,
    )


def first_order_correction(n, xi: float = 0.0) -> tuple[float, float]:
    """First-order optimal threshold and the magnitude ``xi / log n`` of its remainder.

    The remainder is reported, not added: its constant is not pinned down.
    """
    _check_asymptotic_n(n)
    L = math.log(n)
    LL = math.log(L)
    return L - 2 * LL + math.log(2) + 4 * LL / L, xi / L


def threshold_for(n, policy: ThresholdPolicy, method: str) -> ThresholdSolution:
    """Threshold chosen by ``method``: ``grid+golden``, ``zero-order``, ``first-order`` or ``asymptotic``."""
    if method == "grid+golden":
        return optimize_threshold(n, policy)
    if policy.fading.kind != "rayleigh":
        raise ConfigurationError(f"threshold method {method!r} is a Rayleigh closed form")
    if method == "zero-order":
        d = solve_zero_order(n)
    elif method == "first-order":
        d = first_order_correction(n, policy.xi(n))[0]
    elif method == "asymptotic":
        d = rayleigh_asymptotics(n).delta
    else:
        raise ConfigurationError(f"unknown threshold method {method!r}")
    return _solution(n, d, achievable_throughput(n, d, policy), policy, method)
