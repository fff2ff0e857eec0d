"""Interference, SINR, Shannon rates and throughput of an active set.

Links are indexed from 0. An active set is a sorted tuple of distinct link
indices; link ``i`` transmits at full power iff ``i`` is in the set. Rates
are in nats per channel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from onoffnet.errors import ConfigurationError, DomainError, UndefinedMeanError

ActiveSet = Tuple[int, ...]


@dataclass(frozen=True)
class NetworkParams:
    n: int
    rho: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ConfigurationError(f"rho must be positive and finite, got {self.rho}")


@dataclass(frozen=True)
class LinkMetrics:
    link: int
    interference: float
    sinr: float
    rate: float


@dataclass(frozen=True)
class ThroughputReport:
    """Per-link metrics of every active link plus the aggregate throughput.

    The arrays are aligned with ``active``. ``throughput`` is the
    compensated sum of ``rates`` taken in that order.
    """

    active: ActiveSet
    interference: np.ndarray
    sinr: np.ndarray
    rates: np.ndarray
    throughput: float

    @property
    def k(self) -> int:
        return len(self.active)

    @property
    def rate_per_link(self) -> float:
        return rate_per_link(self)

    def links(self) -> list[LinkMetrics]:
        return [
            LinkMetrics(i, float(z), float(g), float(r))
            for i, z, g, r in zip(self.active, self.interference, self.sinr, self.rates)
        ]


def as_active_set(indices: Iterable[int], n: int) -> ActiveSet:
    a = tuple(sorted(int(i) for i in indices))
    if len(set(a)) != len(a):
        raise DomainError("active set has repeated link indices")
    if a and (a[0] < 0 or a[-1] >= n):
        raise DomainError(f"active link indices must lie in 0..{n - 1}")
    return a


def _check_gains(G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] < 1:
        raise DomainError(f"gain matrix must be square and nonempty, got shape {G.shape}")
    return G


def compensated_column_sums(M: np.ndarray) -> np.ndarray:
    """Column sums of ``M`` with Neumaier compensation, vectorized over columns."""
    s = np.zeros(M.shape[1])
    c = np.zeros(M.shape[1])
    for row in M:
        t = s + row
        big = np.abs(s) >= np.abs(row)
        c += np.where(big, (s - t) + row, (row - t) + s)
        s = t
    return s + c


def interference(G, A: ActiveSet) -> np.ndarray:
    """``I_i = sum_{j in A, j != i} g_ji`` for each ``i`` in ``A``."""
    G = _check_gains(G)
    idx = np.asarray(A, dtype=np.intp)
    sub = G[np.ix_(idx, idx)].copy()
    np.fill_diagonal(sub, 0.0)
    return compensated_column_sums(sub)


def link_sinr(G, A: ActiveSet, params: NetworkParams, i: int) -> float:
    G = _check_gains(G)
    if i not in A:
        raise DomainError(f"link {i} is not active")
    cross = [G[j, i] for j in A if j != i]
    return float(G[i, i] / (1.0 / params.rho + math.fsum(cross)))


def link_rate(sinr: float) -> float:
    if sinr < 0:
        raise DomainError(f"SINR must be nonnegative, got {sinr}")
    return math.log1p(sinr)


def throughput(G, A: Iterable[int], params: NetworkParams) -> ThroughputReport:
    G = _check_gains(G)
    A = as_active_set(A, G.shape[0])
    if not A:
        empty = np.zeros(0)
        return ThroughputReport(A, empty, empty, empty, 0.0)
    idx = np.asarray(A, dtype=np.intp)
    interf = interference(G, A)
    sinr = G[idx, idx] / (1.0 / params.rho + interf)
    rates = np.log1p(sinr)
    return ThroughputReport(A, interf, sinr, rates, math.fsum(rates))


def rate_per_link(report: ThroughputReport) -> float:
    if report.k == 0:
        raise UndefinedMeanError("rate-per-link is undefined for an empty active set")
    return report.throughput / report.k

