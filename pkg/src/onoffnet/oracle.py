"""Exhaustive throughput maximization over all 2^n active sets (n <= 20)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from onoffnet.errors import SizeGuardError
from onoffnet.netmodel import ActiveSet, NetworkParams, _check_gains, throughput
from onoffnet.tblas import activate

MAX_LINKS = 20
CHUNK_BITS = 14
# candidates within this relative distance of the running maximum are re-evaluated exactly
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class OracleResult:
    best: ActiveSet
    k: int
    throughput: float
    evaluated: int


@dataclass(frozen=True)
class GapReport:
    ratio: float
    best_delta: float
    best_set: ActiveSet
    k_star: int
    k_delta: int
    oracle: OracleResult


def _gray_chunk(start: int, stop: int, n: int):
    """Subsets in Gray-code order for counters ``start..stop-1`` as a 0/1 matrix."""
    m = np.arange(start, stop, dtype=np.int64)
    codes = m ^ (m >> 1)
    bits = ((codes[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)
    return codes, bits


def _chunk_throughputs(G: np.ndarray, diag: np.ndarray, noise: float, start: int, stop: int, n: int):
    codes, bits = _gray_chunk(start, stop, n)
    # interference seen by every receiver, built up one flipped link at a time
    base = bits[0].astype(float) @ G
    flips = codes[1:] ^ codes[:-1]
    flipped = np.log2(flips).astype(np.intp)
    sign = np.where(bits[1:, :][np.arange(flips.size), flipped], 1.0, -1.0)
    steps = sign[:, None] * G[flipped, :]
    total = np.vstack([base, base + np.cumsum(steps, axis=0)])
    interf = np.maximum(total - bits * diag, 0.0)
    rates = np.where(bits, np.log1p(diag / (noise + interf)), 0.0)
    return codes, rates.sum(axis=1)


def _mask_to_set(code: int, n: int) -> ActiveSet:
    return tuple(i for i in range(n) if (code >> i) & 1)


def max_throughput_exhaustive(G, params: NetworkParams) -> OracleResult:
    """Best active set over all subsets, ties going to the lexicographically smallest set.

    Subsets are visited in Gray-code order so each step adds or removes one
    transmitter and updates every receiver's interference in O(n). Sets near
    the approximate maximum are then re-scored exactly with
    :func:`onoffnet.netmodel.throughput`, which makes the answer and its
    reported value independent of the approximate scan.
    """
    G = _check_gains(G)
    n = G.shape[0]
    if n > MAX_LINKS:
        raise SizeGuardError(f"exhaustive search is limited to n <= {MAX_LINKS}, got n={n}")
    diag = np.diag(G).copy()
    noise = 1.0 / params.rho
    total = 1 << n
    chunk = 1 << min(CHUNK_BITS, n)

    best_approx = -math.inf
    candidates: list[tuple[float, int]] = []
    for start in range(0, total, chunk):
        codes, values = _chunk_throughputs(G, diag, noise, start, min(start + chunk, total), n)
        best_approx = max(best_approx, float(values.max()))
        cut = best_approx - TIE_RTOL * (abs(best_approx) + 1)
        keep = values >= cut
        candidates = [c for c in candidates if c[0] >= cut]
        candidates.extend(zip(values[keep].tolist(), codes[keep].tolist()))

    scored = []
    for _, code in candidates:
        s = _mask_to_set(code, n)
        scored.append((-throughput(G, s, params).throughput, s))
    neg_t, best = min(scored)
    return OracleResult(best, len(best), -neg_t, total)


def tblas_optimality_gap(G, params: NetworkParams, deltas: Sequence[float], oracle: Optional[OracleResult] = None) -> GapReport:
    """Best ratio ``T(threshold set) / T*`` over a grid of thresholds."""
    G = _check_gains(G)
    res = oracle or max_throughput_exhaustive(G, params)
    diag = np.diag(G)
    best = (-math.inf, None, ())
    for d in deltas:
        A = activate(diag, d)
        t = throughput(G, A, params).throughput
        if t > best[0]:
            best = (t, float(d), A)
    t, d, A = best
    ratio = t / res.throughput if res.throughput > 0 else 1.0
    return GapReport(ratio, d, A, res.k, len(A), res)
