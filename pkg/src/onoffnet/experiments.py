"""Monte Carlo trials and scaling sweeps of threshold link activation.

Two sampling paths produce the same trial statistics:

* ``dense`` draws the whole ``n x n`` gain matrix and activates links by
  threshold;
* ``virtual`` draws only what the active links see: ``k ~ Binomial(n, q)``,
  ``k`` direct gains conditioned on exceeding the threshold and the
  ``k (k - 1)`` cross gains among them. Inactive transmitters emit nothing,
  so nothing else enters the throughput, and memory is O(k^2) instead of
  O(n^2).

Trial ``t`` of a run always draws from its own substream, so results do not
depend on how trials are spread over worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from onoffnet.errors import ConfigurationError, DomainError, OutOfRegimeError
from onoffnet.fading import SeedSpec, iter_gain_rows, sample_truncated_gain
from onoffnet.netmodel import NetworkParams, throughput
from onoffnet.oracle import MAX_LINKS, max_throughput_exhaustive
from onoffnet.tblas import ThresholdPolicy, achievable_throughput, optimize_threshold

DENSE = "dense"
VIRTUAL = "virtual"
MODES = (DENSE, VIRTUAL)
DENSE_MAX_N = 30_000
MIN_SWEEP_REPS = 30
Z95 = 1.959963984540054
# sweep point i, trial t -> stream (i << 32) | t
_STREAM_SHIFT = 32
# largest gain matrix (entries) held in memory at once in dense mode
IN_MEMORY_ENTRIES = 1 << 24


@dataclass(frozen=True)
class TrialRecord:
    n: int
    seed: int
    stream: int
    delta: float
    k_active: int
    throughput: float
    rate_per_link: float
    bound: float
    bound_satisfied: bool
    oracle_throughput: Optional[float] = None


@dataclass(frozen=True)
class SummaryRow:
    n: int
    trials: int
    delta: float
    mean_T: float
    sd_T: float
    mean_k: float
    sd_k: float
    mean_rbar: float
    sd_rbar: float
    ci95_T: float
    violation_fraction: float


@dataclass(frozen=True)
class ScalingRow:
    n: int
    trials: int
    mean_T: float
    sd_T: float
    mean_k: float
    sd_k: float
    mean_rbar: float
    ratio_T: float
    ratio_k: float
    ratio_rbar: float
    ci95_T: float
    delta: float = field(default=math.nan, compare=False)
    violation_fraction: float = field(default=math.nan, compare=False)


@dataclass(frozen=True)
class ScalingReport:
    rows: list
    records: dict = field(default_factory=dict, repr=False)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def _active_submatrix_dense(params: NetworkParams, policy: ThresholdPolicy, seed: SeedSpec):
    n = params.n
    if n * n <= IN_MEMORY_ENTRIES:
        G = next(iter_gain_rows(policy.fading, n, seed, block=n))[1]
        diag = np.diag(G)
        idx = np.flatnonzero(diag > policy.delta)
        return G[np.ix_(idx, idx)]
    # too big to hold: one pass for the diagonal, a second for the active rows
    diag = np.empty(n)
    for start, rows in iter_gain_rows(policy.fading, n, seed):
        diag[start : start + rows.shape[0]] = rows[np.arange(rows.shape[0]), np.arange(start, start + rows.shape[0])]
    idx = np.flatnonzero(diag > policy.delta)
    sub = np.empty((idx.size, idx.size))
    for start, rows in iter_gain_rows(policy.fading, n, seed):
        sel = idx[(idx >= start) & (idx < start + rows.shape[0])]
        if sel.size:
            sub[np.searchsorted(idx, sel)] = rows[sel - start][:, idx]
    return sub


def _active_submatrix_virtual(params: NetworkParams, policy: ThresholdPolicy, seed: SeedSpec):
    q = float(policy.fading.ccdf(policy.delta))
    if not q > 0:
        raise OutOfRegimeError(f"P(g > {policy.delta}) is zero; virtual sampling has nothing to draw")
    rng = seed.generator()
    k = int(rng.binomial(params.n, q))
    sub = policy.fading.sample(rng, (k, k))
    if k:
        np.fill_diagonal(sub, sample_truncated_gain(policy.fading, policy.delta, rng, size=k))
    return sub


def run_trial(params: NetworkParams, policy: ThresholdPolicy, mode: str, seed: SeedSpec, oracle: bool = False) -> TrialRecord:
    """One realization of threshold activation and its throughput."""
    if policy.delta is None:
        raise ConfigurationError("run_trial needs a policy with a threshold")
    if mode == DENSE:
        if params.n > DENSE_MAX_N:
            raise ConfigurationError(f"dense mode is limited to n <= {DENSE_MAX_N}, got n={params.n}")
        sub = _active_submatrix_dense(params, policy, seed)
    elif mode == VIRTUAL:
        if oracle:
            raise ConfigurationError("the oracle needs the full gain matrix; use dense mode")
        sub = _active_submatrix_virtual(params, policy, seed)
    else:
        raise ConfigurationError(f"unknown mode {mode!r}; expected one of {MODES}")
    k = sub.shape[0]
    report = throughput(sub, range(k), params) if k else None
    T = report.throughput if report else 0.0
    try:
        bound = achievable_throughput(params.n, policy.delta, policy)
    except OutOfRegimeError:
        bound = math.nan
    oracle_T = None
    if oracle:
        if params.n > MAX_LINKS:
            raise ConfigurationError(f"oracle comparison needs n <= {MAX_LINKS}")
        G = next(iter_gain_rows(policy.fading, params.n, seed, block=params.n))[1]
        oracle_T = max_throughput_exhaustive(G, params).throughput
    return TrialRecord(
        n=params.n,
        seed=seed.seed,
        stream=seed.stream,
        delta=float(policy.delta),
        k_active=k,
        throughput=T,
        rate_per_link=T / k if k else math.nan,
        bound=bound,
        bound_satisfied=bool(T > bound),
        oracle_throughput=oracle_T,
    )


def run_trials(
    params: NetworkParams,
    policy: ThresholdPolicy,
    mode: str,
    seed: int,
    trials: int,
    workers: int = 1,
    first_stream: int = 0,
) -> list[TrialRecord]:
    """Trials ``0..trials-1`` on streams ``first_stream + t``, in trial order."""
    if trials < 1:
        raise DomainError(f"need at least one trial, got {trials}")
    seeds = [SeedSpec(seed, first_stream + t) for t in range(trials)]
    if workers <= 1:
        return [run_trial(params, policy, mode, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_trial(params, policy, mode, s), seeds))


def _mean_sd(x: np.ndarray) -> tuple[float, float]:
    x = x[~np.isnan(x)]
    if x.size == 0:
        return math.nan, math.nan
    mean = math.fsum(x) / x.size
    if x.size == 1:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((x - mean) ** 2) / (x.size - 1))


def summarize(records: Sequence[TrialRecord]) -> SummaryRow:
    """Mean, sample standard deviation and normal 95% half-width per quantity.

    Trials with no active link have no rate-per-link and are left out of its
    statistics.
    """
    if not records:
        raise DomainError("cannot summarize an empty list of trials")
    n, delta = records[0].n, records[0].delta
    if any(r.n != n or r.delta != delta for r in records):
        raise DomainError("records mix different n or thresholds")
    T = np.array([r.throughput for r in records])
    k = np.array([r.k_active for r in records], dtype=float)
    rbar = np.array([r.rate_per_link for r in records])
    mT, sT = _mean_sd(T)
    mk, sk = _mean_sd(k)
    mr, sr = _mean_sd(rbar)
    viol = sum(not r.bound_satisfied for r in records) / len(records)
    return SummaryRow(n, len(records), delta, mT, sT, mk, sk, mr, sr, Z95 * sT / math.sqrt(len(records)), viol)


def leading_term_ratios(n, mean_T: float, mean_k: float, mean_rbar: float) -> tuple[float, float, float]:
    """Sweep aggregates over the Rayleigh leading terms for T, k and rate-per-link."""
    L = math.log(n)
    LL = math.log(L)
    return (
        mean_T / (L - 2 * LL + math.log(2 / math.e)),
        mean_k / (0.5 * L * L),
        mean_rbar / (2 / L),
    )


def scaling_sweep(
    n_list: Sequence[int],
    reps: int,
    policy: ThresholdPolicy,
    mode: str = VIRTUAL,
    seed: int = 0,
    rho: float = 1.0,
    workers: int = 1,
    deltas: Optional[Sequence[float]] = None,
    keep_records: bool = False,
) -> ScalingReport:
    """Aggregates over ``reps`` trials for each ``n``, with leading-term ratios.

    Each ``n`` uses ``optimize_threshold(n, policy)`` unless ``deltas`` gives
    thresholds explicitly (or ``policy.delta`` fixes one for all ``n``).
    """
    if reps < MIN_SWEEP_REPS:
        raise DomainError(f"a sweep needs at least {MIN_SWEEP_REPS} trials per n, got {reps}")
    if deltas is not None and len(deltas) != len(n_list):
        raise ConfigurationError("deltas must match n_list in length")
    rows, kept = [], {}
    for i, n in enumerate(n_list):
        if deltas is not None:
            d = float(deltas[i])
        elif policy.delta is not None:
            d = policy.delta
        else:
            d = optimize_threshold(n, policy).delta
        recs = run_trials(NetworkParams(n, rho), policy.with_delta(d), mode, seed, reps, workers, i << _STREAM_SHIFT)
        s = summarize(recs)
        rT, rk, rr = leading_term_ratios(n, s.mean_T, s.mean_k, s.mean_rbar)
        rows.append(ScalingRow(n, s.trials, s.mean_T, s.sd_T, s.mean_k, s.sd_k, s.mean_rbar, rT, rk, rr, s.ci95_T, d, s.violation_fraction))
        if keep_records:
            kept[n] = recs
    return ScalingReport(rows, kept)
