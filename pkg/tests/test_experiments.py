import math

import numpy as np
import pytest
from scipy import stats

from onoffnet.errors import ConfigurationError, DomainError
from onoffnet.experiments import (
    DENSE,
    VIRTUAL,
    TrialRecord,
    leading_term_ratios,
    run_trial,
    run_trials,
    scaling_sweep,
    summarize,
)
from onoffnet.fading import FadingSpec, SeedSpec, sample_gain_matrix
from onoffnet.netmodel import NetworkParams
from onoffnet.tblas import ThresholdPolicy, achievable_throughput

IDEAL = ThresholdPolicy.idealized()


def record(T, k=1, n=10, delta=1.0, bound=0.0):
    return TrialRecord(n, 0, 0, delta, k, T, T / k if k else math.nan, bound, T > bound)


def test_single_link_dense_trial():
    params = NetworkParams(1, 2.0)
    seed = SeedSpec(42)
    g = sample_gain_matrix(FadingSpec.rayleigh(), 1, seed)[0, 0]
    rec = run_trial(params, IDEAL.with_delta(0.0), DENSE, seed)
    assert rec.k_active == 1
    assert rec.throughput == pytest.approx(math.log1p(2.0 * g), rel=1e-15)


def test_dense_trial_matches_direct_computation():
    n, delta = 200, 3.0
    seed = SeedSpec(8, 5)
    G = sample_gain_matrix(FadingSpec.rayleigh(), n, seed)
    A = np.flatnonzero(np.diag(G) > delta)
    sub = G[np.ix_(A, A)]
    interf = sub.sum(axis=0) - np.diag(sub)
    expected = np.log1p(np.diag(sub) / (1 + interf)).sum()
    rec = run_trial(NetworkParams(n), IDEAL.with_delta(delta), DENSE, seed)
    assert rec.k_active == A.size
    assert rec.throughput == pytest.approx(expected, rel=1e-12)
    assert rec.bound == pytest.approx(achievable_throughput(n, delta, IDEAL))


def test_oracle_field_in_dense_mode():
    rec = run_trial(NetworkParams(10), IDEAL.with_delta(1.0), DENSE, SeedSpec(3), oracle=True)
    assert rec.oracle_throughput >= rec.throughput
    with pytest.raises(ConfigurationError):
        run_trial(NetworkParams(10), IDEAL.with_delta(1.0), VIRTUAL, SeedSpec(3), oracle=True)


def test_dense_and_virtual_throughput_laws_agree():
    params, pol = NetworkParams(1000), IDEAL.with_delta(4.3)
    dense = [r.throughput for r in run_trials(params, pol, DENSE, 1, 500, workers=4)]
    virtual = [r.throughput for r in run_trials(params, pol, VIRTUAL, 2, 500)]
    assert stats.ks_2samp(dense, virtual).pvalue > 0.01


def test_virtual_active_count_is_binomial():
    n, delta, trials = 1000, 4.0, 10_000
    recs = run_trials(NetworkParams(n), IDEAL.with_delta(delta), VIRTUAL, 11, trials)
    k = np.array([r.k_active for r in recs])
    q = math.exp(-delta)
    # pool the tails so every expected cell count is at least 5
    edges = np.arange(int(n * q - 4 * math.sqrt(n * q)), int(n * q + 4 * math.sqrt(n * q)) + 1)
    cdf = stats.binom.cdf(edges, n, q)
    probs = np.diff(np.concatenate([[0.0], cdf[:-1], [1.0]]))
    counts = np.histogram(k, bins=np.concatenate([[-0.5], edges[:-1] + 0.5, [n + 0.5]]))[0]
    keep = probs * trials >= 5
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(probs[keep], probs[~keep].sum()) * trials
    assert stats.chisquare(obs, exp).pvalue > 0.01


def test_virtual_mode_is_sized_by_k_not_n():
    # n far beyond dense reach: only the k x k active block is drawn
    rec = run_trial(NetworkParams(10**9), IDEAL.with_delta(15.0), VIRTUAL, SeedSpec(0))
    assert abs(rec.k_active - 10**9 * math.exp(-15)) < 6 * math.sqrt(10**9 * math.exp(-15))


def test_dense_mode_size_guard_and_unknown_mode():
    with pytest.raises(ConfigurationError):
        run_trial(NetworkParams(10**6), IDEAL.with_delta(10.0), DENSE, SeedSpec(0))
    with pytest.raises(ConfigurationError):
        run_trial(NetworkParams(10), IDEAL.with_delta(1.0), "sparse", SeedSpec(0))
    with pytest.raises(ConfigurationError):
        run_trial(NetworkParams(10), IDEAL, VIRTUAL, SeedSpec(0))


def test_streamed_dense_path_matches_in_memory_path(monkeypatch):
    from onoffnet import experiments

    params, pol, seed = NetworkParams(300), IDEAL.with_delta(3.0), SeedSpec(6, 1)
    a = run_trial(params, pol, DENSE, seed)
    monkeypatch.setattr(experiments, "IN_MEMORY_ENTRIES", 100)
    b = run_trial(params, pol, DENSE, seed)
    assert a.k_active == b.k_active > 0
    assert a.throughput == b.throughput


def test_trial_streams_do_not_repeat():
    recs = run_trials(NetworkParams(500), IDEAL.with_delta(2.0), VIRTUAL, 3, 50)
    assert [r.stream for r in recs] == list(range(50))
    assert len({r.throughput for r in recs}) == 50


def test_threads_do_not_change_results():
    args = (NetworkParams(2000), IDEAL.with_delta(5.0), DENSE, 9, 24)
    assert run_trials(*args, workers=1) == run_trials(*args, workers=8)


def test_summary_of_identical_trials():
    s = summarize([record(2.0)] * 5)
    assert s.mean_T == 2.0 and s.sd_T == 0.0 and s.ci95_T == 0.0


def test_summary_sample_sd():
    s = summarize([record(1.0), record(3.0)])
    assert s.mean_T == 2.0
    assert s.sd_T == pytest.approx(math.sqrt(2), rel=1e-15)


def test_summary_recomputes_from_records():
    recs = run_trials(NetworkParams(1000), IDEAL.with_delta(4.3), VIRTUAL, 5, 200)
    s = summarize(recs)
    T = np.array([r.throughput for r in recs])
    assert s.mean_T == pytest.approx(T.mean(), rel=1e-12)
    assert s.sd_T == pytest.approx(T.std(ddof=1), rel=1e-12)
    assert s.mean_k == pytest.approx(np.mean([r.k_active for r in recs]), rel=1e-12)
    assert s.ci95_T == pytest.approx(1.959963984540054 * T.std(ddof=1) / math.sqrt(T.size), rel=1e-9)


def test_summary_skips_empty_trials_for_rate_per_link():
    s = summarize([record(0.0, k=0), record(2.0, k=2)])
    assert s.mean_rbar == 1.0 and s.mean_k == 1.0


def test_summary_errors():
    with pytest.raises(DomainError):
        summarize([])
    with pytest.raises(DomainError):
        summarize([record(1.0, n=10), record(1.0, n=11)])


def test_leading_term_ratios_are_one_on_leading_terms():
    n = math.exp(12)
    L, LL = 12.0, math.log(12.0)
    r = leading_term_ratios(n, L - 2 * LL + math.log(2 / math.e), L * L / 2, 2 / L)
    assert r == pytest.approx((1.0, 1.0, 1.0), rel=1e-14)


@pytest.mark.parametrize("reps", [0, 29])
def test_sweep_needs_enough_reps(reps):
    with pytest.raises(DomainError):
        scaling_sweep([1000], reps, IDEAL)


def test_sweep_reproducible_across_worker_counts():
    a = scaling_sweep([1000, 5000], 30, IDEAL, seed=4, workers=1)
    b = scaling_sweep([1000, 5000], 30, IDEAL, seed=4, workers=8)
    assert a.rows == b.rows
    assert [r.n for r in a.rows] == [1000, 5000]


def test_sweep_points_use_distinct_streams():
    rep = scaling_sweep([1000, 1000], 30, IDEAL, seed=4, keep_records=True)
    assert rep.rows[0].mean_T != rep.rows[1].mean_T


def test_sweep_with_explicit_thresholds():
    rep = scaling_sweep([1000], 30, IDEAL, deltas=[4.3], keep_records=True)
    assert rep.rows[0].delta == 4.3
    assert all(r.delta == 4.3 for r in rep.records[1000])
    with pytest.raises(ConfigurationError):
        scaling_sweep([1000, 2000], 30, IDEAL, deltas=[4.3])


def test_dense_sweep_size_guard():
    with pytest.raises(ConfigurationError):
        scaling_sweep([10**6], 30, IDEAL, mode=DENSE)
