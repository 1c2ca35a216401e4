import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fdrkit import sim
from fdrkit.errors import ConfigError, DomainError, ExperimentError, InputError
from fdrkit.sim import (PRIOR_LEFT, PRIOR_TWO_GROUPS, SimSpec, aggregate, block_sizes, fdp,
                        implied_alpha, rho_for_alpha, run_experiment, sigma0_percentile,
                        simulate_correlated, simulate_two_groups, true_fdr)


def test_two_groups_counts_and_reproducibility():
    z, truth = simulate_two_groups(PRIOR_TWO_GROUPS, 1500, seed=3)
    assert z.N == 1500
    assert truth.n_null + truth.n_nonnull == 1500
    assert truth.n_null == pytest.approx(1350, abs=4 * math.sqrt(1500 * 0.09))
    z2, truth2 = simulate_two_groups(PRIOR_TWO_GROUPS, 1500, seed=3)
    assert z == z2 and np.array_equal(truth.mu, truth2.mu)
    assert not z == simulate_two_groups(PRIOR_TWO_GROUPS, 1500, seed=4)[0]
    np.testing.assert_array_equal(truth.mu[truth.null], 0.0)


def test_two_groups_nonnull_marginal():
    z, truth = simulate_two_groups(PRIOR_LEFT, 50_000, seed=5)
    x = z.values[~truth.null]
    # mu ~ N(-3, 1) plus unit noise gives N(-3, 2)
    assert stats.kstest(x, stats.norm(-3, math.sqrt(2)).cdf).pvalue > 1e-3


def test_block_sizes_and_alpha():
    assert block_sizes(10, 3).tolist() == [4, 3, 3]
    assert block_sizes(2700, 10).sum() == 2700
    assert implied_alpha(2700, 10, 0.5) == pytest.approx(0.158, abs=1e-3)
    assert rho_for_alpha(implied_alpha(2700, 10, 0.3), 2700, 10) == pytest.approx(0.3)
    with pytest.raises(ConfigError):
        rho_for_alpha(0.5, 2700, 10)
    with pytest.raises(ConfigError):
        SimSpec(model="correlated-blocks", rho=1.0)


def test_correlated_null_marginals():
    # one coordinate from each block per replicate, so the pooled values are independent
    spec = SimSpec(model="correlated-blocks")
    first = np.r_[0, np.cumsum(block_sizes(spec.n_null, spec.blocks))[:-1]]
    pooled = np.concatenate([simulate_correlated(spec, seed=s)[0].values[first] for s in range(4000)])
    assert abs(pooled.mean()) < 3 / math.sqrt(pooled.size)
    assert abs(pooled.var() - 1) < 0.02
    assert stats.kstest(pooled, "norm").pvalue > 1e-3


def test_correlated_second_moment_tracks_block_variate():
    # E[mean z0^2 | g] = 1 + sqrt(2) A exactly
    spec = SimSpec(model="correlated-blocks")
    A, m2 = [], []
    for s in range(300):
        z, truth = simulate_correlated(spec, seed=s)
        A.append(truth.block_variate)
        m2.append(np.mean(z.values[:spec.n_null] ** 2))
    slope, intercept = np.polyfit(A, m2, 1)
    assert slope == pytest.approx(math.sqrt(2), rel=0.05)
    assert intercept == pytest.approx(1.0, abs=0.01)


def test_correlated_alpha_override():
    _, t1 = simulate_correlated(seed=1, alpha=0.0)
    assert t1.block_variate == 0.0
    z, truth = simulate_correlated(seed=2)
    assert truth.n_null == 2700 and truth.n_nonnull == 300 and z.N == 3000


def test_sigma0_percentile():
    x = stats.norm.ppf((np.arange(20_000) + 0.5) / 20_000)
    assert sigma0_percentile(x) == pytest.approx(1.0, abs=1e-3)
    # 16th/86th percentiles are not symmetric about the median
    assert sigma0_percentile(x, literal=True) == pytest.approx(
        (stats.norm.ppf(0.86) - stats.norm.ppf(0.16)) / 2, abs=1e-3)
    with pytest.raises(InputError):
        sigma0_percentile(np.zeros(50))


@given(st.floats(-5, 5), st.floats(0.1, 10))
@settings(max_examples=50, deadline=None)
def test_sigma0_affine_equivariance(shift, scale):
    x = np.random.default_rng(0).standard_normal(500)
    assert sigma0_percentile(shift + scale * x) == pytest.approx(scale * sigma0_percentile(x), rel=1e-9)


def test_fdp():
    null = np.array([True, True, False, False])
    assert fdp([], null) == 0.0
    assert fdp([0, 2], null) == 0.5
    assert fdp([2, 3], null) == 0.0


def test_true_fdr():
    z = 2.5
    expected = 0.9 * stats.norm.pdf(z) / (0.9 * stats.norm.pdf(z) + 0.1 * stats.norm.pdf(z, 3, math.sqrt(2)))
    assert true_fdr(z) == pytest.approx(expected, rel=1e-12)


def test_run_experiment_reproducible_and_serializable():
    a = run_experiment("fig8", reps=3, seed=12, N=2000)
    b = run_experiment("fig8", reps=3, seed=12, N=2000)
    assert a.records == b.records
    d = json.loads(a.to_json())
    assert d["prng"] == "PCG64" and d["n_ok"] == 3
    assert d["config"]["N"] == 2000
    assert set(a.aggregates) >= {"R", "fcr_paper", "fcr_by", "bayes_coverage"}


def test_table_experiments_smoke():
    rep = run_experiment("table1", reps=4, seed=1)
    agg = rep.aggregates
    assert len(agg["sd_logfdr_theo"]) == 6
    t2 = aggregate("table2", rep.records)
    assert t2["geo_sigma0"]["mean"] == pytest.approx(1.0, abs=0.15)
    assert t2["ana_p0"]["mean"] == pytest.approx(0.9, abs=0.1)


def test_fig6_smoke():
    rep = run_experiment("fig6", reps=20, seed=2)
    agg = rep.aggregates
    assert 0 <= agg["mean_fdp"] <= 1
    assert agg["fdp_low5"] <= agg["fdp_high5"]


def test_failures_tolerated_then_fatal(monkeypatch):
    calls = {"n": 0}

    def flaky(rng, kw):
        calls["n"] += 1
        if calls["n"] % 20 == 0:
            raise DomainError("boom")
        return {"R": 1, "fdp": 0.0, "sigma0": 1.0, "A": 0.0}

    monkeypatch.setitem(sim._REPLICATES, "fig6", flaky)
    rep = run_experiment("fig6", reps=40, seed=0)
    assert len(rep.failures) == 2 and len(rep.records) == 38

    def broken(rng, kw):
        raise DomainError("always")

    monkeypatch.setitem(sim._REPLICATES, "fig6", broken)
    with pytest.raises(ExperimentError):
        run_experiment("fig6", reps=10, seed=0)


def test_run_experiment_errors():
    with pytest.raises(ConfigError):
        run_experiment("table9")
    with pytest.raises(ConfigError):
        run_experiment("fig6", reps=0)


def test_singleton_blocks_are_independent():
    spec = SimSpec(model="correlated-blocks", n_null=500, n_nonnull=0, blocks=500, rho=0.9)
    assert implied_alpha(500, 500, 0.9) == 0.0
    z0 = np.array([simulate_correlated(spec, seed=s)[0].values for s in range(200)])
    r = np.corrcoef(z0[:, :20], rowvar=False)
    off = r[~np.eye(20, dtype=bool)]
    assert np.max(np.abs(off)) < 4 / math.sqrt(200)
    assert stats.kstest(z0.ravel(), "norm").pvalue > 1e-3
