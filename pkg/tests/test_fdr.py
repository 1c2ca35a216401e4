import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from fdrkit.density import BinnedHistogram, bin_zvalues, fit_mixture_density
from fdrkit.errors import ConfigError, DomainError, ExtrapolationWarning, InputError
from fdrkit.fdr import (analyze, bh_pvalues, bh_select, bin_fdr, estimate_null, lehmann_link,
                        local_fdr, nonnull_counts, null_pvalues, posterior_odds, power_diagnostic,
                        power_report, prior_adjust, tail_fdr)
from fdrkit.ingest import ZSample
from fdrkit.nullfit import NullModel, theoretical_null


def bh_oracle(p, q, p0=1.0):
    """Largest data threshold t with p0 N t / #{p <= t} <= q; select p <= t."""
    p = np.asarray(p)
    best = None
    for t in p:
        R = np.sum(p <= t)
        # same float expression as the library so exact ties resolve alike
        if p0 * t * p.size <= q * R and (best is None or t > best):
            best = t
    if best is None:
        return np.zeros(p.size, bool)
    return p <= best


def two_groups_sample(N, seed, p0=0.9):
    rng = np.random.default_rng(seed)
    null = rng.random(N) < p0
    return np.where(null, rng.standard_normal(N), rng.normal(3, 1, N) + rng.standard_normal(N))


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.floats(0.01, 0.5),
       st.sampled_from([1.0, 0.8]))
@settings(max_examples=300, deadline=None)
def test_bh_matches_oracle(p, q, p0):
    np.testing.assert_array_equal(bh_pvalues(p, q, p0), bh_oracle(p, q, p0))


def test_bh_ties_and_bounds():
    assert bh_pvalues([0.01, 0.01, 0.5], 0.05).tolist() == [True, True, False]
    assert not bh_pvalues([0.9, 0.95], 0.05).any()
    with pytest.raises(DomainError):
        bh_pvalues([0.1], 0.0)


def test_bh_select_sides():
    z = np.array([-4.0, -3.5, 0.0, 0.1, 3.9, 0.2, -0.3, 0.5, 1.0, -1.0])
    null = theoretical_null()
    left = bh_select(z, null, 0.1, "left")
    assert sorted(left.selected.tolist()) == [0, 1]
    assert left.threshold == -3.5 and left.R == 2
    two = bh_select(z, null, 0.1, "two")
    assert sorted(two.selected.tolist()) == [0, 1, 4]
    np.testing.assert_array_equal(
        np.sort(two.selected), np.nonzero(bh_pvalues(null_pvalues(z, null, "two"), 0.1))[0])
    empty = bh_select(np.zeros(10), null, 0.1)
    assert empty.R == 0 and math.isnan(empty.threshold)
    with pytest.raises(ConfigError):
        null_pvalues(z, null, "up")


def test_closed_form_conversions():
    assert prior_adjust(0.40, 0.9, 0.5) == pytest.approx(0.069, abs=0.001)
    odds, bf = posterior_odds(0.2, 1 / 9)
    assert odds == pytest.approx(4.0, abs=1e-12) and bf == pytest.approx(36.0, abs=1e-12)
    assert posterior_odds(0.0)[0] == math.inf
    assert lehmann_link(0.05, 0.5) == pytest.approx(0.0952, abs=1e-4)
    assert lehmann_link(0.3, 1.0) == pytest.approx(0.3)
    with pytest.raises(DomainError):
        lehmann_link(0.3, 1.5)
    with pytest.raises(DomainError):
        prior_adjust(0.3, 1.0, 0.5)


@given(st.floats(0.05, 0.99), st.floats(0.05, 1.0), st.floats(1e-4, 0.999))
@settings(max_examples=200, deadline=None)
def test_lehmann_link_against_direct_mixture(p0, gamma, F0):
    # F1 = F0^gamma, so f1/f0 = gamma F0^(gamma - 1)
    Fdr = p0 * F0 / (p0 * F0 + (1 - p0) * F0 ** gamma)
    fdr = p0 / (p0 + (1 - p0) * gamma * F0 ** (gamma - 1))
    if 1e-12 < Fdr < 1 - 1e-12:
        assert lehmann_link(Fdr, gamma) == pytest.approx(fdr, rel=1e-9, abs=1e-12)


@given(st.floats(0.01, 0.99), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
@settings(max_examples=200, deadline=None)
def test_prior_adjust_is_bayes_rule(fdr, p0g, p0c):
    # the case's likelihood ratio is unchanged; only the prior odds move
    lr = (fdr / (1 - fdr)) / (p0g / (1 - p0g))
    odds = lr * p0c / (1 - p0c)
    assert prior_adjust(fdr, p0g, p0c) == pytest.approx(odds / (1 + odds), rel=1e-9)
    assert prior_adjust(prior_adjust(fdr, p0g, p0c), p0c, p0g) == pytest.approx(fdr, rel=1e-9)


def test_bin_fdr():
    null = NullModel(0.0, 1.0, 0.93)
    expected = 0.93 * 6033 * 0.2 * stats.norm.pdf(3.2)
    assert expected == pytest.approx(2.68, abs=0.01)
    assert bin_fdr(17, 3.2, 0.2, 6033, null) == pytest.approx(0.158, abs=0.002)
    with pytest.raises(DomainError):
        bin_fdr(0, 3.2, 0.2, 6033, null)


def test_local_fdr_close_when_counts_are_exact():
    # exact expected counts leave only the basis approximation error
    N = 100_000
    edges = np.linspace(-5, 8, 131)
    cdf = 0.9 * stats.norm.cdf(edges) + 0.1 * stats.norm.cdf(edges, 3, math.sqrt(2))
    fit = fit_mixture_density(BinnedHistogram(edges, N * np.diff(cdf)), degree=7, basis="spline")
    z = np.linspace(-2, 4, 13)
    truth = 0.9 * stats.norm.pdf(z) / (0.9 * stats.norm.pdf(z) + 0.1 * stats.norm.pdf(z, 3, math.sqrt(2)))
    np.testing.assert_allclose(local_fdr(z, theoretical_null(0.9), fit), truth, atol=0.03)


@pytest.mark.parametrize("seed", range(5))
def test_tail_fdr_is_average_of_local_fdr(seed):
    z = two_groups_sample(1500, seed)
    fit = fit_mixture_density(bin_zvalues(z))
    null = theoretical_null(0.9)
    lo, hi = fit.range
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        for z0 in (-2.5, -1.0, 0.5):
            num = null.p0 * null.cdf(lo) + integrate.quad(
                lambda t: local_fdr(t, null, fit, raw=True) * fit(t), lo, z0, limit=200)[0]
            den = null.p0 * null.cdf(lo) + integrate.quad(fit, lo, z0, limit=200)[0]
            assert tail_fdr(z0, null, fit, "left", raw=True) == pytest.approx(num / den, abs=1e-3)
        for z0 in (1.5, 3.0):
            num = null.p0 * null.sf(hi) + integrate.quad(
                lambda t: local_fdr(t, null, fit, raw=True) * fit(t), z0, hi, limit=200)[0]
            den = null.p0 * null.sf(hi) + integrate.quad(fit, z0, hi, limit=200)[0]
            assert tail_fdr(z0, null, fit, "right", raw=True) == pytest.approx(num / den, abs=1e-3)


def test_tail_fdr_empirical_cdf():
    z = np.array([-3.0, -2.0, -1.0, 0.0, 1.0])
    null = theoretical_null()
    assert tail_fdr(-2.0, null, z, "left", raw=True) == pytest.approx(stats.norm.cdf(-2) / 0.4)
    assert tail_fdr(0.0, null, z, "right", raw=True) == pytest.approx(0.5 / 0.4)
    assert tail_fdr(0.0, null, z, "right") == 1.0
    with pytest.raises(DomainError):
        tail_fdr(-5.0, null, z, "left")


def test_power_quantities():
    assert nonnull_counts([10, 20], [0.5, 1.0]).tolist() == [5.0, 0.0]
    assert power_diagnostic([5.0, 15.0], [0.2, 0.6]) == pytest.approx(0.5)
    with pytest.raises(InputError):
        nonnull_counts([1, 2, 3], [0.5, 0.5])
    with pytest.raises(DomainError):
        power_diagnostic([0.0, 0.0], [0.1, 0.1])


def test_power_report_on_two_groups():
    z = two_groups_sample(3000, 21)
    fit = fit_mixture_density(bin_zvalues(z))
    rep = power_report(z, fit, theoretical_null(0.9))
    assert 0 < rep.efdr1 < 1
    assert rep.n_right > rep.n_left
    assert rep.nonnull.sum() == pytest.approx(np.sum((1 - rep.bin_fdr) * fit.counts))


def test_estimate_null_dispatch():
    z = two_groups_sample(3000, 22)
    fit = fit_mixture_density(bin_zvalues(z))
    assert estimate_null(z, fit, "theoretical").p0 == 1.0
    assert estimate_null(z, fit, "geometric", p0=0.8).p0 == 0.8
    assert estimate_null(z, fit, "analytic").method == "analytic"
    with pytest.raises(ConfigError):
        estimate_null(z, fit, "permutation")


def test_analyze_pipeline():
    z = ZSample(two_groups_sample(3000, 23))
    res = analyze(z, null="theoretical", p0=1.0, q=0.1, side="right")
    assert res.fdr.shape == (3000,)
    assert np.all((res.fdr >= 0) & (res.fdr <= 1))
    sel = bh_select(z.values, theoretical_null(), 0.1, "right")
    assert set(np.nonzero(res.selected_bh)[0]) == set(sel.selected.tolist())
    rows = list(res.rows())
    assert rows[0]["id"] == "1" and set(rows[0]) >= {"fdr", "Fdr_left", "Fdr_right"}
    # fdr decreases into the right tail for this model
    order = np.argsort(z.values)
    top = res.fdr[order[-50:]]
    assert top.max() < 0.5


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0.01, 0.4), st.floats(0.01, 0.4))
@settings(max_examples=200, deadline=None)
def test_bh_selection_grows_with_q(p, q1, q2):
    lo, hi = sorted((q1, q2))
    small, large = bh_pvalues(p, lo), bh_pvalues(p, hi)
    assert np.all(large[small])
