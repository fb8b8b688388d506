import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from coreness.errors import InvalidExponent, ProbabilityOverflow
from coreness.generators import (BlockModelParams, DegreeCorrections, core_count, default_offset,
                                 power_law_corrections, sample_dc_sbm, sample_sbm)
from coreness.graph import degrees

PARAMS = BlockModelParams(0.3, [[10, 6], [6, 1]])


def test_params_validation_and_predicates():
    assert PARAMS.is_core_periphery()
    assert not BlockModelParams(0.3, [[1, 6], [6, 10]]).is_core_periphery()
    with pytest.raises(ValueError):
        BlockModelParams(0.3, [[1, 2], [3, 1]])
    with pytest.raises(ValueError):
        BlockModelParams(0.3, [[1, -1], [-1, 1]])


def test_mean_degree_closed_form():
    assert PARAMS.mean_degree() == pytest.approx(0.09 * 10 + 2 * 0.21 * 6 + 0.49 * 1)
    assert PARAMS.mean_degree() == pytest.approx(3.91)


def test_core_count_rounds_half_toward_core():
    assert core_count(0.3, 10) == 3
    assert core_count(0.25, 2) == 1  # 0.5 -> 1
    assert core_count(0.3, 2000) == 600


def test_zero_affinity_gives_empty_graph():
    g, _ = sample_sbm(BlockModelParams(0.4, np.zeros((2, 2))), 50, seed=1)
    assert g.m == 0


def test_probability_overflow():
    with pytest.raises(ProbabilityOverflow):
        sample_sbm(BlockModelParams(0.5, [[20, 1], [1, 1]]), 10, seed=0)


def test_sbm_determinism():
    g1, l1 = sample_sbm(PARAMS, 300, seed=42)
    g2, l2 = sample_sbm(PARAMS, 300, seed=42)
    g3, _ = sample_sbm(PARAMS, 300, seed=43)
    assert g1 == g2 and l1 == l2
    assert g1 != g3


def test_sbm_moments():
    # 200 replicates at n = 500: core size is Binomial(n, gamma); the mean
    # degree is (n-1)/n times the closed form because self-pairs are excluded
    n, reps = 500, 200
    sizes, mean_deg = [], []
    for s in range(reps):
        g, lab = sample_sbm(PARAMS, n, seed=1000 + s)
        sizes.append(lab.core_size)
        mean_deg.append(2 * g.m / n)
    se_size = np.sqrt(n * 0.3 * 0.7 / reps)
    assert abs(np.mean(sizes) - 150) < 3 * se_size
    expected = PARAMS.mean_degree() * (n - 1) / n
    assert abs(np.mean(mean_deg) - expected) < 3 * np.std(mean_deg, ddof=1) / np.sqrt(reps)


def test_power_law_formula_small():
    corr = power_law_corrections(3.0, 4, i0=1)
    raw = np.array([1, 2 ** -0.5, 3 ** -0.5, 4 ** -0.5])
    np.testing.assert_allclose(corr.w, raw / raw.mean(), rtol=1e-14)
    assert corr.rho == pytest.approx(1 / 4)


def test_power_law_homogeneous_limit():
    corr = power_law_corrections(1e6, 1000, i0=1)
    np.testing.assert_allclose(corr.w, 1.0, atol=1e-4)


@pytest.mark.parametrize("alpha", [2.0, 1.5, -3])
def test_invalid_exponent(alpha):
    with pytest.raises(InvalidExponent):
        power_law_corrections(alpha, 10, i0=1)


@settings(max_examples=50, deadline=None)
@given(st.floats(2.05, 50), st.integers(2, 3000), st.integers(1, 100))
def test_corrections_unit_mean_non_increasing(alpha, n, i0):
    w = power_law_corrections(alpha, n, i0).w
    assert abs(w.mean() - 1) < 1e-12
    assert np.all(np.diff(w) <= 0)


@pytest.mark.parametrize("alpha", [2.6, 3.0, 4.0, 6.0])
def test_default_offset_avoids_capping(alpha):
    n, c = 2000, PARAMS.c
    i0 = default_offset(alpha, n, c)
    w0 = power_law_corrections(alpha, n, i0).w[0]
    assert w0 * w0 * c.max() / n <= 1
    if i0 > 1:
        w_prev = power_law_corrections(alpha, n, i0 - 1).w[0]
        assert w_prev * w_prev * c.max() / n > 1


def test_default_offset_means_no_capping():
    corr = power_law_corrections(2.6, 2000, c=PARAMS.c)
    info = {}
    sample_dc_sbm(PARAMS, corr, seed=5, info=info)
    assert info["capped_pairs"] == 0


def test_capping_is_counted():
    corr = power_law_corrections(2.6, 500, i0=1)
    info = {}
    g, _ = sample_dc_sbm(BlockModelParams(0.3, [[40, 6], [6, 1]]), corr, seed=5, info=info)
    assert info["capped_pairs"] > 0


def test_dc_core_holds_largest_weights():
    corr = power_law_corrections(3.0, 400, c=PARAMS.c)
    _, lab = sample_dc_sbm(PARAMS, corr, seed=3)
    assert lab.core_size == core_count(0.3, 400)
    assert corr.w[lab.core_mask].min() >= corr.w[~lab.core_mask].max()


def test_dc_determinism():
    corr = power_law_corrections(3.0, 300, c=PARAMS.c)
    a = sample_dc_sbm(PARAMS, corr, seed=9)
    b = sample_dc_sbm(PARAMS, corr, seed=9)
    c = sample_dc_sbm(PARAMS, corr, seed=10)
    assert a[0] == b[0] and a[1] == b[1]
    assert a[0] != c[0]


def test_dc_pair_frequencies_small():
    # n = 6 with fixed weights: each pair's empirical link frequency over
    # 10**5 draws sits within 3 binomial standard errors of the formula
    w = np.array([2.0, 1.5, 1.0, 0.8, 0.4, 0.3])
    corr = DegreeCorrections(w=w, alpha=3.0, i0=1)
    params = BlockModelParams(0.5, [[1.5, 1.0], [1.0, 0.5]])
    draws = 100_000
    rng = np.random.default_rng(11)
    counts = np.zeros((6, 6))
    for _ in range(draws):
        g, lab = sample_dc_sbm(params, corr, seed=rng)
        counts[g.edges[:, 0], g.edges[:, 1]] += 1
    block = np.where(lab.core_mask, 0, 1)
    for i in range(6):
        for j in range(i + 1, 6):
            p = min(1.0, w[i] * w[j] * corr.rho * params.c[block[i], block[j]])
            se = np.sqrt(p * (1 - p) / draws)
            assert abs(counts[i, j] / draws - p) < 3 * se, (i, j)


def test_dc_expected_core_core_degree():
    # expected core-core degree of core node i is c11 * w_i * rho * (W_core - w_i);
    # compare pooled totals over 10 samples
    n = 10_000
    corr = power_law_corrections(3.0, n, c=PARAMS.c)
    w, rho = corr.w, corr.rho
    observed = expected = 0.0
    for s in range(10):
        g, lab = sample_dc_sbm(PARAMS, corr, seed=s)
        core = lab.core_mask
        e = g.edges
        observed += 2 * np.sum(core[e[:, 0]] & core[e[:, 1]])
        wc = w[core].sum()
        expected += np.sum(PARAMS.c[0, 0] * w[core] * rho * (wc - w[core]))
    assert observed == pytest.approx(expected, rel=0.02)


def test_dc_degree_tail_exponent():
    # rank-size regression on the largest sampled degrees: slope -1/(alpha-1)
    corr = power_law_corrections(3.0, 10_000, c=PARAMS.c)
    g, _ = sample_dc_sbm(PARAMS, corr, seed=2)
    k = np.sort(degrees(g))[::-1].astype(float)
    ranks = np.arange(1, k.size + 1)
    sel = slice(20, 1000)
    slope = np.polyfit(np.log(ranks[sel]), np.log(k[sel]), 1)[0]
    alpha_hat = 1 - 1 / slope
    assert 2.5 < alpha_hat < 3.6
    assert corr.w.max() / corr.w.min() > 10


def test_sbm_block_frequencies():
    n, reps = 500, 60
    hits = np.zeros((2, 2))
    pairs = np.zeros((2, 2))
    for s in range(reps):
        g, lab = sample_sbm(PARAMS, n, seed=s)
        b = np.where(lab.core_mask, 0, 1)
        k = np.bincount(b, minlength=2).astype(float)
        pairs += np.array([[k[0] * (k[0] - 1) / 2, k[0] * k[1]], [k[0] * k[1], k[1] * (k[1] - 1) / 2]])
        e = g.edges
        np.add.at(hits, (np.minimum(b[e[:, 0]], b[e[:, 1]]), np.maximum(b[e[:, 0]], b[e[:, 1]])), 1)
    hits[1, 0] = hits[0, 1]
    p = PARAMS.c / n
    se = np.sqrt(p * (1 - p) / pairs)
    assert (np.abs(hits / pairs - p) < 3 * se).all()


def test_unit_weights_match_sbm():
    n, reps = 300, 150
    corr = DegreeCorrections(w=np.ones(n), alpha=np.inf, i0=1)
    m_sbm = [sample_sbm(PARAMS, n, seed=s)[0].m for s in range(reps)]
    m_dc = [sample_dc_sbm(PARAMS, corr, seed=10_000 + s)[0].m for s in range(reps)]
    assert scipy.stats.ttest_ind(m_sbm, m_dc, equal_var=False).pvalue > 1e-3
