import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from papalab.rng import (
    FiniteInt,
    Gaussian,
    HeavyTailNDA,
    Rademacher,
    Scenery,
    StableExact,
    StableParams,
    derive_stream,
    raw_bits,
    sample_gaussian,
    sample_stable,
    scenery_at,
    stream_keys,
    uniform01,
    zigzag,
)

N = 10**6
ALPHA = 1e-3


def test_stream_key_deterministic_and_injective():
    assert derive_stream(42, "xi1", 0).key == derive_stream(42, "xi1", 0).key
    assert derive_stream(42, "xi1", 0).key != derive_stream(42, "xi1", 1).key
    assert derive_stream(42, "xi1", 0).key != derive_stream(42, "xi2", 0).key
    assert derive_stream(42, "xi1", 0).key != derive_stream(43, "xi1", 0).key


def test_stream_key_rejects_bad_input():
    with pytest.raises(ValueError):
        derive_stream(-1, "xi1", 0)
    with pytest.raises(ValueError):
        derive_stream(2**64, "xi1", 0)
    with pytest.raises(ValueError):
        derive_stream(0, "xi1", -1)


def test_stream_keys_matches_single_derivation():
    keys = stream_keys(7, "eta", [0, 5, 9])
    assert keys.shape == (3, 1)
    assert [int(k) for k in keys[:, 0]] == [int(derive_stream(7, "eta", r).key) for r in (0, 5, 9)]


def test_cross_stream_correlation():
    sites = np.arange(N)
    a = Scenery(derive_stream(42, "xi1", 0), Gaussian()).at(sites)
    b = Scenery(derive_stream(42, "xi2", 0), Gaussian()).at(sites)
    assert abs(np.corrcoef(a, b)[0, 1]) < 3 / math.sqrt(N)


def test_lanes_are_uncorrelated():
    key = derive_stream(3, "U", 0).key
    c = np.arange(N, dtype=np.uint64)
    assert abs(np.corrcoef(uniform01(key, c, 0), uniform01(key, c, 1))[0, 1]) < 3 / math.sqrt(N)


def test_uniform_open_interval_and_moments():
    u = uniform01(derive_stream(1, "t", 0).key, np.arange(N, dtype=np.uint64))
    assert u.min() > 0 and u.max() < 1
    assert sps.kstest(u, "uniform").pvalue > ALPHA


@given(st.integers(min_value=-(2**62), max_value=2**62 - 1))
def test_zigzag_bijective_on_pairs(s):
    z = int(zigzag(np.int64(s)))
    assert z == (2 * s if s >= 0 else -2 * s - 1)


def test_zigzag_maps_signs_to_parity():
    s = np.arange(-1000, 1000)
    z = zigzag(s)
    assert len(np.unique(z)) == len(s)
    assert np.all((z[s >= 0] % 2) == 0) and np.all((z[s < 0] % 2) == 1)


@settings(max_examples=50)
@given(st.integers(0, 2**64 - 1), st.integers(-(2**40), 2**40))
def test_scenery_evaluation_is_pure(seed, site):
    sc = Scenery(derive_stream(seed, "xi1", 0), Rademacher())
    assert scenery_at(sc, site) == scenery_at(sc, site)
    assert scenery_at(sc, site) in (-1, 1)


def test_rademacher_mean():
    v = Scenery(derive_stream(5, "xi1", 0), Rademacher()).at(np.arange(-N // 2, N // 2))
    assert set(np.unique(v)) == {-1, 1}
    assert abs(v.mean()) < 3e-3


def test_finite_int_frequencies():
    d = FiniteInt(((-1, "1/3"), (0, "1/3"), (1, "1/3")))
    v = Scenery(derive_stream(5, "xi1", 0), d).at(np.arange(N))
    for x in (-1, 0, 1):
        assert abs(np.mean(v == x) - 1 / 3) < 3e-3
    # goodness of fit at the 1e-3 level
    counts = [np.sum(v == x) for x in (-1, 0, 1)]
    assert sps.chisquare(counts).pvalue > ALPHA


def test_finite_int_validation_and_moments():
    with pytest.raises(ValueError):
        FiniteInt(((0, "1/2"), (1, "1/3")))
    with pytest.raises(ValueError):
        FiniteInt(((0, -1), (1, 2)))
    with pytest.raises(ValueError):
        FiniteInt(())
    d = FiniteInt.uniform([-2, 2])
    assert d.mean == 0 and d.second_moment == 4
    assert np.all(FiniteInt.point(3).sample(np.uint64(1), np.arange(5, dtype=np.uint64)) == 3)


def test_centering_of_skewed_integer_law():
    d = FiniteInt(((-2, "1/3"), (1, "2/3")))
    v = d.sample(derive_stream(9, "c", 0).key, np.arange(N, dtype=np.uint64))
    sigma = math.sqrt(float(d.second_moment))
    assert abs(v.mean()) < 3 * sigma / math.sqrt(N)


def test_gaussian_variance_and_determinism():
    key = derive_stream(11, "g", 0)
    idx = np.arange(N, dtype=np.uint64)
    x = sample_gaussian(key, idx, 1.0)
    assert abs(x.var() - 1) < 0.01
    assert sample_gaussian(key, 17, 1.0) == sample_gaussian(key, 17, 1.0)
    assert abs(sample_gaussian(key, idx, 4.0).std() - 2) < 0.01
    assert sps.kstest(x, "norm").pvalue > ALPHA
    with pytest.raises(ValueError):
        sample_gaussian(key, 0, 0.0)


def test_stable_params_validation():
    for bad in ((1.0, 1, 0), (2.1, 1, 0), (1.5, 0, 0), (1.5, 1, 1.5)):
        with pytest.raises(ValueError):
            StableParams(*bad)


def test_stable_beta_two_is_gaussian_variance_two():
    x = sample_stable(derive_stream(2, "s", 0), np.arange(N, dtype=np.uint64), StableParams(2.0))
    assert abs(x.var() - 2) < 0.02
    assert sps.kstest(x, "norm", args=(0, math.sqrt(2))).pvalue > ALPHA


def test_stable_symmetric_median():
    x = sample_stable(derive_stream(2, "s", 1), np.arange(N, dtype=np.uint64), StableParams(1.5))
    # median of a density-bounded symmetric law: SE ~ 1 / (2 f(0) sqrt(N))
    assert abs(np.median(x)) < 5e-3


@pytest.mark.parametrize("beta,nu", [(1.5, 0.0), (1.5, 0.6), (1.8, -0.4)])
def test_stable_matches_reference_sampler(beta, nu):
    x = sample_stable(derive_stream(4, "s", 0), np.arange(N, dtype=np.uint64), StableParams(beta, 1.0, nu))
    ref = sps.levy_stable.rvs(beta, nu, size=N, random_state=np.random.default_rng(0))
    assert sps.ks_2samp(x, ref).pvalue > ALPHA


@pytest.mark.parametrize("beta,sigma,nu", [(1.5, 1.0, 0.0), (1.3, 0.7, 0.5)])
def test_stable_characteristic_function(beta, sigma, nu):
    p = StableParams(beta, sigma, nu)
    x = sample_stable(derive_stream(8, "s", 0), np.arange(N, dtype=np.uint64), p)
    for u in (0.3, 1.0, 2.0):
        emp = np.mean(np.exp(1j * u * x))
        assert abs(emp - p.char_fn(u)) < 4 / math.sqrt(N)


@pytest.mark.slow
def test_stable_tail_slope():
    n = 10**7
    x = sample_stable(derive_stream(6, "s", 0), np.arange(n, dtype=np.uint64), StableParams(1.5))
    u = np.geomspace(10, 1000, 9)
    surv = np.array([np.mean(np.abs(x) > t) for t in u])
    slope = np.polyfit(np.log(u), np.log(surv), 1)[0]
    assert abs(slope + 1.5) < 0.1


def test_heavy_tail_law_goodness_of_fit():
    d = HeavyTailNDA(1.5, 2.0)
    x = d.sample(derive_stream(7, "h", 0).key, np.arange(N, dtype=np.uint64))
    assert abs(np.median(x)) < 1e-2
    res = sps.kstest(np.abs(x), lambda u: 1 - d.survival(u))
    assert res.pvalue > ALPHA


def test_heavy_tail_survival_is_continuous():
    d = HeavyTailNDA(1.7)
    assert d.survival(0.0) == pytest.approx(1.0)
    assert d.survival(1.0 - 1e-12) == pytest.approx(d.tail_weight)
    assert d.survival(10.0) == pytest.approx(d.tail_weight * 10**-1.7)


def test_raw_bits_broadcast_shapes():
    keys = stream_keys(1, "x", range(3))
    bits = raw_bits(keys, np.arange(5, dtype=np.uint64)[None, :])
    assert bits.shape == (3, 5) and bits.dtype == np.uint64
    assert len(np.unique(bits)) == 15


def test_stable_exact_sample_matches_helper():
    p = StableParams(1.5, 2.0, 0.3)
    key = derive_stream(1, "s", 0)
    idx = np.arange(10, dtype=np.uint64)
    assert np.array_equal(StableExact(p).sample(key.key, idx), sample_stable(key, idx, p))
