import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from papalab.rng import FiniteInt, Gaussian, HeavyTailNDA, Rademacher, derive_stream
from papalab.stats import endpoint_samples, expected_self_intersection
from papalab.walks import (
    LocalTimeTable,
    ProcessSpec,
    TowerConfig,
    lattice_span,
    local_time,
    replay_level,
    rescaled_local_time,
    self_intersection,
    self_intersection_batch,
    simulate_nn3d,
    simulate_oriented3d,
    simulate_pa_tower,
    simulate_srw,
    simulate_variant,
    tower_batch,
    variant_batch,
)

ONE = FiniteInt.point(1)
ZERO = FiniteInt.point(0)


# ---------------------------------------------------------------------------
# simulate_srw


def test_srw_empty_and_degenerate():
    key = derive_stream(0, "eta", 0)
    assert list(simulate_srw(Rademacher(), 0, key)) == [0]
    assert np.all(simulate_srw(ZERO, 50, key) == 0)


def test_srw_rejects_bad_steps():
    key = derive_stream(0, "eta", 0)
    with pytest.raises(ValueError):
        simulate_srw(Gaussian(), 5, key)
    with pytest.raises(ValueError):
        simulate_srw(FiniteInt(((0, "1/2"), (1, "1/2"))), 5, key)
    with pytest.raises(ValueError):
        simulate_srw(Rademacher(), -1, key)


def test_srw_steps_are_unit():
    z = simulate_srw(Rademacher(), 1000, derive_stream(1, "eta", 0))
    assert z[0] == 0 and set(np.unique(np.diff(z))) == {-1, 1}


@pytest.mark.slow
def test_srw_variance():
    n, reps = 2**14, 10**4
    z = endpoint_samples(ProcessSpec("pa", 1), [n], reps, 3)[:, 0]
    assert abs(z.var() / n - 1) < 0.03


# ---------------------------------------------------------------------------
# PA towers


def test_constant_scenery_gives_identity():
    cfg = TowerConfig(1, ONE, (ONE, ONE, ONE))
    tower = simulate_pa_tower(4, 30, cfg)
    for path in tower.paths:
        assert np.array_equal(path, np.arange(31))


def test_hand_unrolled_recursion():
    z = np.array([0, 1, 0, -1])
    xi = {0: 1, 1: -1, -1: 1}
    assert list(replay_level(z, xi)) == [0, 1, 0, 1]


def test_pa2_second_moment_n2_exact():
    assert expected_self_intersection(Rademacher(), 2) == 2


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 1000), st.integers(2, 4))
def test_recursion_replay(seed, replica, depth):
    cfg = TowerConfig(seed, FiniteInt.uniform([-1, 0, 1]), (Rademacher(), FiniteInt.uniform([-2, 2]), Rademacher()))
    tower = simulate_pa_tower(depth, 64, cfg, replica)
    for q in range(1, depth):
        assert np.array_equal(replay_level(tower.paths[q - 1], cfg.scenery(q, replica)), tower.paths[q])


def test_real_valued_final_level():
    cfg = TowerConfig(2, Rademacher(), (Rademacher(), HeavyTailNDA(1.5)))
    tower = simulate_pa_tower(3, 100, cfg)
    assert tower.paths[2].dtype == np.float64
    assert np.allclose(replay_level(tower.paths[1], cfg.scenery(2)), tower.paths[2])
    with pytest.raises(ValueError):
        tower_batch(4, 10, cfg, [0])


def test_tower_rows_and_batch_consistency():
    cfg = TowerConfig(5)
    tower = simulate_pa_tower(3, 10, cfg, replica=4)
    batch = tower_batch(3, 10, cfg, [3, 4])
    for q in range(3):
        assert np.array_equal(batch[q][1], tower.paths[q])
    rows = list(tower.rows())
    assert tower.columns() == ["step", "level_1", "level_2", "level_3"] and len(rows) == 11
    assert rows[0] == [0, 0, 0, 0]


def test_parity_of_rademacher_levels():
    x = ProcessSpec("pa", 2).paths(500, 9, range(200))
    assert np.all((x - np.arange(501)) % 2 == 0)


def test_horizon_zero_tower():
    tower = simulate_pa_tower(3, 0, TowerConfig(0))
    assert [list(p) for p in tower.paths] == [[0], [0], [0]]


# ---------------------------------------------------------------------------
# three-dimensional models


def test_oriented3d_first_step_and_tower_agreement():
    p = simulate_oriented3d(1, 4)
    assert all(v in (-1, 1) for v in p.values[1])
    cfg = TowerConfig(4)
    big = simulate_oriented3d(300, 4, 2)
    tower = simulate_pa_tower(3, 300, cfg, 2)
    assert np.array_equal(big.z, tower.paths[0])
    assert np.array_equal(big.x, tower.paths[1])
    assert np.array_equal(big.y, tower.paths[2])


@pytest.mark.slow
def test_oriented3d_vertical_variance():
    n, reps = 2**14, 10**4
    z = endpoint_samples(ProcessSpec("oriented3d", coordinate="z"), [n], reps, 8)[:, 0]
    assert abs(z.var() / n - 1) < 0.03


def test_nn3d_unit_steps_and_z_frequency():
    p = simulate_nn3d(10**6, 1)
    inc = np.abs(np.diff(p.values, axis=0)).sum(axis=1)
    assert np.all(inc <= 1)
    # a horizontal move along a line always moves: +-1 from the scenery
    assert np.all(inc == 1)
    zfreq = np.mean(np.diff(p.z) != 0)
    assert abs(zfreq - 0.5) < 3 * math.sqrt(0.25 / 10**6)


@pytest.mark.slow
def test_nn3d_vertical_variance():
    n, reps = 2**14, 10**4
    z = endpoint_samples(ProcessSpec("nn3d", coordinate="z"), [n], reps, 2)[:, 0]
    assert abs(z.var() / n - 0.5) < 0.5 * 0.03


def test_twin_papa_constant_sceneries():
    p = simulate_variant("twin_papa", 20, 0, 0, (ONE, ONE))
    assert np.array_equal(p.x, np.arange(21)) and np.array_equal(p.y, np.arange(21))


def test_driven_by_2d_first_step():
    for r in range(20):
        p = simulate_variant("papa_driven_by_2d", 1, 3, r)
        assert p.x[1] in (-1, 1)


def test_variant_walks_move_every_step():
    for kind in ("papa_driven_by_y", "papa_driven_by_z", "papa_driven_by_2d"):
        p = simulate_variant(kind, 200, 1)
        assert set(np.unique(np.abs(np.diff(p.y)))) == {1}
        assert set(np.unique(np.abs(np.diff(p.z)))) == {1}
    with pytest.raises(ValueError):
        simulate_variant("nope", 5, 0)


def test_twin_papa_correlation():
    x, y, _ = variant_batch("twin_papa", 2**12, 6, range(10**4))
    assert abs(np.corrcoef(x[:, -1], y[:, -1])[0, 1]) < 0.05


# ---------------------------------------------------------------------------
# local times


PATH = np.array([0, 1, 0, -1, 0, 7])


def test_local_time_examples():
    assert local_time(PATH, 5).counts == {0: 3, 1: 1, -1: 1}
    assert local_time(np.zeros(11, dtype=np.int64), 10).counts == {0: 10}
    assert local_time(PATH, 0).counts == {}
    with pytest.raises(ValueError):
        local_time(PATH, 6)


def test_self_intersection_examples():
    assert self_intersection(local_time(PATH, 5)) == 11
    assert self_intersection(local_time(np.zeros(9, dtype=np.int64), 8)) == 64
    assert expected_self_intersection(Rademacher(), 4) == 6


@settings(max_examples=50)
@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=80))
def test_occupation_identity_and_bounds(steps):
    path = np.concatenate([[0], np.cumsum(steps)])
    n = len(steps)
    table = local_time(path, n)
    assert sum(table.counts.values()) == n
    v = self_intersection(table)
    assert n <= v <= n * n
    assert (v == n * n) == bool(np.all(path[:n] == path[0]))
    assert self_intersection_batch(path[None, :], n)[0] == v


def test_local_time_table_lookup_and_rows():
    t = local_time(PATH, 5)
    assert t[0] == 3 and t[5] == 0 and t[-9] == 0
    assert t.columns() == ["site", "count"]
    assert sorted(t.rows()) == [[-1, 1], [0, 3], [1, 1]]
    assert isinstance(t, LocalTimeTable)


def test_rescaled_local_time_examples():
    assert rescaled_local_time(PATH, 4, 0.0, 0.0, 0.5) == 0
    zeros = np.zeros(101, dtype=np.int64)
    assert rescaled_local_time(zeros, 100, 1.0, 0.0, 0.3) == pytest.approx(100**0.3)
    assert rescaled_local_time(np.array([0, 1, 0, -1, 0]), 4, 1.0, 0.0, 0.5) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rescaled_local_time(PATH, 4, 1.5, 0.0, 0.5)


# ---------------------------------------------------------------------------
# lattice span


def test_lattice_span_examples():
    s = lattice_span(Rademacher())
    assert (s.d, s.a, s.d0) == (2, 1, 1)
    s = lattice_span(FiniteInt.uniform([-1, 0, 1]))
    assert (s.d, s.a) == (1, 0)
    s = lattice_span(FiniteInt.uniform([-2, 2]))
    assert (s.d, s.a, s.d0) == (2, 1, 2)
    assert s.contains(2) and s.contains(-6) and not s.contains(4) and not s.contains(1)


def test_lattice_span_rejections():
    with pytest.raises(ValueError):
        lattice_span(Gaussian())
    with pytest.raises(ValueError):
        lattice_span(FiniteInt.point(3))


@settings(max_examples=50)
@given(st.lists(st.integers(-20, 20), min_size=2, max_size=5, unique=True))
def test_lattice_span_covers_support(values):
    span = lattice_span(FiniteInt.uniform(values))
    assert all(span.contains(v) for v in values)
    assert math.gcd(span.a, span.d) == 1


def test_process_spec_validation_and_final_dist():
    with pytest.raises(ValueError):
        ProcessSpec("nope")
    with pytest.raises(ValueError):
        ProcessSpec("pa", 0)
    with pytest.raises(ValueError):
        ProcessSpec("oriented3d", coordinate="w")
    ht = HeavyTailNDA(1.5)
    assert ProcessSpec("pa", 3, sceneries=(Rademacher(), ht)).final_dist == ht
    assert ProcessSpec("pa", 1, step=FiniteInt.uniform([-1, 1])).final_dist == FiniteInt.uniform([-1, 1])
    x = ProcessSpec("oriented3d", coordinate="y").paths(50, 1, [0, 1])
    assert x.shape == (2, 51)
    assert Fraction(FiniteInt.uniform([-2, 2]).second_moment) == 4
