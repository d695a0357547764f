import json
import math

import numpy as np
import pytest

from chanalloc.connectivity import K_REF_DB
from chanalloc.rng import substream
from chanalloc.scenario import (
    LS,
    MS,
    SS,
    Scenario,
    distance,
    distance_matrix,
    generate_scenario,
    obstacle_fading_matrix,
    setup_class,
)

from conftest import make_scenario


def test_setup_class_lookup():
    assert setup_class("ss") is SS
    assert setup_class("MS") is MS
    assert setup_class(LS) is LS
    with pytest.raises(ValueError):
        setup_class("xl")


@pytest.mark.parametrize(
    "cls,lo,hi",
    [(SS, 8, 20), (MS, 24, 45), (LS, 48, 60)],
)
def test_generated_sizes(cls, lo, hi):
    for seed in range(25):
        s = generate_scenario(cls, seed)
        assert s.n_tenants == cls.n_tenants
        assert s.n_bs == cls.n_bs
        assert lo <= s.n_channels <= hi
        for c in s.channels_per_bs:
            assert cls.channels_per_bs[0] <= c <= cls.channels_per_bs[1]


def test_determinism_bit_identical():
    a = generate_scenario("ss", 7)
    b = generate_scenario("ss", 7)
    assert a.to_dict() == b.to_dict()
    c = generate_scenario("ss", 8)
    assert c.to_dict() != a.to_dict()


def test_geometry_invariants():
    for seed in range(20):
        s = generate_scenario("ms", seed)
        w, h = s.area
        for x, y in s.tenant_positions:
            assert 0.0 < x < w and 0.0 < y < h
        for x, y in s.bs_positions:
            assert x in (0.0, w) or y in (0.0, h)


def test_channel_owner_consistency():
    s = generate_scenario("ls", 3)
    for i, n in enumerate(s.channels_per_bs):
        assert sum(1 for o in s.channel_owner if o == i) == n
    assert len(s.channel_owner) == sum(s.channels_per_bs)


def test_fading_count_exact():
    # SS has 6*8 = 48 entries; round(0.30 * 48) = 14 must be reduced.
    for seed in range(40):
        s = generate_scenario("ss", seed)
        k = np.asarray(s.fading_db)
        assert (k < K_REF_DB).sum() == 14
        reduced = k[k < K_REF_DB]
        assert np.all(reduced >= 0.2 * K_REF_DB - 1e-12)
        assert np.all(reduced <= 0.8 * K_REF_DB + 1e-12)
        assert np.all(k <= K_REF_DB)


def test_fading_counts_other_classes():
    s = generate_scenario("ms", 1)
    assert (np.asarray(s.fading_db) < K_REF_DB).sum() == round(0.30 * 12 * 12)
    s = generate_scenario("ls", 1)
    assert (np.asarray(s.fading_db) < K_REF_DB).sum() == round(0.30 * 20 * 16)


def test_zero_obstacle_variant():
    s = generate_scenario("ss", 5, obstacle_fraction=0.0)
    assert np.all(np.asarray(s.fading_db) == K_REF_DB)


def test_obstacle_matrix_standalone():
    k = obstacle_fading_matrix(6, 8, substream(9, "fading"), fraction=0.5)
    assert (k < K_REF_DB).sum() == round(0.5 * 48)


def test_utility_bounds_valid():
    for seed in range(10):
        s = generate_scenario("ss", seed)
        for c_min, c_max in s.utility_bounds:
            assert 0.0 < c_min < c_max


def test_distance_examples():
    s = make_scenario(
        tenant_positions=[(0.5, 0.5), (10.0, 10.0)],
        bs_positions=[(3.0, 0.0), (10.0, 50.0)],
        channels_per_bs=[1, 1],
    )
    # 3-4-5 triangle from a tenant placed near the origin
    s2 = make_scenario([(3.0, 4.0)], [(0.0, 0.0)], [1])
    assert distance(s2, 0, 0) == 5.0
    assert distance(s, 1, 1) == 40.0
    s3 = make_scenario([(3.0, 0.0001)], [(3.0, 0.0)], [1])
    assert distance(s3, 0, 0) == pytest.approx(0.0, abs=1e-3)
    with pytest.raises(IndexError):
        distance(s, 5, 0)


def test_distance_matrix_matches_scalar():
    s = generate_scenario("ss", 11)
    d = distance_matrix(s)
    for k in range(s.n_tenants):
        for i in range(s.n_bs):
            assert d[k, i] == pytest.approx(distance(s, k, i), rel=1e-12)


def test_serialization_roundtrip(tmp_path):
    s = generate_scenario("ms", 17)
    path = tmp_path / "scenario.json"
    s.save(path)
    loaded = Scenario.load(path)
    assert loaded.to_dict() == s.to_dict()
    # JSON floats round-trip exactly
    assert loaded.tenant_positions == s.tenant_positions
    assert loaded.utility_bounds == s.utility_bounds


def test_invalid_scenarios_rejected():
    with pytest.raises(ValueError):
        make_scenario([(200.0, 10.0)], [(0.0, 0.0)], [1])  # tenant outside
    with pytest.raises(ValueError):
        make_scenario([(10.0, 10.0)], [(50.0, 25.0)], [1])  # BS not on boundary
    with pytest.raises(ValueError):
        make_scenario([(10.0, 10.0)], [(0.0, 0.0)], [1], utility_bounds=[(5.0, 2.0)])
    with pytest.raises(ValueError):
        make_scenario(
            [(10.0, 10.0)], [(0.0, 0.0)], [1], fading_db=[[K_REF_DB + 1.0]]
        )


def test_substream_independence():
    a = substream(1, "alpha").uniform(size=4)
    b = substream(1, "beta").uniform(size=4)
    a2 = substream(1, "alpha").uniform(size=4)
    assert np.all(a == a2)
    assert not np.any(a == b)
    c = substream(1, "alpha", 3).uniform(size=4)
    assert not np.any(a == c)
