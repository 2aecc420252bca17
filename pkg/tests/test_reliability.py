import numpy as np
import pytest

from attnforge.crf import LabelMap
from attnforge.errors import ConfigError
from attnforge.masks import ClassProbMaps
from attnforge.reliability import (ThresholdTable, adaptive_thresholds,
                                   constant_reliability, reliability_map)


def cpm(maps):
    maps = np.asarray(maps, np.float32)
    return ClassProbMaps(maps=maps, beta=0.1,
                         present_classes=frozenset(range(1, maps.shape[0])))


def test_constant_threshold_edges():
    maps = cpm(np.random.default_rng(0).random((3, 4, 4)))
    assert constant_reliability(maps, 0.0).r.all()
    assert not constant_reliability(maps, 1.0).r.all() or maps.maps.max() >= 1
    with pytest.raises(ConfigError):
        constant_reliability(maps, 1.5)


def test_constant_threshold_arithmetic():
    maps = cpm([[[0.3, 0.7]], [[0.1, 0.2]]])
    r = constant_reliability(maps, 0.5)
    assert r.r.tolist() == [[0, 1]]


def test_adaptive_threshold_is_alpha_times_region_mean():
    """4x4 fixture checked against a per-pixel hand computation."""
    rng = np.random.default_rng(1)
    a = rng.random((3, 4, 4)).astype(np.float32)  # bg + 2 classes
    s = LabelMap(s=np.array([[0, 0, 1, 1]] * 2 + [[2, 2, 1, 0]] * 2,
                            dtype=np.int32))
    table = adaptive_thresholds(cpm(a), s, alpha=0.8)
    for c in (0, 1, 2):
        region = s.s == c
        want = 0.8 * sum(a[c][region].tolist()) / region.sum()
        assert np.isclose(table.r_c[c], want, rtol=1e-6)
    r = reliability_map(cpm(a), s, table)
    for y in range(4):
        for x in range(4):
            c = s.s[y, x]
            assert r.r[y, x] == (1 if a[c, y, x] >= table.r_c[c] else 0)


def test_uniform_region_fully_reliable_at_alpha_one():
    a = np.zeros((2, 4, 4), np.float32)
    a[1] = 0.6
    a[0] = 0.3
    s = LabelMap(s=np.ones((4, 4), np.int32))
    table = adaptive_thresholds(cpm(a), s, alpha=1.0)
    assert np.isclose(table.r_c[1], 0.6)
    assert reliability_map(cpm(a), s, table).r.all()


def test_alpha_monotonicity():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = rng.random((3, 6, 6)).astype(np.float32)
        s = LabelMap(s=rng.integers(0, 3, (6, 6)).astype(np.int32))
        a1, a2 = sorted(rng.uniform(0.2, 3.0, 2))
        r1 = reliability_map(cpm(a), s, adaptive_thresholds(cpm(a), s, a1))
        r2 = reliability_map(cpm(a), s, adaptive_thresholds(cpm(a), s, a2))
        assert np.all(r2.r <= r1.r)


def test_scale_equivariance():
    rng = np.random.default_rng(3)
    a = rng.random((3, 5, 5)).astype(np.float32)
    s = LabelMap(s=rng.integers(0, 3, (5, 5)).astype(np.int32))
    t1 = adaptive_thresholds(cpm(a), s, alpha=1.0)
    t2 = adaptive_thresholds(cpm(a * 0.25), s, alpha=1.0)
    for c in t1.r_c:
        assert np.isclose(t2.r_c[c], 0.25 * t1.r_c[c], rtol=1e-5)
    r1 = reliability_map(cpm(a), s, t1)
    r2 = reliability_map(cpm(a * 0.25), s, t2)
    assert np.array_equal(r1.r, r2.r)


def test_area_dilution_lowers_threshold():
    """Same total mass spread over a larger region gives a lower r_c."""
    small = np.zeros((2, 4, 4), np.float32)
    small[1, :2, :2] = 1.0  # mass 4 over 4 pixels
    s_small = LabelMap(s=np.where(small[1] > 0, 1, 0).astype(np.int32))
    big = np.zeros((2, 4, 4), np.float32)
    big[1, :2, :] = 0.5     # mass 4 over 8 pixels
    s_big = LabelMap(s=np.where(big[1] > 0, 1, 0).astype(np.int32))
    t_small = adaptive_thresholds(cpm(small), s_small, alpha=1.0)
    t_big = adaptive_thresholds(cpm(big), s_big, alpha=1.0)
    assert t_big.r_c[1] < t_small.r_c[1]


def test_missing_threshold_raises():
    a = np.zeros((2, 3, 3), np.float32)
    s = LabelMap(s=np.ones((3, 3), np.int32))
    with pytest.raises(ConfigError):
        reliability_map(cpm(a), s, ThresholdTable(r_c={0: 0.1}, alpha=1.0))


def test_zero_thresholds_all_ones():
    a = np.zeros((2, 3, 3), np.float32)
    s = LabelMap(s=np.zeros((3, 3), np.int32))
    r = reliability_map(cpm(a), s, ThresholdTable(r_c={0: 0.0}, alpha=1.0))
    assert r.r.all()
