import numpy as np
import pytest

from attnforge.permutohedral import PermutohedralFilter


def brute_gauss(features, values):
    d2 = ((features[:, None, :] - features[None, :, :]) ** 2).sum(-1)
    k = np.exp(-0.5 * d2)
    return k @ values


@pytest.mark.parametrize("dim,raw_tol", [(2, 0.10), (3, 0.20), (5, 0.35)])
def test_filter_close_to_brute_force(dim, raw_tol):
    """Raw responses drift with dimension (known lattice behaviour); the
    normalized response filter(v)/filter(1), which is what the CRF message
    passing consumes, stays tight."""
    rng = np.random.default_rng(dim)
    n = 120
    feats = rng.random((n, dim)).astype(np.float32) * 3.0
    vals = rng.random((n, 2)).astype(np.float32)
    f = PermutohedralFilter(feats)
    got = f.filter(vals)
    ones = f.filter(np.ones((n, 1), np.float32))
    want = brute_gauss(feats.astype(np.float64), vals.astype(np.float64))
    want_ones = brute_gauss(feats.astype(np.float64), np.ones((n, 1)))
    rel_raw = np.abs(got - want) / np.abs(want)
    assert np.median(rel_raw) < raw_tol
    rel_norm = np.abs(got / ones - want / want_ones) / np.abs(want / want_ones)
    assert np.median(rel_norm) < 0.03
    assert got.min() >= 0


def test_self_response_matches_brute_diagonal():
    """The exact per-pixel self-response equals diag(S^T B S)."""
    rng = np.random.default_rng(0)
    feats = rng.random((40, 2)).astype(np.float32) * 2.0
    f = PermutohedralFilter(feats)
    s = f.self_response()
    for i in [0, 7, 23, 39]:
        e = np.zeros((40, 1), np.float32)
        e[i] = 1.0
        assert np.isclose(f.filter(e)[i, 0], s[i], rtol=1e-5)


def test_mass_roughly_conserved():
    rng = np.random.default_rng(1)
    feats = rng.random((200, 5)).astype(np.float32) * 2.0
    vals = np.ones((200, 1), np.float32)
    got = PermutohedralFilter(feats).filter(vals)
    want = brute_gauss(feats.astype(np.float64), vals.astype(np.float64))
    # raw mass drifts in high dimension; normalization absorbs it downstream
    assert 0.7 < got.sum() / want.sum() < 1.4


def test_linear_in_values():
    rng = np.random.default_rng(2)
    feats = rng.random((50, 3)).astype(np.float32)
    f = PermutohedralFilter(feats)
    a = rng.random((50, 1)).astype(np.float32)
    b = rng.random((50, 1)).astype(np.float32)
    assert np.allclose(f.filter(a) + f.filter(b), f.filter(a + b), atol=1e-4)
