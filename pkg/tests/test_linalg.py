import numpy as np
import pytest
from numpy.testing import assert_allclose

from bangbang_ipeps.errors import ShapeError
from bangbang_ipeps.linalg import (
    LinearMap,
    contract,
    dominant_eigenpair,
    factorize_polar,
    factorize_svd,
    hermitian_psd,
    ncon,
    pinv_hermitian,
    random_isometry,
)


def _complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_contract_keeps_free_axes_in_order(rng):
    t1 = _complex(rng, 2, 3, 4)
    t2 = _complex(rng, 4, 5)
    out = contract(t1, t2, [(2, 0)])
    assert out.shape == (2, 3, 5)
    assert_allclose(out, np.einsum("abc,cd->abd", t1, t2))


def test_contract_rejects_mismatched_extents(rng):
    with pytest.raises(ShapeError, match="mismatched"):
        contract(_complex(rng, 2, 3), _complex(rng, 4, 2), [(1, 0)])


def test_ncon_matches_einsum(rng):
    a, b, c = _complex(rng, 3, 4), _complex(rng, 4, 5), _complex(rng, 5, 3)
    assert_allclose(ncon("ab,bc,ca->", a, b, c), np.einsum("ab,bc,ca->", a, b, c))


def test_svd_reconstructs_without_truncation(rng):
    t = _complex(rng, 3, 4, 5)
    U, S, V, discarded = factorize_svd(t, ((0,), (1, 2)))
    assert discarded == 0.0
    assert_allclose(np.einsum("ak,k,kbc->abc", U, S, V), t, atol=1e-12)


def test_svd_discarded_weight(rng):
    t = _complex(rng, 4, 6)
    s = np.linalg.svd(t, compute_uv=False)
    _, S, _, discarded = factorize_svd(t, ((0,), (1,)), max_rank=2)
    assert len(S) == 2
    assert discarded == pytest.approx(np.sqrt(np.sum(s[2:] ** 2) / np.sum(s**2)))


def test_svd_rejects_bad_split(rng):
    with pytest.raises(ShapeError):
        factorize_svd(_complex(rng, 2, 2, 2), ((0,), (1,)))


def test_polar_left_and_right(rng):
    m = _complex(rng, 5, 3)
    u, p = factorize_polar(m, "left")
    assert_allclose(u @ p, m, atol=1e-12)
    assert_allclose(u.conj().T @ u, np.eye(3), atol=1e-12)
    assert np.linalg.eigvalsh(p).min() > -1e-12

    m = _complex(rng, 3, 5)
    u, p = factorize_polar(m, "right")
    assert_allclose(p @ u, m, atol=1e-12)
    assert_allclose(u @ u.conj().T, np.eye(3), atol=1e-12)


def test_dominant_eigenpair_dense():
    lam, v = dominant_eigenpair(np.diag([3.0, 1.0, -2.0]).astype(complex))
    assert lam == pytest.approx(3.0)
    assert_allclose(np.abs(v), [1.0, 0.0, 0.0], atol=1e-12)


def test_dominant_eigenpair_iterative():
    d = np.linspace(0.1, 1.0, 300)
    d[-1] = 2.0
    lam, v = dominant_eigenpair(LinearMap(300, lambda x: d * x), tol=1e-12)
    assert lam.real == pytest.approx(2.0)
    assert abs(v[-1]) == pytest.approx(1.0)


def test_hermitian_psd_reports_negativity():
    m, negativity = hermitian_psd(np.diag([1.0, -1e-3]).astype(complex))
    assert negativity == pytest.approx(-1e-3)
    assert np.linalg.eigvalsh(m).min() >= 0.0


def test_pinv_hermitian_drops_small_eigenvalues():
    inv = pinv_hermitian(np.diag([2.0, 1e-20]).astype(complex))
    assert_allclose(inv, np.diag([0.5, 0.0]))


def test_random_isometry(rng):
    q = random_isometry(rng, 6, 3)
    assert_allclose(q.conj().T @ q, np.eye(3), atol=1e-12)
