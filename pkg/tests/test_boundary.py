import numpy as np
import pytest
from numpy.testing import assert_allclose

from bangbang_ipeps.boundary import (
    RowApplied,
    apply_row,
    boundary_x,
    canonicalize,
    compress,
    converge_boundary,
    fidelity_per_site,
    load_boundary,
    make_double,
    save_boundary,
    trivial_boundary,
    truncate_svd,
)
from bangbang_ipeps.errors import ShapeError


def _random_mps(rng, chi=3, d=2):
    def t():
        return rng.standard_normal((chi, d, d, chi)) + 1j * rng.standard_normal((chi, d, d, chi))

    return t(), t()


def test_trivial_boundary_is_canonical():
    b = trivial_boundary(2, 3)
    assert b.chi == 1
    assert b.canonical_residual() < 1e-14


def test_row_must_fit_the_boundary(random_state):
    with pytest.raises(ShapeError):
        apply_row(trivial_boundary(1, 1), make_double(random_state))


def test_row_applied_enlarges_the_bond(random_state):
    big = apply_row(trivial_boundary(2, 2), make_double(random_state))
    TA, TB = big.explicit()
    assert TA.shape == (9, 2, 2, 9)
    assert big.bond_ab == 9 and big.bond_ba == 9


def test_double_tensor_legs(random_state):
    AA, _ = make_double(random_state)
    assert AA.shape == (4, 9, 4, 9)
    assert AA.explicit().shape == (4, 9, 4, 9)


def test_canonical_form_keeps_the_state(rng):
    TA, TB = _random_mps(rng)
    b = canonicalize(TA, TB)
    assert b.canonical_residual() < 1e-10
    assert fidelity_per_site(b, (TA, TB)) == pytest.approx(1.0, abs=1e-6)


def test_fidelity_is_one_for_identical_chains(rng):
    mps = _random_mps(rng)
    assert fidelity_per_site(mps, mps) == pytest.approx(1.0, abs=1e-12)


def test_svd_truncation_baseline(rng):
    TA, TB = _random_mps(rng, chi=4)
    full = truncate_svd((TA, TB), 4)
    assert fidelity_per_site(full, (TA, TB)) == pytest.approx(1.0, abs=1e-8)
    small = truncate_svd((TA, TB), 2)
    assert small[0].shape == (2, 2, 2, 2)
    assert fidelity_per_site(small, (TA, TB)) <= 1.0 + 1e-10


def test_product_state_boundary(product_state, boundary_opts):
    b = converge_boundary(product_state, "top", 4, boundary_opts)
    assert b.chi == 1
    assert b.canonical_residual() < 1e-12
    # the first row already reproduces the fixed point
    assert b.iterations == 1
    assert boundary_x(b, make_double(product_state)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("side", ["top", "bottom"])
def test_boundary_of_a_shallow_circuit(depth_one, boundary_opts, side):
    _, state, _ = depth_one
    b = converge_boundary(state, side, 8, boundary_opts)
    assert b.canonical_residual() < 1e-10
    lam_l, lam_r = b.eigenvalues
    assert abs(lam_l - lam_r) <= 1e-6 * abs(lam_l)
    assert b.chi <= 8
    for s in b.spectrum().values():
        assert np.linalg.norm(s) == pytest.approx(1.0)


def test_unknown_side(product_state):
    with pytest.raises(ValueError):
        converge_boundary(product_state, "left", 4)


def test_boundary_container(tmp_path, rng):
    b = canonicalize(*_random_mps(rng))
    save_boundary(b, tmp_path / "top")
    loaded = load_boundary(tmp_path / "top")
    assert_allclose(loaded.TA_L, b.TA_L)
    assert_allclose(loaded.C_BA, b.C_BA)
    assert loaded.overlap == pytest.approx(b.overlap)


@pytest.mark.filterwarnings("ignore::bangbang_ipeps.errors.ConvergenceWarning")
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_compression_never_loses_overlap(seed):
    TA, TB = _random_mps(np.random.default_rng(seed), chi=8)
    small = compress(RowApplied.from_mps(TA, TB), 4)
    history = np.array(small.history)
    assert len(history) >= 1
    assert np.all(np.diff(history) >= -1e-12 * history[:-1])
    assert small.chi == 4
    assert small.canonical_residual() < 1e-10
    baseline = fidelity_per_site(truncate_svd((TA, TB), 4), (TA, TB))
    assert fidelity_per_site(small, (TA, TB)) >= baseline - 1e-6


def test_boundary_x_of_the_trivial_boundary(product_state):
    assert boundary_x(trivial_boundary(1, 1), make_double(product_state)) == pytest.approx(1.0)


def test_lazy_row_matches_the_explicit_double_tensor(random_state, rng):
    def t(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    AA, BB = make_double(random_state)
    TA, TB = t(3, 2, 2, 4), t(4, 2, 2, 3)
    lazy = apply_row((TA, TB), (AA, BB)).explicit()

    def fused(T, double):
        c, d, _, C = T.shape
        full = double.explicit()
        _, l2, b2, r2 = full.shape
        out = np.einsum("cxC,xlbr->clbCr", T.reshape(c, d * d, C), full)
        b = int(round(np.sqrt(b2)))
        return out.reshape(c * l2, b, b, C * r2)

    assert_allclose(lazy[0], fused(TA, AA), atol=1e-12)
    assert_allclose(lazy[1], fused(TB, BB), atol=1e-12)
