import numpy as np
import pytest
from numpy.testing import assert_allclose

from bangbang_ipeps.errors import NotUnitaryError, ShapeError
from bangbang_ipeps.ipeps import (
    BOND_CLASS_ORDER,
    BondClass,
    IPepsState,
    absorb_gate_exact,
    apply_one_site,
    from_frame,
    init_product_x,
    load_state,
    save_state,
    split_zz_gate,
    to_frame,
)
from bangbang_ipeps.operators import x_rotation, zz_gate


@pytest.fixture
def distinct_state(rng):
    # A: top 2, left 3, bottom 4, right 5
    def site(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    return IPepsState(site(2, 2, 3, 4, 5), site(2, 4, 5, 2, 3))


def test_product_state():
    state = init_product_x()
    assert set(state.bond_dims.values()) == {1}
    assert_allclose(state.A.reshape(2), np.ones(2) / np.sqrt(2))


def test_state_validates_shapes(rng):
    good = rng.standard_normal((2, 1, 1, 1, 1))
    with pytest.raises(ShapeError, match="physical"):
        IPepsState(rng.standard_normal((3, 1, 1, 1, 1)), good)
    with pytest.raises(ShapeError, match="does not match"):
        IPepsState(rng.standard_normal((2, 2, 1, 1, 1)), good)
    with pytest.raises(ShapeError, match="rank 5"):
        IPepsState(rng.standard_normal((2, 1, 1, 1)), good)


def test_bond_dims(distinct_state):
    assert distinct_state.bond_dims == {
        BondClass.horizontal_ab: 5,
        BondClass.horizontal_ba: 3,
        BondClass.vertical_ab: 4,
        BondClass.vertical_ba: 2,
    }


@pytest.mark.parametrize("bond_class", BOND_CLASS_ORDER)
def test_frames_are_involutions(distinct_state, bond_class):
    framed = to_frame(distinct_state, bond_class)
    assert framed.bond_dims[BondClass.horizontal_ab] == distinct_state.bond_dims[bond_class]
    back = from_frame(framed, bond_class)
    assert_allclose(back.A, distinct_state.A)
    assert_allclose(back.B, distinct_state.B)


@pytest.mark.parametrize("beta,rank", [(0.3, 2), (0.0, 1)])
def test_split_zz_gate(beta, rank):
    factors = split_zz_gate(beta)
    assert factors.r == rank
    assert_allclose(factors.gate(), zz_gate(beta), atol=1e-14)


def test_split_rejects_non_finite_angle():
    with pytest.raises(ValueError):
        split_zz_gate(float("nan"))


@pytest.mark.parametrize("bond_class", BOND_CLASS_ORDER)
def test_exact_absorption_grows_one_class(distinct_state, bond_class):
    new = absorb_gate_exact(distinct_state, split_zz_gate(0.2), bond_class)
    for bc, dim in distinct_state.bond_dims.items():
        expected = 2 * dim if bc == bond_class else dim
        assert new.bond_dims[bc] == expected


def test_exact_absorption_on_product_state():
    # exp(i beta ZZ)|++> keeps unit norm and <X> = cos(2 beta) on each site
    state = absorb_gate_exact(init_product_x(), split_zz_gate(0.25), BondClass.horizontal_ab)
    A = state.A.reshape(2, 2)
    B = state.B.reshape(2, 2)
    psi = np.einsum("ax,bx->ab", A, B).reshape(4)
    assert np.vdot(psi, psi).real == pytest.approx(1.0)
    X1 = np.kron(np.array([[0, 1], [1, 0]]), np.eye(2))
    assert np.vdot(psi, X1 @ psi).real == pytest.approx(np.cos(0.5))


def test_one_site_gate_must_be_unitary(product_state):
    with pytest.raises(NotUnitaryError):
        apply_one_site(product_state, 2 * np.eye(2))


def test_normalized(distinct_state):
    state = distinct_state.normalized()
    assert np.linalg.norm(state.A) == pytest.approx(1.0)
    assert np.linalg.norm(state.B) == pytest.approx(1.0)


def test_state_container(tmp_path, distinct_state):
    save_state(distinct_state, tmp_path / "state", metadata={"seed": 3})
    loaded = load_state(tmp_path / "state")
    assert_allclose(loaded.A, distinct_state.A)
    assert_allclose(loaded.B, distinct_state.B)


def test_one_site_gate_and_its_inverse_cancel(distinct_state):
    u = x_rotation(0.37)
    back = apply_one_site(apply_one_site(distinct_state, u), u.conj().T)
    assert_allclose(back.A, distinct_state.A, atol=1e-13)
    assert_allclose(back.B, distinct_state.B, atol=1e-13)
