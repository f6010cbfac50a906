"""Infinite checkerboard PEPS and its exact gate absorptions.

Tensor ``A`` sits on sites with even ``x + y``, ``B`` on odd ones. Both carry
axes ``[physical, top, left, bottom, right]``. The four inter-sublattice bonds:

* ``horizontal_ab``: A-right / B-left
* ``horizontal_ba``: B-right / A-left
* ``vertical_ab``: A-bottom / B-top
* ``vertical_ba``: B-bottom / A-top

Every bond-class operation runs in the frame where the bond is
``horizontal_ab``; the frame is reached by swapping the sublattices and/or
reflecting the lattice across its diagonal, both of which are involutions.
"""

from enum import Enum
from typing import Any, Dict, Optional, Tuple

import msgspec
import numpy as np

from .container import read_container, write_container
from .errors import NotUnitaryError, ShapeError
from .linalg import as_tensor, factorize_svd, ncon
from .operators import is_unitary, zz_gate


__all__ = [
    "AXES",
    "BondClass",
    "BOND_CLASS_ORDER",
    "IPepsState",
    "TwoSiteGateFactors",
    "init_product_x",
    "apply_one_site",
    "split_zz_gate",
    "absorb_gate_exact",
    "to_frame",
    "from_frame",
    "reflect_vertical",
    "transpose_diagonal",
    "swap_sublattices",
    "save_state",
    "load_state",
]

AXES = ("phys", "top", "left", "bottom", "right")


class BondClass(str, Enum):
    horizontal_ab = "horizontal_ab"
    horizontal_ba = "horizontal_ba"
    vertical_ab = "vertical_ab"
    vertical_ba = "vertical_ba"

# fixed application order of one H2 layer
BOND_CLASS_ORDER = (
    BondClass.horizontal_ab,
    BondClass.horizontal_ba,
    BondClass.vertical_ab,
    BondClass.vertical_ba,
)


class IPepsState(msgspec.Struct, eq=False):
    """Two rank-5 site tensors on the infinite checkerboard."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_tensor(self.A, "site tensor A")
        B = as_tensor(self.B, "site tensor B")
        if A.ndim != 5 or B.ndim != 5:
            raise ShapeError(f"site tensors must have rank 5, got {A.ndim} and {B.ndim}")
        if A.shape[0] != 2 or B.shape[0] != 2:
            raise ShapeError(f"physical extent must be 2, got {A.shape[0]} and {B.shape[0]}")
        # A.top~B.bottom, A.left~B.right, A.bottom~B.top, A.right~B.left
        for a_axis, b_axis in ((1, 3), (2, 4), (3, 1), (4, 2)):
            if A.shape[a_axis] != B.shape[b_axis]:
                raise ShapeError(
                    f"A {AXES[a_axis]} extent {A.shape[a_axis]} does not match "
                    f"B {AXES[b_axis]} extent {B.shape[b_axis]}"
                )
        if not np.any(A) or not np.any(B):
            raise ShapeError("site tensors must not vanish identically")
        self.A = A
        self.B = B

    @property
    def bond_dims(self) -> Dict[BondClass, int]:
        return {
            BondClass.horizontal_ab: self.A.shape[4],
            BondClass.horizontal_ba: self.A.shape[2],
            BondClass.vertical_ab: self.A.shape[3],
            BondClass.vertical_ba: self.A.shape[1],
        }

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims.values())

    def normalized(self) -> "IPepsState":
        """Rescales both tensors to unit Frobenius norm."""
        return IPepsState(self.A / np.linalg.norm(self.A), self.B / np.linalg.norm(self.B))

    def __repr__(self) -> str:
        dims = ", ".join(f"{k.value}={v}" for k, v in self.bond_dims.items())
        return f"{self.__class__.__name__}({dims})"


class TwoSiteGateFactors(msgspec.Struct, frozen=True, eq=False):
    """A two-site gate split as ``sum_s G_A[in, out, s] G_B[in, out, s]``."""

    G_A: np.ndarray
    G_B: np.ndarray
    schmidt: np.ndarray

    @property
    def r(self) -> int:
        return self.G_A.shape[2]

    def gate(self) -> np.ndarray:
        """Reassembled 4x4 gate with rows (out_a, out_b), columns (in_a, in_b)."""
        return ncon("ias,jbs->abij", self.G_A, self.G_B).reshape(4, 4)


def init_product_x() -> IPepsState:
    """Product state with every spin along +X, all bonds of extent 1."""
    plus = np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
    site = plus.reshape(2, 1, 1, 1, 1)
    return IPepsState(site.copy(), site.copy())


def apply_one_site(state: IPepsState, u: np.ndarray) -> IPepsState:
    """Applies the same one-site unitary to every site."""
    u = np.asarray(u, dtype=np.complex128)
    if not is_unitary(u):
        raise NotUnitaryError("one-site gate is not unitary to 1e-12")
    return IPepsState(
        np.tensordot(u, state.A, axes=(1, 0)),
        np.tensordot(u, state.B, axes=(1, 0)),
    )


def split_zz_gate(beta: float) -> TwoSiteGateFactors:
    """Operator-Schmidt split of exp(+i beta Z(x)Z).

    Each factor carries the square root of the Schmidt weights; numerically
    zero weights (below 1e-14 of the largest) are trimmed.
    """
    if not np.isfinite(beta):
        raise ValueError(f"gate angle must be finite, got {beta}")
    gate = zz_gate(beta).reshape(2, 2, 2, 2)
    # (out_a, out_b, in_a, in_b) -> (in_a, out_a, in_b, out_b)
    t = gate.transpose(2, 0, 3, 1)
    U, S, V, _ = factorize_svd(t, ((0, 1), (2, 3)), cutoff=1e-14)
    root = np.sqrt(S)
    G_A = U * root
    G_B = V.transpose(1, 2, 0) * root
    return TwoSiteGateFactors(G_A=G_A, G_B=G_B, schmidt=S)


def swap_sublattices(state: IPepsState) -> IPepsState:
    return IPepsState(state.B, state.A)


def transpose_diagonal(state: IPepsState) -> IPepsState:
    """Reflection across the lattice diagonal: top<->left, bottom<->right."""
    perm = (0, 2, 1, 4, 3)
    return IPepsState(state.A.transpose(perm), state.B.transpose(perm))


def reflect_vertical(state: IPepsState) -> IPepsState:
    """Reflection y -> -y: top<->bottom."""
    perm = (0, 3, 2, 1, 4)
    return IPepsState(state.A.transpose(perm), state.B.transpose(perm))


def to_frame(state: IPepsState, bond_class: BondClass) -> IPepsState:
    """Relabels the lattice so that ``bond_class`` becomes ``horizontal_ab``."""
    bond_class = BondClass(bond_class)
    if bond_class in (BondClass.vertical_ab, BondClass.vertical_ba):
        state = transpose_diagonal(state)
    if bond_class in (BondClass.horizontal_ba, BondClass.vertical_ba):
        state = swap_sublattices(state)
    return state


def from_frame(state: IPepsState, bond_class: BondClass) -> IPepsState:
    bond_class = BondClass(bond_class)
    if bond_class in (BondClass.horizontal_ba, BondClass.vertical_ba):
        state = swap_sublattices(state)
    if bond_class in (BondClass.vertical_ab, BondClass.vertical_ba):
        state = transpose_diagonal(state)
    return state


def absorb_pair(A: np.ndarray, B: np.ndarray,
                factors: TwoSiteGateFactors) -> Tuple[np.ndarray, np.ndarray]:
    """Absorbs the factors into a horizontal A-B pair; the bond grows r-fold."""
    r = factors.r
    p, t, l, b, R = A.shape
    A_new = ncon("pqs,ptlbr->qtlbrs", factors.G_A, A).reshape(2, t, l, b, R * r)
    p, t, L, b, rr = B.shape
    B_new = ncon("pqs,ptlbr->qtlsbr", factors.G_B, B).reshape(2, t, L * r, b, rr)
    return A_new, B_new


def absorb_gate_exact(state: IPepsState, factors: TwoSiteGateFactors,
                      bond_class: BondClass) -> IPepsState:
    """Applies the gate to every bond of one class without truncation."""
    framed = to_frame(state, bond_class)
    A_new, B_new = absorb_pair(framed.A, framed.B, factors)
    return from_frame(IPepsState(A_new, B_new), bond_class)


def save_state(state: IPepsState, directory, metadata: Optional[Dict[str, Any]] = None):
    return write_container(
        directory,
        kind="ipeps",
        tensors={"A": state.A, "B": state.B},
        axes={"A": list(AXES), "B": list(AXES)},
        bonds={k.value: v for k, v in state.bond_dims.items()},
        metadata=metadata,
    )


def load_state(directory) -> IPepsState:
    tensors, _ = read_container(directory, kind="ipeps")
    return IPepsState(tensors["A"], tensors["B"])
