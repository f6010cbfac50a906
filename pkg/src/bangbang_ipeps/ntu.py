"""Neighborhood tensor update (NTU) of a gate-enlarged bond.

The bond is truncated by least squares in the metric of the loop-free
cluster made of the two central tensors and their six nearest neighbours.
Each neighbour is contracted with its conjugate over every leg except the one
touching the centre, which leaves a PSD matrix on that leg; the metric of the
pair is therefore the product of one matrix per open leg.

All work happens in the frame where the bond is ``horizontal_ab``.
"""

import logging
import time
import warnings
from typing import Dict, List, Optional, Tuple

import msgspec
import numpy as np

from .container import FORMAT_VERSION
from .errors import ConvergenceWarning, MemoryBudgetError
from .ipeps import (
    BOND_CLASS_ORDER,
    BondClass,
    IPepsState,
    TwoSiteGateFactors,
    absorb_pair,
    apply_one_site,
    from_frame,
    split_zz_gate,
    to_frame,
)
from .linalg import hermitian_psd, ncon, pinv_hermitian
from .operators import x_rotation
from .sequences import GateSequence
from .settings import NtuOptions


__all__ = [
    "NtuEnvironment",
    "GateRecord",
    "EvolutionReport",
    "estimate_bytes",
    "build_environment",
    "truncate_bond",
    "evolve",
]

logger = logging.getLogger(__name__)

# open leg -> (neighbour sublattice, neighbour axis that touches the centre)
_NEIGHBOUR_LEGS = {
    "A_top": ("B", 3),
    "A_left": ("B", 4),
    "A_bottom": ("B", 1),
    "B_top": ("A", 3),
    "B_bottom": ("A", 1),
    "B_right": ("A", 2),
}

_NEGATIVITY_TOL = 1e-10


def _leg_matrix(site: np.ndarray, axis: int) -> np.ndarray:
    # N[bra, ket] = sum over all other legs of conj(X) X
    m = np.moveaxis(site, axis, 0).reshape(site.shape[axis], -1)
    return m.conj() @ m.T


class NtuEnvironment(msgspec.Struct, frozen=True, eq=False):
    """Metric of a horizontal A-B pair, one PSD matrix per open leg.

    Each matrix is indexed ``[bra, ket]`` and has unit trace. ``negativity``
    is the most negative eigenvalue seen before clipping, relative to the
    largest.
    """

    bond_class: BondClass
    legs: Dict[str, np.ndarray]
    negativity: float

    def norm_squared(self, A: np.ndarray, B: np.ndarray) -> float:
        """<pair|pair> of frame tensors ``A``, ``B`` in this metric."""
        n = self.legs
        value = ncon(
            "ptlbx,pTLBX,tT,lL,bB,quxdy,qUXDY,uU,dD,yY->",
            A.conj(), A, n["A_top"], n["A_left"], n["A_bottom"],
            B.conj(), B, n["B_top"], n["B_bottom"], n["B_right"],
        )
        return float(np.real(value))

    def reduced_metric(self, Q: np.ndarray, sublattice: str) -> np.ndarray:
        """Metric pulled back onto the columns of an isometry ``Q``.

        ``Q`` is shaped ``(leg, leg, leg, k)`` with the legs ordered
        (top, left, bottom) for A and (top, bottom, right) for B.
        """
        n = self.legs
        if sublattice == "A":
            n1, n2, n3 = n["A_top"], n["A_left"], n["A_bottom"]
        else:
            n1, n2, n3 = n["B_top"], n["B_bottom"], n["B_right"]
        E = ncon("abck,aA,bB,cC,ABCK->kK", Q.conj(), n1, n2, n3, Q)
        return 0.5 * (E + E.conj().T)


class GateRecord(msgspec.Struct):
    layer: int
    bond_class: str
    beta: float
    pre_dim: int
    post_dim: int
    delta: float
    sweeps: int = 0
    diverged: bool = False


class EvolutionReport(msgspec.Struct, kw_only=True):
    """Per-gate truncation errors of one evolution and their total."""

    N: int
    D_max: int
    gates: List[GateRecord] = []
    deltas: List[float] = []
    epsilon_total: float = 0.0
    warnings: int = 0
    wall_seconds: float = 0.0
    bond_dims: Dict[str, int] = {}
    format_version: str = FORMAT_VERSION

    def add(self, record: GateRecord) -> None:
        self.gates.append(record)
        self.deltas.append(record.delta)
        self.epsilon_total = float(sum(self.deltas))
        if record.diverged:
            self.warnings += 1


def estimate_bytes(state: IPepsState, bond_class: BondClass, r: int = 4) -> int:
    """Working-set estimate of one truncation after a rank-``r`` gate."""
    framed = to_frame(state, bond_class)
    _, t, l, b, x = framed.A.shape
    _, tb, _, bb, rb = framed.B.shape
    cols = 2 * x * r
    entries = 2 * (t * l * b * cols + tb * bb * rb * cols) + 4 * cols * cols
    entries += sum(int(np.prod(s.shape)) for s in (framed.A, framed.B)) * 3
    return 16 * entries


def build_environment(state: IPepsState, bond_class: BondClass,
                      memory_budget_bytes: Optional[int] = None,
                      r: int = 4) -> NtuEnvironment:
    """Contracts the six neighbours of one bond class into leg matrices."""
    bond_class = BondClass(bond_class)
    if memory_budget_bytes is not None:
        estimate = estimate_bytes(state, bond_class, r)
        if estimate > memory_budget_bytes:
            raise MemoryBudgetError(
                f"NTU on {bond_class.value} needs about {estimate} bytes, "
                f"budget is {memory_budget_bytes}", estimate_bytes=estimate)
    framed = to_frame(state, bond_class)
    sites = {"A": framed.A, "B": framed.B}
    legs = {}
    negativity = 0.0
    for name, (sublattice, axis) in _NEIGHBOUR_LEGS.items():
        m, neg = hermitian_psd(_leg_matrix(sites[sublattice], axis))
        if neg < -_NEGATIVITY_TOL:
            logger.warning("leg matrix %s of %s has relative negativity %.2e",
                           name, bond_class.value, neg)
        negativity = min(negativity, neg)
        legs[name] = m / np.trace(m).real
    return NtuEnvironment(bond_class=bond_class, legs=legs, negativity=negativity)


def _als(Theta: np.ndarray, EA: np.ndarray, GB: np.ndarray, rank: int,
         opts: NtuOptions) -> Tuple[np.ndarray, np.ndarray, float, int, bool]:
    """Minimizes tr(D^dag EA D GB), D = X Y - Theta, over X (n x rank) and Y."""

    def cost(X, Y):
        D = X @ Y - Theta
        return float(np.real(np.trace(D.conj().T @ EA @ D @ GB)))

    norm2 = float(np.real(np.trace(Theta.conj().T @ EA @ Theta @ GB)))
    u, s, vh = np.linalg.svd(Theta, full_matrices=False)
    keep = min(rank, len(s))
    root = np.sqrt(s[:keep])
    X = u[:, :keep] * root
    Y = root[:, None] * vh[:keep]
    if norm2 <= 0:
        return X, Y, 0.0, 0, False

    best = (X, Y, cost(X, Y))
    previous = best[2]
    rising = 0
    sweeps = 0
    diverged = False
    for sweeps in range(1, opts.sweeps + 1):
        if previous / norm2 < 1e-28:
            break
        X = Theta @ GB @ Y.conj().T @ pinv_hermitian(Y @ GB @ Y.conj().T, opts.pinv_cutoff)
        XEA = X.conj().T @ EA
        Y = pinv_hermitian(XEA @ X, opts.pinv_cutoff) @ XEA @ Theta
        current = cost(X, Y)
        logger.debug("ALS sweep %d cost %.3e", sweeps, current / norm2)
        if current < best[2]:
            best = (X, Y, current)
        if current > previous * (1 + 1e-12) + 1e-300:
            rising += 1
            if rising >= 2:
                diverged = True
                break
        else:
            rising = 0
        if abs(previous - current) / norm2 < opts.tol:
            break
        previous = current

    X, Y, c = best
    scale = np.sqrt(np.linalg.norm(Y) / np.linalg.norm(X)) if np.any(X) and np.any(Y) else 1.0
    return X * scale, Y / scale, np.sqrt(max(c, 0.0) / norm2), sweeps, diverged


def _truncate(state: IPepsState, factors: TwoSiteGateFactors, bond_class: BondClass,
              D_max: int, opts: NtuOptions) -> Tuple[IPepsState, float, int, bool]:
    if D_max < 1:
        raise ValueError(f"D_max must be >= 1, got {D_max}")
    bond_class = BondClass(bond_class)
    framed = to_frame(state, bond_class)
    A_g, B_g = absorb_pair(framed.A, framed.B, factors)
    if A_g.shape[4] <= D_max:
        return from_frame(IPepsState(A_g, B_g), bond_class).normalized(), 0.0, 0, False

    env = build_environment(state, bond_class, opts.memory_budget_bytes, factors.r)
    _, t, l, b, x = A_g.shape
    _, tb, _, bb, rb = B_g.shape

    # reduce both tensors onto their (physical, bond) legs
    Q_A, R_A = np.linalg.qr(A_g.transpose(1, 2, 3, 0, 4).reshape(t * l * b, 2 * x))
    Q_B, R_B = np.linalg.qr(B_g.transpose(1, 3, 4, 0, 2).reshape(tb * bb * rb, 2 * x))
    kA, kB = Q_A.shape[1], Q_B.shape[1]
    E_A = env.reduced_metric(Q_A.reshape(t, l, b, kA), "A")
    E_B = env.reduced_metric(Q_B.reshape(tb, bb, rb, kB), "B")

    # Theta rows (kA, pA), columns (pB, kB)
    Theta = ncon("ipx,jqx->ipqj", R_A.reshape(kA, 2, x), R_B.reshape(kB, 2, x))
    Theta = Theta.reshape(2 * kA, 2 * kB)
    eye = np.eye(2, dtype=np.complex128)
    EA = np.kron(E_A, eye)
    GB = np.kron(eye, E_B).T

    X, Y, delta, sweeps, diverged = _als(Theta, EA, GB, D_max, opts)
    if diverged:
        warnings.warn(
            f"ALS cost rose in two consecutive sweeps on {bond_class.value}; "
            f"kept the best iterate (delta={delta:.2e})", ConvergenceWarning)
    new = X.shape[1]
    A_new = (Q_A @ X.reshape(kA, 2 * new)).reshape(t, l, b, 2, new).transpose(3, 0, 1, 2, 4)
    Yt = Y.reshape(new, 2, kB).transpose(2, 1, 0).reshape(kB, 2 * new)
    B_new = (Q_B @ Yt).reshape(tb, bb, rb, 2, new).transpose(3, 0, 4, 1, 2)
    state = from_frame(IPepsState(A_new, B_new), bond_class).normalized()
    return state, float(delta), sweeps, diverged


def truncate_bond(state: IPepsState, factors: TwoSiteGateFactors, bond_class: BondClass,
                  D_max: int, opts: Optional[NtuOptions] = None) -> Tuple[IPepsState, float]:
    """Applies a two-site gate to every bond of one class and truncates to ``D_max``.

    Returns the new state and the relative NTU error ``||L - R|| / ||L||``.
    When the enlarged bond fits into ``D_max`` the gate is absorbed exactly
    and the error is zero.
    """
    new_state, delta, _, _ = _truncate(state, factors, bond_class, D_max, opts or NtuOptions())
    return new_state, delta


def evolve(state0: IPepsState, seq: GateSequence, D_max: int,
           opts: Optional[NtuOptions] = None) -> Tuple[IPepsState, EvolutionReport]:
    """Runs a gate sequence, beta_1 first, accumulating the NTU errors."""
    opts = opts or NtuOptions()
    report = EvolutionReport(N=seq.N, D_max=D_max)
    start = time.perf_counter()
    state = state0
    for layer, (beta, theta) in enumerate(seq.layers(), start=1):
        factors = split_zz_gate(beta)
        for bond_class in BOND_CLASS_ORDER:
            pre = state.bond_dims[bond_class]
            state, delta, sweeps, diverged = _truncate(state, factors, bond_class, D_max, opts)
            report.add(GateRecord(
                layer=layer,
                bond_class=bond_class.value,
                beta=float(beta),
                pre_dim=pre,
                post_dim=state.bond_dims[bond_class],
                delta=delta,
                sweeps=sweeps,
                diverged=diverged,
            ))
        state = apply_one_site(state, x_rotation(theta)).normalized()
        logger.info("layer %d/%d beta=%.6f theta=%.6f D=%d epsilon=%.3e",
                    layer, seq.N, beta, theta, state.max_bond, report.epsilon_total)
    report.wall_seconds = time.perf_counter() - start
    report.bond_dims = {k.value: v for k, v in state.bond_dims.items()}
    return state, report
