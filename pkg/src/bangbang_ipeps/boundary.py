"""Top and bottom boundary MPS of the double-layer network.

The boundary is a two-site unit-cell infinite MPS whose tensors are shaped
``(left, ket, bra, right)``: the physical pair attaches to the ket and bra
copies of the legs of the row underneath. ``TA`` sits above A sites and
``TB`` above B sites, so ``C_AB`` is the bond between ``TA`` and ``TB`` on
its right.

One power-method step applies a row of double tensors (kept lazy: site
tensor and conjugate are contracted one after the other), compresses the
bond back to ``chi`` by maximizing the overlap in mixed canonical form, and
relabels the sublattices because the next row is shifted by one site.

The bottom boundary is the top boundary of the vertically reflected state.
"""

import logging
import warnings
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import msgspec
import numpy as np

from .container import read_container, write_container
from .errors import ConvergenceError, ConvergenceWarning, DegenerateNormError, ShapeError
from .ipeps import IPepsState, reflect_vertical
from .linalg import (
    LinearMap,
    dominant_eigenpair,
    factorize_polar,
    hermitian_psd,
    ncon,
    random_isometry,
)
from .operators import X
from .settings import BoundaryOptions


__all__ = [
    "DoubleTensor",
    "RowApplied",
    "BoundaryMPS",
    "make_double",
    "trivial_boundary",
    "apply_row",
    "compress",
    "canonicalize",
    "converge_boundary",
    "boundary_x",
    "fidelity_per_site",
    "truncate_svd",
    "save_boundary",
    "load_boundary",
]

logger = logging.getLogger(__name__)

Side = Literal["top", "bottom"]

# relative overlap loss tolerated before a compression step is rejected
_OVERLAP_SLACK = 1e-12
_MIN_STEP = 2.0 ** -20


class DoubleTensor(msgspec.Struct, frozen=True, eq=False):
    """A site tensor and its conjugate joined over the physical leg.

    Only ``site`` is stored; ``explicit`` materializes the fused tensor with
    legs (top, left, bottom, right) of extent D**2 each, ket index major.
    """

    site: np.ndarray

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(d * d for d in self.site.shape[1:])

    def explicit(self) -> np.ndarray:
        X = self.site
        _, t, l, b, r = X.shape
        AA = ncon("ptlbr,pTLBR->tTlLbBrR", X, X.conj())
        return AA.reshape(t * t, l * l, b * b, r * r)


def make_double(state: IPepsState) -> Tuple[DoubleTensor, DoubleTensor]:
    return DoubleTensor(state.A), DoubleTensor(state.B)


def _identity_site(d: int) -> np.ndarray:
    # passes the boundary physical pair straight through
    return np.eye(d, dtype=np.complex128).reshape(1, d, 1, d, 1)


class RowApplied(msgspec.Struct, frozen=True, eq=False):
    """Boundary tensors with one row of double tensors underneath, not fused.

    The enlarged bond index is (boundary bond, ket bond, bra bond).
    """

    TA: np.ndarray
    TB: np.ndarray
    XA: np.ndarray
    XB: np.ndarray

    @classmethod
    def from_mps(cls, TA: np.ndarray, TB: np.ndarray) -> "RowApplied":
        """An explicit MPS seen as a row-applied one with identity sites."""
        return cls(TA, TB, _identity_site(TA.shape[1]), _identity_site(TB.shape[1]))

    @property
    def bond_ab(self) -> int:
        return self.TA.shape[3] * self.XA.shape[4] ** 2

    @property
    def bond_ba(self) -> int:
        return self.TA.shape[0] * self.XA.shape[2] ** 2

    @property
    def phys_A(self) -> int:
        return self.XA.shape[3]

    @property
    def phys_B(self) -> int:
        return self.XB.shape[3]

    def _fused(self, T, X) -> np.ndarray:
        c, _, _, C = T.shape
        _, _, k, d, K = X.shape
        t = ncon("cuwC,pukdK,pwbeB->ckbdeCKB", T, X, X.conj())
        return t.reshape(c * k * k, d, d, C * K * K)

    def explicit(self) -> Tuple[np.ndarray, np.ndarray]:
        """The enlarged MPS tensors, bond extent chi * D**2."""
        return self._fused(self.TA, self.XA), self._fused(self.TB, self.XB)


class BoundaryMPS(msgspec.Struct, frozen=True, eq=False):
    """Two-site boundary MPS in mixed canonical form.

    ``TA_C = TA_L C_AB = C_BA TA_R`` and ``TB_C = TB_L C_BA = C_AB TB_R`` hold
    up to the compression error; centers and bond matrices have unit norm.
    """

    TA_L: np.ndarray
    TB_L: np.ndarray
    TA_R: np.ndarray
    TB_R: np.ndarray
    TA_C: np.ndarray
    TB_C: np.ndarray
    C_AB: np.ndarray
    C_BA: np.ndarray
    overlap: float = 1.0
    eigenvalues: Tuple[complex, complex] = (1.0, 1.0)
    converged: bool = True
    iterations: int = 0
    history: Tuple[float, ...] = ()

    @property
    def chi_ab(self) -> int:
        return self.C_AB.shape[0]

    @property
    def chi_ba(self) -> int:
        return self.C_BA.shape[0]

    @property
    def chi(self) -> int:
        return max(self.chi_ab, self.chi_ba)

    def tensors(self) -> Tuple[np.ndarray, np.ndarray]:
        """Left-canonical unit cell, which alone represents the MPS."""
        return self.TA_L, self.TB_L

    def swapped(self) -> "BoundaryMPS":
        """Relabels A <-> B, the boundary seen from a row shifted by one site."""
        return msgspec.structs.replace(
            self,
            TA_L=self.TB_L, TB_L=self.TA_L,
            TA_R=self.TB_R, TB_R=self.TA_R,
            TA_C=self.TB_C, TB_C=self.TA_C,
            C_AB=self.C_BA, C_BA=self.C_AB,
        )

    def canonical_residual(self) -> float:
        """Largest deviation of the four isometry conditions from identity."""
        residuals = []
        for T in (self.TA_L, self.TB_L):
            m = T.reshape(-1, T.shape[3])
            residuals.append(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))
        for T in (self.TA_R, self.TB_R):
            m = T.reshape(T.shape[0], -1)
            residuals.append(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))
        return float(max(residuals))

    def gauge_residual(self) -> float:
        """Largest mismatch between the two mixed canonical forms."""
        def mat_l(T):
            return T.reshape(-1, T.shape[3])

        def mat_r(T):
            return T.reshape(T.shape[0], -1)

        pairs = (
            (mat_l(self.TA_L) @ self.C_AB, mat_l(self.TA_C)),
            (self.C_BA @ mat_r(self.TA_R), mat_r(self.TA_C)),
            (mat_l(self.TB_L) @ self.C_BA, mat_l(self.TB_C)),
            (self.C_AB @ mat_r(self.TB_R), mat_r(self.TB_C)),
        )
        return float(max(np.linalg.norm(a - b) for a, b in pairs))

    def spectrum(self) -> Dict[str, np.ndarray]:
        """Normalized singular values of both bond matrices."""
        out = {}
        for name, C in (("AB", self.C_AB), ("BA", self.C_BA)):
            s = np.linalg.svd(C, compute_uv=False)
            out[name] = s / np.linalg.norm(s)
        return out


def _closure(d: int) -> np.ndarray:
    return (np.eye(d, dtype=np.complex128) / np.sqrt(d)).reshape(1, d, d, 1)


def trivial_boundary(d_A: int, d_B: int) -> BoundaryMPS:
    """Bond-1 boundary closing every open top leg ket-to-bra."""
    TA, TB = _closure(d_A), _closure(d_B)
    one = np.ones((1, 1), dtype=np.complex128)
    return BoundaryMPS(TA_L=TA, TB_L=TB, TA_R=TA, TB_R=TB, TA_C=TA, TB_C=TB,
                       C_AB=one, C_BA=one.copy())


def apply_row(b: Union[BoundaryMPS, Tuple[np.ndarray, np.ndarray]],
              row: Tuple[DoubleTensor, DoubleTensor]) -> RowApplied:
    """Puts one row of double tensors under the boundary, exactly."""
    TA, TB = b.tensors() if isinstance(b, BoundaryMPS) else b
    AA, BB = row
    XA, XB = AA.site, BB.site
    if TA.shape[1] != XA.shape[1] or TB.shape[1] != XB.shape[1]:
        raise ShapeError(
            f"boundary physical extents ({TA.shape[1]}, {TB.shape[1]}) do not match "
            f"the row's top legs ({XA.shape[1]}, {XB.shape[1]})")
    if XA.shape[4] != XB.shape[2] or XB.shape[4] != XA.shape[2]:
        raise ShapeError("row tensors have inconsistent horizontal bonds")
    return RowApplied(TA, TB, XA, XB)


# environments are shaped (new bond, boundary bond, ket bond, bra bond)

def _left(L, T, X, S):
    return ncon("ackb,cuwC,pukdK,pwbeB,adeA->ACKB", L, T, X, X.conj(), S.conj())


def _right(R, T, X, S):
    return ncon("cuwC,pukdK,pwbeB,adeA,ACKB->ackb", T, X, X.conj(), S.conj(), R)


def _center(L, T, X, R):
    return ncon("ackb,cuwC,pukdK,pwbeB,ACKB->adeA", L, T, X, X.conj(), R)


def _eigen(shape: Tuple[int, ...], apply, init: Optional[np.ndarray],
           tol: float, max_iter: int) -> Tuple[complex, np.ndarray]:
    """Dominant eigenpair of a map on tensors of ``shape``; one retry from scratch."""
    dim = int(np.prod(shape))
    linear_map = LinearMap(dim, lambda v: apply(v.reshape(shape)).reshape(dim))
    if init is not None and init.shape != tuple(shape):
        init = None
    try:
        lam, v = dominant_eigenpair(linear_map, init=init, tol=tol, max_iter=max_iter)
    except ConvergenceError as e:
        if init is None:
            raise
        logger.warning("eigensolver failed from warm start (residual %s), retrying", e.residual)
        lam, v = dominant_eigenpair(linear_map, init=None, tol=tol, max_iter=max_iter)
    return lam, v.reshape(shape)


def _target_dims(big: RowApplied, chi: int) -> Tuple[int, int]:
    chi_ab = min(chi, big.bond_ab)
    chi_ba = min(chi, big.bond_ba)
    pa, pb = big.phys_A ** 2, big.phys_B ** 2
    for _ in range(2):
        chi_ab = min(chi_ab, chi_ba * pa)
        chi_ba = min(chi_ba, chi_ab * pb)
    return chi_ab, chi_ba


def _random_start(rng: np.random.Generator, chi_ab: int, chi_ba: int,
                  dA: int, dB: int) -> Tuple[np.ndarray, ...]:
    TA_L = random_isometry(rng, chi_ba * dA * dA, chi_ab).reshape(chi_ba, dA, dA, chi_ab)
    TB_L = random_isometry(rng, chi_ab * dB * dB, chi_ba).reshape(chi_ab, dB, dB, chi_ba)
    TA_R = random_isometry(rng, dA * dA * chi_ab, chi_ba).T.reshape(chi_ba, dA, dA, chi_ab)
    TB_R = random_isometry(rng, dB * dB * chi_ba, chi_ab).T.reshape(chi_ab, dB, dB, chi_ba)
    return TA_L, TB_L, TA_R, TB_R


def _unit(t: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(t)
    return t / n if n > 0 else t


def _mix_isometries(old: Tuple[np.ndarray, ...], new: Tuple[np.ndarray, ...],
                    step: float) -> Tuple[np.ndarray, ...]:
    """Isometries nearest to ``(1 - step) old + step new``; left pair then right pair."""
    if step >= 1.0:
        return new
    TA_L, TB_L, TA_R, TB_R = ((1.0 - step) * o + step * n for o, n in zip(old, new))

    def left(T):
        U, _ = factorize_polar(T.reshape(-1, T.shape[3]), "left")
        return U.reshape(T.shape)

    def right(T):
        U, _ = factorize_polar(T.reshape(T.shape[0], -1), "right")
        return U.reshape(T.shape)

    return left(TA_L), left(TB_L), right(TA_R), right(TB_R)


def compress(big: RowApplied, chi: int, opts: Optional[BoundaryOptions] = None,
             init: Optional[BoundaryMPS] = None) -> BoundaryMPS:
    """Best bond-``chi`` approximation of an enlarged boundary.

    Each iteration takes the dominant left and right eigenvectors of the
    overlap channels, builds new centers and bond matrices from them and
    rebuilds the isometries from their polar factors. An update that lowers
    the overlap is rejected and retried with half the step towards the new
    isometries, so the recorded overlaps never decrease. Stops when a full
    step changes the overlap per unit cell by less than ``opts.compress_tol``
    relative; otherwise returns the best iterate with a warning.
    """
    opts = opts or BoundaryOptions()
    if chi < 1:
        raise ValueError(f"chi must be >= 1, got {chi}")
    chi_ab, chi_ba = _target_dims(big, chi)
    dA, dB = big.phys_A, big.phys_B
    TA, TB, XA, XB = big.TA, big.TB, big.XA, big.XB
    n_ba = (chi_ba, TA.shape[0], XA.shape[2], XA.shape[2])
    n_ab = (chi_ab, TA.shape[3], XA.shape[4], XA.shape[4])

    if init is not None and init.TA_L.shape == (chi_ba, dA, dA, chi_ab) \
            and init.TB_L.shape == (chi_ab, dB, dB, chi_ba):
        base = (init.TA_L, init.TB_L, init.TA_R, init.TB_R)
    else:
        rng = np.random.default_rng(opts.seed)
        base = _random_start(rng, chi_ab, chi_ba, dA, dB)

    L_BA = R_AB = None
    accepted: Optional[BoundaryMPS] = None
    anchor: Tuple[Tuple[np.ndarray, ...], Tuple[np.ndarray, ...]] = (base, base)
    step = 1.0
    history: List[float] = []
    converged = False
    for it in range(1, opts.compress_max_iter + 1):
        TA_L, TB_L, TA_R, TB_R = base
        lam_l, L_BA = _eigen(n_ba, lambda v: _left(_left(v, TA, XA, TA_L), TB, XB, TB_L),
                             L_BA, opts.eig_tol, opts.max_iter * 10)
        overlap = float(abs(lam_l))
        if accepted is not None and overlap < accepted.overlap * (1.0 - _OVERLAP_SLACK):
            step *= 0.5
            logger.debug("compress iteration %d lowered the overlap to %.12e, step %.2e",
                         it, overlap, step)
            if step < _MIN_STEP:
                break
            base = _mix_isometries(*anchor, step)
            continue

        L_AB = _left(L_BA, TA, XA, TA_L)
        lam_r, R_AB = _eigen(n_ab, lambda v: _right(_right(v, TA, XA, TA_R), TB, XB, TB_R),
                             R_AB, opts.eig_tol, opts.max_iter * 10)
        R_BA = _right(R_AB, TA, XA, TA_R)

        TA_C = _unit(_center(L_BA, TA, XA, R_AB))
        TB_C = _unit(_center(L_AB, TB, XB, R_BA))
        C_AB = _unit(ncon("ackb,Ackb->aA", L_AB, R_AB))
        C_BA = _unit(ncon("ackb,Ackb->aA", L_BA, R_BA))

        UL_AC, _ = factorize_polar(TA_C.reshape(-1, chi_ab), "left")
        UL_BC, _ = factorize_polar(TB_C.reshape(-1, chi_ba), "left")
        UR_AC, _ = factorize_polar(TA_C.reshape(chi_ba, -1), "right")
        UR_BC, _ = factorize_polar(TB_C.reshape(chi_ab, -1), "right")
        UL_AB, _ = factorize_polar(C_AB, "left")
        UL_BA, _ = factorize_polar(C_BA, "left")
        UR_AB, _ = factorize_polar(C_AB, "right")
        UR_BA, _ = factorize_polar(C_BA, "right")
        proposal = (
            (UL_AC @ UL_AB.conj().T).reshape(chi_ba, dA, dA, chi_ab),
            (UL_BC @ UL_BA.conj().T).reshape(chi_ab, dB, dB, chi_ba),
            (UR_BA.conj().T @ UR_AC).reshape(chi_ba, dA, dA, chi_ab),
            (UR_AB.conj().T @ UR_BC).reshape(chi_ab, dB, dB, chi_ba),
        )

        history.append(overlap)
        logger.debug("compress iteration %d overlap %.12e (right %.12e)", it, overlap, abs(lam_r))
        current = BoundaryMPS(TA_L=proposal[0], TB_L=proposal[1], TA_R=proposal[2],
                              TB_R=proposal[3], TA_C=TA_C, TB_C=TB_C, C_AB=C_AB, C_BA=C_BA,
                              overlap=overlap, eigenvalues=(complex(lam_l), complex(lam_r)),
                              iterations=it)
        settled = accepted is not None and step >= 1.0 and \
            abs(overlap - accepted.overlap) <= opts.compress_tol * max(overlap, 1e-300)
        accepted, anchor = current, (base, proposal)
        if settled:
            converged = True
            break
        step = min(1.0, 2.0 * step)
        base = _mix_isometries(base, proposal, step)

    if not converged:
        warnings.warn(
            f"boundary compression did not settle in {opts.compress_max_iter} iterations; "
            f"returning the best overlap {accepted.overlap:.6e}", ConvergenceWarning)
    return msgspec.structs.replace(accepted, converged=converged, history=tuple(history))


def canonicalize(TA: np.ndarray, TB: np.ndarray,
                 opts: Optional[BoundaryOptions] = None) -> BoundaryMPS:
    """Mixed canonical form of an explicit MPS without loss of bond."""
    big = RowApplied.from_mps(TA, TB)
    return compress(big, max(big.bond_ab, big.bond_ba), opts)


def _spectrum_drift(a: Dict[str, np.ndarray], b: Dict[str, np.ndarray]) -> float:
    drift = 0.0
    for key in a:
        n = max(len(a[key]), len(b[key]))
        x = np.pad(a[key], (0, n - len(a[key])))
        y = np.pad(b[key], (0, n - len(b[key])))
        drift = max(drift, float(np.max(np.abs(x - y))))
    return drift


def boundary_x(b: BoundaryMPS, row: Tuple[DoubleTensor, DoubleTensor], tol: float = 1e-12) -> float:
    """<X> on an A site of ``row`` with ``b`` above and the bottom legs closed.

    Only meaningful as a function of the boundary; it tracks convergence of
    the row iteration.
    """
    TA, TB = b.tensors()
    XA, XB = row[0].site, row[1].site
    SA, SB = _closure(XA.shape[3]), _closure(XB.shape[3])
    n_ba = (1, TA.shape[0], XA.shape[2], XA.shape[2])
    n_ab = (1, TA.shape[3], XA.shape[4], XA.shape[4])
    _, L_BA = _eigen(n_ba, lambda v: _left(_left(v, TA, XA, SA), TB, XB, SB), None, tol, 5000)
    _, R_AB = _eigen(n_ab, lambda v: _right(_right(v, TA, XA, SA), TB, XB, SB), None, tol, 5000)
    num = ncon("ackb,cuwC,pukdK,qwbeB,adeA,ACKB,qp->", L_BA, TA, XA, XA.conj(), SA.conj(), R_AB, X)
    den = ncon("ackb,cuwC,pukdK,pwbeB,adeA,ACKB->", L_BA, TA, XA, XA.conj(), SA.conj(), R_AB)
    if abs(den) < 1e-300:
        raise DegenerateNormError("<X> network of the boundary has a vanishing norm")
    return float(np.real(num / den))


def converge_boundary(state: IPepsState, side: Side, chi: int,
                      opts: Optional[BoundaryOptions] = None) -> BoundaryMPS:
    """Fixed point of (apply row, compress) for the top or bottom half plane.

    Converged when the relative drift of the overlap eigenvalue and the
    drift of the bond spectra fall below ``opts.tol`` and the boundary <X> moves
    by less than ``10 * opts.tol``. A row that leaves the boundary unchanged
    stops the iteration at once. Raises ``ConvergenceError`` with the drift
    history otherwise.
    """
    opts = opts or BoundaryOptions()
    if chi < 1:
        raise ValueError(f"chi must be >= 1, got {chi}")
    if side == "bottom":
        state = reflect_vertical(state)
    elif side != "top":
        raise ValueError(f"side must be 'top' or 'bottom', got {side!r}")
    row = make_double(state)
    b = trivial_boundary(state.A.shape[1], state.B.shape[1])
    history: List[float] = []
    lam_prev: Optional[float] = None
    x_prev = boundary_x(b, row, opts.eig_tol)
    for it in range(1, opts.max_iter + 1):
        big = apply_row(b, row)
        new = compress(big, chi, opts, init=b).swapped()
        drift = _spectrum_drift(new.spectrum(), b.spectrum())
        if lam_prev is not None:
            drift = max(drift, abs(new.overlap - lam_prev) / max(new.overlap, 1e-300))
        x_now = boundary_x(new, row, opts.eig_tol)
        x_drift = abs(x_now - x_prev)
        history.append(drift)
        logger.debug("%s boundary step %d chi=%d drift %.3e <X> drift %.3e", side, it, new.chi,
                     drift, x_drift)
        lam_prev, x_prev = new.overlap, x_now
        b = new
        if drift < opts.tol and x_drift < 10 * opts.tol:
            logger.info("%s boundary converged after %d rows (chi=%d, drift %.2e)",
                        side, it, b.chi, drift)
            return msgspec.structs.replace(b, iterations=it, history=tuple(history))
    raise ConvergenceError(
        f"{side} boundary did not converge in {opts.max_iter} rows "
        f"(last drift {history[-1]:.3e})", residual=history[-1], history=history)


def _norm_environments(TA, TB, SA, SB) -> Tuple[complex, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Left/right fixed points of the two-site transfer <S|T>."""
    big = RowApplied.from_mps(TA, TB)
    XA, XB = big.XA, big.XB
    n_ba = (SA.shape[0], TA.shape[0], 1, 1)
    n_ab = (SA.shape[3], TA.shape[3], 1, 1)
    lam, l_ba = _eigen(n_ba, lambda v: _left(_left(v, TA, XA, SA), TB, XB, SB), None, 1e-12, 5000)
    l_ab = _left(l_ba, TA, XA, SA)
    _, r_ab = _eigen(n_ab, lambda v: _right(_right(v, TA, XA, SA), TB, XB, SB), None, 1e-12, 5000)
    r_ba = _right(r_ab, TA, XA, SA)
    return lam, l_ab[:, :, 0, 0], l_ba[:, :, 0, 0], r_ab[:, :, 0, 0], r_ba[:, :, 0, 0]


def _as_tensors(b) -> Tuple[np.ndarray, np.ndarray]:
    return b.tensors() if isinstance(b, BoundaryMPS) else b


def fidelity_per_site(b1, b2) -> float:
    """|<b1|b2>| / sqrt(<b1|b1><b2|b2>) per site of the infinite chain."""
    TA1, TB1 = _as_tensors(b1)
    TA2, TB2 = _as_tensors(b2)
    lam12 = _norm_environments(TA2, TB2, TA1, TB1)[0]
    lam11 = _norm_environments(TA1, TB1, TA1, TB1)[0]
    lam22 = _norm_environments(TA2, TB2, TA2, TB2)[0]
    return float(np.sqrt(abs(lam12) / np.sqrt(abs(lam11) * abs(lam22))))


def _sqrt_factor(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Returns ``(W, w)`` with m = W diag(w) W^dagger, w >= 0 after clipping."""
    tr = np.trace(m)
    m = m * (abs(tr) / tr) if tr != 0 else m
    h, _ = hermitian_psd(m)
    w, W = np.linalg.eigh(h)
    return W, np.clip(w, 0.0, None)


def _bond_projectors(l: np.ndarray, r: np.ndarray, chi: int) -> Tuple[np.ndarray, np.ndarray]:
    # l[bra, ket] = X^dag X, r^T = Y Y^dag; the kept part of X Y defines the projectors
    Wl, wl = _sqrt_factor(l)
    X = np.sqrt(wl)[:, None] * Wl.conj().T
    Wr, wr = _sqrt_factor(r.T)
    Y = Wr * np.sqrt(wr)
    U, s, Vh = np.linalg.svd(X @ Y)
    keep = max(1, min(chi, int(np.sum(s > 1e-14 * s[0]))))
    inv = 1.0 / np.sqrt(s[:keep])
    P = Y @ Vh[:keep].conj().T * inv
    Q = inv[:, None] * (U[:, :keep].conj().T @ X)
    return P, Q


def truncate_svd(mps, chi: int) -> Tuple[np.ndarray, np.ndarray]:
    """Baseline compression: canonical SVD truncation of both bonds at once."""
    TA, TB = _as_tensors(mps)
    _, l_ab, l_ba, r_ab, r_ba = _norm_environments(TA, TB, TA, TB)
    P_ab, Q_ab = _bond_projectors(l_ab, r_ab, chi)
    P_ba, Q_ba = _bond_projectors(l_ba, r_ba, chi)
    TA_new = ncon("ia,aude,eb->iudb", Q_ba, TA, P_ab)
    TB_new = ncon("ia,aude,eb->iudb", Q_ab, TB, P_ba)
    return TA_new, TB_new


_BOUNDARY_AXES = ["left", "ket", "bra", "right"]


def save_boundary(b: BoundaryMPS, directory, metadata: Optional[Dict[str, Any]] = None):
    names = ("TA_L", "TB_L", "TA_R", "TB_R", "TA_C", "TB_C", "C_AB", "C_BA")
    tensors = {name: getattr(b, name) for name in names}
    axes = {name: (_BOUNDARY_AXES if name.startswith("T") else ["left", "right"]) for name in names}
    meta = {"overlap": b.overlap, "converged": b.converged, "iterations": b.iterations,
            **(metadata or {})}
    return write_container(directory, kind="boundary", tensors=tensors, axes=axes,
                           bonds={"AB": b.chi_ab, "BA": b.chi_ba}, metadata=meta)


def load_boundary(directory) -> BoundaryMPS:
    tensors, manifest = read_container(directory, kind="boundary")
    meta = manifest.metadata
    return BoundaryMPS(**tensors, overlap=float(meta.get("overlap", 1.0)),
                       converged=bool(meta.get("converged", True)),
                       iterations=int(meta.get("iterations", 0)))
