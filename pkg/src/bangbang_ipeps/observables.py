"""Expectation values from converged boundaries.

Between the top and bottom boundaries a row of double tensors forms the
column channel. Its dominant left and right eigenvectors replace the
semi-infinite parts of the row, so a local operator is the ratio of two
finite sandwiches: one with the operator inserted and one with the
identity, evaluated along the same contraction path.

Vertical bonds are measured on the diagonally reflected state, which has its
own boundaries.
"""

import csv
import logging
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import msgspec
import numpy as np
from scipy.optimize import curve_fit

from .boundary import BoundaryMPS, converge_boundary
from .container import FORMAT_VERSION, write_json
from .errors import DegenerateNormError, ShapeError
from .ipeps import BOND_CLASS_ORDER, BondClass, IPepsState, transpose_diagonal
from .linalg import LinearMap, dominant_eigenpair, ncon
from .operators import I2, X, Z, ZZ, bond_hamiltonian
from .settings import BoundaryOptions


__all__ = [
    "ChannelFixedPoints",
    "Environment",
    "LatticeEnvironment",
    "ObservableResult",
    "ObservableSet",
    "CorrelatorSeries",
    "fixed_points",
    "environment",
    "expect_one_site",
    "expect_two_site",
    "energy_per_bond",
    "magnetization",
    "measure",
    "connected_correlator",
    "fit_correlation_length",
    "write_correlator",
]

logger = logging.getLogger(__name__)

_DEGENERATE_NORM = 1e-300


class ChannelFixedPoints(msgspec.Struct, frozen=True, eq=False):
    """Dominant eigenvectors of the column channel on both inter-column bonds.

    ``L_BA`` sits left of an A column and ``R_BA`` right of a B column;
    vectors are shaped (top bond, ket bond, bra bond, bottom bond).
    """

    L_BA: np.ndarray
    L_AB: np.ndarray
    R_AB: np.ndarray
    R_BA: np.ndarray
    lam: complex
    residual: float


def _col_left(L, top, Xs, bot, op=None):
    if op is None:
        return ncon("tkbs,tuwT,pukdK,pwbeB,sdeS->TKBS", L, top, Xs, Xs.conj(), bot)
    return ncon("tkbs,tuwT,pukdK,PwbeB,sdeS,Pp->TKBS", L, top, Xs, Xs.conj(), bot, op)


def _col_right(R, top, Xs, bot):
    return ncon("tuwT,pukdK,pwbeB,sdeS,TKBS->tkbs", top, Xs, Xs.conj(), bot, R)


def fixed_points(top: BoundaryMPS, bottom: BoundaryMPS, row: IPepsState,
                 tol: float = 1e-12, max_iter: int = 5000) -> ChannelFixedPoints:
    """Left and right dominant eigenvectors of the two-column channel."""
    tA, tB = top.tensors()
    bA, bB = bottom.tensors()
    A, B = row.A, row.B
    if tA.shape[1] != A.shape[1] or bA.shape[1] != A.shape[3]:
        raise ShapeError("boundaries do not fit the row they enclose")
    shape_ba = (tA.shape[0], A.shape[2], A.shape[2], bA.shape[0])

    def left(v):
        return _col_left(_col_left(v, tA, A, bA), tB, B, bB)

    def right(v):
        return _col_right(_col_right(v, tB, B, bB), tA, A, bA)

    dim_ba = int(np.prod(shape_ba))
    lam, L_BA = dominant_eigenpair(
        LinearMap(dim_ba, lambda v: left(v.reshape(shape_ba)).reshape(-1)), tol=tol, max_iter=max_iter)
    lam_r, R_BA = dominant_eigenpair(
        LinearMap(dim_ba, lambda v: right(v.reshape(shape_ba)).reshape(-1)), tol=tol, max_iter=max_iter)
    L_BA = L_BA.reshape(shape_ba)
    R_BA = R_BA.reshape(shape_ba)
    L_AB = _col_left(L_BA, tA, A, bA)
    R_AB = _col_right(R_BA, tB, B, bB)
    residual = float(np.linalg.norm(left(L_BA) - lam * L_BA))
    if abs(lam - lam_r) > 1e-8 * abs(lam):
        logger.warning("left and right channel eigenvalues differ: %s vs %s", lam, lam_r)
    return ChannelFixedPoints(L_BA=L_BA, L_AB=L_AB, R_AB=R_AB, R_BA=R_BA, lam=lam, residual=residual)


class Environment:
    """Boundaries and channel fixed points of one lattice frame."""

    def __init__(self, state: IPepsState, top: BoundaryMPS, bottom: BoundaryMPS,
                 fixed: Optional[ChannelFixedPoints] = None):
        self.state = state
        self.top = top
        self.bottom = bottom
        self.fixed = fixed if fixed is not None else fixed_points(top, bottom, state)

    @property
    def chi(self) -> int:
        return max(self.top.chi, self.bottom.chi)

    def columns(self, sublattice: str):
        """(top tensor, site tensor, bottom tensor) of an A or B column."""
        if sublattice == "A":
            return self.top.TA_L, self.state.A, self.bottom.TA_L
        return self.top.TB_L, self.state.B, self.bottom.TB_L

    @classmethod
    def converge(cls, state: IPepsState, chi: int,
                 opts: Optional[BoundaryOptions] = None) -> "Environment":
        top = converge_boundary(state, "top", chi, opts)
        bottom = converge_boundary(state, "bottom", chi, opts)
        return cls(state, top, bottom)


class LatticeEnvironment:
    """Horizontal frame plus the diagonally reflected frame for vertical bonds."""

    def __init__(self, state: IPepsState, chi: int, opts: Optional[BoundaryOptions] = None,
                 horizontal: Optional[Environment] = None):
        self.state = state
        self.chi = chi
        self.opts = opts or BoundaryOptions()
        self.horizontal = horizontal or Environment.converge(state, chi, self.opts)

    @cached_property
    def vertical(self) -> Environment:
        return Environment.converge(transpose_diagonal(self.state), self.chi, self.opts)

    def frame(self, bond_class: BondClass) -> Environment:
        bond_class = BondClass(bond_class)
        if bond_class in (BondClass.vertical_ab, BondClass.vertical_ba):
            return self.vertical
        return self.horizontal


def environment(state: IPepsState, chi: int, opts: Optional[BoundaryOptions] = None) -> LatticeEnvironment:
    return LatticeEnvironment(state, chi, opts)


class ObservableResult(msgspec.Struct, kw_only=True):
    name: str
    value: float
    imag: float = 0.0
    chi: int = 0
    residual: float = 0.0
    bond_class: Optional[str] = None
    spread: Optional[float] = None
    format_version: str = FORMAT_VERSION


class ObservableSet(msgspec.Struct, kw_only=True):
    """Energy and magnetizations of one state."""

    g: float
    energy: float
    energy_spread: float
    zz: Dict[str, float]
    x: Dict[str, float]
    z: Dict[str, float]
    chi: int
    format_version: str = FORMAT_VERSION


def _ratio(num: complex, den: complex, what: str) -> complex:
    if abs(den) < _DEGENERATE_NORM:
        raise DegenerateNormError(f"norm network of {what} vanished ({abs(den):.1e})")
    return num / den


def _one_site_raw(env: Environment, op: np.ndarray, sublattice: str) -> complex:
    fp = env.fixed
    top, site, bot = env.columns(sublattice)
    L, R = (fp.L_BA, fp.R_AB) if sublattice == "A" else (fp.L_AB, fp.R_BA)
    return complex(np.sum(_col_left(L, top, site, bot, op) * R))


def expect_one_site(env: LatticeEnvironment, op: np.ndarray, sublattice: str = "A") -> ObservableResult:
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (2, 2) or not np.all(np.isfinite(op)):
        raise ValueError("one-site operator must be a finite 2x2 matrix")
    if sublattice not in ("A", "B"):
        raise ValueError(f"sublattice must be 'A' or 'B', got {sublattice!r}")
    frame = env.horizontal
    value = _ratio(_one_site_raw(frame, op, sublattice), _one_site_raw(frame, I2, sublattice),
                   f"sublattice {sublattice}")
    return ObservableResult(name=f"one_site_{sublattice}", value=value.real, imag=value.imag,
                            chi=frame.chi, residual=frame.fixed.residual)


def _two_site_raw(frame: Environment, O4: np.ndarray, first: str) -> complex:
    fp = frame.fixed
    second = "B" if first == "A" else "A"
    t1, X1, b1 = frame.columns(first)
    t2, X2, b2 = frame.columns(second)
    L, R = (fp.L_BA, fp.R_BA) if first == "A" else (fp.L_AB, fp.R_AB)
    value = ncon(
        "tkbs,tuwT,TUWV,pukdK,qUKDr,PwbeB,QWBEy,sdeS,SDEZ,PQpq,VryZ->",
        L, t1, t2, X1, X2, X1.conj(), X2.conj(), b1, b2, O4, R,
    )
    return complex(value)


def expect_two_site(env: LatticeEnvironment, O: np.ndarray, bond_class: BondClass) -> ObservableResult:
    """<O> on one bond class; ``O`` is 4x4 with rows (out_A, out_B)."""
    O = np.asarray(O, dtype=np.complex128)
    if O.shape != (4, 4) or not np.all(np.isfinite(O)):
        raise ValueError("two-site operator must be a finite 4x4 matrix")
    bond_class = BondClass(bond_class)
    frame = env.frame(bond_class)
    first = "A" if bond_class in (BondClass.horizontal_ab, BondClass.vertical_ab) else "B"
    O4 = O.reshape(2, 2, 2, 2)
    if first == "B":
        # the pair is traversed B then A
        O4 = O4.transpose(1, 0, 3, 2)
    identity = np.eye(4, dtype=np.complex128).reshape(2, 2, 2, 2)
    value = _ratio(_two_site_raw(frame, O4, first), _two_site_raw(frame, identity, first),
                   bond_class.value)
    return ObservableResult(name="two_site", value=value.real, imag=value.imag, chi=frame.chi,
                            residual=frame.fixed.residual, bond_class=bond_class.value)


def energy_per_bond(env: LatticeEnvironment, g: float) -> ObservableResult:
    """Mean of the bond energy over the four bond classes."""
    h = bond_hamiltonian(g)
    values = [expect_two_site(env, h, bc).value for bc in BOND_CLASS_ORDER]
    mean = float(np.mean(values))
    return ObservableResult(name="energy_per_bond", value=mean, chi=env.chi,
                            residual=env.horizontal.fixed.residual,
                            spread=float(max(values) - min(values)))


def magnetization(env: LatticeEnvironment) -> Dict[str, Dict[str, float]]:
    return {
        "x": {s: expect_one_site(env, X, s).value for s in ("A", "B")},
        "z": {s: expect_one_site(env, Z, s).value for s in ("A", "B")},
    }


def measure(state: IPepsState, chi: int, g: float,
            opts: Optional[BoundaryOptions] = None,
            env: Optional[LatticeEnvironment] = None) -> Tuple[ObservableSet, LatticeEnvironment]:
    """Energy per bond, per-class <ZZ> and the magnetizations of a state."""
    env = env or environment(state, chi, opts)
    zz = {bc.value: expect_two_site(env, ZZ, bc).value for bc in BOND_CLASS_ORDER}
    energy = energy_per_bond(env, g)
    mags = magnetization(env)
    result = ObservableSet(g=g, energy=energy.value, energy_spread=energy.spread, zz=zz,
                           x=mags["x"], z=mags["z"], chi=env.chi)
    logger.info("energy per bond %.10f (spread %.1e) <X>_A=%.8f", result.energy,
                result.energy_spread, result.x["A"])
    return result, env


class CorrelatorSeries(msgspec.Struct, kw_only=True):
    op1: str
    op2: str
    r: List[int]
    connected: List[float]
    direction: str = "row"
    chi: int = 0
    format_version: str = FORMAT_VERSION


def connected_correlator(env: LatticeEnvironment, op1: np.ndarray, op2: np.ndarray,
                         r_max: int, direction: str = "row") -> List[float]:
    """<op1_0 op2_r> - <op1><op2> along a row (or a column), r = 1..r_max.

    The operator pair starts on an A site; running vectors are rescaled at
    every column so the cost is linear in ``r_max``.
    """
    if r_max < 1:
        raise ValueError(f"r_max must be >= 1, got {r_max}")
    if direction not in ("row", "column"):
        raise ValueError(f"direction must be 'row' or 'column', got {direction!r}")
    frame = env.horizontal if direction == "row" else env.vertical
    op1 = np.asarray(op1, dtype=np.complex128)
    op2 = np.asarray(op2, dtype=np.complex128)
    fp = frame.fixed

    def mean(op, sublattice):
        return _ratio(_one_site_raw(frame, op, sublattice), _one_site_raw(frame, I2, sublattice),
                      "correlator")

    m1 = mean(op1, "A")
    m2 = {s: mean(op2, s) for s in ("A", "B")}

    top, site, bot = frame.columns("A")
    num = _col_left(fp.L_BA, top, site, bot, op1)
    den = _col_left(fp.L_BA, top, site, bot)
    out = []
    for r in range(1, r_max + 1):
        sub = "B" if r % 2 else "A"
        R = fp.R_BA if sub == "B" else fp.R_AB
        top, site, bot = frame.columns(sub)
        joint = _ratio(np.sum(_col_left(num, top, site, bot, op2) * R),
                       np.sum(_col_left(den, top, site, bot) * R), "correlator")
        out.append(float((joint - m1 * m2[sub]).real))
        num = _col_left(num, top, site, bot)
        den = _col_left(den, top, site, bot)
        scale = np.linalg.norm(den)
        num, den = num / scale, den / scale
    return out


def fit_correlation_length(r: Sequence[int], values: Sequence[float],
                           window: Tuple[int, int] = (2, 8)) -> float:
    """Decay length from a least-squares fit of |C(r)| ~ a exp(-r / xi)."""
    r = np.asarray(r, dtype=float)
    c = np.abs(np.asarray(values, dtype=float))
    mask = (r >= window[0]) & (r <= window[1]) & (c > 0)
    if mask.sum() < 2:
        raise ValueError("need at least two nonzero points in the fit window")
    slope, intercept = np.polyfit(r[mask], np.log(c[mask]), 1)
    (a, xi), _ = curve_fit(lambda x, a, xi: a * np.exp(-x / xi), r[mask], c[mask],
                           p0=(np.exp(intercept), -1.0 / slope if slope < 0 else 1.0),
                           maxfev=10000)
    return float(xi)


def write_correlator(series: CorrelatorSeries, path, metadata: Optional[dict] = None) -> Path:
    """CSV with columns r, C_conn plus a JSON sidecar with the metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["r", "C_conn"])
        for r, c in zip(series.r, series.connected):
            writer.writerow([r, repr(c)])
    write_json(path.with_suffix(".json"), {"series": series, "metadata": metadata or {}})
    return path
