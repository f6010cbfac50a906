"""Exact causal-cone simulation of shallow translation-invariant circuits.

A local observable after a depth-N circuit only depends on the sites its
backward light cone reaches. The cone is extracted layer by layer in the
Heisenberg picture and simulated as a dense state vector started from
|+>^n, which makes an independent check of the tensor-network pipeline.
"""

import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import msgspec
import numpy as np

from .container import FORMAT_VERSION
from .errors import ConeTooLargeError, MemoryBudgetError
from .ipeps import BOND_CLASS_ORDER, BondClass, init_product_x
from .ntu import evolve
from .observables import connected_correlator, environment, expect_one_site, expect_two_site
from .operators import X, Z, ZZ, x_rotation
from .sequences import GateSequence, bb_sequence
from .settings import BoundaryOptions, NtuOptions


__all__ = [
    "MAX_QUBITS",
    "Site",
    "ConeLayer",
    "ConeCircuit",
    "PipelineEntry",
    "PipelineReport",
    "bonds_of_class",
    "extract_cone",
    "exact_expectation",
    "oracle_values",
    "random_sequence",
    "pipeline_check",
]

logger = logging.getLogger(__name__)

MAX_QUBITS = 26

Site = Tuple[int, int]


def _is_a(site: Site) -> bool:
    return (site[0] + site[1]) % 2 == 0


def bonds_of_class(sites: Iterable[Site], bond_class: BondClass) -> List[Tuple[Site, Site]]:
    """Bonds of one class with at least one end in ``sites``; y grows downward."""
    bond_class = BondClass(bond_class)
    step = (1, 0) if bond_class in (BondClass.horizontal_ab, BondClass.horizontal_ba) else (0, 1)
    first_is_a = bond_class in (BondClass.horizontal_ab, BondClass.vertical_ab)
    bonds = set()
    for x, y in sites:
        for start in ((x, y), (x - step[0], y - step[1])):
            if _is_a(start) == first_is_a:
                bonds.add((start, (start[0] + step[0], start[1] + step[1])))
    return sorted(bonds)


class ConeLayer(msgspec.Struct, frozen=True):
    beta: float
    theta: float
    # site-index pairs, ordered by bond class
    bonds: Tuple[Tuple[int, int], ...]
    rotated: Tuple[int, ...]


class ConeCircuit(msgspec.Struct, frozen=True):
    """Sites of a backward light cone and the gates acting inside it."""

    sites: Tuple[Site, ...]
    layers: Tuple[ConeLayer, ...]
    support: Tuple[Site, ...]

    @property
    def n_qubits(self) -> int:
        return len(self.sites)

    def index(self, site: Site) -> int:
        return self.sites.index(tuple(site))


def _grow(support: Set[Site]) -> Set[Site]:
    grown = set(support)
    for x, y in support:
        grown.update({(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)})
    return grown


def extract_cone(seq: GateSequence, support: Iterable[Site], extra_steps: int = 0,
                 max_qubits: int = MAX_QUBITS) -> ConeCircuit:
    """Backward light cone of ``support`` under ``seq``.

    ``extra_steps`` enlarges the starting support by that many neighbour
    shells; the expectation values must not change.
    """
    current = {tuple(s) for s in support}
    if not current:
        raise ValueError("support must not be empty")
    target = tuple(sorted(current))
    for _ in range(extra_steps):
        current = _grow(current)

    # walk the layers backward: one-site layer first, then the ZZ layer
    backward = []
    for beta, theta in reversed(list(seq.layers())):
        rotated = set(current)
        bonds = []
        for bond_class in BOND_CLASS_ORDER:
            bonds.append(bonds_of_class(current, bond_class) if beta != 0.0 else [])
        for class_bonds in bonds:
            for a, b in class_bonds:
                current.update((a, b))
        backward.append((beta, theta, bonds, rotated))
        if len(current) > max_qubits:
            raise ConeTooLargeError(
                f"cone of depth {seq.N} around {list(target)} has {len(current)} sites "
                f"(cap {max_qubits})", depth=seq.N, support_size=len(target))

    sites = tuple(sorted(current))
    index = {s: i for i, s in enumerate(sites)}
    layers = []
    for beta, theta, bonds, rotated in reversed(backward):
        pairs = tuple((index[a], index[b]) for class_bonds in bonds for a, b in class_bonds)
        layers.append(ConeLayer(beta=float(beta), theta=float(theta), bonds=pairs,
                                rotated=tuple(sorted(index[s] for s in rotated))))
    return ConeCircuit(sites=sites, layers=tuple(layers), support=target)


def _apply_one(psi: np.ndarray, u: np.ndarray, k: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(u, psi, axes=(1, k)), 0, k)


def _apply_zz(psi: np.ndarray, beta: float, i: int, j: int) -> np.ndarray:
    phases = np.exp(1j * beta * np.diag(ZZ).real).reshape(2, 2)
    shape = [1] * psi.ndim
    shape[i] = shape[j] = 2
    if i > j:
        phases = phases.T
    return psi * phases.reshape(shape)


def _evolve_cone(cone: ConeCircuit, memory_budget_bytes: Optional[int]) -> np.ndarray:
    n = cone.n_qubits
    estimate = 3 * 16 * 2**n
    if memory_budget_bytes is not None and estimate > memory_budget_bytes:
        raise MemoryBudgetError(f"state vector of {n} qubits needs about {estimate} bytes",
                                estimate_bytes=estimate)
    psi = np.full((2,) * n, 2.0 ** (-n / 2), dtype=np.complex128)
    for layer in cone.layers:
        for i, j in layer.bonds:
            psi = _apply_zz(psi, layer.beta, i, j)
        u = x_rotation(layer.theta)
        for k in layer.rotated:
            psi = _apply_one(psi, u, k)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-12:
        logger.warning("oracle state norm drifted to %.15f", norm)
    return psi


def exact_expectation(cone: ConeCircuit, observable: Mapping[Site, np.ndarray],
                      memory_budget_bytes: Optional[int] = 4 * 1024**3) -> float:
    """<psi| prod_s O_s |psi> for a product observable on sites of the cone."""
    psi = _evolve_cone(cone, memory_budget_bytes)
    phi = psi
    for site, op in observable.items():
        phi = _apply_one(phi, np.asarray(op, dtype=np.complex128), cone.index(site))
    value = np.vdot(psi.reshape(-1), phi.reshape(-1))
    return float(value.real)


def oracle_values(seq: GateSequence, extra_steps: int = 0) -> Dict[str, float]:
    """Exact <X>, <Z>, <Z_0 Z_1>, connected <Z_0 Z_2> and energy per bond.

    Two-site values are only produced for N <= 2, where their cones fit.
    """
    origin, right, next_right = (0, 0), (1, 0), (2, 0)
    one = extract_cone(seq, [origin], extra_steps)
    x = exact_expectation(one, {origin: X})
    z = exact_expectation(one, {origin: Z})
    values = {"X": x, "Z": z}
    if seq.N <= 2:
        pair = extract_cone(seq, [origin, right], extra_steps)
        zz = exact_expectation(pair, {origin: Z, right: Z})
        far = extract_cone(seq, [origin, next_right], extra_steps)
        values["ZZ"] = zz
        values["energy"] = -zz - 0.5 * seq.target_field * x
        values["C2"] = exact_expectation(far, {origin: Z, next_right: Z}) - z * z
    return values


def random_sequence(rng: np.random.Generator, N: int, variant: str = "para_target",
                    g: float = 3.1) -> GateSequence:
    """Angles uniform over the optimizer box."""
    beta = rng.uniform(-np.pi / 2, np.pi / 2, size=N)
    alpha = rng.uniform(-np.pi, np.pi, size=N) / g
    return bb_sequence(beta, alpha, variant, g, metadata={"source": "random"})


class PipelineEntry(msgspec.Struct):
    name: str
    ipeps: float
    oracle: float
    diff: float


class PipelineReport(msgspec.Struct, kw_only=True):
    N: int
    D_max: int
    chi: int
    beta: List[float]
    alpha: List[float]
    epsilon_ntu: float
    entries: List[PipelineEntry]
    max_diff: float
    format_version: str = FORMAT_VERSION

    def passed(self, tol: float) -> bool:
        return self.max_diff <= tol


def pipeline_check(seq: GateSequence, D_max: int = 8, chi: int = 40,
                   observables: Sequence[str] = ("X", "Z", "ZZ", "C2"),
                   ntu: Optional[NtuOptions] = None,
                   boundary: Optional[BoundaryOptions] = None) -> PipelineReport:
    """Compares iPEPS observables of ``seq`` with the exact cone values."""
    state, report = evolve(init_product_x(), seq, D_max, ntu)
    env = environment(state, chi, boundary)
    exact = oracle_values(seq)
    computed = {}
    for name in observables:
        if name not in ("X", "Z", "ZZ", "C2"):
            raise ValueError(f"unknown pipeline observable {name!r}")
        if name not in exact:
            continue
        if name == "X":
            computed[name] = expect_one_site(env, X, "A").value
        elif name == "Z":
            computed[name] = expect_one_site(env, Z, "A").value
        elif name == "ZZ":
            computed[name] = expect_two_site(env, ZZ, BondClass.horizontal_ab).value
        else:
            computed[name] = connected_correlator(env, Z, Z, 2)[1]
    entries = [PipelineEntry(name=k, ipeps=v, oracle=exact[k], diff=abs(v - exact[k]))
               for k, v in computed.items()]
    max_diff = max((e.diff for e in entries), default=0.0)
    logger.info("pipeline check N=%d max diff %.3e epsilon=%.2e", seq.N, max_diff,
                report.epsilon_total)
    return PipelineReport(N=seq.N, D_max=D_max, chi=chi, beta=list(seq.beta),
                          alpha=list(seq.alpha), epsilon_ntu=report.epsilon_total,
                          entries=entries, max_diff=max_diff)
