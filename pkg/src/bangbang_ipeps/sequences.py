"""Adiabatic (AP) and bang-bang (BB) gate sequences as plain data.

A sequence of depth N stores the H2 angles ``beta`` and the H1 angles
``alpha``. Read bottom-up, the evolution operator is

    exp(-i beta_1 H2), exp(-i alpha_1 g H1), ..., exp(-i beta_N H2), exp(-i alpha_N g H1 / 2)

so ``beta_1`` acts first and the last H1 layer carries half weight. Here
``g`` is the field of the sequence: the target field for ``para_target`` and
the critical field for ``para_to_ferro``.
"""

import math
from typing import Any, Dict, Iterator, List, Literal, Optional, Tuple

import msgspec

from .container import FORMAT_VERSION, check_version, read_json, write_json
from .errors import ConfigError


__all__ = [
    "Variant",
    "Kind",
    "ScheduleFn",
    "GateSequence",
    "ap_angles",
    "ap_sequence",
    "bb_sequence",
    "dumps_sequence",
    "loads_sequence",
    "save_sequence",
    "load_sequence",
]

Variant = Literal["para_target", "para_to_ferro"]
Kind = Literal["AP", "BB"]


class ScheduleFn:
    """Ramp function of an adiabatic protocol evaluated on s in [0, 1].

    ``para_target``: f(s) = (1 + sin(pi (s - 1/2))) / 2.
    ``para_to_ferro``: f(u) = (1 + u |u|) / 2 with u = 2 s - 1, which slows
    down near the critical point u = 0.
    """

    def __init__(self, variant: Variant):
        if variant not in ("para_target", "para_to_ferro"):
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant

    def __call__(self, s: float) -> float:
        if self.variant == "para_target":
            return 0.5 * (1.0 + math.sin(math.pi * (s - 0.5)))
        u = 2.0 * s - 1.0
        return 0.5 * (1.0 + u * abs(u))

    def complement(self, s: float) -> float:
        return 1.0 - self(s)


def ap_angles(N: int, dt: float, variant: Variant) -> Tuple[List[float], List[float]]:
    """The (beta, alpha) lists of an AP ramp with time step ``dt``."""
    f = ScheduleFn(variant)
    beta = [dt * f((2 * j - 1) / (2 * N)) for j in range(1, N + 1)]
    if variant == "para_target":
        alpha = [dt for _ in range(N)]
    else:
        alpha = [dt * f.complement(2 * j / (2 * N)) for j in range(1, N + 1)]
    return beta, alpha


class GateSequence(msgspec.Struct, kw_only=True):
    kind: Kind
    variant: Variant
    N: int
    beta: List[float]
    alpha: List[float]
    g: float
    dt: Optional[float] = None
    half_last_alpha: bool = True
    metadata: Dict[str, Any] = {}
    format_version: str = FORMAT_VERSION

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if len(self.beta) != self.N:
            raise ValueError(f"beta has {len(self.beta)} angles, N = {self.N}")
        if len(self.alpha) != self.N:
            raise ValueError(f"alpha has {len(self.alpha)} angles, N = {self.N}")
        for name, angles in (("beta", self.beta), ("alpha", self.alpha)):
            for j, angle in enumerate(angles):
                if not math.isfinite(angle):
                    raise ValueError(f"{name}[{j}] is not finite: {angle}")
        if not math.isfinite(self.g):
            raise ValueError(f"g is not finite: {self.g}")
        if not self.half_last_alpha:
            raise ValueError("half_last_alpha is fixed to true")
        if self.kind == "AP":
            if self.dt is None:
                raise ValueError("an AP sequence needs its time step dt")
            beta, alpha = ap_angles(self.N, self.dt, self.variant)
            drift = max(abs(a - b) for a, b in zip(beta + alpha, self.beta + self.alpha))
            if drift > 1e-12:
                raise ValueError(f"AP angles deviate from the ramp with dt={self.dt} by {drift:.2e}")

    @property
    def target_field(self) -> float:
        """Transverse field of the Hamiltonian whose energy is the cost."""
        return self.g if self.variant == "para_target" else 0.0

    @property
    def angles(self) -> List[float]:
        """Flat optimizer vector (beta_1..beta_N, alpha_1..alpha_N)."""
        return list(self.beta) + list(self.alpha)

    def layers(self) -> Iterator[Tuple[float, float]]:
        """Yields (beta_j, theta_j) with theta_j the one-site X rotation angle."""
        for j in range(self.N):
            theta = self.alpha[j] * self.g
            if j == self.N - 1 and self.half_last_alpha:
                theta *= 0.5
            yield self.beta[j], theta

    def with_angles(self, angles, **metadata: Any) -> "GateSequence":
        """A BB sequence with the same model and new angles."""
        angles = [float(a) for a in angles]
        return bb_sequence(angles[: self.N], angles[self.N:], self.variant, self.g,
                           metadata={**self.metadata, **metadata})


def ap_sequence(N: int, dt: float, variant: Variant = "para_target",
                g_or_gc: float = 3.1) -> GateSequence:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    beta, alpha = ap_angles(N, dt, variant)
    return GateSequence(kind="AP", variant=variant, N=N, beta=beta, alpha=alpha,
                        g=g_or_gc, dt=dt)


def bb_sequence(beta, alpha, variant: Variant = "para_target", g_or_gc: float = 3.1,
                metadata: Optional[Dict[str, Any]] = None) -> GateSequence:
    beta, alpha = [float(b) for b in beta], [float(a) for a in alpha]
    if len(beta) != len(alpha):
        raise ValueError(f"beta and alpha lengths differ: {len(beta)} != {len(alpha)}")
    if not beta:
        raise ValueError("a sequence needs at least one layer")
    return GateSequence(kind="BB", variant=variant, N=len(beta), beta=beta, alpha=alpha,
                        g=g_or_gc, metadata=dict(metadata or {}))


def dumps_sequence(seq: GateSequence) -> bytes:
    return msgspec.json.encode(seq)


def loads_sequence(data: bytes) -> GateSequence:
    """Decodes a sequence document; schema violations name the field."""
    try:
        seq = msgspec.json.decode(data, type=GateSequence)
    except msgspec.ValidationError as e:
        raise ConfigError(f"invalid gate sequence: {e}")
    except msgspec.DecodeError as e:
        raise ConfigError(f"malformed gate sequence JSON: {e}")
    check_version(seq.format_version, "gate sequence")
    return seq


def save_sequence(seq: GateSequence, path):
    return write_json(path, seq)


def load_sequence(path) -> GateSequence:
    return read_json(path, GateSequence)
