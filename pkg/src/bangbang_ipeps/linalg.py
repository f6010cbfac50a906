"""Dense complex tensor algebra used by every other module.

Tensors are plain ``numpy.ndarray`` objects of dtype complex128 in row-major
(C) layout. Site tensors always carry their axes in the order
``[physical, top, left, bottom, right]``.

Contractions that involve more than two tensors go through
``opt_einsum.contract``; pairwise contractions use ``numpy.tensordot`` whose
reduction order is fixed for a given shape, so optimizer traces are
reproducible for a fixed BLAS thread configuration.
"""

import logging
from typing import Callable, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import opt_einsum as oe
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from .errors import ConvergenceError, NumericalError, ShapeError


__all__ = [
    "DenseTensor",
    "LinearMap",
    "as_tensor",
    "contract",
    "ncon",
    "factorize_svd",
    "factorize_polar",
    "dominant_eigenpair",
    "fix_phase",
    "hermitian_psd",
    "pinv_hermitian",
    "random_isometry",
]

logger = logging.getLogger(__name__)

DenseTensor = np.ndarray

# below this dimension the eigenproblem is solved densely
_DENSE_EIG_DIM = 128


def as_tensor(data, name: str = "tensor") -> DenseTensor:
    """Returns ``data`` as a complex128 C-contiguous array with finite entries."""
    t = np.ascontiguousarray(data, dtype=np.complex128)
    if not np.all(np.isfinite(t)):
        raise NumericalError(f"{name} has non-finite entries")
    return t


class LinearMap:
    """A square linear map applied without materializing its matrix."""

    def __init__(self, dim: int, apply: Callable[[np.ndarray], np.ndarray]):
        if dim <= 0:
            raise ShapeError(f"LinearMap dimension must be positive, got {dim}")
        self.dim = int(dim)
        self._apply = apply

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(self._apply(np.asarray(v, dtype=np.complex128).reshape(self.dim)),
                          dtype=np.complex128).reshape(self.dim)

    def as_operator(self) -> LinearOperator:
        return LinearOperator((self.dim, self.dim), matvec=self, dtype=np.complex128)

    def to_dense(self) -> np.ndarray:
        eye = np.eye(self.dim, dtype=np.complex128)
        return np.stack([self(eye[:, i]) for i in range(self.dim)], axis=1)


def contract(t1: DenseTensor, t2: DenseTensor,
             pairs: Sequence[Tuple[int, int]]) -> DenseTensor:
    """Sums ``t1`` and ``t2`` over paired axes.

    The result carries the unpaired axes of ``t1`` followed by those of
    ``t2``, each in their original order.
    """
    axes1 = [p[0] for p in pairs]
    axes2 = [p[1] for p in pairs]
    for a1, a2 in pairs:
        if not (0 <= a1 < t1.ndim and 0 <= a2 < t2.ndim):
            raise ShapeError(f"axis pair ({a1}, {a2}) out of range for ranks {t1.ndim}, {t2.ndim}")
        if t1.shape[a1] != t2.shape[a2]:
            raise ShapeError(
                f"axis pair ({a1}, {a2}) has mismatched extents {t1.shape[a1]} != {t2.shape[a2]}"
            )
    return np.tensordot(t1, t2, axes=(axes1, axes2))


def ncon(expr: str, *operands: np.ndarray) -> np.ndarray:
    """Einsum-style multi-tensor contraction with an opt_einsum path."""
    return oe.contract(expr, *operands, optimize="greedy")


def _svd(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        try:
            return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NumericalError(f"SVD did not converge for a {m.shape[0]}x{m.shape[1]} matrix: {e}")


def factorize_svd(t: DenseTensor,
                  split: Tuple[Sequence[int], Sequence[int]],
                  max_rank: Optional[int] = None,
                  cutoff: float = 0.0) -> Tuple[DenseTensor, np.ndarray, DenseTensor, float]:
    """Truncated SVD of ``t`` across the bipartition ``split = (left, right)``.

    Returns ``(U, S, V, discarded_weight)`` with ``U`` shaped
    ``left extents + (rank,)``, ``V`` shaped ``(rank,) + right extents`` and
    ``discarded_weight`` the relative Frobenius norm of the dropped part.
    Singular values below ``cutoff * S[0]`` are dropped.
    """
    left, right = list(split[0]), list(split[1])
    if sorted(left + right) != list(range(t.ndim)):
        raise ShapeError(f"split {split} does not partition the {t.ndim} axes")
    left_shape = [t.shape[i] for i in left]
    right_shape = [t.shape[i] for i in right]
    m = np.transpose(t, left + right).reshape(int(np.prod(left_shape)), int(np.prod(right_shape)))
    u, s, vh = _svd(m)

    keep = len(s)
    if s.size and cutoff > 0:
        keep = max(1, int(np.sum(s > cutoff * s[0])))
    if max_rank is not None:
        keep = min(keep, max_rank)
    total = float(np.sum(s**2))
    dropped = float(np.sum(s[keep:] ** 2))
    discarded = float(np.sqrt(dropped / total)) if total > 0 else 0.0

    U = u[:, :keep].reshape(left_shape + [keep])
    V = vh[:keep, :].reshape([keep] + right_shape)
    return U, s[:keep], V, discarded


def factorize_polar(m: np.ndarray,
                    side: Literal["left", "right"] = "left") -> Tuple[np.ndarray, np.ndarray]:
    """Polar decomposition computed from the SVD ``m = W S X^dagger``.

    ``side="left"`` gives ``m = U P``, ``side="right"`` gives ``m = P U``,
    with ``U = W X^dagger`` and ``P`` Hermitian positive semidefinite.
    ``U`` is an isometry on its shorter side.
    """
    if m.ndim != 2:
        raise ShapeError(f"polar decomposition needs a matrix, got rank {m.ndim}")
    m = as_tensor(m, "polar input")
    w, s, xh = _svd(m)
    u = w @ xh
    if side == "left":
        p = (xh.conj().T * s) @ xh
    elif side == "right":
        p = (w * s) @ w.conj().T
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return u, 0.5 * (p + p.conj().T)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotates ``v`` so its largest-magnitude entry is real and positive."""
    flat = v.reshape(-1)
    i = int(np.argmax(np.abs(flat)))
    if flat[i] == 0:
        return v
    return v * (abs(flat[i]) / flat[i])


def dominant_eigenpair(linear_map: Union[LinearMap, np.ndarray],
                       init: Optional[np.ndarray] = None,
                       tol: float = 1e-12,
                       max_iter: int = 1000) -> Tuple[complex, np.ndarray]:
    """Largest-magnitude eigenpair of a square map.

    Small problems are solved densely; larger ones with ARPACK started from
    ``init`` (or a fixed deterministic vector). The returned vector has unit
    norm and fixed phase. Raises ``ConvergenceError`` carrying the last
    residual when the residual ``||A v - lam v||`` exceeds ``tol * |lam|``.
    """
    if isinstance(linear_map, np.ndarray):
        dense = linear_map
        linear_map = LinearMap(dense.shape[0], lambda x: dense @ x)
    dim = linear_map.dim

    if dim <= _DENSE_EIG_DIM:
        vals, vecs = np.linalg.eig(linear_map.to_dense())
        i = int(np.argmax(np.abs(vals)))
        lam, v = complex(vals[i]), vecs[:, i]
    else:
        v0 = init.reshape(dim).astype(np.complex128) if init is not None else \
            np.ones(dim, dtype=np.complex128) + 1j * np.linspace(0.0, 1.0, dim)
        if init is not None and not np.any(v0):
            v0 = np.ones(dim, dtype=np.complex128)
        try:
            vals, vecs = eigs(linear_map.as_operator(), k=1, which="LM", v0=v0,
                              tol=tol, maxiter=max_iter)
        except ArpackNoConvergence as e:
            residual = np.inf
            if len(e.eigenvalues):
                r = linear_map(e.eigenvectors[:, 0]) - e.eigenvalues[0] * e.eigenvectors[:, 0]
                residual = float(np.linalg.norm(r))
            raise ConvergenceError(
                f"dominant eigenpair of a {dim}-dimensional map did not converge "
                f"in {max_iter} iterations", residual=residual)
        lam, v = complex(vals[0]), vecs[:, 0]

    v = fix_phase(v / np.linalg.norm(v))
    residual = float(np.linalg.norm(linear_map(v) - lam * v))
    scale = max(abs(lam), np.finfo(float).tiny)
    if residual > 10 * max(tol, 1e-14) * scale and residual > 1e-13 * scale * np.sqrt(dim):
        raise ConvergenceError(
            f"dominant eigenpair residual {residual:.3e} above tolerance {tol:.1e}",
            residual=residual)
    logger.debug("eigenpair dim=%d lambda=%s residual=%.2e", dim, lam, residual)
    return lam, v


def hermitian_psd(m: np.ndarray) -> Tuple[np.ndarray, float]:
    """Symmetrizes ``m`` and clips negative eigenvalues.

    Returns the clipped matrix and the most negative eigenvalue relative to
    the largest one (before clipping).
    """
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    negativity = float(min(0.0, w.min()) / top) if top > 0 else 0.0
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T, negativity


def pinv_hermitian(m: np.ndarray, cutoff: float = 1e-12) -> np.ndarray:
    """Pseudo-inverse of a Hermitian matrix with relative eigenvalue cutoff."""
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    inv = np.zeros_like(w)
    if top > 0:
        mask = np.abs(w) > cutoff * top
        inv[mask] = 1.0 / w[mask]
    return (v * inv) @ v.conj().T


def random_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """A ``rows x cols`` matrix with orthonormal columns (``rows >= cols``)."""
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
