"""Pauli operators, gates and the bond Hamiltonian of the transverse-field Ising model.

H = g H1 + J H2 with H1 = -sum_i X_i and H2 = -sum_<ij> Z_i Z_j, J = 1.
"""

import numpy as np


__all__ = [
    "I2",
    "X",
    "Y",
    "Z",
    "ZZ",
    "G_CRITICAL",
    "x_rotation",
    "zz_gate",
    "bond_hamiltonian",
    "is_unitary",
]

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
ZZ = np.kron(Z, Z)

# quantum Monte Carlo estimate of the critical field
G_CRITICAL = 3.04438


def x_rotation(theta: float) -> np.ndarray:
    """exp(+i theta X), the one-site factor of exp(-i alpha g H1) with theta = alpha g."""
    return np.cos(theta) * I2 + 1j * np.sin(theta) * X


def zz_gate(beta: float) -> np.ndarray:
    """exp(+i beta Z(x)Z), the bond factor of exp(-i beta H2), as a 4x4 matrix."""
    return np.diag(np.exp(1j * beta * np.diag(ZZ).real))


def bond_hamiltonian(g: float) -> np.ndarray:
    """-Z(x)Z - (g/4)(X(x)I + I(x)X); summed over all bonds it gives H with J=1."""
    return -ZZ - 0.25 * g * (np.kron(X, I2) + np.kron(I2, X))


def is_unitary(u: np.ndarray, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol, rtol=0.0))
