"""Dense complex linear algebra for few-qubit / few-mode photonics.

Everything here operates on plain numpy arrays in 64-bit complex arithmetic:
unitaries and scattering matrices are square ``complex128`` matrices, pure
states are normalized vectors, density matrices are Hermitian PSD trace-one
matrices.  All functions are pure and safe to call from multiple threads.

Qubit ordering convention: the computational basis index of ``|q1 q2 q3 q4>``
is ``q1*8 + q2*4 + q3*2 + q4`` (first qubit most significant), so outcome
labels read left to right in the order 0000, 0001, ..., 1111.
"""

from __future__ import annotations

import enum
import itertools
import math
from typing import Sequence

import numpy as np

SQRT2 = math.sqrt(2.0)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class PauliLabel(enum.Enum):
    """Single-qubit measurement label.

    Besides the identity and the three Pauli operators, the rotated
    combinations (X+Z)/sqrt(2) and (X-Z)/sqrt(2) and the negated operators
    -X and -Z are supported; all non-identity labels are Hermitian with
    eigenvalues +-1.
    """

    I = "I"
    X = "X"
    Y = "Y"
    Z = "Z"
    MINUS_X = "-X"
    MINUS_Z = "-Z"
    XPZ = "(X+Z)/sqrt2"
    XMZ = "(X-Z)/sqrt2"

    @property
    def sign(self) -> int:
        return -1 if self in (PauliLabel.MINUS_X, PauliLabel.MINUS_Z) else 1

    @property
    def unsigned(self) -> "PauliLabel":
        if self is PauliLabel.MINUS_X:
            return PauliLabel.X
        if self is PauliLabel.MINUS_Z:
            return PauliLabel.Z
        return self

    @property
    def matrix(self) -> np.ndarray:
        """The 2x2 Hermitian operator this label names (sign included)."""
        base = {
            PauliLabel.I: PAULI_I,
            PauliLabel.X: PAULI_X,
            PauliLabel.Y: PAULI_Y,
            PauliLabel.Z: PAULI_Z,
            PauliLabel.MINUS_X: -PAULI_X,
            PauliLabel.MINUS_Z: -PAULI_Z,
            PauliLabel.XPZ: (PAULI_X + PAULI_Z) / SQRT2,
            PauliLabel.XMZ: (PAULI_X - PAULI_Z) / SQRT2,
        }
        return base[self].copy()

    @classmethod
    def from_token(cls, token: str) -> "PauliLabel":
        t = token.strip().lower()
        table = {
            "i": cls.I, "1": cls.I,
            "x": cls.X, "y": cls.Y, "z": cls.Z,
            "-x": cls.MINUS_X, "-z": cls.MINUS_Z,
            "x+z": cls.XPZ, "(x+z)/sqrt2": cls.XPZ,
            "x-z": cls.XMZ, "(x-z)/sqrt2": cls.XMZ,
        }
        if t not in table:
            raise ValueError(f"unknown measurement label {token!r}")
        return table[t]

    @property
    def token(self) -> str:
        rev = {
            PauliLabel.I: "I", PauliLabel.X: "X", PauliLabel.Y: "Y",
            PauliLabel.Z: "Z", PauliLabel.MINUS_X: "-X",
            PauliLabel.MINUS_Z: "-Z", PauliLabel.XPZ: "X+Z",
            PauliLabel.XMZ: "X-Z",
        }
        return rev[self]


def check_square(m: np.ndarray) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def check_unitary(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    a = check_square(m)
    dev = np.linalg.norm(a.conj().T @ a - np.eye(a.shape[0]))
    if dev > tol:
        raise ValueError(f"matrix is not unitary (deviation {dev:.3e} > {tol:.1e})")
    return a


def check_state(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    a = np.asarray(v, dtype=complex).ravel()
    n2 = float(np.vdot(a, a).real)
    if abs(n2 - 1.0) > tol:
        raise ValueError(f"state norm^2 = {n2} differs from 1 by more than {tol:.1e}")
    return a


def check_density_matrix(rho: np.ndarray, herm_tol: float = 1e-10,
                         trace_tol: float = 1e-10, eig_tol: float = 1e-10) -> np.ndarray:
    a = check_square(rho)
    if np.linalg.norm(a - a.conj().T) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(a).real - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {np.trace(a).real} != 1")
    wmin = float(np.linalg.eigvalsh(a).min())
    if wmin < -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {wmin:.3e}")
    return a


def permanent(m: np.ndarray) -> complex:
    """Permanent of a square complex matrix via Ryser's formula.

    Subsets are visited in Gray-code order so that each step updates the
    running column sums with a single row add/subtract, giving O(2^n * n)
    arithmetic.  Dimensions up to 16 are accepted.
    """
    a = check_square(m)
    n = a.shape[0]
    if n == 0:
        return 1 + 0j
    if n > 16:
        raise ValueError(f"permanent limited to n <= 16, got {n}")
    total = 0j
    sums = np.zeros(n, dtype=complex)
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        bit = gray ^ prev_gray
        j = bit.bit_length() - 1
        if gray & bit:
            sums += a[:, j]
        else:
            sums -= a[:, j]
        prev_gray = gray
        popcount = bin(gray).count("1")
        sign = 1 if (n - popcount) % 2 == 0 else -1
        total += sign * np.prod(sums)
    return complex(total)


def permanent_naive(m: np.ndarray) -> complex:
    """Permanent by explicit sum over all n! permutations (reference only)."""
    a = check_square(m)
    n = a.shape[0]
    if n > 8:
        raise ValueError("factorial expansion limited to n <= 8")
    idx = range(n)
    total = 0j
    for perm in itertools.permutations(idx):
        p = 1 + 0j
        for i, j in zip(idx, perm):
            p *= a[i, j]
        total += p
    return complex(total)


def pauli_operator(labels: Sequence[PauliLabel]) -> np.ndarray:
    """Kronecker product of single-qubit operators, first label most significant."""
    labels = list(labels)
    if len(labels) < 1:
        raise ValueError("at least one qubit label required")
    op = labels[0].matrix
    for lab in labels[1:]:
        op = np.kron(op, lab.matrix)
    return op


def ghz4(theta: float = 0.0) -> np.ndarray:
    """Four-qubit target state (|0101> + e^{i*theta}|1010>)/sqrt(2)."""
    v = np.zeros(16, dtype=complex)
    v[0b0101] = 1.0 / SQRT2
    v[0b1010] = np.exp(1j * theta) / SQRT2
    return v


def fidelity_to_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    """<psi|rho|psi>, checked to be real."""
    r = np.asarray(rho, dtype=complex)
    v = np.asarray(psi, dtype=complex).ravel()
    if r.shape != (v.size, v.size):
        raise ValueError(f"dimension mismatch: rho {r.shape} vs psi {v.size}")
    val = complex(np.vdot(v, r @ v))
    if abs(val.imag) > 1e-10:
        raise ValueError(f"fidelity has non-negligible imaginary part {val.imag:.3e}")
    return float(val.real)


def purity(rho: np.ndarray) -> float:
    """Tr(rho^2)."""
    r = check_square(rho)
    return float(np.trace(r @ r).real)


def project_to_physical(h: np.ndarray, herm_tol: float = 1e-8) -> np.ndarray:
    """Nearest-valid density matrix from a Hermitian estimate.

    Eigendecomposes, clamps negative eigenvalues to zero and renormalizes
    the trace to one.  Raises if nothing positive survives the clamp.
    """
    a = check_square(h)
    if np.linalg.norm(a - a.conj().T) > herm_tol:
        raise ValueError("input is not Hermitian")
    a = (a + a.conj().T) / 2.0
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    tr = float(w.sum())
    if tr <= 1e-14:
        raise ValueError("degenerate input: no positive weight after clamping")
    w /= tr
    return (v * w) @ v.conj().T
