"""Independent reference computations used to pin expected test values.

Everything here deliberately avoids the package's computational paths:
matrices are hardcoded entry by entry, permanents expand over explicit
permutations, and qubit probabilities come from 16-dimensional state
vectors.
"""

import itertools
import math

import numpy as np

SQRT2 = math.sqrt(2.0)


def preparation_matrix_reference(thetas, refl=(0.5, 0.5, 0.5, 0.5)):
    """Preparation-stage scattering matrix written out row by row."""
    t = [np.exp(1j * th) for th in thetas]
    r = [math.sqrt(x) for x in refl]
    c = [1j * math.sqrt(1.0 - x) for x in refl]
    u = np.zeros((8, 8), dtype=complex)
    u[0, 0], u[0, 1] = r[0] * t[0], c[0] * t[0]
    u[1, 2], u[1, 3] = r[1] * t[1], c[1] * t[1]
    u[2, 0], u[2, 1] = c[0] * t[2], r[0] * t[2]
    u[3, 4], u[3, 5] = r[2] * t[3], c[2] * t[3]
    u[4, 2], u[4, 3] = c[1] * t[4], r[1] * t[4]
    u[5, 6], u[5, 7] = r[3] * t[5], c[3] * t[5]
    u[6, 4], u[6, 5] = c[2] * t[6], r[2] * t[6]
    u[7, 6], u[7, 7] = c[3] * t[7], r[3] * t[7]
    return u


def mzi_reference(alpha, phi):
    """Measurement MZI block from explicit 2x2 products."""
    dc = np.array([[1, 1j], [1j, 1]], dtype=complex) / SQRT2
    pa = np.diag([np.exp(1j * alpha), 1.0])
    pp = np.diag([np.exp(1j * phi), 1.0])
    return dc @ pp @ dc @ pa


def permanent_by_permutations(m):
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    total = 0j
    for perm in itertools.permutations(range(n)):
        p = 1 + 0j
        for i, j in zip(range(n), perm):
            p *= m[i, j]
        total += p
    return total


def assignment_distribution(u, input_modes=(0, 2, 4, 6)):
    """Post-selected 16-outcome distribution for four single photons.

    For each outcome, the amplitude is the permutation-expanded permanent
    of the 4x4 submatrix picking one output mode per qubit pair.
    """
    probs = np.zeros(16)
    for outcome in range(16):
        out_modes = [2 * k + ((outcome >> (3 - k)) & 1) for k in range(4)]
        sub = u[np.ix_(out_modes, list(input_modes))]
        amp = permanent_by_permutations(sub)
        probs[outcome] = abs(amp) ** 2
    return probs


EIGVECS = {
    "x": (np.array([1, 1]) / SQRT2, np.array([1, -1]) / SQRT2),
    "y": (np.array([1, 1j]) / SQRT2, np.array([1, -1j]) / SQRT2),
    "z": (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    "-x": (np.array([1, -1]) / SQRT2, np.array([1, 1]) / SQRT2),
    "-z": (np.array([0, 1], dtype=complex), np.array([1, 0], dtype=complex)),
    "x+z": (np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)], dtype=complex),
            np.array([-math.sin(math.pi / 8), math.cos(math.pi / 8)], dtype=complex)),
    "x-z": (np.array([math.cos(3 * math.pi / 8), math.sin(3 * math.pi / 8)], dtype=complex),
            np.array([-math.sin(3 * math.pi / 8), math.cos(3 * math.pi / 8)], dtype=complex)),
}


def born_probabilities(state16, basis_tokens):
    """Outcome probabilities of projective measurements on a 4-qubit pure state."""
    psi = np.asarray(state16, dtype=complex)
    probs = np.zeros(16)
    for outcome in range(16):
        v = np.array([1.0], dtype=complex)
        for i, tok in enumerate(basis_tokens):
            bit = (outcome >> (3 - i)) & 1
            v = np.kron(v, EIGVECS[tok][bit])
        probs[outcome] = abs(np.vdot(v, psi)) ** 2
    return probs


def ghz_state(theta=0.0):
    v = np.zeros(16, dtype=complex)
    v[0b0101] = 1 / SQRT2
    v[0b1010] = np.exp(1j * theta) / SQRT2
    return v


def operator_expectation(state16, matrices):
    op = matrices[0]
    for m in matrices[1:]:
        op = np.kron(op, m)
    return complex(np.vdot(state16, op @ state16))
