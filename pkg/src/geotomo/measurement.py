"""Pauli basis enumeration, exact expectation vectors and inverse reconstruction.

Canonical order: words are enumerated lexicographically with letter order
I < X < Y < Z, the first letter acting on qubit 0. The all-identity word is
first in :func:`pauli_basis` and dropped from measurement vectors, so for two
qubits the vector order is IX, IY, IZ, XI, XX, ..., ZZ.
"""

from __future__ import annotations

from functools import cache, reduce
from itertools import product
from typing import TYPE_CHECKING

import numpy as np

from .errors import PreconditionError
from .qcore import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, as_matrix

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

PAULI_LETTERS = "IXYZ"
_SINGLE = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

# Expectation values may exceed [-1, 1] by this much from rounding.
EXPECTATION_SLACK = 1e-9
IMAG_TOL = 1e-10


@cache
def pauli_basis(n: int) -> tuple[tuple[str, NDArray[np.complex128]], ...]:
    """All 4ⁿ Pauli words with their dense matrices, identity first."""
    if n < 1:
        raise PreconditionError(f"Qubit count must be at least 1, got {n}")
    basis = []
    for letters in product(PAULI_LETTERS, repeat=n):
        word = "".join(letters)
        mat = reduce(np.kron, (_SINGLE[c] for c in letters))
        mat = np.array(mat, dtype=np.complex128)
        mat.setflags(write=False)
        basis.append((word, mat))
    return tuple(basis)


def pauli_words(n: int) -> list[str]:
    """The 4ⁿ − 1 non-identity words in measurement-vector order."""
    return [word for word, _ in pauli_basis(n)[1:]]


@cache
def _stacked(n: int) -> NDArray[np.complex128]:
    stack = np.stack([mat for _, mat in pauli_basis(n)[1:]])
    stack.setflags(write=False)
    return stack


def n_qubits_for_dim(dim: int) -> int:
    """Qubit count of a ``dim``-dimensional register."""
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise PreconditionError(f"Dimension {dim} is not a power of 2")
    return n


def expectations(rho: ArrayLike) -> NDArray[np.float64]:
    """Exact Pauli expectations Tr(ρ P_α) for every non-identity word.

    Raises:
        PreconditionError: If ρ has the wrong shape or a trace has an
            imaginary part above 1e-10 (ρ not Hermitian)
    """
    r = as_matrix(rho, "rho")
    if r.shape[0] != r.shape[1]:
        raise PreconditionError(f"rho must be square, got shape {r.shape}")
    n = n_qubits_for_dim(r.shape[0])
    # Tr(ρP) = Σ_ij ρ_ij P_ji
    traces = np.einsum("ij,aji->a", r, _stacked(n))
    worst = float(np.max(np.abs(traces.imag)))
    if worst > IMAG_TOL:
        raise PreconditionError(f"Pauli expectation has imaginary part {worst:.3e}")
    return np.ascontiguousarray(traces.real)


def expectations_batch(rhos: NDArray[np.complex128]) -> NDArray[np.float64]:
    """Expectations of a stack of density matrices, shape (B, 4ⁿ − 1).

    Imaginary parts are discarded without checking.
    """
    n = n_qubits_for_dim(rhos.shape[-1])
    return np.ascontiguousarray(np.einsum("bij,aji->ba", rhos, _stacked(n)).real)


def reconstruct(x: ArrayLike) -> NDArray[np.complex128]:
    """Linear inversion ρ = (I + Σ_α x_α P_α) / 2ⁿ.

    The result is Hermitian with unit trace but need not be positive; pass it
    through :func:`geotomo.qcore.project_to_physical` when a state is required.
    """
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    n = _qubits_for_length(vec.size)
    dim = 2**n
    rho = np.eye(dim, dtype=np.complex128) + np.tensordot(vec, _stacked(n), axes=1)
    return rho / dim


def parseval_purity(x: ArrayLike) -> float:
    """Purity recovered from a measurement vector, (1 + Σ x_α²) / 2ⁿ."""
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    n = _qubits_for_length(vec.size)
    return float((1.0 + np.dot(vec, vec)) / 2**n)


def in_range(x: ArrayLike) -> bool:
    """Whether every expectation lies in [−1, 1] up to rounding."""
    vec = np.asarray(x, dtype=np.float64)
    return bool(np.all(np.abs(vec) <= 1.0 + EXPECTATION_SLACK))


def _qubits_for_length(length: int) -> int:
    n = 1
    while 4**n - 1 < length:
        n += 1
    if 4**n - 1 != length:
        raise PreconditionError(f"Measurement vector length {length} is not 4^n - 1")
    return n
