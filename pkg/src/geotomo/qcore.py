"""Dense complex linear algebra and quantum-information primitives.

All functions are pure and operate on ``complex128`` numpy arrays. Matrices are
small (d ≤ 16), so every routine works on dense arrays and favors robustness:
eigenvalues are clipped at zero (and tiny ones floored to zero) before any
square root is taken.
"""

from __future__ import annotations

from functools import reduce
from typing import TYPE_CHECKING

import numpy as np

from .errors import DegenerateInputError, NumericalError, PreconditionError
from .models import Spectrum, ValidationResult

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
EIG_HERMITIAN_TOL = 1e-9
KRAUS_TOL = 1e-9

# Regularizer of the true state where the fidelity gradient forms M^{-1/2}.
FIDELITY_EPS = 1e-12
# Eigenvalues below this are treated as exact zeros before square roots.
SPECTRAL_FLOOR = 1e-14


def _frozen(m: NDArray[np.complex128]) -> NDArray[np.complex128]:
    m.setflags(write=False)
    return m


PAULI_I = _frozen(np.eye(2, dtype=np.complex128))
PAULI_X = _frozen(np.array([[0, 1], [1, 0]], dtype=np.complex128))
PAULI_Y = _frozen(np.array([[0, -1j], [1j, 0]], dtype=np.complex128))
PAULI_Z = _frozen(np.array([[1, 0], [0, -1]], dtype=np.complex128))


def as_matrix(m: ArrayLike, name: str = "matrix") -> NDArray[np.complex128]:
    """Convert ``m`` to a finite 2-D complex array.

    Raises:
        PreconditionError: If the array is not 2-D or holds non-finite entries
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise PreconditionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{name} has non-finite entries")
    return arr


def _require_square(m: NDArray[np.complex128], name: str = "matrix") -> None:
    if m.shape[0] != m.shape[1]:
        raise PreconditionError(f"{name} must be square, got shape {m.shape}")


def hermitize(m: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Hermitian part (m + m†)/2."""
    return (m + m.conj().T) / 2


def hermiticity_error(m: NDArray[np.complex128]) -> float:
    """Largest entrywise deviation max |m − m†|."""
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _eigh(m: NDArray[np.complex128]) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as e:
        raise NumericalError(
            f"Hermitian eigensolver did not converge for a {m.shape[0]}x{m.shape[0]} matrix: {e}"
        ) from e
    return w, v


def herm_eig(h: ArrayLike, tol: float = EIG_HERMITIAN_TOL) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix.

    Args:
        h: Square Hermitian matrix
        tol: Allowed entrywise deviation from Hermiticity

    Returns:
        Spectrum with ascending real eigenvalues and unitary eigenvector columns

    Raises:
        PreconditionError: If ``h`` is not square or not Hermitian within ``tol``
        NumericalError: If the eigensolver does not converge
    """
    m = as_matrix(h, "h")
    _require_square(m, "h")
    deviation = hermiticity_error(m)
    if deviation > tol:
        raise PreconditionError(f"Matrix is not Hermitian: max |h - h†| = {deviation:.3e}")
    w, v = _eigh(hermitize(m))
    return Spectrum(eigenvalues=w, eigenvectors=v)


def _clip_spectrum(w: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.where(w > SPECTRAL_FLOOR, w, 0.0)


def spectral_sqrt(m: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Square root of a PSD matrix without validation; tiny eigenvalues become 0."""
    w, v = _eigh(hermitize(m))
    root: NDArray[np.complex128] = (v * np.sqrt(_clip_spectrum(w))) @ v.conj().T
    return hermitize(root)


def validate_density_matrix(
    rho: ArrayLike,
    trace_tol: float = TRACE_TOL,
    hermitian_tol: float = HERMITIAN_TOL,
    psd_tol: float = PSD_TOL,
) -> ValidationResult:
    """Check trace, Hermiticity and positivity of a density matrix.

    Args:
        rho: Candidate density matrix
        trace_tol: Allowed |Tr ρ − 1| and |Im Tr ρ|
        hermitian_tol: Allowed max |ρ − ρ†|
        psd_tol: Allowed negative eigenvalue magnitude

    Returns:
        ValidationResult describing the first violated property
    """
    try:
        m = as_matrix(rho, "rho")
        _require_square(m, "rho")
    except PreconditionError as e:
        return ValidationResult(valid=False, error_message=str(e))

    dim = m.shape[0]
    if dim == 0 or dim & (dim - 1):
        return ValidationResult(valid=False, error_message=f"Dimension {dim} is not a power of 2")

    trace = np.trace(m)
    if abs(trace.real - 1.0) > trace_tol or abs(trace.imag) > trace_tol:
        return ValidationResult(valid=False, error_message=f"Trace is {trace:.12g}, expected 1")

    deviation = hermiticity_error(m)
    if deviation > hermitian_tol:
        return ValidationResult(
            valid=False, error_message=f"Not Hermitian: max |rho - rho†| = {deviation:.3e}"
        )

    min_eig = float(np.linalg.eigvalsh(hermitize(m))[0])
    if min_eig < -psd_tol:
        return ValidationResult(
            valid=False, error_message=f"Not positive semidefinite: min eigenvalue {min_eig:.3e}"
        )

    return ValidationResult(valid=True)


def check_density_matrix(rho: ArrayLike, name: str = "rho") -> NDArray[np.complex128]:
    """Return ``rho`` as a complex array, raising if it is not a valid state.

    Raises:
        PreconditionError: If validation fails
    """
    result = validate_density_matrix(rho)
    if not result.valid:
        raise PreconditionError(f"{name} is not a valid density matrix: {result.error_message}")
    return as_matrix(rho, name)


def sqrt_psd(rho: ArrayLike) -> NDArray[np.complex128]:
    """Principal square root of a density matrix via its spectral decomposition.

    Negative eigenvalues are clipped to zero before the square root.

    Raises:
        PreconditionError: If ``rho`` is not a valid density matrix
    """
    return spectral_sqrt(check_density_matrix(rho))


def regularize(rho: NDArray[np.complex128], eps: float = FIDELITY_EPS) -> NDArray[np.complex128]:
    """Trace-preserving regularization (ρ + εI) / (1 + dε)."""
    dim = rho.shape[0]
    return (rho + eps * np.eye(dim, dtype=np.complex128)) / (1.0 + dim * eps)


def fidelity(rho: ArrayLike, sigma: ArrayLike, eps: float = 0.0) -> float:
    """Uhlmann fidelity F(ρ, σ) = (Tr √(√ρ σ √ρ))².

    A positive ``eps`` regularizes ``rho`` first. Tr √(√ρ σ √ρ) is evaluated as the
    sum of singular values of √ρ √σ, which are the square roots of the
    eigenvalues of √ρ σ √ρ. The result is clipped to [0, 1].

    Raises:
        PreconditionError: If the dimensions differ
    """
    r = as_matrix(rho, "rho")
    s = as_matrix(sigma, "sigma")
    _require_square(r, "rho")
    if r.shape != s.shape:
        raise PreconditionError(f"Dimension mismatch: {r.shape} vs {s.shape}")

    product = spectral_sqrt(regularize(r, eps)) @ spectral_sqrt(s)
    try:
        singular_values = np.linalg.svd(product, compute_uv=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD did not converge in fidelity: {e}") from e
    value = float(np.sum(singular_values)) ** 2
    return float(np.clip(value, 0.0, 1.0))


def bures_angle(rho: ArrayLike, sigma: ArrayLike) -> float:
    """Bures angle arccos √F(ρ, σ), in [0, π/2]."""
    root = np.clip(np.sqrt(fidelity(rho, sigma)), 0.0, 1.0)
    return float(np.arccos(root))


def bures_length(rho: ArrayLike, sigma: ArrayLike) -> float:
    """Bures distance √(2 − 2√F(ρ, σ)), in [0, √2]."""
    root = np.clip(np.sqrt(fidelity(rho, sigma)), 0.0, 1.0)
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * root)))


def apply_kraus(
    rho: ArrayLike, kraus: Sequence[ArrayLike], tol: float = KRAUS_TOL
) -> NDArray[np.complex128]:
    """Apply the channel ρ → Σ_k K_k ρ K_k†.

    Raises:
        PreconditionError: If Σ K†K differs from the identity by more than ``tol``
            or operator shapes do not match ``rho``
    """
    r = as_matrix(rho, "rho")
    _require_square(r, "rho")
    if not kraus:
        raise PreconditionError("Kraus set is empty")
    ops = [as_matrix(k, "Kraus operator") for k in kraus]
    for op in ops:
        if op.shape != r.shape:
            raise PreconditionError(f"Kraus operator shape {op.shape} does not match {r.shape}")

    completeness = sum((op.conj().T @ op for op in ops), np.zeros_like(r))
    deviation = float(np.max(np.abs(completeness - np.eye(r.shape[0]))))
    if deviation > tol:
        raise PreconditionError(
            f"Kraus set is not trace preserving: max |ΣK†K - I| = {deviation:.3e}"
        )

    out = sum((op @ r @ op.conj().T for op in ops), np.zeros_like(r))
    return hermitize(out)


def project_to_physical(m: ArrayLike) -> NDArray[np.complex128]:
    """Nearest-spectrum physical state: Hermitize, clip negative eigenvalues, renormalize.

    Raises:
        PreconditionError: If ``m`` is not square
        DegenerateInputError: If nothing positive survives the clipping
    """
    arr = as_matrix(m, "m")
    _require_square(arr, "m")
    w, v = _eigh(hermitize(arr))
    w = np.clip(w, 0.0, None)
    total = float(np.sum(w))
    if total <= SPECTRAL_FLOOR:
        raise DegenerateInputError("Matrix has no positive spectrum left after clipping")
    out: NDArray[np.complex128] = (v * (w / total)) @ v.conj().T
    return hermitize(out)


def purity(rho: ArrayLike) -> float:
    """Tr(ρ²), real part."""
    r = as_matrix(rho, "rho")
    return float(np.real(np.trace(r @ r)))


def tensor(a: ArrayLike, b: ArrayLike, *rest: ArrayLike) -> NDArray[np.complex128]:
    """Kronecker product of two or more matrices."""
    mats = [as_matrix(x) for x in (a, b, *rest)]
    return reduce(np.kron, mats)


def embed_single_qubit(
    op: NDArray[np.complex128], qubit: int, n_qubits: int
) -> NDArray[np.complex128]:
    """Lift a 2×2 operator onto ``qubit`` of an ``n_qubits`` register (qubit 0 leftmost)."""
    if not 0 <= qubit < n_qubits:
        raise PreconditionError(f"Qubit {qubit} out of range for {n_qubits} qubits")
    factors = [op if j == qubit else PAULI_I for j in range(n_qubits)]
    return reduce(np.kron, factors) if n_qubits > 1 else np.array(op, dtype=np.complex128)


def ket_to_density(psi: ArrayLike) -> NDArray[np.complex128]:
    """|ψ⟩⟨ψ| of a normalized state vector."""
    vec = np.asarray(psi, dtype=np.complex128).reshape(-1)
    return np.outer(vec, vec.conj())


def maximally_mixed(dim: int) -> NDArray[np.complex128]:
    """I/d."""
    return np.eye(dim, dtype=np.complex128) / dim


def partial_transpose(
    rho: ArrayLike, dims: tuple[int, int] = (2, 2), subsystem: int = 1
) -> NDArray[np.complex128]:
    """Partial transpose of a bipartite operator on one subsystem."""
    r = as_matrix(rho, "rho")
    d_a, d_b = dims
    if r.shape != (d_a * d_b, d_a * d_b):
        raise PreconditionError(f"Shape {r.shape} does not match subsystem dims {dims}")
    t = r.reshape(d_a, d_b, d_a, d_b)
    if subsystem == 0:
        t = t.transpose(2, 1, 0, 3)
    elif subsystem == 1:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise PreconditionError(f"Subsystem must be 0 or 1, got {subsystem}")
    return t.reshape(d_a * d_b, d_a * d_b)
