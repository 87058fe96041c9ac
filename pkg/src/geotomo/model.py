"""Hybrid autoencoder forward pass.

The encoder is a two-hidden-layer ReLU network from the Pauli measurement
vector to a latent vector. An affine map turns the latent vector into circuit
parameters, and a six-layer two-qubit circuit produces the predicted state.

Gate conventions:
    R_A(θ) = exp(−iθA/2) for A ∈ {X, Y, Z}
    Each layer applies R = R_Z·R_Y·R_X on both qubits, then CNOT with
    control qubit 0 and target qubit 1. Layer ℓ uses angles
    3(2ℓ + j) + {0: X, 1: Y, 2: Z} for qubit j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import expit

from .errors import PreconditionError
from .measurement import expectations
from .models import (
    N_ANGLES,
    N_LAYERS,
    N_NOISE_LOGITS,
    CircuitParams,
    DecoderMode,
    EncoderParams,
    ForwardPass,
    LatentMapParams,
    ModelParams,
)
from .qcore import PAULI_X, PAULI_Y, PAULI_Z, embed_single_qubit, hermitize, maximally_mixed

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

INPUT_DIM = 15
HIDDEN_DIMS = (256, 128)
LATENT_DIM = 20
N_QUBITS = 2
DIM = 4

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    dtype=np.complex128,
)
CNOT.setflags(write=False)

_I2 = np.eye(2, dtype=np.complex128)
_I4 = np.eye(DIM, dtype=np.complex128)
_GENERATORS = (PAULI_X, PAULI_Y, PAULI_Z)
_EMBEDDED = tuple(
    tuple(embed_single_qubit(p, qubit, N_QUBITS) for p in _GENERATORS) for qubit in range(N_QUBITS)
)


def relu(a: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.maximum(a, 0.0)


@dataclass(eq=False)
class EncoderTrace:
    """Pre- and post-activation values of a batched encoder pass, rows per sample."""

    x: NDArray[np.float64]
    a1: NDArray[np.float64]
    h1: NDArray[np.float64]
    a2: NDArray[np.float64]
    h2: NDArray[np.float64]
    z: NDArray[np.float64]


def encode_trace(x: ArrayLike, p: EncoderParams) -> EncoderTrace:
    """Batched encoder pass keeping every intermediate for backpropagation.

    Args:
        x: Measurement vectors, shape (B, input_dim)
        p: Encoder weights

    Raises:
        PreconditionError: If the input width does not match W1
    """
    xs = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if xs.shape[1] != p.input_dim:
        raise PreconditionError(f"Encoder expects {p.input_dim} inputs, got {xs.shape[1]}")
    a1 = xs @ p.w1.T + p.b1
    h1 = relu(a1)
    a2 = h1 @ p.w2.T + p.b2
    h2 = relu(a2)
    z = h2 @ p.w3.T + p.b3
    return EncoderTrace(x=xs, a1=a1, h1=h1, a2=a2, h2=h2, z=z)


def encode(x: ArrayLike, p: EncoderParams) -> NDArray[np.float64]:
    """z = W3·ReLU(W2·ReLU(W1x + b1) + b2) + b3 for one vector or a batch."""
    arr = np.asarray(x, dtype=np.float64)
    z = encode_trace(arr, p).z
    return z[0] if arr.ndim == 1 else z


def decoder_mode_of(m: LatentMapParams) -> DecoderMode:
    """Decoder mode implied by the latent map's output width."""
    rows = m.w4.shape[0]
    if rows == N_ANGLES + N_NOISE_LOGITS:
        return DecoderMode.CORRECTED
    if rows == N_ANGLES:
        return DecoderMode.LITERAL
    raise PreconditionError(f"Latent map has {rows} outputs, expected 36 or 38")


def latent_to_params(z: ArrayLike, m: LatentMapParams) -> CircuitParams:
    """θ = W4·z + b4, split into 36 angles and (corrected mode) 2 noise logits."""
    vec = np.asarray(z, dtype=np.float64).reshape(-1)
    if vec.size != m.w4.shape[1]:
        raise PreconditionError(f"Latent map expects {m.w4.shape[1]} inputs, got {vec.size}")
    out = m.w4 @ vec + m.b4
    if decoder_mode_of(m) is DecoderMode.CORRECTED:
        return CircuitParams(angles=out[:N_ANGLES].copy(), noise_logits=out[N_ANGLES:].copy())
    return CircuitParams(angles=out.copy())


def noise_probabilities(theta: CircuitParams) -> NDArray[np.float64]:
    """Per-qubit depolarization probabilities sigmoid(noise_logits)."""
    return np.asarray(expit(theta.noise_logits), dtype=np.float64)


def rotation(axis: int, angle: float) -> NDArray[np.complex128]:
    """exp(−i·angle·A/2) for A = X, Y, Z (axis 0, 1, 2)."""
    return np.cos(angle / 2) * _I2 - 1j * np.sin(angle / 2) * _GENERATORS[axis]


def angle_index(layer: int, qubit: int, axis: int) -> int:
    """Position of the (layer, qubit, axis) rotation in the 36-angle vector."""
    return 3 * (N_QUBITS * layer + qubit) + axis


def layer_unitary(angles: NDArray[np.float64], layer: int) -> NDArray[np.complex128]:
    """CNOT·(R_0 ⊗ R_1) with R_j = R_Z·R_Y·R_X."""
    singles = []
    for qubit in range(N_QUBITS):
        r = _I2
        for axis in range(3):
            r = rotation(axis, float(angles[angle_index(layer, qubit, axis)])) @ r
        singles.append(r)
    return CNOT @ np.kron(singles[0], singles[1])


def layer_unitaries(angles: ArrayLike) -> list[NDArray[np.complex128]]:
    """The six layer operators L_0 … L_5 in application order."""
    vec = _check_angles(angles)
    return [layer_unitary(vec, layer) for layer in range(N_LAYERS)]


def build_unitary(angles: ArrayLike) -> NDArray[np.complex128]:
    """U(θ) = L_5 ⋯ L_0.

    Raises:
        PreconditionError: If there are not exactly 36 angles
    """
    u = _I4
    for layer in layer_unitaries(angles):
        u = layer @ u
    return u


def _check_angles(angles: ArrayLike) -> NDArray[np.float64]:
    vec = np.asarray(angles, dtype=np.float64).reshape(-1)
    if vec.size != N_ANGLES:
        raise PreconditionError(f"Expected {N_ANGLES} angles, got {vec.size}")
    return vec


def twirl(rho: NDArray[np.complex128], qubit: int) -> NDArray[np.complex128]:
    """Fully depolarize one qubit: ¼ Σ_P P_q ρ P_q over P ∈ {I, X, Y, Z}."""
    out = rho.copy()
    for op in _EMBEDDED[qubit]:
        out = out + op @ rho @ op
    return out / 4


def depolarize(rho: NDArray[np.complex128], qubit: int, p: float) -> NDArray[np.complex128]:
    """(1 − p)ρ + p·twirl_q(ρ)."""
    return (1.0 - p) * rho + p * twirl(rho, qubit)


def prepare_pure(angles: ArrayLike) -> NDArray[np.complex128]:
    """U(θ)|00⟩⟨00|U(θ)†."""
    psi = build_unitary(angles)[:, 0]
    return np.outer(psi, psi.conj())


def decode(theta: CircuitParams, mode: DecoderMode) -> NDArray[np.complex128]:
    """Predicted state of the decoder circuit.

    LITERAL returns U(I/4)U†, which equals I/4 for every θ.
    CORRECTED prepares U|00⟩ and depolarizes qubit 0 then qubit 1 with
    probabilities sigmoid(noise_logits).
    """
    if mode is DecoderMode.CORRECTED and theta.noise_logits.shape != (N_NOISE_LOGITS,):
        raise PreconditionError("Corrected decoder needs two noise logits")
    return decode_unitary(build_unitary(theta.angles), noise_probabilities(theta), mode)


def decode_unitary(
    u: NDArray[np.complex128], probs: NDArray[np.float64], mode: DecoderMode
) -> NDArray[np.complex128]:
    """Decoder output for an already assembled circuit unitary."""
    if mode is DecoderMode.LITERAL:
        return hermitize(u @ maximally_mixed(DIM) @ u.conj().T)
    psi = u[:, 0]
    rho = np.outer(psi, psi.conj())
    for qubit, p in enumerate(probs):
        rho = depolarize(rho, qubit, float(p))
    return hermitize(rho)


def forward(x: ArrayLike, params: ModelParams) -> ForwardPass:
    """x → z → θ → ρ_pred → x̂ for a single measurement vector."""
    z = encode(np.asarray(x, dtype=np.float64).reshape(-1), params.encoder)
    theta = latent_to_params(z, params.latent_map)
    rho = decode(theta, params.mode)
    return ForwardPass(z=z, theta=theta, rho_pred=rho, x_hat=expectations(rho))


def predict_states(xs: ArrayLike, params: ModelParams) -> list[NDArray[np.complex128]]:
    """Decoded states for a batch of measurement vectors."""
    zs = encode_trace(xs, params.encoder).z
    return [decode(latent_to_params(z, params.latent_map), params.mode) for z in zs]


def init_params(
    rng: np.random.Generator,
    mode: DecoderMode = DecoderMode.CORRECTED,
    input_dim: int = INPUT_DIM,
    hidden_dims: tuple[int, int] = HIDDEN_DIMS,
    latent_dim: int = LATENT_DIM,
) -> ModelParams:
    """He-initialized encoder and a N(0, 1/latent_dim) latent map, zero biases."""
    h1, h2 = hidden_dims

    def he(fan_out: int, fan_in: int) -> NDArray[np.float64]:
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))

    encoder = EncoderParams(
        w1=he(h1, input_dim),
        b1=np.zeros(h1),
        w2=he(h2, h1),
        b2=np.zeros(h2),
        w3=he(latent_dim, h2),
        b3=np.zeros(latent_dim),
    )
    outputs = mode.circuit_outputs
    latent_map = LatentMapParams(
        w4=rng.normal(0.0, np.sqrt(1.0 / latent_dim), size=(outputs, latent_dim)),
        b4=np.zeros(outputs),
    )
    return ModelParams(encoder=encoder, latent_map=latent_map, mode=mode)


def count_parameters(params: ModelParams) -> dict[str, int]:
    """Trainable parameter counts of the encoder, latent map and whole model."""
    arrays = params.arrays()
    encoder = sum(a.size for a in arrays[:6])
    latent_map = sum(a.size for a in arrays[6:])
    return {"encoder": encoder, "latent_map": latent_map, "total": encoder + latent_map}


def parameter_norm(params: ModelParams) -> float:
    """Euclidean norm of all parameters stacked."""
    return float(np.sqrt(sum(float(np.sum(a * a)) for a in params.arrays())))
