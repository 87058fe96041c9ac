"""Purity-controlled ensemble of mixed states from seven preparation channels."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import PreconditionError, PurityTargetError
from .logging_config import get_logger
from .measurement import expectations
from .models import ChannelKind, StateRecord
from .qcore import (
    apply_kraus,
    check_density_matrix,
    embed_single_qubit,
    hermitize,
    ket_to_density,
    maximally_mixed,
    purity,
)

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = get_logger(__name__)

CHANNELS: tuple[ChannelKind, ...] = tuple(ChannelKind)

BETA_MAX = 50.0
MAX_BISECTIONS = 60
MAX_RESAMPLES = 20
PURITY_TOLERANCE = 0.01
BISECTION_TOL = 1e-9
ENDPOINT_TOL = 1e-12
MONOTONE_SLACK = 1e-12


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, *stream)``.

    Philox output depends only on the seed sequence, so identical
    ``(seed, stream, call sequence)`` gives identical draws on every platform.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=stream)))


def haar_ket(n: int, rng: np.random.Generator) -> NDArray[np.complex128]:
    """Normalized vector of i.i.d. standard complex Gaussians."""
    if n < 1:
        raise PreconditionError(f"Qubit count must be at least 1, got {n}")
    dim = 2**n
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def haar_pure(n: int, rng: np.random.Generator) -> NDArray[np.complex128]:
    """Haar-random pure state |ψ⟩⟨ψ| on ``n`` qubits."""
    return ket_to_density(haar_ket(n, rng))


def gue_hamiltonian(d: int, rng: np.random.Generator) -> NDArray[np.complex128]:
    """GUE sample H = (A + A†)/2 with standard complex Gaussian entries in A."""
    if d < 1:
        raise PreconditionError(f"Dimension must be positive, got {d}")
    a = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    return hermitize(a)


def ghz_ket(n: int) -> NDArray[np.complex128]:
    """(|0…0⟩ + |1…1⟩)/√2, the Bell state |Φ⁺⟩ for two qubits."""
    vec = np.zeros(2**n, dtype=np.complex128)
    vec[0] = vec[-1] = 1.0 / np.sqrt(2.0)
    return vec


@dataclass(frozen=True, eq=False)
class ChannelInstance:
    """Random objects of one channel draw, held fixed during a purity search.

    Attributes:
        kind: Preparation channel
        n_qubits: Register size
        kets: Pure input states (one for most channels, one per qubit for
            separable products, none for thermal states)
        hamiltonian: GUE Hamiltonian for thermal states
    """

    kind: ChannelKind
    n_qubits: int
    kets: tuple[NDArray[np.complex128], ...] = ()
    hamiltonian: NDArray[np.complex128] | None = None


def draw_instance(kind: ChannelKind, n_qubits: int, rng: np.random.Generator) -> ChannelInstance:
    """Sample the random objects a channel needs."""
    if kind is ChannelKind.WERNER:
        return ChannelInstance(kind, n_qubits, kets=(ghz_ket(n_qubits),))
    if kind is ChannelKind.THERMAL:
        return ChannelInstance(kind, n_qubits, hamiltonian=gue_hamiltonian(2**n_qubits, rng))
    if kind is ChannelKind.SEPARABLE_PRODUCT:
        kets = tuple(haar_ket(1, rng) for _ in range(n_qubits))
        return ChannelInstance(kind, n_qubits, kets=kets)
    return ChannelInstance(kind, n_qubits, kets=(haar_ket(n_qubits, rng),))


def parameter_interval(kind: ChannelKind) -> tuple[float, float]:
    """Valid parameter range: [0, 1] for p and γ, [0, 50] for β."""
    return (0.0, BETA_MAX) if kind is ChannelKind.THERMAL else (0.0, 1.0)


def amplitude_damping_kraus(gamma: float) -> list[NDArray[np.complex128]]:
    """Single-qubit amplitude damping Kraus pair."""
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=np.complex128)
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=np.complex128)
    return [k0, k1]


def phase_damping_kraus(gamma: float) -> list[NDArray[np.complex128]]:
    """Single-qubit phase damping: off-diagonals scale by 1 − γ."""
    k0 = np.sqrt(1.0 - gamma) * np.eye(2, dtype=np.complex128)
    k1 = np.sqrt(gamma) * np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)
    k2 = np.sqrt(gamma) * np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)
    return [k0, k1, k2]


def _damp_each_qubit(
    rho: NDArray[np.complex128], single: list[NDArray[np.complex128]], n_qubits: int
) -> NDArray[np.complex128]:
    for q in range(n_qubits):
        rho = apply_kraus(rho, [embed_single_qubit(k, q, n_qubits) for k in single])
    return rho


def _thermal(h: NDArray[np.complex128], beta: float) -> NDArray[np.complex128]:
    w, v = np.linalg.eigh(h)
    # Shifting by the ground energy keeps exp() bounded for large β.
    weights = np.exp(-beta * (w - w[0]))
    weights /= np.sum(weights)
    return hermitize((v * weights) @ v.conj().T)


def make_state(
    kind: ChannelKind,
    param: float,
    source: ChannelInstance | np.random.Generator,
    n_qubits: int = 2,
) -> NDArray[np.complex128]:
    """Prepare the state of ``kind`` at channel parameter ``param``.

    Args:
        kind: Preparation channel
        param: p or γ in [0, 1], or β in [0, 50]
        source: Fixed channel instance, or a generator to draw one from
        n_qubits: Register size when ``source`` is a generator

    Returns:
        Density matrix of dimension 2ⁿ

    Raises:
        PreconditionError: If ``param`` is outside the channel range or the
            instance belongs to another channel
    """
    lo, hi = parameter_interval(kind)
    if not lo <= param <= hi or not np.isfinite(param):
        raise PreconditionError(f"{kind.value} parameter {param} outside [{lo}, {hi}]")
    inst = source if isinstance(source, ChannelInstance) else draw_instance(kind, n_qubits, source)
    if inst.kind is not kind:
        raise PreconditionError(f"Channel instance is {inst.kind.value}, expected {kind.value}")

    n = inst.n_qubits
    dim = 2**n
    mixed = maximally_mixed(dim)

    match kind:
        case ChannelKind.DEPOLARIZED | ChannelKind.ISOTROPIC:
            return (1.0 - param) * ket_to_density(inst.kets[0]) + param * mixed
        case ChannelKind.WERNER:
            return param * ket_to_density(inst.kets[0]) + (1.0 - param) * mixed
        case ChannelKind.AMPLITUDE_DAMPED:
            return _damp_each_qubit(ket_to_density(inst.kets[0]), amplitude_damping_kraus(param), n)
        case ChannelKind.PHASE_DAMPED:
            return _damp_each_qubit(ket_to_density(inst.kets[0]), phase_damping_kraus(param), n)
        case ChannelKind.THERMAL:
            if inst.hamiltonian is None:
                raise PreconditionError("Thermal instance has no Hamiltonian")
            return _thermal(inst.hamiltonian, param)
        case ChannelKind.SEPARABLE_PRODUCT:
            factors = [
                (1.0 - param) * ket_to_density(ket) + param * maximally_mixed(2)
                for ket in inst.kets
            ]
            return reduce(np.kron, factors)


def depolarized_purity(p: float, d: int) -> float:
    """Purity of (1 − p)|ψ⟩⟨ψ| + pI/d."""
    return (1.0 - p) ** 2 + 2.0 * p * (1.0 - p) / d + p**2 / d


def werner_purity(p: float, d: int) -> float:
    """Purity of p|Φ⁺⟩⟨Φ⁺| + (1 − p)I/d."""
    return p**2 + 2.0 * p * (1.0 - p) / d + (1.0 - p) ** 2 / d


class _Unreachable(Exception):
    """The current channel instance cannot hit the target."""


def _search_interval(inst: ChannelInstance) -> tuple[float, float]:
    lo, hi = parameter_interval(inst.kind)
    if inst.kind is ChannelKind.AMPLITUDE_DAMPED:
        # Purity dips and then returns to 1 at γ = 1; search the falling branch.
        res = minimize_scalar(
            lambda g: purity(make_state(inst.kind, float(g), inst)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-10},
        )
        hi = float(res.x)
    return lo, hi


def _bisect(inst: ChannelInstance, target: float) -> tuple[float, NDArray[np.complex128]]:
    def offset(param: float) -> tuple[float, NDArray[np.complex128]]:
        rho = make_state(inst.kind, param, inst)
        return purity(rho) - target, rho

    lo, hi = _search_interval(inst)
    f_lo, rho_lo = offset(lo)
    if abs(f_lo) < ENDPOINT_TOL:
        return lo, rho_lo
    f_hi, rho_hi = offset(hi)
    if abs(f_hi) < ENDPOINT_TOL:
        return hi, rho_hi
    if f_lo * f_hi > 0:
        reach = sorted((f_lo + target, f_hi + target))
        raise _Unreachable(f"reachable purity is [{reach[0]:.4f}, {reach[1]:.4f}]")

    best = (lo, rho_lo, f_lo) if abs(f_lo) < abs(f_hi) else (hi, rho_hi, f_hi)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f_mid, rho_mid = offset(mid)
        if not min(f_lo, f_hi) - MONOTONE_SLACK <= f_mid <= max(f_lo, f_hi) + MONOTONE_SLACK:
            raise _Unreachable(f"purity not monotone at parameter {mid:.6g}")
        if abs(f_mid) < abs(best[2]):
            best = (mid, rho_mid, f_mid)
        if abs(f_mid) <= BISECTION_TOL:
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid

    param, rho, miss = best
    if abs(miss) > PURITY_TOLERANCE:
        raise _Unreachable(f"bisection ended {miss:.3e} away from target")
    return param, rho


def solve_purity(
    kind: ChannelKind,
    target: float,
    rng: np.random.Generator,
    n_qubits: int = 2,
    max_resamples: int = MAX_RESAMPLES,
) -> tuple[float, NDArray[np.complex128]]:
    """Find the channel parameter whose state has purity ``target``.

    The random objects of the channel are drawn once per attempt and held fixed
    while bisecting. Attempts that cannot reach the target, or whose purity is
    not monotone over the search interval, are retried with fresh objects.

    Args:
        kind: Preparation channel
        target: Desired purity in (1/d, 1]
        rng: Generator for the channel's random objects
        n_qubits: Register size
        max_resamples: Retries after the first attempt

    Returns:
        Tuple of (parameter, density matrix)

    Raises:
        PreconditionError: If ``target`` is outside (1/d, 1]
        PurityTargetError: If every attempt fails
    """
    floor = 1.0 / 2**n_qubits
    if not floor < target <= 1.0:
        raise PreconditionError(f"Purity target {target} outside ({floor}, 1]")

    reason = ""
    for attempt in range(max_resamples + 1):
        inst = draw_instance(kind, n_qubits, rng)
        try:
            return _bisect(inst, target)
        except _Unreachable as e:
            reason = str(e)
            logger.debug(f"{kind.value} attempt {attempt} missed purity {target:.4f}: {reason}")

    logger.warning(f"Giving up on {kind.value} purity {target:.4f} after {max_resamples} resamples")
    raise PurityTargetError(
        f"Cannot reach purity {target:.4f} with {kind.value} after "
        f"{max_resamples + 1} attempts ({reason})"
    )


def channel_for(record_id: int) -> ChannelKind:
    """Round-robin channel assignment."""
    return CHANNELS[record_id % len(CHANNELS)]


def generate_record(
    record_id: int,
    seed: int,
    split: int,
    purity_range: tuple[float, float],
    n_qubits: int = 2,
) -> StateRecord:
    """Generate one record from its own ``(seed, split, record_id)`` stream."""
    rng = make_rng(seed, split, record_id)
    lo, hi = purity_range
    target = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
    kind = channel_for(record_id)
    param, rho = solve_purity(kind, target, rng, n_qubits)
    rho = check_density_matrix(rho)
    achieved = purity(rho)
    return StateRecord(
        id=record_id,
        channel=kind,
        parameter=float(param),
        target_purity=target,
        purity=achieved,
        rho=rho,
        pauli=expectations(rho),
    )


def sample_dataset(
    n_states: int,
    purity_range: tuple[float, float],
    seed: int,
    split: int = 0,
    n_qubits: int = 2,
) -> list[StateRecord]:
    """Generate ``n_states`` records serially, channels assigned round-robin.

    Each record draws from its own stream, so the result matches the parallel
    generator in :mod:`geotomo.batch_processor` exactly.
    """
    if n_states < 1:
        raise PreconditionError(f"n_states must be positive, got {n_states}")
    lo, hi = purity_range
    if not 1.0 / 2**n_qubits < lo <= hi <= 1.0:
        raise PreconditionError(f"Invalid purity range [{lo}, {hi}]")
    return [generate_record(i, seed, split, purity_range, n_qubits) for i in range(n_states)]
