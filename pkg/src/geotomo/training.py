"""Dual-objective training of the hybrid autoencoder.

The loss of a minibatch is the mean infidelity between true and decoded states
plus λ times the metric-preservation loss over sampled pairs. Gradients are
assembled by hand:

    ∂L/∂ρ_pred   from the matrix derivative of the fidelity
    ∂L/∂θ        by the parameter-shift rule (or central differences)
    ∂L/∂z        from the pair distances
    ∂L/∂W        by reverse-mode backpropagation through the encoder

Accumulation runs serially in sample order, so identical inputs give bitwise
identical histories.
"""

from __future__ import annotations

import copy
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import PreconditionError, TrainingDivergedError
from .geometry import sample_index_pairs
from .logging_config import get_logger, log_epoch, log_operation_complete, log_operation_start
from .model import (
    HIDDEN_DIMS,
    LATENT_DIM,
    angle_index,
    decode,
    decode_unitary,
    depolarize,
    encode_trace,
    init_params,
    latent_to_params,
    layer_unitaries,
    layer_unitary,
    noise_probabilities,
    parameter_norm,
    predict_states,
    twirl,
)
from .models import (
    N_LAYERS,
    BatchLoss,
    CircuitParams,
    DecoderMode,
    EpochRecord,
    EvaluationResult,
    GradMethod,
    ModelParams,
    PairSample,
    StateRecord,
    TrainConfig,
    TrainHistory,
)
from .optimizer import AdamOptimizer
from .qcore import (
    SPECTRAL_FLOOR,
    as_matrix,
    bures_angle,
    fidelity,
    hermitize,
    regularize,
    spectral_sqrt,
)
from .stategen import make_rng

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from .model import EncoderTrace

logger = get_logger(__name__)

PAIR_MIN_BURES = 1e-6
RATIO_EPS = 1e-8
PINV_FLOOR = 1e-12
SHIFT = np.pi / 2
FD_STEP = 1e-5

# Stream ids under the training seed.
INIT_STREAM = 1
SHUFFLE_STREAM = 2
PAIR_STREAM = 3

ProgressCallback = Callable[[int, int, str], None]


def recon_loss(
    rhos_true: Sequence[NDArray[np.complex128]], rhos_pred: Sequence[NDArray[np.complex128]]
) -> float:
    """Mean infidelity (1/B) Σ [1 − F(ρ_true, ρ_pred)]."""
    if len(rhos_true) != len(rhos_pred) or not rhos_true:
        raise PreconditionError(
            f"Need equal non-empty batches, got {len(rhos_true)} and {len(rhos_pred)}"
        )
    losses = [1.0 - fidelity(t, p) for t, p in zip(rhos_true, rhos_pred, strict=True)]
    return float(np.mean(losses))


def total_loss(recon: float, metric: float, lambda_metric: float) -> float:
    """L_recon + λ·L_metric."""
    if lambda_metric < 0:
        raise PreconditionError(f"lambda_metric must be non-negative, got {lambda_metric}")
    return recon + lambda_metric * metric


def pair_bures(
    rhos: Sequence[NDArray[np.complex128]], pair_index: NDArray[np.int64]
) -> NDArray[np.float64]:
    """Bures angles between the true states of each pair."""
    return np.array([bures_angle(rhos[i], rhos[j]) for i, j in pair_index], dtype=np.float64)


def _metric_terms(
    latents: NDArray[np.float64],
    pair_index: NDArray[np.int64],
    d_bures: NDArray[np.float64],
) -> tuple[float, list[PairSample], NDArray[np.float64]]:
    """Metric loss, pair records and ∂L_metric/∂z for fixed pairs."""
    grad = np.zeros_like(latents)
    pairs: list[PairSample] = []
    terms = []
    for (i, j), d_b in zip(pair_index, d_bures, strict=True):
        diff = latents[i] - latents[j]
        d_l = float(np.linalg.norm(diff))
        valid = bool(d_b > PAIR_MIN_BURES)
        pairs.append(
            PairSample(i=int(i), j=int(j), d_latent=d_l, d_bures=float(d_b), valid=valid)
        )
        if not valid:
            continue
        scale = d_b + RATIO_EPS
        ratio = d_l / scale
        terms.append((ratio - 1.0) ** 2)
        if d_l > 0:
            # d(ratio − 1)²/dz_i = 2(ratio − 1)/scale · (z_i − z_j)/d_L
            g = 2.0 * (ratio - 1.0) / scale * diff / d_l
            grad[i] += g
            grad[j] -= g

    if not terms:
        return 0.0, pairs, grad
    return float(np.mean(terms)), pairs, grad / len(terms)


def metric_loss(
    latents: ArrayLike,
    rhos: Sequence[NDArray[np.complex128]],
    k: int,
    rng: np.random.Generator,
) -> tuple[float, list[PairSample]]:
    """Scale-free metric loss (1/K_valid) Σ (d_L / (d_B + ε) − 1)².

    Pairs with d_B ≤ 1e-6 are excluded. When no pair is valid the loss is 0
    and every returned PairSample has ``valid=False``.

    Args:
        latents: Latent vectors, shape (B, d_z)
        rhos: True states of the batch
        k: Pairs to sample
        rng: Generator for pair sampling

    Raises:
        PreconditionError: If the batch has fewer than two states
    """
    z = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    if z.shape[0] < 2 or len(rhos) != z.shape[0]:
        raise PreconditionError(f"Need at least two matched latents/states, got {z.shape[0]}")
    pair_index = sample_index_pairs(z.shape[0], k, rng)
    loss, pairs, _ = _metric_terms(z, pair_index, pair_bures(rhos, pair_index))
    return loss, pairs


def fidelity_grad_pred(
    rho_true: ArrayLike, rho_pred: ArrayLike, floor: float = PINV_FLOOR
) -> NDArray[np.complex128]:
    """Gradient G of F(ρ_true, ρ_pred) with respect to ρ_pred.

    G = T·√ρ·M^{−1/2}·√ρ with M = √ρ·ρ_pred·√ρ and T = Tr M^{1/2}, so that
    F(ρ, σ + δ) ≈ F(ρ, σ) + Re Tr(G†δ). ρ_true is regularized by
    ``FIDELITY_EPS`` and eigenvalues of M below ``floor`` are dropped from the
    inverse square root.
    """
    sqrt_rho = spectral_sqrt(regularize(as_matrix(rho_true, "rho_true")))
    m = hermitize(sqrt_rho @ as_matrix(rho_pred, "rho_pred") @ sqrt_rho)
    mu, v = np.linalg.eigh(m)
    mu = np.where(mu > SPECTRAL_FLOOR, mu, 0.0)
    trace_root = float(np.sum(np.sqrt(mu)))
    inv_root = np.where(mu > floor, 1.0 / np.sqrt(np.where(mu > floor, mu, 1.0)), 0.0)
    m_inv_sqrt = (v * inv_root) @ v.conj().T
    return hermitize(trace_root * sqrt_rho @ m_inv_sqrt @ sqrt_rho)


def _contract(upstream: NDArray[np.complex128], d_rho: NDArray[np.complex128]) -> float:
    """Re Tr(upstream† · dρ)."""
    return float(np.real(np.vdot(upstream, d_rho)))


def circuit_grad(
    theta: CircuitParams,
    upstream: ArrayLike,
    mode: DecoderMode,
    method: GradMethod = GradMethod.SHIFT_RULE,
) -> CircuitParams:
    """Gradient of Re Tr(upstream†·ρ_pred(θ)) with respect to the circuit parameters.

    Args:
        theta: Circuit parameters at which to differentiate
        upstream: ∂L/∂ρ_pred
        mode: Decoder mode
        method: Shift rule (exact) or central finite differences

    Returns:
        CircuitParams holding the angle gradients and noise-logit gradients
    """
    up = as_matrix(upstream, "upstream")
    if method is GradMethod.FINITE_DIFFERENCE:
        return _finite_difference_grad(theta, up, mode)

    layers = layer_unitaries(theta.angles)
    prefix = [np.eye(4, dtype=np.complex128)]
    for layer in layers:
        prefix.append(layer @ prefix[-1])
    suffix = [np.eye(4, dtype=np.complex128) for _ in range(N_LAYERS)]
    for ell in range(N_LAYERS - 2, -1, -1):
        suffix[ell] = suffix[ell + 1] @ layers[ell + 1]

    probs = noise_probabilities(theta)
    grad_angles = np.zeros_like(theta.angles)
    for ell in range(N_LAYERS):
        for qubit in range(2):
            for axis in range(3):
                k = angle_index(ell, qubit, axis)
                shifted = []
                for sign in (1.0, -1.0):
                    angles = theta.angles.copy()
                    angles[k] += sign * SHIFT
                    u = suffix[ell] @ layer_unitary(angles, ell) @ prefix[ell]
                    shifted.append(decode_unitary(u, probs, mode))
                grad_angles[k] = _contract(up, (shifted[0] - shifted[1]) / 2)

    if mode is DecoderMode.LITERAL:
        return CircuitParams(angles=grad_angles)

    # The depolarizing maps are affine in p; chain through the sigmoid.
    psi = prefix[-1][:, 0]
    pure = np.outer(psi, psi.conj())
    p0, p1 = (float(p) for p in probs)
    after0 = depolarize(pure, 0, p0)
    d_p0 = depolarize(twirl(pure, 0) - pure, 1, p1)
    d_p1 = twirl(after0, 1) - after0
    grad_logits = np.array(
        [_contract(up, d_p0) * p0 * (1 - p0), _contract(up, d_p1) * p1 * (1 - p1)]
    )
    return CircuitParams(angles=grad_angles, noise_logits=grad_logits)


def _finite_difference_grad(
    theta: CircuitParams, up: NDArray[np.complex128], mode: DecoderMode
) -> CircuitParams:
    def objective(angles: NDArray[np.float64], logits: NDArray[np.float64]) -> float:
        return _contract(up, decode(CircuitParams(angles=angles, noise_logits=logits), mode))

    grad_angles = np.zeros_like(theta.angles)
    for k in range(theta.angles.size):
        step = np.zeros_like(theta.angles)
        step[k] = FD_STEP
        plus = objective(theta.angles + step, theta.noise_logits)
        minus = objective(theta.angles - step, theta.noise_logits)
        grad_angles[k] = (plus - minus) / (2 * FD_STEP)

    grad_logits = np.zeros_like(theta.noise_logits)
    for k in range(theta.noise_logits.size):
        step = np.zeros_like(theta.noise_logits)
        step[k] = FD_STEP
        plus = objective(theta.angles, theta.noise_logits + step)
        minus = objective(theta.angles, theta.noise_logits - step)
        grad_logits[k] = (plus - minus) / (2 * FD_STEP)
    return CircuitParams(angles=grad_angles, noise_logits=grad_logits)


def backprop_classical(
    x: ArrayLike,
    params: ModelParams,
    d_z: ArrayLike,
    d_theta: ArrayLike,
    trace: EncoderTrace | None = None,
) -> list[NDArray[np.float64]]:
    """Reverse-mode gradients of W1…b4 given upstream gradients at z and θ.

    Args:
        x: Batch inputs, shape (B, input_dim)
        params: Current parameters
        d_z: ∂L/∂z from the metric loss, shape (B, d_z)
        d_theta: ∂L/∂θ from the decoder, shape (B, 36 or 38)
        trace: Encoder trace of ``x`` if already computed

    Returns:
        Gradients in checkpoint order W1, b1, W2, b2, W3, b3, W4, b4
    """
    enc = params.encoder
    tr = trace if trace is not None else encode_trace(x, enc)
    g_theta = np.atleast_2d(np.asarray(d_theta, dtype=np.float64))
    g_z = np.atleast_2d(np.asarray(d_z, dtype=np.float64))

    d_w4 = g_theta.T @ tr.z
    d_b4 = g_theta.sum(axis=0)
    dz = g_z + g_theta @ params.latent_map.w4

    d_w3 = dz.T @ tr.h2
    d_b3 = dz.sum(axis=0)
    da2 = (dz @ enc.w3) * (tr.a2 > 0)

    d_w2 = da2.T @ tr.h1
    d_b2 = da2.sum(axis=0)
    da1 = (da2 @ enc.w2) * (tr.a1 > 0)

    d_w1 = da1.T @ tr.x
    d_b1 = da1.sum(axis=0)
    return [d_w1, d_b1, d_w2, d_b2, d_w3, d_b3, d_w4, d_b4]


@dataclass(eq=False)
class _BatchPass:
    trace: EncoderTrace
    thetas: list[CircuitParams]
    preds: list[NDArray[np.complex128]]
    loss: BatchLoss
    d_metric: NDArray[np.float64]


def _batch_pass(
    params: ModelParams,
    xs: ArrayLike,
    rhos: Sequence[NDArray[np.complex128]],
    lambda_metric: float,
    pair_index: NDArray[np.int64],
) -> _BatchPass:
    trace = encode_trace(xs, params.encoder)
    if trace.z.shape[0] != len(rhos):
        raise PreconditionError(f"Batch has {trace.z.shape[0]} inputs but {len(rhos)} states")

    thetas = [latent_to_params(z, params.latent_map) for z in trace.z]
    preds = [decode(theta, params.mode) for theta in thetas]
    recon = recon_loss(rhos, preds)
    metric, pairs, d_metric = _metric_terms(trace.z, pair_index, pair_bures(rhos, pair_index))
    loss = BatchLoss(
        recon=recon,
        metric=metric,
        total=total_loss(recon, metric, lambda_metric),
        k_valid=sum(p.valid for p in pairs),
    )
    return _BatchPass(trace=trace, thetas=thetas, preds=preds, loss=loss, d_metric=d_metric)


def batch_loss(
    params: ModelParams,
    xs: ArrayLike,
    rhos: Sequence[NDArray[np.complex128]],
    lambda_metric: float,
    pair_index: NDArray[np.int64],
) -> BatchLoss:
    """Loss of a minibatch with a fixed set of metric pairs."""
    return _batch_pass(params, xs, rhos, lambda_metric, pair_index).loss


def loss_and_grad(
    params: ModelParams,
    xs: ArrayLike,
    rhos: Sequence[NDArray[np.complex128]],
    lambda_metric: float,
    pair_index: NDArray[np.int64],
    grad_method: GradMethod = GradMethod.SHIFT_RULE,
) -> tuple[BatchLoss, list[NDArray[np.float64]]]:
    """Loss of a minibatch and its gradient with respect to every parameter array.

    Returns:
        Tuple of (loss, gradients in checkpoint order)
    """
    fwd = _batch_pass(params, xs, rhos, lambda_metric, pair_index)
    batch = len(rhos)
    d_theta = np.zeros((batch, params.mode.circuit_outputs))
    for b, (theta, rho_true, rho_pred) in enumerate(zip(fwd.thetas, rhos, fwd.preds, strict=True)):
        upstream = -fidelity_grad_pred(rho_true, rho_pred) / batch
        g = circuit_grad(theta, upstream, params.mode, grad_method)
        d_theta[b] = np.concatenate([g.angles, g.noise_logits])
    grads = backprop_classical(
        fwd.trace.x, params, lambda_metric * fwd.d_metric, d_theta, fwd.trace
    )
    return fwd.loss, grads


def evaluate(params: ModelParams, dataset: Sequence[StateRecord]) -> EvaluationResult:
    """Fidelity between every true state and its reconstruction."""
    if not dataset:
        raise PreconditionError("Cannot evaluate on an empty dataset")
    xs = np.stack([r.pauli for r in dataset])
    preds = predict_states(xs, params)
    fids = np.array([fidelity(r.rho, p) for r, p in zip(dataset, preds, strict=True)])

    grouped: dict[str, list[float]] = {}
    for record, f in zip(dataset, fids, strict=True):
        grouped.setdefault(record.channel.value, []).append(float(f))
    means = {k: float(np.mean(v)) for k, v in grouped.items()}
    return EvaluationResult(
        mean_fidelity=float(np.mean(fids)),
        median_fidelity=float(np.median(fids)),
        fidelities=fids,
        per_channel=means,
    )


def train(
    train_set: Sequence[StateRecord],
    val_set: Sequence[StateRecord],
    config: TrainConfig,
    progress_callback: ProgressCallback | None = None,
    hidden_dims: tuple[int, int] | None = None,
    latent_dim: int | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """Train the autoencoder with Adam and validation-fidelity early stopping.

    Args:
        train_set: Training records
        val_set: Validation records
        config: Hyperparameters
        progress_callback: Called as (epoch, epochs_max, summary) after each epoch
        hidden_dims: Encoder hidden widths (default 256, 128)
        latent_dim: Latent size (default 20)

    Returns:
        Tuple of (best parameters, history)

    Raises:
        PreconditionError: If either dataset is empty
        TrainingDivergedError: If a loss or gradient becomes non-finite
    """
    if not train_set or not val_set:
        raise PreconditionError("Training and validation sets must be non-empty")

    start_time = time.time()
    log_operation_start(
        logger,
        "training",
        n_train=len(train_set),
        n_val=len(val_set),
        mode=config.mode.value,
        lambda_metric=config.lambda_metric,
    )

    params = init_params(
        make_rng(config.seed, INIT_STREAM),
        config.mode,
        input_dim=train_set[0].pauli.size,
        hidden_dims=hidden_dims or HIDDEN_DIMS,
        latent_dim=latent_dim or LATENT_DIM,
    )
    optimizer = AdamOptimizer([a.shape for a in params.arrays()], config.learning_rate)

    xs = np.stack([r.pauli for r in train_set])
    rhos = [r.rho for r in train_set]
    n = len(train_set)

    history = TrainHistory()
    best_params = copy.deepcopy(params)
    best_fidelity = -np.inf
    since_best = 0

    for epoch in range(config.epochs_max):
        order = make_rng(config.seed, SHUFFLE_STREAM, epoch).permutation(n)
        sums = np.zeros(3)
        for b, begin in enumerate(range(0, n, config.batch_size)):
            idx = order[begin : begin + config.batch_size]
            pair_index = sample_index_pairs(
                idx.size, config.pairs_per_batch, make_rng(config.seed, PAIR_STREAM, epoch, b)
            )
            loss, grads = loss_and_grad(
                params,
                xs[idx],
                [rhos[i] for i in idx],
                config.lambda_metric,
                pair_index,
                config.grad_method,
            )
            if not np.isfinite(loss.total) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDivergedError(
                    f"Loss became {loss.total} at epoch {epoch}, batch {b} "
                    f"(records {idx[:5].tolist()}...); parameter norm {parameter_norm(params):.6g}"
                )
            params = params.with_arrays(optimizer.step(params.arrays(), grads))
            sums += idx.size * np.array([loss.recon, loss.metric, loss.total])
            logger.debug(
                f"epoch {epoch} batch {b}: recon={loss.recon:.6f} metric={loss.metric:.6f} "
                f"k_valid={loss.k_valid}"
            )

        val_fidelity = evaluate(params, val_set).mean_fidelity
        if not np.isfinite(val_fidelity):
            raise TrainingDivergedError(
                f"Validation fidelity became {val_fidelity} at epoch {epoch}; "
                f"parameter norm {parameter_norm(params):.6g}"
            )
        recon, metric, total = (float(v) for v in sums / n)
        history.records.append(
            EpochRecord(
                epoch=epoch,
                recon_loss=recon,
                metric_loss=metric,
                total_loss=total,
                val_fidelity=val_fidelity,
            )
        )

        if val_fidelity > best_fidelity:
            best_fidelity = val_fidelity
            best_params = copy.deepcopy(params)
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1

        log_epoch(logger, history.records[-1], best_fidelity, since_best, config.patience)
        if progress_callback:
            progress_callback(epoch + 1, config.epochs_max, f"val F={val_fidelity:.4f}")

        if since_best >= config.patience:
            history.stopped_early = True
            logger.info(f"Early stopping at epoch {epoch}; best epoch {history.best_epoch}")
            break

    log_operation_complete(
        logger,
        "training",
        success=True,
        duration=time.time() - start_time,
        epochs=len(history.records),
        best_epoch=history.best_epoch,
        best_val_fidelity=best_fidelity,
    )
    return best_params, history
