"""Unit tests for losses, hand-written gradients and the training loop."""

import numpy as np
import pytest

from geotomo import training
from geotomo.errors import PreconditionError, TrainingDivergedError
from geotomo.geometry import sample_index_pairs
from geotomo.model import decode, init_params
from geotomo.models import (
    BatchLoss,
    CircuitParams,
    DecoderMode,
    GradMethod,
    TrainConfig,
)
from geotomo.qcore import bures_angle, fidelity, ket_to_density, maximally_mixed
from geotomo.stategen import make_rng
from geotomo.training import (
    backprop_classical,
    batch_loss,
    circuit_grad,
    evaluate,
    fidelity_grad_pred,
    loss_and_grad,
    metric_loss,
    recon_loss,
    total_loss,
    train,
)

SMALL = {"hidden_dims": (8, 6), "latent_dim": 4}


def hermitian_direction(seed: int) -> np.ndarray:
    gen = make_rng(seed)
    a = gen.standard_normal((4, 4)) + 1j * gen.standard_normal((4, 4))
    return (a + a.conj().T) / 2


def random_theta(seed: int, mode: DecoderMode = DecoderMode.CORRECTED) -> CircuitParams:
    gen = make_rng(seed)
    angles = gen.uniform(-np.pi, np.pi, size=36)
    if mode is DecoderMode.LITERAL:
        return CircuitParams(angles=angles)
    return CircuitParams(angles=angles, noise_logits=gen.normal(0.0, 1.0, size=2))


def small_config(**overrides) -> TrainConfig:
    settings = {
        "epochs_max": 2,
        "batch_size": 7,
        "pairs_per_batch": 5,
        "patience": 5,
        "seed": 1,
        "learning_rate": 1e-2,
    }
    settings.update(overrides)
    return TrainConfig(**settings)


class TestLosses:
    """Tests for the reconstruction and metric losses."""

    def test_recon_loss_identical(self, mixed_state) -> None:
        """Test zero infidelity for perfect reconstructions."""
        assert recon_loss([mixed_state] * 3, [mixed_state] * 3) == pytest.approx(0.0, abs=1e-9)

    def test_recon_loss_mean(self, bell_state) -> None:
        """Test the mean of 1 − F over a batch."""
        zero = ket_to_density(np.array([1, 0, 0, 0]))
        one = ket_to_density(np.array([0, 1, 0, 0]))
        loss = recon_loss([zero, bell_state], [one, maximally_mixed(4)])
        assert loss == pytest.approx((1.0 + 0.75) / 2, abs=1e-9)

    def test_recon_loss_rejects_mismatch(self, mixed_state) -> None:
        """Test that batches of different size are rejected."""
        with pytest.raises(PreconditionError):
            recon_loss([mixed_state], [mixed_state, mixed_state])
        with pytest.raises(PreconditionError):
            recon_loss([], [])

    def test_total_loss(self) -> None:
        """Test L_recon + λ·L_metric and rejection of negative λ."""
        assert total_loss(0.2, 3.0, 0.1) == pytest.approx(0.5)
        with pytest.raises(PreconditionError):
            total_loss(0.2, 3.0, -0.1)

    def test_metric_loss_zero_for_isometric_latents(self, bell_state) -> None:
        """Test that latent distances equal to Bures angles give almost no loss."""
        zero = ket_to_density(np.array([1, 0, 0, 0]))
        d_b = bures_angle(zero, bell_state)
        loss, pairs = metric_loss(np.array([[0.0], [d_b]]), [zero, bell_state], 5, make_rng(0))
        assert len(pairs) == 1
        assert pairs[0].valid
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_metric_loss_ratio(self) -> None:
        """Test (d_L/d_B − 1)² for a single pair with d_L = 2·d_B."""
        zero = ket_to_density(np.array([1, 0, 0, 0]))
        one = ket_to_density(np.array([0, 1, 0, 0]))
        z = np.array([[0.0, 0.0], [np.pi, 0.0]])
        loss, _ = metric_loss(z, [zero, one], 1, make_rng(0))
        assert loss == pytest.approx(1.0, abs=1e-6)

    def test_metric_loss_excludes_identical_states(self, mixed_state) -> None:
        """Test that pairs of identical states are invalid and the loss is 0."""
        z = np.array([[0.0], [1.0], [2.0]])
        loss, pairs = metric_loss(z, [mixed_state] * 3, 10, make_rng(0))
        assert loss == 0.0
        assert len(pairs) == 3
        assert not any(p.valid for p in pairs)

    def test_metric_loss_pair_count(self, tiny_dataset) -> None:
        """Test that K is capped at C(B, 2)."""
        rhos = [r.rho for r in tiny_dataset[:4]]
        z = make_rng(1).standard_normal((4, 3))
        _, pairs = metric_loss(z, rhos, 50, make_rng(2))
        assert len(pairs) == 6
        assert len({(p.i, p.j) for p in pairs}) == 6

    def test_metric_loss_needs_two_states(self, mixed_state) -> None:
        """Test that a single latent is rejected."""
        with pytest.raises(PreconditionError):
            metric_loss(np.zeros((1, 3)), [mixed_state], 5, make_rng(0))


class TestFidelityGradient:
    """Tests for ∂F/∂ρ_pred."""

    def test_matches_directional_difference(self, mixed_state, tiny_dataset) -> None:
        """Test Re Tr(G†δ) against a central difference of F along δ."""
        rho_true = tiny_dataset[0].rho
        sigma = mixed_state
        delta = hermitian_direction(5)
        h = 1e-6
        plus = fidelity(rho_true, sigma + h * delta)
        minus = fidelity(rho_true, sigma - h * delta)
        numeric = (plus - minus) / (2 * h)
        g = fidelity_grad_pred(rho_true, sigma)
        analytic = float(np.real(np.vdot(g, delta)))
        assert analytic == pytest.approx(numeric, rel=1e-4, abs=1e-7)

    def test_is_hermitian(self, mixed_state, bell_state) -> None:
        """Test that the gradient is Hermitian."""
        g = fidelity_grad_pred(bell_state, mixed_state)
        np.testing.assert_allclose(g, g.conj().T, atol=1e-12)


class TestCircuitGradient:
    """Tests for the parameter-shift rule."""

    def test_shift_rule_matches_finite_difference(self) -> None:
        """Test agreement of the two methods to 1e-5 in corrected mode."""
        theta = random_theta(3)
        upstream = hermitian_direction(4)
        exact = circuit_grad(theta, upstream, DecoderMode.CORRECTED, GradMethod.SHIFT_RULE)
        approx = circuit_grad(theta, upstream, DecoderMode.CORRECTED, GradMethod.FINITE_DIFFERENCE)
        np.testing.assert_allclose(exact.angles, approx.angles, atol=1e-5)
        np.testing.assert_allclose(exact.noise_logits, approx.noise_logits, atol=1e-5)

    def test_literal_mode_has_vanishing_gradient(self) -> None:
        """Test that every angle gradient of the constant decoder is ≈ 0."""
        theta = random_theta(6, DecoderMode.LITERAL)
        g = circuit_grad(theta, hermitian_direction(7), DecoderMode.LITERAL)
        assert np.max(np.abs(g.angles)) <= 1e-12
        assert g.noise_logits.shape == (0,)

    def test_gradient_of_linear_functional(self) -> None:
        """Test one angle gradient against a direct shift evaluation."""
        theta = random_theta(8)
        upstream = hermitian_direction(9)
        g = circuit_grad(theta, upstream, DecoderMode.CORRECTED)

        def objective(angles: np.ndarray) -> float:
            rho = decode(CircuitParams(angles, theta.noise_logits), DecoderMode.CORRECTED)
            return float(np.real(np.vdot(upstream, rho)))

        plus, minus = theta.angles.copy(), theta.angles.copy()
        plus[17] += np.pi / 2
        minus[17] -= np.pi / 2
        assert g.angles[17] == pytest.approx((objective(plus) - objective(minus)) / 2, abs=1e-12)


class TestBackprop:
    """End-to-end gradient checks on a shrunken model."""

    @pytest.fixture
    def batch(self, tiny_dataset):
        records = tiny_dataset[:3]
        xs = np.stack([r.pauli for r in records])
        rhos = [r.rho for r in records]
        pair_index = np.array([[0, 1], [0, 2], [1, 2]])
        return xs, rhos, pair_index

    @pytest.mark.parametrize(
        ("array_index", "entry"),
        [
            (0, (0, 0)),
            (1, (2,)),
            (2, (1, 3)),
            (3, (0,)),
            (4, (2, 1)),
            (5, (3,)),
            (6, (5, 2)),
            (6, (37, 1)),
            (7, (36,)),
        ],
    )
    def test_matches_finite_difference(self, small_params, batch, array_index, entry) -> None:
        """Test analytic parameter gradients against central differences of the batch loss."""
        xs, rhos, pair_index = batch
        _, grads = loss_and_grad(small_params, xs, rhos, 0.5, pair_index)

        h = 1e-6
        arrays = small_params.arrays()

        def loss_at(offset: float) -> float:
            shifted = [a.copy() for a in arrays]
            shifted[array_index][entry] += offset
            return batch_loss(small_params.with_arrays(shifted), xs, rhos, 0.5, pair_index).total

        numeric = (loss_at(h) - loss_at(-h)) / (2 * h)
        assert grads[array_index][entry] == pytest.approx(numeric, rel=1e-3, abs=1e-7)

    def test_gradient_shapes(self, small_params, batch) -> None:
        """Test that gradients come back in checkpoint order with matching shapes."""
        xs, rhos, pair_index = batch
        loss, grads = loss_and_grad(small_params, xs, rhos, 0.06, pair_index)
        assert isinstance(loss, BatchLoss)
        assert loss.k_valid == 3
        assert [g.shape for g in grads] == [a.shape for a in small_params.arrays()]

    def test_metric_only_gradient_skips_latent_map(self, small_params, batch) -> None:
        """Test that a pure metric upstream leaves W4 and b4 untouched."""
        xs, _, _ = batch
        d_z = make_rng(2).standard_normal((3, 4))
        grads = backprop_classical(xs, small_params, d_z, np.zeros((3, 38)))
        assert np.all(grads[6] == 0)
        assert np.all(grads[7] == 0)
        np.testing.assert_allclose(grads[5], d_z.sum(axis=0))

    def test_literal_mode_gradient_vanishes_without_metric(self, batch) -> None:
        """Test that λ = 0 gives ≈ 0 gradients for the constant decoder."""
        xs, rhos, pair_index = batch
        params = init_params(make_rng(7), DecoderMode.LITERAL, **SMALL)
        _, grads = loss_and_grad(params, xs, rhos, 0.0, pair_index)
        assert max(float(np.max(np.abs(g))) for g in grads) <= 1e-10

    def test_batch_loss_components(self, small_params, batch) -> None:
        """Test that the total combines recon and metric with λ."""
        xs, rhos, pair_index = batch
        loss = batch_loss(small_params, xs, rhos, 0.25, pair_index)
        assert loss.total == pytest.approx(loss.recon + 0.25 * loss.metric)
        assert 0.0 <= loss.recon <= 1.0


class TestEvaluateAndTrain:
    """Tests for evaluation and the epoch loop."""

    def test_evaluate(self, small_params, tiny_val_dataset) -> None:
        """Test per-state fidelities and per-channel means."""
        result = evaluate(small_params, tiny_val_dataset)
        assert result.fidelities.shape == (7,)
        assert np.all((result.fidelities >= 0) & (result.fidelities <= 1))
        assert len(result.per_channel) == 7
        assert result.mean_fidelity == pytest.approx(float(np.mean(result.fidelities)))

    def test_evaluate_rejects_empty(self, small_params) -> None:
        """Test that an empty dataset is rejected."""
        with pytest.raises(PreconditionError):
            evaluate(small_params, [])

    def test_train_history(self, tiny_dataset, tiny_val_dataset) -> None:
        """Test history length, best epoch and progress reporting."""
        calls = []
        params, history = train(
            tiny_dataset,
            tiny_val_dataset,
            small_config(),
            progress_callback=lambda *args: calls.append(args),
            **SMALL,
        )
        assert [r.epoch for r in history.records] == [0, 1]
        assert 0 <= history.best_epoch <= 1
        assert [c[:2] for c in calls] == [(1, 2), (2, 2)]
        best = evaluate(params, tiny_val_dataset).mean_fidelity
        assert best == pytest.approx(history.best_val_fidelity)

    def test_train_is_deterministic(self, tiny_dataset, tiny_val_dataset) -> None:
        """Test that identical seeds give identical histories and weights."""
        runs = [train(tiny_dataset, tiny_val_dataset, small_config(), **SMALL) for _ in range(2)]
        (p1, h1), (p2, h2) = runs
        assert h1.records == h2.records
        for a, b in zip(p1.arrays(), p2.arrays(), strict=True):
            np.testing.assert_array_equal(a, b)

    def test_early_stopping(self, tiny_dataset, tiny_val_dataset) -> None:
        """Test that a zero learning rate stops after patience epochs."""
        config = small_config(epochs_max=10, patience=2, learning_rate=0.0)
        _, history = train(tiny_dataset, tiny_val_dataset, config, **SMALL)
        assert history.stopped_early
        assert history.best_epoch == 0
        assert len(history.records) == 3

    def test_train_rejects_empty_sets(self, tiny_dataset) -> None:
        """Test that an empty validation set is rejected."""
        with pytest.raises(PreconditionError):
            train(tiny_dataset, [], small_config(), **SMALL)

    def test_divergence_raises(self, tiny_dataset, tiny_val_dataset, monkeypatch) -> None:
        """Test that a non-finite loss raises TrainingDivergedError."""

        def diverged(params, *args, **kwargs):
            nan = float("nan")
            return BatchLoss(nan, nan, nan, 0), [np.zeros_like(a) for a in params.arrays()]

        monkeypatch.setattr(training, "loss_and_grad", diverged)
        with pytest.raises(TrainingDivergedError, match="epoch 0, batch 0"):
            train(tiny_dataset, tiny_val_dataset, small_config(), **SMALL)

    def test_pair_sampling_is_reproducible(self) -> None:
        """Test that the pair stream gives identical pairs for the same batch."""
        a = sample_index_pairs(7, 5, make_rng(1, training.PAIR_STREAM, 0, 0))
        b = sample_index_pairs(7, 5, make_rng(1, training.PAIR_STREAM, 0, 0))
        np.testing.assert_array_equal(a, b)
