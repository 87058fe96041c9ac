"""Core data models for geometric latent-space tomography."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import NDArray

# Circuit geometry shared by the decoder, the checkpoint format and the tests.
N_LAYERS = 6
N_ANGLES = 36
N_NOISE_LOGITS = 2

# Pearson r bands of the correlation report.
STRONG_THRESHOLD = 0.80
MODERATE_THRESHOLD = 0.60


class ChannelKind(Enum):
    """State preparation channels of the training ensemble."""

    DEPOLARIZED = "depolarized"
    WERNER = "werner"
    ISOTROPIC = "isotropic"
    AMPLITUDE_DAMPED = "amplitude_damped"
    PHASE_DAMPED = "phase_damped"
    THERMAL = "thermal"
    SEPARABLE_PRODUCT = "separable_product"


class DecoderMode(Enum):
    """Circuit decoder variant.

    LITERAL conjugates the maximally mixed state and is therefore constant.
    CORRECTED prepares U(θ)|00⟩ and applies trainable per-qubit depolarization.
    """

    LITERAL = "literal"
    CORRECTED = "corrected"

    @property
    def circuit_outputs(self) -> int:
        """Number of outputs of the latent-to-circuit map for this mode."""
        if self is DecoderMode.CORRECTED:
            return N_ANGLES + N_NOISE_LOGITS
        return N_ANGLES


class GradMethod(Enum):
    """Circuit derivative method."""

    SHIFT_RULE = "shift-rule"
    FINITE_DIFFERENCE = "finite-difference"


class CorrelationStrength(Enum):
    """Interpretation bands of the latent-Bures Pearson correlation."""

    STRONG = "strong"
    MODERATE = "moderate"
    WEAK = "weak"

    @classmethod
    def from_pearson(cls, r: float) -> CorrelationStrength:
        """Strong above 0.80, moderate above 0.60, weak otherwise (and for NaN)."""
        if r > STRONG_THRESHOLD:
            return cls.STRONG
        if r > MODERATE_THRESHOLD:
            return cls.MODERATE
        return cls.WEAK


class CommandStatus(Enum):
    """Status of a CLI command."""

    SUCCESS = "success"
    FAILED = "failed"


@dataclass
class ValidationResult:
    """Result of a validation operation.

    Attributes:
        valid: Whether the validation passed
        error_message: Error message if validation failed
    """

    valid: bool
    error_message: str | None = None


@dataclass(eq=False)
class Spectrum:
    """Eigendecomposition of a Hermitian matrix.

    Attributes:
        eigenvalues: Real eigenvalues in ascending order
        eigenvectors: Unitary matrix whose columns are the eigenvectors
    """

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.complex128]


@dataclass(eq=False)
class StateRecord:
    """One generated state of the ensemble.

    Attributes:
        id: Index of the record inside its split
        channel: Preparation channel
        parameter: Channel parameter found by the purity search (p, γ or β)
        target_purity: Purity the search aimed for
        purity: Achieved purity Tr(ρ²)
        rho: Density matrix
        pauli: Non-identity Pauli expectations in canonical order
    """

    id: int
    channel: ChannelKind
    parameter: float
    target_purity: float
    purity: float
    rho: NDArray[np.complex128]
    pauli: NDArray[np.float64]


@dataclass(eq=False)
class EncoderParams:
    """Weights of the MLP encoder x → h1 → h2 → z."""

    w1: NDArray[np.float64]
    b1: NDArray[np.float64]
    w2: NDArray[np.float64]
    b2: NDArray[np.float64]
    w3: NDArray[np.float64]
    b3: NDArray[np.float64]

    def __post_init__(self) -> None:
        """Check that consecutive layer shapes chain together."""
        if self.w1.ndim != 2 or self.w2.ndim != 2 or self.w3.ndim != 2:
            raise ValueError("Encoder weights must be 2-D arrays")
        if self.b1.shape != (self.w1.shape[0],):
            raise ValueError(f"b1 shape {self.b1.shape} does not match W1 {self.w1.shape}")
        if self.w2.shape[1] != self.w1.shape[0] or self.b2.shape != (self.w2.shape[0],):
            raise ValueError(f"W2/b2 shapes {self.w2.shape}/{self.b2.shape} do not chain")
        if self.w3.shape[1] != self.w2.shape[0] or self.b3.shape != (self.w3.shape[0],):
            raise ValueError(f"W3/b3 shapes {self.w3.shape}/{self.b3.shape} do not chain")

    @property
    def input_dim(self) -> int:
        return int(self.w1.shape[1])

    @property
    def latent_dim(self) -> int:
        return int(self.w3.shape[0])


@dataclass(eq=False)
class LatentMapParams:
    """Affine latent-to-circuit map θ = W4 z + b4."""

    w4: NDArray[np.float64]
    b4: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.w4.ndim != 2 or self.b4.shape != (self.w4.shape[0],):
            raise ValueError(f"W4/b4 shapes {self.w4.shape}/{self.b4.shape} do not match")


@dataclass(eq=False)
class CircuitParams:
    """Decoder circuit parameters.

    Attributes:
        angles: 36 rotation angles in radians
        noise_logits: Two depolarization logits (corrected mode), empty otherwise
    """

    angles: NDArray[np.float64]
    noise_logits: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        if self.angles.shape != (N_ANGLES,):
            raise ValueError(f"Expected {N_ANGLES} angles, got shape {self.angles.shape}")
        if self.noise_logits.shape not in {(0,), (N_NOISE_LOGITS,)}:
            raise ValueError(f"Unexpected noise logit shape {self.noise_logits.shape}")


@dataclass
class BatchLoss:
    """Loss components of one minibatch.

    Attributes:
        recon: Mean infidelity
        metric: Metric-preservation loss over valid pairs (0 when none)
        total: recon + λ·metric
        k_valid: Pairs that passed the Bures distance threshold
    """

    recon: float
    metric: float
    total: float
    k_valid: int


@dataclass(eq=False)
class ForwardPass:
    """Intermediate values of one autoencoder pass x → z → θ → ρ → x̂."""

    z: NDArray[np.float64]
    theta: CircuitParams
    rho_pred: NDArray[np.complex128]
    x_hat: NDArray[np.float64]


@dataclass(eq=False)
class ModelParams:
    """Complete autoencoder parameters."""

    encoder: EncoderParams
    latent_map: LatentMapParams
    mode: DecoderMode = DecoderMode.CORRECTED

    def __post_init__(self) -> None:
        expected = self.mode.circuit_outputs
        if self.latent_map.w4.shape != (expected, self.encoder.latent_dim):
            raise ValueError(
                f"Latent map shape {self.latent_map.w4.shape} does not match "
                f"({expected}, {self.encoder.latent_dim}) for {self.mode.value} mode"
            )

    def arrays(self) -> list[NDArray[np.float64]]:
        """Parameter arrays in checkpoint order W1,b1,W2,b2,W3,b3,W4,b4."""
        e = self.encoder
        return [e.w1, e.b1, e.w2, e.b2, e.w3, e.b3, self.latent_map.w4, self.latent_map.b4]

    def with_arrays(self, arrays: list[NDArray[np.float64]]) -> ModelParams:
        """Return a new ModelParams holding ``arrays`` in checkpoint order."""
        if len(arrays) != 8:
            raise ValueError(f"Expected 8 parameter arrays, got {len(arrays)}")
        w1, b1, w2, b2, w3, b3, w4, b4 = arrays
        return ModelParams(
            encoder=EncoderParams(w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3),
            latent_map=LatentMapParams(w4=w4, b4=b4),
            mode=self.mode,
        )


@dataclass
class TrainConfig:
    """Training hyperparameters.

    Attributes:
        epochs_max: Upper bound on epochs
        batch_size: Minibatch size
        learning_rate: Adam step size
        lambda_metric: Weight of the metric-preservation loss
        pairs_per_batch: Pairs K sampled per batch for the metric loss
        patience: Epochs without validation improvement before stopping
        seed: Seed for initialization, shuffling and pair sampling
        mode: Decoder mode
        grad_method: Circuit derivative method
    """

    epochs_max: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-3
    lambda_metric: float = 0.06
    pairs_per_batch: int = 50
    patience: int = 60
    seed: int = 0
    mode: DecoderMode = DecoderMode.CORRECTED
    grad_method: GradMethod = GradMethod.SHIFT_RULE

    def __post_init__(self) -> None:
        """Validate hyperparameters after initialization."""
        if self.lambda_metric < 0:
            raise ValueError(f"lambda_metric must be non-negative, got {self.lambda_metric}")
        if self.pairs_per_batch < 1:
            raise ValueError(f"pairs_per_batch must be at least 1, got {self.pairs_per_batch}")
        if self.patience < 1:
            raise ValueError(f"patience must be at least 1, got {self.patience}")
        if self.epochs_max < 1:
            raise ValueError(f"epochs_max must be at least 1, got {self.epochs_max}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")


@dataclass
class EpochRecord:
    """Losses and validation fidelity of one completed epoch."""

    epoch: int
    recon_loss: float
    metric_loss: float
    total_loss: float
    val_fidelity: float


@dataclass
class TrainHistory:
    """Per-epoch training history.

    Attributes:
        records: One record per completed epoch
        best_epoch: Index of the epoch with the highest validation fidelity
        stopped_early: Whether the patience criterion ended the run
    """

    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def best_val_fidelity(self) -> float:
        if self.best_epoch < 0:
            return float("nan")
        return self.records[self.best_epoch].val_fidelity


@dataclass
class PairSample:
    """A latent/Bures distance pair used by the metric loss.

    Attributes:
        i: First index inside the batch
        j: Second index inside the batch
        d_latent: Euclidean latent distance
        d_bures: Bures angle between the true states
        valid: Whether d_bures exceeds the exclusion threshold
    """

    i: int
    j: int
    d_latent: float
    d_bures: float
    valid: bool

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ValueError("A pair needs two distinct indices")


@dataclass(eq=False)
class EvaluationResult:
    """Reconstruction fidelity over a dataset."""

    mean_fidelity: float
    median_fidelity: float
    fidelities: NDArray[np.float64]
    per_channel: dict[str, float] = field(default_factory=dict)


@dataclass(eq=False)
class DimReport:
    """Intrinsic dimension estimates of a latent cloud.

    Attributes:
        mle_mean: Mean of the per-point MLE estimates
        mle_std: Standard deviation of the per-point MLE estimates
        k_mle: Neighbors used by the MLE estimator
        mle_skipped: Points skipped because of zero neighbor distances
        pca_spectrum: Covariance eigenvalues, descending
        explained_ratio: Per-component share of the total variance
        d_pca_95: Components needed for 95% of the variance
        d_pca_99: Components needed for 99% of the variance
        mle_estimates: Per-point estimates (NaN for skipped points)
    """

    mle_mean: float
    mle_std: float
    k_mle: int
    mle_skipped: int
    pca_spectrum: NDArray[np.float64]
    explained_ratio: NDArray[np.float64]
    d_pca_95: int
    d_pca_99: int
    mle_estimates: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))

    @property
    def top5_share(self) -> float:
        return float(np.sum(self.explained_ratio[:5]))

    @property
    def top2_share(self) -> float:
        return float(np.sum(self.explained_ratio[:2]))


@dataclass(eq=False)
class CurvatureReport:
    """Local SVD flatness ratios κ of a latent cloud."""

    kappas: NDArray[np.float64]
    k_curv: int
    mean: float
    std: float
    median: float
    minimum: float
    maximum: float
    q1: float
    q3: float
    flagged: int = 0

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @property
    def coefficient_of_variation(self) -> float:
        if self.mean == 0:
            return float("nan")
        return self.std / self.mean


@dataclass(eq=False)
class CorrelationReport:
    """Latent-distance versus Bures-distance statistics.

    A non-empty ``error`` means the statistics are undefined (zero variance)
    and the numeric fields hold NaN.
    """

    n_pairs: int
    pearson_r: float
    pearson_p: float
    spearman_rho: float
    spearman_p: float
    r_squared: float
    slope: float
    intercept: float
    rmse: float
    mae: float
    d_latent: NDArray[np.float64]
    d_bures: NDArray[np.float64]
    fidelities: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    pairs: list[tuple[int, int]] = field(default_factory=list)
    error: str | None = None

    @property
    def strength(self) -> CorrelationStrength:
        return CorrelationStrength.from_pearson(self.pearson_r)


@dataclass
class DistanceBin:
    """One row of the distance-to-fidelity interpretability table."""

    lower: float
    upper: float
    label: str
    count: int
    mean_bures: float
    mean_fidelity: float


@dataclass(eq=False)
class GeometryReport:
    """All geometric diagnostics of a trained latent space."""

    correlation: CorrelationReport
    dimensions: DimReport
    curvature: CurvatureReport
    distance_table: list[DistanceBin]
    projection: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 2)))


@dataclass
class RunConfig:
    """Configuration shared by the CLI commands.

    Every field has a default suitable for a two-qubit run.
    """

    n_qubits: int = 2
    n_train: int = 2000
    n_val: int = 500
    purity_min: float = 0.85
    purity_max: float = 0.95
    seed: int = 0
    output_dir: Path = field(default_factory=lambda: Path("runs"))
    epochs_max: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-3
    lambda_metric: float = 0.06
    pairs_per_batch: int = 50
    patience: int = 60
    decoder: DecoderMode = DecoderMode.CORRECTED
    grad_method: GradMethod = GradMethod.SHIFT_RULE
    k_mle: int = 15
    k_curv: int = 25
    n_pairs: int = 500
    parallel_workers: int | None = None
    verbose: bool = False

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be at least 1, got {self.n_qubits}")
        if self.n_train < 1 or self.n_val < 1:
            raise ValueError(f"Dataset sizes must be positive, got {self.n_train}/{self.n_val}")
        floor = 1.0 / 2**self.n_qubits
        if not floor < self.purity_min <= self.purity_max <= 1.0:
            raise ValueError(
                f"Purity range must satisfy {floor} < min <= max <= 1, "
                f"got [{self.purity_min}, {self.purity_max}]"
            )
        if self.parallel_workers is not None and self.parallel_workers < 1:
            raise ValueError(f"parallel_workers must be at least 1, got {self.parallel_workers}")
        if self.k_mle < 2 or self.k_curv < 2:
            raise ValueError(f"Neighbor counts must be at least 2, got {self.k_mle}/{self.k_curv}")
        if self.n_pairs < 2:
            raise ValueError(f"n_pairs must be at least 2, got {self.n_pairs}")
        # Surfaces range errors of the training fields early.
        self.train_config()

    @property
    def purity_range(self) -> tuple[float, float]:
        return (self.purity_min, self.purity_max)

    def train_config(self) -> TrainConfig:
        """Project the training fields onto a TrainConfig."""
        return TrainConfig(
            epochs_max=self.epochs_max,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lambda_metric=self.lambda_metric,
            pairs_per_batch=self.pairs_per_batch,
            patience=self.patience,
            seed=self.seed,
            mode=self.decoder,
            grad_method=self.grad_method,
        )


@dataclass
class CommandResult:
    """Outcome of a CLI command.

    Attributes:
        command: Command name
        status: SUCCESS or FAILED
        exit_code: Process exit code (0 success, 1 usage/input, 2 numerical)
        message: User-facing message for failures
        outputs: Files written by the command
        elapsed: Wall-clock seconds
    """

    command: str
    status: CommandStatus
    exit_code: int = 0
    message: str | None = None
    outputs: list[Path] = field(default_factory=list)
    elapsed: float = 0.0


@dataclass
class DatasetInfo:
    """Header of a dataset file.

    Attributes:
        n_qubits: Register size of every state
        seed: Generation seed
        split: Stream id of the split (0 train, 1 validation)
        purity_range: Range the purity targets were drawn from
        pauli_order: Canonical non-identity Pauli words of the measurement vectors
        format_version: File format version
    """

    n_qubits: int
    seed: int
    split: int
    purity_range: tuple[float, float]
    pauli_order: list[str]
    format_version: int = 1


@dataclass
class CheckpointInfo:
    """Header of a checkpoint file."""

    mode: DecoderMode
    shapes: list[tuple[int, ...]]
    train_config: dict[str, object]
    best_epoch: int
    best_val_fidelity: float
    pauli_order: list[str]
    format_version: int = 1


@dataclass
class GenerateSummary:
    """Outcome of dataset generation.

    Attributes:
        train_path: Training dataset file
        val_path: Validation dataset file
        channel_counts: Records per channel over both splits
        purity_histogram: (lower, upper, count) purity bins over both splits
        elapsed: Wall-clock seconds
    """

    train_path: Path
    val_path: Path
    channel_counts: dict[str, int]
    purity_histogram: list[tuple[float, float, int]]
    elapsed: float = 0.0


@dataclass(eq=False)
class TrainSummary:
    """Outcome of a training run."""

    checkpoint_path: Path
    history_path: Path
    history: TrainHistory
    evaluation: EvaluationResult
    parameter_counts: dict[str, int]
    elapsed: float = 0.0


@dataclass(eq=False)
class AnalyzeSummary:
    """Outcome of latent-space analysis."""

    report: GeometryReport
    evaluation: EvaluationResult
    outputs: list[Path]
    elapsed: float = 0.0


@dataclass
class SweepRow:
    """One λ value of a metric-weight sweep."""

    lambda_metric: float
    val_fidelity: float
    pearson_r: float
    r_squared: float


@dataclass
class SweepSummary:
    """Outcome of a metric-weight sweep."""

    rows: list[SweepRow]
    summary_path: Path
    elapsed: float = 0.0
