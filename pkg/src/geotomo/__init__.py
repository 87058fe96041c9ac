"""geotomo: geometric latent-space tomography.

Trains a hybrid classical-quantum autoencoder on two-qubit Pauli measurements
with a metric-preservation loss, and measures how well Euclidean latent
distances track Bures distances between the encoded states.
"""

__version__ = "0.1.0"

from geotomo.config import create_config, get_seed_from_env
from geotomo.errors import (
    DatasetFormatError,
    DegenerateInputError,
    GeotomoError,
    NumericalError,
    PreconditionError,
    PurityTargetError,
    TrainingDivergedError,
)
from geotomo.logging_config import (
    get_logger,
    log_epoch,
    log_operation_complete,
    log_operation_error,
    log_operation_start,
    set_log_level,
    setup_logging,
)
from geotomo.models import (
    ChannelKind,
    CorrelationReport,
    CurvatureReport,
    DecoderMode,
    DimReport,
    GradMethod,
    ModelParams,
    RunConfig,
    StateRecord,
    TrainConfig,
    TrainHistory,
)

__all__ = [
    "ChannelKind",
    "CorrelationReport",
    "CurvatureReport",
    "DatasetFormatError",
    "DecoderMode",
    "DegenerateInputError",
    "DimReport",
    "GeotomoError",
    "GradMethod",
    "ModelParams",
    "NumericalError",
    "PreconditionError",
    "PurityTargetError",
    "RunConfig",
    "StateRecord",
    "TrainConfig",
    "TrainHistory",
    "TrainingDivergedError",
    "create_config",
    "get_logger",
    "get_seed_from_env",
    "log_epoch",
    "log_operation_complete",
    "log_operation_error",
    "log_operation_start",
    "set_log_level",
    "setup_logging",
]
