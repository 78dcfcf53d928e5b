"""Training loop, metrics, multi-seed aggregation and checkpoints."""
from .checkpoint import CheckpointError, ModelCheckpoint, load_checkpoint, save_checkpoint
from .loop import (
    AggregateReport,
    EpochRecord,
    RunReport,
    TrainConfig,
    aggregate,
    evaluate_loss,
    expand_group_lrs,
    multi_seed,
    predict_prepared,
    train,
)
from .metrics import mae, rmse
from .persist import from_checkpoint, pca_from_checkpoint, to_checkpoint
