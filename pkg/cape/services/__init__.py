"""Services: configuration, checkpoints, training, evaluation and experiment runners."""

from cape.services.ablation import ABLATION_TABLES, AblationService, AblationTable, ablation_rows
from cape.services.attention_dump import AttentionDump, AttentionDumpService, AttentionManifest
from cape.services.checkpoint import Checkpoint, CheckpointService
from cape.services.config import ConfigService
from cape.services.dataset import SceneDataset, write_dataset
from cape.services.evaluation import EvaluationService, perturb_sample, predict
from cape.services.optim import AdamOptimizer, clip_grad_norm, cosine_lr
from cape.services.robustness import RobustnessReport, RobustnessService
from cape.services.training import TrainingService, TrainResult, sample_loss

__all__ = [
    "ABLATION_TABLES",
    "AblationService",
    "AblationTable",
    "AdamOptimizer",
    "AttentionDump",
    "AttentionDumpService",
    "AttentionManifest",
    "Checkpoint",
    "CheckpointService",
    "ConfigService",
    "EvaluationService",
    "RobustnessReport",
    "RobustnessService",
    "SceneDataset",
    "TrainResult",
    "TrainingService",
    "ablation_rows",
    "clip_grad_norm",
    "cosine_lr",
    "perturb_sample",
    "predict",
    "sample_loss",
    "write_dataset",
]
