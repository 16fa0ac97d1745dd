from .models import EpochRecord, TrainConfig, TrainHistory
from .optimizer import AdamState, adam_step, init_adam_state
from .trainer import fit, hmil_components, train

__all__ = [
    "AdamState",
    "EpochRecord",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "fit",
    "hmil_components",
    "init_adam_state",
    "train",
]
