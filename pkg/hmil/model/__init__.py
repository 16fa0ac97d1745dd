from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .models import HmilConfig
from .network import (
    ForwardOutput,
    HmilModel,
    attention_pool,
    classify,
    forward,
    gated_attention,
    init_model,
    ofr_forward,
    predict,
)

__all__ = [
    "Checkpoint",
    "ForwardOutput",
    "HmilConfig",
    "HmilModel",
    "attention_pool",
    "classify",
    "forward",
    "gated_attention",
    "init_model",
    "load_checkpoint",
    "ofr_forward",
    "predict",
    "save_checkpoint",
]
