"""Surrogate-gradient trainer producing "fdsnn-model/1" files."""

from .model import SpikingCsnn, surrogate_grad
from .train import MODEL_FORMAT, TrainConfig, TrainReport, evaluate, export, load_split, train

__version__ = "1.0.0"

__all__ = [
    "MODEL_FORMAT",
    "SpikingCsnn",
    "TrainConfig",
    "TrainReport",
    "evaluate",
    "export",
    "load_split",
    "surrogate_grad",
    "train",
]
