"""Minimal float64 tensor autodiff, the line recognizer, and training."""

from .autodiff import Tensor
from .model import CrnnConfig, MiniCrnn, frame_count
from .optim import make_optimizer, optimizer_step
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .train import Sample, TrainData, TrainSchedule, SchedulePolicy, train, evaluate_greedy

__all__ = [
    "Tensor", "CrnnConfig", "MiniCrnn", "frame_count",
    "make_optimizer", "optimizer_step",
    "Checkpoint", "load_checkpoint", "save_checkpoint",
    "Sample", "TrainData", "TrainSchedule", "SchedulePolicy", "train",
    "evaluate_greedy",
]
