"""Gradient training of concept extractors and multi-seed experiment suites."""

from .losses import MitigationLossConfig, Model, build_model, loss_and_grad, total_loss
from .optim import OptimizerConfig
from .runner import SuiteConfig, SuiteResult, TrainRunResult, census_for, run_suite, train

__all__ = [
    "MitigationLossConfig", "Model", "OptimizerConfig", "SuiteConfig", "SuiteResult",
    "TrainRunResult", "build_model", "census_for", "loss_and_grad", "run_suite", "total_loss", "train",
]
