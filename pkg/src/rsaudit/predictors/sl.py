"""Semantic-loss predictor: a label head on concept logits plus a knowledge penalty.

The penalty is ``-log sum_c 1[(c, y) satisfies K] p(c | x)``; it is zero
exactly when all of the extractor's mass sits on concept vectors that admit
the observed label.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, log_weighted_sum_exp, parameter
from ..errors import InfiniteLoss
from ..knowledge.compiler import compile_knowledge
from ..knowledge.task import TaskSpec
from .data import LabeledData
from .extractor import Extractor

DEFAULT_SL_WEIGHT = 2.0


def semantic_loss_terms(extractor: Extractor, admits: np.ndarray, data: LabeledData) -> Tensor:
    """Per-example semantic loss as a differentiable tensor."""
    log_joint = extractor.log_joint().take(data.rows, axis=0)
    return -log_weighted_sum_exp(log_joint, admits[:, data.labels].T.astype(np.float64))


def semantic_loss(extractor: Extractor, task: TaskSpec, x: int, y) -> float:
    """Semantic loss of one input row ``x`` and label vector (or index) ``y``."""
    admits = compile_knowledge(task, validate=False).admits_matrix()
    y_idx = y if isinstance(y, (int, np.integer)) else task.labels.index_of(tuple(np.atleast_1d(y)))
    mass = float(extractor.probs()[x] @ admits[:, y_idx])
    if mass <= 0.0:
        raise InfiniteLoss(f"no concept vector admitting label {y} has mass for input {x}")
    return float(max(0.0, -np.log(mass)))


class LabelHead:
    """Affine map from concept logits to label logits, followed by a softmax."""

    def __init__(self, n_features: int, n_labels: int, rng: np.random.Generator, sigma: float = 0.5):
        self.weight = parameter(rng.normal(0.0, sigma, size=(n_features, n_labels)))
        self.bias = parameter(np.zeros(n_labels))

    @property
    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def logits(self, features: Tensor) -> Tensor:
        return features @ self.weight + self.bias

    def log_probs(self, features: Tensor) -> Tensor:
        return self.logits(features).log_softmax(axis=1)

    def predict(self, features: Tensor) -> np.ndarray:
        return np.argmax(self.logits(features).data, axis=1)


def head_cross_entropy(head: LabelHead, features: Tensor, data: LabeledData) -> Tensor:
    """Weighted cross-entropy of the head's label distribution."""
    logp = head.log_probs(features)
    picked = logp.take(data.rows, axis=0)[np.arange(len(data)), data.labels]
    return -(picked * data.weights).sum()
