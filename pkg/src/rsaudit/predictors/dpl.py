"""Probabilistic-logic predictor: labels follow a uniform knowledge-consistent layer.

``p(y | x) = sum_c u(y | c) p(c | x)`` with ``u(y | c)`` uniform over the
labels that ``c`` admits.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, log_weighted_sum_exp
from ..errors import InfiniteLoss, InvalidConceptMass
from ..knowledge.compiler import compile_knowledge
from ..knowledge.task import TaskSpec
from .data import LabeledData, from_pairs
from .extractor import Extractor

INVALID_MASS_TOLERANCE = 1e-12


class UniformReasoningLayer:
    """``u(y | c)`` for every concept vector ``c`` and label ``y`` (lexicographic order)."""

    def __init__(self, task: TaskSpec):
        self.task = task
        self.admits = compile_knowledge(task, validate=False).admits_matrix()
        self.normalizer = self.admits.sum(axis=1)
        self.invalid = self.normalizer == 0
        with np.errstate(invalid="ignore", divide="ignore"):
            self.table = np.where(self.admits, 1.0 / np.maximum(self.normalizer, 1)[:, None], 0.0)

    @property
    def n_labels(self) -> int:
        return self.admits.shape[1]

    def check_mass(self, probs: np.ndarray) -> None:
        bad = probs[:, self.invalid].sum(axis=1) if self.invalid.any() else np.zeros(len(probs))
        if np.any(bad > INVALID_MASS_TOLERANCE):
            i = int(np.argmax(bad))
            raise InvalidConceptMass(
                f"input {i} puts mass {bad[i]:.3g} on concept vectors that admit no label")


def dpl_label_distribution(extractor: Extractor, layer: UniformReasoningLayer,
                           x: int | None = None) -> np.ndarray:
    """``p(y | x)`` for one input row, or ``[n, |Y|]`` for all inputs when ``x`` is None."""
    probs = extractor.probs()
    layer.check_mass(probs)
    out = probs @ layer.table
    return out if x is None else out[x]


def dpl_log_likelihood(extractor: Extractor, layer: UniformReasoningLayer,
                       data: LabeledData) -> Tensor:
    """Differentiable ``log p(y | x)`` per example."""
    log_joint = extractor.log_joint().take(data.rows, axis=0)
    return log_weighted_sum_exp(log_joint, layer.table[:, data.labels].T)


def _as_data(task: TaskSpec, extractor: Extractor, dataset) -> LabeledData:
    if isinstance(dataset, LabeledData):
        return dataset
    return from_pairs(task, extractor.inputs, dataset)


def dpl_nll(extractor: Extractor, layer: UniformReasoningLayer, dataset) -> float:
    """Mean negative log-likelihood (weighted by the dataset's example weights)."""
    data = _as_data(layer.task, extractor, dataset)
    layer.check_mass(extractor.probs())
    ll = dpl_log_likelihood(extractor, layer, data).data
    if np.any(np.isneginf(ll)):
        i = int(np.flatnonzero(np.isneginf(ll))[0])
        raise InfiniteLoss(f"example {i} has label probability zero")
    return float(max(0.0, -(data.weights * ll).sum()))


def dpl_predict(extractor: Extractor, layer: UniformReasoningLayer) -> np.ndarray:
    """Most likely label index per input (lexicographic ties)."""
    return np.argmax(extractor.probs() @ layer.table, axis=1)
