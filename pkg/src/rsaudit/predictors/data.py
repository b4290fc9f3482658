"""Labelled examples derived from a task's support."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..knowledge.compiler import compile_knowledge
from ..knowledge.task import TaskSpec


@dataclass(frozen=True)
class LabeledData:
    """Weighted (input row, label index) pairs; weights sum to one.

    A supported ``g`` with several admissible labels contributes one example
    per label, with its probability split uniformly between them.
    """

    rows: np.ndarray
    labels: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.rows)


def support_inputs(task: TaskSpec) -> tuple[np.ndarray, np.ndarray]:
    """Supported vectors in lexicographic order and their probabilities."""
    order = sorted(range(len(task.support)), key=lambda i: task.support.vectors[i])
    vectors = np.asarray([task.support.vectors[i] for i in order], dtype=np.int64)
    probs = task.support.probabilities()[order]
    return vectors, probs


def make_dataset(task: TaskSpec, inputs: np.ndarray | None = None,
                 input_weights: np.ndarray | None = None) -> LabeledData:
    if inputs is None:
        inputs, input_weights = support_inputs(task)
    if input_weights is None:
        input_weights = np.full(len(inputs), 1.0 / len(inputs))
    ck = compile_knowledge(task)
    rows, labels, weights = [], [], []
    for i, g in enumerate(inputs):
        ys = sorted(ck.label_set(tuple(int(v) for v in g)))
        for y in ys:
            rows.append(i)
            labels.append(task.labels.index_of(y))
            weights.append(input_weights[i] / len(ys))
    return LabeledData(np.asarray(rows, dtype=np.int64), np.asarray(labels, dtype=np.int64),
                       np.asarray(weights, dtype=np.float64))


def from_pairs(task: TaskSpec, inputs: np.ndarray, pairs) -> LabeledData:
    """Dataset from explicit ``(g, y)`` pairs with equal weights."""
    where = {tuple(int(v) for v in g): i for i, g in enumerate(inputs)}
    rows, labels = [], []
    for g, y in pairs:
        rows.append(where[tuple(int(v) for v in np.atleast_1d(g))])
        labels.append(task.labels.index_of(tuple(int(v) for v in np.atleast_1d(y))))
    n = len(rows)
    return LabeledData(np.asarray(rows, dtype=np.int64), np.asarray(labels, dtype=np.int64),
                       np.full(n, 1.0 / n))
