"""Fuzzy-logic predictor scoring knowledge satisfaction with product real logic.

Connectives: ``a & b -> a*b``, ``a | b -> a + b - a*b``, ``!a -> 1 - a``,
``a -> b -> 1 - a + a*b`` (Reichenbach), ``a <-> b`` as the product of both
implications and ``a ^ b -> a + b - 2*a*b``. Rules are combined with the
product t-norm.

Atoms that are not propositional (arithmetic, comparisons, concepts with
more than two values) are grounded exactly as a disjunction over the concept
assignments that make them true: ``1 - prod_a (1 - prod_j p(c_j = a_j | x))``.
Label atoms are fixed to the label being scored.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from ..autodiff import Tensor, as_tensor, stack
from ..errors import UnsupportedConnective
from ..knowledge import ast
from ..knowledge.task import TaskSpec
from .data import LabeledData
from .extractor import Extractor


def t_and(a, b):
    return a * b


def t_or(a, b):
    return a + b - a * b


def t_not(a):
    return 1.0 - a


def t_implies(a, b):
    return 1.0 - a + a * b


def t_iff(a, b):
    return t_implies(a, b) * t_implies(b, a)


def t_xor(a, b):
    return a + b - 2.0 * (a * b)


CONNECTIVES: dict[str, Callable] = {
    "and": t_and, "or": t_or, "implies": t_implies, "iff": t_iff, "xor": t_xor,
}


# The built-in connectives are affine in each argument, so fixing one side to
# a constant (a label atom) leaves ``f0 + (f1 - f0) * other``.
_AFFINE = frozenset(CONNECTIVES.values())


def _fold(fn: Callable, left, right):
    if isinstance(left, float) and isinstance(right, float):
        return float(fn(left, right))
    if isinstance(left, float):
        f0, f1, other = fn(left, 0.0), fn(left, 1.0), right
    else:
        f0, f1, other = fn(0.0, right), fn(1.0, right), left
    slope = f1 - f0
    if slope == 0.0:
        return float(f0)
    if slope == 1.0 and f0 == 0.0:
        return other
    if slope == -1.0 and f0 == 1.0:
        return t_not(other)
    return other * slope + f0


class LTNGrounding:
    """Satisfaction of a task's knowledge as a function of concept marginals."""

    def __init__(self, task: TaskSpec, connectives: dict[str, Callable] | None = None):
        self.task = task
        self.connectives = dict(CONNECTIVES, **(connectives or {}))
        self.concepts = {n: i for i, n in enumerate(task.concepts.names)}
        self.label_names = task.labels.names
        if task.knowledge.is_table:
            self.rules = None
        else:
            self.rules = task.knowledge.expanded_rules()
        self._sat_cache: dict = {}
        self._mentions: dict[int, bool] = {}
        self._label_mentions: dict[int, bool] = {}
        # label-free subtrees are shared across labels within one evaluation
        self._memo: dict[int, object] | None = None

    # -- atoms -----------------------------------------------------------------
    def _satisfying(self, node: ast.Expr, env: dict[str, int]) -> tuple[tuple[int, ...], np.ndarray]:
        """Concept dimensions of ``node`` and the assignments that make it true."""
        key = (id(node), tuple(sorted(env.items())))
        hit = self._sat_cache.get(key)
        if hit is not None:
            return hit
        names = sorted(ast.variables(node) & set(self.concepts))
        dims = tuple(self.concepts[n] for n in names)
        cards = [self.task.concepts.cardinalities[d] for d in dims]
        grid = np.asarray(list(itertools.product(*(range(m) for m in cards))), dtype=np.int64)
        grid = grid.reshape(-1, len(dims))
        local = {n: grid[:, i] for i, n in enumerate(names)}
        local.update({n: np.int64(v) for n, v in env.items()})
        truth = np.broadcast_to(ast.evaluate(node, local) != 0, (grid.shape[0],))
        out = (dims, grid[truth])
        self._sat_cache[key] = out
        return out

    @staticmethod
    def _dnf(marginals: list[Tensor], dims, assignments: np.ndarray, n: int) -> Tensor:
        if len(assignments) == 0:
            return as_tensor(np.zeros(n))
        if len(assignments) == 1 and len(dims) == 1:
            # a single conjunct over one concept: the formula reduces to its marginal
            return marginals[dims[0]][:, int(assignments[0, 0])]
        term = None
        for i, d in enumerate(dims):
            col = marginals[d].take(assignments[:, i], axis=1)
            term = col if term is None else term * col
        return 1.0 - (1.0 - term).prod(axis=1)

    def _ground(self, node: ast.Expr, marginals: list[Tensor], env: dict[str, int], n: int):
        memo = self._memo
        if memo is not None and not self._mentions_label(node):
            key = id(node)
            if key not in memo:
                memo[key] = self._ground_node(node, marginals, env, n)
            return memo[key]
        return self._ground_node(node, marginals, env, n)

    def _ground_node(self, node: ast.Expr, marginals: list[Tensor], env: dict[str, int], n: int):
        if isinstance(node, ast.Not):
            return t_not(self._ground(node.operand, marginals, env, n))
        if isinstance(node, ast.BinOp) and node.op in ast.LOGICAL:
            fn = self.connectives.get(node.op)
            if fn is None:
                raise UnsupportedConnective(f"no grounding for {node.op!r}")
            left = self._ground(node.left, marginals, env, n)
            right = self._ground(node.right, marginals, env, n)
            if fn in _AFFINE and (isinstance(left, float) or isinstance(right, float)):
                return _fold(fn, left, right)
            return fn(left, right)
        if not self._mentions_concept(node):
            value = ast.evaluate(node, {k: np.int64(v) for k, v in env.items()})
            return float(np.asarray(value) != 0)
        dims, sat = self._satisfying(node, env)
        return self._dnf(marginals, dims, sat, n)

    def _mentions_label(self, node: ast.Expr) -> bool:
        key = id(node)
        hit = self._label_mentions.get(key)
        if hit is None:
            hit = self._label_mentions[key] = bool(ast.variables(node) & set(self.label_names))
        return hit

    def _mentions_concept(self, node: ast.Expr) -> bool:
        key = id(node)
        hit = self._mentions.get(key)
        if hit is None:
            hit = self._mentions[key] = bool(ast.variables(node) & set(self.concepts))
        return hit

    # -- scoring ---------------------------------------------------------------
    def satisfaction(self, marginals: list[Tensor], y: tuple[int, ...]) -> Tensor:
        """Truth degree ``[n]`` of the knowledge for every input, with label ``y``."""
        n = marginals[0].shape[0]
        if self.rules is None:
            dims = tuple(range(self.task.concepts.k))
            sat = np.asarray([g for g, ys in sorted(self.task.knowledge.table.items()) if tuple(y) in ys],
                             dtype=np.int64).reshape(-1, len(dims))
            return self._dnf(marginals, dims, sat, n)
        env = dict(zip(self.label_names, (int(v) for v in y)))
        total: Tensor | float = 1.0
        for rule in self.rules:
            total = t_and(total, self._ground(rule, marginals, env, n))
        return total if isinstance(total, Tensor) else as_tensor(np.full(n, total))

    def satisfaction_for(self, marginals: list[Tensor], data: LabeledData) -> Tensor:
        """Truth degree per example, each with its own label."""
        labels = np.unique(data.labels)
        self._memo = {}
        try:
            columns = [self.satisfaction(marginals, self.task.labels.vector_at(int(y))) for y in labels]
        finally:
            self._memo = None
        table = stack(columns, axis=1)  # [n_inputs, n_distinct_labels]
        col = np.searchsorted(labels, data.labels)
        return table[data.rows, col]


def ltn_satisfaction(extractor: Extractor, task: TaskSpec, x: int, y) -> float:
    """Truth degree of the knowledge for input row ``x`` and label vector ``y``."""
    grounding = LTNGrounding(task)
    marginals = [m[x:x + 1] for m in extractor.marginals()]
    return float(grounding.satisfaction(marginals, tuple(int(v) for v in np.atleast_1d(y))).data[0])


def ltn_predict_all(extractor: Extractor, task: TaskSpec, grounding: LTNGrounding | None = None) -> np.ndarray:
    """Label index per input: the most satisfying label for the most likely concepts."""
    grounding = grounding or LTNGrounding(task)
    chosen = extractor.argmax_vectors()
    onehots = [as_tensor(np.eye(m)[chosen[:, j]]) for j, m in enumerate(task.concepts.cardinalities)]
    scores = np.stack([grounding.satisfaction(onehots, y).data for y in task.labels], axis=1)
    return np.argmax(scores, axis=1)


def ltn_predict(extractor: Extractor, task: TaskSpec, x: int) -> tuple[int, ...]:
    return task.labels.vector_at(int(ltn_predict_all(extractor, task)[x]))
