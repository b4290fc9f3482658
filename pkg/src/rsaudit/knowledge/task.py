"""Symbolic description of a prediction task: spaces, knowledge, support."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from ..errors import MalformedFormula, SearchSpaceTooLarge, SpecError
from . import ast

DEFAULT_ENUMERATION_CEILING = 2**22


def _mixed_radix(cards: Sequence[int]) -> np.ndarray:
    strides = np.ones(len(cards), dtype=np.int64)
    for i in range(len(cards) - 2, -1, -1):
        strides[i] = strides[i + 1] * cards[i + 1]
    return strides


@dataclass(frozen=True)
class _Space:
    names: tuple[str, ...]
    cardinalities: tuple[int, ...]

    def __post_init__(self):
        # subclasses validate; declared here so the generated __init__ calls it
        pass

    @property
    def k(self) -> int:
        return len(self.cardinalities)

    @property
    def size(self) -> int:
        return math.prod(self.cardinalities)

    def index_of(self, vectors) -> np.ndarray | int:
        """Lexicographic index (last coordinate fastest)."""
        arr = np.asarray(vectors, dtype=np.int64)
        idx = arr @ _mixed_radix(self.cardinalities)
        return int(idx) if arr.ndim == 1 else idx

    def vector_at(self, index: int) -> tuple[int, ...]:
        out = []
        for m in reversed(self.cardinalities):
            index, r = divmod(int(index), m)
            out.append(r)
        return tuple(reversed(out))

    def enumerate(self, ceiling: int = DEFAULT_ENUMERATION_CEILING) -> np.ndarray:
        if self.size > ceiling:
            raise SearchSpaceTooLarge(self.size, ceiling, "vector space")
        if self.k == 0:
            return np.zeros((1, 0), dtype=np.int64)
        grids = np.meshgrid(*[np.arange(m) for m in self.cardinalities], indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1).astype(np.int64)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(m) for m in self.cardinalities))

    def contains(self, vector: Sequence[int]) -> bool:
        return len(vector) == self.k and all(0 <= v < m for v, m in zip(vector, self.cardinalities))

    def position(self, name: str) -> int:
        return self.names.index(name)

    def sub(self, indices: Sequence[int]):
        return type(self)(tuple(self.names[i] for i in indices),
                          tuple(self.cardinalities[i] for i in indices))


class ConceptSpace(_Space):
    def __post_init__(self):
        if self.k < 1:
            raise SpecError("a task needs at least one concept")
        if len(self.names) != len(self.cardinalities):
            raise SpecError("concept names and cardinalities differ in length")
        if any(m < 2 for m in self.cardinalities):
            raise SpecError("every concept needs at least two values")


class LabelSpace(_Space):
    def __post_init__(self):
        if self.k < 1:
            raise SpecError("a task needs at least one label")
        if any(m < 1 for m in self.cardinalities):
            raise SpecError("label cardinalities must be positive")


@dataclass(frozen=True)
class Knowledge:
    """Constraint linking concepts and labels.

    Exactly one of ``rules`` (formula form) or ``table`` (explicit form) is
    used. ``defines`` holds macro atoms in declaration order; rules refer to
    them by name and they are expanded before evaluation.
    """

    rules: tuple[ast.Expr, ...] = ()
    defines: tuple[tuple[str, ast.Expr], ...] = ()
    table: Mapping[tuple[int, ...], frozenset[tuple[int, ...]]] | None = None

    @property
    def is_table(self) -> bool:
        return self.table is not None

    def expanded_rules(self) -> tuple[ast.Expr, ...]:
        macros: dict[str, ast.Expr] = {}
        for name, expr in self.defines:
            macros[name] = ast.substitute(expr, macros)
        return tuple(ast.substitute(r, macros) for r in self.rules)


@dataclass(frozen=True)
class Support:
    """Ground-truth concept vectors with positive probability."""

    vectors: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.vectors:
            raise SpecError("the support is empty")
        if len(set(self.vectors)) != len(self.vectors):
            raise SpecError("duplicate vectors in the support")
        if self.weights is not None:
            if len(self.weights) != len(self.vectors):
                raise SpecError("support weights and vectors differ in length")
            if any(w <= 0 for w in self.weights):
                raise SpecError("support weights must be positive")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise SpecError("support weights must sum to one")

    def __len__(self) -> int:
        return len(self.vectors)

    def probabilities(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self.vectors), 1.0 / len(self.vectors))
        return np.asarray(self.weights, dtype=float)

    def array(self) -> np.ndarray:
        return np.asarray(self.vectors, dtype=np.int64)


@dataclass(frozen=True)
class TaskSpec:
    concepts: ConceptSpace
    labels: LabelSpace
    knowledge: Knowledge
    support: Support
    a2_deterministic: bool = True
    name: str | None = None
    # how the support was declared, kept so the DSL can be regenerated
    support_mode: str = field(default="explicit", compare=False)

    def __post_init__(self):
        for g in self.support.vectors:
            if not self.concepts.contains(g):
                raise SpecError(f"support vector {g} lies outside the concept space")
        declared = set(self.concepts.names) | set(self.labels.names)
        if len(declared) != self.concepts.k + self.labels.k:
            raise SpecError("concept and label names must be distinct")
        for name, _ in self.knowledge.defines:
            if name in declared:
                raise SpecError(f"define {name!r} shadows a declared atom")
        for rule in self.knowledge.expanded_rules():
            unknown = ast.variables(rule) - declared
            if unknown:
                raise MalformedFormula(f"unknown atom(s) {sorted(unknown)} in rule")
        if self.knowledge.table is not None:
            for g, ys in self.knowledge.table.items():
                if not self.concepts.contains(g):
                    raise SpecError(f"table row {g} lies outside the concept space")
                for y in ys:
                    if not self.labels.contains(y):
                        raise SpecError(f"table label {y} lies outside the label space")

    @property
    def k(self) -> int:
        return self.concepts.k

    def with_support(self, vectors, weights=None) -> "TaskSpec":
        return TaskSpec(self.concepts, self.labels, self.knowledge,
                        Support(tuple(map(tuple, vectors)), weights),
                        self.a2_deterministic, self.name)

    def atom_kind(self, name: str) -> str:
        if name in self.concepts.names:
            return "concept"
        if name in self.labels.names:
            return "label"
        raise MalformedFormula(f"unknown atom {name!r}")
