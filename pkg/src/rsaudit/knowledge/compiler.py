"""Compile knowledge into admissible-label tables by exhaustive evaluation.

The knowledge is first split into independent blocks: groups of concepts
and labels that never appear together in a rule with members of another
group. Each block is evaluated on the product of its own concept and label
sub-spaces, so the cost is the sum, not the product, of the block sizes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import NonDeterministicKnowledge, SearchSpaceTooLarge, UnsatisfiableKnowledge
from . import ast
from .task import DEFAULT_ENUMERATION_CEILING, Knowledge, Support, TaskSpec, _Space

# explicit supports ("all", "consistent") are materialized as tuples
SUPPORT_MATERIALIZATION_CEILING = 2**18


@dataclass(frozen=True)
class Block:
    """An independent part of the knowledge.

    ``admits[i, j]`` is true when the i-th concept sub-vector (lexicographic
    over ``concept_indices``) admits the j-th label sub-vector.
    ``pattern`` gives, per concept sub-vector, the id of its admissible
    label set; equal ids mean equal sets.
    """

    concept_indices: tuple[int, ...]
    label_indices: tuple[int, ...]
    concepts: _Space
    labels: _Space
    admits: np.ndarray
    pattern: np.ndarray
    n_patterns: int

    def local_index(self, vectors: np.ndarray) -> np.ndarray:
        """Index of each full concept vector's projection onto this block."""
        vectors = np.asarray(vectors, dtype=np.int64)
        if not self.concept_indices:
            return np.zeros(vectors.shape[0], dtype=np.int64)
        return np.atleast_1d(self.concepts.index_of(vectors[:, list(self.concept_indices)]))

    def label_sets(self) -> dict[tuple[int, ...], frozenset[tuple[int, ...]]]:
        out = {}
        for i, c in enumerate(self.concepts):
            out[c] = frozenset(self.labels.vector_at(j) for j in np.flatnonzero(self.admits[i]))
        return out

    def class_sizes(self) -> dict[tuple[int, ...], int]:
        counts = self.admits.sum(axis=0)
        return {self.labels.vector_at(j): int(counts[j]) for j in range(self.labels.size)}


def _rule_groups(spec: TaskSpec, rules: Sequence[ast.Expr]) -> list[tuple[set[int], set[int], list[int]]]:
    """Union-find over atoms that co-occur in a rule."""
    names = list(spec.concepts.names) + list(spec.labels.names)
    parent = list(range(len(names)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    where = {n: i for i, n in enumerate(names)}
    for rule in rules:
        atoms = [where[v] for v in sorted(ast.variables(rule))]
        for a in atoms[1:]:
            parent[find(a)] = find(atoms[0])

    groups: dict[int, tuple[set[int], set[int], list[int]]] = {}
    k = spec.concepts.k
    for i in range(len(names)):
        root = find(i)
        cs, ls, _ = groups.setdefault(root, (set(), set(), []))
        (cs if i < k else ls).add(i if i < k else i - k)
    for r, rule in enumerate(rules):
        atoms = ast.variables(rule)
        root = find(where[min(atoms)]) if atoms else None
        if root is None:
            # constant rules constrain every block equally; attach to the first
            root = find(0)
        groups[root][2].append(r)
    out = list(groups.values())
    # unconstrained concepts form one free block; so do unconstrained labels
    free_c = set().union(*(cs for cs, ls, rs in out if not rs and not ls)) if out else set()
    free_l = set().union(*(ls for cs, ls, rs in out if not rs and not cs)) if out else set()
    kept = [g for g in out if g[2] or (g[0] and g[1])]
    if free_c:
        kept.append((free_c, set(), []))
    if free_l:
        kept.append((set(), free_l, []))
    kept.sort(key=lambda g: (min(g[0]) if g[0] else k, min(g[1]) if g[1] else 0))
    return kept


def block_factorization(spec: TaskSpec) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Independent (concept indices, label indices) blocks of the knowledge.

    Defined atoms are expanded first, so a concept reached only through a
    definition still joins the block of the rule that uses it. Table-form
    knowledge is never split.
    """
    if spec.knowledge.is_table:
        return [(tuple(range(spec.concepts.k)), tuple(range(spec.labels.k)))]
    groups = _rule_groups(spec, spec.knowledge.expanded_rules())
    return [(tuple(sorted(cs)), tuple(sorted(ls))) for cs, ls, _ in groups]


def _space(full, indices) -> _Space:
    return _Space(tuple(full.names[i] for i in indices), tuple(full.cardinalities[i] for i in indices))


def _patterns(admits: np.ndarray) -> tuple[np.ndarray, int]:
    if admits.shape[1] == 0:
        return np.zeros(admits.shape[0], dtype=np.int64), 1
    uniq, inverse = np.unique(admits, axis=0, return_inverse=True)
    return inverse.reshape(-1).astype(np.int64), int(uniq.shape[0])


def _evaluate_block(spec: TaskSpec, c_idx, l_idx, rules, ceiling: int) -> np.ndarray:
    cspace = _space(spec.concepts, c_idx)
    lspace = _space(spec.labels, l_idx)
    if cspace.size * lspace.size > ceiling * 64:
        raise SearchSpaceTooLarge(cspace.size * lspace.size, ceiling * 64, "knowledge block")
    cgrid = cspace.enumerate(ceiling)
    lgrid = lspace.enumerate(ceiling)
    env = {}
    for p, i in enumerate(c_idx):
        env[spec.concepts.names[i]] = cgrid[:, p][:, None]
    for q, j in enumerate(l_idx):
        env[spec.labels.names[j]] = lgrid[:, q][None, :]
    admits = np.ones((cgrid.shape[0], lgrid.shape[0]), dtype=bool)
    for rule in rules:
        admits &= np.broadcast_to(ast.evaluate(rule, env) != 0, admits.shape)
    return admits


def _table_block(spec: TaskSpec, ceiling: int) -> np.ndarray:
    if spec.concepts.size > ceiling:
        raise SearchSpaceTooLarge(spec.concepts.size, ceiling, "concept space")
    admits = np.zeros((spec.concepts.size, spec.labels.size), dtype=bool)
    for g, ys in spec.knowledge.table.items():
        for y in ys:
            admits[spec.concepts.index_of(g), spec.labels.index_of(y)] = True
    return admits


class CompiledKnowledge:
    """Block-wise admissible-label tables for one task."""

    def __init__(self, spec: TaskSpec, blocks: list[Block]):
        self.spec = spec
        self.blocks = blocks

    # -- per-vector queries ------------------------------------------------
    def class_id(self, vectors) -> np.ndarray:
        """Integer id of each vector's admissible label set (equal id ⇔ equal set)."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.int64))
        out = np.zeros(vectors.shape[0], dtype=np.int64)
        for b in self.blocks:
            out = out * b.n_patterns + b.pattern[b.local_index(vectors)]
        return out

    def satisfiable(self, vectors) -> np.ndarray:
        """True where the vector admits at least one label."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.int64))
        ok = np.ones(vectors.shape[0], dtype=bool)
        for b in self.blocks:
            ok &= b.admits[b.local_index(vectors)].any(axis=1) | (b.admits.shape[1] == 0)
        return ok

    def n_admissible(self, vectors) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.int64))
        n = np.ones(vectors.shape[0], dtype=np.int64)
        for b in self.blocks:
            n *= b.admits[b.local_index(vectors)].sum(axis=1)
        return n

    def label_set(self, g: Sequence[int]) -> frozenset[tuple[int, ...]]:
        g = np.asarray([g], dtype=np.int64)
        parts = []
        for b in self.blocks:
            row = b.admits[b.local_index(g)[0]]
            parts.append([(b.label_indices, b.labels.vector_at(j)) for j in np.flatnonzero(row)])
        out = set()
        for combo in itertools.product(*parts):
            y = [0] * self.spec.labels.k
            for idx, vals in combo:
                for i, v in zip(idx, vals):
                    y[i] = v
            out.add(tuple(y))
        return frozenset(out)

    def beta(self, vectors) -> np.ndarray:
        """Deterministic label of each vector, ``-1`` rows where not unique."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.int64))
        out = np.full((vectors.shape[0], self.spec.labels.k), -1, dtype=np.int64)
        unique = np.ones(vectors.shape[0], dtype=bool)
        for b in self.blocks:
            rows = b.admits[b.local_index(vectors)]
            if not b.label_indices:
                continue
            unique &= rows.sum(axis=1) == 1
            first = rows.argmax(axis=1)
            for q, j in enumerate(b.label_indices):
                out[:, j] = [b.labels.vector_at(f)[q] for f in first]
        out[~unique] = -1
        return out

    # -- whole-space views -------------------------------------------------
    def admits_matrix(self, ceiling: int = DEFAULT_ENUMERATION_CEILING) -> np.ndarray:
        """Full ``[|C|, |Y|]`` boolean table (concept and label vectors lexicographic)."""
        size = self.spec.concepts.size * self.spec.labels.size
        if size > ceiling:
            raise SearchSpaceTooLarge(size, ceiling, "concept-label table")
        cgrid = self.spec.concepts.enumerate(ceiling)
        lgrid = self.spec.labels.enumerate(ceiling)
        out = np.ones((cgrid.shape[0], lgrid.shape[0]), dtype=bool)
        for b in self.blocks:
            ci = b.local_index(cgrid)
            lj = (np.atleast_1d(b.labels.index_of(lgrid[:, list(b.label_indices)]))
                  if b.label_indices else np.zeros(lgrid.shape[0], dtype=np.int64))
            if b.label_indices:
                out &= b.admits[np.ix_(ci, lj)]
            else:
                out &= b.admits[ci, 0][:, None] if b.admits.shape[1] else True
        return out

    def label_map(self, ceiling: int = DEFAULT_ENUMERATION_CEILING) -> dict[tuple[int, ...], frozenset]:
        table = self.admits_matrix(ceiling)
        return {
            self.spec.concepts.vector_at(i): frozenset(
                self.spec.labels.vector_at(j) for j in np.flatnonzero(table[i]))
            for i in range(table.shape[0])
        }

    def class_sizes(self) -> dict[tuple[int, ...], int]:
        """|C_y| for every label vector, by multiplying per-block counts."""
        per_block = []
        for b in self.blocks:
            if b.label_indices:
                per_block.append(b)
        free = math.prod(b.concepts.size for b in self.blocks if not b.label_indices)
        out = {}
        for y in self.spec.labels:
            n = free
            for b in per_block:
                sub = tuple(y[j] for j in b.label_indices)
                n *= int(b.admits[:, b.labels.index_of(sub)].sum())
            out[tuple(y)] = n
        return out

    def is_deterministic(self) -> bool:
        return all((b.admits.sum(axis=1) == 1).all() for b in self.blocks if b.label_indices)


def compile_knowledge(spec: TaskSpec, ceiling: int = DEFAULT_ENUMERATION_CEILING,
                      validate: bool = True) -> CompiledKnowledge:
    """Compile ``spec``'s knowledge; with ``validate`` also check it on the support."""
    key = (id(spec), ceiling)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is spec:
        compiled = hit[1]
    else:
        compiled = _compile(spec, ceiling)
        if len(_CACHE) > 256:
            _CACHE.clear()
        _CACHE[key] = (spec, compiled)
    if validate:
        _validate(compiled)
    return compiled


_CACHE: dict = {}


def _compile(spec: TaskSpec, ceiling: int) -> CompiledKnowledge:
    blocks = []
    if spec.knowledge.is_table:
        admits = _table_block(spec, ceiling)
        pattern, n = _patterns(admits)
        blocks.append(Block(tuple(range(spec.concepts.k)), tuple(range(spec.labels.k)),
                            _space(spec.concepts, range(spec.concepts.k)),
                            _space(spec.labels, range(spec.labels.k)), admits, pattern, n))
    else:
        rules = spec.knowledge.expanded_rules()
        for cs, ls, rs in _rule_groups(spec, rules):
            c_idx, l_idx = tuple(sorted(cs)), tuple(sorted(ls))
            admits = _evaluate_block(spec, c_idx, l_idx, [rules[r] for r in rs], ceiling)
            pattern, n = _patterns(admits)
            blocks.append(Block(c_idx, l_idx, _space(spec.concepts, c_idx),
                                _space(spec.labels, l_idx), admits, pattern, n))
    return CompiledKnowledge(spec, blocks)


def _validate(compiled: CompiledKnowledge) -> None:
    spec = compiled.spec
    sup = spec.support.array()
    n = compiled.n_admissible(sup)
    if (n == 0).any():
        g = tuple(int(v) for v in sup[int(np.flatnonzero(n == 0)[0])])
        raise UnsatisfiableKnowledge(f"supported concept vector {g} admits no label")
    if spec.a2_deterministic and (n > 1).any():
        g = tuple(int(v) for v in sup[int(np.flatnonzero(n > 1)[0])])
        raise NonDeterministicKnowledge(
            f"task is declared deterministic but {g} admits {int(n[n > 1][0])} labels")


def compile_label_map(spec: TaskSpec, ceiling: int = DEFAULT_ENUMERATION_CEILING) -> dict:
    """Admissible label set of every concept vector in the full concept space."""
    return compile_knowledge(spec, ceiling).label_map(ceiling)


def consistency_classes(spec: TaskSpec, block: int | None = None,
                        ceiling: int = DEFAULT_ENUMERATION_CEILING) -> dict[tuple[int, ...], np.ndarray]:
    """``C_y`` for every label ``y``: concept vectors from which ``y`` is admissible.

    With ``block`` the classes are those of one independent block, over that
    block's own concept and label sub-spaces.
    """
    compiled = compile_knowledge(spec, ceiling, validate=False)
    if block is not None:
        b = compiled.blocks[block]
        grid = b.concepts.enumerate(ceiling)
        return {b.labels.vector_at(j): grid[b.admits[:, j]] for j in range(b.labels.size)}
    table = compiled.admits_matrix(ceiling)
    grid = spec.concepts.enumerate(ceiling)
    return {spec.labels.vector_at(j): grid[table[:, j]] for j in range(table.shape[1])}


def class_sizes(spec: TaskSpec, block: int | None = None) -> dict[tuple[int, ...], int]:
    compiled = compile_knowledge(spec, validate=False)
    if block is not None:
        return compiled.blocks[block].class_sizes()
    return compiled.class_sizes()


def full_support(spec: TaskSpec, mode: str, ceiling: int | None = None) -> tuple[tuple[int, ...], ...]:
    """Materialize the ``all`` or ``consistent`` support of ``spec``."""
    ceiling = ceiling or SUPPORT_MATERIALIZATION_CEILING
    grid = spec.concepts.enumerate(ceiling)
    if mode == "consistent":
        grid = grid[compile_knowledge(spec, validate=False).satisfiable(grid)]
    elif mode != "all":
        raise ValueError(f"unknown support mode {mode!r}")
    return tuple(tuple(int(v) for v in row) for row in grid)


def block_subspec(spec: TaskSpec, block: int, support_mode: str = "consistent") -> TaskSpec:
    """The task restricted to one knowledge block, with a derived support."""
    from .task import ConceptSpace, LabelSpace

    compiled = compile_knowledge(spec, validate=False)
    b = compiled.blocks[block]
    if not b.label_indices:
        raise ValueError("block constrains no label")
    names = set(b.concepts.names) | set(b.labels.names)
    # keep the rules (unexpanded, for readability) whose atoms lie in the block
    rules = tuple(r for r in spec.knowledge.rules
                  if _atoms_closure(r, spec.knowledge.defines) <= names)
    defines = []
    known = set(names)
    for n, e in spec.knowledge.defines:
        if ast.variables(e) <= known:
            defines.append((n, e))
            known.add(n)
    cspace = ConceptSpace(b.concepts.names, b.concepts.cardinalities)
    lspace = LabelSpace(b.labels.names, b.labels.cardinalities)
    name = f"{spec.name}-{'-'.join(b.labels.names)}" if spec.name else None
    knowledge = Knowledge(rules, tuple(d for d in defines if _mentioned(d[0], rules, defines)))
    probe = TaskSpec(cspace, lspace, knowledge, Support(((0,) * cspace.k,)), spec.a2_deterministic,
                     name, support_mode)
    return TaskSpec(cspace, lspace, knowledge, Support(full_support(probe, support_mode)),
                    spec.a2_deterministic, name, support_mode)


def _atoms_closure(expr: ast.Expr, defines) -> frozenset[str]:
    macros: dict[str, ast.Expr] = {}
    for n, e in defines:
        macros[n] = ast.substitute(e, macros)
    return ast.variables(ast.substitute(expr, macros))


def _mentioned(name: str, rules, defines) -> bool:
    pending = set()
    for r in rules:
        pending |= ast.variables(r)
    for n, e in reversed(defines):
        if n in pending:
            pending |= ast.variables(e)
    return name in pending
