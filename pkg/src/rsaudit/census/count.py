"""Counting deterministic optima under mitigation strategies.

A map ``alpha`` restricted to the support is an optimum when, for every
supported ``g`` and every task, ``alpha(g)`` admits exactly the labels that
``g`` admits, and when every active mitigation condition holds:

* supervision: ``alpha(g)_i = g_i`` for supervised ``g`` and dimensions ``i``;
* reconstruction: ``alpha`` is injective on the support;
* disentanglement: ``alpha`` is a per-dimension value map.

Entangled maps decompose per ``g``: each ``g`` picks its image from its own
target set, so counting is a product (or a permanent when injectivity is
required). Disentangled maps are searched by backtracking over value-table
entries, split into independent components.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import CensusNotListed, DimensionMismatch, SearchSpaceTooLarge, SpecError
from ..knowledge.compiler import compile_knowledge
from ..knowledge.task import DEFAULT_ENUMERATION_CEILING, TaskSpec
from .alpha import AlphaMap

DEFAULT_LISTING_CEILING = 10_000
# largest row count for the exact permanent by dynamic programming over subsets
_PERMANENT_ROWS = 18


@dataclass(frozen=True)
class MitigationSpec:
    """Tasks plus the mitigation conditions that are switched on.

    ``supervised_indices`` are 0-based concept dimensions. When supervision
    is active and ``supervised_set`` is omitted, every supported vector is
    supervised. ``supervised_values`` extends index supervision to value
    supervision: dimension ``i`` of a supervised ``g`` is pinned whenever
    ``g_i`` is one of the listed values (the way "digits 4 and 9 are
    labelled" is expressed for a digit task).
    """

    tasks: tuple[TaskSpec, ...]
    supervised_indices: frozenset[int] = frozenset()
    supervised_set: tuple[tuple[int, ...], ...] | None = None
    supervised_values: frozenset[int] = frozenset()
    reconstruction: bool = False
    disentangled: bool = False
    shared_table: bool | None = None

    def __post_init__(self):
        tasks = tuple(self.tasks)
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "supervised_indices", frozenset(self.supervised_indices))
        object.__setattr__(self, "supervised_values", frozenset(self.supervised_values))
        if not tasks:
            raise SpecError("at least one task is required")
        first = tasks[0]
        for t in tasks[1:]:
            if t.concepts.cardinalities != first.concepts.cardinalities:
                raise DimensionMismatch("all tasks must share one concept space")
            if set(t.support.vectors) != set(first.support.vectors):
                raise SpecError("all tasks must share one support")
        for i in self.supervised_indices:
            if not 0 <= i < first.k:
                raise SpecError(f"supervised index {i} is outside 0..{first.k - 1}")
        if self.supervised_set is not None:
            sset = tuple(tuple(int(v) for v in g) for g in self.supervised_set)
            object.__setattr__(self, "supervised_set", sset)
            missing = set(sset) - set(first.support.vectors)
            if missing:
                raise SpecError(f"supervised vectors outside the support: {sorted(missing)[:3]}")
        if self.shared_table and len(set(first.concepts.cardinalities)) != 1:
            raise SpecError("a shared value table needs equal concept cardinalities")

    @property
    def space(self):
        return self.tasks[0].concepts

    @property
    def support(self) -> list[tuple[int, ...]]:
        """Supported vectors in lexicographic order."""
        return sorted(self.tasks[0].support.vectors)

    @property
    def supervised(self) -> bool:
        return bool(self.supervised_indices or self.supervised_values)

    @property
    def uses_shared_table(self) -> bool:
        if self.shared_table is not None:
            return self.shared_table
        return len(set(self.space.cardinalities)) == 1

    def pins(self, g: Sequence[int]) -> dict[int, int]:
        """Dimensions of ``alpha(g)`` fixed by supervision."""
        return supervision_pins(g, self.supervised_indices, self.supervised_set, self.supervised_values)

    def label(self) -> str:
        parts = []
        if len(self.tasks) > 1:
            parts.append("mtl")
        if self.supervised:
            parts.append("sup")
        if self.reconstruction:
            parts.append("rec")
        if self.disentangled:
            parts.append("dis")
        return "+".join(parts) or "none"


def supervision_pins(g: Sequence[int], indices, supervised_set, values) -> dict[int, int]:
    """Dimensions of ``g`` whose value is observed: ``{dimension: value}``."""
    if not indices and not values:
        return {}
    g = tuple(int(v) for v in g)
    if supervised_set is not None and g not in supervised_set:
        return {}
    out = {i: g[i] for i in indices}
    for i, v in enumerate(g):
        if v in values:
            out[i] = v
    return out


@dataclass
class CensusResult:
    brute_force_count: int
    closed_form_count: int | None
    contains_identity: bool
    optima: list[AlphaMap] | None = None
    closed_form_literal: int | None = None
    mode: str = "entangled"
    listing_ceiling: int = DEFAULT_LISTING_CEILING
    components: list[int] = field(default_factory=list)
    domain: tuple[tuple[int, ...], ...] = ()

    @property
    def count(self) -> int:
        return self.brute_force_count

    def consistent(self) -> bool:
        return self.closed_form_count is None or self.closed_form_count == self.brute_force_count


@dataclass(frozen=True)
class Classification:
    kind: str  # "ground_truth" | "known_rs" | "non_optimal"
    index: int | None = None

    def __str__(self) -> str:
        return f"known_rs({self.index})" if self.kind == "known_rs" else self.kind


# -- label-class keys ---------------------------------------------------------

def _class_keys(mit: MitigationSpec, ceiling: int) -> np.ndarray:
    """One integer per concept vector; equal keys ⇔ equal label sets in every task."""
    space = mit.space
    if space.size > ceiling:
        raise SearchSpaceTooLarge(space.size, ceiling, "concept space")
    grid = space.enumerate(ceiling)
    cols = [compile_knowledge(t, ceiling).class_id(grid) for t in mit.tasks]
    if len(cols) == 1:
        return cols[0]
    _, inverse = np.unique(np.stack(cols, axis=1), axis=0, return_inverse=True)
    return inverse.reshape(-1)


# -- checking a single map ----------------------------------------------------

def is_det_opt(alpha: AlphaMap, mit: MitigationSpec) -> bool:
    """True iff ``alpha`` satisfies every active optimality condition."""
    if alpha.space.cardinalities != mit.space.cardinalities:
        raise DimensionMismatch("alpha and the tasks use different concept spaces")
    if mit.disentangled and alpha.mode != "disentangled":
        return False
    if alpha.mode == "disentangled" and mit.disentangled and mit.uses_shared_table:
        used = _used_values(mit)
        if len({tuple(alpha.tables[j][v] for v in used) for j in range(mit.space.k)}) > 1:
            return False
    sup = np.asarray(mit.support, dtype=np.int64)
    img = alpha.apply(sup)
    for t in mit.tasks:
        ck = compile_knowledge(t)
        if not np.array_equal(ck.class_id(img), ck.class_id(sup)):
            return False
    for g, c in zip(sup, img):
        for i, v in mit.pins(g).items():
            if c[i] != v:
                return False
    if mit.reconstruction and len({tuple(c) for c in img}) != len(img):
        return False
    return True


def _used_values(mit: MitigationSpec) -> list[int]:
    return sorted({int(v) for g in mit.support for v in g})


# -- entangled counting -------------------------------------------------------

def _targets(mit: MitigationSpec, keys: np.ndarray) -> list[np.ndarray]:
    space = mit.space
    grid = space.enumerate(len(keys))
    out = []
    for g in mit.support:
        mask = keys == keys[space.index_of(g)]
        for i, v in mit.pins(g).items():
            mask &= grid[:, i] == v
        out.append(np.flatnonzero(mask))
    return out


def _permanent(rows: list[np.ndarray]) -> int:
    """Number of injective choices, one element from each row."""
    n = len(rows)
    if n == 0:
        return 1
    first = rows[0]
    if all(len(r) == len(first) and np.array_equal(r, first) for r in rows):
        return math.perm(len(first), n)
    if n > _PERMANENT_ROWS:
        raise SearchSpaceTooLarge(2**n, 2**_PERMANENT_ROWS, "injective assignment problem")
    cols = sorted(set().union(*(set(r.tolist()) for r in rows)))
    owners = {c: [i for i, r in enumerate(rows) if c in set(r.tolist())] for c in cols}
    dp = {0: 1}
    for c in cols:
        nxt = dict(dp)
        for mask, ways in dp.items():
            for i in owners[c]:
                if not mask >> i & 1:
                    key = mask | 1 << i
                    nxt[key] = nxt.get(key, 0) + ways
        dp = nxt
    return dp.get((1 << n) - 1, 0)


def _list_entangled(targets: list[np.ndarray], injective: bool, limit: int) -> list[tuple[int, ...]]:
    """All choices (one per row) in lexicographic order, at most ``limit``."""
    out: list[tuple[int, ...]] = []
    choice: list[int] = []
    used: set[int] = set()

    def rec(i: int) -> None:
        if len(out) >= limit:
            return
        if i == len(targets):
            out.append(tuple(choice))
            return
        for c in targets[i].tolist():
            if injective and c in used:
                continue
            choice.append(c)
            used.add(c)
            rec(i + 1)
            choice.pop()
            used.discard(c)

    rec(0)
    return out


def _count_entangled(mit: MitigationSpec, ceiling: int, listing_ceiling: int):
    keys = _class_keys(mit, ceiling)
    targets = _targets(mit, keys)
    if mit.reconstruction:
        groups: dict[int, list[np.ndarray]] = {}
        for g, t in zip(mit.support, targets):
            groups.setdefault(int(keys[mit.space.index_of(g)]), []).append(t)
        count = math.prod(_permanent(rows) for rows in groups.values())
    else:
        count = math.prod(len(t) for t in targets)
    optima = None
    if count <= listing_ceiling:
        domain = tuple(tuple(int(v) for v in g) for g in mit.support)
        vectors: dict[int, tuple[int, ...]] = {}
        for t in targets:
            for c in t.tolist():
                if c not in vectors:
                    vectors[c] = mit.space.vector_at(c)
        optima = [
            AlphaMap._trusted(mit.space, domain, tuple(vectors[c] for c in choice))
            for choice in _list_entangled(targets, mit.reconstruction, listing_ceiling + 1)
        ]
        assert len(optima) == count
    return count, optima, [count]


# -- disentangled counting ----------------------------------------------------

@dataclass
class _Component:
    variables: list[tuple[int, int]]          # (table, value) pairs in search order
    domains: list[list[int]]
    # constraints checked right after assigning variable i:
    # (positions of the g's variables per dimension, index of g, key of g)
    checks: list[list[tuple[tuple[int, ...], int, int]]]


def _components(mit: MitigationSpec, keys: np.ndarray) -> tuple[list[_Component], list[int]]:
    space = mit.space
    shared = mit.uses_shared_table
    table_of = (lambda j: 0) if shared else (lambda j: j)
    card = (lambda t: space.cardinalities[0]) if shared else (lambda t: space.cardinalities[t])
    support = mit.support

    variables = sorted({(table_of(j), g[j]) for g in support for j in range(space.k)})
    where = {v: i for i, v in enumerate(variables)}
    pinned: dict[int, int] = {}
    for g in support:
        for j, val in mit.pins(g).items():
            pinned[where[(table_of(j), g[j])]] = val

    parent = list(range(len(variables)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    g_vars = []
    for g in support:
        vs = [where[(table_of(j), g[j])] for j in range(space.k)]
        g_vars.append(vs)
        for v in vs[1:]:
            parent[find(v)] = find(vs[0])

    members: dict[int, list[int]] = {}
    for i in range(len(variables)):
        members.setdefault(find(i), []).append(i)
    comps = []
    comp_of_g = []
    order = sorted(members.values(), key=min)
    for comp_index, vs in enumerate(order):
        pos = {v: p for p, v in enumerate(vs)}
        checks: list[list] = [[] for _ in vs]
        for gi, (g, gv) in enumerate(zip(support, g_vars)):
            if gv[0] in pos:
                last = max(pos[v] for v in gv)
                checks[last].append((tuple(pos[v] for v in gv), gi, int(keys[space.index_of(g)])))
        domains = [[pinned[v]] if v in pinned else list(range(card(variables[v][0]))) for v in vs]
        comps.append(_Component([variables[v] for v in vs], domains, checks))
    for gv in g_vars:
        comp_of_g.append(next(ci for ci, vs in enumerate(order) if gv[0] in vs))
    return comps, comp_of_g


def _search(args) -> tuple[int, list[tuple[tuple[int, ...], frozenset[int]]] | None, int]:
    """Depth-first search of one component, optionally restricted to one first value.

    Returns (count, solutions or None, visited nodes). Solutions carry the
    set of image indices so injectivity across components can be checked.
    """
    comp, keys, strides, injective, keep, budget, first_value = args
    n = len(comp.variables)
    assign = [0] * n
    used: dict[int, int] = {}
    images: list[int] = []
    count = 0
    nodes = 0
    kept: list | None = [] if keep else None

    def check(i: int) -> bool:
        added = []
        ok = True
        for positions, _, key in comp.checks[i]:
            idx = int(sum(assign[p] * s for p, s in zip(positions, strides)))
            if keys[idx] != key:
                ok = False
                break
            if injective:
                if idx in used:
                    ok = False
                    break
                used[idx] = 1
                added.append(idx)
        if not ok:
            for idx in added:
                del used[idx]
            return False
        images.extend(added)
        return True

    def undo(i: int) -> None:
        if injective:
            for _ in comp.checks[i]:
                del used[images.pop()]

    def rec(i: int) -> None:
        nonlocal count, nodes
        if i == n:
            count += 1
            if kept is not None:
                kept.append((tuple(assign), frozenset(used)))
            return
        domain = comp.domains[i] if i or first_value is None else [first_value]
        for value in domain:
            nodes += 1
            if nodes > budget:
                raise SearchSpaceTooLarge(nodes, budget, "disentangled search")
            assign[i] = value
            if check(i):
                rec(i + 1)
                undo(i)

    rec(0)
    return count, kept, nodes


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("RS_AUDIT_THREADS", "1")))
    except ValueError:
        return 1


def _run_component(comp, keys, strides, injective, keep, budget, workers):
    if workers <= 1 or len(comp.domains[0]) == 1:
        return _search((comp, keys, strides, injective, keep, budget, None))
    # contiguous shards on the first variable, merged in shard order
    shards = [(comp, keys, strides, injective, keep, budget, v) for v in comp.domains[0]]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_search, shards))
    count = sum(p[0] for p in parts)
    kept = [s for p in parts for s in p[1]] if keep else None
    return count, kept, sum(p[2] for p in parts)


def _count_disentangled(mit: MitigationSpec, ceiling: int, listing_ceiling: int, workers: int):
    space = mit.space
    keys = _class_keys(mit, ceiling)
    comps, _ = _components(mit, keys)
    strides = tuple(int(s) for s in np.asarray(
        [math.prod(space.cardinalities[j + 1:]) for j in range(space.k)]))
    results = []
    for comp in comps:
        count, kept, _ = _run_component(comp, keys, strides, mit.reconstruction,
                                        keep=mit.reconstruction, budget=ceiling, workers=workers)
        results.append((count, kept))
    per_comp = [r[0] for r in results]
    if not mit.reconstruction:
        total = math.prod(per_comp)
        solutions = None
        if total <= listing_ceiling:
            solutions = []
            for comp in comps:
                _, kept, _ = _search((comp, keys, strides, False, True, ceiling, None))
                solutions.append(kept)
    else:
        space_size = math.prod(per_comp)
        if space_size > ceiling:
            raise SearchSpaceTooLarge(space_size, ceiling, "cross-component injectivity check")
        solutions = [r[1] for r in results]
        combos = _disjoint_products(solutions)
        total = len(combos)
        solutions = None if total > listing_ceiling else (solutions, combos)

    optima = None
    if solutions is not None:
        if mit.reconstruction:
            per, combos = solutions
        else:
            per = solutions
            combos = _all_products([len(s) for s in per])
        optima = []
        for combo in combos:
            tables = [list(range(m)) for m in space.cardinalities]
            for comp, sols, pick in zip(comps, per, combo):
                for (t, v), val in zip(comp.variables, sols[pick][0]):
                    if mit.uses_shared_table:
                        for j in range(space.k):
                            tables[j][v] = val
                    else:
                        tables[t][v] = val
            optima.append(AlphaMap.disentangled(space, tables))
        optima.sort(key=lambda a: a.tables)
    return total, optima, per_comp


def _all_products(sizes: list[int]) -> list[tuple[int, ...]]:
    import itertools

    return list(itertools.product(*(range(n) for n in sizes)))


def _disjoint_products(per: list[list]) -> list[tuple[int, ...]]:
    out = []

    def rec(i, picked, used):
        if i == len(per):
            out.append(tuple(picked))
            return
        for j, (_, imgs) in enumerate(per[i]):
            if used.isdisjoint(imgs):
                picked.append(j)
                rec(i + 1, picked, used | imgs)
                picked.pop()

    rec(0, [], frozenset())
    return out


# -- public entry points -------------------------------------------------------

def count_brute_force(mit: MitigationSpec, ceiling: int = DEFAULT_ENUMERATION_CEILING,
                      listing_ceiling: int = DEFAULT_LISTING_CEILING,
                      workers: int | None = None,
                      closed_form: Callable[[MitigationSpec], int | None] | None = None) -> CensusResult:
    """Exact number of deterministic optima, with the list when it is short enough."""
    workers = _workers() if workers is None else workers
    if mit.disentangled:
        count, optima, comps = _count_disentangled(mit, ceiling, listing_ceiling, workers)
        mode = "disentangled"
    else:
        count, optima, comps = _count_entangled(mit, ceiling, listing_ceiling)
        mode = "entangled"
    identity = AlphaMap.identity(mit.space)
    closed = (closed_form or count_closed_form)(mit)
    return CensusResult(
        brute_force_count=count,
        closed_form_count=closed,
        contains_identity=is_det_opt(identity, mit),
        optima=optima,
        closed_form_literal=count_closed_form_literal(mit),
        mode=mode,
        listing_ceiling=listing_ceiling,
        components=comps,
        domain=tuple(mit.support),
    )


def _closed_form_classes(mit: MitigationSpec) -> tuple[list[int], list[int]] | None:
    """Class sizes and supervised counts per label when a closed form applies."""
    if mit.disentangled or len(mit.tasks) != 1:
        return None
    task = mit.tasks[0]
    if not task.a2_deterministic:
        return None
    if mit.supervised and (mit.supervised_values or mit.supervised_indices != set(range(task.k))):
        return None
    ck = compile_knowledge(task)
    grid = task.concepts.enumerate()
    consistent = {tuple(int(v) for v in g) for g in grid[ck.satisfiable(grid)]}
    if set(task.support.vectors) != consistent:
        return None
    sizes = ck.class_sizes()
    supervised = set(mit.support if mit.supervised_set is None else mit.supervised_set)
    nu = {y: 0 for y in sizes}
    if mit.supervised and supervised:
        labels = ck.beta(np.asarray(sorted(supervised)))
        for y in labels:
            nu[tuple(int(v) for v in y)] += 1
    ys = [y for y in sizes if sizes[y] > 0]
    return [sizes[y] for y in ys], [nu[y] for y in ys]


def count_closed_form(mit: MitigationSpec) -> int | None:
    """Product formula over consistency classes, or ``None`` when it does not apply.

    Applies to a single deterministic task, entangled maps and a support made
    of every consistent concept vector. Supervision must cover whole vectors.
    With ``nu`` supervised members in a class of size ``n``: unsupervised
    members choose freely within the class (``n ** (n - nu)``) or, with
    reconstruction, injectively among the unsupervised members
    (``(n - nu)!``).
    """
    classes = _closed_form_classes(mit)
    if classes is None:
        return None
    sizes, nus = classes
    if not mit.supervised:
        nus = [0] * len(sizes)
    if mit.reconstruction:
        return math.prod(math.factorial(n - nu) for n, nu in zip(sizes, nus))
    return math.prod(n ** (n - nu) for n, nu in zip(sizes, nus))


def count_closed_form_literal(mit: MitigationSpec) -> int | None:
    """The supervision count with base ``n - nu`` and exponent ``n``.

    Reported next to the brute-force count for comparison only; it is not
    the number of optima in general.
    """
    if not mit.supervised or mit.reconstruction:
        return None
    classes = _closed_form_classes(mit)
    if classes is None:
        return None
    sizes, nus = classes
    return math.prod((n - nu) ** n for n, nu in zip(sizes, nus))


def classify_trained_map(alpha: AlphaMap, census: CensusResult) -> Classification:
    """Ground truth, a listed optimum (by index) or not an optimum at all."""
    if census.optima is None:
        raise CensusNotListed(
            f"census has {census.brute_force_count} optima, above the listing ceiling "
            f"{census.listing_ceiling}")
    domain = np.asarray(census.domain, dtype=np.int64)
    if alpha.is_identity_on(domain):
        return Classification("ground_truth")
    image = alpha.apply(domain)
    for i, opt in enumerate(census.optima):
        if np.array_equal(opt.apply(domain), image):
            return Classification("known_rs", i)
    return Classification("non_optimal")


def optimum_index(census: CensusResult) -> dict[bytes, int]:
    """Lookup from an image array (as bytes) to optimum index, for bulk classification."""
    domain = np.asarray(census.domain, dtype=np.int64)
    return {opt.apply(domain).tobytes(): i for i, opt in enumerate(census.optima or [])}


def support_components(mit: MitigationSpec) -> list[list[tuple[int, int]]]:
    """Value-table entries that interact, grouped; disentangled counts multiply over groups."""
    keys = _class_keys(mit, DEFAULT_ENUMERATION_CEILING)
    comps, _ = _components(mit, keys)
    return [c.variables for c in comps]
