"""Property suites run by ``rsaudit verify``.

Each suite returns a ``PropertyResult``; nothing here raises on a failed
property. Every suite uses a fixed seed so the table is reproducible.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import builtins
from .autodiff import as_tensor
from .census.count import MitigationSpec, count_brute_force, count_closed_form
from .errors import SpecError
from .knowledge.compiler import compile_knowledge
from .knowledge.dsl import parse_task
from .knowledge.task import TaskSpec
from .predictors.data import LabeledData, make_dataset, support_inputs
from .predictors.dpl import UniformReasoningLayer, dpl_label_distribution, dpl_nll
from .predictors.extractor import DistributionExtractor
from .predictors.ltn import LTNGrounding
from .predictors.sl import semantic_loss_terms
from .training.losses import MitigationLossConfig, build_model, loss_and_grad

GRADIENT_TOLERANCE = 1e-4
# denominators below this are treated as this, so near-zero coordinates are
# compared absolutely instead of relatively
GRADIENT_FLOOR = 1e-6
FD_STEP = 1e-5
BOUND_SLACK = 1e-9
CONVEX_TOLERANCE = 1e-9


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


# -- random tasks ----------------------------------------------------------------

def random_table_task(rng: np.random.Generator, max_vectors: int = 12, max_labels: int = 6,
                      deterministic: bool = True) -> TaskSpec:
    """A task with one or two concepts (at most ``max_vectors`` vectors) and a random label table."""
    if rng.random() < 0.5:
        cards = [int(rng.integers(2, max_vectors + 1))]
    else:
        m1 = int(rng.integers(2, max_vectors // 2 + 1))
        cards = [m1, int(rng.integers(2, max_vectors // m1 + 1))]
    n_labels = int(rng.integers(2, max_labels + 1))
    names = [f"c{i + 1}" for i in range(len(cards))]
    lines = ["task random;"]
    lines += [f"concept {n} : {m};" for n, m in zip(names, cards)]
    lines.append(f"label y : {n_labels};")
    if not deterministic:
        lines.append("nondeterministic;")
    grid = np.stack(np.meshgrid(*[np.arange(m) for m in cards], indexing="ij"), -1).reshape(-1, len(cards))
    for g in grid:
        if deterministic:
            ys = [int(rng.integers(n_labels))]
        else:
            ys = sorted(set(rng.integers(n_labels, size=int(rng.integers(1, 3))).tolist()))
        vec = "(" + ", ".join(str(int(v)) for v in g) + ")"
        lines.append(f"map {vec} -> " + " | ".join(f"({y})" for y in ys) + ";")
    lines.append("support all;")
    return parse_task("\n".join(lines))


# -- suites ----------------------------------------------------------------------

def oracle_equivalence(n_random: int = 50, seed: int = 0,
                       closed_form: Callable[[MitigationSpec], int | None] | None = None) -> PropertyResult:
    """Brute-force count equals the closed form, no mitigation and reconstruction rows."""
    rng = np.random.default_rng(seed)
    tasks = [builtins.task("xor"), builtins.task("reduced-addition")]
    tasks += [random_table_task(rng) for _ in range(n_random)]
    mismatches = []
    checked = 0
    for i, task in enumerate(tasks):
        for rec in (False, True):
            mit = MitigationSpec((task,), reconstruction=rec)
            result = count_brute_force(mit, listing_ceiling=0, closed_form=closed_form)
            checked += 1
            if result.closed_form_count != result.brute_force_count:
                mismatches.append(f"task {i} {'rec' if rec else 'none'}: "
                                  f"{result.brute_force_count} vs {result.closed_form_count}")
    detail = f"{checked} rows, {len(mismatches)} mismatches"
    if mismatches:
        detail += "; first: " + mismatches[0]
    return PropertyResult("oracle_equivalence", not mismatches, detail)


def risk_bound(n_tasks: int = 100, seed: int = 1) -> PropertyResult:
    """Expected log-likelihood over inputs never exceeds its ground-truth-level counterpart.

    Inputs are several styles per ground-truth vector, each with its own
    random concept distribution. The right-hand side is
    ``E_g [-KL(p*(Y|g) || p(Y|g)) - H(p*(Y|g))]`` with ``p(y|g)`` the
    style-average of ``p(y|x)``, computed term by term.
    """
    rng = np.random.default_rng(seed)
    worst = -math.inf
    violations = 0
    for _ in range(n_tasks):
        task = random_table_task(rng, max_vectors=8, max_labels=4, deterministic=bool(rng.random() < 0.5))
        layer = UniformReasoningLayer(task)
        ck = compile_knowledge(task, validate=False)
        support, p_g = support_inputs(task)
        n_styles = rng.integers(1, 4, size=len(support))
        rows, owner, style_p = [], [], []
        for i, s in enumerate(n_styles):
            w = rng.dirichlet(np.ones(s))
            for j in range(s):
                rows.append(support[i])
                owner.append(i)
                style_p.append(w[j])
        owner, style_p = np.asarray(owner), np.asarray(style_p)
        logits = rng.normal(0.0, 2.0, size=(len(rows), task.concepts.size))
        probs = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        extractor = DistributionExtractor(task.concepts, np.asarray(rows), probs)
        p_y_x = dpl_label_distribution(extractor, layer)  # [n_x, |Y|]
        # p*(y | g): uniform over the labels the knowledge admits for g
        p_star = ck.admits_matrix()[task.concepts.index_of(support)].astype(float)
        p_star /= p_star.sum(axis=1, keepdims=True)
        lhs = 0.0
        for x in range(len(rows)):
            g = owner[x]
            mask = p_star[g] > 0
            lhs += p_g[g] * style_p[x] * float((p_star[g, mask] * np.log(p_y_x[x, mask])).sum())
        rhs = 0.0
        for g in range(len(support)):
            p_y_g = (style_p[owner == g, None] * p_y_x[owner == g]).sum(axis=0)
            mask = p_star[g] > 0
            kl = float((p_star[g, mask] * np.log(p_star[g, mask] / p_y_g[mask])).sum())
            h = float(-(p_star[g, mask] * np.log(p_star[g, mask])).sum())
            rhs += p_g[g] * (-kl - h)
        gap = lhs - rhs
        worst = max(worst, gap)
        violations += gap > BOUND_SLACK
    return PropertyResult("risk_bound", bool(violations == 0),
                          f"{n_tasks} tasks, {violations} violations, max(lhs - rhs) = {worst:.3e}")


def gradient_suite(trials: int = 50, seed: int = 2) -> PropertyResult:
    """Analytic gradients match central finite differences for every objective and term."""
    rng = np.random.default_rng(seed)
    xor = builtins.task("xor")
    cases = [(obj, "objective") for obj in ("dpl", "sl", "ltn")]
    cases += [(None, term) for term in ("supervision", "entropy", "reconstruction")]
    worst = 0.0
    failures = []
    for objective, term in cases:
        for trial in range(trials):
            task = xor if trial % 2 == 0 else random_table_task(rng, max_vectors=6, max_labels=3)
            obj = objective or ("dpl", "sl", "ltn")[trial % 3]
            mode = ("joint", "factorized")[(trial // 2) % 2]
            kw: dict = {}
            if term == "supervision":
                k = task.k
                idx = frozenset(int(i) for i in rng.choice(k, size=int(rng.integers(1, k + 1)), replace=False))
                kw = dict(eta_sup=float(rng.uniform(0.1, 2.0)), supervised_indices=idx)
            elif term == "entropy":
                kw = dict(eta_ent=float(rng.uniform(0.1, 2.0)))
            elif term == "reconstruction":
                kw = dict(eta_rec=float(rng.uniform(0.1, 2.0)))
            mit = MitigationLossConfig(**kw)
            model = build_model((task,), obj, mode, mit, rng, 1.0)
            theta = rng.normal(0.0, 1.0, size=model.get_flat().size)
            model.set_flat(theta)
            _, grad, _ = loss_and_grad(model, mit)
            numeric = np.zeros_like(theta)
            for i in range(theta.size):
                up, down = theta.copy(), theta.copy()
                up[i] += FD_STEP
                down[i] -= FD_STEP
                model.set_flat(up)
                f_up = loss_and_grad(model, mit)[0]
                model.set_flat(down)
                f_down = loss_and_grad(model, mit)[0]
                numeric[i] = (f_up - f_down) / (2 * FD_STEP)
            err = float(np.max(relative_error(grad, numeric)))
            worst = max(worst, err)
            if err > GRADIENT_TOLERANCE:
                failures.append(f"{obj}/{mode}/{term}: {err:.2e}")
    detail = f"{len(cases) * trials} checks, max relative error {worst:.2e}"
    if failures:
        detail += f"; {len(failures)} above {GRADIENT_TOLERANCE:g}, first: {failures[0]}"
    return PropertyResult("gradients", not failures, detail)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, GRADIENT_FLOOR)`` per coordinate."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), GRADIENT_FLOOR)
    return np.abs(analytic - numeric) / scale


@functools.lru_cache(maxsize=1)
def _xor_census():
    return count_brute_force(MitigationSpec((builtins.task("xor"),)), listing_ceiling=70_000)


def convex_combinations(pairs: int = 10, seed: int = 3) -> PropertyResult:
    """Mixtures of two deterministic optima of XOR still fit the data perfectly."""
    rng = np.random.default_rng(seed)
    task = builtins.task("xor")
    census = _xor_census()
    layer = UniformReasoningLayer(task)
    inputs, _ = support_inputs(task)
    data = make_dataset(task, inputs, None)
    worst = 0.0
    for _ in range(pairs):
        a, b = rng.choice(len(census.optima), size=2, replace=False)
        lam = float(rng.uniform())
        ea = DistributionExtractor.from_alpha(census.optima[a], inputs)
        eb = DistributionExtractor.from_alpha(census.optima[b], inputs)
        mixed = DistributionExtractor.mixture([ea, eb], [lam, 1.0 - lam])
        worst = max(worst, dpl_nll(mixed, layer, data))
    return PropertyResult("convex_combinations", worst <= CONVEX_TOLERANCE,
                          f"{pairs} pairs, max nll {worst:.3e}")


def shared_optima() -> PropertyResult:
    """Every XOR deterministic optimum is optimal for all three predictors.

    A deterministic extractor puts all mass on ``alpha(g)``, so each
    predictor's score at input ``g`` is its score at the vertex ``alpha(g)``.
    The vertex scores are computed once with the predictors and every listed
    optimum is then checked by lookup.
    """
    task = builtins.task("xor")
    census = _xor_census()
    grid = task.concepts.enumerate()
    vertices = DistributionExtractor.deterministic(task.concepts, grid, grid)
    layer = UniformReasoningLayer(task)
    p_y = dpl_label_distribution(vertices, layer)  # [|C|, |Y|]
    admits = compile_knowledge(task).admits_matrix()
    grounding = LTNGrounding(task)
    onehots = [as_tensor(np.eye(2)[grid[:, j]]) for j in range(task.k)]
    sat = np.stack([grounding.satisfaction(onehots, y).data for y in task.labels], axis=1)
    rows = np.arange(len(grid))
    with np.errstate(divide="ignore"):
        sl = np.stack([semantic_loss_terms(vertices, admits, LabeledData(
            rows, np.full(len(grid), y), np.full(len(grid), 1.0 / len(grid)))).data
            for y in range(task.labels.size)], axis=1)
    domain = np.asarray(census.domain)
    truth = compile_knowledge(task).beta(domain)[:, 0]
    # [n_optima, |supp|] concept-vector index of alpha(g)
    images = np.stack([task.concepts.index_of(opt.apply(domain)) for opt in census.optima])
    ok = ((np.abs(p_y[images, truth] - 1.0) <= 1e-12) & (np.abs(sl[images, truth]) <= 1e-12)
          & (np.abs(sat[images, truth] - 1.0) <= 1e-12)).all(axis=1)
    bad = int((~ok).sum())
    return PropertyResult("shared_optima", bad == 0, f"{len(census.optima)} optima, {bad} not shared")


def label_mass(n: int = 50, seed: int = 4) -> PropertyResult:
    """``sum_y p(y | x) = 1`` for random extractors on tasks where every vector admits a label."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        task = random_table_task(rng)
        inputs, _ = support_inputs(task)
        logits = rng.normal(0.0, 2.0, size=(len(inputs), task.concepts.size))
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        p = dpl_label_distribution(DistributionExtractor(task.concepts, inputs, probs),
                                   UniformReasoningLayer(task))
        worst = max(worst, float(np.max(np.abs(p.sum(axis=1) - 1.0))))
    return PropertyResult("label_mass", worst <= 1e-8, f"{n} tasks, max deviation {worst:.2e}")


def census_monotonicity() -> PropertyResult:
    """Adding a mitigation never increases the number of optima (XOR, reduced addition)."""
    problems = []
    for name in ("xor", "reduced-addition"):
        task = builtins.task(name)
        k = task.k
        rows = {
            "none": MitigationSpec((task,)),
            "rec": MitigationSpec((task,), reconstruction=True),
            "dis": MitigationSpec((task,), disentangled=True),
            "sup": MitigationSpec((task,), supervised_indices=frozenset({0})),
            "sup+rec": MitigationSpec((task,), supervised_indices=frozenset({0}), reconstruction=True),
            "full-sup": MitigationSpec((task,), supervised_indices=frozenset(range(k))),
        }
        counts = {r: count_brute_force(m, listing_ceiling=0).brute_force_count for r, m in rows.items()}
        for more, less in (("rec", "none"), ("dis", "none"), ("sup", "none"), ("sup+rec", "sup"),
                           ("sup+rec", "rec"), ("full-sup", "sup")):
            if counts[more] > counts[less]:
                problems.append(f"{name}: {more}={counts[more]} > {less}={counts[less]}")
        if counts["full-sup"] != 1:
            problems.append(f"{name}: full supervision leaves {counts['full-sup']} optima")
    return PropertyResult("census_monotonicity", not problems, "; ".join(problems) or "all rows ordered")


SUITES: dict[str, Callable[..., PropertyResult]] = {
    "oracle_equivalence": oracle_equivalence,
    "risk_bound": risk_bound,
    "gradients": gradient_suite,
    "convex_combinations": convex_combinations,
    "shared_optima": shared_optima,
    "label_mass": label_mass,
    "census_monotonicity": census_monotonicity,
}


def broken_closed_form(mit: MitigationSpec) -> int | None:
    """A deliberately wrong closed form, used to check the oracle suite can fail."""
    value = count_closed_form(mit)
    return None if value is None else value + 1


def run_all(only: list[str] | None = None, mutate: str | None = None,
            gradient_trials: int = 50) -> list[PropertyResult]:
    """Run the selected suites (all by default); ``mutate='closed-form'`` corrupts the oracle."""
    names = only or list(SUITES)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise SpecError(f"unknown suites: {', '.join(sorted(unknown))}")
    results = []
    for name in names:
        start = time.perf_counter()
        if name == "oracle_equivalence" and mutate == "closed-form":
            result = oracle_equivalence(closed_form=broken_closed_form)
        elif name == "gradients":
            result = gradient_suite(trials=gradient_trials)
        else:
            result = SUITES[name]()
        result.seconds = time.perf_counter() - start
        results.append(result)
    return results
