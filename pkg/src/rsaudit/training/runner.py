"""Training runs, convergence checks, extraction and multi-seed suites."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..census.alpha import AlphaMap
from ..census.count import (
    CensusResult,
    Classification,
    MitigationSpec,
    count_brute_force,
    is_det_opt,
)
from ..errors import CensusNotListed, SeedBudgetExhausted
from ..knowledge.task import TaskSpec
from .losses import MitigationLossConfig, Model, build_model, loss_and_grad, total_loss
from .metrics import concept_macro_f1, macro_f1
from .optim import OptimizerConfig

LIKELIHOOD_THRESHOLD = 0.95
SL_THRESHOLD = 0.05
HEAD_ACCURACY_THRESHOLD = 0.95
SATISFACTION_THRESHOLD = 0.95
SUITE_LISTING_CEILING = 100_000


@dataclass
class TrainRunResult:
    seed: int
    objective: str
    extractor_mode: str
    steps: int
    initial_loss: float
    final_loss: float
    components: dict[str, float]
    converged: bool
    fit: dict[str, float]
    alpha: AlphaMap
    classification: Classification | None
    label_f1: float
    concept_f1: float
    concept_pred: np.ndarray
    concept_true: np.ndarray
    trajectory: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "objective": self.objective,
            "extractor": self.extractor_mode,
            "steps": self.steps,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "components": dict(self.components),
            "converged": self.converged,
            "fit": dict(self.fit),
            "classification": str(self.classification) if self.classification else None,
            "label_f1": self.label_f1,
            "concept_f1": self.concept_f1,
            "extracted_map": [{"g": [int(v) for v in g], "c": [int(v) for v in c]}
                              for g, c in zip(self.alpha.domain, self.alpha.image)],
        }


def convergence(model: Model, mit: MitigationLossConfig) -> tuple[bool, dict[str, float]]:
    """Whether the objective is fitted, and the measured fit values.

    DPL: geometric-mean label likelihood ``exp(-nll)`` at least 0.95.
    SL: semantic loss at most 0.05 and label-head accuracy at least 0.95.
    LTN: mean satisfaction at least 0.95. Multi-task runs need every task.
    """
    _, comps = total_loss(model, MitigationLossConfig(sl_weight=mit.sl_weight))
    n = len(model.tasks)
    key = (lambda name, t: f"{name}[{t}]" if n > 1 else name)
    fit: dict[str, float] = {}
    ok = True
    if model.objective == "sl":
        preds = model.predict_labels()
    for t in range(n):
        if model.objective == "dpl":
            lik = math.exp(-comps[key("nll", t)])
            fit[key("likelihood", t)] = lik
            ok &= lik >= LIKELIHOOD_THRESHOLD
        elif model.objective == "sl":
            data = model.data[t]
            acc = float(((preds[t][data.rows] == data.labels) * data.weights).sum())
            sl = comps[key("semantic_loss", t)]
            fit[key("semantic_loss", t)] = sl
            fit[key("head_accuracy", t)] = acc
            ok &= sl <= SL_THRESHOLD and acc >= HEAD_ACCURACY_THRESHOLD
        else:
            sat = comps[key("satisfaction", t)]
            fit[key("satisfaction", t)] = sat
            ok &= sat >= SATISFACTION_THRESHOLD
    return bool(ok), fit


def census_for(tasks, extractor_mode: str, mit: MitigationLossConfig,
               listing_ceiling: int = SUITE_LISTING_CEILING, shared: bool | None = None) -> CensusResult:
    """The census matching a training configuration (same mitigations, same map family)."""
    spec = mitigation_spec_for(tasks, extractor_mode, mit, shared)
    return count_brute_force(spec, listing_ceiling=listing_ceiling)


def mitigation_spec_for(tasks, extractor_mode: str, mit: MitigationLossConfig,
                        shared: bool | None = None) -> MitigationSpec:
    sup = mit.supervised
    return MitigationSpec(
        tuple(tasks),
        supervised_indices=mit.supervised_indices if sup else frozenset(),
        supervised_set=mit.supervised_set if sup else None,
        supervised_values=mit.supervised_values if sup else frozenset(),
        reconstruction=mit.eta_rec > 0,
        disentangled=extractor_mode == "factorized",
        shared_table=shared,
    )


def classify(alpha: AlphaMap, census: CensusResult | None, spec: MitigationSpec | None = None,
             lookup: dict | None = None) -> Classification | None:
    """Classify an extracted map; falls back to a direct optimality check when unlisted."""
    if census is None:
        return None
    domain = np.asarray(census.domain, dtype=np.int64)
    if alpha.is_identity_on(domain):
        return Classification("ground_truth")
    if census.optima is None:
        if spec is None:
            raise CensusNotListed("census has no optimum list")
        # entangled check of the extracted table: same conditions, no index
        check = MitigationSpec(spec.tasks, spec.supervised_indices, spec.supervised_set,
                               spec.supervised_values, spec.reconstruction, False)
        return Classification("known_rs") if is_det_opt(alpha, check) else Classification("non_optimal")
    if lookup is not None:
        idx = lookup.get(alpha.apply(domain).tobytes())
        return Classification("known_rs", idx) if idx is not None else Classification("non_optimal")
    from ..census.count import classify_trained_map

    return classify_trained_map(alpha, census)


def train(tasks, objective: str, extractor_mode: str = "joint",
          mitigation: MitigationLossConfig | None = None, seed: int = 0,
          optimizer: OptimizerConfig | None = None, census: CensusResult | None = None,
          census_lookup: dict | None = None, shared: bool | None = None,
          keep_trajectory: bool = True) -> TrainRunResult:
    """Train one model from ``seed`` and report fit, extraction and classification."""
    if isinstance(tasks, TaskSpec):
        tasks = (tasks,)
    tasks = tuple(tasks)
    mit = mitigation or MitigationLossConfig()
    opt = optimizer or OptimizerConfig()
    rng = np.random.default_rng(seed)
    model = build_model(tasks, objective, extractor_mode, mit, rng, opt.init_sigma, shared)
    params = model.get_flat()
    stepper = opt.make(params.size)
    trajectory: list[float] = []
    components: dict[str, float] = {}
    steps = 0
    best, best_step = math.inf, 0
    for step in range(opt.steps + 1):
        loss, grad, components = loss_and_grad(model, mit)
        trajectory.append(loss)
        if loss < best - opt.min_improvement:
            best, best_step = loss, step
        if step == opt.steps:
            break
        # early stop: no improvement on the best loss for `patience` steps
        if step - best_step >= opt.patience:
            break
        params = stepper.step(params, grad)
        model.set_flat(params)
        steps += 1
    converged, fit = convergence(model, mit)
    alpha = model.extractor.extract()
    spec = mitigation_spec_for(tasks, extractor_mode, mit, shared) if census is not None else None
    classification = classify(alpha, census, spec, census_lookup)
    label_f1 = float(np.mean([macro_f1(t, p) for t, p in zip(model.true_labels(), model.predict_labels())]))
    pred = alpha.apply(model.inputs)
    return TrainRunResult(
        seed=seed, objective=objective, extractor_mode=extractor_mode, steps=steps,
        initial_loss=trajectory[0], final_loss=trajectory[-1], components=components,
        converged=converged, fit=fit, alpha=alpha, classification=classification,
        label_f1=label_f1, concept_f1=concept_macro_f1(model.inputs, pred),
        concept_pred=pred, concept_true=model.inputs.copy(),
        trajectory=trajectory if keep_trajectory else [],
    )


@dataclass(frozen=True)
class SuiteConfig:
    tasks: tuple[TaskSpec, ...]
    objective: str
    extractor_mode: str = "joint"
    mitigation: MitigationLossConfig = field(default_factory=MitigationLossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    n_converged: int = 30
    seed_base: int = 0
    seed_budget: int = 100
    listing_ceiling: int = SUITE_LISTING_CEILING
    shared: bool | None = None
    name: str = ""


@dataclass
class SuiteResult:
    config: SuiteConfig
    runs: list[TrainRunResult]
    census: CensusResult | None

    @property
    def converged(self) -> list[TrainRunResult]:
        return [r for r in self.runs if r.converged]

    def summary(self) -> dict:
        conv = self.converged
        kinds = {"ground_truth": 0, "known_rs": 0, "non_optimal": 0}
        for r in conv:
            if r.classification is not None:
                kinds[r.classification.kind] += 1
        n = len(conv)
        label = [r.label_f1 for r in conv]
        concept = [r.concept_f1 for r in conv]
        return {
            "runs": len(self.runs),
            "converged": n,
            "rejection_rate": 1.0 - n / len(self.runs) if self.runs else 0.0,
            "rs_rate": (n - kinds["ground_truth"]) / n if n else None,
            "classification_counts": kinds,
            "label_f1_mean": float(np.mean(label)) if n else None,
            "label_f1_std": float(np.std(label)) if n else None,
            "concept_f1_mean": float(np.mean(concept)) if n else None,
            "concept_f1_std": float(np.std(concept)) if n else None,
        }


def _suite_worker(args):
    config, seed, census, lookup = args
    return train(config.tasks, config.objective, config.extractor_mode, config.mitigation, seed,
                 config.optimizer, census, lookup, config.shared, keep_trajectory=False)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("RS_AUDIT_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(config: SuiteConfig, workers: int | None = None) -> SuiteResult:
    """Train seeds in order until ``n_converged`` runs have converged.

    Seeds are processed in batches of ``workers`` and results are consumed
    in seed order, so the outcome does not depend on the worker count.
    Raises ``SeedBudgetExhausted`` (carrying the partial result) when the
    budget runs out first.
    """
    workers = _workers() if workers is None else workers
    census = census_for(config.tasks, config.extractor_mode, config.mitigation,
                        config.listing_ceiling, config.shared)
    domain = np.asarray(census.domain, dtype=np.int64)
    lookup = ({opt.apply(domain).tobytes(): i for i, opt in enumerate(census.optima)}
              if census.optima is not None else None)
    result = SuiteResult(config, [], census)
    seeds = [config.seed_base + i for i in range(config.seed_budget)]
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in range(0, len(seeds), workers):
            batch = [(config, s, census, lookup) for s in seeds[start:start + workers]]
            runs = list(pool.map(_suite_worker, batch)) if pool else [_suite_worker(b) for b in batch]
            for run in runs:
                if len(result.converged) >= config.n_converged:
                    break
                result.runs.append(run)
            if len(result.converged) >= config.n_converged:
                return result
    finally:
        if pool:
            pool.shutdown()
    raise SeedBudgetExhausted(
        f"only {len(result.converged)} of {config.n_converged} runs converged "
        f"within {config.seed_budget} seeds", partial=result)
