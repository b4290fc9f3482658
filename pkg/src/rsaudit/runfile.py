"""Experiment run files (YAML or JSON).

Grammar (all keys optional except ``tasks`` and ``objectives``)::

    name: xor-q1                 # used in file names
    tasks: [xor]                 # built-in names or paths to task files;
                                 # several entries train one multi-task model
    objectives: [dpl, sl, ltn]
    extractors: [joint]          # joint | factorized
    shared_table: null           # factorized: one value table for all dimensions
    mitigation:
      eta_sup: 0.0
      eta_ent: 0.0
      eta_rec: 0.0
      supervised_indices: [1, 2] # 1-based positions or concept names
      supervised_set: support    # "support" or a list of ground-truth vectors
      supervised_values: [4, 9]  # concept values observed wherever they occur
      mtl_weights: null
      sl_weight: 2.0
    optimizer: {kind: momentum, lr: 0.1, momentum: 0.9, steps: 5000,
                patience: 100, min_improvement: 1.0e-9, init_sigma: 0.5}
    seeds: {base: 0, budget: 100, target: 30}
    listing_ceiling: 100000
    output: out/xor              # relative to the run file's directory
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from . import builtins
from .errors import SpecError
from .knowledge.dsl import load_task
from .knowledge.task import TaskSpec
from .training.losses import OBJECTIVES, MitigationLossConfig
from .training.optim import OptimizerConfig
from .training.runner import SUITE_LISTING_CEILING, SuiteConfig

EXTRACTORS = ("joint", "factorized")
_TOP_KEYS = {"name", "tasks", "objectives", "extractors", "shared_table", "mitigation", "optimizer",
             "seeds", "listing_ceiling", "output"}


@dataclass
class RunFile:
    name: str
    task_refs: list[str]
    tasks: tuple[TaskSpec, ...]
    objectives: list[str]
    extractors: list[str]
    mitigation: MitigationLossConfig
    optimizer: OptimizerConfig
    seed_base: int = 0
    seed_budget: int = 100
    n_converged: int = 30
    listing_ceiling: int = SUITE_LISTING_CEILING
    shared_table: bool | None = None
    output: Path = field(default_factory=lambda: Path("rsaudit-out"))

    def suites(self, seed_offset: int = 0) -> list[SuiteConfig]:
        out = []
        for extractor in self.extractors:
            for objective in self.objectives:
                out.append(SuiteConfig(
                    tasks=self.tasks, objective=objective, extractor_mode=extractor,
                    mitigation=self.mitigation, optimizer=self.optimizer,
                    n_converged=self.n_converged, seed_base=self.seed_base + seed_offset,
                    seed_budget=self.seed_budget, listing_ceiling=self.listing_ceiling,
                    shared=self.shared_table, name=f"{self.name}-{objective}-{extractor}"))
        return out


def resolve_tasks(refs: list[str], base: Path | None = None) -> tuple[TaskSpec, ...]:
    """Built-in names or task-file paths (relative paths resolve against ``base``)."""
    specs: list[TaskSpec] = []
    for ref in refs:
        if ref in builtins.names():
            specs.extend(builtins.load(ref))
            continue
        path = Path(ref)
        if not path.is_absolute() and base is not None:
            path = base / path
        if not path.exists():
            raise SpecError(f"task {ref!r} is neither a built-in ({', '.join(builtins.names())}) nor a file")
        specs.append(load_task(path))
    if not specs:
        raise SpecError("run file lists no tasks")
    first = specs[0]
    for s in specs[1:]:
        if s.concepts != first.concepts or s.support != first.support:
            raise SpecError("tasks trained together must share concepts and support")
    return tuple(specs)


def concept_indices(items, spec: TaskSpec) -> frozenset[int]:
    """0-based dimensions from 1-based positions or concept names."""
    out = set()
    for item in items:
        if isinstance(item, str) and not item.strip().isdigit():
            if item not in spec.concepts.names:
                raise SpecError(f"unknown concept {item!r}")
            out.add(spec.concepts.names.index(item))
            continue
        pos = int(item)
        if not 1 <= pos <= spec.concepts.k:
            raise SpecError(f"concept position {pos} outside 1..{spec.concepts.k}")
        out.add(pos - 1)
    return frozenset(out)


def _section(raw, name: str, cls) -> dict:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise SpecError(f"{name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise SpecError(f"unknown {name} keys: {', '.join(sorted(unknown))}")
    return raw


def mitigation_from(raw, spec: TaskSpec) -> MitigationLossConfig:
    raw = dict(_section(raw, "mitigation", MitigationLossConfig))
    if "supervised_indices" in raw:
        raw["supervised_indices"] = concept_indices(raw["supervised_indices"] or [], spec)
    sset = raw.get("supervised_set")
    if sset == "support":
        raw["supervised_set"] = None
    elif sset is not None:
        raw["supervised_set"] = tuple(tuple(int(v) for v in g) for g in sset)
    if raw.get("supervised_values") is not None:
        raw["supervised_values"] = frozenset(int(v) for v in raw["supervised_values"])
    if raw.get("mtl_weights") is not None:
        raw["mtl_weights"] = tuple(float(w) for w in raw["mtl_weights"])
    try:
        return MitigationLossConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"invalid mitigation: {exc}") from exc


def parse_runfile(data: dict, base: Path | None = None) -> RunFile:
    if not isinstance(data, dict):
        raise SpecError("a run file must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise SpecError(f"unknown run-file keys: {', '.join(sorted(unknown))}")
    refs = data.get("tasks")
    if isinstance(refs, str):
        refs = [refs]
    if not refs:
        raise SpecError("run file needs 'tasks'")
    tasks = resolve_tasks([str(r) for r in refs], base)
    objectives = data.get("objectives") or []
    objectives = [objectives] if isinstance(objectives, str) else list(objectives)
    if not objectives or any(o not in OBJECTIVES for o in objectives):
        raise SpecError(f"objectives must be a non-empty subset of {OBJECTIVES}")
    extractors = data.get("extractors", ["joint"])
    extractors = [extractors] if isinstance(extractors, str) else list(extractors)
    if not extractors or any(e not in EXTRACTORS for e in extractors):
        raise SpecError(f"extractors must be a non-empty subset of {EXTRACTORS}")
    try:
        optimizer = OptimizerConfig(**_section(data.get("optimizer"), "optimizer", OptimizerConfig))
    except (TypeError, ValueError) as exc:
        raise SpecError(f"invalid optimizer: {exc}") from exc
    seeds = data.get("seeds") or {}
    unknown = set(seeds) - {"base", "budget", "target"}
    if unknown:
        raise SpecError(f"unknown seeds keys: {', '.join(sorted(unknown))}")
    budget, target = int(seeds.get("budget", 100)), int(seeds.get("target", 30))
    if budget < 1 or target < 1:
        raise SpecError("seed budget and target must be positive")
    output = Path(data.get("output", "rsaudit-out"))
    if not output.is_absolute() and base is not None:
        output = base / output
    return RunFile(
        name=str(data.get("name", "run")), task_refs=[str(r) for r in refs], tasks=tasks,
        objectives=objectives, extractors=extractors,
        mitigation=mitigation_from(data.get("mitigation"), tasks[0]), optimizer=optimizer,
        seed_base=int(seeds.get("base", 0)), seed_budget=budget, n_converged=target,
        listing_ceiling=int(data.get("listing_ceiling", SUITE_LISTING_CEILING)),
        shared_table=data.get("shared_table"), output=output,
    )


def load_runfile(path) -> RunFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read run file {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise SpecError(f"{path}: {exc}") from exc
    return parse_runfile(data, path.parent)
