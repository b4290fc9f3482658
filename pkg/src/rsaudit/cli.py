"""Command-line front end: ``rsaudit census | train | verify | spec``.

Exit codes: 0 success, 2 invalid specification or run file, 3 seed budget
exhausted, 4 property failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, builtins, report
from .census.blocks import block_report
from .census.count import DEFAULT_LISTING_CEILING, CensusResult, MitigationSpec, count_brute_force
from .errors import AuditError, MalformedFormula, SeedBudgetExhausted, SpecError
from .knowledge.compiler import block_factorization, compile_knowledge
from .knowledge.dsl import load_task, to_dsl
from .knowledge.task import TaskSpec
from .runfile import concept_indices, load_runfile, resolve_tasks
from .training.metrics import confusion_csv, confusion_per_dimension, confusion_per_vector
from .training.runner import SuiteResult, mitigation_spec_for, run_suite

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_BUDGET = 3
EXIT_PROPERTY = 4

log = logging.getLogger("rsaudit")

NOTES = [
    "label rules of one task are combined with the product t-norm in the fuzzy-logic objective",
    "reconstruction uses the exact expectation over concept vectors, not samples",
    "trained maps are extracted by per-input argmax with lexicographic ties",
]


# -- census ------------------------------------------------------------------------

def census_row(label: str, result: CensusResult) -> dict:
    row = {
        "row": label,
        "brute_force": result.brute_force_count,
        "closed_form": result.closed_form_count,
        "closed_form_literal": result.closed_form_literal,
        "agrees": None if result.closed_form_count is None
        else result.closed_form_count == result.brute_force_count,
        "contains_identity": result.contains_identity,
        "components": list(result.components),
        "optima": None,
    }
    if result.optima is not None:
        domain = np.asarray(result.domain, dtype=np.int64)
        row["optima"] = {"listed": len(result.optima),
                         "digest": report.digest(opt.apply(domain) for opt in result.optima)}
    return row


def _row_flags(row: str) -> set[str]:
    flags = set(row.split("+")) - {"none"}
    unknown = flags - {"sup", "rec", "dis"}
    if unknown:
        raise SpecError(f"unknown census row {row!r}; combine none, sup, rec, dis with '+'")
    return flags


_ORDER = ("sup", "rec", "dis")


def _canonical(flags: set[str]) -> str:
    return "+".join(f for f in _ORDER if f in flags) or "none"


def monotone(rows: list[dict]) -> bool:
    """More mitigations never give more optima than a subset of them."""
    by_flags = {frozenset(_row_flags(r["row"])): r["brute_force"] for r in rows}
    return all(by_flags[a] <= by_flags[b] for a in by_flags for b in by_flags if b < a)


def census_section(tasks: tuple[TaskSpec, ...], names: list[str], rows: list[str], sup: dict,
                   listing_ceiling: int, shared: bool | None) -> dict:
    out_rows = []
    for row in rows:
        flags = _row_flags(row)
        if "sup" in flags and not (sup["indices"] or sup["values"]):
            raise SpecError("a 'sup' row needs --sup-indices or --sup-values")
        mit = MitigationSpec(
            tasks,
            supervised_indices=sup["indices"] if "sup" in flags else frozenset(),
            supervised_set=sup["set"] if "sup" in flags else None,
            supervised_values=sup["values"] if "sup" in flags else frozenset(),
            reconstruction="rec" in flags, disentangled="dis" in flags, shared_table=shared)
        label = ("mtl+" if len(tasks) > 1 else "") + _canonical(flags)
        log.info("census %s %s", "+".join(names), label)
        out_rows.append(census_row(label, count_brute_force(mit, listing_ceiling=listing_ceiling)))
    return {"tasks": names, "rows": out_rows,
            "monotone": monotone([dict(r, row=r["row"].removeprefix("mtl+")) for r in out_rows])}


def _parse_vectors(text: str) -> tuple[tuple[int, ...], ...]:
    """``"0,1;1,3"`` -> ``((0, 1), (1, 3))``."""
    return tuple(tuple(int(v) for v in part.split(",")) for part in text.split(";") if part.strip())


def cmd_census(args) -> int:
    if args.task == "bdd-blocks":
        result = {"kind": "census", "census": [], "blocks": block_report()}
        blocks = result["blocks"]
        if not blocks["all_reproduced"]:
            missing = [k for k, ok in blocks["reproduced"].items() if not ok]
            print(f"warning: reference class size(s) not reproduced: {', '.join(missing)}; "
                  "see variant_comparison", file=sys.stderr)
        return _emit(result, args)
    specs = resolve_tasks([args.task], Path.cwd())
    names = [s.name or args.task for s in specs]
    sup = {
        "indices": concept_indices(args.sup_indices.split(","), specs[0]) if args.sup_indices else frozenset(),
        "values": frozenset(int(v) for v in args.sup_values.split(",")) if args.sup_values else frozenset(),
        "set": _parse_vectors(args.sup_set) if args.sup_set else None,
    }
    if args.rows:
        rows = args.rows.split(",")
    else:
        rows = ["none", "rec", "dis"]
        if sup["indices"] or sup["values"]:
            rows += ["sup", "sup+rec", "sup+dis"]
        extra = {f for f, on in (("rec", args.reconstruction), ("dis", args.disentangled)) if on}
        if extra:
            rows = [_canonical(_row_flags(r) | extra) for r in rows]
            rows = list(dict.fromkeys(rows))
    groups = [(tuple(specs), names)] if args.mtl or len(specs) == 1 else [((s,), [n]) for s, n in zip(specs, names)]
    sections = [census_section(t, n, rows, sup, args.listing_ceiling, args.shared_table) for t, n in groups]
    return _emit({"kind": "census", "census": sections}, args)


# -- train -------------------------------------------------------------------------

def _suite_json(result: SuiteResult, exhausted: bool) -> dict:
    cfg = result.config
    return {
        "name": cfg.name, "objective": cfg.objective, "extractor": cfg.extractor_mode,
        "budget_exhausted": exhausted,
        "census_row": mitigation_spec_for(cfg.tasks, cfg.extractor_mode, cfg.mitigation, cfg.shared).label(),
        "summary": result.summary(),
        "runs": [r.to_json() for r in result.runs],
    }


def _write_confusions(result: SuiteResult, out: Path) -> list[str]:
    runs = result.converged
    if not runs:
        return []
    true = np.concatenate([r.concept_true for r in runs])
    pred = np.concatenate([r.concept_pred for r in runs])
    space = result.config.tasks[0].concepts
    written = []
    for name, mat in zip(space.names, confusion_per_dimension(true, pred, space.cardinalities)):
        values = list(range(mat.shape[0]))
        path = out / f"confusion_{result.config.name}_{name}.csv"
        path.write_text(confusion_csv(values, values, mat), encoding="utf-8")
        written.append(path.name)
    rows, cols, mat = confusion_per_vector(true, pred)
    path = out / f"confusion_{result.config.name}_vectors.csv"
    path.write_text(confusion_csv(rows, cols, mat), encoding="utf-8")
    written.append(path.name)
    return written


def _mitigation_json(mit) -> dict:
    return {
        "eta_sup": mit.eta_sup, "eta_ent": mit.eta_ent, "eta_rec": mit.eta_rec,
        "supervised_indices": sorted(i + 1 for i in mit.supervised_indices),
        "supervised_set": None if mit.supervised_set is None else [list(g) for g in mit.supervised_set],
        "supervised_values": sorted(mit.supervised_values),
        "mtl_weights": None if mit.mtl_weights is None else list(mit.mtl_weights),
        "sl_weight": mit.sl_weight,
    }


def cmd_train(args) -> int:
    run = load_runfile(args.runfile)
    out = Path(args.output) if args.output else run.output
    out.mkdir(parents=True, exist_ok=True)
    exit_code = EXIT_OK
    suites, census_sections, files = [], {}, []
    for cfg in run.suites(seed_offset=args.seed_base):
        log.info("suite %s: seeds %d..%d", cfg.name, cfg.seed_base, cfg.seed_base + cfg.seed_budget - 1)
        try:
            result, exhausted = run_suite(cfg), False
        except SeedBudgetExhausted as exc:
            print(f"error: {cfg.name}: {exc}", file=sys.stderr)
            result, exhausted = exc.partial, True
            exit_code = EXIT_BUDGET
        suite = _suite_json(result, exhausted)
        suites.append(suite)
        if result.census is not None and suite["census_row"] not in census_sections:
            census_sections[suite["census_row"]] = census_row(suite["census_row"], result.census)
        files += _write_confusions(result, out)
        logs = out / "logs" / cfg.name
        logs.mkdir(parents=True, exist_ok=True)
        for r in result.runs:
            (logs / f"seed_{r.seed}.json").write_text(report.dumps(r.to_json()), encoding="utf-8")
        s = suite["summary"]
        print(f"{cfg.name}: {s['converged']}/{s['runs']} converged, rs_rate={s['rs_rate']}, "
              f"label_f1={s['label_f1_mean']}, concept_f1={s['concept_f1_mean']}")
    rows = list(census_sections.values())
    body = {
        "kind": "train",
        "name": run.name,
        "tasks": run.task_refs,
        "config": {
            "objectives": run.objectives, "extractors": run.extractors,
            "mitigation": _mitigation_json(run.mitigation),
            "optimizer": dataclasses.asdict(run.optimizer),
            "seeds": {"base": run.seed_base + args.seed_base, "budget": run.seed_budget,
                      "target": run.n_converged},
            "listing_ceiling": run.listing_ceiling,
        },
        "census": [{"tasks": [t.name or "" for t in run.tasks], "rows": rows,
                    "monotone": monotone([dict(r, row=r["row"].removeprefix("mtl+")) for r in rows])}],
        "training": suites,
        "confusion_files": sorted(files),
        "notes": NOTES,
    }
    path = report.write(body, out / "report.json")
    print(f"report written to {path}")
    return exit_code


# -- verify ------------------------------------------------------------------------

def cmd_verify(args) -> int:
    from . import verify

    results = verify.run_all(args.only, args.mutate, args.gradient_trials)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}  ({r.seconds:.1f}s)")
    ok = all(r.passed for r in results)
    print("all properties pass" if ok else "some properties FAILED")
    if args.output:
        report.write({"kind": "verify", "properties": [r.to_json() for r in results],
                      "status": "pass" if ok else "fail"}, args.output)
    return EXIT_OK if ok else EXIT_PROPERTY


# -- spec ----------------------------------------------------------------------------

def _load_spec(ref: str) -> list[TaskSpec]:
    if ref in builtins.names():
        return builtins.load(ref)
    if not Path(ref).exists():
        raise SpecError(f"{ref!r} is neither a built-in ({', '.join(builtins.names())}) nor a file")
    return [load_task(ref)]


def spec_json(spec: TaskSpec) -> dict:
    ck = compile_knowledge(spec)
    return {
        "name": spec.name,
        "concepts": [{"name": n, "values": m} for n, m in zip(spec.concepts.names, spec.concepts.cardinalities)],
        "labels": [{"name": n, "values": m} for n, m in zip(spec.labels.names, spec.labels.cardinalities)],
        "deterministic": spec.a2_deterministic,
        "support": {"mode": spec.support_mode, "size": len(spec.support),
                    "vectors": [list(g) for g in spec.support.vectors],
                    "weights": None if spec.support.weights is None else list(spec.support.weights)},
        "blocks": [{"concepts": [spec.concepts.names[i] for i in c], "labels": [spec.labels.names[i] for i in y]}
                   for c, y in block_factorization(spec)],
        "class_sizes": [{"label": list(y), "size": n} for y, n in sorted(ck.class_sizes().items())],
        "dsl": to_dsl(spec),
    }


def cmd_spec(args) -> int:
    if args.spec_command == "list":
        for name in builtins.names():
            print(name)
        return EXIT_OK
    specs = _load_spec(args.spec)
    if args.spec_command == "check":
        for spec in specs:
            ck = compile_knowledge(spec)
            sizes = ", ".join(f"{list(y)}:{n}" for y, n in sorted(ck.class_sizes().items()) if n)
            print(f"{spec.name or args.spec}: {spec.concepts.k} concepts, {spec.labels.k} labels, "
                  f"{len(spec.support)} supported vectors, {len(ck.blocks)} blocks; class sizes {sizes}")
        print("ok")
        return EXIT_OK
    data = [spec_json(s) for s in specs]
    text = json.dumps(report.normalize(data if len(data) > 1 else data[0]), sort_keys=True, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- plumbing ----------------------------------------------------------------------

def _emit(body: dict, args) -> int:
    body = dict(body, schema_version=report.SCHEMA_VERSION)
    report.validate(body)
    text = report.dumps(body)
    if getattr(args, "output", None):
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsaudit", description="Audit reasoning shortcuts of symbolic tasks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("census", help="count deterministic optima per mitigation row")
    p.add_argument("task", help="built-in name (see 'spec list'), 'bdd-blocks', or a task file")
    p.add_argument("--rows", help="comma-separated rows such as none,rec,dis,sup+rec (default: none,rec,dis)")
    p.add_argument("--mtl", action="store_true", help="count the tasks of a bundle jointly")
    p.add_argument("--sup-indices", help="supervised concepts: 1-based positions or names, comma-separated")
    p.add_argument("--sup-values", help="supervised concept values, comma-separated")
    p.add_argument("--sup-set", help="supervised ground-truth vectors, e.g. '0,0,0;1,1,1' (default: support)")
    p.add_argument("--reconstruction", action="store_true", help="add reconstruction to every row")
    p.add_argument("--disentangled", action="store_true", help="add disentanglement to every row")
    p.add_argument("--shared-table", action=argparse.BooleanOptionalAction, default=None,
                   help="disentangled maps share one value table (default: when cardinalities agree)")
    p.add_argument("--listing-ceiling", type=int, default=DEFAULT_LISTING_CEILING,
                   help="list optima only when there are at most this many")
    p.add_argument("-o", "--output", help="also write the JSON report here")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("train", help="train multi-seed suites from a run file")
    p.add_argument("runfile")
    p.add_argument("--seed-base", type=int, default=0, help="offset added to every seed")
    p.add_argument("-o", "--output", help="output directory (default: the run file's 'output')")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--only", nargs="+", help="run only these suites")
    p.add_argument("--mutate", choices=["closed-form"], help="corrupt a component to check the suite fails")
    p.add_argument("--gradient-trials", type=int, default=50)
    p.add_argument("-o", "--output", help="write a JSON summary here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("spec", help="inspect task specifications")
    spec_sub = p.add_subparsers(dest="spec_command", required=True)
    q = spec_sub.add_parser("check", help="parse and compile a task")
    q.add_argument("spec")
    q = spec_sub.add_parser("export-json", help="print a task as JSON")
    q.add_argument("spec")
    q.add_argument("-o", "--output")
    spec_sub.add_parser("list", help="list built-in tasks")
    p.set_defaults(func=cmd_spec)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except MalformedFormula as exc:
        where = f"{exc.path}: " if getattr(exc, "path", None) else ""
        print(f"error: {where}{exc}", file=sys.stderr)
        return EXIT_SPEC
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
