"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL`` line with the measured
values, then asserts. Targets and tolerances are pinned below; they are
never relaxed to make a check pass.
"""

from __future__ import annotations

import math
import time

import pytest

from rsaudit import builtins, verify
from rsaudit.census import MitigationSpec, count_brute_force
from rsaudit.census import blocks
from rsaudit.errors import SeedBudgetExhausted
from rsaudit.training import MitigationLossConfig, SuiteConfig, run_suite

# -- pinned targets ---------------------------------------------------------------
XOR_NONE = 65_536
XOR_DIS = 1
XOR_SECONDS = 10.0

EVENODD_DIS = 49
EVENODD_BLOCKS = [7, 7]
EVENODD_SECONDS = 60.0

ADDMUL_ADD, ADDMUL_MUL, ADDMUL_MTL = 2, 8, 1
ADDMUL_SECONDS = 10.0

ORACLE_RANDOM_TASKS = 50
ORACLE_SECONDS = 120.0

Q1_CONVERGED = 30
Q1_SEED_BUDGET = 200
Q1_JOINT_MIN_RS = 0.9
Q1_FACTORIZED_RS = 0.0
Q1_SECONDS = 15 * 60.0

COLLAPSE_VALUES = frozenset({4, 9})
COLLAPSE_CONVERGED = 10
COLLAPSE_MIN_GROUND_TRUTH = 0.8

BOUND_TASKS = 100
BOUND_SECONDS = 30.0

CONVEX_PAIRS = 10

GRADIENT_TRIALS = 50
GRADIENT_MAX_ERROR = 1e-4
GRADIENT_SECONDS = 60.0

QUALITATIVE_CONVERGED = 10
QUALITATIVE_MAX_CONCEPT_F1 = 50.0
QUALITATIVE_MIN_LABEL_F1 = 80.0

SEED_BUDGET = 100


def report(capsys, number: int, passed: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def census(*tasks, **flags):
    return count_brute_force(MitigationSpec(tuple(tasks), **flags), listing_ceiling=0)


def suite(config: SuiteConfig):
    """Run a suite; an exhausted budget still yields the runs that converged."""
    try:
        return run_suite(config), False
    except SeedBudgetExhausted as exc:
        return exc.partial, True


class TestAcceptance:
    def test_criterion_01_xor_census(self, capsys):
        xor = builtins.task("xor")
        start = time.perf_counter()
        none = census(xor)
        dis = census(xor, disentangled=True)
        seconds = time.perf_counter() - start
        closed = math.prod(n**n for n in (4, 4))
        passed = (none.count == XOR_NONE == none.closed_form_count == closed
                  and dis.count == XOR_DIS and seconds < XOR_SECONDS)
        report(capsys, 1, passed, f"none={none.count} closed_form={none.closed_form_count} "
                                  f"dis={dis.count} ({seconds:.1f}s < {XOR_SECONDS:.0f}s)")
        assert passed

    def test_criterion_02_evenodd_disentangled(self, capsys):
        result, seconds = timed(census, builtins.task("evenodd"), disentangled=True)
        blocks_multiply = math.prod(result.components) == result.count
        passed = (result.count == EVENODD_DIS and result.components == EVENODD_BLOCKS
                  and seconds < EVENODD_SECONDS)
        report(capsys, 2, passed,
               f"dis={result.count} (target {EVENODD_DIS}); blocks={result.components} "
               f"(target {EVENODD_BLOCKS}); count is the product of blocks: {blocks_multiply} "
               f"({seconds:.1f}s)")
        assert passed

    def test_criterion_03_addmul(self, capsys):
        add, mul = builtins.load("addmul")
        start = time.perf_counter()
        counts = (census(add, disentangled=True).count, census(mul, disentangled=True).count,
                  census(add, mul, disentangled=True).count)
        seconds = time.perf_counter() - start
        checks = {"add": counts[0] == ADDMUL_ADD, "mul": counts[1] == ADDMUL_MUL, "mtl": counts[2] == ADDMUL_MTL}
        passed = all(checks.values()) and seconds < ADDMUL_SECONDS
        report(capsys, 3, passed,
               f"add={counts[0]} (target {ADDMUL_ADD}) mul={counts[1]} (target {ADDMUL_MUL}) "
               f"mtl={counts[2]} (target {ADDMUL_MTL}); failing: "
               f"{[k for k, ok in checks.items() if not ok] or 'none'} ({seconds:.1f}s)")
        assert passed

    def test_criterion_04_driving_blocks(self, capsys):
        result = blocks.block_report()
        fs = result["forward_stop"]["class_sizes"]
        comparison = "; ".join(
            f"{c['variant']}: (1,0)={c['class_sizes'].get('(1,0)')} (0,1)={c['class_sizes'].get('(0,1)')}"
            for c in result["variant_comparison"])
        turns = [sorted(result[s]["class_sizes"].values()) for s in ("turn_left", "turn_right")]
        passed = result["all_reproduced"]
        report(capsys, 4, passed,
               f"forward (1,0)={fs['(1,0)']} (target {blocks.REFERENCE_FORWARD}), "
               f"stop (0,1)={fs['(0,1)']} (target {blocks.REFERENCE_STOP}), turns={turns} "
               f"(target {sorted(blocks.REFERENCE_TURN)}); encoding comparison: {comparison}")
        # the comparison must always be emitted, whatever the outcome
        assert len(result["variant_comparison"]) == len(builtins.BDD_FORWARD_STOP_VARIANTS)
        assert passed

    def test_criterion_05_closed_form_oracle(self, capsys):
        result, seconds = timed(verify.oracle_equivalence, n_random=ORACLE_RANDOM_TASKS)
        passed = result.passed and seconds < ORACLE_SECONDS
        report(capsys, 5, passed, f"{result.detail} ({seconds:.1f}s < {ORACLE_SECONDS:.0f}s)")
        assert passed

    def test_criterion_06_xor_training(self, capsys):
        xor = builtins.task("xor")
        start = time.perf_counter()
        rates, parts = {}, []
        for mode in ("joint", "factorized"):
            for objective in ("dpl", "sl", "ltn"):
                config = SuiteConfig((xor,), objective, mode, n_converged=Q1_CONVERGED,
                                     seed_budget=Q1_SEED_BUDGET)
                result, exhausted = suite(config)
                s = result.summary()
                rates[(objective, mode)] = (s["rs_rate"], s["converged"])
                parts.append(f"{objective}/{mode} rs={s['rs_rate']} converged={s['converged']}/{s['runs']}"
                             + (" budget-exhausted" if exhausted else ""))
        seconds = time.perf_counter() - start
        joint_ok = all(r is not None and r >= Q1_JOINT_MIN_RS and n == Q1_CONVERGED
                       for (o, m), (r, n) in rates.items() if m == "joint")
        fact_ok = all(r == Q1_FACTORIZED_RS and n == Q1_CONVERGED
                      for (o, m), (r, n) in rates.items() if m == "factorized")
        passed = joint_ok and fact_ok and seconds < Q1_SECONDS
        report(capsys, 6, passed, "; ".join(parts) + f" ({seconds / 60:.1f} min < {Q1_SECONDS / 60:.0f} min)")
        assert passed

    def test_criterion_07_supervision_collapse(self, capsys):
        evenodd = builtins.task("evenodd")
        count = census(evenodd, supervised_values=COLLAPSE_VALUES, disentangled=True).count
        mit = MitigationLossConfig(eta_sup=1.0, supervised_values=COLLAPSE_VALUES)
        result, _ = suite(SuiteConfig((evenodd,), "dpl", "factorized", mitigation=mit,
                                      n_converged=COLLAPSE_CONVERGED, seed_budget=SEED_BUDGET))
        s = result.summary()
        share = s["classification_counts"]["ground_truth"] / max(s["converged"], 1)
        passed = (count == 1 and s["converged"] == COLLAPSE_CONVERGED
                  and share >= COLLAPSE_MIN_GROUND_TRUTH)
        report(capsys, 7, passed, f"census={count}; ground_truth {s['classification_counts']['ground_truth']}"
                                  f"/{s['converged']} converged (>= {COLLAPSE_MIN_GROUND_TRUTH:.0%})")
        assert passed

    def test_criterion_08_risk_bound(self, capsys):
        result, seconds = timed(verify.risk_bound, n_tasks=BOUND_TASKS)
        passed = result.passed and seconds < BOUND_SECONDS
        report(capsys, 8, passed, f"{result.detail} ({seconds:.1f}s < {BOUND_SECONDS:.0f}s)")
        assert passed

    def test_criterion_09_convex_combinations(self, capsys):
        result = verify.convex_combinations(pairs=CONVEX_PAIRS)
        report(capsys, 9, result.passed, result.detail)
        assert result.passed

    def test_criterion_10_gradients(self, capsys):
        result, seconds = timed(verify.gradient_suite, trials=GRADIENT_TRIALS)
        passed = result.passed and seconds < GRADIENT_SECONDS and verify.GRADIENT_TOLERANCE == GRADIENT_MAX_ERROR
        report(capsys, 10, passed, f"{result.detail} ({seconds:.1f}s < {GRADIENT_SECONDS:.0f}s)")
        assert passed

    def test_criterion_11_evenodd_shortcuts(self, capsys):
        result, _ = suite(SuiteConfig((builtins.task("evenodd"),), "dpl", "factorized",
                                      n_converged=QUALITATIVE_CONVERGED, seed_budget=SEED_BUDGET))
        s = result.summary()
        passed = (s["converged"] == QUALITATIVE_CONVERGED
                  and s["concept_f1_mean"] < QUALITATIVE_MAX_CONCEPT_F1
                  and s["label_f1_mean"] > QUALITATIVE_MIN_LABEL_F1)
        report(capsys, 11, passed,
               f"concept F1={s['concept_f1_mean']:.1f} (< {QUALITATIVE_MAX_CONCEPT_F1:.0f}), "
               f"label F1={s['label_f1_mean']:.1f} (> {QUALITATIVE_MIN_LABEL_F1:.0f}) over "
               f"{s['converged']} converged runs; classes {s['classification_counts']}")
        assert passed


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
