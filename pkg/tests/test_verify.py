from __future__ import annotations

import numpy as np
import pytest

from rsaudit import verify
from rsaudit.errors import SpecError
from rsaudit.knowledge import compile_knowledge


class TestPropertySuites:
    def test_oracle_equivalence_small(self):
        result = verify.oracle_equivalence(n_random=5)
        assert result.passed, result.detail

    def test_broken_closed_form_is_caught(self):
        result = verify.oracle_equivalence(n_random=2, closed_form=verify.broken_closed_form)
        assert not result.passed
        assert "mismatches" in result.detail

    def test_risk_bound_small(self):
        result = verify.risk_bound(n_tasks=10)
        assert result.passed, result.detail

    def test_gradients_small(self):
        result = verify.gradient_suite(trials=2)
        assert result.passed, result.detail

    def test_convex_combinations_small(self):
        assert verify.convex_combinations(pairs=3).passed

    def test_label_mass(self):
        assert verify.label_mass(n=10).passed

    def test_census_monotonicity(self):
        assert verify.census_monotonicity().passed

    def test_run_all_rejects_unknown_suite(self):
        with pytest.raises(SpecError):
            verify.run_all(["no-such-suite"])


class TestHelpers:
    @pytest.mark.parametrize("seed", range(5))
    def test_random_tasks_are_valid_and_small(self, seed):
        task = verify.random_table_task(np.random.default_rng(seed))
        assert task.concepts.size <= 12
        assert task.labels.size <= 6
        assert compile_knowledge(task).is_deterministic()

    def test_nondeterministic_random_task(self):
        task = verify.random_table_task(np.random.default_rng(0), deterministic=False)
        assert not task.a2_deterministic

    def test_relative_error_floor(self):
        err = verify.relative_error(np.array([1e-11, 1.0]), np.array([0.0, 1.0 + 1e-6]))
        assert err[0] < verify.GRADIENT_TOLERANCE
        assert err[1] == pytest.approx(1e-6, rel=1e-3)
