from __future__ import annotations

import numpy as np
import pytest

from rsaudit import builtins
from rsaudit.autodiff import Tensor
from rsaudit.census import AlphaMap, MitigationSpec, count_brute_force
from rsaudit.errors import InfiniteLoss, InvalidConceptMass
from rsaudit.knowledge import parse_task
from rsaudit.predictors import (
    ConceptExtractor,
    DistributionExtractor,
    LTNGrounding,
    UniformReasoningLayer,
    dpl_label_distribution,
    dpl_nll,
    dpl_predict,
    ltn_predict_all,
    ltn_satisfaction,
    make_dataset,
    semantic_loss,
    support_inputs,
)
from rsaudit.predictors.ltn import CONNECTIVES


@pytest.fixture(scope="module")
def xor():
    return builtins.task("xor")


def identity(task):
    inputs, _ = support_inputs(task)
    return DistributionExtractor.deterministic(task.concepts, inputs, inputs)


def product_extractor(task, marginals):
    """Factorized distribution with the given per-dimension marginals for every input."""
    inputs, _ = support_inputs(task)
    grid = task.concepts.enumerate()
    probs = np.ones(len(grid))
    for j, p in enumerate(marginals):
        probs = probs * np.asarray(p)[grid[:, j]]
    return DistributionExtractor(task.concepts, inputs, np.tile(probs, (len(inputs), 1)))


class TestDPL:
    def test_identity_fits_perfectly(self, xor):
        ext = identity(xor)
        layer = UniformReasoningLayer(xor)
        assert dpl_nll(ext, layer, make_dataset(xor)) == 0.0
        np.testing.assert_array_equal(dpl_predict(ext, layer), ext.inputs.sum(axis=1) % 2)

    def test_uniform_extractor_is_uninformative(self, xor):
        ext = DistributionExtractor.uniform(xor.concepts, support_inputs(xor)[0])
        layer = UniformReasoningLayer(xor)
        np.testing.assert_allclose(dpl_label_distribution(ext, layer), 0.5)
        assert dpl_nll(ext, layer, make_dataset(xor)) == pytest.approx(np.log(2))

    def test_every_shortcut_is_optimal(self, xor):
        census = count_brute_force(MitigationSpec((xor,), reconstruction=True))
        layer = UniformReasoningLayer(xor)
        inputs = support_inputs(xor)[0]
        for alpha in census.optima[:20]:
            assert dpl_nll(DistributionExtractor.from_alpha(alpha, inputs), layer, make_dataset(xor)) == 0.0

    def test_explicit_pairs(self, xor):
        ext = identity(xor)
        layer = UniformReasoningLayer(xor)
        assert dpl_nll(ext, layer, [((0, 0, 1), 1), ((0, 1, 1), 0)]) == 0.0
        with pytest.raises(InfiniteLoss):
            dpl_nll(ext, layer, [((0, 0, 1), 0)])

    def test_uniform_over_admissible_labels(self):
        spec = parse_task("concept a : 2; label y : 3; rule a -> y != 0; support all; nondeterministic;")
        ext = identity(spec)
        np.testing.assert_allclose(dpl_label_distribution(ext, UniformReasoningLayer(spec), 1), [0, 0.5, 0.5])

    def test_mass_on_inconsistent_vectors_is_rejected(self):
        spec = parse_task("concept a, b : 3; label y : 3; rule y == a + b; support consistent;")
        inputs = support_inputs(spec)[0]
        images = inputs.copy()
        images[0] = (2, 2)
        ext = DistributionExtractor.deterministic(spec.concepts, inputs, images)
        with pytest.raises(InvalidConceptMass):
            dpl_label_distribution(ext, UniformReasoningLayer(spec))


class TestSemanticLoss:
    def test_zero_on_consistent_concepts(self, xor):
        ext = identity(xor)
        assert semantic_loss(ext, xor, 3, 0) == 0.0
        assert semantic_loss(ext, xor, 3, (0,)) == 0.0

    def test_uniform_costs_log_two(self, xor):
        ext = DistributionExtractor.uniform(xor.concepts, support_inputs(xor)[0])
        assert semantic_loss(ext, xor, 0, 1) == pytest.approx(np.log(2))

    def test_infinite_when_no_mass(self, xor):
        with pytest.raises(InfiniteLoss):
            semantic_loss(identity(xor), xor, 0, 1)


def xor_truth(p):
    x12 = p[0] + p[1] - 2 * p[0] * p[1]
    return x12 + p[2] - 2 * x12 * p[2]


class TestLTN:
    def test_identity_satisfies_true_label(self, xor):
        ext = identity(xor)
        for x, g in enumerate(ext.inputs):
            assert ltn_satisfaction(ext, xor, x, g.sum() % 2) == 1.0
            assert ltn_satisfaction(ext, xor, x, 1 - g.sum() % 2) == 0.0

    @pytest.mark.parametrize("p", [(0.3, 0.6, 0.9), (0.5, 0.5, 0.5), (0.1, 0.2, 0.7)])
    def test_product_logic_by_hand(self, xor, p):
        ext = product_extractor(xor, [(1 - v, v) for v in p])
        assert ltn_satisfaction(ext, xor, 0, 1) == pytest.approx(xor_truth(p))
        assert ltn_satisfaction(ext, xor, 0, 0) == pytest.approx(1 - xor_truth(p))

    def test_folding_equals_unfolded_grounding(self):
        spec = parse_task("concept a, b : 2; concept d : 3; label y, z : 2; "
                          "rule y <-> (a & !b | d == 2); rule z -> (a ^ b); rule (y | z) -> d != 0; "
                          "support all; nondeterministic;")
        rng = np.random.default_rng(0)
        marginals = [Tensor(rng.dirichlet(np.ones(m), size=5)) for m in spec.concepts.cardinalities]
        # wrapping each connective hides it from the constant-folding fast path
        plain = {k: (lambda f: lambda a, b: f(a, b))(f) for k, f in CONNECTIVES.items()}
        folded, unfolded = LTNGrounding(spec), LTNGrounding(spec, plain)
        for y in spec.labels:
            np.testing.assert_allclose(folded.satisfaction(marginals, y).data,
                                       unfolded.satisfaction(marginals, y).data, rtol=1e-12)

    def test_batched_equals_per_label(self, xor):
        rng = np.random.default_rng(1)
        inputs = support_inputs(xor)[0]
        ext = ConceptExtractor(xor.concepts, inputs, "joint", rng=rng)
        grounding = LTNGrounding(xor)
        data = make_dataset(xor)
        batched = grounding.satisfaction_for(ext.marginals(), data).data
        single = [grounding.satisfaction(ext.marginals(), xor.labels.vector_at(int(y))).data[r]
                  for r, y in zip(data.rows, data.labels)]
        np.testing.assert_allclose(batched, single)

    def test_multivalued_atom_grounding(self):
        spec = builtins.task("reduced-addition")
        p = [np.array([0.1, 0.2, 0.3, 0.4]), np.array([0.25, 0.25, 0.25, 0.25])]
        ext = product_extractor(spec, p)
        # the sum 3 holds for (0,3), (1,2), (2,1), (3,0): 1 - prod(1 - p1 p2)
        want = 1 - np.prod([1 - p[0][a] * p[1][3 - a] for a in range(4)])
        assert ltn_satisfaction(ext, spec, 0, 3) == pytest.approx(want)

    def test_table_knowledge(self):
        spec = parse_task("concept a, b : 2; label y : 2; map (0, 0) -> 0; map (0, 1) -> 1; "
                          "map (1, 0) -> 1; map (1, 1) -> 0; support all;")
        ext = identity(spec)
        for x, g in enumerate(ext.inputs):
            assert ltn_satisfaction(ext, spec, x, g.sum() % 2) == pytest.approx(1.0)

    def test_prediction_uses_most_likely_concepts(self, xor):
        ext = identity(xor)
        np.testing.assert_array_equal(ltn_predict_all(ext, xor), ext.inputs.sum(axis=1) % 2)


class TestExtractor:
    def test_joint_and_factorized_normalize(self, xor):
        inputs = support_inputs(xor)[0]
        for mode in ("joint", "factorized"):
            ext = ConceptExtractor(xor.concepts, inputs, mode, rng=np.random.default_rng(2))
            np.testing.assert_allclose(ext.probs().sum(axis=1), 1.0)
            for m in ext.marginals():
                np.testing.assert_allclose(m.data.sum(axis=1), 1.0)

    def test_factorized_marginals_multiply(self, xor):
        inputs = support_inputs(xor)[0]
        ext = ConceptExtractor(xor.concepts, inputs, "factorized", rng=np.random.default_rng(3))
        grid = xor.concepts.enumerate()
        marg = [m.data for m in ext.marginals()]
        want = np.prod([marg[j][:, grid[:, j]] for j in range(3)], axis=0)
        np.testing.assert_allclose(ext.probs(), want)

    def test_shared_table_reads_every_dimension(self, xor):
        inputs = support_inputs(xor)[0]
        ext = ConceptExtractor(xor.concepts, inputs, "factorized", rng=np.random.default_rng(4))
        assert ext.shared and len(ext.parameters) == 1
        table = np.argmax(ext.parameters[0].data, axis=1)
        np.testing.assert_array_equal(ext.extract().apply(inputs), table[inputs])

    def test_extract_matches_argmax(self, xor):
        inputs = support_inputs(xor)[0]
        ext = ConceptExtractor(xor.concepts, inputs, "joint", rng=np.random.default_rng(5))
        np.testing.assert_array_equal(ext.extract().apply(inputs), ext.argmax_vectors())

    def test_deterministic_from_alpha(self, xor):
        inputs = support_inputs(xor)[0]
        alpha = AlphaMap.entangled(xor.concepts, inputs, inputs[::-1])
        ext = DistributionExtractor.from_alpha(alpha, inputs)
        np.testing.assert_array_equal(ext.argmax_vectors(), inputs[::-1])
