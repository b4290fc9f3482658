from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsaudit import builtins
from rsaudit.census import (
    AlphaMap,
    MitigationSpec,
    classify_trained_map,
    count_brute_force,
    count_closed_form,
    count_closed_form_literal,
    is_det_opt,
    support_components,
)
from rsaudit.errors import CensusNotListed, DimensionMismatch, SearchSpaceTooLarge, SpecError
from rsaudit.knowledge import parse_task


# -- a literal oracle: enumerate every map and check the definition ------------

def tiny_task(cards, n_labels, table, support):
    names = [f"c{i + 1}" for i in range(len(cards))]
    lines = [f"concept {n} : {m};" for n, m in zip(names, cards)] + [f"label y : {n_labels};"]
    for g, y in sorted(table.items()):
        lines.append(f"map ({', '.join(map(str, g))}) -> ({y});")
    lines.append("support " + ", ".join("(" + ", ".join(map(str, g)) + ")" for g in support) + ";")
    return parse_task("\n".join(lines))


def oracle_count(cards, table, support, pinned_dims=(), reconstruction=False,
                 disentangled=False, shared=False):
    """Distinct maps on the support satisfying every condition, by exhaustive enumeration."""
    space = list(itertools.product(*(range(m) for m in cards)))

    def ok(images):
        for g, c in zip(support, images):
            if table.get(c) != table[g]:
                return False
            if any(c[i] != g[i] for i in pinned_dims):
                return False
        return not reconstruction or len(set(images)) == len(images)

    found = set()
    if not disentangled:
        for images in itertools.product(space, repeat=len(support)):
            if ok(images):
                found.add(images)
        return len(found)
    if shared:
        families = [(t,) * len(cards) for t in itertools.product(range(cards[0]), repeat=cards[0])]
    else:
        families = itertools.product(*(list(itertools.product(range(m), repeat=m)) for m in cards))
    for tables in families:
        images = tuple(tuple(tables[j][g[j]] for j in range(len(cards))) for g in support)
        if ok(images):
            found.add(images)
    return len(found)


@st.composite
def tiny_instances(draw):
    cards = draw(st.sampled_from([(2,), (3,), (4,), (2, 2), (2, 3), (3, 2)]))
    n_labels = draw(st.integers(2, 3))
    space = list(itertools.product(*(range(m) for m in cards)))
    table = {g: draw(st.integers(0, n_labels - 1)) for g in space}
    support = draw(st.lists(st.sampled_from(space), min_size=1, max_size=4, unique=True))
    return cards, n_labels, table, sorted(support)


class TestOracleAgreement:
    @settings(max_examples=60, deadline=None)
    @given(tiny_instances(), st.booleans())
    def test_entangled(self, inst, reconstruction):
        cards, n_labels, table, support = inst
        mit = MitigationSpec((tiny_task(cards, n_labels, table, support),), reconstruction=reconstruction)
        assert count_brute_force(mit, workers=1).count == oracle_count(
            cards, table, support, reconstruction=reconstruction)

    @settings(max_examples=60, deadline=None)
    @given(tiny_instances(), st.booleans())
    def test_supervised(self, inst, reconstruction):
        cards, n_labels, table, support = inst
        dims = frozenset(range(len(cards)))
        mit = MitigationSpec((tiny_task(cards, n_labels, table, support),), supervised_indices={0},
                             reconstruction=reconstruction)
        assert count_brute_force(mit, workers=1).count == oracle_count(
            cards, table, support, pinned_dims=(0,), reconstruction=reconstruction)
        full = MitigationSpec((tiny_task(cards, n_labels, table, support),), supervised_indices=dims)
        assert count_brute_force(full, workers=1).count == 1

    @settings(max_examples=60, deadline=None)
    @given(tiny_instances(), st.booleans(), st.booleans())
    def test_disentangled(self, inst, shared, reconstruction):
        cards, n_labels, table, support = inst
        shared = shared and len(set(cards)) == 1
        mit = MitigationSpec((tiny_task(cards, n_labels, table, support),), disentangled=True,
                             shared_table=shared, reconstruction=reconstruction)
        assert count_brute_force(mit, workers=1).count == oracle_count(
            cards, table, support, disentangled=True, shared=shared, reconstruction=reconstruction)

    @settings(max_examples=40, deadline=None)
    @given(tiny_instances())
    def test_every_listed_optimum_is_an_optimum(self, inst):
        cards, n_labels, table, support = inst
        mit = MitigationSpec((tiny_task(cards, n_labels, table, support),))
        result = count_brute_force(mit, workers=1)
        assert result.contains_identity
        assert len(result.optima) == result.count
        assert all(is_det_opt(a, mit) for a in result.optima)


class TestXor:
    def test_no_mitigation_matches_closed_form(self):
        result = count_brute_force(MitigationSpec((builtins.task("xor"),)), listing_ceiling=0)
        assert result.count == 65_536 == 4**4 * 4**4
        assert result.closed_form_count == result.count
        assert result.optima is None

    def test_reconstruction(self):
        result = count_brute_force(MitigationSpec((builtins.task("xor"),), reconstruction=True))
        assert result.count == math.factorial(4) ** 2 == result.closed_form_count

    def test_disentangled_is_unique(self):
        result = count_brute_force(MitigationSpec((builtins.task("xor"),), disentangled=True))
        assert result.count == 1
        assert result.optima[0].is_identity_on(result.domain)

    def test_whole_vector_supervision_closed_form(self):
        xor = builtins.task("xor")
        supervised = ((0, 0, 0), (1, 1, 1))
        mit = MitigationSpec((xor,), supervised_indices={0, 1, 2}, supervised_set=supervised)
        result = count_brute_force(mit, listing_ceiling=0)
        # one supervised member in each class of four: 4**3 * 4**3
        assert result.count == count_closed_form(mit) == 4**3 * 4**3
        assert count_closed_form_literal(mit) == 3**4 * 3**4

    def test_supervision_with_reconstruction_closed_form(self):
        mit = MitigationSpec((builtins.task("xor"),), supervised_indices={0, 1, 2},
                             supervised_set=((0, 0, 0),), reconstruction=True)
        assert count_brute_force(mit).count == count_closed_form(mit) == math.factorial(3) * math.factorial(4)


class TestDigitTasks:
    def test_evenodd_disentangled_matches_parity_oracle(self):
        spec = builtins.task("evenodd")
        result = count_brute_force(MitigationSpec((spec,), disentangled=True))
        # independent check: a shared digit table f with f(a) + f(b) = a + b on every pair,
        # solved separately on the even and the odd digits (they never meet)
        total = 1
        for parity in (0, 1):
            digits = list(range(parity, 10, 2))
            pairs = np.array([g for g in spec.support.vectors if g[0] % 2 == parity])
            choices = np.array(list(itertools.product(range(10), repeat=len(digits))))
            f = np.zeros((len(choices), 10), dtype=np.int64)
            f[:, digits] = choices
            ok = np.all(f[:, pairs[:, 0]] + f[:, pairs[:, 1]] == pairs.sum(axis=1), axis=1)
            total *= len({tuple(row[digits]) for row in f[ok]})
        assert result.count == total == 36
        assert result.components == [6, 6]

    def test_evenodd_value_supervision_collapses(self):
        mit = MitigationSpec((builtins.task("evenodd"),), supervised_values={4, 9}, disentangled=True)
        assert count_brute_force(mit).count == 1

    def test_addmul(self):
        add, mul = builtins.load("addmul")
        assert count_brute_force(MitigationSpec((add,), disentangled=True)).count == 2
        mul_result = count_brute_force(MitigationSpec((mul,), disentangled=True))
        assert mul_result.count == 20
        for alpha in mul_result.optima:
            assert alpha.tables[0][0] == 0 and alpha.tables[0][1] in (1, 3)
        assert count_brute_force(MitigationSpec((add, mul), disentangled=True)).count == 1
        assert count_brute_force(MitigationSpec((builtins.task("addmul-conj"),), disentangled=True)).count == 1

    def test_components_are_independent_groups(self):
        comps = support_components(MitigationSpec((builtins.task("evenodd"),), disentangled=True))
        assert len(comps) == 2
        assert {v % 2 for _, v in comps[0]} != {v % 2 for _, v in comps[1]}


@pytest.fixture(scope="module")
def census():
    return count_brute_force(MitigationSpec((builtins.task("xor"),), reconstruction=True))


class TestListingAndClassification:
    def test_listing_is_lexicographic(self, census):
        space = census.optima[0].space
        keys = [tuple(space.index_of(a.apply(census.domain)).tolist()) for a in census.optima]
        assert keys == sorted(keys)
        assert len(set(keys)) == census.count

    def test_identity_is_ground_truth(self, census):
        identity = AlphaMap.identity(census.optima[0].space)
        assert classify_trained_map(identity, census).kind == "ground_truth"

    def test_known_shortcut_is_indexed(self, census):
        alpha = census.optima[5]
        label = classify_trained_map(alpha, census)
        assert label.kind == "known_rs" and label.index == 5
        assert str(label) == "known_rs(5)"

    def test_non_optimal_map(self, census):
        space = census.optima[0].space
        constant = AlphaMap.entangled(space, census.domain, [(0, 0, 0)] * len(census.domain))
        assert classify_trained_map(constant, census).kind == "non_optimal"

    def test_unlisted_census_refuses_classification(self):
        result = count_brute_force(MitigationSpec((builtins.task("xor"),)), listing_ceiling=10)
        assert result.optima is None
        with pytest.raises(CensusNotListed):
            classify_trained_map(AlphaMap.identity(builtins.task("xor").concepts), result)


class TestErrors:
    def test_mismatched_spaces(self):
        with pytest.raises(DimensionMismatch):
            MitigationSpec((builtins.task("xor"), builtins.task("addition")))

    def test_supervised_index_out_of_range(self):
        with pytest.raises(SpecError):
            MitigationSpec((builtins.task("xor"),), supervised_indices={3})

    def test_ceiling(self):
        with pytest.raises(SearchSpaceTooLarge):
            count_brute_force(MitigationSpec((builtins.task("addition"),)), ceiling=10)

    def test_alpha_space_mismatch(self):
        alpha = AlphaMap.identity(builtins.task("addition").concepts)
        with pytest.raises(DimensionMismatch):
            is_det_opt(alpha, MitigationSpec((builtins.task("xor"),)))
