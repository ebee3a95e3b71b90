import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boxte.data import Quadruple
from boxte.errors import ConstructionError
from boxte.expressiveness import (classify_universe, construct_all_true_base, construct_lemma1,
                                  construct_lemma2, dim_index_l1, dim_index_l2, lemma1_dim, lemma1_make_false,
                                  lemma2_dim, lemma2_interval, lemma2_make_true, random_tkg_facts,
                                  run_battery, static_make_false, universe)


def test_dim_index_examples():
    assert dim_index_l1(0, 0, 0, (2, 2, 3)) == 0
    assert dim_index_l1(1, 1, 2, (2, 2, 3)) == 11
    with pytest.raises(IndexError):
        dim_index_l1(2, 0, 0, (2, 2, 3))
    with pytest.raises(IndexError):
        dim_index_l2(0, 0, 2, (2, 2, 3))


@pytest.mark.parametrize("sizes", list(itertools.product([1, 2, 3], repeat=3)))
def test_dim_indices_are_bijections(sizes):
    E, R, T = sizes
    l1 = {dim_index_l1(r, e, t, sizes) for r in range(R) for e in range(E) for t in range(T)}
    assert l1 == set(range(lemma1_dim(sizes)))
    l2 = {dim_index_l2(h, r, t, sizes) for h in range(E) for r in range(R) for t in range(E)}
    assert l2 == set(range(lemma2_dim(sizes)))


def test_base_is_all_true():
    assert classify_universe(construct_all_true_base((1, 1, 1), 1)).perfect
    base = construct_all_true_base((2, 1, 2), lemma1_dim((2, 1, 2)))
    report = classify_universe(base)
    assert report.total == 8 and report.perfect
    lo, hi = base.box(0, "head")
    assert np.all(lo == -0.5) and np.all(hi == 0.5)


def test_make_only_fact_false():
    model = construct_all_true_base((1, 1, 1), 1)
    lemma1_make_false(model, (0, 0, 0, 0), check=True)
    assert classify_universe(model, []).perfect


def test_make_false_preserves_every_other_fact():
    sizes = (2, 2, 2)
    model = construct_all_true_base(sizes, lemma1_dim(sizes))
    first, second = Quadruple(0, 1, 1, 0), Quadruple(1, 1, 1, 0)
    lemma1_make_false(model, first, check=True)
    assert not model.holds(first)
    assert all(model.holds(q) for q in universe(sizes) if q != first)
    lemma1_make_false(model, second, check=True)
    assert classify_universe(model, set(universe(sizes)) - {first, second}).perfect


def test_make_false_rejects_small_c_and_false_targets():
    model = construct_all_true_base((2, 1, 1), lemma1_dim((2, 1, 1)))
    with pytest.raises(ConstructionError):
        lemma1_make_false(model, (0, 0, 1, 0), c=0.4)  # tail must move past u = 0.5
    lemma1_make_false(model, (0, 0, 1, 0))
    with pytest.raises(ConstructionError):
        lemma1_make_false(model, (0, 0, 1, 0))


def test_c_insensitive_above_threshold():
    sizes = (2, 2, 2)
    rng = np.random.default_rng(4)
    facts = {q for q in universe(sizes) if rng.random() < 0.5}
    default = construct_lemma1(facts, sizes)
    doubled = construct_all_true_base(sizes, lemma1_dim(sizes))
    for q in universe(sizes):
        if q in facts:
            continue
        p, dim = doubled.params, dim_index_l1(q.relation, q.tail, q.time, sizes)
        tail = p.entity_base[q.tail, dim] + p.entity_bump[q.head, dim] + p.time_bank[q.time, 0, dim]
        lemma1_make_false(doubled, q, c=2 * max(p.tail_corner_2[q.relation, dim] - tail, 0.25))
    assert classify_universe(doubled, facts).perfect and classify_universe(default, facts).perfect


def test_lemma1_edge_cases():
    sizes = (2, 2, 2)
    full = construct_lemma1(universe(sizes), sizes)
    assert full.steps == 0 and classify_universe(full).perfect
    empty = construct_lemma1([], sizes)
    assert empty.steps == len(universe(sizes)) and classify_universe(empty, []).perfect
    assert empty.dim == 2 * 2 * 2


def test_lemma1_battery_small():
    rng = np.random.default_rng(0)
    for _ in range(50):
        sizes = (3, 2, 2)
        facts = {q for q in universe(sizes) if rng.random() < 0.5}
        assert classify_universe(construct_lemma1(facts, sizes), facts).perfect


def test_lemma2_all_static_facts_need_no_make_true_steps():
    sizes = (2, 2, 3)
    facts = {q for q in universe(sizes) if (q.head + q.relation + q.tail) % 2 == 0}
    model = construct_lemma2(facts, sizes)
    static_false = len({q[:3] for q in universe(sizes)} - {q[:3] for q in facts})
    assert model.steps == static_false
    assert classify_universe(model, facts).perfect and model.dim == 2 * 4


def test_lemma2_single_timestamp_fact():
    sizes = (1, 1, 2)
    model = construct_lemma2({Quadruple(0, 0, 0, 0)}, sizes)
    assert model.holds((0, 0, 0, 0)) and not model.holds((0, 0, 0, 1))


def test_lemma2_c_strictly_inside_interval():
    sizes = (2, 1, 2)
    model = construct_all_true_base(sizes, lemma2_dim(sizes), "lemma2")
    static_make_false(model, 0, 0, 1, check=True)
    target = (0, 0, 1, 1)
    low, high = lemma2_interval(model, target)
    for bad in (low, high, high + 1):
        with pytest.raises(ConstructionError):
            lemma2_make_true(model.__class__(model.params.copy(), model.sizes, model.mode), target, c=bad)
    c = lemma2_make_true(model, target, check=True)
    assert low < c < high
    assert model.holds(target) and not model.holds((0, 0, 1, 0))


def test_lemma2_battery_small():
    rng = np.random.default_rng(1)
    for _ in range(50):
        sizes = (2, 2, 3)
        facts = {q for q in universe(sizes) if rng.random() < 0.6}
        assert classify_universe(construct_lemma2(facts, sizes), facts).perfect


def test_construction_is_deterministic():
    sizes = (3, 2, 2)
    facts = set(universe(sizes)[::3])
    for build in (construct_lemma1, construct_lemma2):
        a, b = build(facts, sizes), build(facts, sizes)
        assert all(np.array_equal(x, y) for (_, x), (_, y) in zip(a.params.tensors(), b.params.tensors()))


def test_perturbation_mismatches_are_localized():
    sizes = (3, 1, 2)
    model = construct_all_true_base(sizes, lemma1_dim(sizes))
    model.params.entity_base[2] += 100.0
    report = classify_universe(model)
    assert report.total == 18 and report.mismatches
    assert all(2 in (q.head, q.tail) for q, _, _ in report.mismatches)


@given(st.integers(0, 2**32 - 1))
def test_every_step_preserves_other_facts(seed):
    facts, sizes = random_tkg_facts(np.random.default_rng(seed), 2, 2, 2)
    assert classify_universe(construct_lemma1(facts, sizes, check_each_step=True), facts).perfect
    assert classify_universe(construct_lemma2(facts, sizes, check_each_step=True), facts).perfect


def test_battery_summary():
    results = run_battery(10, seed=3)
    assert [r.summary() for r in results] == ["lemma1: 10/10 perfect", "lemma2: 10/10 perfect"]
