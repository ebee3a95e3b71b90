"""Executable full-expressiveness constructions.

Two constructions build a BoxTE configuration that classifies every quadruple
of a small universe exactly as a given TKG does:

* ``lemma1`` (d = |R||T||E|): start with every fact true, then make each
  absent fact false by pushing its tail point above the tail box in a
  dimension reserved for that (relation, tail, time) triple.
* ``lemma2`` (d = |R||E|^2): build a static configuration that is true exactly
  on the facts holding at *all* timestamps, then use time bumps to make the
  remaining facts true at their own timestamps.

Both use k = 1 and every relation scalar fixed to one, so ``time_bank[l, 0]``
is directly the time bump of timestamp ``l``. Boxes are stored with
``corner_1 = lower`` and ``corner_2 = upper``; no tanh bounding is applied.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data import Quadruple, TemporalKG
from .errors import ConstructionError
from .model import ModelConfig, ModelParams, memberships

Sizes = tuple[int, int, int]  # (|E|, |R|, |T|)


@dataclass
class OracleModel:
    params: ModelParams
    sizes: Sizes
    mode: str
    steps: int = 0

    @property
    def config(self) -> ModelConfig:
        return ModelConfig(dim=self.params.dim, k=1, bounded=False)

    @property
    def dim(self) -> int:
        return self.params.dim

    # k = 1, alpha = 1: the time bump of timestamp l is time_bank[l, 0]
    @property
    def time_bumps(self) -> np.ndarray:
        return self.params.time_bank[:, 0, :]

    def box(self, relation: int, position: str) -> tuple[np.ndarray, np.ndarray]:
        return (getattr(self.params, f"{position}_corner_1")[relation],
                getattr(self.params, f"{position}_corner_2")[relation])

    def holds(self, q: Sequence[int]) -> bool:
        return bool(memberships(self.params, self.config, [tuple(q)])[0])


@dataclass
class ClassificationReport:
    total: int
    mismatches: list[tuple[Quadruple, bool, bool]] = field(default_factory=list)

    @property
    def perfect(self) -> bool:
        return not self.mismatches


def dim_index_l1(relation: int, entity: int, time: int, sizes: Sizes) -> int:
    """Dimension reserved for (relation, tail entity, timestamp)."""
    num_entities, num_relations, num_timestamps = sizes
    if not (0 <= relation < num_relations and 0 <= entity < num_entities and 0 <= time < num_timestamps):
        raise IndexError(f"index ({relation}, {entity}, {time}) outside sizes {sizes}")
    return relation * num_entities * num_timestamps + entity * num_timestamps + time


def dim_index_l2(head: int, relation: int, tail: int, sizes: Sizes) -> int:
    """Dimension reserved for the static fact (head, relation, tail)."""
    num_entities, num_relations, _ = sizes
    if not (0 <= head < num_entities and 0 <= relation < num_relations and 0 <= tail < num_entities):
        raise IndexError(f"index ({head}, {relation}, {tail}) outside sizes {sizes}")
    return head * num_entities * num_relations + relation * num_entities + tail


def lemma1_dim(sizes: Sizes) -> int:
    num_entities, num_relations, num_timestamps = sizes
    return num_relations * num_timestamps * num_entities


def lemma2_dim(sizes: Sizes) -> int:
    num_entities, num_relations, _ = sizes
    return num_relations * num_entities ** 2


def universe(sizes: Sizes) -> list[Quadruple]:
    num_entities, num_relations, num_timestamps = sizes
    return [Quadruple(h, r, t, tau) for h, r, t, tau in itertools.product(
        range(num_entities), range(num_relations), range(num_entities), range(num_timestamps))]


def construct_all_true_base(sizes: Sizes, d: int, mode: str = "lemma1") -> OracleModel:
    """Zero entities, bumps and time bumps; unit boxes centred at the origin."""
    num_entities, num_relations, num_timestamps = sizes
    zeros = lambda *shape: np.zeros(shape)  # noqa: E731
    params = ModelParams(
        entity_base=zeros(num_entities, d), entity_bump=zeros(num_entities, d),
        head_corner_1=np.full((num_relations, d), -0.5), head_corner_2=np.full((num_relations, d), 0.5),
        tail_corner_1=np.full((num_relations, d), -0.5), tail_corner_2=np.full((num_relations, d), 0.5),
        alpha=np.ones((num_relations, 1)), time_bank=zeros(num_timestamps, 1, d),
    )
    return OracleModel(params, tuple(sizes), mode)


def classify_universe(model: OracleModel, reference: Iterable[Sequence[int]] | None = None
                      ) -> ClassificationReport:
    """Classify every quadruple by box membership and diff against ``reference``.

    ``reference=None`` means the full universe is expected to be true.
    """
    quads = universe(model.sizes)
    got = memberships(model.params, model.config, quads)
    expected_set = None if reference is None else {Quadruple(*q) for q in reference}
    report = ClassificationReport(len(quads))
    for q, g in zip(quads, got):
        want = True if expected_set is None else q in expected_set
        if bool(g) != want:
            report.mismatches.append((q, want, bool(g)))
    return report


def _truth_table(model: OracleModel) -> np.ndarray:
    return memberships(model.params, model.config, universe(model.sizes))


def _grow_boxes(params: ModelParams, dim: int, relation: int, c: float) -> None:
    """Time-dependent construction: box growth at one dimension (target relation's tail grows down only)."""
    for x in range(params.num_relations):
        params.head_corner_1[x, dim] -= 2 * c
        params.head_corner_2[x, dim] += c
        params.tail_corner_1[x, dim] -= 2 * c
        if x != relation:
            params.tail_corner_2[x, dim] += c


def _make_false_at(model: OracleModel, target: Quadruple, dim: int, c: float | None,
                   shift_times: bool) -> float:
    p = model.params
    i, j, k, l = target
    tail_value = p.entity_base[k, dim] + p.entity_bump[i, dim] + p.time_bank[l, 0, dim]
    upper = p.tail_corner_2[j, dim]
    required = upper - tail_value  # C must exceed this
    if c is None:
        c = max(required, 0.0) + 1.0
    elif not (c > required and c > 0):
        raise ConstructionError(f"C = {c} does not push the tail above the box (need C > {required})")
    p.entity_bump[i, dim] += c                               # step 1
    others = np.arange(p.num_entities) != k
    p.entity_base[others, dim] -= c                          # step 2
    if shift_times:
        times = np.arange(p.time_bank.shape[0]) != l
        p.time_bank[times, 0, dim] -= c                      # step 3
    _grow_boxes(p, dim, j, c)                                # steps 4-5
    model.steps += 1
    return c


def _assert_only_target_flipped(model, before, target, expect_after):
    after = _truth_table(model)
    quads = universe(model.sizes)
    pos = quads.index(Quadruple(*target))
    changed = np.nonzero(before != after)[0]
    bad = [quads[c] for c in changed if c != pos]
    if bad or bool(after[pos]) != expect_after:
        raise ConstructionError(f"step on {tuple(target)} changed other facts {bad[:5]} "
                                f"or left target at {bool(after[pos])}")


def lemma1_make_false(model: OracleModel, target: Sequence[int], c: float | None = None,
                      check: bool = False) -> float:
    """Make ``target`` false without touching any other truth value.

    Step 3 shifts every *other* time bump down by C in the target dimension
    (the evident intent; the written formula assigns to an entity base).
    Returns the C used; by default C = (required minimum) + 1.
    """
    target = Quadruple(*target)
    if not model.holds(target):
        raise ConstructionError(f"target {tuple(target)} is already false")
    before = _truth_table(model) if check else None
    dim = dim_index_l1(target.relation, target.tail, target.time, model.sizes)
    c = _make_false_at(model, target, dim, c, shift_times=True)
    if check:
        _assert_only_target_flipped(model, before, target, expect_after=False)
    return c


def _facts_and_sizes(tkg, sizes):
    if isinstance(tkg, TemporalKG):
        return set(tkg.filter_index), tkg.sizes if sizes is None else tuple(sizes)
    if sizes is None:
        raise ValueError("sizes are required when passing a plain fact collection")
    return {Quadruple(*q) for q in tkg}, tuple(sizes)


def construct_lemma1(tkg, sizes: Sizes | None = None, check_each_step: bool = False) -> OracleModel:
    facts, sizes = _facts_and_sizes(tkg, sizes)
    model = construct_all_true_base(sizes, lemma1_dim(sizes), "lemma1")
    for q in universe(sizes):
        if q not in facts:
            lemma1_make_false(model, q, check=check_each_step)
    return model


def static_make_false(model: OracleModel, head: int, relation: int, tail: int,
                      check: bool = False) -> float:
    """Make-false step for a static fact: time bumps stay pinned at zero."""
    target = Quadruple(head, relation, tail, 0)
    before = _truth_table(model) if check else None
    dim = dim_index_l2(head, relation, tail, model.sizes)
    c = _make_false_at(model, target, dim, None, shift_times=False)
    if check:
        after = _truth_table(model)
        quads = universe(model.sizes)
        flipped = {quads[i][:3] for i in np.nonzero(before != after)[0]}
        if flipped - {(head, relation, tail)}:
            raise ConstructionError(f"static step on {(head, relation, tail)} changed {flipped}")
    return c


def lemma2_interval(model: OracleModel, target: Sequence[int]) -> tuple[float, float]:
    """Open interval of admissible C for the make-true step."""
    i, j, k, l = target
    p = model.params
    dim = dim_index_l2(i, j, k, model.sizes)
    value = p.entity_base[k, dim] + p.entity_bump[i, dim] + p.time_bank[l, 0, dim]
    return value - p.tail_corner_2[j, dim], value - p.tail_corner_1[j, dim]


def lemma2_make_true(model: OracleModel, target: Sequence[int], c: float | None = None,
                     check: bool = False) -> float:
    """Shift the target's time bump down by C and grow every box down by C."""
    target = Quadruple(*target)
    low, high = lemma2_interval(model, target)
    if c is None:
        c = 0.5 * (low + high)
    if not low < c < high:
        raise ConstructionError(f"C = {c} outside the open interval ({low}, {high})")
    before = _truth_table(model) if check else None
    p = model.params
    dim = dim_index_l2(target.head, target.relation, target.tail, model.sizes)
    p.time_bank[target.time, 0, dim] -= c
    p.head_corner_1[:, dim] -= c
    p.tail_corner_1[:, dim] -= c
    model.steps += 1
    if check:
        _assert_only_target_flipped(model, before, target, expect_after=True)
    return c


def construct_lemma2(tkg, sizes: Sizes | None = None, check_each_step: bool = False) -> OracleModel:
    facts, sizes = _facts_and_sizes(tkg, sizes)
    num_entities, num_relations, num_timestamps = sizes
    model = construct_all_true_base(sizes, lemma2_dim(sizes), "lemma2")
    always = {(h, r, t) for h, r, t in itertools.product(range(num_entities), range(num_relations),
                                                         range(num_entities))
              if all(Quadruple(h, r, t, tau) in facts for tau in range(num_timestamps))}
    for h, r, t in itertools.product(range(num_entities), range(num_relations), range(num_entities)):
        if (h, r, t) not in always:
            static_make_false(model, h, r, t, check=check_each_step)
    for q in sorted(facts):
        if q[:3] not in always:
            lemma2_make_true(model, q, check=check_each_step)
    return model


def random_tkg_facts(rng: np.random.Generator, max_entities: int = 3, max_relations: int = 2,
                     max_timestamps: int = 3, density: float | None = None) -> tuple[set[Quadruple], Sizes]:
    sizes = (int(rng.integers(1, max_entities + 1)), int(rng.integers(1, max_relations + 1)),
             int(rng.integers(1, max_timestamps + 1)))
    p = rng.uniform(0.1, 0.9) if density is None else density
    facts = {q for q in universe(sizes) if rng.random() < p}
    return facts, sizes


@dataclass(frozen=True)
class BatteryResult:
    mode: str
    trials: int
    perfect: int
    failures: tuple = ()

    def summary(self) -> str:
        return f"{self.mode}: {self.perfect}/{self.trials} perfect"


def run_battery(trials: int = 50, max_entities: int = 3, max_relations: int = 2, max_timestamps: int = 3,
                seed: int = 0, check_each_step: bool = False) -> list[BatteryResult]:
    """Both constructions on ``trials`` random TKGs; counts perfect classifications."""
    rng = np.random.default_rng(seed)
    tkgs = [random_tkg_facts(rng, max_entities, max_relations, max_timestamps) for _ in range(trials)]
    results = []
    for mode, build in (("lemma1", construct_lemma1), ("lemma2", construct_lemma2)):
        failures = []
        for n, (facts, sizes) in enumerate(tkgs):
            try:
                model = build(facts, sizes, check_each_step=check_each_step)
                report = classify_universe(model, facts)
                if not report.perfect:
                    failures.append((n, sizes, report.mismatches[:5]))
            except ConstructionError as exc:
                failures.append((n, sizes, str(exc)))
        results.append(BatteryResult(mode, trials, trials - len(failures), tuple(failures)))
    return results
