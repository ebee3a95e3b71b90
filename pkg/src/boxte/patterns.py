"""Cross-time inference patterns and relational-scalar inspection.

A pattern is captured by shaping *time-induced* boxes (relation boxes shifted
by minus the relation's time bump at a given timestamp), which static entity
points are tested against:

    hierarchy         r1@t1 => r2@t2        induced r1@t1 inside induced r2@t2
    intersection      r1@t1 & r2@t2 => r3@t3  induced r3@t3 = intersection
    inversion         r1@t1 <=> r2@t2 (swapped args)  head/tail boxes swapped
    mutual-exclusion  r1@t1 & r2@t2 => false  induced head boxes disjoint
    rigid             r@t for all t or none   alpha_r = 0

Composition is not representable and has no builder.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConstructionError, SpecError
from .model import Box, ModelConfig, ModelParams, memberships, time_bump, time_induced_box

ARITY = {
    "rigid": (1, None),
    "hierarchy": (2, 2),
    "intersection": (3, 3),
    "inversion": (2, 2),
    "mutual-exclusion": (2, 2),
}
KINDS = tuple(ARITY)

# Equality / containment checks on corners tolerate the rounding of x + bump - bump.
CORNER_TOL = 1e-12


@dataclass(frozen=True)
class PatternSpec:
    kind: str
    relations: tuple[int, ...]
    timestamps: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ARITY:
            raise SpecError(f"unknown pattern kind {self.kind!r}")
        n_rel, n_time = ARITY[self.kind]
        object.__setattr__(self, "relations", tuple(int(r) for r in self.relations))
        object.__setattr__(self, "timestamps", tuple(int(t) for t in self.timestamps))
        if len(self.relations) != n_rel:
            raise SpecError(f"{self.kind} needs {n_rel} relations, got {len(self.relations)}")
        if n_time is not None and len(self.timestamps) != n_time:
            raise SpecError(f"{self.kind} needs {n_time} timestamps, got {len(self.timestamps)}")
        if len(set(self.relations)) != len(self.relations):
            raise SpecError("pattern relations must be distinct")


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witness: object = None
    body_count: int | None = None


def _set_induced(params: ModelParams, relation: int, position: str, time: int, box: Box) -> None:
    """Place the raw box so that its time-induced version at ``time`` is ``box``."""
    bump = time_bump(relation, time, params)
    getattr(params, f"{position}_corner_1")[relation] = box.lower + bump
    getattr(params, f"{position}_corner_2")[relation] = box.upper + bump


def _check_params(params: ModelParams, spec: PatternSpec) -> None:
    if params.alpha is None:
        raise ConstructionError("pattern configurations need BoxTE parameters (alpha and time bank)")
    if max(spec.relations) >= params.num_relations:
        raise ConstructionError("pattern relation outside the parameter vocabulary")
    if spec.timestamps and max(spec.timestamps) >= params.num_timestamps:
        raise ConstructionError("pattern timestamp outside the parameter vocabulary")


def build_pattern_config(spec: PatternSpec, base_params: ModelParams) -> ModelParams:
    """Copy of ``base_params`` whose boxes (or scalars) realise the pattern."""
    _check_params(base_params, spec)
    params = base_params.copy()
    if spec.kind == "rigid":
        params.alpha[spec.relations[0]] = 0.0
        return params

    rels, times = spec.relations, spec.timestamps
    induced = {pos: time_induced_box(rels[0], pos, times[0], params) for pos in ("head", "tail")}
    if spec.kind == "hierarchy":
        for pos, box in induced.items():
            margin = 0.25 * box.width + 0.05
            _set_induced(params, rels[1], pos, times[1], Box(box.lower - margin, box.upper + margin))
    elif spec.kind == "intersection":
        for pos, box in induced.items():
            shifted = box.translate(box.width / 2)
            _set_induced(params, rels[1], pos, times[1], shifted)
            meet = Box(np.maximum(box.lower, shifted.lower), np.minimum(box.upper, shifted.upper))
            _set_induced(params, rels[2], pos, times[2], meet)
    elif spec.kind == "inversion":
        _set_induced(params, rels[1], "head", times[1], induced["tail"])
        _set_induced(params, rels[1], "tail", times[1], induced["head"])
    elif spec.kind == "mutual-exclusion":
        box = induced["head"]
        offset = np.zeros(params.dim)
        offset[0] = box.width[0] + 1.0
        _set_induced(params, rels[1], "head", times[1], box.translate(offset))
    return params


def _contains(outer: Box, inner: Box):
    bad = np.nonzero((inner.lower < outer.lower - CORNER_TOL) | (inner.upper > outer.upper + CORNER_TOL))[0]
    return bad


def _equal(a: Box, b: Box):
    return np.nonzero((np.abs(a.lower - b.lower) > CORNER_TOL) | (np.abs(a.upper - b.upper) > CORNER_TOL))[0]


def check_geometric(spec: PatternSpec, params: ModelParams) -> CheckResult:
    """Corner-arithmetic check of the pattern's condition on time-induced boxes.

    On failure the witness names the box side and first violating dimension.
    """
    _check_params(params, spec)
    if spec.kind == "rigid":
        r = spec.relations[0]
        for tau in range(params.num_timestamps):
            nz = np.nonzero(time_bump(r, tau, params))[0]
            if nz.size:
                return CheckResult(False, ("time", tau, "dim", int(nz[0])))
        return CheckResult(True)

    rels, times = spec.relations, spec.timestamps

    def ind(i, pos):
        return time_induced_box(rels[i], pos, times[i], params)

    if spec.kind == "mutual-exclusion":
        a, b = ind(0, "head"), ind(1, "head")
        disjoint = np.nonzero((a.upper < b.lower) | (b.upper < a.lower))[0]
        if disjoint.size:
            return CheckResult(True, ("disjoint dim", int(disjoint[0])))
        return CheckResult(False, ("head boxes overlap in every dimension",))

    for pos in ("head", "tail"):
        if spec.kind == "hierarchy":
            bad = _contains(ind(1, pos), ind(0, pos))
        elif spec.kind == "inversion":
            other = "tail" if pos == "head" else "head"
            bad = _equal(ind(1, pos), ind(0, other))
        else:
            a, b = ind(0, pos), ind(1, pos)
            meet = Box(np.maximum(a.lower, b.lower), np.minimum(a.upper, b.upper))
            if np.any(meet.lower > meet.upper):
                return CheckResult(False, (pos, "empty intersection"))
            bad = _equal(ind(2, pos), meet)
        if bad.size:
            return CheckResult(False, (pos, "dim", int(bad[0])))
    return CheckResult(True)


def check_semantic(spec: PatternSpec, params: ModelParams, config: ModelConfig,
                   entities: Sequence[int] | None = None) -> CheckResult:
    """Exhaustively test the rule over all entity pairs by box membership.

    ``body_count`` is the number of pairs satisfying the rule body (for
    inversion, either side; for rigid, pairs true at some timestamp).
    """
    _check_params(params, spec)
    if entities is None:
        entities = range(params.num_entities)
    pairs = list(itertools.product(entities, repeat=2))
    if not pairs:
        return CheckResult(True, body_count=0)
    x = np.asarray([p[0] for p in pairs])
    y = np.asarray([p[1] for p in pairs])

    def holds(rel, tau, swap=False):
        h, t = (y, x) if swap else (x, y)
        q = np.stack([h, np.full_like(h, rel), t, np.full_like(h, tau)], axis=1)
        return memberships(params, config, q)

    rels, times = spec.relations, spec.timestamps
    if spec.kind == "rigid":
        table = np.stack([holds(rels[0], tau) for tau in range(params.num_timestamps)], axis=1)
        varying = np.nonzero(table.any(axis=1) & ~table.all(axis=1))[0]
        body = int(table.any(axis=1).sum())
        bad = varying
    elif spec.kind == "hierarchy":
        b, head = holds(rels[0], times[0]), holds(rels[1], times[1])
        body, bad = int(b.sum()), np.nonzero(b & ~head)[0]
    elif spec.kind == "intersection":
        b = holds(rels[0], times[0]) & holds(rels[1], times[1])
        body, bad = int(b.sum()), np.nonzero(b & ~holds(rels[2], times[2]))[0]
    elif spec.kind == "inversion":
        a, b = holds(rels[0], times[0]), holds(rels[1], times[1], swap=True)
        body, bad = int((a | b).sum()), np.nonzero(a != b)[0]
    else:
        both = holds(rels[0], times[0]) & holds(rels[1], times[1])
        body = int(holds(rels[0], times[0]).sum())
        bad = np.nonzero(both)[0]
    if len(bad):
        return CheckResult(False, pairs[int(bad[0])], body)
    return CheckResult(True, None, body)


def default_spec(kind: str) -> PatternSpec:
    """Pattern over relations 0..n-1 at timestamps 0, 1, 2 (cross-time)."""
    n_rel, n_time = ARITY[kind]
    return PatternSpec(kind, tuple(range(n_rel)), tuple(range(n_time or 0)))


def pattern_base_params(num_entities: int = 20, num_relations: int = 3, num_timestamps: int = 3,
                        dim: int = 2, k: int = 2, seed: int = 0) -> ModelParams:
    """Random BoxTE parameters with wide boxes so rule bodies are non-vacuous."""
    rng = np.random.default_rng(seed)

    def boxes():
        centre = rng.uniform(-0.3, 0.3, size=(num_relations, dim))
        half = rng.uniform(0.5, 0.9, size=(num_relations, dim))
        return centre - half, centre + half

    hl, hu = boxes()
    tl, tu = boxes()
    return ModelParams(
        entity_base=rng.uniform(-1, 1, size=(num_entities, dim)),
        entity_bump=rng.uniform(-0.2, 0.2, size=(num_entities, dim)),
        head_corner_1=hl, head_corner_2=hu, tail_corner_1=tl, tail_corner_2=tu,
        alpha=rng.uniform(-1, 1, size=(num_relations, k)),
        time_bank=rng.uniform(-0.3, 0.3, size=(num_timestamps, k, dim)),
    )


def inspect_scalars(params: ModelParams, names: Sequence[str] | None = None) -> list[tuple[str, float]]:
    """Mean absolute relation scalar per relation, largest first."""
    if params.alpha is None:
        raise ConstructionError("parameters carry no relation scalars")
    means = np.abs(params.alpha).mean(axis=1)
    names = list(names) if names is not None else [str(i) for i in range(len(means))]
    return sorted(zip(names, means.tolist()), key=lambda item: (-item[1], item[0]))
