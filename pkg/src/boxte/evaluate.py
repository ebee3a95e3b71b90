"""Time-aware filtered ranking and MR / MRR / Hits@K."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import Quadruple
from .errors import EvaluationError
from .model import ModelConfig, ModelParams, score_batch

SIDES = ("head", "tail")


@dataclass(frozen=True)
class RankResult:
    query: Quadruple
    side: str
    rank: float
    candidates_considered: int


@dataclass(frozen=True)
class MetricsReport:
    mr: float
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    count: int

    CSV_HEADER = "mr,mrr,hits1,hits3,hits10,queries"

    def csv_row(self) -> str:
        return f"{self.mr!r},{self.mrr!r},{self.hits1!r},{self.hits3!r},{self.hits10!r},{self.count}"

    def table(self) -> str:
        rows = [("MR", f"{self.mr:.3f}"), ("MRR", f"{self.mrr:.4f}"), ("Hits@1", f"{self.hits1:.4f}"),
                ("Hits@3", f"{self.hits3:.4f}"), ("Hits@10", f"{self.hits10:.4f}"),
                ("queries", str(self.count))]
        return "\n".join(f"{name:<8} {value:>10}" for name, value in rows)


class FilterLookup:
    """Known heads per ``(r, t, tau)`` and known tails per ``(h, r, tau)``."""

    def __init__(self, facts: Iterable[Sequence[int]]):
        self.heads: dict[tuple[int, int, int], set[int]] = defaultdict(set)
        self.tails: dict[tuple[int, int, int], set[int]] = defaultdict(set)
        for h, r, t, tau in facts:
            self.heads[(r, t, tau)].add(h)
            self.tails[(h, r, tau)].add(t)

    def known(self, q: Sequence[int], side: str) -> set[int]:
        h, r, t, tau = q
        if side == "head":
            return self.heads.get((r, t, tau), set())
        return self.tails.get((h, r, tau), set())


def _lookup(filter_index) -> FilterLookup:
    if isinstance(filter_index, FilterLookup):
        return filter_index
    return FilterLookup(filter_index or ())


def candidate_scores(q: Sequence[int], side: str, params: ModelParams, config: ModelConfig) -> np.ndarray:
    """Scores of the query with its ``side`` replaced by every entity."""
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    num_entities = params.num_entities
    cands = np.tile(np.asarray(q, dtype=np.int64), (num_entities, 1))
    cands[:, 0 if side == "head" else 2] = np.arange(num_entities)
    return score_batch(params, config, cands)


def rank_fact(q: Sequence[int], side: str, params: ModelParams, config: ModelConfig,
              filter_index) -> RankResult:
    """Filtered rank, ties averaged: ``1 + #lower + 0.5 * #equal``."""
    q = Quadruple(*map(int, q))
    scores = candidate_scores(q, side, params, config)
    true_entity = q.head if side == "head" else q.tail
    keep = np.ones(len(scores), dtype=bool)
    keep[true_entity] = False
    known = _lookup(filter_index).known(q, side)
    if known:
        keep[list(known)] = False
    target = scores[true_entity]
    others = scores[keep]
    rank = 1.0 + float(np.sum(others < target)) + 0.5 * float(np.sum(others == target))
    return RankResult(q, side, rank, int(keep.sum()))


def metrics_from_ranks(ranks: Sequence[float]) -> MetricsReport:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise EvaluationError("cannot compute metrics over zero queries")
    return MetricsReport(
        mr=float(ranks.mean()), mrr=float((1.0 / ranks).mean()),
        hits1=float((ranks <= 1).mean()), hits3=float((ranks <= 3).mean()),
        hits10=float((ranks <= 10).mean()), count=int(ranks.size),
    )


def rank_split(split: Iterable[Sequence[int]], params: ModelParams, config: ModelConfig,
               filter_index) -> list[RankResult]:
    lookup = _lookup(filter_index)
    return [rank_fact(q, side, params, config, lookup) for q in split for side in SIDES]


def evaluate(split: Iterable[Sequence[int]], params: ModelParams, config: ModelConfig,
             filter_index) -> MetricsReport:
    """Head and tail queries for every fact, averaged together."""
    split = list(split)
    if not split:
        raise EvaluationError("evaluation split is empty")
    return metrics_from_ranks([r.rank for r in rank_split(split, params, config, filter_index)])
