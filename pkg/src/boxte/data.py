"""Temporal knowledge graph storage, parsing and synthesis.

Facts are ``(head, relation, tail, time)`` index quadruples over a shared
:class:`Vocabulary`. Time indices follow chronological order, which is obtained
by sorting the timestamp labels lexicographically (ISO dates and zero-padded
years sort correctly).
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

from .errors import ParseError, RangeError, SpecError, VocabularyError

SPLITS = ("train", "valid", "test")
PATTERN_KINDS = ("rigid", "volatile", "hierarchy")


class Quadruple(NamedTuple):
    head: int
    relation: int
    tail: int
    time: int


@dataclass(frozen=True)
class Vocabulary:
    entities: tuple[str, ...] = ()
    relations: tuple[str, ...] = ()
    times: tuple[str, ...] = ()
    _entity_ids: dict = field(init=False, repr=False, compare=False)
    _relation_ids: dict = field(init=False, repr=False, compare=False)
    _time_ids: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name, seq in (("entity", self.entities), ("relation", self.relations), ("time", self.times)):
            ids = {label: i for i, label in enumerate(seq)}
            if len(ids) != len(seq):
                raise VocabularyError(f"duplicate {name} label in vocabulary")
            object.__setattr__(self, f"_{name}_ids", ids)
        if list(self.times) != sorted(self.times):
            raise VocabularyError("time labels must be in chronological (sorted) order")

    @classmethod
    def build(cls, rows: Iterable[Sequence[str]]) -> "Vocabulary":
        """Entities/relations get first-seen ids; times are sorted."""
        entities: dict[str, None] = {}
        relations: dict[str, None] = {}
        times: set[str] = set()
        for h, r, t, tau in rows:
            entities.setdefault(h)
            relations.setdefault(r)
            entities.setdefault(t)
            times.add(tau)
        return cls(tuple(entities), tuple(relations), tuple(sorted(times)))

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def num_timestamps(self) -> int:
        return len(self.times)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.num_entities, self.num_relations, self.num_timestamps

    def entity_id(self, name: str) -> int:
        try:
            return self._entity_ids[name]
        except KeyError:
            raise VocabularyError(f"unknown entity {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._relation_ids[name]
        except KeyError:
            raise VocabularyError(f"unknown relation {name!r}") from None

    def time_id(self, label: str) -> int:
        try:
            return self._time_ids[label]
        except KeyError:
            raise VocabularyError(f"unknown timestamp {label!r}") from None

    def index(self, row: Sequence[str]) -> Quadruple:
        h, r, t, tau = row
        return Quadruple(self.entity_id(h), self.relation_id(r), self.entity_id(t), self.time_id(tau))

    def labels(self, q: Quadruple) -> tuple[str, str, str, str]:
        return (self.entities[q.head], self.relations[q.relation],
                self.entities[q.tail], self.times[q.time])

    def digest(self) -> str:
        h = hashlib.sha256()
        for seq in (self.entities, self.relations, self.times):
            h.update("\x1f".join(seq).encode("utf-8"))
            h.update(b"\x1e")
        return h.hexdigest()


def _read_rows(lines: Iterable[str], min_fields: int = 4) -> list[tuple[str, ...]]:
    rows = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < min_fields:
            raise ParseError(f"line {lineno}: expected {min_fields} tab-separated fields, got {len(fields)}",
                             lineno=lineno)
        rows.append(tuple(f.strip() for f in fields[:min_fields]))
    return rows


def parse_quadruples(stream: TextIO | Iterable[str], vocab: Vocabulary | None = None
                     ) -> tuple[list[Quadruple], Vocabulary]:
    """Parse tab-separated ``head relation tail timestamp`` lines.

    With ``vocab=None`` a vocabulary is built from the stream; otherwise the
    given vocabulary is frozen and unknown names raise :class:`VocabularyError`.
    """
    rows = _read_rows(stream)
    if vocab is None:
        vocab = Vocabulary.build(rows)
    return [vocab.index(row) for row in rows], vocab


def format_quadruples(quads: Iterable[Quadruple], vocab: Vocabulary) -> str:
    return "".join("\t".join(vocab.labels(q)) + "\n" for q in quads)


def build_filter_index(*splits: Iterable[Quadruple]) -> frozenset[Quadruple]:
    return frozenset(Quadruple(*q) for split in splits for q in split)


@dataclass(frozen=True)
class TemporalKG:
    vocab: Vocabulary
    train: tuple[Quadruple, ...]
    valid: tuple[Quadruple, ...] = ()
    test: tuple[Quadruple, ...] = ()
    filter_index: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        E, R, T = self.vocab.sizes
        for name in SPLITS:
            quads = tuple(Quadruple(*q) for q in getattr(self, name))
            for q in quads:
                if not (0 <= q.head < E and 0 <= q.tail < E and 0 <= q.relation < R and 0 <= q.time < T):
                    raise VocabularyError(f"{name} quadruple {q} outside vocabulary bounds")
            object.__setattr__(self, name, quads)
        object.__setattr__(self, "filter_index", build_filter_index(self.train, self.valid, self.test))

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.vocab.sizes

    def split(self, name: str) -> tuple[Quadruple, ...]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def as_array(self, name: str = "train") -> np.ndarray:
        return np.asarray(self.split(name), dtype=np.int64).reshape(-1, 4)


def load_tkg(directory: str | Path) -> TemporalKG:
    """Load ``train.txt``/``valid.txt``/``test.txt`` (missing valid/test are empty)."""
    directory = Path(directory)
    rows = {}
    for name in SPLITS:
        path = directory / f"{name}.txt"
        if not path.exists():
            if name == "train":
                raise FileNotFoundError(path)
            rows[name] = []
            continue
        with open(path, encoding="utf-8") as fh:
            try:
                rows[name] = _read_rows(fh)
            except ParseError as exc:
                raise ParseError(f"{path}: {exc}", lineno=exc.lineno) from None
    vocab = Vocabulary.build(row for name in SPLITS for row in rows[name])
    return TemporalKG(vocab, *(tuple(vocab.index(r) for r in rows[name]) for name in SPLITS))


def save_tkg(tkg: TemporalKG, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in SPLITS:
        (directory / f"{name}.txt").write_text(format_quadruples(tkg.split(name), tkg.vocab), encoding="utf-8")


_YEAR = re.compile(r"-?\d+")


def _year(value: str) -> int:
    m = _YEAR.match(value.strip())
    if m is None:
        raise ParseError(f"cannot read a year from {value!r}")
    return int(m.group())


def unfold_yago_ranges(rows: Iterable[Sequence[str]]) -> list[tuple[str, str, str, str]]:
    """Expand ``occursSince``/``occursUntil`` pairs into one fact per year.

    Rows are ``(head, relation, tail, token, year)``. Since and Until rows of
    the same triple are paired greedily in file order; a row left without a
    partner becomes a single fact at its own year. Output rows carry 4-digit
    zero-padded year labels so they sort chronologically.
    """
    pending: dict[tuple[str, str, str], dict[str, list[tuple[int, int]]]] = {}
    slots: list[tuple[tuple[str, str, str], int, int]] = []  # (triple, start, end)

    for row in rows:
        if len(row) < 5:
            raise ParseError(f"expected 5 fields, got {len(row)}")
        h, r, t, token, year_s = (str(x).strip() for x in row[:5])
        key = (h, r, t)
        year = _year(year_s)
        lowered = token.lower()
        if lowered.endswith("since"):
            kind, other = "since", "until"
        elif lowered.endswith("until"):
            kind, other = "until", "since"
        else:
            raise ParseError(f"unknown range token {token!r}")
        queues = pending.setdefault(key, {"since": [], "until": []})
        if queues[other]:
            slot, other_year = queues[other].pop(0)
            start, end = (year, other_year) if kind == "since" else (other_year, year)
            if start > end:
                raise RangeError(f"{h}\t{r}\t{t}: occursSince {start} is after occursUntil {end}")
            slots[slot] = (key, start, end)
        else:
            slots.append((key, year, year))
            queues[kind].append((len(slots) - 1, year))

    out = []
    for key, start, end in slots:
        for y in range(start, end + 1):
            out.append((*key, f"{y:04d}"))
    return out


@dataclass(frozen=True)
class SyntheticSpec:
    num_entities: int
    num_timestamps: int
    patterns: tuple[str, ...] = ("rigid", "volatile")
    pairs_per_relation: int = 6
    num_relations: int | None = None
    holdout: float = 0.0


def _relations_needed(kind: str) -> int:
    return 2 if kind == "hierarchy" else 1


def generate_synthetic_tkg(seed: int, spec: SyntheticSpec) -> TemporalKG:
    """Deterministic TKG with planted temporal patterns.

    ``rigid``: each chosen pair holds at every timestamp. ``volatile``: each
    chosen pair alternates between true and false on consecutive timestamps.
    ``hierarchy``: every ``r1`` fact at ``tau1`` has its ``r2`` counterpart at
    ``tau2 = tau1 + 1``. With ``holdout > 0`` that fraction of facts is split
    evenly into valid and test.
    """
    if spec.num_entities < 1 or spec.num_timestamps < 1:
        raise SpecError("synthetic sizes must be >= 1")
    for kind in spec.patterns:
        if kind not in PATTERN_KINDS:
            raise SpecError(f"unknown planted pattern {kind!r}; choose from {PATTERN_KINDS}")
        if kind in ("volatile", "hierarchy") and spec.num_timestamps < 2:
            raise SpecError(f"pattern {kind!r} needs at least 2 timestamps")
    needed = sum(_relations_needed(k) for k in spec.patterns)
    num_relations = needed if spec.num_relations is None else spec.num_relations
    if num_relations < needed:
        raise SpecError(f"patterns need {needed} relations, spec provides {num_relations}")
    if not 0.0 <= spec.holdout < 1.0:
        raise SpecError("holdout must be in [0, 1)")

    rng = np.random.default_rng(seed)
    E, T = spec.num_entities, spec.num_timestamps
    all_pairs = [(h, t) for h in range(E) for t in range(E)]
    n_pairs = min(spec.pairs_per_relation, len(all_pairs))

    def pick_pairs():
        idx = rng.choice(len(all_pairs), size=n_pairs, replace=False)
        return [all_pairs[i] for i in sorted(idx)]

    relation_names: list[str] = []
    facts: list[Quadruple] = []
    for kind in spec.patterns:
        r = len(relation_names)
        if kind == "rigid":
            relation_names.append(f"rigid_{r}")
            facts += [Quadruple(h, r, t, tau) for h, t in pick_pairs() for tau in range(T)]
        elif kind == "volatile":
            relation_names.append(f"volatile_{r}")
            for h, t in pick_pairs():
                phase = int(rng.integers(2))
                facts += [Quadruple(h, r, t, tau) for tau in range(T) if (tau + phase) % 2 == 0]
        else:
            relation_names += [f"hier_body_{r}", f"hier_head_{r + 1}"]
            tau1 = int(rng.integers(T - 1))
            body = pick_pairs()
            facts += [Quadruple(h, r, t, tau1) for h, t in body]
            facts += [Quadruple(h, r + 1, t, tau1 + 1) for h, t in body]
            # extra r2 facts so the rule is not an equivalence
            for h, t in pick_pairs()[: max(1, n_pairs // 2)]:
                facts.append(Quadruple(h, r + 1, t, tau1 + 1))
    while len(relation_names) < num_relations:
        relation_names.append(f"unused_{len(relation_names)}")

    facts = sorted(set(facts))
    width = max(4, len(str(T - 1)))
    vocab = Vocabulary(tuple(f"e{i}" for i in range(E)), tuple(relation_names),
                       tuple(f"t{i:0{width}d}" for i in range(T)))

    train, valid, test = facts, [], []
    if spec.holdout > 0 and len(facts) >= 3:
        perm = rng.permutation(len(facts))
        n_out = max(2, int(round(spec.holdout * len(facts))))
        held = sorted(perm[:n_out].tolist())
        keep = sorted(perm[n_out:].tolist())
        train = [facts[i] for i in keep]
        valid = [facts[i] for i in held[: n_out // 2]]
        test = [facts[i] for i in held[n_out // 2:]]
    return TemporalKG(vocab, tuple(train), tuple(valid), tuple(test))
