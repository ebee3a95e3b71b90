"""BoxTE model mathematics.

Entities carry a base position and a translational bump; every relation owns a
head box and a tail box, each stored as two unconstrained corner points. A fact
``(h, r, t, tau)`` places

    head point = e_h + b_t + alpha_r K_tau
    tail point = e_t + b_h + alpha_r K_tau

and scores ``||dist(head point, head box)|| + ||dist(tail point, tail box)||``
(lower is more plausible). Two ablation variants share the same machinery:
``tboxe`` gives every timestamp its own head/tail boxes and sums four distance
terms, ``de-boxe`` replaces the leading entity-base dimensions by diachronic
features ``amp * act(freq * t + phase)``.

Everything is vectorised over a batch of quadruples; :func:`forward` returns the
scores plus a cache that :func:`backward` turns into parameter gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

VARIANTS = ("boxte", "tboxe", "de-boxe")
ACTIVATIONS = ("sine", "sigmoid")

# Fixed tensor order; also the checkpoint payload order.
TENSOR_ORDER = (
    "entity_base", "entity_bump",
    "head_corner_1", "head_corner_2", "tail_corner_1", "tail_corner_2",
    "alpha", "time_bank", "time_left", "time_right",
    "time_head_corner_1", "time_head_corner_2", "time_tail_corner_1", "time_tail_corner_2",
    "de_amp", "de_freq", "de_phase",
)

GradientBuffer = dict  # name -> ndarray, shape-congruent with ModelParams


@dataclass(frozen=True)
class ModelConfig:
    dim: int
    k: int = 1
    norm_order: int = 2
    bounded: bool = False
    factor_rank: int = 0
    variant: str = "boxte"
    de_gamma: float = 0.0
    de_activation: str = "sine"

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.norm_order not in (1, 2):
            raise ConfigError("norm_order must be 1 or 2")
        if self.factor_rank < 0:
            raise ConfigError("factor_rank must be >= 0")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not 0.0 <= self.de_gamma <= 1.0:
            raise ConfigError("de_gamma must lie in [0, 1]")
        if self.de_activation not in ACTIVATIONS:
            raise ConfigError(f"de_activation must be one of {ACTIVATIONS}")

    @property
    def de_dims(self) -> int:
        """Number of leading temporal base dimensions in the de-boxe variant."""
        return min(self.dim, math.ceil(self.de_gamma * self.dim - 1e-12))

    def check_sizes(self, num_timestamps: int) -> None:
        if self.factor_rank > num_timestamps:
            raise ConfigError(f"factor_rank {self.factor_rank} exceeds |T| = {num_timestamps}")


@dataclass
class ModelParams:
    entity_base: np.ndarray
    entity_bump: np.ndarray
    head_corner_1: np.ndarray
    head_corner_2: np.ndarray
    tail_corner_1: np.ndarray
    tail_corner_2: np.ndarray
    alpha: np.ndarray | None = None          # |R| x k
    time_bank: np.ndarray | None = None      # |T| x k x d
    time_left: np.ndarray | None = None      # k x |T| x b
    time_right: np.ndarray | None = None     # k x b x d
    time_head_corner_1: np.ndarray | None = None  # |T| x d (tboxe)
    time_head_corner_2: np.ndarray | None = None
    time_tail_corner_1: np.ndarray | None = None
    time_tail_corner_2: np.ndarray | None = None
    de_amp: np.ndarray | None = None         # |E| x m (de-boxe)
    de_freq: np.ndarray | None = None
    de_phase: np.ndarray | None = None

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in TENSOR_ORDER:
            value = getattr(self, name)
            if value is not None:
                yield name, value

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(self.tensors())

    @classmethod
    def from_dict(cls, tensors: dict[str, np.ndarray]) -> "ModelParams":
        unknown = set(tensors) - set(TENSOR_ORDER)
        if unknown:
            raise ShapeError(f"unknown parameter tensors {sorted(unknown)}")
        return cls(**{k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()})

    def copy(self) -> "ModelParams":
        return replace(self, **{name: value.copy() for name, value in self.tensors()})

    @property
    def num_entities(self) -> int:
        return self.entity_base.shape[0]

    @property
    def num_relations(self) -> int:
        return self.head_corner_1.shape[0]

    @property
    def dim(self) -> int:
        return self.entity_base.shape[1]

    @property
    def factorized(self) -> bool:
        return self.time_left is not None

    @property
    def num_timestamps(self) -> int:
        if self.time_bank is not None:
            return self.time_bank.shape[0]
        if self.time_left is not None:
            return self.time_left.shape[1]
        if self.time_head_corner_1 is not None:
            return self.time_head_corner_1.shape[0]
        raise ShapeError("parameters carry no time representation")

    def bank(self) -> np.ndarray:
        """The |T| x k x d time-embedding bank, materialised if factorised."""
        if self.time_left is not None:
            return materialize_time_bank(self.time_left, self.time_right)
        return self.time_bank

    def zeros_like(self) -> GradientBuffer:
        return {name: np.zeros_like(value) for name, value in self.tensors()}

    def num_parameters(self) -> int:
        return sum(v.size for _, v in self.tensors())

    def assert_finite(self) -> None:
        for name, value in self.tensors():
            if not np.all(np.isfinite(value)):
                raise NumericError(f"parameter tensor {name} has non-finite entries")


def materialize_time_bank(time_left: np.ndarray, time_right: np.ndarray) -> np.ndarray:
    """Batched product over the k slots: ``K[:, j, :] = K_L[j] @ K_R[j]``."""
    time_left = np.asarray(time_left, dtype=np.float64)
    time_right = np.asarray(time_right, dtype=np.float64)
    if (time_left.ndim != 3 or time_right.ndim != 3 or time_left.shape[0] != time_right.shape[0]
            or time_left.shape[2] != time_right.shape[1]):
        raise ShapeError(f"cannot batch-multiply {time_left.shape} by {time_right.shape}")
    return np.matmul(time_left, time_right).transpose(1, 0, 2).copy()


def init_params(sizes: Sequence[int], config: ModelConfig, seed: int | np.random.Generator = 0
                ) -> ModelParams:
    """Uniform init in ±0.5/sqrt(d); relation scalars start at 1/k."""
    num_entities, num_relations, num_timestamps = sizes
    config.check_sizes(num_timestamps)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d, k = config.dim, config.k
    scale = 0.5 / math.sqrt(d)

    def u(*shape, s=scale):
        return rng.uniform(-s, s, size=shape)

    params = ModelParams(
        entity_base=u(num_entities, d), entity_bump=u(num_entities, d),
        head_corner_1=u(num_relations, d), head_corner_2=u(num_relations, d),
        tail_corner_1=u(num_relations, d), tail_corner_2=u(num_relations, d),
    )
    if config.variant == "boxte":
        params.alpha = np.full((num_relations, k), 1.0 / k)
        if config.factor_rank > 0:
            b = config.factor_rank
            params.time_left = u(k, num_timestamps, b, s=1.0 / math.sqrt(b))
            params.time_right = u(k, b, d)
        else:
            params.time_bank = u(num_timestamps, k, d)
    elif config.variant == "tboxe":
        params.time_head_corner_1 = u(num_timestamps, d)
        params.time_head_corner_2 = u(num_timestamps, d)
        params.time_tail_corner_1 = u(num_timestamps, d)
        params.time_tail_corner_2 = u(num_timestamps, d)
    else:
        m = config.de_dims
        params.de_amp = u(num_entities, m)
        params.de_freq = u(num_entities, m)
        params.de_phase = rng.uniform(-math.pi, math.pi, size=(num_entities, m))
    return params


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, point) -> bool:
        point = np.asarray(point, dtype=np.float64)
        return bool(np.all((self.lower <= point) & (point <= self.upper)))

    def translate(self, offset) -> "Box":
        return Box(self.lower + offset, self.upper + offset)


def box_from_corners(p1, p2) -> Box:
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
        raise NumericError("box corners must be finite")
    return Box(np.minimum(p1, p2), np.maximum(p1, p2))


# -- distance -----------------------------------------------------------------

def _distance(e, lower, upper):
    center = (lower + upper) / 2
    width = upper - lower
    w1 = width + 1.0
    diff = e - center
    absdiff = np.abs(diff)
    inside = (lower <= e) & (e <= upper)
    kappa = 0.5 * width * (w1 - 1.0 / w1)
    dist = np.where(inside, absdiff / w1, absdiff * w1 - kappa)
    return dist, (inside, diff, absdiff, width, w1)


def _distance_partials(parts):
    """d dist / d(e, lower, upper); the inside branch owns the boundary."""
    inside, diff, absdiff, width, w1 = parts
    sign = np.sign(diff)
    d_e = sign * np.where(inside, 1.0 / w1, w1)
    d_kappa = 0.5 * (w1 - 1.0 / w1) + 0.5 * width * (1.0 + 1.0 / w1 ** 2)
    d_w = np.where(inside, -absdiff / w1 ** 2, absdiff - d_kappa)
    d_c = -d_e
    return d_e, 0.5 * d_c - d_w, 0.5 * d_c + d_w


def point_box_distance(e, box: Box) -> np.ndarray:
    """Per-dimension distance of a point to a box.

    Inside (bounds inclusive): ``|e - c| / (w + 1)``; outside:
    ``|e - c| * (w + 1) - kappa`` with ``kappa = w/2 * ((w + 1) - 1/(w + 1))``,
    which makes both branches agree on the box boundary.
    """
    dist, _ = _distance(np.asarray(e, dtype=np.float64), box.lower, box.upper)
    return dist


def _norm(dist, order):
    if order == 1:
        return dist.sum(axis=-1)
    return np.sqrt((dist * dist).sum(axis=-1))


def _norm_partial(dist, value, order):
    if order == 1:
        return np.ones_like(dist)
    safe = np.where(value > 0, value, 1.0)
    return np.where(value[..., None] > 0, dist / safe[..., None], 0.0)


# -- batched scoring ----------------------------------------------------------

def _activation(z, kind):
    if kind == "sine":
        return np.sin(z), np.cos(z)
    s = 1.0 / (1.0 + np.exp(-z))
    return s, s * (1.0 - s)


def _as_quads(quads) -> np.ndarray:
    arr = np.asarray(quads, dtype=np.int64)
    return arr.reshape(-1, 4)


def _entity_bases(params, config, ents, times):
    base = params.entity_base[ents]
    if config.variant != "de-boxe":
        return base, None
    m = config.de_dims
    if m == 0:
        return base, None
    t = times.astype(np.float64)[:, None]
    z = params.de_freq[ents] * t + params.de_phase[ents]
    act, dact = _activation(z, config.de_activation)
    base = base.copy()
    base[:, :m] = params.de_amp[ents] * act
    return base, (ents, t, act, dact)


def time_bumps(params, config, relations, times, bank=None) -> np.ndarray:
    if bank is None:
        bank = params.bank()
    return (params.alpha[relations][:, :, None] * bank[times]).sum(axis=1)


def _box_terms(config):
    terms = [("head", ("head_corner_1", "head_corner_2"), "relation"),
             ("tail", ("tail_corner_1", "tail_corner_2"), "relation")]
    if config.variant == "tboxe":
        terms += [("head", ("time_head_corner_1", "time_head_corner_2"), "time"),
                  ("tail", ("time_tail_corner_1", "time_tail_corner_2"), "time")]
    return terms


def forward(params: ModelParams, config: ModelConfig, quads):
    """Scores for a batch of quadruples plus the cache needed by :func:`backward`."""
    q = _as_quads(quads)
    h, r, t, tau = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    base_h, de_h = _entity_bases(params, config, h, tau)
    base_t, de_t = _entity_bases(params, config, t, tau)
    pre = {"head": base_h + params.entity_bump[t], "tail": base_t + params.entity_bump[h]}
    bank = None
    if config.variant == "boxte":
        bank = params.bank()
        bump = time_bumps(params, config, r, tau, bank)
        pre["head"] = pre["head"] + bump
        pre["tail"] = pre["tail"] + bump
    points = {side: np.tanh(v) if config.bounded else v for side, v in pre.items()}

    scores = np.zeros(len(q))
    terms = []
    for side, (n1, n2), key in _box_terms(config):
        idx = r if key == "relation" else tau
        raw1, raw2 = getattr(params, n1)[idx], getattr(params, n2)[idx]
        c1, c2 = (np.tanh(raw1), np.tanh(raw2)) if config.bounded else (raw1, raw2)
        lower, upper = np.minimum(c1, c2), np.maximum(c1, c2)
        dist, parts = _distance(points[side], lower, upper)
        value = _norm(dist, config.norm_order)
        scores = scores + value
        terms.append(dict(side=side, names=(n1, n2), idx=idx, raw=(raw1, raw2), c=(c1, c2),
                          dist=dist, parts=parts, value=value))
    if not np.all(np.isfinite(scores)):
        raise NumericError("non-finite score")
    cache = dict(q=q, pre=pre, points=points, terms=terms, bank=bank, de=(de_h, de_t))
    return scores, cache


def backward(params: ModelParams, config: ModelConfig, cache, dscores,
             grads: GradientBuffer | None = None) -> GradientBuffer:
    """Accumulate ``sum_i dscores[i] * d score_i / d params`` into ``grads``."""
    if grads is None:
        grads = params.zeros_like()
    q = cache["q"]
    h, r, t, tau = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    dscores = np.asarray(dscores, dtype=np.float64)
    g_point = {"head": np.zeros_like(cache["points"]["head"]),
               "tail": np.zeros_like(cache["points"]["tail"])}

    for term in cache["terms"]:
        g_dist = dscores[:, None] * _norm_partial(term["dist"], term["value"], config.norm_order)
        d_e, d_l, d_u = _distance_partials(term["parts"])
        g_point[term["side"]] += g_dist * d_e
        g_l, g_u = g_dist * d_l, g_dist * d_u
        c1, c2 = term["c"]
        first_is_lower = c1 <= c2
        g_c1 = np.where(first_is_lower, g_l, g_u)
        g_c2 = np.where(first_is_lower, g_u, g_l)
        if config.bounded:
            g_c1 = g_c1 * (1.0 - c1 * c1)
            g_c2 = g_c2 * (1.0 - c2 * c2)
        n1, n2 = term["names"]
        np.add.at(grads[n1], term["idx"], g_c1)
        np.add.at(grads[n2], term["idx"], g_c2)

    g_pre = {}
    for side in ("head", "tail"):
        g = g_point[side]
        if config.bounded:
            p = cache["points"][side]
            g = g * (1.0 - p * p)
        g_pre[side] = g

    np.add.at(grads["entity_bump"], t, g_pre["head"])
    np.add.at(grads["entity_bump"], h, g_pre["tail"])
    for ents, g, de in ((h, g_pre["head"], cache["de"][0]), (t, g_pre["tail"], cache["de"][1])):
        if de is None:
            np.add.at(grads["entity_base"], ents, g)
            continue
        m = config.de_dims
        _, times, act, dact = de
        g_static = g.copy()
        g_static[:, :m] = 0.0
        np.add.at(grads["entity_base"], ents, g_static)
        g_tmp = g[:, :m]
        amp = params.de_amp[ents]
        np.add.at(grads["de_amp"], ents, g_tmp * act)
        np.add.at(grads["de_freq"], ents, g_tmp * amp * dact * times)
        np.add.at(grads["de_phase"], ents, g_tmp * amp * dact)

    if config.variant == "boxte":
        bank = cache["bank"]
        g_bump = g_pre["head"] + g_pre["tail"]
        np.add.at(grads["alpha"], r, (g_bump[:, None, :] * bank[tau]).sum(axis=-1))
        g_slots = params.alpha[r][:, :, None] * g_bump[:, None, :]
        if params.factorized:
            g_bank = np.zeros_like(bank)
            np.add.at(g_bank, tau, g_slots)
            bank_backward(params, g_bank, grads)
        else:
            np.add.at(grads["time_bank"], tau, g_slots)
    return grads


def bank_backward(params: ModelParams, g_bank: np.ndarray, grads: GradientBuffer) -> None:
    """Route a gradient w.r.t. the materialised bank to wherever it lives."""
    if not params.factorized:
        grads["time_bank"] += g_bank
        return
    g_slot = g_bank.transpose(1, 0, 2)  # k x |T| x d
    grads["time_left"] += np.matmul(g_slot, params.time_right.transpose(0, 2, 1))
    grads["time_right"] += np.matmul(params.time_left.transpose(0, 2, 1), g_slot)


def score_batch(params: ModelParams, config: ModelConfig, quads) -> np.ndarray:
    return forward(params, config, quads)[0]


def memberships(params: ModelParams, config: ModelConfig, quads) -> np.ndarray:
    """Truth value of each quadruple: every point lies in every one of its boxes.

    Checked on pre-activation coordinates against raw corners, which is
    equivalent to checking the bounded embeddings because tanh is monotone.
    """
    _, cache = forward(params, config, quads)
    holds = np.ones(len(cache["q"]), dtype=bool)
    for term in cache["terms"]:
        raw1, raw2 = term["raw"]
        e = cache["pre"][term["side"]]
        holds &= np.all((np.minimum(raw1, raw2) <= e) & (e <= np.maximum(raw1, raw2)), axis=-1)
    return holds


# -- single-fact API ----------------------------------------------------------

def time_bump(relation: int, time: int, params: ModelParams) -> np.ndarray:
    """``alpha_r K_tau``: the k-weighted combination of the rows of ``K_tau``."""
    if params.factorized:
        slots = np.einsum("jb,jbd->jd", params.time_left[:, time, :], params.time_right)
    else:
        slots = params.time_bank[time]
    return (params.alpha[relation][:, None] * slots).sum(axis=0)


def final_embeddings(q, params: ModelParams, config: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    _, cache = forward(params, config, [tuple(q)])
    return cache["points"]["head"][0], cache["points"]["tail"][0]


def score(q, params: ModelParams, config: ModelConfig) -> float:
    return float(score_batch(params, config, [tuple(q)])[0])


def score_tboxe(q, params: ModelParams, config: ModelConfig) -> float:
    if config.variant != "tboxe":
        raise ConfigError(f"score_tboxe needs variant 'tboxe', got {config.variant!r}")
    return score(q, params, config)


def score_deboxe(q, params: ModelParams, config: ModelConfig) -> float:
    if config.variant != "de-boxe":
        raise ConfigError(f"score_deboxe needs variant 'de-boxe', got {config.variant!r}")
    return score(q, params, config)


def relation_box(relation: int, position: str, params: ModelParams) -> Box:
    """Relation box in raw (pre-activation) coordinates."""
    if position not in ("head", "tail"):
        raise ValueError("position must be 'head' or 'tail'")
    return box_from_corners(getattr(params, f"{position}_corner_1")[relation],
                            getattr(params, f"{position}_corner_2")[relation])


def time_induced_box(relation: int, position: str, time: int, params: ModelParams) -> Box:
    """Relation box translated by minus the relation's time bump.

    A static (bump-free) pre-activation point lies in this box exactly when the
    temporal point lies in the original box.
    """
    return relation_box(relation, position, params).translate(-time_bump(relation, time, params))


def static_points(q, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Pre-activation entity points without the time bump."""
    h, _, t, _ = q
    return (params.entity_base[h] + params.entity_bump[t],
            params.entity_base[t] + params.entity_bump[h])


def param_tensor_names(config: ModelConfig) -> list[str]:
    names = ["entity_base", "entity_bump", "head_corner_1", "head_corner_2",
             "tail_corner_1", "tail_corner_2"]
    if config.variant == "boxte":
        names += ["alpha"] + (["time_left", "time_right"] if config.factor_rank else ["time_bank"])
    elif config.variant == "tboxe":
        names += ["time_head_corner_1", "time_head_corner_2", "time_tail_corner_1", "time_tail_corner_2"]
    else:
        names += ["de_amp", "de_freq", "de_phase"]
    return names


__all__ = [
    "VARIANTS", "TENSOR_ORDER", "ModelConfig", "ModelParams", "Box", "GradientBuffer",
    "init_params", "materialize_time_bank", "box_from_corners", "point_box_distance",
    "forward", "backward", "bank_backward", "score_batch", "memberships", "time_bump",
    "time_bumps", "final_embeddings", "score", "score_tboxe", "score_deboxe",
    "relation_box", "time_induced_box", "static_points", "param_tensor_names",
]
