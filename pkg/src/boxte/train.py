"""Losses, negative sampling, temporal smoothness, Adam and the training loop."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .data import Quadruple, TemporalKG
from .errors import ConfigError, NumericError, SamplingError
from .model import (GradientBuffer, ModelConfig, ModelParams, backward, bank_backward, forward,
                    init_params, materialize_time_bank)

logger = logging.getLogger(__name__)

LOSSES = ("cross-entropy", "self-adversarial-ns")

__all__ = [
    "TrainConfig", "AdamState", "EpochLog", "TrainResult", "sample_negatives", "sample_negative_batch",
    "cross_entropy_loss", "self_adversarial_ns_loss", "temporal_smoothness", "materialize_time_bank",
    "adam_step", "batch_objective", "train",
]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    num_negatives: int = 75
    epochs: int = 100
    validate_every: int = 100
    loss: str = "cross-entropy"
    margin: float = 9.0
    adversarial_temperature: float = 2.0
    reg_weight: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}")
        if self.num_negatives < 1:
            raise ConfigError("num_negatives must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.validate_every < 0:
            raise ConfigError("validate_every must be >= 0")
        if self.reg_weight < 0:
            raise ConfigError("reg_weight must be >= 0")
        if self.loss == "self-adversarial-ns" and self.margin <= 0:
            raise ConfigError("margin must be > 0 for self-adversarial-ns")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")


# -- negative sampling ----------------------------------------------------------

def sample_negative_batch(positives: np.ndarray, num_negatives: int, num_entities: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Corrupt each positive ``ceil(N/2)`` times at the head, ``floor(N/2)`` at the tail.

    Returns an ``(n, N, 4)`` array; a corrupting entity never equals the one it
    replaces.
    """
    if num_entities < 2:
        raise SamplingError("negative sampling needs at least two entities")
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 4)
    n = len(pos)
    n_head = (num_negatives + 1) // 2
    n_tail = num_negatives // 2
    negs = np.repeat(pos[:, None, :], num_negatives, axis=1)
    heads = rng.integers(0, num_entities - 1, size=(n, n_head))
    heads += heads >= pos[:, 0:1]
    tails = rng.integers(0, num_entities - 1, size=(n, n_tail))
    tails += tails >= pos[:, 2:3]
    negs[:, :n_head, 0] = heads
    negs[:, n_head:, 2] = tails
    return negs


def sample_negatives(q: Quadruple, num_negatives: int, num_entities: int,
                     rng: np.random.Generator) -> list[Quadruple]:
    negs = sample_negative_batch(np.asarray([q]), num_negatives, num_entities, rng)[0]
    return [Quadruple(*map(int, row)) for row in negs]


# -- losses ------------------------------------------------------------------------

def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


def adversarial_weights(neg_scores: np.ndarray, margin: float, temperature: float) -> np.ndarray:
    z = temperature * (margin - neg_scores)
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def _loss_from_scores(scores: np.ndarray, train_config: TrainConfig, adv_weights=None):
    """Per-positive losses and d(mean loss)/d scores; column 0 holds the positive."""
    n = scores.shape[0]
    if train_config.loss == "cross-entropy":
        logits = -scores
        lse = np.logaddexp.reduce(logits, axis=1)
        losses = lse - logits[:, 0]
        probs = np.exp(logits - lse[:, None])
        onehot = np.zeros_like(probs)
        onehot[:, 0] = 1.0
        dscores = -(probs - onehot) / n
        return losses, dscores
    gamma = train_config.margin
    pos, neg = scores[:, 0], scores[:, 1:]
    if adv_weights is None:
        adv_weights = adversarial_weights(neg, gamma, train_config.adversarial_temperature)
    losses = -_log_sigmoid(gamma - pos) - (adv_weights * _log_sigmoid(neg - gamma)).sum(axis=1)
    dscores = np.empty_like(scores)
    dscores[:, 0] = _sigmoid(pos - gamma) / n
    dscores[:, 1:] = -adv_weights * _sigmoid(gamma - neg) / n
    return losses, dscores


def batch_objective(params: ModelParams, model_config: ModelConfig, train_config: TrainConfig,
                    positives, negatives, adv_weights=None, include_regularizer: bool = True
                    ) -> tuple[float, GradientBuffer, float]:
    """Mean loss over the batch plus ``reg_weight * smoothness`` and its gradient.

    ``negatives`` has shape ``(n, N, 4)``. ``adv_weights`` pins the
    self-adversarial weights (they are constants under differentiation).
    Returns ``(objective, grads, mean data loss)``.
    """
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 4)
    negs = np.asarray(negatives, dtype=np.int64).reshape(len(pos), -1, 4)
    if negs.shape[1] == 0:
        raise ConfigError("at least one negative per positive is required")
    width = 1 + negs.shape[1]
    allq = np.concatenate([pos[:, None, :], negs], axis=1).reshape(-1, 4)
    flat_scores, cache = forward(params, model_config, allq)
    scores = flat_scores.reshape(-1, width)
    losses, dscores = _loss_from_scores(scores, train_config, adv_weights)
    data_loss = float(losses.mean())
    if not math.isfinite(data_loss):
        raise NumericError("non-finite loss")
    grads = backward(params, model_config, cache, dscores.reshape(-1))
    total = data_loss
    if include_regularizer and train_config.reg_weight > 0 and model_config.variant == "boxte":
        reg, reg_grads = temporal_smoothness(params)
        total += train_config.reg_weight * reg
        for name, g in reg_grads.items():
            grads[name] += train_config.reg_weight * g
    return total, grads, data_loss


def _single(pos, negs, params, model_config, train_config):
    negs = np.asarray([tuple(q) for q in negs], dtype=np.int64)
    if len(negs) == 0:
        raise ConfigError("negs must be non-empty")
    total, grads, _ = batch_objective(params, model_config, train_config, [tuple(pos)], negs[None],
                                      include_regularizer=False)
    return total, grads


def cross_entropy_loss(pos, negs, params: ModelParams, config: ModelConfig
                       ) -> tuple[float, GradientBuffer]:
    """``-log softmax`` of the positive among ``-score`` logits of pos + negs."""
    return _single(pos, negs, params, config, TrainConfig(loss="cross-entropy"))


def self_adversarial_ns_loss(pos, negs, params: ModelParams, config: ModelConfig,
                             margin: float = 9.0, temperature: float = 2.0
                             ) -> tuple[float, GradientBuffer]:
    tc = TrainConfig(loss="self-adversarial-ns", margin=margin, adversarial_temperature=temperature)
    return _single(pos, negs, params, config, tc)


# -- temporal smoothness ---------------------------------------------------------

def smoothness_of_bank(bank: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over consecutive timestamps of summed 4th powers of row differences."""
    num_timestamps = bank.shape[0]
    if num_timestamps < 2:
        return 0.0, np.zeros_like(bank)
    diff = bank[1:] - bank[:-1]
    scale = 1.0 / (num_timestamps - 1)
    value = scale * float(np.sum(diff ** 4))
    g_diff = 4.0 * scale * diff ** 3
    g_bank = np.zeros_like(bank)
    g_bank[1:] += g_diff
    g_bank[:-1] -= g_diff
    return value, g_bank


def temporal_smoothness(params: ModelParams) -> tuple[float, GradientBuffer]:
    value, g_bank = smoothness_of_bank(params.bank())
    grads = {name: np.zeros_like(params.as_dict()[name])
             for name in (("time_left", "time_right") if params.factorized else ("time_bank",))}
    bank_backward(params, g_bank, grads)
    return value, grads


# -- Adam ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like())

    def copy(self) -> "AdamState":
        return AdamState({k: v.copy() for k, v in self.m.items()},
                         {k: v.copy() for k, v in self.v.items()},
                         self.step, self.beta1, self.beta2, self.eps)


def adam_step(params: ModelParams, grads: GradientBuffer, state: AdamState, lr: float
              ) -> tuple[ModelParams, AdamState]:
    """In-place Adam update with bias correction."""
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, value in params.tensors():
        g = grads[name]
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        value -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


# -- training loop -----------------------------------------------------------------

@dataclass(frozen=True)
class EpochLog:
    epoch: int
    loss: float
    regularizer: float
    valid_mrr: float | None = None

    CSV_HEADER = "epoch,loss,regularizer,valid_mrr"

    def csv_row(self) -> str:
        mrr = "" if self.valid_mrr is None else repr(self.valid_mrr)
        return f"{self.epoch},{self.loss!r},{self.regularizer!r},{mrr}"


@dataclass
class TrainResult:
    params: ModelParams
    log: list[EpochLog]
    adam: AdamState
    best_params: ModelParams | None = None
    best_mrr: float | None = None
    best_epoch: int | None = None

    def log_csv(self) -> str:
        return "\n".join([EpochLog.CSV_HEADER] + [row.csv_row() for row in self.log]) + "\n"


def regularizer_value(params: ModelParams, model_config: ModelConfig) -> float:
    if model_config.variant != "boxte":
        return 0.0
    return smoothness_of_bank(params.bank())[0]


def train(tkg: TemporalKG, model_config: ModelConfig, train_config: TrainConfig,
          callbacks: Iterable[Callable[[EpochLog, ModelParams], None]] = (),
          params: ModelParams | None = None, validation_split: str = "valid") -> TrainResult:
    """Mini-batch Adam over shuffled training facts.

    Every ``validate_every`` epochs the filtered MRR on ``validation_split`` is
    computed (when that split is non-empty) and the parameters at the peak are
    kept in ``best_params``.
    """
    from .evaluate import evaluate  # local: evaluate imports nothing from here

    callbacks = list(callbacks)
    num_entities, _, num_timestamps = tkg.sizes
    model_config.check_sizes(num_timestamps)
    rng = np.random.default_rng(train_config.seed)
    if params is None:
        params = init_params(tkg.sizes, model_config, rng)
    state = AdamState.zeros(params)
    facts = tkg.as_array("train")
    valid = tkg.split(validation_split) if validation_split else ()
    result = TrainResult(params, [], state)

    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(len(facts))
        losses = []
        for start in range(0, len(facts), train_config.batch_size):
            batch = facts[order[start:start + train_config.batch_size]]
            negs = sample_negative_batch(batch, train_config.num_negatives, num_entities, rng)
            _, grads, data_loss = batch_objective(params, model_config, train_config, batch, negs)
            adam_step(params, grads, state, train_config.learning_rate)
            losses.append(data_loss)
        mean_loss = float(np.mean(losses)) if losses else 0.0
        valid_mrr = None
        if valid and train_config.validate_every and epoch % train_config.validate_every == 0:
            valid_mrr = evaluate(valid, params, model_config, tkg.filter_index).mrr
            if result.best_mrr is None or valid_mrr > result.best_mrr:
                result.best_mrr, result.best_epoch = valid_mrr, epoch
                result.best_params = params.copy()
        row = EpochLog(epoch, mean_loss, regularizer_value(params, model_config), valid_mrr)
        result.log.append(row)
        logger.debug("epoch %d loss %.6f reg %.6g mrr %s", epoch, mean_loss, row.regularizer, valid_mrr)
        for cb in callbacks:
            cb(row, params)
    return result
