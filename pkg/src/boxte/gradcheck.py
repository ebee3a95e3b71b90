"""Finite-difference verification of the analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelConfig, ModelParams, forward, init_params, score_batch
from .train import (TrainConfig, adversarial_weights, batch_objective, sample_negative_batch,
                    temporal_smoothness)

STEP = 1e-5


@dataclass(frozen=True)
class GradcheckResult:
    label: str
    max_rel_error: float
    probes: int
    skipped: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.probes > 0 and self.max_rel_error < tol


def _signature(params, config, quads) -> bytes:
    """Which side of every kink the batch sits on (branch, sign, corner order)."""
    _, cache = forward(params, config, quads)
    parts = []
    for term in cache["terms"]:
        inside, diff, *_ = term["parts"]
        c1, c2 = term["c"]
        parts += [inside, diff > 0, c1 <= c2, term["value"] > 0]
    return b"".join(np.packbits(np.asarray(p, dtype=bool)).tobytes() for p in parts)


def relative_error(analytic: float, numeric: float, floor: float) -> float:
    denom = max(abs(analytic), abs(numeric), floor)
    return abs(analytic - numeric) / denom


def check_objective(params: ModelParams, model_config: ModelConfig, train_config: TrainConfig,
                    positives, negatives, num_probes: int = 100, rng=None, label: str = "",
                    regularizer_only: bool = False) -> GradcheckResult:
    """Compare analytic gradients with central differences at random coordinates.

    Probes whose ``±h`` perturbation changes any branch of the piecewise distance,
    the sign inside an absolute value, or the corner ordering are skipped and
    redrawn. The relative error denominator is floored at ``1e-6 * max(1, |f|)``,
    the round-off scale of a central difference.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    allq = np.concatenate([np.asarray(positives)[:, None, :], np.asarray(negatives)], axis=1).reshape(-1, 4)

    if regularizer_only:
        def objective(p):
            return temporal_smoothness(p)[0]
        value, grads = temporal_smoothness(params)
    else:
        width = np.asarray(negatives).shape[1] + 1
        scores = score_batch(params, model_config, allq).reshape(-1, width)
        weights = adversarial_weights(scores[:, 1:], train_config.margin, train_config.adversarial_temperature)

        def objective(p):
            return batch_objective(p, model_config, train_config, positives, negatives, adv_weights=weights)[0]
        value, grads, _ = batch_objective(params, model_config, train_config, positives, negatives,
                                          adv_weights=weights)
    floor = 1e-6 * max(1.0, abs(value))

    candidates = [(name, idx) for name, g in grads.items() for idx in zip(*np.nonzero(g))]
    order = rng.permutation(len(candidates))
    base_sig = None if regularizer_only else _signature(params, model_config, allq)
    tensors = params.as_dict()
    worst, probes, skipped = 0.0, 0, 0
    for pick in order:
        if probes >= num_probes:
            break
        name, idx = candidates[pick]
        arr = tensors[name]
        orig = arr[idx]
        arr[idx] = orig + STEP
        plus, sig_p = objective(params), None if regularizer_only else _signature(params, model_config, allq)
        arr[idx] = orig - STEP
        minus, sig_m = objective(params), None if regularizer_only else _signature(params, model_config, allq)
        arr[idx] = orig
        if not regularizer_only and (sig_p != base_sig or sig_m != base_sig):
            skipped += 1
            continue
        numeric = (plus - minus) / (2 * STEP)
        worst = max(worst, relative_error(float(grads[name][idx]), numeric, floor))
        probes += 1
    return GradcheckResult(label, worst, probes, skipped)


GRADCHECK_CASES = [
    # (label, loss, bounded, factor_rank, regularizer_only)
    ("cross-entropy/unbounded/direct", "cross-entropy", False, 0, False),
    ("cross-entropy/bounded/direct", "cross-entropy", True, 0, False),
    ("cross-entropy/unbounded/factorized", "cross-entropy", False, 3, False),
    ("cross-entropy/bounded/factorized", "cross-entropy", True, 3, False),
    ("self-adversarial-ns/unbounded/direct", "self-adversarial-ns", False, 0, False),
    ("self-adversarial-ns/bounded/direct", "self-adversarial-ns", True, 0, False),
    ("self-adversarial-ns/unbounded/factorized", "self-adversarial-ns", False, 3, False),
    ("self-adversarial-ns/bounded/factorized", "self-adversarial-ns", True, 3, False),
    ("regularizer/direct", "cross-entropy", False, 0, True),
    ("regularizer/factorized", "cross-entropy", False, 3, True),
]


def run_gradcheck(dim: int = 5, k: int = 2, sizes=(8, 3, 12), batch: int = 6, num_negatives: int = 6,
                  num_probes: int = 100, seed: int = 0, norm_order: int = 2) -> list[GradcheckResult]:
    """Gradient check on fresh random models for every loss/mode/bank combination.

    Parameters are drawn at a larger scale than training init so that points
    land both inside and outside boxes.
    """
    results = []
    for i, (label, loss, bounded, rank, reg_only) in enumerate(GRADCHECK_CASES):
        rng = np.random.default_rng([seed, i])
        mc = ModelConfig(dim=dim, k=k, bounded=bounded, factor_rank=rank, norm_order=norm_order)
        tc = TrainConfig(loss=loss, reg_weight=0.5, margin=2.0, adversarial_temperature=1.0)
        params = init_params(sizes, mc, rng)
        for name, value in params.tensors():
            if name != "alpha":
                value *= 6.0
        params.alpha += rng.uniform(-1, 1, size=params.alpha.shape)
        pos = np.stack([rng.integers(0, sizes[0], batch), rng.integers(0, sizes[1], batch),
                        rng.integers(0, sizes[0], batch), rng.integers(0, sizes[2], batch)], axis=1)
        negs = sample_negative_batch(pos, num_negatives, sizes[0], rng)
        results.append(check_objective(params, mc, tc, pos, negs, num_probes, rng, label, reg_only))
    return results
