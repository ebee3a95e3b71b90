import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boxte.data import Quadruple
from boxte.errors import ConfigError, SamplingError
from boxte.gradcheck import run_gradcheck
from boxte.model import ModelConfig, ModelParams, init_params
from boxte.train import (AdamState, EpochLog, TrainConfig, adam_step, adversarial_weights, cross_entropy_loss,
                         sample_negative_batch, sample_negatives, self_adversarial_ns_loss,
                         temporal_smoothness, train)

from conftest import random_tkg


# -- negative sampling ------------------------------------------------------------

def test_two_entities_force_the_other():
    negs = sample_negatives(Quadruple(0, 0, 1, 0), 2, 2, np.random.default_rng(0))
    assert negs == [Quadruple(1, 0, 1, 0), Quadruple(0, 0, 0, 0)]


def test_split_of_75():
    q = Quadruple(3, 1, 4, 2)
    negs = sample_negatives(q, 75, 10, np.random.default_rng(0))
    head = [n for n in negs if n.head != q.head]
    tail = [n for n in negs if n.tail != q.tail]
    assert len(head) == 38 and len(tail) == 37
    assert all(n.tail == q.tail for n in head) and all(n.head == q.head for n in tail)
    assert all(n.relation == 1 and n.time == 2 for n in negs)


def test_sampling_deterministic():
    a = sample_negatives(Quadruple(0, 0, 1, 0), 9, 6, np.random.default_rng(5))
    b = sample_negatives(Quadruple(0, 0, 1, 0), 9, 6, np.random.default_rng(5))
    assert a == b


def test_single_entity_cannot_be_corrupted():
    with pytest.raises(SamplingError):
        sample_negatives(Quadruple(0, 0, 0, 0), 2, 1, np.random.default_rng(0))


@given(st.integers(2, 30), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_corruptor_never_equals_original(E, N, seed):
    rng = np.random.default_rng(seed)
    pos = np.stack([rng.integers(0, E, 8), np.zeros(8, int), rng.integers(0, E, 8), np.zeros(8, int)], axis=1)
    negs = sample_negative_batch(pos, N, E, rng)
    n_head = (N + 1) // 2
    assert np.all(negs[:, :n_head, 0] != pos[:, None, 0])
    assert np.all(negs[:, n_head:, 2] != pos[:, None, 2])
    assert negs.min() >= 0 and negs[..., [0, 2]].max() < E


# -- losses -------------------------------------------------------------------------

def loss_fixture(neg_head):
    """Box [0, 2] in one dim; the positive sits at the centre, the negative head at ``neg_head``."""
    col = lambda *v: np.array(v, dtype=float).reshape(-1, 1)  # noqa: E731
    return ModelParams(
        entity_base=col(1.0, 1.0, neg_head), entity_bump=col(0.0, 0.0, 0.0),
        head_corner_1=col(0.0), head_corner_2=col(2.0), tail_corner_1=col(0.0), tail_corner_2=col(2.0),
        alpha=np.zeros((1, 1)), time_bank=np.zeros((1, 1, 1)),
    )


MC1 = ModelConfig(dim=1)
POS, NEG = (0, 0, 1, 0), (2, 0, 1, 0)


def test_cross_entropy_closed_form():
    # outside distance |e-1|*3 - 8/3 = 10  =>  e = 1 + 38/9
    loss, _ = cross_entropy_loss(POS, [NEG], loss_fixture(1 + 38 / 9), MC1)
    assert loss == pytest.approx(math.log1p(math.exp(-10)), rel=1e-9)


def test_cross_entropy_equal_scores():
    loss, grads = cross_entropy_loss(POS, [NEG], loss_fixture(1.0), MC1)
    assert loss == pytest.approx(math.log(2), abs=1e-15)
    assert set(grads) == {"entity_base", "entity_bump", "head_corner_1", "head_corner_2", "tail_corner_1",
                          "tail_corner_2", "alpha", "time_bank"}


def test_self_adversarial_closed_form():
    margin = 9.0
    # negative score 2 * margin = 18: e = 1 + (18 + 8/3) / 3
    loss, _ = self_adversarial_ns_loss(POS, [NEG], loss_fixture(1 + (18 + 8 / 3) / 3), MC1, margin=margin)
    log_sig = lambda x: -math.log1p(math.exp(-x))  # noqa: E731
    assert loss == pytest.approx(-2 * log_sig(margin), rel=1e-9)


def test_adversarial_weights():
    assert adversarial_weights(np.array([[3.0, 3.0]]), 9.0, 2.0).tolist() == [[0.5, 0.5]]
    w = adversarial_weights(np.array([[1.0, 5.0, 9.0]]), 9.0, 0.0)
    assert np.allclose(w, 1 / 3)


@given(st.integers(0, 2**32 - 1))
def test_cross_entropy_nonnegative(seed):
    mc = ModelConfig(dim=3, k=2)
    p = init_params((6, 2, 3), mc, seed)
    negs = sample_negatives(Quadruple(0, 1, 2, 1), 5, 6, np.random.default_rng(seed))
    loss, _ = cross_entropy_loss((0, 1, 2, 1), negs, p, mc)
    assert loss >= 0 and math.isfinite(loss)


def test_empty_negatives_rejected():
    with pytest.raises(ConfigError):
        cross_entropy_loss(POS, [], loss_fixture(1.0), MC1)


# -- regulariser ----------------------------------------------------------------------

def bank_params(bank):
    p = init_params((2, 1, len(bank)), ModelConfig(dim=len(bank[0][0]), k=len(bank[0])), 0)
    p.time_bank = np.asarray(bank, dtype=float)
    return p


def test_smoothness_hand_fixture():
    value, grads = temporal_smoothness(bank_params([[[0, 0]], [[1, 0]], [[1, 2]]]))
    assert abs(value - 8.5) <= 1e-12
    # d/dK of (1/2) * sum diff^4
    assert grads["time_bank"][:, 0].tolist() == [[-2, 0], [2, -16], [0, 16]]


def test_smoothness_constant_bank_is_zero():
    value, grads = temporal_smoothness(bank_params([[[1, 2]], [[1, 2]], [[1, 2]]]))
    assert value == 0 and not grads["time_bank"].any()


def test_smoothness_single_timestamp():
    value, grads = temporal_smoothness(bank_params([[[1, 2]]]))
    assert value == 0 and not grads["time_bank"].any()


def test_smoothness_factorized_uses_materialized_bank():
    p = init_params((2, 1, 4), ModelConfig(dim=3, k=2, factor_rank=2), 3)
    direct = p.copy()
    direct.time_bank, direct.time_left, direct.time_right = p.bank(), None, None
    assert temporal_smoothness(p)[0] == pytest.approx(temporal_smoothness(direct)[0], rel=1e-12)


def test_gradients_match_finite_differences():
    for res in run_gradcheck():
        assert res.probes >= 100, res.label
        assert res.max_rel_error < 1e-4, res.label


def test_gradients_match_finite_differences_l1():
    assert all(res.passed() for res in run_gradcheck(norm_order=1, seed=3))


# -- Adam ----------------------------------------------------------------------------

def test_adam_zero_gradient_keeps_params():
    p = init_params((3, 1, 2), ModelConfig(dim=2), 0)
    before = p.copy()
    state = AdamState.zeros(p)
    state.m["entity_base"][:] = 1.0
    adam_step(p, p.zeros_like(), state, 0.1)
    for (name, a), (_, b) in zip(p.tensors(), before.tensors()):
        if name != "entity_base":
            assert np.array_equal(a, b)
    assert np.all(state.m["entity_base"] == 0.9)
    assert state.step == 1


def test_adam_first_step_magnitude():
    p = init_params((3, 1, 2), ModelConfig(dim=2), 0)
    before = p.entity_base.copy()
    grads = p.zeros_like()
    grads["entity_base"][0, 0] = 0.37
    adam_step(p, grads, AdamState.zeros(p), 1e-3)
    step = before[0, 0] - p.entity_base[0, 0]
    assert step == pytest.approx(1e-3 * 0.37 / (0.37 + 1e-8), rel=1e-9)
    assert np.all(np.delete(p.entity_base.ravel(), 0) == np.delete(before.ravel(), 0))


# -- training loop -------------------------------------------------------------------------

def tensors_equal(a, b):
    return all(np.array_equal(x, y) for (_, x), (_, y) in zip(a.tensors(), b.tensors()))


def test_zero_epochs_returns_initial_params():
    tkg = random_tkg(0, 10, E=5, R=2, T=3)
    mc = ModelConfig(dim=4, k=2)
    init = init_params(tkg.sizes, mc, np.random.default_rng(0))
    res = train(tkg, mc, TrainConfig(epochs=0))
    assert res.log == [] and tensors_equal(res.params, init)


def test_training_is_deterministic():
    tkg = random_tkg(1, 16, E=6, R=2, T=3)
    mc, tc = ModelConfig(dim=4, k=2), TrainConfig(epochs=5, batch_size=4, num_negatives=4, seed=9)
    a, b = train(tkg, mc, tc), train(tkg, mc, tc)
    assert a.log_csv() == b.log_csv() and tensors_equal(a.params, b.params)


def test_training_lowers_loss():
    tkg = random_tkg(2, 16, E=6, R=2, T=3)
    res = train(tkg, ModelConfig(dim=8, k=2), TrainConfig(epochs=30, batch_size=4, num_negatives=4,
                                                          learning_rate=0.01))
    assert res.log[-1].loss < res.log[0].loss


def test_huge_reg_weight_smooths_bank():
    tkg = random_tkg(3, 16, E=6, R=2, T=5)
    tc = TrainConfig(epochs=40, batch_size=16, num_negatives=4, reg_weight=1e6, learning_rate=0.01)
    regs = [row.regularizer for row in train(tkg, ModelConfig(dim=4, k=2), tc).log]
    assert regs[-1] < 1e-2 * regs[0]
    assert all(b <= a * 1.05 + 1e-12 for a, b in zip(regs, regs[1:]))


def test_validation_tracks_best():
    tkg = random_tkg(4, 20, E=6, R=2, T=3, holdout=4)
    seen = []
    res = train(tkg, ModelConfig(dim=4, k=2), TrainConfig(epochs=4, batch_size=8, num_negatives=4,
                                                          validate_every=2),
                callbacks=[lambda row, params: seen.append(row.epoch)], validation_split="test")
    assert seen == [1, 2, 3, 4]
    assert [row.valid_mrr is not None for row in res.log] == [False, True, False, True]
    assert res.best_mrr == max(row.valid_mrr for row in res.log if row.valid_mrr is not None)


def test_epoch_csv_row():
    assert EpochLog(3, 0.5, 0.25).csv_row() == "3,0.5,0.25,"
    assert EpochLog.CSV_HEADER == "epoch,loss,regularizer,valid_mrr"


@pytest.mark.parametrize("kwargs", [dict(num_negatives=0), dict(reg_weight=-1.0), dict(loss="hinge"),
                                    dict(loss="self-adversarial-ns", margin=0.0)])
def test_train_config_validation(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)
