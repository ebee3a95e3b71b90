"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
import importlib
import time

import numpy as np
import pytest

from boxte.budget import dimension_for_budget, param_count
from boxte.cli import main
from boxte.data import SyntheticSpec, generate_synthetic_tkg, save_tkg
from boxte.evaluate import evaluate, metrics_from_ranks, rank_split
from boxte.expressiveness import run_battery
from boxte.gradcheck import run_gradcheck
from boxte.model import Box, ModelConfig, init_params, point_box_distance
from boxte.patterns import KINDS, build_pattern_config, check_geometric, check_semantic, default_spec, \
    inspect_scalars, pattern_base_params
from boxte.train import TrainConfig, temporal_smoothness, train

from conftest import random_tkg
from test_evaluate import brute_force_ranks
from test_train import bank_params


def report(request, number, title, ok, detail, elapsed, budget):
    within = elapsed < budget
    line = (f"criterion {number:>2} {title:<34} {'PASS' if ok and within else 'FAIL'}  "
            f"{detail}  ({elapsed:.2f}s of {budget:g}s)")
    request.config.pluginmanager.get_plugin("terminalreporter").write_line(line)
    assert ok, line
    assert within, line


def test_1_executable_full_expressiveness(request):
    start = time.perf_counter()
    results = run_battery(trials=50, max_entities=3, max_relations=2, max_timestamps=3, seed=0,
                          check_each_step=True)
    ok = all(r.perfect == r.trials == 50 for r in results)
    report(request, 1, "lemma batteries", ok, "; ".join(r.summary() for r in results),
           time.perf_counter() - start, 60)


def test_2_gradient_correctness(request):
    start = time.perf_counter()
    results = run_gradcheck(dim=5, k=2, num_probes=100, seed=0)
    worst = max(r.max_rel_error for r in results)
    ok = len(results) == 10 and all(r.probes >= 100 and r.max_rel_error < 1e-4 for r in results)
    report(request, 2, "gradient check", ok, f"{len(results)} cases, max rel error {worst:.2e}",
           time.perf_counter() - start, 30)


def test_3_distance_continuity(request):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    n = 10_000
    lower = rng.uniform(-50, 50, n)
    upper = lower + rng.exponential(5.0, n)
    box = Box(lower, upper)
    w = upper - lower
    kappa = 0.5 * w * ((w + 1) - 1 / (w + 1))
    worst = 0.0
    for edge in (lower, upper):
        library = point_box_distance(edge, box)
        absdiff = np.abs(edge - (lower + upper) / 2)
        inside_branch = absdiff / (w + 1)
        outside_branch = absdiff * (w + 1) - kappa
        worst = max(worst, np.max(np.abs(inside_branch - outside_branch)), np.max(np.abs(library - inside_branch)))
        # one ulp outside the box the library switches branch; the value must not jump
        step_out = np.nextafter(edge, np.where(edge is upper, np.inf, -np.inf))
        worst = max(worst, np.max(np.abs(point_box_distance(step_out, box) - library)))
    report(request, 3, "distance continuity", worst <= 1e-9, f"max gap {worst:.2e} over {n} boxes",
           time.perf_counter() - start, 5)


def test_4_memorization(request):
    start = time.perf_counter()
    mc = ModelConfig(dim=32, k=2)
    mrrs = []
    for seed in range(3):
        tkg = random_tkg(seed, num_facts=20, E=10, R=3, T=4)
        tc = TrainConfig(learning_rate=0.01, batch_size=4, num_negatives=20, epochs=200, validate_every=0,
                         seed=seed)
        result = train(tkg, mc, tc)
        mrrs.append(evaluate(tkg.train, result.params, mc, tkg.filter_index).mrr)
    ok = min(mrrs) >= 0.95
    report(request, 4, "memorization (20 facts)", ok, "train MRR " + ", ".join(f"{m:.3f}" for m in mrrs),
           time.perf_counter() - start, 120)


def test_5_pattern_capture(request):
    start = time.perf_counter()
    base = pattern_base_params(num_entities=20, seed=0)
    outcomes = []
    for bounded in (False, True):
        mc = ModelConfig(dim=base.dim, k=base.alpha.shape[1], bounded=bounded)
        for kind in KINDS:
            spec = default_spec(kind)
            params = build_pattern_config(spec, base)
            sem = check_semantic(spec, params, mc, range(20))
            outcomes.append((kind, check_geometric(spec, params).ok and sem.ok and sem.body_count > 0))
    failed = [k for k, ok in outcomes if not ok]
    report(request, 5, "pattern capture (20 entities)", not failed,
           f"{len(outcomes) - len(failed)}/{len(outcomes)} kind-mode pairs" + (f" failed {failed}" if failed else ""),
           time.perf_counter() - start, 10)


def test_6_learned_temporal_scalars(request):
    start = time.perf_counter()
    mc = ModelConfig(dim=16, k=2)
    pairs = []
    for seed in range(3):
        tkg = generate_synthetic_tkg(seed, SyntheticSpec(10, 8, ("rigid", "volatile"), pairs_per_relation=6))
        tc = TrainConfig(learning_rate=0.01, batch_size=16, num_negatives=10, epochs=100, validate_every=0,
                         seed=seed)
        scalars = dict(inspect_scalars(train(tkg, mc, tc).params, tkg.vocab.relations))
        pairs.append((scalars["volatile_1"], scalars["rigid_0"]))
    ok = all(v > r for v, r in pairs)
    report(request, 6, "learned scalars volatile > rigid", ok,
           ", ".join(f"{v:.2f} > {r:.2f}" for v, r in pairs), time.perf_counter() - start, 300)


def test_7_metric_oracle_equivalence(request):
    start = time.perf_counter()
    mismatches, queries = 0, 0
    for seed in range(4):
        tkg = random_tkg(seed, num_facts=30, E=12, R=2, T=3, holdout=8)
        mc = ModelConfig(dim=3, k=2, bounded=bool(seed % 2), norm_order=1 + seed % 2)
        params = init_params(tkg.sizes, mc, seed)
        known = list(tkg.train) + list(tkg.test)
        engine = [r.rank for r in rank_split(tkg.test, params, mc, tkg.filter_index)]
        oracle = brute_force_ranks(tkg.test, params, mc, known)
        mismatches += sum(a != b for a, b in zip(engine, oracle)) + abs(len(engine) - len(oracle))
        queries += len(oracle)
        if evaluate(tkg.test, params, mc, tkg.filter_index) != metrics_from_ranks(oracle):
            mismatches += 1
    report(request, 7, "metric oracle equivalence", mismatches == 0,
           f"{queries} queries, {mismatches} mismatches", time.perf_counter() - start, 5)


def test_8_parameter_arithmetic(request):
    start = time.perf_counter()
    sizes = (7128, 230, 365)
    count = param_count("boxte", sizes, 154, k=2)
    back = dimension_for_budget("boxte", sizes, count, k=2)
    below = dimension_for_budget("boxte", sizes, count - 1, k=2)
    ok = count == 2_379_144 and back == 154 and below == 153
    report(request, 8, "parameter arithmetic", ok, f"count {count:,}, inverse {back}, inverse(-1) {below}",
           time.perf_counter() - start, 5)


def test_9_regularizer_exactness(request, monkeypatch):
    start = time.perf_counter()
    value, _ = temporal_smoothness(bank_params([[[0, 0]], [[1, 0]], [[1, 2]]]))
    tkg = random_tkg(5, num_facts=20, E=8, R=2, T=4)
    mc = ModelConfig(dim=6, k=2)
    tc = TrainConfig(epochs=5, batch_size=4, num_negatives=6, reg_weight=0.0, seed=3)
    with_reg = train(tkg, mc, tc)

    def removed(params):
        raise AssertionError("regularizer evaluated although it was removed")

    monkeypatch.setattr(importlib.import_module("boxte.train"), "temporal_smoothness", removed)
    without = train(tkg, mc, tc)
    same = all(a.tobytes() == b.tobytes() for (_, a), (_, b) in zip(with_reg.params.tensors(),
                                                                     without.params.tensors()))
    same &= [r.loss for r in with_reg.log] == [r.loss for r in without.log]
    ok = abs(value - 8.5) <= 1e-12 and same
    report(request, 9, "regularizer exactness", ok,
           f"value {value!r}, lambda=0 trajectory {'identical' if same else 'differs'}",
           time.perf_counter() - start, 30)


def test_10_determinism(request, tmp_path, capsys):
    start = time.perf_counter()
    save_tkg(generate_synthetic_tkg(0, SyntheticSpec(8, 5, ("rigid", "volatile", "hierarchy"), holdout=0.2)),
             tmp_path / "data")
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"data_dir={tmp_path / 'data'}\noutput_dir={tmp_path / 'out'}\ndim=8\nk=2\nepochs=6\n"
                   "batch_size=8\nnum_negatives=6\nvalidate_every=3\nreg_weight=0.1\nseed=42\n")
    runs = []
    for _ in range(2):
        assert main(["train", "--config", str(cfg)]) == 0
        runs.append({name: (tmp_path / "out" / name).read_bytes()
                     for name in ("train_log.csv", "final.ckpt", "best.ckpt")})
    capsys.readouterr()
    same = runs[0] == runs[1]
    report(request, 10, "determinism", same, "epoch log and checkpoints byte-identical" if same else "outputs differ",
           time.perf_counter() - start, 60)


@pytest.fixture(autouse=True)
def _fresh_numpy_state():
    # criteria never depend on the global numpy RNG; guard against accidental use
    state = np.random.get_state()
    yield
    np.random.set_state(state)
