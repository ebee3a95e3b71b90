"""Batch command-line entry point.

Every subcommand reads a flat ``key=value`` config (``--config``), then applies
``--preset``, then per-key flags such as ``--dim 64`` or ``--max-entities 3``.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

from .budget import dimension_for_budget, param_count
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import load_tkg
from .errors import BoxTEError, ConfigError
from .evaluate import MetricsReport, evaluate
from .expressiveness import run_battery
from .gradcheck import run_gradcheck
from .model import ModelConfig
from .patterns import KINDS, build_pattern_config, check_geometric, check_semantic, default_spec, \
    inspect_scalars, pattern_base_params
from .train import train

SUBCOMMANDS = ("train", "eval", "verify-expressiveness", "check-patterns", "param-count",
               "gradcheck", "inspect-scalars")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_train(cfg: RunConfig) -> int:
    cfg.require("data_dir")
    tkg = load_tkg(cfg.data_dir)
    out = Path(cfg.output_dir)
    result = train(tkg, cfg.model_config(), cfg.train_config())
    _write(out / "train_log.csv", result.log_csv())
    digest = tkg.vocab.digest()
    save_checkpoint(out / "final.ckpt", Checkpoint(cfg, tkg.sizes, digest, result.params, result.adam))
    if result.best_params is not None:
        save_checkpoint(out / "best.ckpt", Checkpoint(cfg, tkg.sizes, digest, result.best_params))
    last = result.log[-1] if result.log else None
    print(f"trained {len(result.log)} epochs on {len(tkg.train)} facts")
    if last is not None:
        print(f"final loss {last.loss:.6f}")
    if result.best_mrr is not None:
        print(f"best valid MRR {result.best_mrr:.4f} at epoch {result.best_epoch}")
    print(f"wrote {out / 'train_log.csv'} and {out / 'final.ckpt'}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    cfg.require("data_dir", "checkpoint")
    tkg = load_tkg(cfg.data_dir)
    ckpt = load_checkpoint(cfg.checkpoint, tkg.vocab.digest())
    report = evaluate(tkg.split(cfg.split), ckpt.params, ckpt.config.model_config(), tkg.filter_index)
    _write(Path(cfg.output_dir) / "metrics.csv", f"{MetricsReport.CSV_HEADER}\n{report.csv_row()}\n")
    print(report.table())
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    results = run_battery(cfg.trials, cfg.max_entities, cfg.max_relations, cfg.max_timestamps, seed=cfg.seed)
    ok = True
    for res in results:
        print(res.summary())
        for n, sizes, detail in res.failures:
            ok = False
            print(f"  trial {n} sizes {sizes}: {detail}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_patterns(cfg: RunConfig) -> int:
    base = pattern_base_params(num_entities=cfg.pattern_entities, seed=cfg.seed)
    mc = ModelConfig(dim=base.dim, k=base.alpha.shape[1], norm_order=cfg.norm_order, bounded=cfg.bounded)
    ok = True
    for kind in KINDS:
        spec = default_spec(kind)
        params = build_pattern_config(spec, base)
        geo = check_geometric(spec, params)
        sem = check_semantic(spec, params, mc)
        passed = geo.ok and sem.ok
        ok &= passed
        line = (f"{kind:<17} geometric {'pass' if geo.ok else 'FAIL'}  semantic {'pass' if sem.ok else 'FAIL'}"
                f"  body pairs {sem.body_count}")
        if not geo.ok:
            line += f"  witness {geo.witness}"
        if not sem.ok:
            line += f"  counterexample {sem.witness}"
        print(line)
    print("composition        not representable (no builder)")
    return 0 if ok else 1


def cmd_param_count(cfg: RunConfig) -> int:
    if not all(cfg.sizes):
        raise ConfigError("param-count needs a preset or num_entities/num_relations/num_timestamps")
    gamma = cfg.de_simple_gamma or None
    b = cfg.factor_rank or None
    model = cfg.count_model
    if model == "boxte" and b is not None:
        model = "boxte-f"
    count = param_count(model, cfg.sizes, cfg.dim, cfg.k, b, gamma)
    E, R, T = cfg.sizes
    print(f"{'model':<10} {'|E|':>7} {'|R|':>5} {'|T|':>6} {'d':>6} {'k':>3} {'b':>4} {'params':>14}")
    print(f"{model:<10} {E:>7} {R:>5} {T:>6} {cfg.dim:>6} {cfg.k:>3} {b or '-':>4} {count:>14,}")
    if cfg.budget:
        d = dimension_for_budget(model, cfg.sizes, cfg.budget, cfg.k, b, gamma)
        print(f"largest d within budget {cfg.budget:,}: {d}")
    return 0


def cmd_gradcheck(cfg: RunConfig) -> int:
    results = run_gradcheck(seed=cfg.seed, norm_order=cfg.norm_order)
    print(f"{'case':<42} {'max rel error':>14} {'probes':>7} {'skipped':>8}")
    ok = True
    for res in results:
        ok &= res.passed()
        print(f"{res.label:<42} {res.max_rel_error:>14.3e} {res.probes:>7} {res.skipped:>8}"
              f"  {'pass' if res.passed() else 'FAIL'}")
    return 0 if ok else 1


def cmd_inspect(cfg: RunConfig) -> int:
    cfg.require("checkpoint")
    names = None
    if cfg.data_dir:
        tkg = load_tkg(cfg.data_dir)
        ckpt = load_checkpoint(cfg.checkpoint, tkg.vocab.digest())
        names = tkg.vocab.relations
    else:
        ckpt = load_checkpoint(cfg.checkpoint)
    rows = inspect_scalars(ckpt.params, names)
    _write(Path(cfg.output_dir) / "scalars.csv",
           "relation,mean_abs_alpha\n" + "".join(f"{n},{v!r}\n" for n, v in rows))
    width = max([len("relation")] + [len(n) for n, _ in rows])
    print(f"{'relation':<{width}}  mean |alpha|")
    for n, v in rows:
        print(f"{n:<{width}}  {v:.4f}")
    return 0


HANDLERS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "verify-expressiveness": cmd_verify,
    "check-patterns": cmd_patterns,
    "param-count": cmd_param_count,
    "gradcheck": cmd_gradcheck,
    "inspect-scalars": cmd_inspect,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boxte", description="BoxTE temporal KG embeddings")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        for f in fields(RunConfig):
            p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, metavar=f.type.upper())
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name) is not None}
    return RunConfig.from_mapping(overrides, cfg)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return HANDLERS[args.command](resolve_config(args))
    except (BoxTEError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
