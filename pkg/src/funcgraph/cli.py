"""Command line entry point: funcgraph <subcommand> ..."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .adaptation import run_adaptation
from .catalog import FAMILIES, family_from_dict
from .env import write_log
from .evaluation import (
    BUDGETS,
    METHODS,
    MethodRun,
    ablate_edges,
    adaptation_config,
    f1_curve,
    format_table,
    graph_dump,
    render_results,
    run_method,
    run_transfer,
    write_curve,
)
from .explore import TrainConfig, alternate_train
from .generator import write_dataset
from .nets import RelationNets, load_card
from .scene import load_manifest


def load_nets(prefix) -> RelationNets:
    if prefix is None:
        raise SystemExit("--checkpoint is required")
    prefix = Path(prefix)
    if not prefix.with_name(prefix.name + ".card.json").exists():
        raise SystemExit(f"no checkpoint at {prefix} (expected {prefix}.card.json, .br.ckpt, .sr.ckpt)")
    return RelationNets(0, load_card(prefix)).load(prefix)


def _scenes(args, split="test", family=None):
    return load_manifest(args.manifest).load(split=split, family=family)


def cmd_gen(args) -> None:
    conf = json.loads(Path(args.config).read_text()) if args.config else {}
    fams = [family_from_dict(f) for f in (args.families or conf.get("families") or list(FAMILIES))]
    pick = lambda key, default: getattr(args, key) if getattr(args, key) is not None else conf.get(key, default)
    m = write_dataset(args.out, fams, pick("train", 200), pick("test", 50), pick("seed", 0), pick("points", 2048))
    print(json.dumps(m.stats, indent=1, sort_keys=True))


def cmd_train(args) -> None:
    scenes = _scenes(args, "train", args.family)
    cfg = TrainConfig(
        budget=args.budget, loops=args.loops, seed=args.seed,
        random_explore=args.random_explore, allow_stop=not args.no_stop,
        supervised_batches=args.supervised_batches, scene_batches=args.scene_batches,
    )
    res = alternate_train(scenes, cfg, out_dir=args.out)
    print(json.dumps(res.history[-1], sort_keys=True))


def cmd_adapt(args) -> None:
    nets = load_nets(args.checkpoint)
    scenes = _scenes(args, args.split)
    if args.scene_id:
        scenes = [s for s in scenes if s.scene_id == args.scene_id]
        if not scenes:
            raise SystemExit(f"scene {args.scene_id!r} not in split {args.split!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = adaptation_config(args.budget)
    records = []
    for s in scenes:
        res = run_adaptation(s, nets, cfg)
        records.extend(res.log)
        (out / f"{s.scene_id}.graph.json").write_text(json.dumps(graph_dump(s, res), indent=1, sort_keys=True) + "\n")
    write_log(records, out / "interactions.jsonl")
    print(f"{len(scenes)} scenes, {len(records)} interactions -> {out}")


def cmd_eval(args) -> None:
    nets = load_nets(args.checkpoint) if args.method not in ("random", "exhaustive") else None
    run = run_method(args.method, _scenes(args), nets, args.budget, args.seed)
    print(render_results([run], args.out, _scenes(args) if args.dump_graphs else None), end="")


def cmd_transfer(args) -> None:
    nets = load_nets(args.checkpoint)
    rep = run_transfer(nets, args.train_family, args.test_family, _scenes(args), budget=args.budget, seed=args.seed)
    print(render_results([MethodRun(rep, [])], args.out), end="")


def cmd_ablate_edges(args) -> None:
    nets = load_nets(args.checkpoint)
    reps = ablate_edges(nets, _scenes(args), args.budget, args.seed)
    print(render_results([MethodRun(r, []) for r in reps], args.out), end="")


def cmd_curve(args) -> None:
    nets = load_nets(args.checkpoint) if args.method not in ("random", "exhaustive") else None
    rows = f1_curve(args.method, _scenes(args), nets, args.steps, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_curve(rows, args.out)
    print(Path(args.out).read_text(), end="")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="funcgraph", description="functional scene graphs from interaction")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--config", help="JSON file: families (names or overrides), train, test, seed, points")
    g.add_argument("--out", required=True)
    g.add_argument("--train", type=int, help="default 200")
    g.add_argument("--test", type=int, help="default 50")
    g.add_argument("--seed", type=int, help="default 0")
    g.add_argument("--points", type=int, help="points per object, default 2048")
    g.add_argument("--families", nargs="+", choices=list(FAMILIES))
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="alternate exploration and supervision")
    t.add_argument("--manifest", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--budget", type=int, default=1000)
    t.add_argument("--loops", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--family", choices=list(FAMILIES), help="train on one family only")
    t.add_argument("--random-explore", action="store_true")
    t.add_argument("--no-stop", action="store_true", help="disable the stop action during collection")
    t.add_argument("--supervised-batches", type=int, default=TrainConfig.supervised_batches)
    t.add_argument("--scene-batches", type=int, default=TrainConfig.scene_batches)
    t.set_defaults(func=cmd_train)

    def evaluation_args(q, method=True):
        q.add_argument("--manifest", required=True)
        q.add_argument("--checkpoint", help="checkpoint prefix, e.g. runs/a/final")
        q.add_argument("--budget", choices=list(BUDGETS), default="frac10")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--out", required=True)
        if method:
            q.add_argument("--method", choices=METHODS, default="ours_final")

    a = sub.add_parser("adapt", help="run test-time adaptation and write logs and graphs")
    evaluation_args(a, method=False)
    a.add_argument("--split", default="test")
    a.add_argument("--scene-id")
    a.set_defaults(func=cmd_adapt)

    e = sub.add_parser("eval", help="evaluate one method on the test split")
    evaluation_args(e)
    e.add_argument("--dump-graphs", action="store_true")
    e.set_defaults(func=cmd_eval)

    tr = sub.add_parser("transfer", help="evaluate across room families")
    evaluation_args(tr, method=False)
    tr.add_argument("--train-family", required=True, choices=list(FAMILIES))
    tr.add_argument("--test-family", required=True, choices=list(FAMILIES))
    tr.set_defaults(func=cmd_transfer)

    ab = sub.add_parser("ablate-edges", help="sweep input edge initializations")
    evaluation_args(ab, method=False)
    ab.set_defaults(func=cmd_ablate_edges)

    c = sub.add_parser("curve", help="F1 against number of interactions")
    evaluation_args(c)
    c.add_argument("--steps", type=int, default=10)
    c.set_defaults(func=cmd_curve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "method", None) not in (None, "random", "exhaustive") and not getattr(args, "checkpoint", True):
        raise SystemExit(f"--checkpoint is required for method {args.method!r}")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
