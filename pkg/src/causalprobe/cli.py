"""Command-line entry point: ``causalprobe generate|run|suite|eval|parse-bif|probe``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import typing
from pathlib import Path

import numpy as np

from . import bif
from .harness import (
    ExperimentConfig,
    Streams,
    aggregate_runs,
    build_scm,
    default_output_root,
    run_online,
    run_preinit_probe,
    run_suite,
)
from .metrics import aushd
from .scm import ancestral_sample, intervene_sample

_SKIP = {"seed", "output_dir"}


def _field_type(f):
    hint = typing.get_type_hints(ExperimentConfig)[f.name]
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    return args[0] if args else hint


def _add_config_flags(p: argparse.ArgumentParser, with_seed=True):
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--desk", action="store_true", help="start from the small desk-scale preset")
    p.add_argument("--out", type=Path, help="output directory (default under $CAUSALPROBE_OUTPUT)")
    if with_seed:
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in _SKIP:
            continue
        flag = "--" + f.name.replace("_", "-")
        t = _field_type(f)
        if t is bool:
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS)
        else:
            p.add_argument(flag, type=t, default=argparse.SUPPRESS, metavar=t.__name__.upper())


def config_from_args(args, **extra) -> ExperimentConfig:
    """Preset, then config file, then individual flags (later wins)."""
    values = {}
    if getattr(args, "config", None):
        values.update(json.loads(args.config.read_text()))
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values.update({k: v for k, v in vars(args).items() if k in names and k != "output_dir"})
    values.update(extra)
    return ExperimentConfig.desk(**values) if args.desk else ExperimentConfig(**values)


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def _out(args, name) -> Path:
    return args.out if args.out is not None else default_output_root() / name


def cmd_generate(args):
    cfg = config_from_args(args)
    streams = Streams(cfg.seed)
    scm = build_scm(cfg, streams)
    out = _out(args, f"generate-{cfg.label()}-s{cfg.seed}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "scm.json").write_text(scm.to_json())
    (out / "dag.json").write_text(scm.dag.to_json())
    if args.samples:
        ds = ancestral_sample(scm, args.samples, streams("obs"))
        (out / "observational.csv").write_text(ds.to_csv(scm.names))
    if args.interventional:
        for k in range(scm.n):
            ds = intervene_sample(scm, k, args.interventional, streams("query", 0, k))
            (out / f"interventional_{k}.csv").write_text(ds.to_csv(scm.names))
    print(f"wrote {out}: {scm.n} nodes, {len(scm.dag.edges())} edges")


def _print_record(rec, cfg):
    series = rec.shd_series
    line = f"{cfg.label()} {cfg.strategy} seed={cfg.seed} initial_shd={rec.initial_shd}"
    if series:
        line += f" final_shd={series[-1]} aushd={aushd(series, len(series)):.3f}"
    print(line)


def cmd_run(args):
    cfg = config_from_args(args)
    cfg = dataclasses.replace(cfg, output_dir=str(_out(args, f"run-{cfg.label()}-{cfg.strategy}-s{cfg.seed}")))
    rec = run_online(cfg)
    _print_record(rec, cfg)
    print(f"outputs in {cfg.output_dir}")


def cmd_probe(args):
    cfg = config_from_args(args, rounds=args.rounds if "rounds" in vars(args) else 30)
    out = _out(args, f"probe-{cfg.label()}-{cfg.strategy}-v{args.free_node}-s{cfg.seed}")
    cfg = dataclasses.replace(cfg, output_dir=str(out))
    rec, hist = run_preinit_probe(cfg, args.free_node)
    _print_record(rec, cfg)
    print("node,count")
    for node, c in enumerate(hist):
        print(f"{node},{int(c)}")


def cmd_suite(args):
    seeds = _parse_seeds(args.seeds)
    configs = []
    for graph in args.graphs.split(","):
        for strategy in args.strategies.split(","):
            for seed in seeds:
                configs.append(config_from_args(args, graph=graph, strategy=strategy, seed=seed))
    out = _out(args, "suite")
    result = run_suite(configs, out, parallelism=args.parallelism, level=args.level)
    print(result["aushd_table.csv"], end="")
    for run_dir, err in result["failures"]:
        print(f"FAILED {run_dir}: {err}", file=sys.stderr)
    print(f"tables in {out}")
    return 1 if result["failures"] else 0


def cmd_eval(args):
    root = args.path
    runs = sorted(p.parent for p in root.rglob("DONE"))
    if not runs:
        print(f"no finished runs under {root}", file=sys.stderr)
        return 1
    tables = aggregate_runs(runs, root if args.write else None, level=args.level)
    for name in ("aushd_table.csv", "shd_table.csv", "eaushd_table.csv"):
        print(f"# {name}")
        print(tables[name], end="")
    return 0


def cmd_parse_bif(args):
    doc = bif.load_bif(args.file)
    for w in doc.warnings:
        print(f"warning: {w}", file=sys.stderr)
    scm = bif.to_scm(doc)
    info = bif.summary(scm)
    print(f"network: {doc.name}")
    print(f"nodes: {info['nodes']}")
    print(f"edges: {info['edges']}")
    print(f"max_in_degree: {info['max_in_degree']}")
    if args.json:
        args.json.write_text(scm.to_json())
        print(f"wrote {args.json}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalprobe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a ground-truth SCM and optionally sample data")
    _add_config_flags(p)
    p.add_argument("--samples", type=int, default=0, help="observational rows to write")
    p.add_argument("--interventional", type=int, default=0, help="rows per single-node intervention")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="one online acquisition run")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="graphs x strategies x seeds, with aggregate tables")
    _add_config_flags(p, with_seed=False)
    p.add_argument("--graphs", required=True, help="comma list of graph sources")
    p.add_argument("--strategies", required=True, help="comma list of strategies")
    p.add_argument("--seeds", default="0-4", help="e.g. 0-4 or 0,3,7")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--level", type=float, default=0.90, help="bootstrap CI level")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("eval", help="recompute aggregate tables from saved runs")
    p.add_argument("path", type=Path)
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--write", action="store_true", help="write the tables next to the runs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("parse-bif", help="summarise a .bif file, optionally convert to JSON")
    p.add_argument("file", type=Path)
    p.add_argument("--json", type=Path)
    p.set_defaults(func=cmd_parse_bif)

    p = sub.add_parser("probe", help="pre-initialisation probe around one free node")
    _add_config_flags(p)
    p.add_argument("--free-node", type=int, required=True)
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except (ValueError, OSError, bif.BifError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
