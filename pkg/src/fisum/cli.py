"""Command-line front end: ``fisum <subcommand> ...``.

Exit codes: 0 success, 1 validation/input failure, 2 verification
counterexample found.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench as _bench
from .engine import DEFAULT_ENUMERATION_CAP, ctps
from .errors import (IngestionError, OrderMismatchError, TreeSchemaError,
                     TreeValidationError)
from .fis import FisLayerConfig, demo_train
from .grid import field_reduce, load_tensor, save_field
from .tree import FAMILIES, generate, to_json, tree_from_dict, validate
from .verify import run_verification

EXIT_OK, EXIT_INVALID, EXIT_COUNTEREXAMPLE = 0, 1, 2

_INPUT_ERRORS = (IngestionError, TreeSchemaError, TreeValidationError, OrderMismatchError,
                 ValueError, OSError)


def _load_trees(path):
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict) and "trees" in doc:
        doc = doc["trees"]
    if isinstance(doc, dict):
        doc = [doc]
    return [tree_from_dict(d) for d in doc]


def _numbered(path: Path, i: int, n: int) -> Path:
    return path if n == 1 else path.with_name(f"{path.stem}_{i}{path.suffix}")


def cmd_features(args):
    z = load_tensor(args.input, args.input_format)
    if args.trees:
        trees = _load_trees(args.trees)
    else:
        trees = [generate(args.family, args.nodes, z.order, z.channels, args.seed + i)
                 for i in range(args.n_trees)]
    for t in trees:
        validate(t, z.channels)
    fields = [ctps(t, z, args.semiring) for t in trees]
    if args.reduce == "sum":
        text = json.dumps({"cts": [field_reduce(f) for f in fields]})
        if args.out:
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
        return EXIT_OK
    if not args.out:
        raise ValueError("--reduce none needs --out")
    out = Path(args.out)
    for i, f in enumerate(fields):
        save_field(f, _numbered(out, i, len(fields)), args.format)
    return EXIT_OK


def cmd_verify(args):
    report = run_verification(
        trials=args.trials, max_nodes=args.max_nodes, max_extent=args.max_extent,
        order=args.order, semiring=args.semiring, seed=args.seed, family=args.family,
        cap=args.cap, corrupt=args.corrupt,
    )
    print(f"{report.passed}/{report.total} ok"
          + (f", {report.skipped} skipped (enumeration cap)" if report.skipped else ""))
    if report.failed:
        print("counterexample:", json.dumps(report.counterexample))
        return EXIT_COUNTEREXAMPLE
    return EXIT_OK


def cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = _bench.bench_sizes(sizes, args.nodes, args.semiring, args.repeats,
                              order=args.order, memory=args.memory)
    cols = ["size", "median_seconds", "ratio"] + (["peak_bytes"] if args.memory else [])
    print(",".join(cols))
    for r in rows:
        print(",".join("" if r[c] is None else (f"{r[c]:.6g}" if isinstance(r[c], float)
                                                else str(r[c])) for c in cols))
    return EXIT_OK


def cmd_gen_tree(args):
    t = generate(args.family, args.nodes, args.order, args.channels, args.seed)
    text = to_json(t)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_demo_train(args):
    cfg = FisLayerConfig(n_trees=args.trees, nodes_per_tree=args.nodes, in_channels=1,
                         semiring=args.semiring, seed=args.seed, family=args.family)
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        demo_train(cfg, epochs=args.epochs, lr=args.lr, seed=args.seed,
                   log=lambda rec: print(json.dumps(rec), file=out, flush=True))
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fisum", description="Corner-tree iterated sums.")
    sub = p.add_subparsers(dest="command", required=True)

    semi = dict(choices=["real", "max-plus"], default="real")

    f = sub.add_parser("features", help="CTPS fields or CTS values of a tensor file")
    f.add_argument("input")
    f.add_argument("--input-format", choices=["npy", "png", "csv"])
    f.add_argument("--trees", help="tree JSON (one tree, a list, or {'trees': [...]})")
    f.add_argument("--family", choices=FAMILIES, default="random")
    f.add_argument("--nodes", type=int, default=3)
    f.add_argument("--n-trees", type=int, default=1)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--semiring", **semi)
    f.add_argument("--reduce", choices=["none", "sum"], default="none")
    f.add_argument("--format", choices=["npy", "csv", "json"])
    f.add_argument("--out")
    f.set_defaults(func=cmd_features)

    v = sub.add_parser("verify", help="engine vs brute-force oracle")
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--max-nodes", type=int, default=4)
    v.add_argument("--max-extent", type=int, default=5)
    v.add_argument("--order", type=int, default=2)
    v.add_argument("--semiring", **semi)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--family", choices=FAMILIES)
    v.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
    v.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="CTPS wall time over square grids (CSV)")
    b.add_argument("--sizes", default="128,256,512")
    b.add_argument("--nodes", type=int, default=5)
    b.add_argument("--semiring", **semi)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--order", type=int, default=2)
    b.add_argument("--memory", action="store_true", help="add a peak_bytes column")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen-tree", help="seeded random corner tree as JSON")
    g.add_argument("--family", choices=FAMILIES, default="random")
    g.add_argument("--nodes", type=int, default=3)
    g.add_argument("--order", type=int, default=2)
    g.add_argument("--channels", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_tree)

    t = sub.add_parser("demo-train", help="train on synthetic textures (JSON lines)")
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--semiring", **semi)
    t.add_argument("--trees", type=int, default=8)
    t.add_argument("--nodes", type=int, default=2)
    t.add_argument("--family", choices=FAMILIES, default="random")
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--out")
    t.set_defaults(func=cmd_demo_train)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
