"""The ``mastlab`` command line interface.

Subcommands: sample | mast | cascade | couple | audit | constants |
experiment.  Exit codes: 0 on success, 2 on a budget refusal, 1 on an
invariant or domain failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import __version__
from .audit import Correspondence, compute_constants, martingale_path
from .cascade import build_cascade, dump_cascade_jsonl
from .cladogram import from_newick, sample_uniform, to_newick
from .errors import BudgetError, DomainError, InvariantError
from .excursion import glue_coupling
from .harness import ExperimentConfig, run_experiment, write_csv, write_jsonl
from .mast import mast
from .randkit import substream


def _out_stream(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def _cmd_sample(args) -> int:
    rng = substream(args.seed, 0)
    fp, close = _out_stream(args.out)
    try:
        for _ in range(args.count):
            fp.write(to_newick(sample_uniform(args.n, rng)) + "\n")
    finally:
        if close:
            fp.close()
    return 0


def _cmd_mast(args) -> int:
    with open(args.tree_a) as fa:
        t1 = from_newick(fa.read())
    with open(args.tree_b) as fb:
        t2 = from_newick(fb.read())
    res = mast(t1, t2)
    out = {"size": res.size, "witness": sorted(res.witness)}
    fp, close = _out_stream(args.out)
    try:
        fp.write(json.dumps(out) + "\n")
    finally:
        if close:
            fp.close()
    return 0


def _cmd_cascade(args) -> int:
    rng = substream(args.seed, 0)
    c = build_cascade(args.depth, rng)
    fp, close = _out_stream(args.out)
    try:
        dump_cascade_jsonl(c, fp)
    finally:
        if close:
            fp.close()
    return 0


def _cmd_couple(args) -> int:
    rng = substream(args.seed, 0)
    coupled, dist = glue_coupling(args.n, rng, N=args.grid)
    fp, close = _out_stream(args.out)
    try:
        writer = csv.writer(fp)
        writer.writerow([f"x{j + 1}" for j in range(coupled.n)])
        for row in dist:
            writer.writerow([repr(float(x)) for x in row])
    finally:
        if close:
            fp.close()
    if args.meta_out:
        with open(args.meta_out, "w") as mf:
            json.dump(coupled.metadata(), mf)
            mf.write("\n")
    return 0


def _cmd_audit(args) -> int:
    src = build_cascade(args.depth, substream(args.seed, 0))
    img = build_cascade(args.depth, substream(args.seed, 1))
    corr = Correspondence.of_pair(src, img)
    path = src.descend_size_biased(substream(args.seed, 2))
    report = martingale_path(
        corr, path, alpha=args.alpha, delta=args.delta, mu=args.mu
    )
    fp, close = _out_stream(args.out)
    try:
        fp.write(json.dumps(report.as_dict()) + "\n")
    finally:
        if close:
            fp.close()
    return 0


def _cmd_constants(args) -> int:
    ledger = compute_constants()
    fp, close = _out_stream(args.out)
    try:
        if args.format == "json":
            fp.write(json.dumps(ledger.as_dict()) + "\n")
        else:
            fp.write(f"{'constant':<12}{'log10':>14}  {'value':<12} checks\n")
            for e in ledger.entries:
                status = "; ".join(
                    f"{'PASS' if c.ok else 'FAIL'} {c.requirement}" for c in e.checks
                )
                fp.write(f"{e.name:<12}{e.log10:>14.4f}  {e.display:<12} {status}\n")
    finally:
        if close:
            fp.close()
    return 0


def _cmd_experiment(args) -> int:
    with open(args.config) as fc:
        cfg = ExperimentConfig.from_json(fc.read())
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out if args.out is not None else cfg.out
    fmt = args.format if args.format is not None else cfg.format
    rows = run_experiment(cfg)
    fp, close = _out_stream(out)
    try:
        if fmt == "csv":
            write_csv(rows, fp)
        else:
            write_jsonl(rows, fp)
    finally:
        if close:
            fp.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mastlab", description=__doc__)
    p.add_argument("--version", action="version", version=f"mastlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="sample uniform cladograms as Newick")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_sample)

    sp = sub.add_parser("mast", help="maximum agreement subtree of two Newick files")
    sp.add_argument("--tree-a", required=True)
    sp.add_argument("--tree-b", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_mast)

    sp = sub.add_parser("cascade", help="sample a mass cascade and dump JSONL")
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_cascade)

    sp = sub.add_parser("couple", help="glued coupled tree: distance matrix CSV")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--grid", type=int, default=1 << 14)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.add_argument("--meta-out", default=None, help="write backbone/weights JSON here")
    sp.set_defaults(func=_cmd_couple)

    sp = sub.add_parser("audit", help="audit a random correspondence along a path")
    sp.add_argument("--depth", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--mu", type=float, default=0.00025)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_audit)

    sp = sub.add_parser("constants", help="print the verified constants ledger")
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_constants)

    sp = sub.add_parser("experiment", help="run an experiment from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sp.add_argument("--out", default=None, help="overrides the config's output path")
    sp.add_argument("--format", choices=("jsonl", "csv"), default=None)
    sp.set_defaults(func=_cmd_experiment)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return 2
    except (DomainError, InvariantError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
