"""Command-line entry points: gen, run, verify, bench."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time

from .errors import ConsistencyError, InvalidArgument
from .generators import KINDS, generate
from .geometry import AlgorithmConfig, read_points, write_points
from .pipeline import solve
from .verify import SUITES

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_CONSISTENCY = 0, 1, 2, 3

_CONFIG_KEYS = ("alpha", "beta", "h", "epsilon", "seed", "strategy", "strict_memory",
                "machine_memory_s", "jl_dim", "oracle_cap")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgument(message)


def build_config(args) -> AlgorithmConfig:
    """Flags override the JSON config file, which overrides the defaults."""
    values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data = json.load(fh)
        unknown = set(data) - set(_CONFIG_KEYS)
        if unknown:
            raise InvalidArgument(f"unknown config keys {sorted(unknown)}")
        values.update(data)
    for key in _CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return AlgorithmConfig(**values)


def cmd_gen(args) -> int:
    pts = generate(args.kind, args.n, args.d, args.seed, k=args.k, length=args.length,
                   alpha=args.alpha)
    write_points(pts, args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    pts = read_points(args.input)
    cfg = build_config(args)
    res = solve(pts, cfg, oracle=args.oracle)
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "report.json"), "w") as fh:
        json.dump(res.report(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, obj in (("tree.txt", res.tree), ("tour.txt", res.tour),
                      ("cycle.txt", res.cycle), ("hierarchy.txt", res.hierarchy)):
        with open(os.path.join(args.out_dir, name), "w") as fh:
            obj.dump(fh)
    ratio = "n/a" if res.ratio is None else f"{res.ratio:.4f}"
    print(f"n={pts.n} tree_cost={res.tree.cost:.6g} ratio={ratio} "
          f"rounds={res.ledger.rounds}")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = [s for s in (args.suite or "").split(",") if s] if args.suite is not None \
        else list(SUITES)
    bad = [s for s in names if s not in SUITES]
    if bad:
        raise InvalidArgument(f"unknown suite(s) {bad}; choose from {sorted(SUITES)}")
    all_ok = True
    for name in names:
        ok, total = SUITES[name](seed=args.seed)
        all_ok &= ok == total
        print(f"{name}: {ok}/{total} {'PASS' if ok == total else 'FAIL'}")
    if not names:
        print("no suites selected")
    return EXIT_OK if all_ok else EXIT_CONSISTENCY


def _ints(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise InvalidArgument(f"expected comma-separated integers, got {text!r}")


BENCH_COLUMNS = ["n", "d", "seed", "strategy", "tree_cost", "exact_cost", "ratio",
                 "rounds", "space", "wall_ms"]


def bench_rows(ns, ds, seeds, strategies, kind="uniform", timing=True):
    for n in ns:
        for d in ds:
            for seed in seeds:
                pts = generate(kind, n, d, seed)
                for strategy in strategies:
                    cfg = AlgorithmConfig(seed=seed, strategy=strategy)
                    t0 = time.perf_counter()
                    res = solve(pts, cfg, oracle=n <= cfg.oracle_cap)
                    ms = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
                    yield {
                        "n": n, "d": d, "seed": seed, "strategy": strategy,
                        "tree_cost": f"{res.tree.cost:.10g}",
                        "exact_cost": "" if res.exact_mst_cost is None
                        else f"{res.exact_mst_cost:.10g}",
                        "ratio": "" if res.ratio is None else f"{res.ratio:.10g}",
                        "rounds": res.ledger.rounds,
                        "space": res.ledger.total_space_words,
                        "wall_ms": f"{ms:.1f}",
                    }


def cmd_bench(args) -> int:
    rows = bench_rows(_ints(args.n), _ints(args.d), _ints(args.seeds),
                      [s for s in args.strategy.split(",") if s], args.kind)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mpc-emst")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic point file")
    g.add_argument("kind", choices=KINDS)
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--k", type=int, default=3, help="parallel-paths: extra copies")
    g.add_argument("--length", type=int, help="parallel-paths: points per path")
    g.add_argument("--alpha", type=float, default=16.0, help="parallel-paths: offset scale")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run the pipeline on a point file")
    r.add_argument("--input", required=True)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--config", help="JSON file of config values")
    r.add_argument("--alpha", type=int)
    r.add_argument("--beta", type=float)
    r.add_argument("--h", type=int)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--strategy", choices=("exact-threshold", "cell-leader", "sampled-leader"))
    r.add_argument("--strict-memory", dest="strict_memory", action="store_true", default=None)
    r.add_argument("--machine-mem", dest="machine_memory_s", type=int)
    r.add_argument("--jl-dim", dest="jl_dim", type=int)
    r.add_argument("--oracle-cap", dest="oracle_cap", type=int)
    r.add_argument("--oracle", dest="oracle", action=argparse.BooleanOptionalAction,
                   default=True)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run invariant suites")
    v.add_argument("--suite", help=f"comma list from {','.join(SUITES)}; empty selects none")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="ratio/rounds CSV over a grid")
    b.add_argument("--n", default="100,300")
    b.add_argument("--d", default="2")
    b.add_argument("--seeds", default="0")
    b.add_argument("--strategy", default="cell-leader")
    b.add_argument("--kind", choices=KINDS, default="uniform")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except InvalidArgument as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConsistencyError as exc:
        print(f"consistency error in stage {exc.stage}: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except InvalidArgument as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
