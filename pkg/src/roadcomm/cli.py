"""Command-line front end: gen, build, query, cquery, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 oracle mismatch.
ROADCOMM_SCORING={dot|cosine} overrides the scoring mode.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bench import AXES, BenchConfig, rows_to_csv, run_experiment
from .continuous import run_cquery
from .errors import RoadCommError
from .graph import load_graph
from .index import build_search_index
from .persist import load_index, save_index
from .query import run_query
from .similarity import SCORING_MODES


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_point(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _scoring(args_value: str | None) -> str:
    mode = os.environ.get("ROADCOMM_SCORING", args_value or "dot")
    if mode not in SCORING_MODES:
        raise RoadCommError(f"bad scoring mode {mode!r}; expected {SCORING_MODES}")
    return mode


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="roadcomm",
                  description="Top-k community similarity search over road networks")
    sub = top.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[], help="generate a synthetic dataset",
                       add_help=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--mode", choices=["uniform", "clustered"], default="uniform")
    g.add_argument("--cluster-count", type=int, default=5)
    g.add_argument("--deg-min", type=int, default=3)
    g.add_argument("--deg-max", type=int, default=3)
    g.add_argument("--poi-types", type=int, default=4)
    g.add_argument("--poi-mean", type=float, default=3.0)
    g.add_argument("--extent", type=float, default=100.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)

    b = sub.add_parser("build", help="ingest graph files and build the index")
    b.add_argument("--graph-dir", required=True)
    b.add_argument("--radius", type=float, required=True)
    b.add_argument("--fanout", type=int, default=32)
    b.add_argument("--poi-types", type=int, default=None,
                   help="POI type count (default: inferred from the POI file)")
    b.add_argument("--scoring", choices=list(SCORING_MODES), default=None)
    b.add_argument("--out", required=True)

    q = sub.add_parser("query", help="run one top-k query")
    q.add_argument("--index", required=True)
    q.add_argument("--spec", help="JSON query spec (flags override its fields)")
    q.add_argument("--center", type=_parse_point)
    q.add_argument("--vertex", type=int)
    q.add_argument("--radius", type=float)
    q.add_argument("--k", type=int)
    q.add_argument("--theta", type=float)
    q.add_argument("--vq", type=_parse_point)
    q.add_argument("--oracle", action="store_true")
    q.add_argument("--no-timing", action="store_true")
    q.add_argument("--out")

    c = sub.add_parser("cquery", help="run one continuous top-k query")
    c.add_argument("--index", required=True)
    c.add_argument("--spec", help="JSON query spec (flags override its fields)")
    c.add_argument("--from", dest="q_from", type=_parse_point)
    c.add_argument("--to", dest="q_to", type=_parse_point)
    c.add_argument("--radius", type=float)
    c.add_argument("--k", type=int)
    c.add_argument("--theta", type=float)
    c.add_argument("--vq", type=_parse_point)
    c.add_argument("--oracle", action="store_true")
    c.add_argument("--no-timing", action="store_true")
    c.add_argument("--out")

    e = sub.add_parser("bench", help="run a parameter-axis experiment")
    e.add_argument("--index", help="benchmark an existing index (k/theta/L axes)")
    e.add_argument("--gen-spec", help="JSON generation overrides")
    e.add_argument("--axis", choices=list(AXES), required=True)
    e.add_argument("--values", required=True,
                   help="comma-separated axis values")
    e.add_argument("--trials", type=int, default=15)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--no-timing", action="store_true")
    e.add_argument("--out")
    return top


def _cmd_gen(args) -> int:
    from .synth import write_dataset
    write_dataset(args.out_dir, args.n, mode=args.mode,
                  cluster_count=args.cluster_count, deg_min=args.deg_min,
                  deg_max=args.deg_max, poi_type_count=args.poi_types,
                  poi_mean=args.poi_mean, extent=args.extent, seed=args.seed)
    print(f"wrote nodes.txt/edges.txt/pois.txt to {args.out_dir}")
    return 0


def _infer_poi_types(pois_path: Path) -> int:
    best = -1
    with open(pois_path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) >= 2:
                best = max(best, int(parts[1]))
    return best + 1 if best >= 0 else 1


def _cmd_build(args) -> int:
    d = Path(args.graph_dir)
    m = args.poi_types if args.poi_types else _infer_poi_types(d / "pois.txt")
    g = load_graph(d / "nodes.txt", d / "edges.txt", d / "pois.txt", m)
    index = build_search_index(g, radius=args.radius, fanout=args.fanout,
                               scoring=_scoring(args.scoring))
    save_index(index, args.out)
    stats = index.tree.stats()
    stats["vertices"] = g.vertex_count
    stats["edges"] = g.edge_count
    stats["radius"] = args.radius
    print(json.dumps(stats))
    return 0


def _spec_val(args, doc: dict, flag: str, key: str, required: bool = True):
    v = getattr(args, flag)
    if v is None:
        v = doc.get(key)
    if v is None and required:
        raise RoadCommError(f"missing --{flag.replace('_', '-')} (or {key!r} in --spec)")
    return v


def _cmd_query(args) -> int:
    index = load_index(args.index)
    index.scoring = _scoring(index.scoring)
    doc = json.loads(Path(args.spec).read_text()) if args.spec else {}
    center = args.center
    if center is None and args.vertex is not None:
        center = index.graph.point(args.vertex)
    if center is None:
        c = doc.get("center")
        if isinstance(c, (int, float)) and not isinstance(c, bool):
            center = index.graph.point(int(c))
        elif c is not None:
            center = (float(c[0]), float(c[1]))
    if center is None:
        raise RoadCommError("missing --center/--vertex (or 'center' in --spec)")
    k = int(_spec_val(args, doc, "k", "k"))
    theta = float(_spec_val(args, doc, "theta", "theta"))
    radius = args.radius if args.radius is not None else doc.get("radius")
    vq = args.vq if args.vq is not None else doc.get("v_q")
    res, base = run_query(index, center, k, theta, v_q=vq, radius=radius,
                          with_oracle=args.oracle)
    if args.no_timing:
        res.stats.wall_time = 0.0
    _write_or_print(res.to_json(), args.out)
    if args.oracle and res.entries != base.entries:
        print("oracle mismatch:", file=sys.stderr)
        print(f"  indexed:  {res.entries}", file=sys.stderr)
        print(f"  baseline: {base.entries}", file=sys.stderr)
        return 3
    return 0


def _cmd_cquery(args) -> int:
    index = load_index(args.index)
    index.scoring = _scoring(index.scoring)
    doc = json.loads(Path(args.spec).read_text()) if args.spec else {}
    q_st = args.q_from if args.q_from is not None else doc.get("q_st")
    q_ed = args.q_to if args.q_to is not None else doc.get("q_ed")
    if q_st is None or q_ed is None:
        raise RoadCommError("missing --from/--to (or q_st/q_ed in --spec)")
    k = int(_spec_val(args, doc, "k", "k"))
    theta = float(_spec_val(args, doc, "theta", "theta"))
    radius = args.radius if args.radius is not None else doc.get("radius")
    vq = args.vq if args.vq is not None else doc.get("v_q")
    res, base = run_cquery(index, tuple(q_st), tuple(q_ed), k, theta, v_q=vq,
                           radius=radius, with_oracle=args.oracle)
    if args.no_timing:
        res.wall_time = 0.0
        for iv in res.intervals:
            iv.result.stats.wall_time = 0.0
    _write_or_print(res.to_json(), args.out)
    if args.oracle:
        mine = [(iv.t_lo, iv.t_hi, iv.result.entries) for iv in res.intervals]
        theirs = [(iv.t_lo, iv.t_hi, iv.result.entries) for iv in base.intervals]
        if mine != theirs:
            print("oracle mismatch:", file=sys.stderr)
            for a, b in zip(mine, theirs):
                if a != b:
                    print(f"  indexed:  {a}\n  baseline: {b}", file=sys.stderr)
            return 3
    return 0


def _cmd_bench(args) -> int:
    values = []
    for tok in args.values.split(","):
        tok = tok.strip()
        values.append(int(tok) if tok.lstrip("-").isdigit() else float(tok))
    overrides = {}
    if args.gen_spec:
        overrides = json.loads(Path(args.gen_spec).read_text())
    prebuilt = load_index(args.index) if args.index else None
    config = BenchConfig(axis=args.axis, values=values, trials=args.trials,
                         seed=args.seed, no_timing=args.no_timing,
                         prebuilt=prebuilt, **overrides)
    rows = run_experiment(config)
    _write_or_print(rows_to_csv(rows).rstrip("\n"), args.out)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "build": _cmd_build,
    "query": _cmd_query,
    "cquery": _cmd_cquery,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except RoadCommError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
