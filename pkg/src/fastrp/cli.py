"""``fastrp`` command line.

Exit codes: 1 usage, 2 I/O, 3 parse, 4 numeric, 5 partial failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace


from . import engine
from .engine import FastRpConfig
from .errors import FastRPError, NumericError, ParseError
from .evaluate import (
    evaluate_classification,
    knn_query,
    macro_f1_evaluator,
    parse_labels,
)
from .graph import generate_erdos_renyi, write_csr_cache
from .io import file_digest, load_embedding, load_graph, save_embedding

log = logging.getLogger("fastrp")

EXIT_USAGE, EXIT_IO, EXIT_PARSE, EXIT_NUMERIC, EXIT_PARTIAL = 1, 2, 3, 4, 5


class UsageError(FastRPError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Stopwatch:
    """Wall-clock and process-CPU time per named stage."""

    def __init__(self):
        self.stages: dict[str, dict[str, float]] = {}

    @contextlib.contextmanager
    def stage(self, name):
        w0, c0 = time.perf_counter(), time.process_time()
        yield
        self.stages[name] = {
            "wall": time.perf_counter() - w0,
            "cpu": time.process_time() - c0,
        }


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    return [int(float(v)) for v in _floats(text)]


def _weight_grid(text: str) -> list[tuple[float, ...]]:
    grid = [tuple(_floats(part)) for part in text.split(";") if part.strip()]
    if len({len(w) for w in grid}) > 1:
        raise UsageError("all weight vectors in a grid must have the same length")
    return grid


def _threads(args) -> int:
    requested = args.threads
    if requested is None and os.environ.get("FASTRP_THREADS"):
        requested = int(os.environ["FASTRP_THREADS"])
    return engine.set_threads(requested)


def _config_from_args(args) -> FastRpConfig:
    weights = tuple(_floats(args.weights)) if args.weights else None
    k = args.k if args.k is not None else (len(weights) if weights else engine.DEFAULT_K)
    if weights is None:
        if k != engine.DEFAULT_K:
            raise UsageError("--weights is required when --k differs from the default")
        weights = engine.DEFAULT_WEIGHTS
    try:
        return FastRpConfig(
            d=args.dim, k=k, beta=args.beta, weights=weights, s=args.sparsity,
            kind=args.kind, seed=args.seed, normalize_rows=args.normalize_rows,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _embed_once(graph_path, header, cfg, out, fmt, threads, timer=None):
    timer = timer or Stopwatch()
    with timer.stage("load"):
        g = load_graph(graph_path, header=header)
    with timer.stage("embed"):
        emb = engine.fastrp_embed(g, cfg)
    with timer.stage("write"):
        save_embedding(emb, out, fmt)
    entry = {
        "command": "embed",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "threads": threads,
        "graph": {
            "path": str(graph_path),
            "sha256": file_digest(graph_path),
            "header": header,
            "n": g.n,
            "m": g.m,
        },
        "timings": timer.stages,
        "outputs": {"embedding": str(out), "format": fmt, "sha256": file_digest(out)},
    }
    return g, emb, entry


def cmd_embed(args) -> int:
    threads = _threads(args)
    if args.from_manifest:
        with open(args.from_manifest) as fh:
            manifest = json.load(fh)
        entry = manifest["entries"][-1] if "entries" in manifest else manifest
        cfg = FastRpConfig.from_dict(entry["config"])
        graph_path = args.graph or entry["graph"]["path"]
        header = entry["graph"].get("header", False)
        out = args.out or entry["outputs"]["embedding"]
        fmt = entry["outputs"].get("format", "text")
        if file_digest(graph_path) != entry["graph"]["sha256"]:
            log.warning("graph digest differs from manifest")
    else:
        if not args.graph or not args.out:
            raise UsageError("--graph and --out are required")
        cfg = _config_from_args(args)
        graph_path, header, out, fmt = args.graph, args.header, args.out, args.format

    if args.cache:
        with open(args.cache, "wb") as fh:
            write_csr_cache(load_graph(graph_path, header=header), fh)

    g, _, entry = _embed_once(graph_path, header, cfg, out, fmt, threads)
    manifest_path = args.manifest or f"{out}.manifest.json"
    entry["outputs"]["manifest"] = str(manifest_path)
    _write_manifest(manifest_path, entry)
    t = entry["timings"]
    print(f"n={g.n} m={g.m} d={cfg.d} k={cfg.k}")
    for stage, v in t.items():
        print(f"{stage:>6}: cpu {v['cpu']:.3f}s wall {v['wall']:.3f}s")
    return 0


def _read_queries(args) -> list[str]:
    if args.query:
        return [q for part in args.query for q in part.split(",") if q.strip()]
    return [tok for line in sys.stdin for tok in line.replace(",", " ").split()]


def cmd_knn(args) -> int:
    emb = load_embedding(args.emb)
    failures = 0
    queries = _read_queries(args)
    for q in queries:
        try:
            node = int(q)
            res = knn_query(emb, node, args.k)
        except ValueError:
            print(f"{q}\terror: not a node id")
            failures += 1
            continue
        except FastRPError as exc:
            msg = "zero embedding" if "zero embedding" in str(exc) else str(exc)
            print(f"{q}\terror: {msg}")
            failures += 1
            continue
        print(f"# query {node}")
        for rank, (nb, sim) in enumerate(res.neighbors, start=1):
            print(f"{node}\t{rank}\t{nb}\t{sim:.6f}")
    return EXIT_PARTIAL if failures else 0


def cmd_eval(args) -> int:
    _threads(args)
    emb = load_embedding(args.emb)
    with open(args.labels) as fh:
        labels = parse_labels(fh, emb.shape[0])
    fractions = _floats(args.fractions)
    if not fractions or any(not 0 < f < 1 for f in fractions):
        raise UsageError("fractions must lie in (0, 1)")
    rows = []
    for frac in fractions:
        rep = evaluate_classification(
            emb, labels, frac, args.trials, args.seed, args.l2, args.standardize
        )
        rows.append(rep)
    print(f"{'fraction':>9} {'macro_f1':>9} {'micro_f1':>9} {'accuracy':>9} {'trials':>6}")
    for r in rows:
        print(f"{r.train_fraction:>9.4f} {r.macro_f1:>9.4f} {r.micro_f1:>9.4f} {r.accuracy:>9.4f} {r.trials:>6d}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["train_fraction", "macro_f1", "micro_f1", "accuracy", "trials"])
            for r in rows:
                w.writerow([r.train_fraction, r.macro_f1, r.micro_f1, r.accuracy, r.trials])
    return 0


def cmd_sweep(args) -> int:
    threads = _threads(args)
    betas = _floats(args.betas)
    if args.weight_grid:
        grid = _weight_grid(args.weight_grid)
    else:
        grid = [(0.0, 0.0, 1.0, a) for a in _floats(args.alpha4)]
    if not betas or not grid:
        raise UsageError("sweep grids must be non-empty")
    timer = Stopwatch()
    with timer.stage("load"):
        g = load_graph(args.graph, header=args.header)
    with open(args.labels) as fh:
        labels = parse_labels(fh, g.n)
    base = FastRpConfig(d=args.tune_dim, k=len(grid[0]), beta=betas[0], weights=grid[0],
                        s=args.sparsity, kind=args.kind, seed=args.seed)
    evaluator = macro_f1_evaluator(labels, args.val_fraction, args.trials, args.seed, args.l2)
    with timer.stage("sweep"):
        result = engine.sweep_grid(g, base, betas, grid, evaluator)
    print(f"power computations: {result.power_computations}  merges: {result.merges}")
    for row in result.table:
        print(f"beta={row['beta']:+.3f} weights={','.join(f'{w:g}' for w in row['weights'])} score={row['score']:.4f}")
    best = result.best_config(base)
    print(f"best: beta={best.beta:g} weights={','.join(f'{w:g}' for w in best.weights)} score={result.best_score:.4f}")

    entries = [{
        "command": "sweep",
        "config": best.to_dict(),
        "seed": best.seed,
        "threads": threads,
        "graph": {"path": str(args.graph), "sha256": file_digest(args.graph), "header": args.header,
                  "n": g.n, "m": g.m},
        "labels": {"path": str(args.labels), "sha256": file_digest(args.labels)},
        "table": [{**r, "weights": list(r["weights"])} for r in result.table],
        "power_computations": result.power_computations,
        "timings": timer.stages,
    }]
    if args.out:
        final = replace(best, d=args.final_dim)
        _, _, entry = _embed_once(args.graph, args.header, final, args.out, args.format, threads)
        entries.append(entry)
    manifest_path = args.manifest or (f"{args.out}.manifest.json" if args.out else None)
    if manifest_path:
        _write_manifest(manifest_path, {"entries": entries})
    return 0


def _estimate_bytes(n: int, m: int, d: int) -> int:
    # sampled edge ids, symmetrized keys + sort scratch, CSR, three n x d float32 blocks
    return 8 * m * 2 + 8 * 4 * m * 2 + 4 * 2 * m + 8 * n + 3 * 4 * n * d


def _available_bytes() -> int:
    import psutil

    return psutil.virtual_memory().available


def run_bench(ns, ms, dim, k, seed, beta=engine.DEFAULT_BETA):
    """Yield one timing row per feasible (n, m) point."""
    for n in ns:
        for m in ms:
            need = _estimate_bytes(n, m, dim)
            if m > n * (n - 1) // 2 or need > 0.8 * _available_bytes():
                log.warning("skipping n=%d m=%d (infeasible or ~%.1f GB needed)", n, m, need / 1e9)
                continue
            timer = Stopwatch()
            with timer.stage("generate"):
                g = generate_erdos_renyi(n, m, seed)
            weights = engine.DEFAULT_WEIGHTS if k == engine.DEFAULT_K else (0.0,) * (k - 1) + (1.0,)
            cfg = FastRpConfig(d=dim, k=k, beta=beta, weights=weights, seed=seed)
            with timer.stage("embed"):
                engine.fastrp_embed(g, cfg)
            del g
            yield {
                "n": n, "m": m, "d": dim, "k": k,
                "generate_cpu": timer.stages["generate"]["cpu"],
                "embed_cpu": timer.stages["embed"]["cpu"],
                "embed_wall": timer.stages["embed"]["wall"],
            }


def cmd_bench(args) -> int:
    _threads(args)
    engine.fastrp_embed(generate_erdos_renyi(16, 16, 0), FastRpConfig(d=4))  # compile kernels
    fields = ["n", "m", "d", "k", "generate_cpu", "embed_cpu", "embed_wall"]
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=fields)
        w.writeheader()
        for row in run_bench(_ints(args.n), _ints(args.m), args.dim, args.k, args.seed):
            w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in row.items()})
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _add_common(p):
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: FASTRP_THREADS or all cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_projection(p):
    p.add_argument("--sparsity", type=float, default=None, help="s (default sqrt(n))")
    p.add_argument("--kind", choices=["very-sparse", "gaussian"], default="very-sparse")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fastrp", description="FastRP node embeddings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("embed", help="embed a graph")
    p.add_argument("--graph", help="edge list or FRPG cache")
    p.add_argument("--header", action="store_true", help="first data line is 'n m'")
    p.add_argument("--dim", type=int, default=engine.DEFAULT_DIM)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--beta", type=float, default=engine.DEFAULT_BETA)
    p.add_argument("--weights", default=None, help="comma list alpha_1..alpha_k")
    p.add_argument("--normalize-rows", action="store_true")
    _add_projection(p)
    p.add_argument("--out")
    p.add_argument("--format", choices=["text", "binary"], default=None)
    p.add_argument("--manifest", help="manifest path (default OUT.manifest.json)")
    p.add_argument("--from-manifest", help="re-run the configuration stored in a manifest")
    p.add_argument("--cache", help="also write the graph as a binary FRPG cache")
    _add_common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("knn", help="cosine nearest neighbours")
    p.add_argument("--emb", required=True)
    p.add_argument("--query", action="append", help="node id(s); read stdin if omitted")
    p.add_argument("--k", type=int, default=5)
    _add_common(p)
    p.set_defaults(func=cmd_knn)

    p = sub.add_parser("eval", help="multi-label node classification")
    p.add_argument("--emb", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--fractions", default="0.1")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=None, help="L2 strength (default 1/n_train)")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--csv")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="tune beta and weights on a validation split")
    p.add_argument("--graph", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--labels", required=True)
    p.add_argument("--betas", default="-1,-0.75,-0.5,-0.25,0",
                   help="comma list; write --betas=-1,-0.5 when it starts with '-'")
    p.add_argument("--alpha4", default=",".join(str(2.0**e) for e in range(-3, 7)))
    p.add_argument("--weight-grid", help="';'-separated weight vectors; overrides --alpha4")
    p.add_argument("--val-fraction", type=float, default=0.01)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--l2", type=float, default=None, help="L2 strength (default 1/n_train)")
    p.add_argument("--tune-dim", type=int, default=64)
    p.add_argument("--final-dim", type=int, default=engine.DEFAULT_DIM)
    _add_projection(p)
    p.add_argument("--out", help="re-embed at --final-dim with the best config")
    p.add_argument("--format", choices=["text", "binary"], default=None)
    p.add_argument("--manifest")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="CPU time on G(n, m) random graphs")
    p.add_argument("--n", required=True, help="comma list of node counts")
    p.add_argument("--m", required=True, help="comma list of edge counts")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--k", type=int, default=engine.DEFAULT_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    _add_common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fastrp: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"fastrp: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NumericError as exc:
        print(f"fastrp: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"fastrp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FastRPError as exc:
        print(f"fastrp: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"fastrp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
