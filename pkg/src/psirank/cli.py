"""Batch command-line front-end.

Every command is a pure function of (input files, flags, seed): it writes CSV/JSON
outputs plus a manifest.json recording the package version, the flags, and the run
diagnostics, and never embeds wall-clock state, so identical invocations produce
byte-identical files. Plotting is left to external tools.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, emulator, graph as graphmod, ingest, metrics, model, simulator

__all__ = ["main"]


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, payload: dict) -> None:
    doc = {"package": "psirank", "version": __version__, "command": command}
    doc.update(payload)
    with open(out / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _read_scores(path, column: str) -> tuple[np.ndarray, np.ndarray]:
    users, vals = [], []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if column not in header:
            raise SystemExit(f"column {column!r} not found in {path} (has {header})")
        ci = header.index(column)
        ui = header.index("user_id")
        for line in fh:
            fields = line.strip().split(",")
            users.append(int(fields[ui]))
            vals.append(float(fields[ci]))
    return np.asarray(users), np.asarray(vals)


def _scores_rows(labels, psi, psi_tilde, order):
    pos = {int(u): k + 1 for k, u in enumerate(order)}
    for k, lab in enumerate(labels):
        yield (int(lab), float(psi[k]), float(psi_tilde[k]), pos[int(lab)])


# -- commands -----------------------------------------------------------------

def cmd_generate(args) -> None:
    out = _out_dir(args)
    if args.kind == "tree":
        g = graphmod.generate_binary_tree(args.depth)
        params = {"depth": args.depth}
    elif args.kind == "scale-free":
        g = graphmod.generate_scale_free(args.n, args.exponent, args.seed)
        params = {"n": args.n, "exponent": args.exponent, "seed": args.seed}
    else:
        g = graphmod.generate_erdos_renyi(args.n, args.mean_degree, args.seed)
        params = {"n": args.n, "mean_degree": args.mean_degree, "seed": args.seed}
    graphmod.save_edge_list(g, out / "graph.tsv")
    payload = {"kind": args.kind, "n_users": g.n_users, "n_edges": g.n_edges, **params}
    if args.lam is not None or args.mu is not None:
        lam = args.lam if args.lam is not None else 0.0
        mu = args.mu if args.mu is not None else 0.0
        rates = model.ActivityRates(np.full(g.n_users, lam), np.full(g.n_users, mu))
        model.save_rates(rates, out / "rates.tsv")
        payload.update({"lam": lam, "mu": mu})
    _write_manifest(out, "generate", payload)


def _load_graph_rates(args):
    g = graphmod.load_edge_list(args.graph, id_map_path=args.id_map)
    rates = model.load_rates(args.rates, n_users=g.n_users, id_map_path=args.id_map)
    return g, rates


def cmd_solve(args) -> None:
    out = _out_dir(args)
    g, rates = _load_graph_rates(args)
    system = model.build_system(g, rates, allow_inactive=args.allow_inactive)
    if args.labels:
        labels = np.asarray(sorted({int(x) for x in args.labels.split(",")}), dtype=np.int64)
    else:
        labels = np.arange(g.n_users)
    n = g.n_users
    totals = np.zeros(labels.size)
    diag = np.zeros(labels.size)
    per_user = np.zeros(n)
    max_iters = 0
    max_resid = 0.0
    with open(out / "pq.csv", "w") as fh:
        fh.write("label,user,p,q\n")
        for k, vec in enumerate(
            model.iter_label_solutions(
                system, labels, tol=args.tol, max_iter=args.max_iter,
                block_size=args.block_size, workers=args.workers,
            )
        ):
            totals[k] = vec.q.sum()
            diag[k] = vec.q[vec.label]
            per_user += vec.q
            max_iters = max(max_iters, vec.iterations)
            max_resid = max(max_resid, vec.residual)
            nz = np.flatnonzero((vec.p != 0.0) | (vec.q != 0.0))
            for u in nz:
                fh.write(f"{vec.label},{u},{vec.p[u]!r},{vec.q[u]!r}\n")
    psi = (totals - diag) / (n - 1) if n > 1 else np.zeros(labels.size)
    psi_tilde = totals / n
    order = metrics.rank(psi, ids=labels)
    _write_csv(out / "scores.csv", ["user_id", "psi", "psi_tilde", "rank"],
               _scores_rows(labels, psi, psi_tilde, order))
    normalized = labels.size == n
    lo, hi = model.spectral_bounds(system)
    _write_manifest(out, "solve", {
        "tol": args.tol,
        "max_iter": args.max_iter,
        "workers": args.workers,
        "labels": "all" if normalized else [int(x) for x in labels],
        "normalized": normalized,
        "iterations_max": int(max_iters),
        "residual_max": max_resid,
        "spectral_bounds": [lo, hi],
        "leaderless_users": [int(x) for x in system.leaderless_users()],
        "inactive_users": [int(x) for x in rates.inactive_users()],
        "wall_sum_max_dev": float(np.abs(per_user - 1.0).max()) if normalized and n else None,
    })


def cmd_pagerank(args) -> None:
    out = _out_dir(args)
    g = graphmod.load_edge_list(args.graph, id_map_path=args.id_map)
    pi = model.pagerank(g, beta=args.beta, tol=args.tol)
    _write_csv(out / "pagerank.csv", ["user_id", "score"], ((u, float(pi[u])) for u in range(g.n_users)))
    _write_manifest(out, "pagerank", {"beta": args.beta, "tol": args.tol, "sum": float(pi.sum())})


def cmd_rank(args) -> None:
    out = _out_dir(args)
    users, vals = _read_scores(args.scores, args.by)
    order = metrics.rank(vals, ids=users)
    pos = {int(u): k + 1 for k, u in enumerate(order)}
    _write_csv(out / "ranking.csv", ["user_id", "rank"],
               ((int(u), pos[int(u)]) for u in users))
    _write_manifest(out, "rank", {"by": args.by, "n_users": int(users.size)})


def cmd_simulate(args) -> None:
    out = _out_dir(args)
    g, rates = _load_graph_rates(args)
    policy = simulator.PolicyConfig(
        selection=args.selection, eviction=args.eviction, arrivals=args.arrivals,
        ttl=args.ttl, cv2=args.cv2,
    )
    result = simulator.simulate(
        g, rates, policy, M=args.M, K=args.K, n_events=args.events, seed=args.seed,
        warmup_frac=args.warmup, record_trace=args.record_trace,
    )
    violations = simulator.conservation_violations(result.state)
    if violations:
        raise SystemExit(f"conservation violated for {len(violations)} (origin, feed) pairs: {violations[:5]}")
    with open(out / "pq.csv", "w") as fh:
        fh.write("label,user,p,q\n")
        for origin in range(g.n_users):
            nz = np.flatnonzero((result.p_hat[origin] != 0.0) | (result.q_hat[origin] != 0.0))
            for u in nz:
                fh.write(f"{origin},{u},{result.p_hat[origin, u]!r},{result.q_hat[origin, u]!r}\n")
    if result.trace is not None:
        _write_csv(out / "trace.csv", ["post_id", "timestamp", "user_id", "repost_id"],
                   ((e.post_id, e.timestamp, e.user_id, e.repost_id) for e in result.trace))
    summary = dict(result.summary)
    summary["measure_window"] = list(summary["measure_window"])
    summary["conservation_violations"] = 0
    _write_manifest(out, "simulate", summary)


def cmd_emulate(args) -> None:
    out = _out_dir(args)
    parsed = ingest.parse_trace(args.trace, error_budget=args.error_budget)
    window = None
    if args.t_start is not None or args.t_end is not None:
        if args.t_start is None or args.t_end is None:
            raise SystemExit("--t-start and --t-end must be given together")
        window = (args.t_start, args.t_end)
    result = emulator.replay(parsed.events, window=window, n_users=parsed.n_users)
    rows = []
    for origin in sorted(result.q_emu):
        for u in sorted(result.q_emu[origin]):
            rows.append((origin, u, result.q_emu[origin][u]))
    _write_csv(out / "q_emu.csv", ["origin", "user", "q_emu"], rows)
    n = result.n_users
    psi = result.psi
    psi_tilde = np.array([((n - 1) * psi[i] + result.occupancy(i, i)) / n for i in range(n)])
    order = metrics.rank(psi)
    _write_csv(out / "scores.csv", ["user_id", "psi", "psi_tilde", "rank"],
               _scores_rows(np.arange(n), psi, psi_tilde, order))
    graphmod.save_id_map(parsed.user_ids, out / "user_ids.tsv")
    _write_manifest(out, "emulate", {
        "n_users": n,
        "window": list(result.window),
        "dropped_events": result.dropped_events,
        "parse_diagnostics": len(parsed.diagnostics),
    })


def cmd_infer_graph(args) -> None:
    out = _out_dir(args)
    parsed = ingest.parse_trace(args.trace, error_budget=args.error_budget)
    g, unresolved = ingest.infer_star_graph(parsed.events, n_users=parsed.n_users)
    graphmod.save_edge_list(g, out / "graph.tsv")
    graphmod.save_id_map(parsed.user_ids, out / "user_ids.tsv")
    _write_manifest(out, "infer-graph", {
        "n_users": g.n_users,
        "n_edges": g.n_edges,
        "unresolved_reposts": unresolved,
        "parse_diagnostics": len(parsed.diagnostics),
    })


def cmd_estimate_rates(args) -> None:
    out = _out_dir(args)
    parsed = ingest.parse_trace(args.trace, error_budget=args.error_budget)
    if args.t_start is not None and args.t_end is not None:
        window = (args.t_start, args.t_end)
    elif parsed.events:
        window = (parsed.events[0].timestamp, parsed.events[-1].timestamp)
    else:
        raise SystemExit("empty trace and no explicit window")
    est = ingest.estimate_rates(parsed.events, window, n_users=parsed.n_users)
    model.save_rates(est.rates, out / "rates.tsv")
    graphmod.save_id_map(parsed.user_ids, out / "user_ids.tsv")
    _write_manifest(out, "estimate-rates", {
        "window": list(est.window),
        "n_users": parsed.n_users,
        "total_posts": int(est.post_counts.sum()),
        "total_reposts": int(est.repost_counts.sum()),
        "flagged_inactive": [int(x) for x in est.flagged],
    })


def cmd_compare(args) -> None:
    out = _out_dir(args)
    users_a, vals_a = _read_scores(args.a, args.column)
    users_b, vals_b = _read_scores(args.b, args.column)
    rank_a = metrics.rank(vals_a, ids=users_a)
    rank_b = metrics.rank(vals_b, ids=users_b)
    depths = [int(x) for x in args.depths.split(",")] if args.depths else [users_a.size]
    common = metrics.common_users_proportion(rank_a, rank_b, depths)
    _write_csv(out / "common_users.csv", ["X", "common_proportion"],
               ((x, common[x]) for x in sorted(common)))
    scatter = metrics.rank_scatter(rank_a, rank_b)
    _write_csv(out / "rank_scatter.csv", ["user", "rank_a", "rank_b"],
               map(tuple, scatter.tolist()))
    order = np.argsort(users_a)
    aligned_b = dict(zip(users_b.tolist(), vals_b.tolist()))
    corr = metrics.pearson(vals_a[order], [aligned_b[int(u)] for u in users_a[order]])
    _write_manifest(out, "compare", {
        "column": args.column,
        "depths": sorted(common),
        "pearson": corr,
        "n_users": int(users_a.size),
    })


# -- argument wiring ------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="psirank", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic graph (and optional homogeneous rates)")
    p.add_argument("--kind", required=True, choices=["tree", "scale-free", "erdos-renyi"])
    p.add_argument("--depth", type=int, default=9)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--exponent", type=float, default=2.5)
    p.add_argument("--mean-degree", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lam", type=float, default=None, help="also write homogeneous rates with this lambda")
    p.add_argument("--mu", type=float, default=None, help="also write homogeneous rates with this mu")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve influence vectors and scores from the balance model")
    p.add_argument("--graph", required=True)
    p.add_argument("--rates", required=True)
    p.add_argument("--id-map", default=None)
    p.add_argument("--all-labels", action="store_true")
    p.add_argument("--labels", default=None, help="comma-separated label subset (non-normalized scores)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--block-size", type=int, default=256)
    p.add_argument("--allow-inactive", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pagerank", help="graph-only PageRank scores")
    p.add_argument("--graph", required=True)
    p.add_argument("--id-map", default=None)
    p.add_argument("--beta", type=float, default=0.85)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pagerank)

    p = sub.add_parser("rank", help="rank users by a column of a scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--by", default="psi")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("simulate", help="event-driven platform simulation")
    p.add_argument("--graph", required=True)
    p.add_argument("--rates", required=True)
    p.add_argument("--id-map", default=None)
    p.add_argument("--events", type=int, default=300_000)
    p.add_argument("--M", type=int, default=20)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--selection", default="random", choices=list(simulator.SELECTIONS))
    p.add_argument("--eviction", default="random", choices=list(simulator.EVICTIONS))
    p.add_argument("--ttl", type=float, default=None)
    p.add_argument("--arrivals", default="poisson", choices=list(simulator.ARRIVALS))
    p.add_argument("--cv2", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=float, default=0.2)
    p.add_argument("--record-trace", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("emulate", help="replay a trace and measure empirical influence")
    p.add_argument("--trace", required=True)
    p.add_argument("--t-start", type=float, default=None)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--error-budget", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("infer-graph", help="infer the Star follower graph from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--error-budget", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_infer_graph)

    p = sub.add_parser("estimate-rates", help="estimate per-user activity rates from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--t-start", type=float, default=None)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--error-budget", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_estimate_rates)

    p = sub.add_parser("compare", help="compare two score files (overlap, scatter, correlation)")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--column", default="psi")
    p.add_argument("--depths", default=None, help="comma-separated depths for the overlap curve")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, model.NonConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
