"""Command-line harness: generate instances, simulate, verify the compiled
network against the simulator, train, evaluate, and build report tables.

Every command is deterministic given --seed.  compile-verify exits nonzero
when any mismatch between the network and the simulator is found, so CI can
gate on the equivalence property.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .compiler import build_global_network, verify_equivalence
from .datagen import (
    gen_er_graph,
    gen_sample_pool,
    load_pool,
    load_sensor_graph,
    sample_model_params,
    save_pool,
    split_pool,
)
from .graph import load_graph, load_state, save_graph
from .learning import (
    ModelParams,
    TrainConfig,
    evaluate,
    random_baseline,
    train,
)
from .network import load_network, save_network
from .simulate import export_trace, propagate
from .validation import check_power_of_two


def _positive_power_of_two(value: str) -> int:
    k = int(value)
    try:
        check_power_of_two(k)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if k < 2:
        raise argparse.ArgumentTypeError("worm count must be at least 2")
    return k


def _load_topology(args, worm_count: int):
    if args.er is not None:
        n, p = int(args.er[0]), float(args.er[1])
        rng = np.random.default_rng(args.seed)
        return gen_er_graph(n, p, rng, worm_count), f"er{n}p{p}"
    graph = load_sensor_graph(args.sensor_file, rule=args.sensor_rule,
                              radius=args.radius, worm_count=worm_count)
    return graph, Path(args.sensor_file).stem


def cmd_generate(args) -> int:
    k = args.worms
    graph, graph_id = _load_topology(args, k)
    rng = np.random.default_rng(None if args.seed is None else args.seed + 1)
    params = sample_model_params(graph, k, rng)
    bound = params.apply_to(graph)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_graph(bound, out / "graph.txt")
    num_seeds = args.seeds if args.seeds is not None else graph.node_count // 2
    pool = gen_sample_pool(graph, params, args.pool, num_seeds,
                           -1 if args.seed is None else args.seed + 2,
                           graph_id=graph_id)
    save_pool(pool, out / "pool.txt")
    print(f"graph {graph_id}: N={graph.node_count} M={graph.edge_count} K={k}")
    print(f"pool: Q={len(pool)} seeds={num_seeds} -> {out / 'pool.txt'}")
    return 0


def cmd_simulate(args) -> int:
    graph = load_graph(args.graph)
    labels, k = load_state(args.state)
    if k != graph.worm_count:
        print(f"state worm count {k} != graph worm count {graph.worm_count}",
              file=sys.stderr)
        return 2
    final, trace = propagate(graph, labels)
    if args.trace:
        export_trace(trace, args.trace)
    print("final " + " ".join(str(int(x)) for x in final.labels))
    print(f"converged_at {trace.converged_at}")
    return 0


def cmd_compile_verify(args) -> int:
    graph = load_graph(args.graph)
    network = load_network(args.checkpoint) if args.checkpoint else None
    report = verify_equivalence(graph, trials=args.trials, rng_seed=args.seed,
                                network=network, exhaustive=args.exhaustive)
    print(f"{report.trials - report.mismatches}/{report.trials} match")
    if args.report:
        with open(args.report, "w") as fh:
            for rec in report.records:
                fh.write(json.dumps(rec) + "\n")
    if report.mismatches:
        print(f"{report.mismatches} mismatches; first counterexample initial="
              f"{report.first_counterexample['initial']}", file=sys.stderr)
        return 1
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                       batch_size=args.batch, tau_start=args.tau_start,
                       tau_end=args.tau_end, rng_seed=args.seed)


def cmd_train(args) -> int:
    graph = load_graph(args.graph)
    pool = load_pool(args.pool)
    rng = np.random.default_rng(args.seed)
    train_pool, test_pool = split_pool(pool, args.train, args.test, rng)
    fitted, history = train(graph, train_pool, _train_config(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    net = build_global_network(fitted.apply_to(graph))
    save_network(net, out / "checkpoint.json")
    with open(out / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_surrogate_loss", "val_hard_loss", "accuracy"])
        for h in history:
            writer.writerow([h.epoch, repr(h.train_surrogate_loss),
                             repr(h.val_hard_loss), repr(h.accuracy)])
    metrics = evaluate(graph, fitted, test_pool)
    print(f"train pairs {len(train_pool)}  test pairs {len(test_pool)}")
    print(f"test accuracy {metrics.accuracy:.4f}  mean node loss "
          f"{metrics.mean_node_loss:.4f}")
    return 0


def cmd_eval(args) -> int:
    graph = load_graph(args.graph)
    pool = load_pool(args.pool)
    net = load_network(args.checkpoint)
    values = net.parameter_values()
    params = ModelParams.from_vector(values, graph.edge_count, graph.node_count,
                                     graph.worm_count)
    metrics = evaluate(graph, params, pool)
    print(f"samples {len(pool)}")
    print(f"f1 {metrics.f1:.4f}  precision {metrics.precision:.4f}  "
          f"recall {metrics.recall:.4f}  accuracy {metrics.accuracy:.4f}")
    print(f"mean node loss {metrics.mean_node_loss:.4f}")
    return 0


def _metric_row(metrics_list) -> dict:
    cols = ("f1", "precision", "recall", "accuracy")
    row = {}
    for col in cols:
        vals = np.array([getattr(m, col) for m in metrics_list])
        row[col] = (float(vals.mean()), float(vals.std()))
    return row


def _print_table(title: str, rows: dict, writer=None) -> None:
    cols = ("f1", "precision", "recall", "accuracy")
    print(f"\n{title}")
    header = "%-18s" % "" + "".join("%-16s" % c for c in cols)
    print(header)
    for name, row in rows.items():
        cells = ["%.3f(%.0e)" % row[c] for c in cols]
        print("%-18s" % name + "".join("%-16s" % c for c in cells))
        if writer is not None:
            writer.writerow([title, name] + [repr(v) for c in cols for v in row[c]])


def _report_runs(topo, worm_count, num_seeds, args, setting_seed):
    """Repeated simulations for one setting: fresh params + pool per run,
    train on a split, score proposed and random."""
    proposed, rand = [], []
    for run in range(args.runs):
        rng = np.random.default_rng(setting_seed + 1000 * run)
        params_true = sample_model_params(topo, worm_count, rng)
        pool = gen_sample_pool(topo, params_true, args.pool, num_seeds,
                               int(rng.integers(1 << 30)))
        train_pool, test_pool = split_pool(pool, args.train, args.test, rng)
        gk = topo.with_params(np.zeros((topo.node_count, worm_count)),
                              np.zeros((topo.edge_count, worm_count)),
                              worm_count=worm_count)
        cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                          batch_size=args.batch, tau_start=args.tau_start,
                          tau_end=args.tau_end,
                          rng_seed=int(rng.integers(1 << 30)))
        fitted, _ = train(gk, train_pool, cfg)
        proposed.append(evaluate(gk, fitted, test_pool))
        rand.append(random_baseline(test_pool, worm_count,
                                    int(rng.integers(1 << 30))))
    return proposed, rand


def cmd_report(args) -> int:
    topo, graph_id = _load_topology(args, args.worms)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "report.csv"
    num_seeds = args.seeds if args.seeds is not None else topo.node_count // 2
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["table", "row", "f1_mean", "f1_std", "precision_mean",
                         "precision_std", "recall_mean", "recall_std",
                         "accuracy_mean", "accuracy_std"])
        proposed, rand = _report_runs(topo, args.worms, num_seeds, args, args.seed or 0)
        _print_table(f"main ({graph_id}, K={args.worms}, seeds={num_seeds})",
                     {"proposed": _metric_row(proposed), "random": _metric_row(rand)},
                     writer)
        if args.sweep_worms:
            rows = {}
            for k in args.sweep_worms:
                p, _ = _report_runs(topo, k, num_seeds, args, (args.seed or 0) + k)
                rows[f"worms={k}"] = _metric_row(p)
            _print_table("worm-count sweep", rows, writer)
        if args.sweep_seeds:
            rows = {}
            for s in args.sweep_seeds:
                p, _ = _report_runs(topo, args.worms, s, args, (args.seed or 0) + 77 * s)
                rows[f"seeds={s}"] = _metric_row(p)
            _print_table("seed-count sweep", rows, writer)
    print(f"\ncsv: {csv_path}")
    return 0


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wormprop",
        description="competitive worm propagation: simulate, compile, learn",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_topology(p):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--er", nargs=2, metavar=("N", "P"),
                           help="Erdos-Renyi topology with N nodes, edge prob P")
        group.add_argument("--sensor-file", help="sensor deployment file")
        p.add_argument("--sensor-rule", choices=("edge-list", "distance"),
                       default="edge-list")
        p.add_argument("--radius", type=float, default=None,
                       help="connection radius for the distance rule")

    def add_training(p):
        p.add_argument("--train", type=int, default=600)
        p.add_argument("--test", type=int, default=400)
        p.add_argument("--epochs", type=int, default=12)
        p.add_argument("--lr", type=float, default=0.02)
        p.add_argument("--batch", type=int, default=150)
        p.add_argument("--tau-start", type=float, default=6.0)
        p.add_argument("--tau-end", type=float, default=20.0)

    p = sub.add_parser("generate", help="write graph and sample pool files")
    add_topology(p)
    p.add_argument("--worms", type=_positive_power_of_two, default=4)
    p.add_argument("--pool", type=int, default=1000)
    p.add_argument("--seeds", type=int, default=None, help="default N/2")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="propagate an initial state file")
    p.add_argument("--graph", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--trace", default=None, help="write per-step trace here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compile-verify",
                       help="compare compiled network against the simulator")
    p.add_argument("--graph", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--checkpoint", default=None,
                   help="verify this stored network instead of a fresh compile")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--report", default=None, help="mismatch records (json lines)")
    p.set_defaults(func=cmd_compile_verify)

    p = sub.add_parser("train", help="fit parameters on a pool split")
    p.add_argument("--graph", required=True)
    p.add_argument("--pool", required=True)
    add_training(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a pool")
    p.add_argument("--graph", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="repeated-run metric tables")
    add_topology(p)
    p.add_argument("--worms", type=_positive_power_of_two, default=4)
    p.add_argument("--pool", type=int, default=1000)
    p.add_argument("--seeds", type=int, default=None, help="default N/2")
    p.add_argument("--runs", type=int, default=5)
    add_training(p)
    p.add_argument("--sweep-worms", type=_int_list, default=None,
                   help="comma list, e.g. 2,4,8")
    p.add_argument("--sweep-seeds", type=_int_list, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
