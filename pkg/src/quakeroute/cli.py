"""Command-line entry point for the whole pipeline.

Subcommands: graph synth, env simulate, dataset generate, train, eval,
analyze fourier|fisher, export-qasm. Exit codes: 0 success, 1 domain error,
2 usage error. The QRL_SEED environment variable overrides any configured
seed; a JSON --config file fills unset options.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path as FilePath

import numpy as np

from . import analysis, dyngraph, features, hybrid, neural, oracle, qsim

_DOMAIN_ERRORS = (
    dyngraph.GraphError, dyngraph.StateError, dyngraph.BudgetExhausted,
    oracle.NoPathError, qsim.CircuitError, qsim.BindingError,
    neural.ConfigError, neural.StateError,
    ValueError, KeyError, OSError, json.JSONDecodeError,
)


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill options left at None from the JSON config file, if one was given."""
    path = getattr(args, "config", None)
    if not path:
        return
    doc = json.loads(FilePath(path).read_text())
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)


def _resolve_seed(args: argparse.Namespace) -> int:
    env = os.environ.get("QRL_SEED")
    if env is not None:
        return int(env)
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    raise ValueError("a seed is required (pass --seed, set it in --config, "
                     "or export QRL_SEED)")


def _default_jobs(args: argparse.Namespace) -> int:
    jobs = getattr(args, "jobs", None)
    return int(jobs) if jobs else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Handlers


def _cmd_graph_synth(args) -> int:
    seed = _resolve_seed(args)
    graph = dyngraph.synth_city(args.rows, args.cols, seed,
                                span_m=args.span_m, delete_frac=args.delete_frac)
    dyngraph.save_graph(graph, args.out)
    print(f"graph: {graph.n_nodes} nodes, {graph.n_edges} edges -> {args.out}")
    return 0


def _cmd_env_simulate(args) -> int:
    graph = dyngraph.load_graph(args.graph)
    scenario = dyngraph.load_scenario(args.scenario)
    if scenario.max_steps < args.steps:
        scenario = dataclasses.replace(scenario, max_steps=args.steps)
    state = dyngraph.initial_state(graph, scenario, sigma_frac=args.sigma_frac)
    dyngraph.apply_initial_quake(state)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u", "v", "weight"])

        def snapshot():
            for (u, v), w in zip(graph.edges, state.weights):
                writer.writerow([state.t, int(graph.ids[u]), int(graph.ids[v]),
                                 repr(float(w))])

        snapshot()
        for _ in range(args.steps):
            dyngraph.advance(state)
            snapshot()
    print(f"env: {args.steps} steps over {graph.n_edges} edges -> {args.out}")
    return 0


def _cmd_dataset_generate(args) -> int:
    seed = _resolve_seed(args)
    graph = dyngraph.load_graph(args.graph)
    dataset = features.generate_dataset(graph, args.n, seed,
                                        sigma_frac=args.sigma_frac,
                                        jobs=_default_jobs(args))
    dataset.save_jsonl(args.out)
    n_scen = len({s.scenario_id for s in dataset})
    print(f"dataset: {len(dataset)} samples from {n_scen} scenarios -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    seed = _resolve_seed(args)
    dataset = features.Dataset.load_jsonl(args.data)
    config = hybrid.TrainConfig(
        epochs=100 if args.epochs is None else args.epochs,
        batch_size=2000 if args.batch_size is None else args.batch_size,
        seed=seed, classical_only=args.classical_only,
    )
    model, history = hybrid.train(dataset, config)
    model.save(args.out)
    if args.history_out:
        FilePath(args.history_out).write_text(json.dumps(history, indent=1) + "\n")
    last = history[-1]
    print(f"train: {config.epochs} epochs, final train loss "
          f"{last['train_loss']:.4f}, val agreement "
          f"{last.get('val_agreement', float('nan')):.3f} -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    seed = _resolve_seed(args)
    model = hybrid.HybridModel.load(args.ckpt)
    graph = dyngraph.load_graph(args.graph)
    report = hybrid.evaluate(model, graph, args.scenarios, seed,
                             sigma_frac=args.sigma_frac, jobs=_default_jobs(args))
    report.save_json(args.out)
    csv_path = args.csv or str(FilePath(args.out).with_suffix(".paths.csv"))
    report.save_csv(csv_path)
    print(f"eval: arrival {report.arrival_rate:.3f}, accuracy "
          f"{report.mean_accuracy:.3f}, better-or-equal "
          f"{report.better_or_equal_rate:.3f}, quantum share "
          f"{report.quantum_share:.3f} -> {args.out}")
    return 0


def _cmd_analyze_fourier(args) -> int:
    seed = _resolve_seed(args)
    config = analysis.MiniConfig(sublayers=args.N, reuploads=args.K)
    rng = np.random.default_rng(seed)
    samples = analysis.sample_fourier(config, args.samples, rng,
                                      grid_points=args.grid)
    analysis.write_violin_csv(samples, args.out)
    print(f"fourier: {args.samples} draws, degree {config.reuploads} "
          f"spectrum -> {args.out}")
    return 0


def _cmd_analyze_fisher(args) -> int:
    seed = _resolve_seed(args)
    config = analysis.MiniConfig(sublayers=args.N, reuploads=args.K)
    rng = np.random.default_rng(seed)
    result = analysis.fisher_matrix(config, n_x=args.nx, n_theta=args.ntheta,
                                    rng=rng, include_main=args.full)
    report = analysis.fisher_spectrum(result.matrix)
    analysis.write_spectrum_csv(report, args.out)
    line = (f"fisher: rank {report.rank} of {result.n_params}, near-zero "
            f"fraction {report.near_zero_fraction:.3f}")
    if args.full:
        ratio = analysis.block_ratio(result.matrix, config.n_film_params)
        line += f", block coupling {ratio:.4f}"
    print(line + f" -> {args.out}")
    return 0


def _cmd_export_qasm(args) -> int:
    model = hybrid.HybridModel.load(args.params)
    doc = json.loads(FilePath(args.input).read_text())
    if "features" in doc:
        vec = np.asarray(doc["features"], float)
        main, epi = vec[2:], vec[:2]
    else:
        main = np.asarray(doc["main"], float)
        epi = np.asarray(doc["epi"], float)
    circuit = qsim.build_model_circuit(model.model_config)
    bound = np.concatenate([main, epi])
    text = qsim.export_qasm3(circuit, model.quantum_params, bound)
    FilePath(args.out).write_text(text)
    census = circuit.census()
    print(f"qasm: {sum(census.values())} gate statements "
          f"({census}) in {len(text.splitlines())} lines -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quakeroute",
        description="Earthquake evacuation routing lab: graphs, oracle "
                    "datasets, hybrid training and circuit diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file filling unset options")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None,
                       help="scenario-level parallelism (default: all cores)")

    g = sub.add_parser("graph", help="synthetic city graphs")
    gsub = g.add_subparsers(dest="action", required=True)
    gs = gsub.add_parser("synth", help="generate a random city")
    common(gs)
    gs.add_argument("--rows", type=int, required=True)
    gs.add_argument("--cols", type=int, required=True)
    gs.add_argument("--out", required=True)
    gs.add_argument("--span-m", type=float, default=2000.0)
    gs.add_argument("--delete-frac", type=float, default=0.15)
    gs.set_defaults(func=_cmd_graph_synth)

    e = sub.add_parser("env", help="environment simulation")
    esub = e.add_subparsers(dest="action", required=True)
    es = esub.add_parser("simulate", help="dump a weight trajectory as CSV")
    common(es)
    es.add_argument("--graph", required=True)
    es.add_argument("--scenario", required=True)
    es.add_argument("--steps", type=int, required=True)
    es.add_argument("--out", required=True)
    es.add_argument("--sigma-frac", type=float, default=0.1)
    es.set_defaults(func=_cmd_env_simulate)

    d = sub.add_parser("dataset", help="oracle-labeled datasets")
    dsub = d.add_subparsers(dest="action", required=True)
    dg = dsub.add_parser("generate")
    common(dg)
    dg.add_argument("--graph", required=True)
    dg.add_argument("--n", type=int, required=True)
    dg.add_argument("--out", required=True)
    dg.add_argument("--sigma-frac", type=float, default=0.1)
    dg.set_defaults(func=_cmd_dataset_generate)

    t = sub.add_parser("train", help="train the hybrid (or classical-only) model")
    common(t)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=None, help="default 100")
    t.add_argument("--batch-size", type=int, default=None, help="default 2000")
    t.add_argument("--classical-only", action="store_true")
    t.add_argument("--history-out", default=None)
    t.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="rollout evaluation against the oracle")
    common(ev)
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--graph", required=True)
    ev.add_argument("--scenarios", type=int, required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--csv", default=None,
                    help="per-path records CSV (default: <out>.paths.csv)")
    ev.add_argument("--sigma-frac", type=float, default=0.1)
    ev.set_defaults(func=_cmd_eval)

    a = sub.add_parser("analyze", help="mini-circuit diagnostics")
    asub = a.add_subparsers(dest="action", required=True)
    af = asub.add_parser("fourier")
    common(af)
    af.add_argument("--N", type=int, required=True, help="entangler sublayers")
    af.add_argument("--K", type=int, required=True, help="coordinate reuploads")
    af.add_argument("--samples", type=int, default=1000)
    af.add_argument("--grid", type=int, default=None)
    af.add_argument("--out", required=True)
    af.set_defaults(func=_cmd_analyze_fourier)
    afi = asub.add_parser("fisher")
    common(afi)
    afi.add_argument("--N", type=int, required=True)
    afi.add_argument("--K", type=int, required=True)
    afi.add_argument("--nx", type=int, default=20)
    afi.add_argument("--ntheta", type=int, default=20)
    afi.add_argument("--full", action="store_true",
                     help="include the main-qubit parameters")
    afi.add_argument("--out", required=True)
    afi.set_defaults(func=_cmd_analyze_fisher)

    x = sub.add_parser("export-qasm", help="bind a sample and emit OpenQASM 3")
    common(x)
    x.add_argument("--params", required=True, help="checkpoint JSON")
    x.add_argument("--input", required=True, help="sample JSON to bind")
    x.add_argument("--out", required=True)
    x.set_defaults(func=_cmd_export_qasm)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        _apply_config_file(args)
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename or exc}", file=sys.stderr)
        return 1
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console() -> None:
    sys.exit(run())
