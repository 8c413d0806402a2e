"""Command-line driver: full benchmarks plus resumable pipeline stages.

Every stage reads and writes documented CSV/JSON artifacts so a pipeline
can be inspected or resumed mid-way; all randomness flows from --seed.
Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import bench, greedy, ridgelet, sampling, solve, train
from .core import GsnError, load_network, save_network
from .bench import PipelineError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    """Bad arguments, missing inputs, or malformed artifacts."""


def default_threads() -> int:
    env = os.environ.get("GSN_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise CliError(f"GSN_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise CliError("GSN_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _require_file(path: str, role: str) -> str:
    if not os.path.isfile(path):
        raise CliError(f"missing {role} file: {path}")
    return path


_CONFIG_FIELDS = {
    "target": str, "n_train": int, "n_val": int, "n_test": int,
    "dict_size": int, "prune": bool, "prune_threshold": float,
    "drop_tol": float, "max_iter": int, "n_nodes": int,
    "epochs": int, "gsn_batch": int, "random_batch": int,
    "initial_lr": float, "decay_rate": float,
    "n_restarts": int, "seed": int, "threads": int,
    "quad_r_max": float, "quad_n_nodes": int,
    "node_counts": list,
}


def load_config_file(path: str) -> dict:
    with open(_require_file(path, "config")) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CliError("config file must hold a JSON object")
    for key, value in doc.items():
        if key not in _CONFIG_FIELDS:
            raise CliError(f"unknown config field {key!r}")
        want = _CONFIG_FIELDS[key]
        if want is float and isinstance(value, int):
            continue
        if not isinstance(value, want):
            raise CliError(f"config field {key!r} must be {want.__name__}")
    return doc


def build_experiment_config(args) -> bench.ExperimentConfig:
    doc = load_config_file(args.config) if args.config else {}
    target = args.example or doc.get("target")
    if target is None:
        raise CliError("an example id (ex1..ex6) or config 'target' is required")
    if target not in bench.EXAMPLE_IDS:
        raise CliError(f"unknown example id {target!r}; expected one of {', '.join(bench.EXAMPLE_IDS)}")

    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    cfg = bench.default_config(target, seed=seed)

    overrides = {}
    for key in ("n_train", "n_val", "n_test", "dict_size", "prune_threshold",
                "drop_tol", "max_iter", "n_nodes", "n_restarts",
                "quad_r_max", "quad_n_nodes"):
        if key in doc:
            overrides[key] = doc[key]
    if "prune" in doc:
        overrides["prune"] = doc["prune"]
    if args.no_prune:
        overrides["prune"] = False
    if args.nodes is not None:
        overrides["n_nodes"] = args.nodes

    gsn_train, random_train = cfg.gsn_train, cfg.random_train
    epochs = args.epochs if args.epochs is not None else doc.get("epochs")
    if epochs is not None:
        gsn_train = replace(gsn_train, epochs=epochs)
        random_train = replace(random_train, epochs=epochs)
    if "gsn_batch" in doc:
        gsn_train = replace(gsn_train, batch_size=doc["gsn_batch"])
    if "random_batch" in doc:
        random_train = replace(random_train, batch_size=doc["random_batch"])
    if args.batch is not None:
        gsn_train = replace(gsn_train, batch_size=args.batch)
        random_train = replace(random_train, batch_size=args.batch)
    for key, value in (("initial_lr", doc.get("initial_lr")),
                       ("decay_rate", doc.get("decay_rate"))):
        if value is not None:
            gsn_train = replace(gsn_train, **{key: value})
            random_train = replace(random_train, **{key: value})
    if args.restarts is not None:
        overrides["n_restarts"] = args.restarts

    threads = args.threads if args.threads is not None else doc.get("threads", default_threads())
    try:
        return replace(cfg, gsn_train=gsn_train, random_train=random_train,
                       threads=threads, **overrides)
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from exc


def cmd_bench(args) -> int:
    cfg = build_experiment_config(args)
    os.makedirs(args.out, exist_ok=True)
    if cfg.target_id == "ex6":
        doc = load_config_file(args.config) if args.config else {}
        counts = doc.get("node_counts", list(bench.EX6_SWEEP_DEFAULT))
        report = bench.node_sweep(cfg, counts)
        run_dir = bench.write_sweep_artifacts(report, args.out)
    else:
        report = bench.run_experiment(cfg)
        run_dir = bench.write_run_artifacts(report, args.out)
    print(f"wrote {run_dir}/manifest.json")
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = build_experiment_config(args)
    os.makedirs(args.out, exist_ok=True)
    train_set, val_set, test_set = bench.make_datasets(cfg)
    directions = bench.make_directions(cfg)
    sampling.save_dataset_csv(train_set, os.path.join(args.out, "train.csv"))
    sampling.save_dataset_csv(val_set, os.path.join(args.out, "val.csv"))
    sampling.save_dataset_csv(test_set, os.path.join(args.out, "test.csv"))
    sampling.save_directions_csv(directions, os.path.join(args.out, "directions.csv"))
    print(f"wrote datasets and {len(directions)} directions to {args.out}")
    return EXIT_OK


def cmd_dict(args) -> int:
    train_set = sampling.load_dataset_csv(_require_file(args.train, "training set"))
    directions = sampling.load_directions_csv(_require_file(args.directions, "directions"))
    dictionary = sampling.build_dictionary(train_set, directions, args.drop_tol)
    sampling.save_dictionary_csv(dictionary, args.out)
    print(f"kept {dictionary.n_atoms} of {len(directions)} atoms -> {args.out}")
    return EXIT_OK


def cmd_ridgelet(args) -> int:
    train_set = sampling.load_dataset_csv(_require_file(args.train, "training set"))
    directions = sampling.load_directions_csv(_require_file(args.directions, "directions"))
    quad = ridgelet.RadialQuadrature(args.r_max, args.quad_nodes)
    fld = ridgelet.collapsed_field(train_set, directions, quad, threads=args.threads or default_threads())
    ridgelet.save_field_csv(fld, args.out)
    print(f"wrote collapsed transform for {len(directions)} directions -> {args.out}")
    return EXIT_OK


def cmd_prune(args) -> int:
    if not 0.0 <= args.threshold < 1.0:
        raise CliError("invalid threshold, must lie in [0, 1)")
    train_set = sampling.load_dataset_csv(_require_file(args.train, "training set"))
    dictionary = sampling.load_dictionary_csv(_require_file(args.dict, "dictionary"), train_set)
    fld = ridgelet.load_field_csv(_require_file(args.field, "field"))
    by_source = {tuple(np.append(dr.a, dr.b)): v
                 for dr, v in zip(fld.directions, fld.values)}
    try:
        values = np.array([by_source[tuple(np.append(dr.a, dr.b))]
                           for dr in dictionary.directions])
    except KeyError as exc:
        raise CliError(f"field is missing a dictionary direction: {exc}") from exc
    sub = ridgelet.CollapsedField(dictionary.directions, values, fld.quadrature)
    pruned = ridgelet.prune_dictionary(dictionary, sub, args.threshold)
    sampling.save_dictionary_csv(pruned, args.out)
    print(f"kept {pruned.n_atoms} of {dictionary.n_atoms} atoms -> {args.out}")
    return EXIT_OK


def cmd_greedy(args) -> int:
    train_set = sampling.load_dataset_csv(_require_file(args.train, "training set"))
    val_set = sampling.load_dataset_csv(_require_file(args.val, "validation set"))
    dictionary = sampling.load_dictionary_csv(_require_file(args.dict, "dictionary"), train_set)
    path = greedy.oga_run(dictionary, train_set, val_set, args.max_iter)
    if not path.records:
        raise CliError("greedy selected nothing; increase --max-iter")
    greedy.save_path_csv(path, args.out)
    n = args.nodes if args.nodes is not None else greedy.select_model(path)
    n = min(n, len(path.records))
    doc = {
        "input_dim": train_set.dim,
        "selected_nodes": n,
        "directions": [{"a": dictionary.directions[j].a.tolist(),
                        "b": dictionary.directions[j].b}
                       for j in path.atom_indices[:n]],
        "atom_indices": path.atom_indices[:n],
        "source_indices": [dictionary.source_indices[j] for j in path.atom_indices[:n]],
    }
    with open(args.nodes_out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"selected {n} nodes -> {args.nodes_out}; path -> {args.out}")
    return EXIT_OK


def _load_nodes(path: str):
    from .core import Direction

    with open(_require_file(path, "nodes")) as fh:
        doc = json.load(fh)
    for key in ("input_dim", "directions"):
        if key not in doc:
            raise CliError(f"nodes file missing field {key!r}")
    return [Direction(np.asarray(n["a"]), n["b"]) for n in doc["directions"]]


def cmd_fit(args) -> int:
    train_set = sampling.load_dataset_csv(_require_file(args.train, "training set"))
    nodes = _load_nodes(args.nodes)
    net, _ = solve.refit_network(train_set, nodes)
    save_network(net, args.out)
    print(f"fitted {net.n_nodes}-node network -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    train_set = sampling.load_dataset_csv(_require_file(args.train, "training set"))
    val_set = sampling.load_dataset_csv(_require_file(args.val, "validation set")) if args.val else None
    net0 = load_network(_require_file(args.network, "network"))
    cfg = train.TrainConfig(
        epochs=args.epochs, batch_size=args.batch or train_set.n_points,
        seed=sampling.substream_seed(args.seed or 0, "shuffle"))
    net, curve = train.train(net0, train_set, val_set, cfg)
    save_network(net, args.out)
    if args.loss_out:
        train.save_loss_csv(curve, args.loss_out)
    print(f"trained {net.n_nodes}-node network for {args.epochs} epochs -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    manifest_path = args.run
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, "manifest.json")
    doc = bench.load_manifest(_require_file(manifest_path, "manifest"))
    results = doc.get("results", {})
    print(f"target: {doc.get('config', {}).get('target_id')}")
    print(f"dictionary: {results.get('dictionary_size_before_prune')} -> "
          f"{results.get('dictionary_size_after_prune')} atoms")
    if "errors" in results:
        print(f"selected nodes: {results.get('selected_nodes')}")
        for name, err in results["errors"].items():
            print(f"  {name:16s} rel_l2={err['rel_l2']:.4e} rmse={err['rmse']:.4e}")
    for row in results.get("sweep", []):
        if row.get("available"):
            print(f"  N={row['n_nodes']:4d} gsn_init={row['gsn_init']['rel_l2']:.4e} "
                  f"gsn_trained={row['gsn_trained']['rel_l2']:.4e} "
                  f"random={row['random_trained']['rel_l2']:.4e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsn",
        description="Greedy shallow ReLU network construction and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: GSN_THREADS or CPU count)")
        if with_out:
            p.add_argument("--out", default="runs", help="output directory")

    p = sub.add_parser("bench", help="run a full benchmark (pipeline + baseline)")
    p.add_argument("example", nargs="?", default=None, help="example id ex1..ex6")
    p.add_argument("--no-prune", action="store_true", help="skip dictionary pruning")
    p.add_argument("--nodes", type=int, default=None, help="fix the node count")
    p.add_argument("--epochs", type=int, default=None, help="override training epochs")
    p.add_argument("--batch", type=int, default=None, help="override both batch sizes")
    p.add_argument("--restarts", type=int, default=None, help="random-init restarts")
    common(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("sample", help="write train/val/test datasets and directions")
    p.add_argument("example", nargs="?", default=None, help="example id ex1..ex6")
    p.add_argument("--no-prune", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--nodes", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--epochs", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--batch", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--restarts", type=int, default=None, help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("dict", help="build the atom dictionary from artifacts")
    p.add_argument("--train", required=True)
    p.add_argument("--directions", required=True)
    p.add_argument("--drop-tol", type=float, default=1e-12)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dict)

    p = sub.add_parser("ridgelet", help="collapsed transform over sampled directions")
    p.add_argument("--train", required=True)
    p.add_argument("--directions", required=True)
    p.add_argument("--r-max", type=float, default=20.0)
    p.add_argument("--quad-nodes", type=int, default=200)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ridgelet)

    p = sub.add_parser("prune", help="threshold the dictionary by field magnitude")
    p.add_argument("--train", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_prune)

    p = sub.add_parser("greedy", help="orthogonal greedy selection over a dictionary")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--nodes", type=int, default=None, help="fix the node count")
    p.add_argument("--out", required=True, help="path CSV")
    p.add_argument("--nodes-out", required=True, help="selected nodes JSON")
    p.set_defaults(fn=cmd_greedy)

    p = sub.add_parser("fit", help="least-squares outer weights for selected nodes")
    p.add_argument("--train", required=True)
    p.add_argument("--nodes", required=True, help="nodes JSON from the greedy stage")
    p.add_argument("--out", required=True, help="network JSON")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("train", help="fine-tune a network with Adam")
    p.add_argument("--network", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", default=None)
    p.add_argument("--epochs", type=int, default=10_000)
    p.add_argument("--batch", type=int, default=None, help="batch size (default full batch)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-out", default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("report", help="summarize a run directory's manifest")
    p.add_argument("run", help="run directory or manifest path")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except (KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        print(f"numerical failure in stage {exc.stage!r}: {exc.cause}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GsnError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
