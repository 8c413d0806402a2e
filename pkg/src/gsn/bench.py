"""Benchmark targets, experiment orchestration, metrics, and manifests.

Six closed-form targets (ex1..ex6) with per-target default budgets; a full
pipeline run produces a JSON manifest plus CSV curves in a directory named
by the config hash, and re-running the same config reproduces every number
from the embedded seeds.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import greedy, ridgelet, sampling, solve, train
from .core import Dataset, GsnError, ShallowNetwork, batch_eval, save_network
from .ridgelet import RadialQuadrature
from .train import InitSpec, TrainConfig


class PipelineError(GsnError):
    """Numerical failure inside a pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class TargetFunction:
    id: str
    dimension: int
    domain_bounds: tuple
    expression: str
    _fn: callable = field(repr=False, compare=False)

    def evaluate(self, inputs) -> np.ndarray:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        out = np.asarray(self._fn(inputs), dtype=np.float64).ravel()
        if not np.all(np.isfinite(out)):
            raise ValueError(f"target {self.id} produced non-finite values")
        return out


def _ex1(X):
    x = X[:, 0]
    return np.cos(2.0 * np.pi * x) * np.exp(x)


def _ex2(X):
    x = X[:, 0]
    return np.sin(2.0 * np.pi * x) * np.exp(-x * x) + np.cos(17.0 * x) * np.exp(x)


def _ex3(X):
    x, y = X[:, 0], X[:, 1]
    return np.sin(np.pi * x) * np.cos(np.pi * y) * np.exp(-(x * x + y * y))


def _ex4(X):
    x, y = X[:, 0], X[:, 1]
    return np.cos(5.0 * (x + y)) * np.sin(3.0 * (x - y)) * np.exp(-(x * x + y * y))


def _ex5(X):
    return np.sin(2.0 * np.pi * X.sum(axis=1))


def _ex6(X):
    return np.cos((X * X).sum(axis=1)) / np.exp(X.sum(axis=1))


def target_registry() -> list[TargetFunction]:
    box11 = (-1.0, 1.0)
    return [
        TargetFunction("ex1", 1, (box11,), "cos(2*pi*x) * exp(x)", _ex1),
        TargetFunction("ex2", 1, (box11,), "sin(2*pi*x)*exp(-x^2) + cos(17x)*exp(x)", _ex2),
        TargetFunction("ex3", 2, (box11, box11), "sin(pi*x)*cos(pi*y)*exp(-(x^2+y^2))", _ex3),
        TargetFunction("ex4", 2, (box11, box11), "cos(5(x+y))*sin(3(x-y))*exp(-(x^2+y^2))", _ex4),
        TargetFunction("ex5", 4, (box11,) * 4, "sin(2*pi*(x1+x2+x3+x4))", _ex5),
        TargetFunction("ex6", 5, ((0.0, 1.0),) * 5, "cos(sum(x_i^2)) / exp(sum(x_i))", _ex6),
    ]


def get_target(target_id: str) -> TargetFunction:
    for t in target_registry():
        if t.id == target_id:
            return t
    raise KeyError(f"unknown target id {target_id!r}")


@dataclass(frozen=True)
class ErrorSummary:
    abs_l2: float
    rmse: float
    rel_l2: float
    rel_l2_defined: bool = True

    def as_dict(self) -> dict:
        return {"abs_l2": self.abs_l2, "rmse": self.rmse,
                "rel_l2": self.rel_l2, "rel_l2_defined": self.rel_l2_defined}


def compute_errors(net: ShallowNetwork, test_set: Dataset) -> ErrorSummary:
    """Absolute l2, RMSE, and relative l2 error of a network on a test set."""
    if test_set.n_points == 0:
        raise ValueError("test set is empty")
    diff = batch_eval(net, test_set.inputs) - test_set.targets
    abs_l2 = float(np.linalg.norm(diff))
    rmse = abs_l2 / math.sqrt(test_set.n_points)
    tnorm = float(np.linalg.norm(test_set.targets))
    if tnorm > 0.0:
        return ErrorSummary(abs_l2, rmse, abs_l2 / tnorm, True)
    return ErrorSummary(abs_l2, rmse, float("inf") if abs_l2 else 0.0, False)


@dataclass(frozen=True)
class ExperimentConfig:
    target_id: str
    n_train: int
    n_val: int
    n_test: int
    dict_size: int
    prune: bool = True
    prune_threshold: float = 1e-3
    drop_tol: float = 1e-12
    max_iter: int = 50
    n_nodes: int | None = None      # overrides validation-based selection when set
    gsn_train: TrainConfig = field(default_factory=TrainConfig)
    random_train: TrainConfig = field(default_factory=TrainConfig)
    n_restarts: int = 10
    seed: int = 0
    quad_r_max: float = 40.0
    quad_n_nodes: int = 400
    threads: int = 1
    notes: tuple = ()

    def __post_init__(self):
        if min(self.n_train, self.n_val, self.n_test, self.dict_size) < 1:
            raise ValueError("point counts and dictionary size must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")
        if not 0.0 <= self.prune_threshold < 1.0:
            raise ValueError("prune_threshold must lie in [0, 1)")
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def quadrature(self) -> RadialQuadrature:
        return RadialQuadrature(self.quad_r_max, self.quad_n_nodes)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["notes"] = list(self.notes)
        return doc

    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


# Per-target default budgets: (n_train, n_val, n_test, gsn_batch, random_batch,
# max_iter, n_restarts, prune). Dictionary size defaults to 10000 * d.
_DEFAULTS = {
    "ex1": (50, 15, 1_000, 50, 1, 50, 10, True),
    "ex2": (100, 20, 1_000, 100, 1, 60, 10, True),
    "ex3": (256, 50, 10_000, 256, 3, 80, 10, True),
    "ex4": (1_024, 200, 10_000, 1_024, 11, 120, 10, True),
    "ex5": (4_000, 400, 10_000, 4_000, 11, 150, 10, False),
    "ex6": (10_000, 1_000, 10_000, 100, 100, 160, 5, False),
}

EX6_SWEEP_DEFAULT = (10, 20, 40, 80, 160)

EXAMPLE_IDS = tuple(_DEFAULTS)


def default_config(target_id: str, seed: int = 0, **overrides) -> ExperimentConfig:
    """Canonical per-target configuration, overridable field by field."""
    if target_id not in _DEFAULTS:
        raise KeyError(f"unknown target id {target_id!r}")
    n_train, n_val, n_test, gsn_batch, rnd_batch, max_iter, n_restarts, prune = _DEFAULTS[target_id]
    target = get_target(target_id)
    shuffle_seed = sampling.substream_seed(seed, "shuffle")
    notes = ()
    if target_id == "ex5":
        notes = ("batch sizes are an unstated-default guess: full-batch for the "
                 "greedy-initialized branch, 11 for the random branch",)
    kwargs = dict(
        target_id=target_id,
        n_train=n_train,
        n_val=n_val,
        n_test=n_test,
        dict_size=sampling.default_direction_count(target.dimension),
        prune=prune,
        max_iter=max_iter,
        gsn_train=TrainConfig(epochs=10_000, batch_size=gsn_batch, seed=shuffle_seed),
        random_train=TrainConfig(epochs=10_000, batch_size=rnd_batch, seed=shuffle_seed),
        n_restarts=n_restarts,
        seed=seed,
        notes=notes,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def _grid_compatible(n_points: int, dimension: int) -> bool:
    if dimension > 2:
        return False
    per_axis = round(n_points ** (1.0 / dimension))
    return per_axis**dimension == n_points


def make_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset, Dataset]:
    """Train/validation/test splits on their dedicated seed sub-streams.

    Training points are gridded for d <= 2 (coverage gaps in small random
    samples wreck the least-squares fit between points); validation points
    are always random draws so model selection sees held-out locations.
    """
    target = get_target(cfg.target_id)
    train_layout = "grid" if _grid_compatible(cfg.n_train, target.dimension) else "random-uniform"
    train_set = sampling.generate_dataset(target, cfg.n_train, cfg.seed,
                                          train_layout, purpose="train")
    val_set = sampling.generate_dataset(target, cfg.n_val, cfg.seed,
                                        "random-uniform", purpose="validation")
    n_test = cfg.n_test
    test_layout = "random-uniform"
    if _grid_compatible(cfg.n_test, target.dimension) or target.dimension <= 2:
        per_axis = round(cfg.n_test ** (1.0 / target.dimension))
        n_test = per_axis**target.dimension
        test_layout = "grid"
    test_set = sampling.generate_dataset(target, n_test, cfg.seed, test_layout, purpose="test")
    return train_set, val_set, test_set


def make_directions(cfg: ExperimentConfig) -> list:
    target = get_target(cfg.target_id)
    sampler = sampling.SamplerConfig(
        dimension=target.dimension,
        count=cfg.dict_size,
        seed=cfg.seed,
        scheme=sampling.default_scheme(target.dimension),
    )
    return sampling.sample_directions(sampler)


@dataclass
class GsnBranch:
    """Everything produced by the greedy pipeline for one config."""

    train_set: Dataset
    val_set: Dataset
    test_set: Dataset
    dictionary_size_before: int
    dictionary_size_after: int
    prune_degenerate: bool
    path: greedy.GreedyPath
    path_directions: tuple          # direction per path record, selection order
    path_raw_norms: np.ndarray
    selected_nodes: int
    init_net: ShallowNetwork
    init_errors: ErrorSummary
    trained_net: ShallowNetwork
    trained_errors: ErrorSummary
    loss_curve: np.ndarray
    field: ridgelet.CollapsedField | None
    timings: dict


def _staged(stage: str, fn, timings: dict):
    t0 = time.perf_counter()
    try:
        out = fn()
    except GsnError as exc:
        raise PipelineError(stage, exc) from exc
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise PipelineError(stage, exc) from exc
    timings[stage] = time.perf_counter() - t0
    return out


def run_gsn_pipeline(cfg: ExperimentConfig) -> GsnBranch:
    """Sampling -> dictionary -> optional pruning -> greedy -> fit -> train."""
    timings: dict = {}
    train_set, val_set, test_set = _staged(
        "sample", lambda: make_datasets(cfg), timings)
    directions = _staged("directions", lambda: make_directions(cfg), timings)
    dictionary = _staged(
        "dict", lambda: sampling.build_dictionary(train_set, directions, cfg.drop_tol), timings)
    size_before = dictionary.n_atoms

    fld = None
    degenerate = False
    if cfg.prune:
        fld = _staged(
            "ridgelet",
            lambda: ridgelet.collapsed_field(train_set, dictionary.directions,
                                             cfg.quadrature, threads=cfg.threads),
            timings)
        pruned = _staged(
            "prune", lambda: ridgelet.prune_dictionary(dictionary, fld, cfg.prune_threshold),
            timings)
        degenerate = bool(np.all(fld.values == 0.0))
        dictionary = pruned

    path = _staged(
        "greedy", lambda: greedy.oga_run(dictionary, train_set, val_set, cfg.max_iter),
        timings)
    if not path.records:
        raise PipelineError("greedy", ValueError("greedy produced an empty path"))
    path_dirs = tuple(dictionary.directions[j] for j in path.atom_indices)
    path_norms = dictionary.raw_norms[path.atom_indices].copy()
    n_nodes = cfg.n_nodes if cfg.n_nodes is not None else greedy.select_model(path)
    n_nodes = min(n_nodes, len(path.records))

    init_net, _ = _staged(
        "fit", lambda: solve.refit_network(train_set, path_dirs[:n_nodes]), timings)
    init_errors = compute_errors(init_net, test_set)

    trained_net, curve = _staged(
        "train", lambda: train.train(init_net, train_set, val_set, cfg.gsn_train), timings)
    trained_errors = compute_errors(trained_net, test_set)

    return GsnBranch(
        train_set=train_set, val_set=val_set, test_set=test_set,
        dictionary_size_before=size_before, dictionary_size_after=dictionary.n_atoms,
        prune_degenerate=degenerate,
        path=path, path_directions=path_dirs, path_raw_norms=path_norms,
        selected_nodes=n_nodes,
        init_net=init_net, init_errors=init_errors,
        trained_net=trained_net, trained_errors=trained_errors,
        loss_curve=curve, field=fld, timings=timings,
    )


@dataclass
class RandomBranch:
    best_net: ShallowNetwork
    best_errors: ErrorSummary
    restarts: list
    loss_curve: np.ndarray
    timing: float


def run_random_baseline(cfg: ExperimentConfig, n_nodes: int,
                        train_set: Dataset, val_set: Dataset, test_set: Dataset) -> RandomBranch:
    """Best-of-n truncated-normal baseline at the same node count."""
    t0 = time.perf_counter()
    init = InitSpec(kind="truncated-normal", seed=sampling.substream_seed(cfg.seed, "init"))
    try:
        best, records, curve = train.multi_restart(
            n_nodes, train_set, val_set, test_set,
            cfg.random_train, init, cfg.n_restarts)
    except GsnError as exc:
        raise PipelineError("baseline", exc) from exc
    return RandomBranch(
        best_net=best,
        best_errors=compute_errors(best, test_set),
        restarts=records,
        loss_curve=curve,
        timing=time.perf_counter() - t0,
    )


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    gsn: GsnBranch
    random: RandomBranch

    def manifest(self) -> dict:
        """Deterministic results document; volatile data stays under 'meta'."""
        return {
            "meta": _meta(self.gsn.timings, self.random.timing),
            "config": self.config.to_dict(),
            "results": {
                "dictionary_size_before_prune": self.gsn.dictionary_size_before,
                "dictionary_size_after_prune": self.gsn.dictionary_size_after,
                "prune_degenerate": self.gsn.prune_degenerate,
                "selected_nodes": self.gsn.selected_nodes,
                "greedy_termination": self.gsn.path.termination,
                "errors": {
                    "gsn_init": self.gsn.init_errors.as_dict(),
                    "gsn_trained": self.gsn.trained_errors.as_dict(),
                    "random_trained": self.random.best_errors.as_dict(),
                },
                "random_restarts": _restart_rows(self.random.restarts),
            },
        }


def _meta(gsn_timings: dict, random_timing: float) -> dict:
    return {
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "timings_sec": {**{f"gsn.{k}": round(v, 6) for k, v in gsn_timings.items()},
                        "random.total": round(random_timing, 6)},
    }


def _restart_rows(records) -> list:
    return [
        {"restart": r.restart, "init_seed": r.init_seed,
         "test_rmse": r.test_error, "final_train_loss": r.final_train_loss}
        for r in records
    ]


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    gsn_branch = run_gsn_pipeline(cfg)
    random_branch = run_random_baseline(
        cfg, gsn_branch.selected_nodes,
        gsn_branch.train_set, gsn_branch.val_set, gsn_branch.test_set)
    return ExperimentReport(cfg, gsn_branch, random_branch)


@dataclass
class SweepPoint:
    n_nodes: int
    available: bool
    gsn_init: ErrorSummary | None = None
    gsn_trained: ErrorSummary | None = None
    random_trained: ErrorSummary | None = None


@dataclass
class SweepReport:
    config: ExperimentConfig
    node_counts: tuple
    points: list
    base: GsnBranch

    def manifest(self) -> dict:
        rows = []
        for p in self.points:
            row = {"n_nodes": p.n_nodes, "available": p.available}
            if p.available:
                row["gsn_init"] = p.gsn_init.as_dict()
                row["gsn_trained"] = p.gsn_trained.as_dict()
                row["random_trained"] = p.random_trained.as_dict()
            rows.append(row)
        return {
            "meta": _meta(self.base.timings, 0.0),
            "config": {**self.config.to_dict(), "node_counts": list(self.node_counts)},
            "results": {
                "dictionary_size_before_prune": self.base.dictionary_size_before,
                "dictionary_size_after_prune": self.base.dictionary_size_after,
                "greedy_termination": self.base.path.termination,
                "sweep": rows,
            },
        }


def node_sweep(cfg: ExperimentConfig, node_counts) -> SweepReport:
    """Truncate one greedy path at each size and train both branches there."""
    node_counts = tuple(int(n) for n in node_counts)
    base_cfg = replace(cfg, n_nodes=None, max_iter=max(cfg.max_iter, max(node_counts)))
    base = run_gsn_pipeline(replace(base_cfg, gsn_train=replace(cfg.gsn_train, epochs=0)))
    points = []
    for n in node_counts:
        if n > len(base.path.records):
            points.append(SweepPoint(n, available=False))
            continue
        nodes = base.path_directions[:n]
        init_net, _ = solve.refit_network(base.train_set, nodes)
        gsn_init = compute_errors(init_net, base.test_set)
        trained_net, _ = train.train(init_net, base.train_set, base.val_set, cfg.gsn_train)
        gsn_trained = compute_errors(trained_net, base.test_set)
        rnd = run_random_baseline(cfg, n, base.train_set, base.val_set, base.test_set)
        points.append(SweepPoint(n, True, gsn_init, gsn_trained, rnd.best_errors))
    return SweepReport(cfg, node_counts, points, base)


# --- artifact writing ---------------------------------------------------

def write_manifest(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_run_artifacts(report: ExperimentReport, out_root) -> str:
    """Manifest plus every curve and dataset CSV, under <out>/<target>-<hash>/."""
    run_dir = os.path.join(out_root, f"{report.config.target_id}-{report.config.hash()}")
    os.makedirs(run_dir, exist_ok=True)
    gsn_branch = report.gsn
    sampling.save_dataset_csv(gsn_branch.train_set, os.path.join(run_dir, "train.csv"))
    sampling.save_dataset_csv(gsn_branch.val_set, os.path.join(run_dir, "val.csv"))
    sampling.save_dataset_csv(gsn_branch.test_set, os.path.join(run_dir, "test.csv"))
    greedy.save_path_csv(gsn_branch.path, os.path.join(run_dir, "path.csv"))
    if gsn_branch.field is not None:
        ridgelet.save_field_csv(gsn_branch.field, os.path.join(run_dir, "field.csv"))
    train.save_loss_csv(gsn_branch.loss_curve, os.path.join(run_dir, "gsn_loss.csv"))
    train.save_loss_csv(report.random.loss_curve, os.path.join(run_dir, "random_loss_best.csv"))
    save_network(gsn_branch.init_net, os.path.join(run_dir, "gsn_init_network.json"))
    save_network(gsn_branch.trained_net, os.path.join(run_dir, "gsn_trained_network.json"))
    save_network(report.random.best_net, os.path.join(run_dir, "random_best_network.json"))
    write_manifest(report.manifest(), os.path.join(run_dir, "manifest.json"))
    return run_dir


def write_sweep_artifacts(report: SweepReport, out_root) -> str:
    run_dir = os.path.join(out_root, f"{report.config.target_id}-sweep-{report.config.hash()}")
    os.makedirs(run_dir, exist_ok=True)
    greedy.save_path_csv(report.base.path, os.path.join(run_dir, "path.csv"))
    with open(os.path.join(run_dir, "sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_nodes", "gsn_init_rel_l2", "gsn_trained_rel_l2",
                         "random_trained_rel_l2"])
        for p in report.points:
            if p.available:
                writer.writerow([p.n_nodes, repr(p.gsn_init.rel_l2),
                                 repr(p.gsn_trained.rel_l2), repr(p.random_trained.rel_l2)])
            else:
                writer.writerow([p.n_nodes, "", "", ""])
    write_manifest(report.manifest(), os.path.join(run_dir, "manifest.json"))
    return run_dir


def strip_meta(doc: dict) -> dict:
    """Manifest without its volatile header, for determinism comparisons."""
    return {k: v for k, v in doc.items() if k != "meta"}


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Rebuild a config from a manifest's embedded 'config' object."""
    doc = dict(doc)
    doc.pop("node_counts", None)
    doc["gsn_train"] = TrainConfig(**doc["gsn_train"])
    doc["random_train"] = TrainConfig(**doc["random_train"])
    doc["notes"] = tuple(doc.get("notes", ()))
    return ExperimentConfig(**doc)
