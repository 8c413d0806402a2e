"""Seeded direction sampling, dataset generation, and dictionary construction.

Reproducibility contract: every random draw flows from a 64-bit master seed
through numpy's PCG64 generator. Purpose-specific sub-streams are derived as

    SeedSequence(master_seed, spawn_key=(STREAMS[purpose], index))

with the fixed purpose table below, so train/validation/test/direction/init/
shuffle draws are independent and individually reproducible across runs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Dictionary, Direction, preactivations, relu

# Fixed purpose -> sub-stream index table. Changing it changes every seeded
# output, so it is part of the on-disk format.
STREAMS = {
    "directions": 0,
    "train": 1,
    "validation": 2,
    "test": 3,
    "init": 4,
    "shuffle": 5,
}

SCHEMES = ("circle-uniform", "circle-grid", "golden-spiral", "gaussian-normalized")

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0


def substream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Generator for one documented sub-stream of the master seed."""
    key = (STREAMS[purpose], index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def substream_seed(seed: int, purpose: str, index: int = 0) -> int:
    """A derived 64-bit integer seed for handing to nested components."""
    key = (STREAMS[purpose], index)
    words = np.random.SeedSequence(seed, spawn_key=key).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


@dataclass(frozen=True)
class SamplerConfig:
    """How to draw M candidate directions for a d-dimensional problem."""

    dimension: int
    count: int
    seed: int
    scheme: str

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("direction count must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme.startswith("circle") and self.dimension != 1:
            raise ValueError("circle schemes require dimension 1")
        if self.scheme == "golden-spiral" and self.dimension != 2:
            raise ValueError("golden-spiral requires dimension 2")


def default_scheme(dimension: int) -> str:
    if dimension == 1:
        return "circle-uniform"
    if dimension == 2:
        return "golden-spiral"
    return "gaussian-normalized"


def default_direction_count(dimension: int) -> int:
    return 10_000 * dimension


def sample_circle(count: int, seed: int = 0, grid: bool = False) -> list[Direction]:
    """Directions on the unit circle (d=1), i.i.d. uniform or equispaced.

    Uniform draws angles from [-pi, pi) on the 'directions' sub-stream;
    the grid places phi_j = -pi + 2*pi*j/count.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if grid:
        phi = -math.pi + 2.0 * math.pi * np.arange(count) / count
    else:
        rng = substream(seed, "directions")
        phi = rng.uniform(-math.pi, math.pi, size=count)
    return [Direction(np.array([math.cos(p)]), math.sin(p)) for p in phi]


def golden_spiral(count: int) -> list[Direction]:
    """Deterministic golden-spiral point set on the 2-sphere.

    Point i sits at height z_i = 1 - 2*(i+0.5)/count with azimuth
    2*pi*i/golden_ratio**2; (x, y, z) is read as (a1, a2, b).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    i = np.arange(count)
    z = 1.0 - 2.0 * (i + 0.5) / count
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    theta = 2.0 * math.pi * i / GOLDEN_RATIO**2
    x = rho * np.cos(theta)
    y = rho * np.sin(theta)
    return [Direction(np.array([xi, yi]), zi) for xi, yi, zi in zip(x, y, z)]


def sample_gaussian_sphere(dimension: int, count: int, seed: int = 0) -> list[Direction]:
    """I.i.d. standard Gaussian (d+1)-vectors normalized onto the sphere."""
    if dimension < 1 or count < 1:
        raise ValueError("dimension and count must be >= 1")
    rng = substream(seed, "directions")
    vecs = rng.standard_normal(size=(count, dimension + 1))
    norms = np.linalg.norm(vecs, axis=1)
    while np.any(norms == 0.0):  # probability zero, guarded anyway
        dead = norms == 0.0
        vecs[dead] = rng.standard_normal(size=(int(dead.sum()), dimension + 1))
        norms = np.linalg.norm(vecs, axis=1)
    vecs /= norms[:, None]
    return [Direction(v[:-1], v[-1]) for v in vecs]


def sample_directions(config: SamplerConfig) -> list[Direction]:
    if config.scheme == "circle-uniform":
        return sample_circle(config.count, config.seed, grid=False)
    if config.scheme == "circle-grid":
        return sample_circle(config.count, config.seed, grid=True)
    if config.scheme == "golden-spiral":
        return golden_spiral(config.count)
    return sample_gaussian_sphere(config.dimension, config.count, config.seed)


def _grid_inputs(bounds: np.ndarray, n_points: int) -> np.ndarray:
    d = bounds.shape[0]
    per_axis = round(n_points ** (1.0 / d))
    if per_axis**d != n_points:
        raise ValueError(f"grid layout needs a perfect {d}-th power of points, got {n_points}")
    axes = [np.linspace(lo, hi, per_axis) if per_axis > 1 else np.array([(lo + hi) / 2.0])
            for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def generate_dataset(target, n_points: int, seed: int, layout: str = "random-uniform",
                     purpose: str = "train") -> Dataset:
    """Draw inputs over the target's domain and evaluate it exactly.

    ``target`` needs ``dimension``, ``domain_bounds`` and a vectorized
    ``evaluate(inputs)``; ``purpose`` picks the sub-stream (train /
    validation / test) so the three splits are independent.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    bounds = np.asarray(target.domain_bounds, dtype=np.float64).reshape(-1, 2)
    if layout == "grid":
        inputs = _grid_inputs(bounds, n_points)
    elif layout == "random-uniform":
        rng = substream(seed, purpose)
        u = rng.uniform(size=(n_points, bounds.shape[0]))
        inputs = bounds[:, 0] + u * (bounds[:, 1] - bounds[:, 0])
    else:
        raise ValueError(f"unknown layout {layout!r}")
    targets = np.asarray(target.evaluate(inputs), dtype=np.float64).ravel()
    return Dataset(inputs, targets, bounds)


def build_dictionary(dataset: Dataset, directions, drop_tol: float = 1e-12) -> Dictionary:
    """Normalized ReLU activation vectors for each direction.

    Directions whose activations have l2 norm <= drop_tol on the training
    inputs carry no information and are dropped (kept in provenance).
    """
    directions = list(directions)
    if not directions:
        raise ValueError("need at least one direction")
    if directions[0].dim != dataset.dim:
        raise ValueError("direction dimension must match dataset dimension")
    A = np.stack([dr.a for dr in directions])
    b = np.array([dr.b for dr in directions])
    feats = relu(preactivations(dataset.inputs, A, b))   # (n_train, M)
    norms = np.linalg.norm(feats, axis=0)
    keep = norms > drop_tol
    if not np.any(keep):
        raise ValueError("every sampled direction is dead on the training set")
    kept_idx = np.flatnonzero(keep)
    feats = feats[:, kept_idx] / norms[kept_idx]
    return Dictionary(
        features=feats,
        raw_norms=norms[kept_idx],
        directions=tuple(directions[j] for j in kept_idx),
        source_indices=tuple(int(j) for j in kept_idx),
        source_directions=tuple(directions),
    )


# --- CSV import/export -------------------------------------------------

def save_dataset_csv(dataset: Dataset, path) -> None:
    """One row per point, d input columns then the target column.

    The domain box rides along in a leading comment line so a round trip
    preserves the exact bounds (and with them integration weights).
    """
    with open(path, "w", newline="") as fh:
        fh.write(f"# domain_bounds={json.dumps(dataset.domain_bounds.tolist())}\n")
        writer = csv.writer(fh)
        writer.writerow([f"x{i+1}" for i in range(dataset.dim)] + ["f"])
        for row, y in zip(dataset.inputs, dataset.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])


def load_dataset_csv(path) -> Dataset:
    bounds = None
    rows = []
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.startswith("#"):
            _, _, payload = first.partition("=")
            bounds = np.asarray(json.loads(payload), dtype=np.float64)
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            if row:
                rows.append([float(v) for v in row])
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"malformed dataset CSV {path}")
    inputs, targets = data[:, :-1], data[:, -1]
    if bounds is None:
        bounds = np.stack([inputs.min(axis=0), inputs.max(axis=0)], axis=1)
    return Dataset(inputs, targets, bounds)


def save_directions_csv(directions, path) -> None:
    directions = list(directions)
    d = directions[0].dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"a{i+1}" for i in range(d)] + ["b"])
        for dr in directions:
            writer.writerow([repr(float(v)) for v in dr.a] + [repr(float(dr.b))])


def load_directions_csv(path) -> list[Direction]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                vals = [float(v) for v in row]
                out.append(Direction(np.asarray(vals[:-1]), vals[-1]))
    return out


def save_dictionary_csv(dictionary: Dictionary, path) -> None:
    """Kept atoms only: source index, direction coordinates, raw norm."""
    d = dictionary.directions[0].dim if dictionary.n_atoms else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_index"] + [f"a{i+1}" for i in range(d)] + ["b", "raw_norm"])
        for j in range(dictionary.n_atoms):
            dr = dictionary.directions[j]
            writer.writerow([dictionary.source_indices[j]]
                            + [repr(float(v)) for v in dr.a]
                            + [repr(float(dr.b)), repr(float(dictionary.raw_norms[j]))])


def load_dictionary_csv(path, dataset: Dataset) -> Dictionary:
    """Rebuild a Dictionary from its CSV against the training set it came from."""
    entries = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                vals = [float(v) for v in row[1:]]
                entries.append((int(row[0]), Direction(np.asarray(vals[:-2]), vals[-2])))
    if not entries:
        raise ValueError(f"empty dictionary CSV {path}")
    A = np.stack([dr.a for _, dr in entries])
    b = np.array([dr.b for _, dr in entries])
    feats = relu(preactivations(dataset.inputs, A, b))
    norms = np.linalg.norm(feats, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("dictionary CSV contains atoms dead on this training set")
    return Dictionary(
        features=feats / norms,
        raw_norms=norms,
        directions=tuple(dr for _, dr in entries),
        source_indices=tuple(i for i, _ in entries),
        source_directions=tuple(dr for _, dr in entries),
    )
