"""Ridgelet-transform machinery for dictionary pruning.

The dual kernel is proportional to the fourth derivative of a Gaussian, so
it has four vanishing moments and pairs admissibly with the ReLU. Its
discretized transform, collapsed along rays through sphere directions,
concentrates where candidate nodes matter for a given target; thresholding
its magnitude shrinks the dictionary before greedy selection.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, Dictionary, Direction, directions_to_arrays, relu

# keep scratch buffers around this many float64s when chunking direction sets
_CHUNK_BUDGET = 8_000_000


def tau(z, dimension: int = 1):
    """Dual ReLU kernel: -(z^4 - 6 z^2 + 3) * exp(-z^2/2) / (2 (2 pi)^(d-1/2)).

    Evaluated through z*z so the evenness tau(z) == tau(-z) is exact in
    floating point.
    """
    z = np.asarray(z, dtype=np.float64)
    z2 = z * z
    scale = 2.0 * (2.0 * math.pi) ** (dimension - 0.5)
    out = (z2 * (6.0 - z2) - 3.0) / scale * np.exp(-0.5 * z2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RadialQuadrature:
    """Trapezoidal rule on equispaced radii (0, r_max].

    The integrand carries an r^(d+1) factor and so vanishes at r=0; the
    rule uses that zero endpoint implicitly.
    """

    r_max: float = 40.0
    n_nodes: int = 400

    def __post_init__(self):
        if self.r_max <= 0.0:
            raise ValueError("r_max must be positive")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")

    @property
    def nodes(self) -> np.ndarray:
        h = self.r_max / self.n_nodes
        return h * np.arange(1, self.n_nodes + 1)

    def weights(self, dimension: int) -> np.ndarray:
        """Trapezoid weights already folded with the r^(d+1) factor."""
        h = self.r_max / self.n_nodes
        w = np.full(self.n_nodes, h)
        w[-1] = h / 2.0
        return w * self.nodes ** (dimension + 1)


@dataclass(frozen=True)
class RidgeletField:
    """Transform values over a rectangular grid of (a, b) locations (d=1)."""

    a_grid: np.ndarray
    b_grid: np.ndarray
    values: np.ndarray     # shape (len(a_grid), len(b_grid))
    provenance: str = ""

    def __post_init__(self):
        if self.values.shape != (len(self.a_grid), len(self.b_grid)):
            raise ValueError("values grid shape must match (a_grid, b_grid)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")


@dataclass(frozen=True)
class CollapsedField:
    """Collapsed transform values, one per sampled direction."""

    directions: tuple
    values: np.ndarray
    quadrature: RadialQuadrature = field(default_factory=RadialQuadrature)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size != len(self.directions):
            raise ValueError("one value per direction required")
        if not np.all(np.isfinite(values)):
            raise ValueError("collapsed values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "directions", tuple(self.directions))


def ridgelet_transform(dataset: Dataset, a, b: float) -> float:
    """Uniform-measure estimate of the transform at one (a, b) location.

    Uses the training points as quadrature nodes with weight vol(domain)/n.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    z = dataset.inputs @ a + b
    w = dataset.volume / dataset.n_points
    return float(w * np.dot(dataset.targets, tau(z, dataset.dim)))


def ridgelet_field(dataset: Dataset, a_grid, b_grid) -> RidgeletField:
    """Transform evaluated on a rectangular (a, b) grid; d=1 only."""
    if dataset.dim != 1:
        raise ValueError("rectangular field grids are defined for 1-d inputs")
    a_grid = np.asarray(a_grid, dtype=np.float64).ravel()
    b_grid = np.asarray(b_grid, dtype=np.float64).ravel()
    x = dataset.inputs[:, 0]
    w = dataset.volume / dataset.n_points
    # z[i, j, k] = a_i * x_k + b_j
    z = a_grid[:, None, None] * x[None, None, :] + b_grid[None, :, None]
    values = w * (tau(z, 1) @ dataset.targets)
    return RidgeletField(a_grid, b_grid, values)


def collapsed_field(dataset: Dataset, directions, quad: RadialQuadrature | None = None,
                    threads: int = 1) -> CollapsedField:
    """Collapsed transform over a direction set, vectorized and chunked.

    Results are written per-direction, so thread scheduling cannot change
    them; ``threads`` only splits the direction axis.
    """
    directions = list(directions)
    quad = quad or RadialQuadrature()
    A, b = directions_to_arrays(directions)
    r = quad.nodes
    wr = quad.weights(dataset.dim)
    scale = 2.0 * (2.0 * math.pi) ** (dataset.dim - 0.5)
    f = dataset.targets * (dataset.volume / dataset.n_points)
    S = A @ dataset.inputs.T + b[:, None]            # (M, n_train)
    values = np.empty(len(directions))

    chunk = max(1, _CHUNK_BUDGET // (len(r) * max(dataset.n_points, 1)))

    def run(lo: int, hi: int) -> None:
        z = S[lo:hi, None, :] * r[None, :, None]     # (m, n_r, n_train)
        z2 = z * z
        g = (z2 * (6.0 - z2) - 3.0) / scale * np.exp(-0.5 * z2)
        values[lo:hi] = (g @ f) @ wr

    spans = [(lo, min(lo + chunk, len(directions))) for lo in range(0, len(directions), chunk)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda s: run(*s), spans))
    else:
        for lo, hi in spans:
            run(lo, hi)
    return CollapsedField(tuple(directions), values, quad)


def collapsed_ridgelet(dataset: Dataset, direction: Direction,
                       quad: RadialQuadrature | None = None) -> float:
    """Radial integral of the transform along one sphere direction."""
    return float(collapsed_field(dataset, [direction], quad).values[0])


def prune_dictionary(dictionary: Dictionary, fld: CollapsedField,
                     rel_threshold: float = 1e-3) -> Dictionary:
    """Keep atoms whose |collapsed value| exceeds rel_threshold * max.

    Field values must correspond 1-1 with the dictionary's atoms. If every
    value is zero the threshold is degenerate: the dictionary is returned
    unchanged and a warning is issued.
    """
    if not 0.0 <= rel_threshold < 1.0:
        raise ValueError("rel_threshold must lie in [0, 1)")
    if len(fld.directions) != dictionary.n_atoms:
        raise ValueError("field must hold one value per dictionary atom")
    mags = np.abs(fld.values)
    peak = mags.max()
    if peak == 0.0:
        warnings.warn("all collapsed values are zero; pruning skipped", RuntimeWarning)
        return dictionary
    keep = np.flatnonzero(mags > rel_threshold * peak)
    return Dictionary(
        features=dictionary.features[:, keep],
        raw_norms=dictionary.raw_norms[keep],
        directions=tuple(dictionary.directions[j] for j in keep),
        source_indices=tuple(dictionary.source_indices[j] for j in keep),
        source_directions=dictionary.source_directions,
    )


def sphere_surface_area(dimension: int) -> float:
    """Surface area of the unit d-sphere embedded in R^(d+1)."""
    return 2.0 * math.pi ** ((dimension + 1) / 2.0) / math.gamma((dimension + 1) / 2.0)


def reconstruct_from_crf(x, fld: CollapsedField) -> float:
    """Qualitative reconstruction of the target from collapsed values.

    Monte-Carlo estimate of the sphere integral of value * relu(a.x + b)
    over the field's direction cloud; a diagnostic, not a fitted model.
    """
    if not len(fld.directions):
        raise ValueError("field is empty")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    A, b = directions_to_arrays(fld.directions)
    d = A.shape[1]
    area = sphere_surface_area(d)
    return float(area / len(fld.directions) * np.dot(fld.values, relu(A @ x + b)))


def reconstruct_batch(inputs, fld: CollapsedField) -> np.ndarray:
    """Vectorized ``reconstruct_from_crf`` over input rows."""
    inputs = np.asarray(inputs, dtype=np.float64)
    A, b = directions_to_arrays(fld.directions)
    area = sphere_surface_area(A.shape[1])
    return area / len(fld.directions) * (relu(inputs @ A.T + b) @ fld.values)


def save_field_csv(fld: CollapsedField, path) -> None:
    """Direction coordinates then value, one row per direction."""
    d = fld.directions[0].dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"a{i+1}" for i in range(d)] + ["b", "value"])
        for dr, val in zip(fld.directions, fld.values):
            writer.writerow([repr(float(v)) for v in dr.a] + [repr(float(dr.b)), repr(float(val))])


def load_field_csv(path, quad: RadialQuadrature | None = None) -> CollapsedField:
    dirs, vals = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                nums = [float(v) for v in row]
                dirs.append(Direction(np.asarray(nums[:-2]), nums[-2]))
                vals.append(nums[-1])
    return CollapsedField(tuple(dirs), np.asarray(vals), quad or RadialQuadrature())
