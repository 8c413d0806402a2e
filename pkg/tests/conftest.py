import numpy as np
import pytest

from gsn.core import Dataset, Dictionary, Direction


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def unit_rows(rng, n_rows, dim):
    v = rng.standard_normal((n_rows, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def synthetic_dictionary(features: np.ndarray) -> Dictionary:
    """Wrap an arbitrary unit-column feature matrix as a Dictionary.

    Directions are placeholder circle points; greedy selection only looks
    at the feature columns, so tests can exercise it on raw matrices.
    """
    features = np.asarray(features, dtype=np.float64)
    n_atoms = features.shape[1]
    angles = 2.0 * np.pi * np.arange(n_atoms) / max(n_atoms, 1)
    dirs = tuple(Direction(np.array([np.cos(t)]), float(np.sin(t))) for t in angles)
    return Dictionary(
        features=features,
        raw_norms=np.ones(n_atoms),
        directions=dirs,
        source_indices=tuple(range(n_atoms)),
        source_directions=dirs,
    )


def vector_dataset(values: np.ndarray) -> Dataset:
    """1-d dataset whose targets are the given vector; inputs are a grid."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    inputs = np.linspace(-1.0, 1.0, n)[:, None]
    return Dataset(inputs, values, np.array([[-1.0, 1.0]]))
