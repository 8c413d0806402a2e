"""Orthogonal greedy selection over a dictionary of unit atoms.

Each step picks the atom that minimizes the exact least-squares residual of
the target over the enlarged span. With unit atoms and an orthonormal basis
Q of the current span, that residual drop equals

    <f_m, g>^2 / (1 - sum_j <g, q_j>^2)

so the argmin reduces to an argmax of cached quantities: per-atom residual
correlations and cumulative basis energies, both updated with one matrix-
vector product per iteration. New basis vectors are built with classical
Gram-Schmidt plus one correction pass, which keeps the basis orthonormal to
near machine precision over hundreds of iterations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .core import Dataset, Dictionary, GsnError, ShallowNetwork


class GreedyStop(GsnError):
    """Normal termination of the greedy iteration."""

    reason = "stopped"


class ResidualBelowTolerance(GreedyStop):
    reason = "residual_tol"


class DictionaryExhausted(GreedyStop):
    reason = "exhausted"


class GreedyInvariantError(GsnError):
    """An internal greedy invariant failed; results are not trustworthy."""


@dataclass(frozen=True)
class GreedyTolerances:
    span_tol: float = 1e-10          # atom counts as inside the span below this deficit
    residual_rel_tol: float = 1e-12  # stop once ||f_m|| <= tol * ||f||
    ortho_rel_tol: float = 1e-10     # inline |<f_m, q_j>| bound, relative to ||f||


class GreedyState:
    """Mutable OGA state: selected atoms, orthonormal basis, caches.

    Single-writer: oga_step mutates in place and returns the same object.
    """

    def __init__(self, dictionary: Dictionary, target, max_iter_hint: int = 64,
                 tol: GreedyTolerances = GreedyTolerances()):
        f = np.asarray(target, dtype=np.float64).ravel()
        if f.size != dictionary.n_train:
            raise ValueError("target length must match dictionary row count")
        self.tol = tol
        self.target_norm = float(np.linalg.norm(f))
        self.residual = f.copy()
        self.residual_norm = self.target_norm
        self.selected: list[int] = []
        n = dictionary.n_train
        m_cap = min(max(1, max_iter_hint), n, dictionary.n_atoms)
        self._cap = m_cap
        self.ortho_basis = np.empty((n, m_cap))         # Q, columns q_1..q_m
        self.mix_matrix = np.zeros((m_cap, m_cap))      # R with G_sel = Q R
        self.basis_target = np.empty(m_cap)             # <f, q_j>
        self._basis_atom = np.empty((m_cap, dictionary.n_atoms))  # <q_j, g> rows
        self.atom_energy = np.zeros(dictionary.n_atoms)
        self.atom_score_cache = dictionary.features.T @ self.residual
        self._eligible = np.ones(dictionary.n_atoms, dtype=bool)

    @property
    def n_selected(self) -> int:
        return len(self.selected)

    def _grow(self):
        new_cap = min(2 * self._cap, self.ortho_basis.shape[0],
                      self.atom_energy.size)
        if new_cap <= self._cap:
            return
        m = self.n_selected
        Q = np.empty((self.ortho_basis.shape[0], new_cap))
        Q[:, :m] = self.ortho_basis[:, :m]
        R = np.zeros((new_cap, new_cap))
        R[:m, :m] = self.mix_matrix[:m, :m]
        qtf = np.empty(new_cap)
        qtf[:m] = self.basis_target[:m]
        C = np.empty((new_cap, self.atom_energy.size))
        C[:m] = self._basis_atom[:m]
        self.ortho_basis, self.mix_matrix, self.basis_target, self._basis_atom = Q, R, qtf, C
        self._cap = new_cap

    def recover_weights(self) -> np.ndarray:
        """Coefficients of the selected (unit) atoms reproducing proj(f, span)."""
        m = self.n_selected
        if m == 0:
            return np.zeros(0)
        return solve_triangular(self.mix_matrix[:m, :m], self.basis_target[:m], lower=False)

    def check_invariants(self):
        """Inline guards: residual orthogonal to the basis, energies in range."""
        m = self.n_selected
        if m == 0:
            return
        bound = self.tol.ortho_rel_tol * max(self.target_norm, 1e-300)
        overlap = np.abs(self.ortho_basis[:, :m].T @ self.residual).max()
        if overlap > bound:
            raise GreedyInvariantError(
                f"residual/basis overlap {overlap:.3e} exceeds {bound:.3e}")
        if self.atom_energy.max(initial=0.0) > 1.0 + 1e-10:
            raise GreedyInvariantError("atom energy exceeded 1 beyond tolerance")


def init_state(dictionary: Dictionary, target, max_iter_hint: int = 64,
               tol: GreedyTolerances = GreedyTolerances()) -> GreedyState:
    return GreedyState(dictionary, target, max_iter_hint, tol)


def oga_step(state: GreedyState, dictionary: Dictionary) -> tuple[GreedyState, int]:
    """One greedy iteration: select, orthogonalize, update caches.

    Raises ResidualBelowTolerance or DictionaryExhausted as normal
    termination signals.
    """
    tol = state.tol
    if state.residual_norm <= tol.residual_rel_tol * state.target_norm:
        raise ResidualBelowTolerance(
            f"residual {state.residual_norm:.3e} within tolerance of zero")
    deficit = 1.0 - state.atom_energy
    candidates = state._eligible & (deficit > tol.span_tol)
    if not np.any(candidates):
        raise DictionaryExhausted("all remaining atoms lie inside the current span")

    scores = np.where(candidates, state.atom_score_cache**2 / np.maximum(deficit, tol.span_tol), -np.inf)
    j = int(np.argmax(scores))  # first (lowest-index) maximum on ties

    m = state.n_selected
    if m == state._cap:
        state._grow()
    Q = state.ortho_basis
    g = dictionary.features[:, j]

    # classical Gram-Schmidt using the cached projections, plus one
    # correction pass to hold orthogonality over long runs
    coeff = state._basis_atom[:m, j].copy()
    v = g - Q[:, :m] @ coeff if m else g.copy()
    corr = Q[:, :m].T @ v if m else np.zeros(0)
    if m:
        v -= Q[:, :m] @ corr
        coeff += corr
    vnorm = float(np.linalg.norm(v))
    if vnorm <= tol.span_tol:
        # numerically inside the span despite the energy deficit; retire it
        state._eligible[j] = False
        state.atom_energy[j] = 1.0
        return oga_step(state, dictionary)
    q = v / vnorm

    alpha = float(np.dot(q, state.residual))
    state.residual = state.residual - alpha * q
    new_norm = float(np.linalg.norm(state.residual))
    if new_norm > state.residual_norm * (1.0 + 1e-12) + 1e-300:
        raise GreedyInvariantError(
            f"residual norm increased: {state.residual_norm:.17e} -> {new_norm:.17e}")
    state.residual_norm = min(new_norm, state.residual_norm)

    Q[:, m] = q
    state.mix_matrix[:m, m] = coeff
    state.mix_matrix[m, m] = vnorm
    state.basis_target[m] = alpha

    c_new = dictionary.features.T @ q
    state._basis_atom[m] = c_new
    state.atom_energy += c_new**2
    state.atom_score_cache -= alpha * c_new
    state._eligible[j] = False
    state.selected.append(j)
    state.check_invariants()
    return state, j


@dataclass(frozen=True)
class PathRecord:
    iteration: int
    atom_index: int
    residual_norm: float
    train_error: float
    validation_error: float
    weights: np.ndarray | None = None


@dataclass(frozen=True)
class GreedyPath:
    """Per-iteration trace of a greedy run plus the termination reason."""

    records: tuple
    termination: str
    final_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def residual_norms(self) -> np.ndarray:
        return np.array([r.residual_norm for r in self.records])

    @property
    def validation_errors(self) -> np.ndarray:
        return np.array([r.validation_error for r in self.records])

    @property
    def atom_indices(self) -> list[int]:
        return [r.atom_index for r in self.records]


def network_from_selection(dictionary: Dictionary, indices, weights) -> ShallowNetwork:
    """Network whose nodes are the selected directions.

    ``weights`` are coefficients of the normalized atoms, so each outer
    weight is divided by the atom's raw activation norm.
    """
    nodes = tuple(
        (dictionary.directions[j], float(w) / float(dictionary.raw_norms[j]))
        for j, w in zip(indices, weights)
    )
    d = dictionary.directions[0].dim if dictionary.n_atoms else 1
    return ShallowNetwork(nodes, d)


def oga_run(dictionary: Dictionary, dataset_train: Dataset, dataset_val: Dataset,
            max_iter: int, tol: GreedyTolerances = GreedyTolerances(),
            record_weights: bool = False) -> GreedyPath:
    """Greedy selection with per-iteration validation scoring.

    After each step the current outer weights are recovered by back-
    substitution and the implied network is scored on the validation set
    (root-mean-square error). Termination reasons land in the path rather
    than propagating.
    """
    if dictionary.n_atoms == 0:
        raise ValueError("dictionary is empty")
    f_tr = dataset_train.targets
    state = init_state(dictionary, f_tr, max_iter_hint=max_iter or 1, tol=tol)

    # incremental validation activations; one new column per selected atom
    val_cols: list[np.ndarray] = []
    records = []
    termination = "max_iter"
    sqrt_tr = np.sqrt(dataset_train.n_points)
    sqrt_val = np.sqrt(dataset_val.n_points)
    for m in range(1, max_iter + 1):
        try:
            state, j = oga_step(state, dictionary)
        except GreedyStop as stop:
            termination = stop.reason
            break
        dr = dictionary.directions[j]
        val_cols.append(np.maximum(dataset_val.inputs @ dr.a + dr.b, 0.0)
                        / dictionary.raw_norms[j])
        weights = state.recover_weights()
        val_pred = np.column_stack(val_cols) @ weights
        val_rmse = float(np.linalg.norm(val_pred - dataset_val.targets) / sqrt_val)
        records.append(PathRecord(
            iteration=m,
            atom_index=j,
            residual_norm=state.residual_norm,
            train_error=state.residual_norm / sqrt_tr,
            validation_error=val_rmse,
            weights=weights if record_weights else None,
        ))
    final = state.recover_weights()
    return GreedyPath(tuple(records), termination, final)


def select_model(path: GreedyPath) -> int:
    """Node count minimizing validation error; ties go to the smaller model."""
    if not path.records:
        raise ValueError("cannot select a model from an empty path")
    errs = path.validation_errors
    return path.records[int(np.argmin(errs))].iteration


def save_path_csv(path: GreedyPath, out_path) -> None:
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "atom_index", "residual_norm", "validation_error"])
        for rec in path.records:
            writer.writerow([rec.iteration, rec.atom_index,
                             repr(rec.residual_norm), repr(rec.validation_error)])
