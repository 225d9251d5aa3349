"""Hilbert-space plumbing for qubit registers attached to graph nodes.

Basis conventions, fixed once for the whole package:

* Node ``j`` of an ``n``-node graph is qubit ``j``.  A register state is the
  integer ``s`` whose bit ``j`` (i.e. ``(s >> j) & 1``) is the occupation of
  node ``j`` -- node 0 is the least significant bit.
* Basis states are ordered by increasing ``s``.  Label strings are written
  node-0-first: ``label[j]`` is the occupation of node ``j``.  For two nodes
  the order is therefore ``00, 10, 01, 11``; the state with one walker on
  node 1 is labelled ``01`` and sits at index 2.
* ``single_excitation`` mode keeps the vacuum plus the one-walker states
  (dimension ``n + 1``), in the same order: vacuum first, then node order.

Single-qubit matrices (basis {|0>, |1>} = {empty, occupied}):

    sigma_z = [[1, 0], [0, -1]]        sigma_plus = [[0, 0], [1, 0]]

so ``sigma_plus`` raises the occupation (|0> -> |1>) and the number operator
is ``sigma_plus @ sigma_minus = diag(0, 1) = (I - sigma_z) / 2``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateTransitions, NotHermitian, SectorViolation, ToleranceNotMet

HERMITIAN_ATOL = 1e-12

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
    "+": np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex),
    "-": np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),
}


def state_label(state: int, node_count: int) -> str:
    """Label string for occupation integer ``state`` (node 0 first)."""
    return "".join("1" if (state >> j) & 1 else "0" for j in range(node_count))


def excitation_number(label: str) -> int:
    """Total excitation (Hamming weight) of a basis label."""
    return label.count("1")


@dataclass(frozen=True)
class HilbertSpace:
    """A register basis: either the full 2^n space or the vacuum+single-excitation sector."""

    mode: str                      # "full" | "single_excitation"
    node_count: int
    basis_states: tuple[int, ...]  # occupation integers, ascending

    @classmethod
    def full(cls, node_count: int) -> "HilbertSpace":
        if node_count < 1:
            raise ValueError("need at least one node")
        return cls("full", node_count, tuple(range(2 ** node_count)))

    @classmethod
    def single_excitation(cls, node_count: int) -> "HilbertSpace":
        """Vacuum plus the n one-walker states; dimension n + 1."""
        if node_count < 1:
            raise ValueError("need at least one node")
        return cls("single_excitation", node_count,
                   (0,) + tuple(1 << j for j in range(node_count)))

    @property
    def dimension(self) -> int:
        return len(self.basis_states)

    @property
    def basis_labels(self) -> tuple[str, ...]:
        return tuple(state_label(s, self.node_count) for s in self.basis_states)

    def index_of_label(self, label: str) -> int:
        try:
            return self.basis_labels.index(label)
        except ValueError:
            raise KeyError(f"label {label!r} not in this space") from None

    def index_of_state(self, state: int) -> int:
        try:
            return self.basis_states.index(state)
        except ValueError:
            raise KeyError(f"occupation state {state} not in this space") from None

    def excitation_of_index(self, index: int) -> int:
        return int(bin(self.basis_states[index]).count("1"))


def _check_square(matrix: np.ndarray, dim: int) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (dim, dim):
        raise ValueError(f"matrix shape {m.shape} does not match space dimension {dim}")
    return m


@dataclass(frozen=True)
class Operator:
    """A matrix tied to a HilbertSpace.  ``hermitian`` marks validated Hermiticity."""

    space: HilbertSpace
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = _check_square(self.matrix, self.space.dimension)
        if self.hermitian and np.abs(m - m.conj().T).max() > HERMITIAN_ATOL:
            raise NotHermitian(
                f"matrix deviates from Hermiticity by "
                f"{np.abs(m - m.conj().T).max():.3e} (> {HERMITIAN_ATOL:g})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, hermitian=self.hermitian)

    def __add__(self, other: "Operator") -> "Operator":
        self._same_space(other)
        return Operator(self.space, self.matrix + other.matrix,
                        hermitian=self.hermitian and other.hermitian)

    def __sub__(self, other: "Operator") -> "Operator":
        self._same_space(other)
        return Operator(self.space, self.matrix - other.matrix,
                        hermitian=self.hermitian and other.hermitian)

    def __matmul__(self, other: "Operator") -> "Operator":
        self._same_space(other)
        return Operator(self.space, self.matrix @ other.matrix, hermitian=False)

    def scaled(self, c: complex) -> "Operator":
        herm = self.hermitian and (np.imag(c) == 0)
        return Operator(self.space, c * self.matrix, hermitian=bool(herm))

    def _same_space(self, other: "Operator") -> None:
        if other.space != self.space:
            raise ValueError("operators live on different spaces")


@dataclass(frozen=True)
class DensityMatrix:
    """A validated state: Hermitian, unit trace, eigenvalues >= -1e-10."""

    space: HilbertSpace
    matrix: np.ndarray

    TRACE_ATOL = 1e-12
    EIG_FLOOR = -1e-10

    def __post_init__(self):
        m = _check_square(self.matrix, self.space.dimension)
        herm_dev = np.abs(m - m.conj().T).max()
        if herm_dev > HERMITIAN_ATOL:
            raise ToleranceNotMet(f"density matrix not Hermitian (dev {herm_dev:.3e})")
        trace_dev = abs(np.trace(m) - 1.0)
        if trace_dev > self.TRACE_ATOL:
            raise ToleranceNotMet(f"density matrix trace deviates by {trace_dev:.3e}")
        min_eig = float(np.linalg.eigvalsh((m + m.conj().T) / 2.0).min())
        if min_eig < self.EIG_FLOOR:
            raise ToleranceNotMet(f"density matrix has eigenvalue {min_eig:.3e} < {self.EIG_FLOOR:g}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


def basis_state(space: HilbertSpace, label: str) -> DensityMatrix:
    """Pure state |label><label|."""
    k = space.index_of_label(label)
    m = np.zeros((space.dimension, space.dimension), dtype=complex)
    m[k, k] = 1.0
    return DensityMatrix(space, m)


def mixture(space: HilbertSpace, weights: Iterable[tuple[str, float]]) -> DensityMatrix:
    """Diagonal mixture sum_k w_k |label_k><label_k| (weights must sum to 1)."""
    m = np.zeros((space.dimension, space.dimension), dtype=complex)
    for label, w in weights:
        m[space.index_of_label(label), space.index_of_label(label)] += w
    return DensityMatrix(space, m)


def pure_state(space: HilbertSpace, amplitudes: np.ndarray) -> DensityMatrix:
    """|psi><psi| from an amplitude vector (normalized here)."""
    v = np.asarray(amplitudes, dtype=complex).reshape(space.dimension)
    v = v / np.linalg.norm(v)
    return DensityMatrix(space, np.outer(v, v.conj()))


def local_operator(space: HilbertSpace, node: int, kind: str) -> Operator:
    """Single-node Pauli/ladder operator embedded in the register.

    kind in {"x","y","z","+","-"}.  In full mode this is the exact Kronecker
    embedding.  In single_excitation mode only "z", "+", "-" make sense:
    "z" is exactly diagonal on the sector; "+"/"-" are the sector-projected
    ladder operators (|one-walker-on-node><vacuum| and its adjoint -- matrix
    elements that would leave the sector are truncated).  "x"/"y" mix sectors
    and raise SectorViolation.
    """
    if not 0 <= node < space.node_count:
        raise IndexError(f"node {node} out of range for {space.node_count} nodes")
    if kind not in ("x", "y", "z", "+", "-"):
        raise ValueError(f"unknown operator kind {kind!r}")

    if space.mode == "full":
        lo = np.eye(2 ** node, dtype=complex)
        hi = np.eye(2 ** (space.node_count - 1 - node), dtype=complex)
        m = np.kron(hi, np.kron(PAULI[kind], lo))
        return Operator(space, m, hermitian=kind in ("x", "y", "z"))

    if kind in ("x", "y"):
        raise SectorViolation(
            f"sigma_{kind} changes excitation number and cannot act on the "
            "vacuum+single-excitation sector")
    d = space.dimension
    m = np.zeros((d, d), dtype=complex)
    if kind == "z":
        for idx, s in enumerate(space.basis_states):
            m[idx, idx] = -1.0 if (s >> node) & 1 else 1.0
        return Operator(space, m, hermitian=True)
    # sector-projected ladder: "+" maps vacuum -> one walker on `node`
    vac = space.index_of_state(0)
    occ = space.index_of_state(1 << node)
    if kind == "+":
        m[occ, vac] = 1.0
    else:
        m[vac, occ] = 1.0
    return Operator(space, m, hermitian=False)


def hop_operator(space: HilbertSpace, dest: int, src: int) -> Operator:
    """The jump operator sigma_plus(dest) @ sigma_minus(src), exact in both modes.

    Moves a walker from ``src`` to ``dest``; for dest == src this is the
    number operator of that node.
    """
    for node in (dest, src):
        if not 0 <= node < space.node_count:
            raise IndexError(f"node {node} out of range for {space.node_count} nodes")
    if space.mode == "full":
        op = local_operator(space, dest, "+") @ local_operator(space, src, "-")
        return Operator(space, op.matrix, hermitian=(dest == src))
    d = space.dimension
    m = np.zeros((d, d), dtype=complex)
    # Within the sector the product acts as |1_dest><1_src| (vacuum untouched).
    m[space.index_of_state(1 << dest), space.index_of_state(1 << src)] = 1.0
    return Operator(space, m, hermitian=(dest == src))


def number_operator(space: HilbertSpace) -> Operator:
    """Total excitation number sum_j sigma_plus(j) sigma_minus(j)."""
    d = space.dimension
    m = np.zeros((d, d), dtype=complex)
    for idx in range(d):
        m[idx, idx] = space.excitation_of_index(idx)
    return Operator(space, m, hermitian=True)


# ---------------------------------------------------------------------------
# eigendecomposition with a transition-frequency degeneracy report


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues, eigenvector columns, and a degeneracy report.

    ``degenerate_levels`` lists index pairs (a, b), a < b, with
    |eps_b - eps_a| < tol_freq.  ``degenerate_transitions`` lists pairs of
    DISTINCT transitions ((a, b), (c, d)), each with a < b, c < d, whose
    positive gaps agree within tol_freq.  Either list nonempty means some
    Bohr frequencies coincide; whether that actually invalidates a secular
    rate computation is decided later, when coupling matrix elements are
    known (see microscopic.golden_rule_rates).
    """

    values: np.ndarray
    vectors: np.ndarray
    tol_freq: float
    degenerate_levels: tuple[tuple[int, int], ...]
    degenerate_transitions: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    @property
    def is_clean(self) -> bool:
        return not self.degenerate_levels and not self.degenerate_transitions


def eigendecompose(op: Operator, tol_freq: float | None = None) -> EigenSystem:
    """Diagonalize a Hermitian operator and report coincident transition gaps.

    ``tol_freq`` is an absolute frequency tolerance; if None it defaults to
    1e-9 times the largest transition frequency (relative criterion).
    Raises NotHermitian if the operator is not flagged/validated Hermitian and
    ToleranceNotMet if the reconstruction residual exceeds 1e-10.
    """
    m = op.matrix
    if not op.hermitian:
        dev = np.abs(m - m.conj().T).max()
        if dev > HERMITIAN_ATOL:
            raise NotHermitian(f"eigendecompose needs a Hermitian operator (dev {dev:.3e})")
    values, vectors = np.linalg.eigh(m)
    residual = np.abs(m @ vectors - vectors * values[None, :]).max()
    if residual > 1e-10:
        raise ToleranceNotMet(f"eigendecomposition residual {residual:.3e} > 1e-10")

    d = len(values)
    span = float(values[-1] - values[0]) if d > 1 else 0.0
    if tol_freq is None:
        tol_freq = 1e-9 * (span if span > 0 else 1.0)

    pairs = [(a, b) for a in range(d) for b in range(a + 1, d)]
    gaps = np.array([values[b] - values[a] for a, b in pairs]) if pairs else np.empty(0)
    levels = tuple(p for p, g in zip(pairs, gaps) if abs(g) < tol_freq)
    trans = []
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            if abs(gaps[i] - gaps[j]) < tol_freq:
                trans.append((pairs[i], pairs[j]))
    return EigenSystem(values=values, vectors=vectors, tol_freq=float(tol_freq),
                       degenerate_levels=levels, degenerate_transitions=tuple(trans))
