"""Quantum stochastic walks on graphs as Lindblad dynamics.

The generator acts on vectorized density matrices with column stacking,
vec(rho)[i + d*j] = rho[i, j], so that vec(A rho B) = kron(B.T, A) vec(rho):

    L = -1j*(kron(I, H) - kron(H.T, I))
        + sum_k g_k * ( kron(conj(L_k), L_k)
                        - 0.5*kron(I, L_k^dag L_k)
                        - 0.5*kron((L_k^dag L_k).T, I) )

Trace preservation is the left null vector vec(I)^T L = 0; Hermiticity
preservation is L vec(rho^dag) = (L vec(rho))^dag elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import DegenerateSteadyState, ToleranceNotMet
from .hilbert import DensityMatrix, HilbertSpace, Operator, hop_operator

EXPM_MAX_DIM = 64          # largest register dimension propagated by dense expm
RK_RTOL_DEFAULT = 1e-10
RK_ATOL_DEFAULT = 1e-12


@dataclass(frozen=True)
class Graph:
    """A walk graph: onsite energies, coherent hoppings, incoherent hop rates.

    coherent_edges hold (m, n, amplitude) with m < n contributing
    amplitude * |1_m><1_n| + h.c. to the Hamiltonian.  incoherent_edges hold
    (src, dst, rate) meaning a jump that moves a walker src -> dst with the
    given nonnegative rate; the reverse direction is a separate edge, so
    asymmetric rates are allowed.
    """

    node_count: int
    onsite_energies: tuple[float, ...]
    coherent_edges: tuple[tuple[int, int, complex], ...] = ()
    incoherent_edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        n = self.node_count
        if n < 1:
            raise ValueError("graph needs at least one node")
        if len(self.onsite_energies) != n:
            raise ValueError("onsite_energies length must equal node_count")
        object.__setattr__(self, "onsite_energies",
                           tuple(float(e) for e in self.onsite_energies))
        seen = set()
        norm_edges = []
        for m, k, amp in self.coherent_edges:
            if not (0 <= m < n and 0 <= k < n):
                raise ValueError(f"coherent edge ({m},{k}) out of range")
            if m == k:
                raise ValueError("coherent self-loops are not allowed; use onsite_energies")
            if m > k:
                m, k, amp = k, m, np.conj(amp)
            if (m, k) in seen:
                raise ValueError(f"duplicate coherent edge ({m},{k})")
            seen.add((m, k))
            norm_edges.append((m, k, complex(amp)))
        object.__setattr__(self, "coherent_edges", tuple(norm_edges))
        seen_inc = set()
        inc = []
        for src, dst, rate in self.incoherent_edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"incoherent edge ({src},{dst}) out of range")
            if src == dst:
                raise ValueError("incoherent self-loops are not allowed")
            if (src, dst) in seen_inc:
                raise ValueError(f"duplicate incoherent edge ({src},{dst})")
            rate = float(rate)
            if rate < 0:
                raise ValueError(f"negative rate {rate} on incoherent edge ({src},{dst})")
            seen_inc.add((src, dst))
            inc.append((src, dst, rate))
        object.__setattr__(self, "incoherent_edges", tuple(inc))


def graph_hamiltonian(g: Graph, space: HilbertSpace) -> Operator:
    """H = sum_m e_m n_m + sum_(m<n) (h_mn sp_m sm_n + h.c.) on the given space."""
    if space.node_count != g.node_count:
        raise ValueError("space and graph disagree on node count")
    d = space.dimension
    m = np.zeros((d, d), dtype=complex)
    for node, e in enumerate(g.onsite_energies):
        m += e * hop_operator(space, node, node).matrix
    for a, b, amp in g.coherent_edges:
        hop = hop_operator(space, a, b).matrix
        m += amp * hop + np.conj(amp) * hop.conj().T
    return Operator(space, m, hermitian=True)


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus weighted jump operators (L_k, rate_k >= 0)."""

    hamiltonian: Operator
    jumps: tuple[tuple[Operator, float], ...] = ()

    def __post_init__(self):
        space = self.hamiltonian.space
        if not self.hamiltonian.hermitian:
            dev = np.abs(self.hamiltonian.matrix - self.hamiltonian.matrix.conj().T).max()
            if dev > 1e-12:
                raise ToleranceNotMet(f"Hamiltonian not Hermitian (dev {dev:.3e})")
        jumps = []
        for op, rate in self.jumps:
            if op.space != space:
                raise ValueError("jump operator lives on a different space")
            rate = float(rate)
            if rate < 0:
                raise ValueError(f"negative jump rate {rate}")
            jumps.append((op, rate))
        object.__setattr__(self, "jumps", tuple(jumps))

    @property
    def space(self) -> HilbertSpace:
        return self.hamiltonian.space


def qsw_model(g: Graph, space: HilbertSpace) -> LindbladModel:
    """The quantum stochastic walk on g: graph Hamiltonian + hop jumps.

    Each incoherent edge (src, dst, rate) contributes the jump operator
    sigma_plus(dst) sigma_minus(src) with that rate.
    """
    jumps = tuple((hop_operator(space, dst, src), rate)
                  for src, dst, rate in g.incoherent_edges if rate > 0)
    return LindbladModel(graph_hamiltonian(g, space), jumps)


@dataclass(frozen=True)
class Superoperator:
    """A d^2 x d^2 matrix acting on column-stacked density matrices."""

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        d2 = self.space.dimension ** 2
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (d2, d2):
            raise ValueError(f"superoperator shape {m.shape}, expected ({d2},{d2})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def vec(rho: np.ndarray) -> np.ndarray:
    """Column stacking: vec(rho)[i + d*j] = rho[i, j]."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return np.asarray(v, dtype=complex).reshape((d, d), order="F")


def liouvillian(model: LindbladModel) -> Superoperator:
    """Vectorized generator of the Lindblad equation for the model."""
    H = model.hamiltonian.matrix
    d = H.shape[0]
    eye = np.eye(d, dtype=complex)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for op, rate in model.jumps:
        A = op.matrix
        AdA = A.conj().T @ A
        L += rate * (np.kron(A.conj(), A)
                     - 0.5 * np.kron(eye, AdA)
                     - 0.5 * np.kron(AdA.T, eye))
    return Superoperator(model.space, L)


def _validated_state(space: HilbertSpace, rho: np.ndarray, where: str) -> DensityMatrix:
    # re-hermitize and renormalize the tiny float drift before validation;
    # validation still enforces the documented tolerances on the raw output
    herm_dev = np.abs(rho - rho.conj().T).max()
    trace_dev = abs(np.trace(rho) - 1.0)
    if herm_dev > 1e-10 or trace_dev > 1e-10:
        raise ToleranceNotMet(
            f"{where}: propagated state violates invariants "
            f"(herm dev {herm_dev:.3e}, trace dev {trace_dev:.3e})")
    rho = (rho + rho.conj().T) / 2.0
    rho = rho / np.real(np.trace(rho))
    min_eig = float(np.linalg.eigvalsh(rho).min())
    if min_eig < DensityMatrix.EIG_FLOOR:
        raise ToleranceNotMet(f"{where}: propagated state eigenvalue {min_eig:.3e}")
    return DensityMatrix(space, rho)


@dataclass(frozen=True)
class PropagationResult:
    times: np.ndarray
    states: tuple[DensityMatrix, ...]
    method: str
    info: dict = field(default_factory=dict)

    def populations(self) -> np.ndarray:
        """Array (n_times, d) of basis populations."""
        return np.array([s.populations() for s in self.states])


def propagate(model: LindbladModel, rho0: DensityMatrix, times,
              method: str = "auto", rtol: float = RK_RTOL_DEFAULT,
              atol: float = RK_ATOL_DEFAULT) -> PropagationResult:
    """Evolve rho0 through the sorted, nonnegative time grid.

    method "expm" uses scaling-and-squaring matrix exponentials stepwise over
    the grid; "rk" uses an adaptive Runge-Kutta integrator (DOP853) on the
    vectorized equation; "auto" picks expm for dimension <= 64 and rk above.
    Every returned state is validated (trace/Hermiticity within 1e-10 of
    exact before rounding cleanup, spectrum above -1e-10).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a nonempty 1-d array")
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be sorted and nonnegative")
    if rho0.space != model.space:
        raise ValueError("initial state lives on a different space")

    d = model.space.dimension
    if method == "auto":
        method = "expm" if d <= EXPM_MAX_DIM else "rk"
    if method not in ("expm", "rk"):
        raise ValueError(f"unknown method {method!r}")

    L = liouvillian(model).matrix
    states = []
    info: dict = {"dimension": d}

    if method == "expm":
        v = vec(rho0.matrix)
        prev_t = 0.0
        step_cache: dict[float, np.ndarray] = {}
        for t in times:
            dt = t - prev_t
            if dt > 0:
                if dt not in step_cache:
                    step_cache[dt] = scipy.linalg.expm(L * dt)
                v = step_cache[dt] @ v
                prev_t = t
            states.append(_validated_state(model.space, unvec(v), f"expm t={t:g}"))
    else:
        info.update({"rtol": rtol, "atol": atol})
        if times[-1] == 0.0:
            ys = np.tile(vec(rho0.matrix), (len(times), 1))
        else:
            t_grid = times if times[0] == 0.0 else np.concatenate(([0.0], times))
            sol = scipy.integrate.solve_ivp(
                lambda _t, y: L @ y, (0.0, t_grid[-1]), vec(rho0.matrix),
                t_eval=t_grid, method="DOP853", rtol=rtol, atol=atol)
            if not sol.success:
                raise ToleranceNotMet(f"rk integration failed: {sol.message}")
            ys = sol.y.T if times[0] == 0.0 else sol.y.T[1:]
        for t, y in zip(times, ys):
            states.append(_validated_state(model.space, unvec(y), f"rk t={t:g}"))

    return PropagationResult(times=times, states=tuple(states), method=method, info=info)


def steady_state(model: LindbladModel, zero_tol: float = 1e-12,
                 residual_tol: float = 1e-10) -> DensityMatrix:
    """Unique stationary state from the generator kernel.

    Generator eigenvalues with |lambda| < zero_tol (relative to the spectral
    scale) count as zero.  If more than one does, DegenerateSteadyState is
    raised carrying an orthonormal kernel basis.  The returned state satisfies
    ||L vec(rho)|| < residual_tol.
    """
    L = liouvillian(model).matrix
    scale = max(np.abs(L).max(), 1.0)
    evals, evecs = np.linalg.eig(L)
    zero_idx = np.where(np.abs(evals) < zero_tol * scale)[0]
    if len(zero_idx) == 0:
        # eig residuals can inflate |lambda|; fall back to the smallest
        zero_idx = np.array([int(np.argmin(np.abs(evals)))])
    if len(zero_idx) > 1:
        sols = []
        for k in zero_idx:
            rho = unvec(evecs[:, k])
            rho = (rho + rho.conj().T) / 2.0
            nrm = np.linalg.norm(rho)
            sols.append(rho / nrm if nrm > 0 else rho)
        raise DegenerateSteadyState(
            f"generator kernel is {len(zero_idx)}-dimensional", solutions=sols)

    rho = unvec(evecs[:, zero_idx[0]])
    rho = (rho + rho.conj().T) / 2.0
    tr = np.real(np.trace(rho))
    if abs(tr) < 1e-14:
        raise ToleranceNotMet("kernel vector is traceless; no normalizable steady state")
    rho = rho / tr
    # polish with one least-squares solve of [L; trace] to beat eig() residuals
    d = model.space.dimension
    tr_row = vec(np.eye(d, dtype=complex)).conj()[None, :]
    aug = np.vstack([L, tr_row])
    rhs = np.zeros(L.shape[0] + 1, dtype=complex)
    rhs[-1] = 1.0
    v, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    rho_p = unvec(v)
    rho_p = (rho_p + rho_p.conj().T) / 2.0
    rho_p = rho_p / np.real(np.trace(rho_p))
    if np.linalg.norm(L @ vec(rho_p)) < np.linalg.norm(L @ vec(rho)):
        rho = rho_p
    residual = float(np.linalg.norm(L @ vec(rho)))
    if residual > residual_tol:
        raise ToleranceNotMet(f"steady-state residual {residual:.3e} > {residual_tol:g}")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < DensityMatrix.EIG_FLOOR:
        raise ToleranceNotMet(f"steady-state eigenvalue {eigs.min():.3e}")
    return DensityMatrix(model.space, rho)


def classical_generator(g: Graph) -> np.ndarray:
    """Column generator Q of the classical chain: Q[dst, src] = rate(src->dst),
    columns summing to zero."""
    n = g.node_count
    Q = np.zeros((n, n))
    for src, dst, rate in g.incoherent_edges:
        Q[dst, src] += rate
        Q[src, src] -= rate
    return Q

def classical_oracle(g: Graph, p0, times) -> np.ndarray:
    """Independent classical reference: p(t) = expm(Q t) p0 on the node chain.

    This is the single-walker continuous-time Markov chain over the graph's
    incoherent edges only; used as an oracle for the H = 0 diagonal sector of
    the quantum walk.  Returns an array of shape (len(times), node_count).
    """
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (g.node_count,):
        raise ValueError("p0 must have one entry per node")
    if np.any(p0 < -1e-15) or abs(p0.sum() - 1.0) > 1e-12:
        raise ValueError("p0 must be a probability vector")
    Q = classical_generator(g)
    out = []
    cache: dict[float, np.ndarray] = {}
    for t in np.asarray(times, dtype=float):
        if t not in cache:
            cache[t] = scipy.linalg.expm(Q * t)
        out.append(cache[t] @ p0)
    return np.array(out)
