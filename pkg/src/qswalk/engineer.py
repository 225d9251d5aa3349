"""Reservoir engineering: find coupling coefficients realizing target site rates.

The inverse problem: given a coherent graph Hamiltonian, a bath (spectral
model + temperature) and z-kind coupling channels with free per-node
coefficients, choose the coefficients so that selected site-basis transfer
rates hit target values while selected site coherence coefficients vanish.

Because z-kind couplings commute with the excitation number, the golden-rule
quantities entering any same-excitation-number target depend only on the
excitation blocks those targets live in, so only those blocks are ever
diagonalized here.  Within the coherent-channel model all z channels add into
per-node column sums c_j, and two exact symmetries reduce the search space:
a uniform shift c -> c + u (it adds a multiple of the conserved number
operator to the coupling) and the scaling c -> s*c (which multiplies every
rate by s^2).

The optimizer is a multi-start nonlinear least-squares (scipy, trust-region
reflective, finite-difference Jacobians), deterministic for a given seed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .bath import SpectralModel, thermal_rate
from .errors import DegenerateTransitions, InvalidTarget
from .hilbert import HilbertSpace, excitation_number
from .microscopic import BathChannel, BathCouplingSpec, analyze
from .walk import Graph, graph_hamiltonian

OBJECTIVE_TOL = 1e-16


def _canonical_state(space: HilbertSpace, s) -> int:
    """Accept a basis label, a register index, or a node number (meaning the
    one-walker state on that node); return the register basis index."""
    if isinstance(s, str):
        return space.index_of_label(s)
    s = int(s)
    if 0 <= s < space.node_count:
        return space.index_of_state(1 << s)
    raise InvalidTarget(f"state spec {s!r} is neither a label nor a node index")


@dataclass(frozen=True)
class EngineeringProblem:
    """Targets for the inverse problem.

    target_rates: (dest, src, rate) triples -- realize site rate src -> dst.
    zero_dephasing_pairs: (m, n) pairs whose coherence coefficient must vanish.
    States may be given as basis labels, or as node numbers standing for the
    one-walker states.  All pairs must conserve excitation number; violating
    targets raise InvalidTarget.  bath_count baths are used: the first
    min(bath_count, n) couple to single nodes, the rest to every node.
    """

    graph: Graph
    spectral_density: SpectralModel
    temperature: float
    target_rates: tuple = ()
    zero_dephasing_pairs: tuple = ()
    coupling_kind: str = "z"
    bath_count: int | None = None

    def __post_init__(self):
        if self.coupling_kind not in ("x", "y", "z"):
            raise ValueError(f"unknown coupling kind {self.coupling_kind!r}")
        n = self.graph.node_count
        space = HilbertSpace.full(n)
        targets = []
        for dest, src, rate in self.target_rates:
            di, si = _canonical_state(space, dest), _canonical_state(space, src)
            if di == si:
                raise InvalidTarget("target transition needs two distinct states")
            if space.excitation_of_index(di) != space.excitation_of_index(si):
                raise InvalidTarget(
                    f"target {space.basis_labels[si]} -> {space.basis_labels[di]} changes "
                    "excitation number; such rates are unreachable with number-conserving "
                    "couplings and the dephasing-free transfer condition")
            rate = float(rate)
            if not (rate >= 0 and np.isfinite(rate)):
                raise InvalidTarget(f"target rate must be finite and >= 0, got {rate}")
            targets.append((di, si, rate))
        if len({(d, s) for d, s, _ in targets}) != len(targets):
            raise InvalidTarget("duplicate target transition")
        pairs = []
        for m, k in self.zero_dephasing_pairs:
            mi, ki = _canonical_state(space, m), _canonical_state(space, k)
            if mi == ki:
                raise InvalidTarget("zero-dephasing pair needs two distinct states")
            if space.excitation_of_index(mi) != space.excitation_of_index(ki):
                raise InvalidTarget("zero-dephasing pair must conserve excitation number")
            pairs.append((mi, ki) if mi < ki else (ki, mi))
        if len(set(pairs)) != len(pairs):
            raise InvalidTarget("duplicate zero-dephasing pair")
        k = self.bath_count if self.bath_count is not None else n
        if k < 1:
            raise ValueError("bath_count must be >= 1")
        object.__setattr__(self, "target_rates", tuple(targets))
        object.__setattr__(self, "zero_dephasing_pairs", tuple(pairs))
        object.__setattr__(self, "bath_count", int(k))
        object.__setattr__(self, "temperature", float(self.temperature))

    @property
    def space(self) -> HilbertSpace:
        return HilbertSpace.full(self.graph.node_count)


class _BlockModel:
    """Precomputed eigenstructure of the excitation blocks the targets touch.

    Everything that does not depend on the coupling coefficients is built
    once: per-sector eigenvectors (assembled block-diagonally so sector purity
    is exact even under cross-sector spectral coincidences), the thermal rate
    at every block Bohr frequency, the occupation table B mapping column sums
    c to the diagonal coupling (v = -2 B c, the uniform shift dropped), and
    the overlap-tensor rows of the requested matrix elements.
    """

    def __init__(self, problem: EngineeringProblem):
        space = problem.space
        H = graph_hamiltonian(problem.graph, space).matrix
        involved = sorted({space.excitation_of_index(i)
                           for d, s, _ in problem.target_rates for i in (d, s)}
                          | {space.excitation_of_index(i)
                             for p in problem.zero_dephasing_pairs for i in p})
        if not involved:
            involved = [1]
        sub_states = []
        values = []
        blocks = []
        for sector in involved:
            idx = [i for i in range(space.dimension)
                   if space.excitation_of_index(i) == sector]
            block = H[np.ix_(idx, idx)]
            vals, vecs = np.linalg.eigh(block)
            sub_states.extend(idx)
            values.append(vals)
            blocks.append(vecs)
        self.sub_states = sub_states
        self.values = np.concatenate(values)
        k = len(sub_states)
        U = np.zeros((k, k), dtype=complex)
        pos = 0
        for vecs in blocks:
            b = vecs.shape[0]
            U[pos:pos + b, pos:pos + b] = vecs
            pos += b
        self.U = U
        self.sector_of = np.concatenate([[s] * len(v) for s, v in zip(involved, values)])

        # conservative degeneracy screen: any coincident within-sector Bohr
        # frequency couples for generic coefficients, so reject upfront
        span = float(self.values.max() - self.values.min()) if k > 1 else 0.0
        tol_freq = 1e-9 * (span if span > 0 else 1.0)
        for sector in involved:
            vals = self.values[self.sector_of == sector]
            gaps = [(vals[b] - vals[a], (a, b))
                    for a in range(len(vals)) for b in range(a + 1, len(vals))]
            for i in range(len(gaps)):
                if abs(gaps[i][0]) < tol_freq:
                    raise DegenerateTransitions(
                        f"degenerate levels {gaps[i][1]} in excitation sector {sector}")
                for j in range(i + 1, len(gaps)):
                    if abs(gaps[i][0] - gaps[j][0]) < tol_freq:
                        raise DegenerateTransitions(
                            f"coincident transition frequencies {gaps[i][1]} and "
                            f"{gaps[j][1]} in excitation sector {sector}")

        freq = self.values[None, :] - self.values[:, None]
        gmat = np.zeros((k, k))
        off = ~np.eye(k, dtype=bool)
        same_sector = self.sector_of[:, None] == self.sector_of[None, :]
        live = off & same_sector          # z-kind couplings never bridge sectors
        gmat[live] = thermal_rate(problem.spectral_density, freq[live],
                                  problem.temperature)
        self.gamma_at_gap = gmat
        self.gamma0 = problem.spectral_density.zero_frequency_rate(problem.temperature)

        n = space.node_count
        self.B = np.array([[(space.basis_states[s] >> j) & 1 for j in range(n)]
                           for s in sub_states], dtype=float)

        A = np.abs(U) ** 2
        sub_index = {s: i for i, s in enumerate(sub_states)}
        self.rate_rows = []
        for dest, src, rate in problem.target_rates:
            mi, ni = sub_index[dest], sub_index[src]
            T_row = np.einsum("a,b->ab", A[mi], A[ni])
            Tt_row = np.einsum("a,b,a,b->ab", U[mi], U[mi].conj(),
                               U[ni].conj(), U[ni])
            self.rate_rows.append((T_row, Tt_row, rate))
        self.deph_rows = []
        for m, nn in problem.zero_dephasing_pairs:
            mi, ni = sub_index[m], sub_index[nn]
            T_row = np.einsum("a,b->ab", A[mi], A[ni])
            Tt_row = np.einsum("a,b,a,b->ab", U[mi], U[mi].conj(),
                               U[ni].conj(), U[ni])
            self.deph_rows.append((T_row, Tt_row))

    def quantities(self, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(achieved target rates, achieved dephasing coefficients) for column sums c."""
        v = -2.0 * (self.B @ c)
        W = (self.U.conj().T * v) @ self.U
        G = (np.abs(W) ** 2) * self.gamma_at_gap
        outflow = G.sum(axis=0)
        dv = np.real(np.diag(W))
        Gt = 0.5 * (outflow[:, None] + outflow[None, :]) \
            + 0.5 * self.gamma0 * (dv[:, None] - dv[None, :]) ** 2
        rates = np.array([np.real(np.sum(T_row * G) - np.sum(Tt_row * Gt))
                          for T_row, Tt_row, _ in self.rate_rows])
        dephs = np.array([np.real(np.sum(Tt_row * G) - np.sum(T_row * Gt))
                          for T_row, Tt_row in self.deph_rows])
        return rates, dephs


def _theta_layout(node_count: int, bath_count: int) -> tuple[int, int]:
    """(number of single-node baths, number of shared baths)."""
    single = min(bath_count, node_count)
    return single, bath_count - single


def _column_sums(theta: np.ndarray, node_count: int, bath_count: int) -> np.ndarray:
    single, shared = _theta_layout(node_count, bath_count)
    c = np.zeros(node_count)
    c[:single] += theta[:single]
    for s in range(shared):
        c += theta[single + s * node_count: single + (s + 1) * node_count]
    return c


def _eta_rows(theta: np.ndarray, node_count: int, bath_count: int) -> tuple:
    single, shared = _theta_layout(node_count, bath_count)
    rows = []
    for j in range(single):
        row = np.zeros(node_count)
        row[j] = theta[j]
        rows.append(tuple(float(x) for x in row))
    for s in range(shared):
        chunk = theta[single + s * node_count: single + (s + 1) * node_count]
        rows.append(tuple(float(x) for x in chunk))
    return tuple(rows)


@dataclass(frozen=True)
class EngineeringSolution:
    problem: EngineeringProblem
    status: str                       # converged | max-iterations | infeasible-certified
    eta: tuple                        # per-bath coefficient rows
    column_sums: tuple
    objective: float
    achieved_rates: tuple             # aligned with problem.target_rates
    achieved_dephasing: tuple         # aligned with problem.zero_dephasing_pairs
    seed: int
    starts_run: int
    best_start: int
    trace: tuple = field(default=())  # (start, objective, nfev) per start
    obstruction: str | None = None    # set when status == "infeasible-certified"

    def to_spec(self) -> BathCouplingSpec:
        channels = tuple(BathChannel(self.problem.coupling_kind, row) for row in self.eta)
        return BathCouplingSpec(channels=channels,
                                spectral_density=self.problem.spectral_density,
                                temperature=self.problem.temperature)

    def to_dict(self) -> dict:
        space = self.problem.space
        labels = space.basis_labels
        return {
            "status": self.status,
            "objective": self.objective,
            "eta": [list(row) for row in self.eta],
            "column_sums": list(self.column_sums),
            "targets": [{"src": labels[s], "dst": labels[d], "requested": r,
                         "achieved": a}
                        for (d, s, r), a in zip(self.problem.target_rates,
                                                self.achieved_rates)],
            "zero_dephasing": [{"pair": [labels[m], labels[n]], "achieved": a}
                               for (m, n), a in zip(self.problem.zero_dephasing_pairs,
                                                    self.achieved_dephasing)],
            "seed": self.seed,
            "starts_run": self.starts_run,
            "best_start": self.best_start,
            "obstruction": self.obstruction,
        }


def solve(problem: EngineeringProblem, seed: int = 0, n_starts: int = 16,
          max_nfev: int | None = None, keep_trace: bool = True) -> EngineeringSolution:
    """Multi-start least squares over the coupling coefficients.

    The objective is the sum of squared residuals, rates normalized by the
    largest target; status "converged" means objective < 1e-16.  Two analytic
    obstructions short-circuit the optimization as "infeasible-certified":

    * x/y coupling kinds -- they change the excitation number, so per-node
      coefficient sums either cancel every golden-rule rate or violate the
      sector of every number-conserving target;
    * a zero-dephasing pair that touches a driven source -- complete
      positivity pins every Lindblad coherence coefficient to
      |Re R_{mn,mn}| >= (out_m + out_n)/2 where out_m is the total site
      outflow, and a converged solution must route at least the requested
      rate out of each target source, so the objective is bounded away from
      the convergence threshold by ~(rate/2)^2.

    Certified solutions carry the idle (eta = 0) coefficients, the objective
    evaluated there, and a human-readable `obstruction` message.
    """
    n = problem.graph.node_count
    targets = np.array([r for _, _, r in problem.target_rates], dtype=float)
    norm = float(targets.max()) if targets.size and targets.max() > 0 else 1.0
    zero_eta = _eta_rows(np.zeros(_param_count(n, problem.bath_count)), n,
                         problem.bath_count)
    idle_objective = float(np.sum((targets / norm) ** 2))

    def certified(message: str) -> EngineeringSolution:
        return EngineeringSolution(
            problem=problem, status="infeasible-certified", eta=zero_eta,
            column_sums=tuple(0.0 for _ in range(n)), objective=idle_objective,
            achieved_rates=tuple(0.0 for _ in problem.target_rates),
            achieved_dephasing=tuple(0.0 for _ in problem.zero_dephasing_pairs),
            seed=seed, starts_run=0, best_start=-1, obstruction=message)

    if problem.coupling_kind in ("x", "y"):
        return certified(
            f"{problem.coupling_kind}-kind couplings change the excitation "
            "number: per-node coefficient sums either cancel every "
            "golden-rule rate or break the sector rule, so no "
            "number-conserving target is reachable")

    model = _BlockModel(problem)

    def residuals(theta: np.ndarray) -> np.ndarray:
        c = _column_sums(theta, n, problem.bath_count)
        rates, dephs = model.quantities(c)
        return np.concatenate([(rates - targets) / norm, dephs / norm])

    n_par = _param_count(n, problem.bath_count)

    if targets.size == 0 or targets.max() == 0.0:
        theta0 = np.zeros(n_par)
        obj = float(np.sum(residuals(theta0) ** 2))
        rates0, dephs0 = model.quantities(np.zeros(n))
        return EngineeringSolution(
            problem=problem, status="converged" if obj < OBJECTIVE_TOL else "max-iterations",
            eta=zero_eta,
            column_sums=tuple(0.0 for _ in range(n)), objective=obj,
            achieved_rates=tuple(float(r) for r in rates0),
            achieved_dephasing=tuple(float(x) for x in dephs0),
            seed=seed, starts_run=1, best_start=0, trace=((0, obj, 1),))

    labels = problem.space.basis_labels
    for m, k in problem.zero_dephasing_pairs:
        flow = sum(r for _, s, r in problem.target_rates if s in (m, k))
        if 0.5 * flow > 1e-5 * norm:
            return certified(
                f"zero-dephasing pair ({labels[m]}, {labels[k]}) touches a "
                f"driven source: complete positivity keeps the coherence "
                f"decay at or above half the requested outflow "
                f"({0.5 * flow:.6g}), so the objective cannot reach the "
                f"1e-16 convergence threshold")

    # initial coefficient scale: rates go like c^2 * gamma(typical gap)
    g_pos = model.gamma_at_gap[model.gamma_at_gap > 0]
    g_typ = float(np.median(g_pos)) if g_pos.size else 1.0
    c_scale = np.sqrt(norm / max(g_typ, 1e-30))

    rng = np.random.default_rng(seed)
    start_points = rng.standard_normal((n_starts, n_par)) * c_scale
    if max_nfev is None:
        max_nfev = 400 * n_par

    best = None
    trace = []
    for i, theta0 in enumerate(start_points):
        res = scipy.optimize.least_squares(
            residuals, theta0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
            max_nfev=max_nfev)
        obj = float(2.0 * res.cost)
        trace.append((i, obj, int(res.nfev)))
        if best is None or obj < best[1]:
            best = (i, obj, res.x.copy())
        if obj < 1e-2 * OBJECTIVE_TOL:
            break

    best_start, best_obj, theta = best
    c = _column_sums(theta, n, problem.bath_count)
    rates, dephs = model.quantities(c)
    return EngineeringSolution(
        problem=problem,
        status="converged" if best_obj < OBJECTIVE_TOL else "max-iterations",
        eta=_eta_rows(theta, n, problem.bath_count),
        column_sums=tuple(float(x) for x in c),
        objective=best_obj, achieved_rates=tuple(float(r) for r in rates),
        achieved_dephasing=tuple(float(x) for x in dephs),
        seed=seed, starts_run=len(trace), best_start=best_start,
        trace=tuple(trace) if keep_trace else ())


def _param_count(node_count: int, bath_count: int) -> int:
    single, shared = _theta_layout(node_count, bath_count)
    return single + shared * node_count


def validate_solution(solution: EngineeringSolution) -> dict:
    """Recompute the claimed quantities through the full-register pipeline.

    Independent of the block-restricted solver path: the full Hamiltonian is
    rediagonalized and the complete contraction machinery is used.  Returns
    the recomputed values and their deviations from the solution's claims.
    """
    problem = solution.problem
    report = analyze(problem.graph, solution.to_spec())
    lg, lgt = report.local_gamma, report.local_gamma_tilde
    rates = [float(np.real(lg[d, s])) for d, s, _ in problem.target_rates]
    dephs = [float(np.real(lgt[m, n])) for m, n in problem.zero_dephasing_pairs]
    rate_dev = max((abs(a - b) for a, b in zip(rates, solution.achieved_rates)),
                   default=0.0)
    deph_dev = max((abs(a - b) for a, b in zip(dephs, solution.achieved_dephasing)),
                   default=0.0)
    rel_errors = [abs(a - r) / r if r > 0 else abs(a)
                  for a, (_, _, r) in zip(rates, problem.target_rates)]
    return {
        "recomputed_rates": rates,
        "recomputed_dephasing": dephs,
        "max_rate_recompute_deviation": rate_dev,
        "max_dephasing_recompute_deviation": deph_dev,
        "max_target_rel_error": max(rel_errors, default=0.0),
        "max_abs_dephasing": max((abs(x) for x in dephs), default=0.0),
    }
