"""Randomized self-verification suites.

Each suite draws seeded random instances, checks one structural property of
the package against an independent computation, and returns a SuiteResult.
The CLI `verify` subcommand runs the theorem suites (decoupling, sector rule,
oracle equivalence, detailed balance); the test suite runs everything.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bath import SpectralModel
from .errors import DegenerateTransitions
from .hilbert import (DensityMatrix, HilbertSpace, Operator, eigendecompose,
                      pure_state)
from .microscopic import (BathChannel, BathCouplingSpec, analyze,
                          brute_force_local_quantities, check_decoupling,
                          classify_realizability, golden_rule_rates)
from .walk import (Graph, LindbladModel, classical_oracle, graph_hamiltonian,
                   liouvillian, propagate, qsw_model)

DEFAULT_SUITES = ("decoupling", "sector_rule", "oracle_equivalence", "detailed_balance")
ALL_SUITES = ("dynamics", "limiting_cases") + DEFAULT_SUITES + ("depolarizing_union",)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    n_cases: int
    details: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# random instance generators (shared with the test-suite)


def random_graph(rng: np.random.Generator, n: int, *, max_rate: float = 0.6,
                 with_incoherent: bool = True, complex_hops: bool = False) -> Graph:
    # Complete coherent graphs: with real amplitudes, a bipartite hopping
    # graph has identical gap sets in conjugate excitation blocks (a sign-flip
    # similarity relates them), which the secular degeneracy screen rightly
    # rejects.  Odd cycles break the similarity, so every pair gets an edge.
    energies = tuple(rng.uniform(0.3, 2.7, n))
    coh = []
    for a in range(n):
        for b in range(a + 1, n):
            amp = rng.uniform(0.1, 0.8)
            if complex_hops:
                amp = amp * np.exp(1j * rng.uniform(0, 2 * np.pi))
            coh.append((a, b, amp))
    inc = []
    if with_incoherent:
        for a in range(n):
            for b in range(n):
                if a != b and rng.random() < 0.5:
                    inc.append((a, b, float(rng.uniform(0.05, max_rate))))
    return Graph(node_count=n, onsite_energies=energies,
                 coherent_edges=tuple(coh), incoherent_edges=tuple(inc))


def random_spectral(rng: np.random.Generator, family: str | None = None) -> SpectralModel:
    fam = family or ("ohmic" if rng.random() < 0.7 else "flat")
    return SpectralModel(family=fam, prefactor=float(rng.uniform(0.2, 1.5)),
                         cutoff=float(rng.uniform(2.0, 8.0)))


def random_channels(rng: np.random.Generator, n: int, kind: str,
                    n_channels: int, zero_sum: bool) -> tuple[BathChannel, ...]:
    rows = rng.uniform(-1.0, 1.0, (n_channels, n))
    if zero_sum:
        rows[-1] = -rows[:-1].sum(axis=0)
    return tuple(BathChannel(kind, tuple(r)) for r in rows)


def random_density(rng: np.random.Generator, space: HilbertSpace) -> DensityMatrix:
    d = space.dimension
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = A @ A.conj().T
    return DensityMatrix(space, rho / np.trace(rho))


def random_lindblad(rng: np.random.Generator, space: HilbertSpace) -> LindbladModel:
    d = space.dimension
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    H = Operator(space, (A + A.conj().T) / 2.0, hermitian=True)
    jumps = []
    for _ in range(int(rng.integers(1, 4))):
        B = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        jumps.append((Operator(space, B / np.sqrt(d)), float(rng.uniform(0.05, 0.8))))
    return LindbladModel(H, tuple(jumps))


# ---------------------------------------------------------------------------
# Choi reshuffle (column-stacking convention)


def choi_matrix(superop_matrix: np.ndarray) -> np.ndarray:
    """Choi matrix of the map rho -> unvec(M vec(rho)); PSD iff the map is CP."""
    d = int(round(np.sqrt(superop_matrix.shape[0])))
    M4 = superop_matrix.reshape(d, d, d, d)        # M4[l, k, j, i] = M[k+d*l, i+d*j]
    return M4.transpose(3, 1, 2, 0).reshape(d * d, d * d)


# ---------------------------------------------------------------------------
# suites


def suite_dynamics(seed: int = 0, n_cases: int = 100) -> SuiteResult:
    """Trace/Hermiticity/positivity of propagated states; CP of the flow map;
    agreement of the expm and RK propagators on a subset."""
    rng = np.random.default_rng(seed)
    failures = []
    times = np.array([0.0, 0.3, 1.1, 2.9, 6.4, 10.0])
    worst_cp = 0.0
    worst_gap = 0.0
    for case in range(n_cases):
        n = int(rng.integers(1, 5))
        space = HilbertSpace.full(n) if rng.random() < 0.7 else \
            HilbertSpace.single_excitation(int(rng.integers(1, 6)))
        model = random_lindblad(rng, space)
        rho0 = random_density(rng, space)
        try:
            result = propagate(model, rho0, times, method="expm")
        except Exception as exc:  # propagate validates internally
            failures.append(f"case {case}: propagate failed: {exc}")
            continue
        for t, state in zip(times, result.states):
            m = state.matrix
            tr_dev = abs(np.trace(m) - 1.0)
            herm_dev = np.abs(m - m.conj().T).max()
            min_eig = float(np.linalg.eigvalsh(m).min())
            if tr_dev > 1e-10 or herm_dev > 1e-10 or min_eig < -1e-10:
                failures.append(f"case {case} t={t}: trace {tr_dev:.2e} "
                                f"herm {herm_dev:.2e} mineig {min_eig:.2e}")
        C = choi_matrix(scipy.linalg.expm(liouvillian(model).matrix))
        cp_min = float(np.linalg.eigvalsh((C + C.conj().T) / 2.0).min())
        worst_cp = min(worst_cp, cp_min)
        if cp_min < -1e-8:
            failures.append(f"case {case}: Choi min eig {cp_min:.2e}")
        if case % 10 == 0:
            rk = propagate(model, rho0, times, method="rk")
            gap = max(np.abs(a.matrix - b.matrix).max()
                      for a, b in zip(result.states, rk.states))
            worst_gap = max(worst_gap, gap)
            if gap > 1e-8:
                failures.append(f"case {case}: expm/rk disagree by {gap:.2e}")
    return SuiteResult("dynamics", not failures, n_cases,
                       {"worst_choi_min_eig": worst_cp,
                        "worst_expm_rk_gap": worst_gap}, failures)


def suite_limiting_cases(seed: int = 0, n_cases: int = 20) -> SuiteResult:
    """H = 0 diagonal dynamics vs the classical chain; jump-free dynamics vs
    unitary Schroedinger evolution."""
    rng = np.random.default_rng(seed)
    failures = []
    times = np.array([0.0, 0.4, 1.3, 3.1])
    worst_cl = worst_un = 0.0
    for case in range(n_cases):
        n = int(rng.integers(2, 6))
        space = HilbertSpace.single_excitation(n)

        g = random_graph(rng, n, with_incoherent=True)
        g_cl = Graph(n, tuple(0.0 for _ in range(n)), (), g.incoherent_edges)
        p0 = rng.uniform(0.1, 1.0, n)
        p0 = p0 / p0.sum()
        rho0 = DensityMatrix(space, np.diag(np.concatenate(([0.0], p0))).astype(complex))
        res = propagate(qsw_model(g_cl, space), rho0, times)
        pops = res.populations()[:, 1:]
        ref = classical_oracle(g_cl, p0, times)
        gap = float(np.abs(pops - ref).max())
        worst_cl = max(worst_cl, gap)
        if gap > 1e-8:
            failures.append(f"case {case}: classical limit off by {gap:.2e}")

        g_u = Graph(n, g.onsite_energies, g.coherent_edges, ())
        psi0 = rng.standard_normal(space.dimension) + 1j * rng.standard_normal(space.dimension)
        rho0 = pure_state(space, psi0)
        res = propagate(qsw_model(g_u, space), rho0, times)
        H = graph_hamiltonian(g_u, space).matrix
        psi0 = psi0 / np.linalg.norm(psi0)
        gap = 0.0
        for t, state in zip(times, res.states):
            psi_t = scipy.linalg.expm(-1j * H * t) @ psi0
            gap = max(gap, float(np.abs(state.populations() - np.abs(psi_t) ** 2).max()))
        worst_un = max(worst_un, gap)
        if gap > 1e-9:
            failures.append(f"case {case}: unitary limit off by {gap:.2e}")
    return SuiteResult("limiting_cases", not failures, n_cases,
                       {"worst_classical_gap": worst_cl, "worst_unitary_gap": worst_un},
                       failures)


def suite_decoupling(seed: int = 0, n_cases: int = 50) -> SuiteResult:
    """Zero per-node coefficient sums kill every golden-rule rate; broken sums
    produce excitation-changing site rates."""
    rng = np.random.default_rng(seed)
    failures = []
    worst_zero = 0.0
    worst_alive = np.inf
    for case in range(n_cases):
        n = int(rng.integers(3, 5))
        g = random_graph(rng, n, with_incoherent=False)
        space = HilbertSpace.full(n)
        eig = eigendecompose(graph_hamiltonian(g, space))
        kind = "x" if rng.random() < 0.5 else "y"
        zero_sum = case % 2 == 0
        channels = random_channels(rng, n, kind, int(rng.integers(2, 4)), zero_sum)
        spec = BathCouplingSpec(channels=channels,
                                spectral_density=random_spectral(rng, "ohmic"),
                                temperature=float(rng.uniform(0.0, 2.0)))
        verdict = check_decoupling(spec, eig, space)
        if zero_sum:
            worst_zero = max(worst_zero, verdict.max_eigen_rate)
            if not verdict.decoupled or verdict.max_eigen_rate >= 1e-12:
                failures.append(f"case {case}: zero-sum spec leaks rate "
                                f"{verdict.max_eigen_rate:.2e}")
        else:
            alive = max((abs(r) for *_, r in verdict.excitation_changing_local),
                        default=0.0)
            worst_alive = min(worst_alive, alive)
            if verdict.decoupled or alive <= 1e-10:
                failures.append(f"case {case}: broken sums but no excitation-changing "
                                f"rate above 1e-10 (max {alive:.2e})")
    return SuiteResult("decoupling", not failures, n_cases,
                       {"worst_zero_sum_rate": worst_zero,
                        "weakest_violation_rate": worst_alive}, failures)


# A fixed, delocalized two-node instance whose one-walker transfer rate is
# demonstrably nonzero under a pure z coupling: the no-go is about crossing
# excitation sectors, not about transfer inside one.
SECTOR_TRANSFER_INSTANCE = {
    "graph": Graph(2, (0.0, 0.9), ((0, 1, 0.6),), ()),
    "channel": BathChannel("z", (1.0, -0.4)),
    "spectral": SpectralModel("ohmic", 0.5, 4.0),
    "temperature": 1.5,
}


def sector_transfer_exhibit() -> float:
    """Transfer rate between the two one-walker states of the fixed instance."""
    inst = SECTOR_TRANSFER_INSTANCE
    spec = BathCouplingSpec(channels=(inst["channel"],),
                            spectral_density=inst["spectral"],
                            temperature=inst["temperature"])
    report = analyze(inst["graph"], spec)
    space = report.space
    a = space.index_of_state(1 << 0)
    b = space.index_of_state(1 << 1)
    return float(np.real(report.local_gamma[a, b]))


def suite_sector_rule(seed: int = 0, n_cases: int = 50) -> SuiteResult:
    """z-kind couplings never generate site rates across excitation sectors;
    the fixed delocalized instance shows same-sector transfer survives."""
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    for case in range(n_cases):
        n = int(rng.integers(2, 5))
        g = random_graph(rng, n, with_incoherent=False)
        channels = random_channels(rng, n, "z", int(rng.integers(1, 3)), False)
        spec = BathCouplingSpec(channels=channels,
                                spectral_density=random_spectral(rng, "ohmic"),
                                temperature=float(rng.uniform(0.2, 2.0)))
        try:
            report = analyze(g, spec)
        except DegenerateTransitions as exc:
            failures.append(f"case {case}: unexpected degeneracy block: {exc}")
            continue
        space = report.space
        exc_num = [space.excitation_of_index(i) for i in range(space.dimension)]
        scale = max(report.rate_scale, 1e-300)
        viol = max((abs(report.local_gamma[m, n2]) / scale
                    for m in range(space.dimension) for n2 in range(space.dimension)
                    if exc_num[m] != exc_num[n2]), default=0.0)
        worst = max(worst, viol)
        if viol >= 1e-12:
            failures.append(f"case {case}: cross-sector rate {viol:.2e} (normalized)")
    transfer = sector_transfer_exhibit()
    if not transfer > 1e-6:
        failures.append(f"fixed instance transfer rate {transfer:.2e} not > 1e-6")
    return SuiteResult("sector_rule", not failures, n_cases,
                       {"worst_cross_sector_rate": worst,
                        "exhibit_transfer_rate": transfer}, failures)


def suite_oracle_equivalence(seed: int = 0, n_cases: int = 25) -> SuiteResult:
    """Contraction formulas vs the brute-force rotated secular generator."""
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    done = 0
    attempts = 0
    while done < n_cases and attempts < n_cases * 4:
        attempts += 1
        n = 3                                   # dimension 8
        g = random_graph(rng, n, with_incoherent=False)
        kind_set = [("z",), ("x",), ("x", "z"), ("y",)][attempts % 4]
        channels = []
        for k in kind_set:
            channels.extend(random_channels(rng, n, k, int(rng.integers(1, 3)), False))
        spec = BathCouplingSpec(channels=tuple(channels),
                                spectral_density=random_spectral(rng, "ohmic"),
                                temperature=float(rng.uniform(0.2, 2.0)))
        try:
            report = analyze(g, spec)
        except DegenerateTransitions:
            continue                             # redraw; screen is doing its job
        done += 1
        bf_g, bf_gt = brute_force_local_quantities(report.rates)
        scale = max(report.rate_scale, 1e-300)
        gap_g = float(np.abs(report.local_gamma - bf_g).max()) / scale
        d = report.space.dimension
        off = ~np.eye(d, dtype=bool)
        gap_gt = float(np.abs((report.local_gamma_tilde - bf_gt)[off]).max()) / scale
        worst = max(worst, gap_g, gap_gt)
        if gap_g > 1e-10 or gap_gt > 1e-10:
            failures.append(f"attempt {attempts}: oracle gaps {gap_g:.2e}/{gap_gt:.2e}")
    if done < n_cases:
        failures.append(f"only {done}/{n_cases} clean instances drawn")
    return SuiteResult("oracle_equivalence", not failures, done,
                       {"worst_oracle_gap": worst}, failures)


def suite_detailed_balance(seed: int = 0, n_cases: int = 20,
                           temperatures=(0.5, 1.0, 2.0)) -> SuiteResult:
    """Eigenbasis rate ratios follow the Boltzmann factor; no absorption at T=0."""
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    for case in range(n_cases):
        n = int(rng.integers(2, 5))
        g = random_graph(rng, n, with_incoherent=False)
        space = HilbertSpace.full(n)
        eig = eigendecompose(graph_hamiltonian(g, space))
        kind = ("x", "y", "z")[case % 3]
        channels = random_channels(rng, n, kind, int(rng.integers(1, 3)), False)
        spec0 = BathCouplingSpec(channels=channels,
                                 spectral_density=random_spectral(rng, "ohmic"),
                                 temperature=0.0)
        for T in temperatures:
            spec = dataclasses.replace(spec0, temperature=float(T))
            rates = golden_rule_rates(eig, spec, space, check_degeneracies=False)
            G = rates.gamma
            d = G.shape[0]
            for a in range(d):
                for b in range(a + 1, d):
                    if G[a, b] > 1e-290 and G[b, a] > 1e-290:
                        expected = np.exp(-(eig.values[a] - eig.values[b]) / T)
                        rel = abs(G[a, b] / G[b, a] - expected) / expected
                        worst = max(worst, rel)
                        if rel > 1e-8:
                            failures.append(
                                f"case {case} T={T}: balance off by {rel:.2e}")
        rates0 = golden_rule_rates(eig, spec0, space, check_degeneracies=False)
        up = max((rates0.gamma[a, b]
                  for a in range(len(eig.values)) for b in range(len(eig.values))
                  if eig.values[a] > eig.values[b] + eig.tol_freq), default=0.0)
        if up > 0.0:
            failures.append(f"case {case}: T=0 absorption rate {up:.2e}")
    return SuiteResult("detailed_balance", not failures, n_cases,
                       {"worst_balance_rel_error": worst}, failures)


def suite_depolarizing_union(seed: int = 0, n_cases: int = 10) -> SuiteResult:
    """Multi-kind specs inherit every kind's verdicts, and rates add exactly."""
    rng = np.random.default_rng(seed)
    failures = []
    for case in range(n_cases):
        n = int(rng.integers(2, 4))
        g = random_graph(rng, n, with_incoherent=True)
        channels = (random_channels(rng, n, "x", 1, False)
                    + random_channels(rng, n, "y", 1, False)
                    + random_channels(rng, n, "z", 1, False))
        spec = BathCouplingSpec(channels=channels,
                                spectral_density=random_spectral(rng, "ohmic"),
                                temperature=float(rng.uniform(0.2, 2.0)))
        try:
            rep = classify_realizability(g, spec)
        except DegenerateTransitions:
            continue
        if not rep.union_consistent:
            failures.append(f"case {case}: union verdict inconsistent")
        total = sum(analyze(g, spec.restricted_to(k)).rates.gamma
                    for k in spec.kinds_present)
        gap = float(np.abs(total - rep.report.rates.gamma).max())
        scale = max(rep.report.rate_scale, 1e-300)
        if gap / scale > 1e-12:
            failures.append(f"case {case}: per-kind rates not additive ({gap:.2e})")
    return SuiteResult("depolarizing_union", not failures, n_cases, {}, failures)


SUITE_FUNCTIONS = {
    "dynamics": suite_dynamics,
    "limiting_cases": suite_limiting_cases,
    "decoupling": suite_decoupling,
    "sector_rule": suite_sector_rule,
    "oracle_equivalence": suite_oracle_equivalence,
    "detailed_balance": suite_detailed_balance,
    "depolarizing_union": suite_depolarizing_union,
}


def run_suites(names=DEFAULT_SUITES, seed: int = 0) -> list[SuiteResult]:
    results = []
    for name in names:
        if name not in SUITE_FUNCTIONS:
            raise ValueError(f"unknown suite {name!r}; available: {sorted(SUITE_FUNCTIONS)}")
        results.append(SUITE_FUNCTIONS[name](seed=seed))
    return results
