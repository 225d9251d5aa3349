"""Microscopic origin of walk generators: golden-rule rates and their site-basis form.

A register coupled to bosonic reservoirs through node operators

    V_kind = sum_j c_j^(kind) sigma_kind(j),        kind in {x, y, z}

acquires, in the weak-coupling / secular regime, eigenbasis transition rates

    G[a, b] = |<a|V|b>|^2 * gamma(eps_b - eps_a)        (rate b -> a)

and eigenbasis coherence decay rates

    Gt[a, b] = (outflow_a + outflow_b)/2 + gamma(0+)/2 * |<a|V|a> - <b|V|b>|^2

with outflow_a = sum_{c != a} G[c, a]; note Gt[a, a] = outflow_a, which is
exactly the diagonal convention that makes the site-basis contractions below
exact identities of the rotated secular generator.

Channels of the same kind share one reservoir and are summed coherently
inside V_kind (so opposite coefficients cancel exactly); different kinds
attach to reservoirs with the same spectral model but add incoherently in the
rates -- which is exact here, because x/y matrix elements are 90 degrees out
of phase and z acts within excitation sectors while x/y act across them.

Site-basis quantities come from the overlap tensors

    T[m, n, a, b]  = |U[m,a]|^2 |U[n,b]|^2
    Tt[m, n, a, b] = U[m,a] conj(U[m,b]) conj(U[n,a]) U[n,b]

as

    local_gamma[m, n]       = sum_{a != b} T[m,n,a,b] G[a,b] - sum_{a,b} Tt[m,n,a,b] Gt[a,b]
    local_gamma_tilde[m, n] = sum_{a != b} Tt[m,n,a,b] G[a,b] - sum_{a,b} T[m,n,a,b] Gt[a,b]

local_gamma[m, n] is the classical-like site transfer rate n -> m;
local_gamma_tilde[m, n] is the coefficient multiplying the site coherence
rho_mn in the reduced equation (typically <= 0: coherence decay).  Both are
exactly the corresponding elements of the secular generator rotated to the
site basis (see brute_force_local_quantities, the independent oracle).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace

import numpy as np

from .bath import SpectralModel, thermal_rate
from .errors import DegenerateTransitions, SectorViolation
from .hilbert import EigenSystem, HilbertSpace, Operator, eigendecompose, local_operator
from .walk import Graph, graph_hamiltonian

KINDS = ("x", "y", "z")


@dataclass(frozen=True)
class BathChannel:
    """One reservoir channel: a Pauli kind and a real coefficient per node."""

    kind: str
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"channel kind must be one of {KINDS}, got {self.kind!r}")
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("channel needs at least one coefficient")
        if not all(np.isfinite(coeffs)):
            raise ValueError("channel coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)


@dataclass(frozen=True)
class BathCouplingSpec:
    """A set of channels sharing one spectral model and temperature."""

    channels: tuple[BathChannel, ...]
    spectral_density: SpectralModel
    temperature: float

    def __post_init__(self):
        if not self.channels:
            raise ValueError("need at least one bath channel")
        n = len(self.channels[0].coefficients)
        if any(len(c.coefficients) != n for c in self.channels):
            raise ValueError("all channels must have one coefficient per node")
        t = float(self.temperature)
        if not (t >= 0 and np.isfinite(t)):
            raise ValueError("temperature must be finite and >= 0")
        object.__setattr__(self, "temperature", t)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def node_count(self) -> int:
        return len(self.channels[0].coefficients)

    @property
    def kinds_present(self) -> tuple[str, ...]:
        return tuple(k for k in KINDS if any(c.kind == k for c in self.channels))

    def kind_sums(self, kind: str) -> np.ndarray:
        """Per-node coherent sums of the coefficients of all channels of `kind`."""
        s = np.zeros(self.node_count)
        for c in self.channels:
            if c.kind == kind:
                s += np.array(c.coefficients)
        return s

    def restricted_to(self, kind: str) -> "BathCouplingSpec":
        chans = tuple(c for c in self.channels if c.kind == kind)
        if not chans:
            raise ValueError(f"no channels of kind {kind!r}")
        return replace(self, channels=chans)


def coupling_operator(spec: BathCouplingSpec, space: HilbertSpace,
                      kind: str | None = None) -> Operator:
    """Total coupling operator (optionally of a single kind) on the space.

    Channels of the same kind are summed coherently.  Raises SectorViolation
    when x/y kinds are requested on the single-excitation sector space.
    """
    if space.node_count != spec.node_count:
        raise ValueError("space and spec disagree on node count")
    kinds = (kind,) if kind else spec.kinds_present
    d = space.dimension
    m = np.zeros((d, d), dtype=complex)
    for k in kinds:
        sums = spec.kind_sums(k)
        for node, c in enumerate(sums):
            if c != 0.0:
                m += c * local_operator(space, node, k).matrix
    return Operator(space, m, hermitian=True)


@dataclass(frozen=True)
class EigenRates:
    """Golden-rule rates in the Hamiltonian eigenbasis.

    gamma[a, b] is the transition rate b -> a (zero diagonal);
    gamma_tilde[a, b] the coherence decay rate (diagonal = total outflow).
    """

    gamma: np.ndarray
    gamma_tilde: np.ndarray
    eig: EigenSystem
    used_zero_frequency: bool


def _screen_coupled_degeneracies(values: np.ndarray, w_abs: np.ndarray,
                                 tol_freq: float, coupling_tol: float) -> None:
    """Raise DegenerateTransitions iff coincident Bohr frequencies are coupled.

    Ordered level pairs p = (a, b) and q = (c, e) with equal signed gaps
    survive the secular average together; the dropped cross term carries the
    weight |V_ac| * |V_be|.  Pairs where both p and q are diagonal are the
    legitimate population couplings and are excluded, as is p == q.
    """
    d = len(values)
    if w_abs.max() <= 0:
        return
    gaps = (values[:, None] - values[None, :]).reshape(-1)     # p = a*d + b
    close = np.abs(gaps[:, None] - gaps[None, :]) < tol_freq
    weight = np.kron(w_abs, w_abs)                             # w[p,q] = W[a,c]*W[b,e]
    idx = np.arange(d * d)
    diag_pair = (idx // d) == (idx % d)
    mask = close & (weight > coupling_tol ** 2)
    mask &= ~np.eye(d * d, dtype=bool)
    mask &= ~(diag_pair[:, None] & diag_pair[None, :])
    if not mask.any():
        return
    offenders = []
    for p, q in zip(*np.nonzero(mask)):
        if p < q:
            offenders.append((((int(p) // d, int(p) % d), (int(q) // d, int(q) % d)),
                              float(weight[p, q])))
        if len(offenders) >= 8:
            break
    raise DegenerateTransitions(
        f"{mask.sum() // 2} coupled transition-frequency degeneracies within "
        f"tol_freq={tol_freq:.3e}; secular rates would drop surviving cross terms "
        f"(first offenders: {offenders[:4]})", offenders=offenders)


def golden_rule_rates(eig: EigenSystem, spec: BathCouplingSpec, space: HilbertSpace,
                      *, check_degeneracies: bool = True,
                      coupling_tol_rel: float = 1e-9) -> EigenRates:
    """Eigenbasis transition and dephasing rates for the coupling spec.

    The zero-frequency noise gamma(0+) is only evaluated when some kind has
    distinct diagonal couplings (it then multiplies the pure-dephasing term);
    spectral families whose gamma(0+) diverges raise ValueError at that point.
    """
    U = eig.vectors
    d = U.shape[0]
    sub_ws = {}
    for k in spec.kinds_present:
        V = coupling_operator(spec, space, kind=k).matrix
        sub_ws[k] = U.conj().T @ V @ U

    w_abs = sum(np.abs(w) for w in sub_ws.values())
    if check_degeneracies and len(sub_ws):
        coupling_tol = coupling_tol_rel * max(float(np.max(w_abs)), 1e-300)
        _screen_coupled_degeneracies(eig.values, w_abs, eig.tol_freq, coupling_tol)

    freq = eig.values[None, :] - eig.values[:, None]       # freq[a,b] = eps_b - eps_a
    gamma_of_freq = np.zeros((d, d))
    off = ~np.eye(d, dtype=bool)
    gamma_of_freq[off] = thermal_rate(spec.spectral_density, freq[off], spec.temperature)

    G = np.zeros((d, d))
    for w in sub_ws.values():
        G += (np.abs(w) ** 2) * gamma_of_freq
    np.fill_diagonal(G, 0.0)

    outflow = G.sum(axis=0)
    Gt = 0.5 * (outflow[:, None] + outflow[None, :])

    pure = np.zeros((d, d))
    scale = max(float(np.max(w_abs)), 1.0) if len(sub_ws) else 1.0
    needs_zero_freq = False
    for w in sub_ws.values():
        v = np.real(np.diag(w))
        diffs = np.abs(v[:, None] - v[None, :])
        if diffs.max() > 1e-13 * scale:
            needs_zero_freq = True
            pure += diffs ** 2
    if needs_zero_freq:
        g0 = spec.spectral_density.zero_frequency_rate(spec.temperature)
        Gt = Gt + 0.5 * g0 * pure
    return EigenRates(gamma=G, gamma_tilde=Gt, eig=eig, used_zero_frequency=needs_zero_freq)


def overlap_tensors(eig: EigenSystem) -> tuple[np.ndarray, np.ndarray]:
    """(T, Tt) with T[m,n,a,b] = |U[m,a]|^2 |U[n,b]|^2 and
    Tt[m,n,a,b] = U[m,a] conj(U[m,b]) conj(U[n,a]) U[n,b]."""
    U = eig.vectors
    A = np.abs(U) ** 2
    T = np.einsum("ma,nb->mnab", A, A)
    Tt = np.einsum("ma,mb,na,nb->mnab", U, U.conj(), U.conj(), U)
    return T, Tt


def local_rates(T: np.ndarray, Tt: np.ndarray, rates: EigenRates) -> np.ndarray:
    """Site-basis transfer-rate matrix (complex; imaginary part is a residue
    for real Hamiltonians and a coherent frequency renormalization otherwise)."""
    first = np.einsum("mnab,ab->mn", T, rates.gamma)        # gamma has zero diagonal
    second = np.einsum("mnab,ab->mn", Tt, rates.gamma_tilde)
    return first - second


def local_pure_dephasing(T: np.ndarray, Tt: np.ndarray, rates: EigenRates) -> np.ndarray:
    """Site-basis coherence coefficients (the T/Tt roles swap relative to local_rates)."""
    first = np.einsum("mnab,ab->mn", Tt, rates.gamma)
    second = np.einsum("mnab,ab->mn", T, rates.gamma_tilde)
    return first - second


def dephasing_floor(local_gamma: np.ndarray) -> np.ndarray:
    """Complete-positivity floor on the coherence coefficients.

    For any Lindblad generator, Re R_{mn,mn} <= -(out_m + out_n)/2 with
    out_m the total transfer rate away from site m, because every jump
    operator contributes |L_jm|^2 to out_m and -(1/2)|L_jm|^2 to the
    coherence coefficient, plus a never-positive -(1/2)|L_mm - L_nn|^2
    term.  Returns the matrix F[m, n] = (out_m + out_n)/2; a valid
    generator satisfies |Re local_gamma_tilde[m, n]| >= F[m, n].
    """
    G = np.real(local_gamma)
    out = G.sum(axis=0) - np.diag(G)
    return 0.5 * (out[:, None] + out[None, :])


def brute_force_local_quantities(rates: EigenRates) -> tuple[np.ndarray, np.ndarray]:
    """Independent oracle: build the secular generator in the eigenbasis,
    rotate the full superoperator to the site basis, read the elements off.

    Returns (local_gamma, local_gamma_tilde) as complex matrices; the
    dephasing matrix is only meaningful off the diagonal (the diagonal slots
    coincide with population slots and are filled with local_gamma's diagonal).
    """
    eig = rates.eig
    U = eig.vectors
    d = U.shape[0]
    G, Gt = rates.gamma, rates.gamma_tilde
    R = np.zeros((d * d, d * d), dtype=complex)
    pop = lambda a: a + d * a
    for a in range(d):
        for c in range(d):
            if a != c:
                R[pop(a), pop(c)] += G[a, c]
        R[pop(a), pop(a)] -= G[:, a].sum()
    for a in range(d):
        for b in range(d):
            if a != b:
                R[a + d * b, a + d * b] = -Gt[a, b]
    S = np.kron(U.conj(), U)            # vec_site = S vec_eigen (column stacking)
    R_site = S @ R @ S.conj().T
    loc_g = np.array([[R_site[pop(m), pop(n)] for n in range(d)] for m in range(d)])
    loc_gt = np.array([[R_site[m + d * n, m + d * n] for n in range(d)] for m in range(d)])
    for m in range(d):
        loc_gt[m, m] = loc_g[m, m]
    return loc_g, loc_gt


@dataclass(frozen=True)
class VanishingCheck:
    """Result of the site-coupling criterion for a pair of register states."""

    element: complex
    magnitude: float
    tol: float
    nonzero: bool
    forces_rates: bool      # under the dense-bath-spectrum assumption
    note: str


def vanishing_condition(spec: BathCouplingSpec, space: HilbertSpace,
                        m, n, tol_rel: float = 1e-12) -> VanishingCheck:
    """Evaluate <m|V|n> for the total coupling operator.

    A nonzero element implies nonzero golden-rule rates somewhere in the
    spectrum provided the reservoir noise power is dense (nonvanishing at the
    relevant Bohr frequencies), which holds for the built-in spectral families
    away from their zeros.  m and n may be basis labels or indices.
    """
    mi = space.index_of_label(m) if isinstance(m, str) else int(m)
    ni = space.index_of_label(n) if isinstance(n, str) else int(n)
    V = coupling_operator(spec, space).matrix
    el = complex(V[mi, ni])
    scale = max(float(np.abs(V).max()), 1e-300)
    tol = tol_rel * scale
    nonzero = abs(el) > tol
    return VanishingCheck(
        element=el, magnitude=abs(el), tol=tol, nonzero=nonzero, forces_rates=nonzero,
        note="nonzero site coupling element forces nonzero eigenbasis rates for "
             "reservoirs with dense spectra" if nonzero else
             "zero site coupling element; this pair drives no golden-rule transition")


@dataclass(frozen=True)
class DecouplingVerdict:
    """Outcome of the coherent-cancellation check for x/y channels."""

    node_sums: dict
    decoupled: bool
    max_eigen_rate: float
    offending_eigen_pairs: tuple
    excitation_changing_local: tuple
    tol: float


def check_decoupling(spec: BathCouplingSpec, eig: EigenSystem, space: HilbertSpace,
                     tol: float = 1e-12) -> DecouplingVerdict:
    """Decide whether the x/y channels cancel coherently and what survives if not.

    When every per-node, per-kind coefficient sum vanishes the total coupling
    operator is identically zero and every golden-rule rate with it; the
    verdict reports the numerically computed max rate as confirmation.  When
    the sums do not vanish, the surviving eigenbasis rates and the induced
    excitation-changing site rates are listed.  Degeneracy screening is off
    here: listing which rates are nonzero does not require secular validity
    of their precise values.
    """
    xy_kinds = tuple(k for k in ("x", "y") if k in spec.kinds_present)
    if not xy_kinds:
        raise ValueError("check_decoupling needs at least one x- or y-kind channel")
    sums = {k: spec.kind_sums(k) for k in xy_kinds}
    coeff_scale = max((max(abs(v) for c in spec.channels if c.kind == k
                           for v in c.coefficients) for k in xy_kinds), default=0.0)
    ztol = tol * max(1.0, coeff_scale)
    decoupled = all(np.abs(s).max() <= ztol for s in sums.values())

    xy_spec = replace(spec, channels=tuple(c for c in spec.channels if c.kind in ("x", "y")))
    rates = golden_rule_rates(eig, xy_spec, space, check_degeneracies=False)
    max_rate = float(rates.gamma.max())

    offending = ()
    exc_local = ()
    if not decoupled:
        d = len(eig.values)
        pairs = [(a, b, float(rates.gamma[a, b]))
                 for a in range(d) for b in range(d) if rates.gamma[a, b] > ztol]
        pairs.sort(key=lambda p: -p[2])
        offending = tuple(pairs[:16])
        T, Tt = overlap_tensors(eig)
        lg = local_rates(T, Tt, rates)
        labels = space.basis_labels
        exc = [space.excitation_of_index(i) for i in range(space.dimension)]
        exc_local = tuple(
            (labels[m], labels[n], float(np.real(lg[m, n])))
            for m in range(space.dimension) for n in range(space.dimension)
            if exc[m] != exc[n] and abs(lg[m, n]) > ztol)
    return DecouplingVerdict(node_sums={k: v.copy() for k, v in sums.items()},
                             decoupled=decoupled, max_eigen_rate=max_rate,
                             offending_eigen_pairs=offending,
                             excitation_changing_local=exc_local, tol=ztol)


# ---------------------------------------------------------------------------
# full analysis pipeline and realizability classification


@dataclass(frozen=True)
class RateReport:
    """Everything the golden-rule reduction produces for one graph + coupling spec."""

    graph: Graph
    spec: BathCouplingSpec
    space: HilbertSpace
    eig: EigenSystem
    rates: EigenRates
    local_gamma: np.ndarray          # complex site transfer matrix
    local_gamma_tilde: np.ndarray    # complex site coherence coefficients
    imag_residue_rates: float
    imag_residue_dephasing: float

    @property
    def rate_scale(self) -> float:
        return float(max(self.rates.gamma.max(initial=0.0),
                         np.abs(self.local_gamma).max(initial=0.0),
                         np.abs(self.local_gamma_tilde).max(initial=0.0)))

    def to_dict(self) -> dict:
        labels = list(self.space.basis_labels)
        return {
            "basis_labels": labels,
            "eigenvalues": [float(v) for v in self.eig.values],
            "degenerate_levels": [list(p) for p in self.eig.degenerate_levels],
            "degenerate_transitions": [[list(a), list(b)]
                                       for a, b in self.eig.degenerate_transitions],
            "tol_freq": self.eig.tol_freq,
            "eigen_gamma": self.rates.gamma.tolist(),
            "eigen_gamma_tilde": self.rates.gamma_tilde.tolist(),
            "local_gamma": np.real(self.local_gamma).tolist(),
            "local_gamma_tilde": np.real(self.local_gamma_tilde).tolist(),
            "imag_residue_rates": self.imag_residue_rates,
            "imag_residue_dephasing": self.imag_residue_dephasing,
            "used_zero_frequency": self.rates.used_zero_frequency,
        }


def analyze(g: Graph, spec: BathCouplingSpec, *, tol_freq: float | None = None,
            check_degeneracies: bool = True) -> RateReport:
    """Run the full reduction on the complete register (the analyzer always
    uses the full space: sector-violation checks need every excitation sector)."""
    if g.node_count != spec.node_count:
        raise ValueError("graph and coupling spec disagree on node count")
    space = HilbertSpace.full(g.node_count)
    H = graph_hamiltonian(g, space)
    eig = eigendecompose(H, tol_freq)
    rates = golden_rule_rates(eig, spec, space, check_degeneracies=check_degeneracies)
    T, Tt = overlap_tensors(eig)
    lg = local_rates(T, Tt, rates)
    lgt = local_pure_dephasing(T, Tt, rates)
    return RateReport(
        graph=g, spec=spec, space=space, eig=eig, rates=rates,
        local_gamma=lg, local_gamma_tilde=lgt,
        imag_residue_rates=float(np.abs(np.imag(lg)).max()),
        imag_residue_dephasing=float(np.abs(np.imag(lgt)).max()))


@dataclass(frozen=True)
class AchievedRate:
    src: int
    dst: int
    requested: float
    achieved: float
    rel_error: float


@dataclass(frozen=True)
class KindVerdict:
    """Per-kind (or combined) realizability summary for one graph."""

    kind: str                        # "x" | "y" | "z" | "all"
    rate_scale: float
    max_sector_violation: float      # largest |site rate| between different excitation numbers
    sector_ok: bool
    max_walker_dephasing: float      # largest |coherence coefficient| among one-walker pairs
    dephasing_free: bool
    decoupled: bool | None           # x/y coherent cancellation; None for z/"all"
    trivial: bool                    # no rates at all (fully decoupled)
    achieved: tuple[AchievedRate, ...]
    extra_walker_rate_max: float     # largest induced one-walker rate not requested

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["achieved"] = [dataclasses.asdict(a) for a in self.achieved]
        return d


@dataclass(frozen=True)
class RealizabilityReport:
    report: RateReport
    per_kind: dict
    combined: KindVerdict
    union_consistent: bool           # combined booleans == AND over kinds

    def to_dict(self) -> dict:
        return {
            "combined": self.combined.to_dict(),
            "per_kind": {k: v.to_dict() for k, v in self.per_kind.items()},
            "union_consistent": self.union_consistent,
            "rates": self.report.to_dict(),
        }


def _verdict_from_report(report: RateReport, kind: str, rate_tol_rel: float) -> KindVerdict:
    space = report.space
    g = report.graph
    d = space.dimension
    exc = [space.excitation_of_index(i) for i in range(d)]
    lg = report.local_gamma
    lgt = report.local_gamma_tilde
    scale = report.rate_scale
    tol = rate_tol_rel * max(scale, 1e-300)

    sector_viol = 0.0
    for m in range(d):
        for n in range(d):
            if exc[m] != exc[n]:
                sector_viol = max(sector_viol, abs(lg[m, n]))

    walker_idx = {node: space.index_of_state(1 << node) for node in range(space.node_count)}
    walker_deph = 0.0
    for a in range(space.node_count):
        for b in range(a + 1, space.node_count):
            walker_deph = max(walker_deph, abs(lgt[walker_idx[a], walker_idx[b]]))

    achieved = []
    requested_pairs = set()
    for src, dst, rate in g.incoherent_edges:
        got = float(np.real(lg[walker_idx[dst], walker_idx[src]]))
        err = abs(got - rate) / rate if rate > 0 else abs(got)
        achieved.append(AchievedRate(src=src, dst=dst, requested=rate,
                                     achieved=got, rel_error=err))
        requested_pairs.add((dst, src))
    extra = 0.0
    for a in range(space.node_count):
        for b in range(space.node_count):
            if a != b and (a, b) not in requested_pairs:
                extra = max(extra, abs(lg[walker_idx[a], walker_idx[b]]))

    decoupled = None
    if kind in ("x", "y"):
        sums = report.spec.kind_sums(kind)
        cscale = max((abs(v) for c in report.spec.channels if c.kind == kind
                      for v in c.coefficients), default=0.0)
        decoupled = bool(np.abs(sums).max() <= 1e-12 * max(1.0, cscale))
    trivial = scale <= 1e-30
    return KindVerdict(
        kind=kind, rate_scale=scale,
        max_sector_violation=float(sector_viol), sector_ok=bool(sector_viol <= tol),
        max_walker_dephasing=float(walker_deph), dephasing_free=bool(walker_deph <= tol),
        decoupled=decoupled, trivial=bool(trivial),
        achieved=tuple(achieved), extra_walker_rate_max=float(extra))


def classify_realizability(g: Graph, spec: BathCouplingSpec, *,
                           tol_freq: float | None = None,
                           rate_tol_rel: float = 1e-12) -> RealizabilityReport:
    """Judge whether the coupling spec realizes the graph's incoherent edges.

    Produces per-kind verdicts (each kind analyzed alone) plus the combined
    verdict, and checks that the combined booleans equal the conjunction over
    kinds -- rates of different kinds add, so a union of couplings inherits
    every kind's violations.
    """
    full = analyze(g, spec, tol_freq=tol_freq)
    combined = _verdict_from_report(full, "all", rate_tol_rel)
    per_kind = {}
    for k in spec.kinds_present:
        rep = analyze(g, spec.restricted_to(k), tol_freq=tol_freq)
        per_kind[k] = _verdict_from_report(rep, k, rate_tol_rel)
    union_ok = True
    if per_kind:
        union_ok = (combined.sector_ok == all(v.sector_ok for v in per_kind.values())
                    and combined.dephasing_free == all(v.dephasing_free
                                                       for v in per_kind.values()))
    return RealizabilityReport(report=full, per_kind=per_kind,
                               combined=combined, union_consistent=union_ok)
