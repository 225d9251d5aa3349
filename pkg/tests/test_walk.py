"""Graph construction, Liouvillian structure, propagation, steady states."""

import numpy as np
import pytest
import scipy.linalg

from qswalk.errors import DegenerateSteadyState
from qswalk.hilbert import (DensityMatrix, HilbertSpace, Operator, basis_state,
                            hop_operator, local_operator)
from qswalk.verify import random_density, random_graph, random_lindblad
from qswalk.walk import (Graph, LindbladModel, classical_generator,
                         classical_oracle, graph_hamiltonian, liouvillian,
                         propagate, qsw_model, steady_state, unvec, vec)


def test_graph_normalization():
    g = Graph(3, (0.0, 0.5, 1.0), ((2, 0, 1.0 + 0.5j),), ((0, 1, 0.3),))
    # edge stored with m < n and conjugated amplitude
    assert g.coherent_edges == ((0, 2, 1.0 - 0.5j),)
    with pytest.raises(ValueError):
        Graph(2, (0.0, 0.0), ((0, 0, 1.0),), ())
    with pytest.raises(ValueError):
        Graph(2, (0.0, 0.0), ((0, 1, 1.0), (1, 0, 1.0)), ())
    with pytest.raises(ValueError):
        Graph(2, (0.0, 0.0), (), ((0, 1, -0.1),))
    with pytest.raises(ValueError):
        Graph(2, (0.0,), (), ())


def test_graph_hamiltonian_small():
    g = Graph(2, (0.3, 0.9), ((0, 1, 0.4 + 0.2j),), ())
    space = HilbertSpace.single_excitation(2)
    H = graph_hamiltonian(g, space).matrix
    # basis: 00, 10, 01
    np.testing.assert_allclose(np.diag(H), [0.0, 0.3, 0.9])
    np.testing.assert_allclose(H[1, 2], 0.4 + 0.2j)
    np.testing.assert_allclose(H, H.conj().T)


def test_vec_unvec_roundtrip():
    rng = np.random.default_rng(2)
    for d in (2, 3, 5):
        rho = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        np.testing.assert_allclose(unvec(vec(rho)), rho, atol=0)
    # column stacking: vec(rho)[i + d*j] = rho[i, j]
    rho = np.arange(4.0).reshape(2, 2)
    np.testing.assert_allclose(vec(rho), [0.0, 2.0, 1.0, 3.0])


def test_liouvillian_matches_direct_action():
    """The superoperator matrix must reproduce the Lindblad right-hand side."""
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        space = HilbertSpace.full(n)
        model = random_lindblad(rng, space)
        rho = random_density(rng, space).matrix
        H = model.hamiltonian.matrix
        rhs = -1j * (H @ rho - rho @ H)
        for op, rate in model.jumps:
            L = op.matrix
            LdL = L.conj().T @ L
            rhs += rate * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
        out = unvec(liouvillian(model).matrix @ vec(rho))
        np.testing.assert_allclose(out, rhs, atol=1e-12)


def test_trace_preservation_row():
    rng = np.random.default_rng(4)
    space = HilbertSpace.full(2)
    model = random_lindblad(rng, space)
    M = liouvillian(model).matrix
    d = space.dimension
    trace_row = vec(np.eye(d)).conj() @ M
    np.testing.assert_allclose(trace_row, np.zeros(d * d), atol=1e-13)


def test_amplitude_damping_spectrum():
    # single qubit decay: eigenvalues of the generator are {0, -g, -g/2, -g/2}
    g = 0.7
    space = HilbertSpace.full(1)
    H = Operator(space, np.zeros((2, 2), dtype=complex), hermitian=True)
    model = LindbladModel(H, ((local_operator(space, 0, "-"), g),))
    ev = np.linalg.eigvals(liouvillian(model).matrix)
    np.testing.assert_allclose(sorted(ev.real), [-g, -g / 2, -g / 2, 0.0], atol=1e-12)
    np.testing.assert_allclose(ev.imag, 0.0, atol=1e-12)


def test_propagate_methods_agree():
    rng = np.random.default_rng(6)
    times = np.array([0.0, 0.5, 1.7, 4.0])
    for _ in range(6):
        space = HilbertSpace.single_excitation(int(rng.integers(2, 5)))
        model = random_lindblad(rng, space)
        rho0 = random_density(rng, space)
        a = propagate(model, rho0, times, method="expm")
        b = propagate(model, rho0, times, method="rk")
        gap = max(np.abs(x.matrix - y.matrix).max()
                  for x, y in zip(a.states, b.states))
        assert gap < 1e-8, f"expm/rk disagreement {gap:.2e}"
        np.testing.assert_allclose(a.states[0].matrix, rho0.matrix, atol=1e-12)


def test_propagate_time_grid_handling():
    space = HilbertSpace.full(1)
    model = LindbladModel(Operator(space, np.diag([0.0, 1.0]).astype(complex),
                                   hermitian=True))
    rho0 = basis_state(space, "1")
    res = propagate(model, rho0, [0.0, 0.0, 0.0])
    assert len(res.states) == 3
    res = propagate(model, rho0, [0.4, 1.2])       # grid not starting at zero
    assert res.times[0] == 0.4 and len(res.states) == 2
    pops = res.populations()
    np.testing.assert_allclose(pops[:, 1], [1.0, 1.0], atol=1e-12)


def test_steady_state_amplitude_damping():
    space = HilbertSpace.full(1)
    H = Operator(space, np.diag([0.0, 0.8]).astype(complex), hermitian=True)
    model = LindbladModel(H, ((local_operator(space, 0, "-"), 0.5),))
    ss = steady_state(model)
    np.testing.assert_allclose(ss.populations(), [1.0, 0.0], atol=1e-10)


def test_steady_state_degenerate_kernel_reported():
    # number-conserving walk: vacuum and walker blocks never mix, so the
    # stationary space is at least two-dimensional and must be reported
    g = Graph(2, (0.0, 0.4), ((0, 1, 0.3),), ((0, 1, 0.2), (1, 0, 0.2)))
    model = qsw_model(g, HilbertSpace.single_excitation(2))
    with pytest.raises(DegenerateSteadyState) as err:
        steady_state(model)
    assert len(err.value.solutions) >= 2


def test_classical_generator_and_oracle():
    g = Graph(3, (0.0, 0.0, 0.0), (),
              ((0, 1, 0.4), (1, 2, 0.1), (2, 0, 0.7), (1, 0, 0.05)))
    Q = classical_generator(g)
    np.testing.assert_allclose(Q.sum(axis=0), np.zeros(3), atol=1e-15)
    assert Q[1, 0] == 0.4 and Q[0, 1] == 0.05

    # H = 0 walk: diagonal of the density matrix follows the classical chain
    times = np.array([0.0, 0.8, 2.5])
    p0 = np.array([0.5, 0.3, 0.2])
    ref = classical_oracle(g, p0, times)
    space = HilbertSpace.single_excitation(3)
    rho0 = DensityMatrix(space, np.diag(np.concatenate(([0.0], p0))).astype(complex))
    res = propagate(qsw_model(g, space), rho0, times)
    np.testing.assert_allclose(res.populations()[:, 1:], ref, atol=1e-9)
    np.testing.assert_allclose(scipy.linalg.expm(Q * 0.0) @ p0, p0, atol=0)


def test_qsw_model_jump_structure():
    g = Graph(2, (0.0, 0.0), (), ((0, 1, 0.9),))
    space = HilbertSpace.single_excitation(2)
    model = qsw_model(g, space)
    assert len(model.jumps) == 1
    op, rate = model.jumps[0]
    assert rate == 0.9
    np.testing.assert_allclose(op.matrix, hop_operator(space, 1, 0).matrix, atol=0)
