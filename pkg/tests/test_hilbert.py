"""Register bookkeeping, node operators, and eigendecomposition checks."""

import numpy as np
import pytest

from qswalk.errors import NotHermitian, SectorViolation, ToleranceNotMet
from qswalk.hilbert import (PAULI, DensityMatrix, HilbertSpace, Operator,
                            basis_state, eigendecompose, excitation_number,
                            hop_operator, local_operator, mixture,
                            number_operator, pure_state, state_label)


def test_pauli_ladder_identities():
    # occupation raiser: sigma_plus |0> = |1>, so sigma+ sigma- counts the excitation
    np.testing.assert_allclose(PAULI["+"] @ PAULI["-"],
                               (PAULI["i"] - PAULI["z"]) / 2.0, atol=0)
    np.testing.assert_allclose(PAULI["x"] @ PAULI["y"] - PAULI["y"] @ PAULI["x"],
                               2j * PAULI["z"], atol=1e-15)
    np.testing.assert_allclose(PAULI["+"], (PAULI["x"] - 1j * PAULI["y"]) / 2.0,
                               atol=1e-15)


def test_labels_node_zero_first():
    assert [state_label(s, 2) for s in range(4)] == ["00", "10", "01", "11"]
    assert state_label(0b100, 3) == "001"     # node 2 occupied
    assert excitation_number("0110") == 2
    space = HilbertSpace.full(2)
    assert space.basis_labels == ("00", "10", "01", "11")
    for idx, label in enumerate(space.basis_labels):
        assert space.index_of_label(label) == idx
        assert space.excitation_of_index(idx) == label.count("1")


def test_single_excitation_space():
    space = HilbertSpace.single_excitation(3)
    assert space.dimension == 4
    assert space.basis_labels == ("000", "100", "010", "001")
    assert [space.excitation_of_index(i) for i in range(4)] == [0, 1, 1, 1]
    with pytest.raises(KeyError):
        space.index_of_label("110")


def test_local_operator_full_mode():
    space = HilbertSpace.full(2)
    raise1 = local_operator(space, 1, "+")
    # node 1 raiser maps 00 -> 01 (label written node-0-first)
    i00 = space.index_of_label("00")
    i01 = space.index_of_label("01")
    assert raise1.matrix[i01, i00] == 1.0
    assert np.count_nonzero(raise1.matrix[:, i00]) == 1

    # total number operator equals the sum of per-node projectors
    total = number_operator(space).matrix
    acc = sum((local_operator(space, n, "+") @ local_operator(space, n, "-")).matrix
              for n in range(2))
    np.testing.assert_allclose(total, acc, atol=0)
    np.testing.assert_allclose(np.diag(total), [0, 1, 1, 2], atol=0)


def test_sector_operators_match_full_projection():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4):
        full = HilbertSpace.full(n)
        sect = HilbertSpace.single_excitation(n)
        keep = [full.index_of_label(la) for la in sect.basis_labels]
        for node in range(n):
            z_full = local_operator(full, node, "z").matrix[np.ix_(keep, keep)]
            z_sect = local_operator(sect, node, "z").matrix
            np.testing.assert_allclose(z_sect, z_full, atol=0)
        src, dest = rng.choice(n, size=2, replace=False)
        h_full = hop_operator(full, dest, src).matrix[np.ix_(keep, keep)]
        h_sect = hop_operator(sect, dest, src).matrix
        np.testing.assert_allclose(h_sect, h_full, atol=0)


def test_sector_xy_rejected():
    space = HilbertSpace.single_excitation(2)
    with pytest.raises(SectorViolation):
        local_operator(space, 0, "x")
    with pytest.raises(SectorViolation):
        local_operator(space, 1, "y")


def test_operator_algebra_and_hermiticity_guard():
    space = HilbertSpace.full(1)
    x = local_operator(space, 0, "x")
    y = local_operator(space, 0, "y")
    z = x.scaled(1j) @ y.dag()
    comm = (x @ y) - (y @ x)
    np.testing.assert_allclose(comm.matrix, 2j * PAULI["z"], atol=1e-15)
    assert z.matrix.shape == (2, 2)
    with pytest.raises(NotHermitian):
        Operator(space, np.array([[0.0, 1.0], [0.0, 0.0]]), hermitian=True)


def test_density_matrix_validation():
    space = HilbertSpace.full(1)
    rho = basis_state(space, "1")
    np.testing.assert_allclose(rho.populations(), [0.0, 1.0], atol=0)

    with pytest.raises(ToleranceNotMet):
        DensityMatrix(space, np.diag([0.7, 0.7]).astype(complex))   # trace 1.4
    with pytest.raises(ToleranceNotMet):
        DensityMatrix(space, np.array([[1.2, 0.0], [0.0, -0.2]], dtype=complex))

    mix = mixture(space, [("0", 0.25), ("1", 0.75)])
    np.testing.assert_allclose(np.diag(mix.matrix), [0.25, 0.75])

    psi = pure_state(space, np.array([1.0, 1.0j]))
    np.testing.assert_allclose(np.trace(psi.matrix), 1.0, atol=1e-15)
    np.testing.assert_allclose(psi.matrix[0, 1], -0.5j, atol=1e-15)


def test_eigendecompose_random_hermitians():
    """Reconstruction residual and ascending order over random matrices."""
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(2, 5))
        space = HilbertSpace.full(n) if n <= 3 else HilbertSpace.single_excitation(n)
        d = space.dimension
        A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        H = Operator(space, (A + A.conj().T) / 2.0, hermitian=True)
        eig = eigendecompose(H)
        U, w = eig.vectors, eig.values
        np.testing.assert_allclose(U @ np.diag(w) @ U.conj().T, H.matrix,
                                   atol=1e-10 * max(1.0, np.abs(w).max()))
        assert np.all(np.diff(w) >= 0)
        assert eig.tol_freq > 0


def test_eigendecompose_flags_degeneracies():
    space = HilbertSpace.full(2)
    H = Operator(space, np.diag([0.0, 1.0, 1.0, 2.0]).astype(complex), hermitian=True)
    eig = eigendecompose(H)
    assert eig.degenerate_levels           # the two middle levels coincide
    assert not eig.is_clean
    Hc = Operator(space, np.diag([0.0, 0.4, 1.1, 2.9]).astype(complex), hermitian=True)
    assert eigendecompose(Hc).degenerate_levels == ()
