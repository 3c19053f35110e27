import math

import numpy as np
import pytest

from chiralrp.spin_core import (
    GAMMA_E,
    CouplingSpec,
    DimensionError,
    FieldConvention,
    FieldSpec,
    Nucleus,
    SpinSystemSpec,
    build_hamiltonian,
    dipolar_constant_from_distance,
    embed_operator,
    spin_operators,
)
from oracles.generate import hamiltonian as reference_hamiltonian
from oracles.generate import load as load_tensors


@pytest.mark.parametrize("mult", [2, 3, 4, 5])
def test_spin_algebra(mult):
    sx, sy, sz = spin_operators(mult)
    s = (mult - 1) / 2
    np.testing.assert_allclose(sx @ sx + sy @ sy + sz @ sz, s * (s + 1) * np.eye(mult), atol=1e-12)
    np.testing.assert_allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12)
    np.testing.assert_allclose(np.sort(np.diag(sz).real), np.arange(-s, s + 1), atol=1e-12)


def test_spin_half_matches_pauli():
    sx, sy, sz = spin_operators(2)
    np.testing.assert_allclose(2 * sx, [[0, 1], [1, 0]])
    np.testing.assert_allclose(2 * sy, [[0, -1j], [1j, 0]])
    np.testing.assert_allclose(2 * sz, [[1, 0], [0, -1]])


def test_embed_slot_order():
    sz = spin_operators(2)[2]
    op = embed_operator(sz, 1, [2, 2, 3])
    expected = np.kron(np.kron(np.eye(2), sz), np.eye(3))
    np.testing.assert_array_equal(op, expected)
    with pytest.raises(DimensionError):
        embed_operator(sz, 2, [2, 2, 3])
    with pytest.raises(DimensionError):
        embed_operator(sz, 3, [2, 2, 3])


def test_dimensions(toy1, toy2, toy3):
    assert (toy1.dim, toy2.dim, toy3.dim) == (16, 64, 256)
    assert toy3.dims == [2, 2, 2, 2, 2, 2, 2, 2]
    spin1 = SpinSystemSpec((Nucleus.isotropic(0.3, 3),), ())
    assert spin1.dim == 12


def test_dimension_cap(toy3):
    with pytest.raises(DimensionError):
        build_hamiltonian(toy3, max_dim=128)


def test_zeeman_only_spectrum():
    # [TRIVIAL] two free electrons: +-gamma B and a doubly degenerate 0
    h = build_hamiltonian(SpinSystemSpec(), FieldSpec(50.0, 0.7, 1.1))
    w = GAMMA_E * 50e-6
    np.testing.assert_allclose(np.linalg.eigvalsh(h), [-w, 0, 0, w], atol=1e-6)


def test_exchange_spectrum():
    # singlet at +J gamma, triplet at -J gamma once the +1/2 offset is included
    h = build_hamiltonian(SpinSystemSpec(), FieldSpec(0.0), CouplingSpec(j_mt=1.0))
    w = GAMMA_E * 1e-3
    np.testing.assert_allclose(np.linalg.eigvalsh(h), [-w, -w, -w, w], rtol=1e-12)
    singlet = np.array([0, 1, -1, 0]) / math.sqrt(2)
    assert singlet @ h @ singlet == pytest.approx(w, rel=1e-12)


def test_dipolar_tensor_axial():
    t = CouplingSpec(d_mt=2.0).dipolar_tensor()
    np.testing.assert_allclose(t, np.diag([-1.0, -1.0, 2.0]), atol=1e-15)
    assert np.trace(t) == pytest.approx(0.0, abs=1e-15)


def test_dipolar_from_distance():
    # point-dipole law D(r) = -2.78e3 / r^3 uT
    assert dipolar_constant_from_distance(1.0) == pytest.approx(-2.78)
    assert dipolar_constant_from_distance(2.0) == pytest.approx(-2.78 / 8)
    with pytest.raises(ValueError):
        dipolar_constant_from_distance(0.0)


def test_field_directions():
    f = FieldSpec(50.0, math.pi / 2, math.pi / 2)
    np.testing.assert_allclose(f.direction(), [0, 1, 0], atol=1e-15)
    lit = FieldSpec(50.0, math.pi / 3, 0.0, FieldConvention.PAPER_LITERAL)
    np.testing.assert_allclose(lit.direction(), [0.5, 0.0, 0.5], atol=1e-15)
    with pytest.raises(ValueError):
        FieldSpec(50.0, 4.0, 0.0)
    with pytest.raises(ValueError):
        FieldSpec(50.0, 0.0, 2 * math.pi)


def test_validation():
    with pytest.raises(ValueError):
        Nucleus(1, np.eye(3))
    with pytest.raises(ValueError):
        Nucleus(2, np.eye(2))
    with pytest.raises(ValueError):
        Nucleus(2, np.full((3, 3), np.nan))
    with pytest.raises(ValueError):
        CouplingSpec(dipolar_axis=(1.0, 1.0, 0.0))


@pytest.mark.parametrize("name", ["toy-1n1n", "toy-2n2n"])
def test_matches_reference_construction(name, toy1, toy2):
    # independent Pauli-product construction of the full Hamiltonian
    system = {"toy-1n1n": toy1, "toy-2n2n": toy2}[name]
    donor, acceptor = load_tensors(name)
    theta, phi, j, d = 1.2, 4.0, 0.25, -0.8
    ours = build_hamiltonian(system, FieldSpec(50.0, theta, phi), CouplingSpec(j_mt=j, d_mt=d))
    ref = reference_hamiltonian(donor, acceptor, 50.0, theta, phi, j, d)
    np.testing.assert_allclose(ours, ref, atol=1e-6 * np.abs(ref).max())


def test_hermitian(toy3):
    h = build_hamiltonian(toy3, FieldSpec(50.0, 0.4, 5.0), CouplingSpec(0.1, -0.3))
    assert np.max(np.abs(h - h.conj().T)) == 0.0


def test_spin1_sx_eigenvalues():
    # [DERIVED] direct eigendecomposition of the 3x3 ladder matrix
    np.testing.assert_allclose(np.linalg.eigvalsh(spin_operators(3)[0]), [-1, 0, 1], atol=1e-14)


def test_embed_examples():
    sx, _, sz = spin_operators(2)
    np.testing.assert_array_equal(embed_operator(sz, 0, [2, 2]).real, np.diag([0.5, 0.5, -0.5, -0.5]))
    a, b = embed_operator(sz, 0, [2, 2]), embed_operator(sx, 1, [2, 2])
    assert np.linalg.norm(a @ b - b @ a) < 1e-14
    sz3 = spin_operators(3)[2]
    big = embed_operator(sz3 + np.eye(3), 1, [2, 3, 4])
    assert np.trace(big).real == pytest.approx(3 * 2 * 4)


def test_distance_inversion():
    # [DERIVED] r = 1.906 nm inverts D = -0.4 mT
    assert dipolar_constant_from_distance(1.906) == pytest.approx(-0.4, rel=5e-3)
    assert dipolar_constant_from_distance(1e3) == pytest.approx(-2.78e-9)


def test_all_off_is_zero():
    h = build_hamiltonian(SpinSystemSpec(), FieldSpec(0.0))
    np.testing.assert_array_equal(h, np.zeros((4, 4)))


@pytest.mark.parametrize("theta, phi", [(0.0, 0.0), (0.9, 2.0), (math.pi, 5.5)])
def test_zeeman_spread_any_orientation(theta, phi):
    ev = np.linalg.eigvalsh(build_hamiltonian(SpinSystemSpec(), FieldSpec(50.0, theta, phi)))
    assert ev[-1] - ev[0] == pytest.approx(2 * GAMMA_E * 50e-6, rel=1e-12)


def test_dipolar_traceless_and_exchange_commutes(toy1):
    base = build_hamiltonian(toy1)
    dip = build_hamiltonian(toy1, coupling=CouplingSpec(d_mt=-1.3, dipolar_axis=(0.6, 0.0, 0.8))) - base
    assert abs(np.trace(dip)) < 1e-12 * np.abs(dip).max() * toy1.dim
    ex = build_hamiltonian(SpinSystemSpec(), FieldSpec(0.0), CouplingSpec(j_mt=0.7))
    for k in range(3):
        total = embed_operator(spin_operators(2)[k], 0, [2, 2]) + embed_operator(spin_operators(2)[k], 1, [2, 2])
        assert np.linalg.norm(ex @ total - total @ ex) < 1e-12 * np.linalg.norm(ex)


def test_theta_zero_independent_of_phi(toy2):
    a = build_hamiltonian(toy2, FieldSpec(50.0, 0.0, 0.0))
    b = build_hamiltonian(toy2, FieldSpec(50.0, 0.0, 4.0))
    assert np.linalg.norm(a - b) < 1e-12 * np.linalg.norm(a)


def test_donor_hyperfine_commutes_with_acceptor_electron():
    tensor = np.array([[0.3, 0.1, 0.0], [0.1, -0.2, 0.4], [0.0, 0.4, 0.9]])
    system = SpinSystemSpec((Nucleus(2, tensor),), ())
    h = build_hamiltonian(system, FieldSpec(0.0))
    for s in spin_operators(2):
        sa = embed_operator(s, 1, system.dims)
        assert np.linalg.norm(h @ sa - sa @ h) < 1e-12 * np.linalg.norm(h)
