import numpy as np
import pytest
from numpy.testing import assert_allclose

from tests.helpers import *


@pytest.fixture(scope="module")
def spec():
    return LeeModelSpec.default(coupling=0.5, mu=0.5)


@pytest.fixture(scope="module")
def basis(spec):
    return fock_basis(spec.manifold, 9, 2)


def test_fock_basis_layout(basis):
    assert basis.count == 1 + 9 + 45
    assert len(basis.sector(0)) == 1
    assert len(basis.sector(1)) == 9
    assert len(basis.sector(2)) == 45
    assert basis.index((0,) * 9) == 0
    # Mode 0 most significant, higher occupations first
    assert basis.index((1,) + (0,) * 8) == 1
    assert basis.index((2,) + (0,) * 8) == 10


def test_fock_basis_validation(basis):
    with pytest.raises(DomainError):
        basis.sector(3)
    with pytest.raises(DomainError):
        FockBasis.build(basis.modes, -1)


def test_free_hamiltonian(spec, basis):
    energies = build_h0(spec, basis).diagonal()
    assert energies[0] == 0.0
    # A boson in the constant mode carries only its rest energy
    assert_allclose(energies[1], spec.rest)
    assert_allclose(energies[10], 2 * spec.rest)
    assert_allclose(mode_energies(spec, basis), spec.manifold.kappa * basis.modes.eigenvalues + 1.0)


def test_spec_validation():
    with pytest.raises(UnsupportedGeometryError):
        LeeModelSpec.build(ManifoldSpec.flat(2), np.zeros(2), 0.5, 0.5)
    with pytest.raises(DomainError):
        LeeModelSpec.default(coupling=0.0)
    with pytest.raises(DomainError):
        LeeModelSpec.default(mu=1.0)
    with pytest.raises(DomainError):
        LeeModelSpec.build(torus2(), np.zeros(2), 0.5, 0.5, mass=2.0)
    spec = LeeModelSpec.build(torus2(), np.zeros(2), 0.5, 1.5, rest_energy=2.0)
    assert spec.threshold(2) == 5.5


def test_threshold(spec):
    assert spec.threshold(0) == spec.mu
    assert spec.threshold(2) == 2 * spec.mass + spec.mu
    assert spec.with_coupling(0.1).coupling == 0.1


def test_vacuum_principal_vanishes_at_mu(spec):
    assert vacuum_principal(spec, spec.mu) == 0.0
    assert vacuum_principal(spec, spec.mu - 1.0) > 0
    with pytest.raises(WindowError):
        vacuum_principal(spec, complex(spec.mu, 1.0))


def test_vacuum_ground_state_is_the_edge(spec, basis):
    state = ground_state_energy(spec, basis, 0)
    assert state.edge
    assert state.energy == spec.mu
    assert state.convergence == 0.0


def test_principal_operator_hermitian(spec, basis):
    for bosons in (1, 2):
        phi = build_principal_operator(spec, basis, bosons, 0.2)
        assert_allclose(phi, np.conj(phi.T), atol=1e-13)


def test_split_parts(spec, basis):
    k, u1, u2 = split_KU(spec, basis, 1, -3.0)
    assert np.all(np.diag(k) > 0)
    assert np.all(np.diag(u1) <= 0)
    assert_allclose(u1, np.diag(np.diag(u1)))
    assert_allclose(build_principal_operator(spec, basis, 1, -3.0), k - u1 - u2)
    _, largest = u1_tilde_norm(spec, basis, 1, -3.0)
    assert largest <= 0


def test_principal_operator_window(spec, basis):
    with pytest.raises(WindowError):
        split_KU(spec, basis, 1, spec.threshold(1))
    low, high = default_window(spec, 1)
    assert low < high < spec.threshold(1)


def test_vacuum_sector_has_no_exchange(spec, basis):
    _, _, u2 = split_KU(spec, basis, 0, 0.0)
    assert not np.any(u2)


def test_one_boson_ground_state(spec, basis):
    state = ground_state_energy(spec, basis, 1)
    assert state.found and not state.edge
    assert state.energy < spec.threshold(1)
    phi = build_principal_operator(spec, basis, 1, state.energy)
    assert abs(np.linalg.eigvalsh(phi)[0]) < 1e-9
    assert state.boson_change is not None and state.boson_change < 1e-10
    assert state.mode_change is not None


def test_boson_cutoff_does_not_raise_the_ground_state(spec, basis):
    full = ground_state_energy(spec, basis, 1, convergence=False)
    smaller = ground_state_energy(spec, FockBasis.build(basis.modes, 1), 1, convergence=False)
    assert full.energy <= smaller.energy + 1e-10
    assert_allclose(full.energy, smaller.energy, rtol=1e-10)


def test_top_sector_has_no_boson_change(spec, basis):
    state = ground_state_energy(spec, basis, 2)
    assert state.boson_change is None


@pytest.mark.slow
def test_ground_state_decreases_with_modes(spec):
    full = fock_basis(spec.manifold)
    half = fock_basis(spec.manifold, full.mode_count // 2, full.max_bosons)
    fine = ground_state_energy(spec, full, 1, convergence=False)
    coarse = ground_state_energy(spec, half, 1, convergence=False)
    assert fine.energy <= coarse.energy + 1e-10
    assert abs(fine.energy - coarse.energy) < 0.01 * abs(coarse.energy)


def test_empty_window_reports_no_state(spec, basis):
    threshold = spec.threshold(1)
    state = ground_state_energy(spec, basis, 1, (threshold - 1e-3, threshold - 1e-4), scan_points=4)
    if state.found:
        assert threshold - 1e-3 <= state.energy <= threshold - 1e-4
    with pytest.raises(WindowError):
        ground_state_energy(spec, basis, 1, (0.0, threshold + 1.0))


def test_normal_ordering(spec, basis):
    assert normal_ordering_check(spec, basis, 3, 0.5) < 1e-10


def test_strong_limit_shrinks(spec, basis):
    energies, errors = lee_strong_limit(spec, basis, 1, 64)
    assert len(energies) == 7
    assert np.all(np.diff(energies) < 0)
    assert errors[-1] < errors[0]


@pytest.mark.slow
def test_vacuum_identity(spec):
    assert vacuum_identity_residual(spec, -1.0, -4.0) < 1e-6


def test_relative_bound_needs_bosons(spec, basis):
    with pytest.raises(DomainError):
        relative_bound_check(spec, basis, 0)


def test_c32_tracks_the_latest_mu(spec, fresh_registry):
    fresh_registry.record(spec.manifold, 'A_prime', 2.0, Provenance.EXTERNAL)
    first = lee_constant_c32(spec.manifold, 0.25, fresh_registry)
    second = lee_constant_c32(spec.manifold, 1.0, fresh_registry)
    assert first > second
    constant = fresh_registry.constant(spec.manifold, 'C32')
    assert constant.value == second
    assert "mu=1" in constant.note


def test_lower_bound_on_vacuum_is_threshold(spec):
    assert ground_state_lower_bound(2, 0, 0.5, 1.0, 0.5, spec.manifold) == 0.5
    with pytest.raises(DomainError):
        ground_state_lower_bound(3, 1, 0.5, 1.0, 0.5, spec.manifold)


@pytest.mark.slow
def test_ground_state_respects_lower_bound(spec, basis, fresh_registry):
    report = ground_state_bound_check(spec, basis, 1, (0.25, 0.5))
    assert report.verdict != Verdict.VIOLATED
    assert np.all(report.value_array() >= report.bound_array() - 1e-9)
