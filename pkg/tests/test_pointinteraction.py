import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from tests.helpers import *


@pytest.mark.parametrize("mu", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("mass", [0.5, 1.0])
@pytest.mark.parametrize("dimension", [2, 3])
def test_flat_single_center_bound_state(dimension, mass, mu):
    manifold = flat(dimension, mass)
    centers = single_center(manifold, mu, mass)
    states = bound_states(manifold, centers, (-4 * mu ** 2 - 1, -0.01 * mu ** 2))
    assert len(states) == 1
    assert_allclose(states[0].energy, -mu ** 2, rtol=1e-8)
    assert_allclose(states[0].vector, [1.0])


def test_flat_principal_matrix_closed_forms():
    manifold = flat(2)
    centers = single_center(manifold, 1.0)
    value = principal_matrix(manifold, centers, -4.0)
    # (m / 2 pi) ln(|E| / mu^2) with m = 1
    assert_allclose(value.entries[0, 0], math.log(4.0) / (2 * math.pi), rtol=1e-9)
    manifold = flat(3)
    centers = single_center(manifold, 0.5)
    value = principal_matrix(manifold, centers, -1.0)
    # (2m)^(3/2) / (4 pi) (sqrt|E| - mu)
    assert_allclose(value.entries[0, 0], 2 ** 1.5 / (4 * math.pi) * 0.5, rtol=1e-9)


def test_flat_free_resolvent_closed_forms():
    distance = 0.7
    value = free_resolvent(flat(3), np.zeros(3), np.array([distance, 0, 0]), -2.0)
    assert_allclose(value, 2 / (4 * math.pi * distance) * math.exp(-distance * 2.0), rtol=1e-9)
    value = free_resolvent(flat(2), np.zeros(2), np.array([0, distance]), -2.0)
    assert_allclose(value, special.k0(distance * 2.0) / math.pi, rtol=1e-9)


def test_free_resolvent_diagonal_diverges():
    with pytest.raises(DomainError):
        free_resolvent(torus2(), np.zeros(2), np.zeros(2), -1.0)


def test_free_resolvent_needs_negative_energy():
    with pytest.raises(DomainError):
        free_resolvent(torus2(), np.zeros(2), np.ones(2), 0.5)


def test_free_resolvent_difference_on_the_diagonal():
    manifold = flat(3)
    origin = np.zeros(3)
    # (2m)^(3/2)/(4 pi) (sqrt|E2| - sqrt|E1|)
    expected = 2 ** 1.5 / (4 * math.pi) * (2.0 - 1.0)
    assert_allclose(free_resolvent_difference(manifold, origin, origin, -1.0, -4.0), expected, rtol=1e-9)
    assert free_resolvent_difference(manifold, origin, origin, -1.0, -1.0) == 0.0


@pytest.mark.parametrize("dimension", [2, 3])
def test_alpha_flat_closed_form(dimension):
    manifold = flat(dimension)
    centers = single_center(manifold)
    kappa = manifold.kappa
    if dimension == 2:
        expected = 1 / (4 * math.pi * kappa * 3.0)
    else:
        expected = (4 * math.pi * kappa) ** -1.5 * math.sqrt(math.pi) / math.sqrt(3.0)
    assert_allclose(alpha(manifold, centers, 0, 0, -3.0), expected, rtol=1e-9)


def test_alpha_is_derivative_of_free_resolvent():
    manifold = torus2()
    centers = CenterSet.build([np.array([0.0, 0.0]), np.array([1.0, 2.0])], 1.0)
    energy, step = -2.0, 1e-4
    derivative = (free_resolvent(manifold, centers.positions[0], centers.positions[1], energy + step)
                  - free_resolvent(manifold, centers.positions[0], centers.positions[1], energy - step)) / (2 * step)
    assert_allclose(alpha(manifold, centers, 0, 1, energy), derivative, rtol=1e-6)


def test_principal_matrix_symmetric_and_decreasing():
    manifold = torus2()
    centers = CenterSet.build([np.array([0.5, 0.5]), np.array([2.0, 3.0]), np.array([4.0, 1.0])], [1.0, 0.8, 1.2])
    upper = principal_matrix(manifold, centers, -2.0).entries
    lower = principal_matrix(manifold, centers, -3.0).entries
    assert_allclose(upper, upper.T, rtol=1e-14)
    # Phi(E1) - Phi(E2) is negative definite for E1 > E2
    assert np.all(np.linalg.eigvalsh(upper - lower) < 0)


def test_principal_matrix_rejects_mismatched_mass():
    manifold = torus2(mass=1.0)
    centers = CenterSet.build([np.zeros(2)], 1.0, mass=2.0)
    with pytest.raises(DomainError):
        principal_matrix(manifold, centers, -1.0)


def test_coinciding_centers_rejected():
    manifold = torus2()
    centers = CenterSet.build([np.zeros(2), np.array([2 * math.pi, 0.0])], 1.0)
    with pytest.raises(DomainError):
        principal_matrix(manifold, centers, -1.0)


def test_singular_principal_matrix():
    with pytest.raises(SingularMatrixError):
        invert_principal(np.array([[1.0, 1.0], [1.0, 1.0]]), -1.0)
    assert_allclose(invert_principal(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))


def test_single_center_binds_at_mu_squared_on_any_geometry():
    # The renormalized diagonal vanishes at E = -mu^2 whatever the heat kernel
    manifold = torus2()
    centers = single_center(manifold, 1.0)
    states = bound_states(manifold, centers, (-5.0, -0.05))
    assert len(states) == 1
    assert_allclose(states[0].energy, -1.0, rtol=1e-8)
    assert abs(principal_matrix(manifold, centers, -1.0).entries[0, 0]) < 1e-12


def test_two_center_bound_states_are_ordered():
    manifold = flat(3)
    centers = CenterSet.build([np.zeros(3), np.array([1.5, 0.0, 0.0])], 1.0)
    states = bound_states(manifold, centers, (-10.0, -0.01))
    energies = [state.energy for state in states]
    assert energies == sorted(energies)
    # The symmetric state lies below the single-center level
    assert energies[0] < -1.0
    assert_allclose(np.abs(states[0].vector), [math.sqrt(0.5)] * 2, rtol=1e-8)


def test_bound_state_window_checked():
    manifold = flat(2)
    with pytest.raises(WindowError):
        bound_states(manifold, single_center(manifold), (-2.0, 0.5))
    with pytest.raises(WindowError):
        bound_states(manifold, single_center(manifold), (-1.0, -2.0))


def test_empty_window_has_no_roots():
    manifold = flat(2)
    assert bound_states(manifold, single_center(manifold), (-0.5, -0.1)) == []


def test_eigenvalue_crossings_warns_on_coarse_grid():
    # Two eigenvalues of diag(-1 - E, -1.01 - E) cross zero inside one scan cell
    with pytest.warns(ScanWarning):
        states = eigenvalue_crossings(lambda energy: np.diag([-1 - energy, -1.01 - energy]), (-2.0, -0.5), 2)
    assert_allclose(sorted(state.energy for state in states), [-1.01, -1.0], rtol=1e-10)


def test_resolvent_kernel_symmetric():
    manifold = torus2()
    centers = CenterSet.build([np.array([0.0, 0.0]), np.array([3.0, 3.0])], 1.0)
    x, y = np.array([1.0, 0.5]), np.array([2.0, 4.0])
    energy = complex(-5.0, 2.0)
    forward = resolvent_kernel(manifold, centers, x, y, energy)
    backward = resolvent_kernel(manifold, centers, y, x, energy.conjugate())
    assert_allclose(forward, np.conj(backward), rtol=1e-9)


def test_resolvent_image_matches_sampled_resolvent():
    manifold = torus2()
    centers = single_center(manifold, 1.0)
    basis = spectral_basis(manifold, 25)
    coefficients = np.zeros(25, dtype=complex)
    coefficients[1] = 1.0
    image = ResolventImage.from_coefficients(manifold, centers, basis, coefficients)
    result = apply_resolvent_image(image, -3.0)
    x = np.array([1.0, 2.0])
    free = basis.evaluate(x)[1] / (manifold.kappa * basis.eigenvalues[1] + 3.0)
    inverse = principal_matrix(manifold, centers, -3.0).inverse()[0, 0]
    pairing = image.pair_with_center(0, -3.0)
    expected = free + free_resolvent(manifold, x, centers.positions[0], -3.0) * inverse * pairing
    assert_allclose(result.sample(x[None, :])[0], expected, rtol=1e-9)


def test_resolvent_image_norm_matches_grid():
    manifold = torus2()
    centers = single_center(manifold, 1.0)
    basis = spectral_basis(manifold, 25)
    coefficients = np.zeros(25, dtype=complex)
    coefficients[3] = 1.0
    image = apply_resolvent_image(ResolventImage.from_coefficients(manifold, centers, basis, coefficients), -2.0)
    grid = integration_grid(manifold, 96)
    sampled = SampledFunction(grid, image.sample(grid.points))
    # The grid misses the logarithmic peak at the center, so only a loose match is expected
    assert_allclose(sampled.norm(), image.norm(), rtol=1e-2)


def test_apply_resolvent_needs_compact_geometry():
    manifold = flat(2)
    grid = integration_grid(manifold, 8, np.zeros(2), 1.0)
    function = SampledFunction(grid, np.ones(len(grid.points)))
    with pytest.raises(UnsupportedGeometryError):
        apply_resolvent(manifold, single_center(manifold), function, -1.0)


def test_phi_inverse_norm_bound_two_dimensions():
    manifold = torus2()
    centers = single_center(manifold, 1.0)
    value = principal_matrix(manifold, centers, -50.0)
    bound, valid = phi_inverse_norm_bound(value)
    assert valid
    assert value.inverse_norm() <= bound * (1 + 1e-12)


def test_phi_inverse_norm_bound_single_center_is_exact():
    bound, valid = phi_inverse_norm_bound(PrincipalMatrixValue(-2.0, np.array([[0.5]])))
    assert valid
    assert bound == 2.0


def test_phi_inverse_norm_bound_vanishing_diagonal():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        bound, valid = phi_inverse_norm_bound(PrincipalMatrixValue(-1.0, np.array([[0.0]])))
    assert not valid
    assert bound == math.inf


@pytest.mark.parametrize("energy", [-1e3, -1e4])
def test_phi_inverse_norm_bound_two_centers_far_below(energy):
    manifold = flat(3)
    centers = CenterSet.build([np.zeros(3), np.array([1.5, 0.0, 0.0])], 1.0)
    value = principal_matrix(manifold, centers, energy)
    diagonal = np.diag(value.entries)
    contraction = np.linalg.norm((np.diag(diagonal) - value.entries) / diagonal[:, None], 2)
    assert contraction < 0.5
    bound, valid = phi_inverse_norm_bound(value)
    assert valid
    assert np.linalg.norm(value.inverse(), 2) <= bound * (1 + 1e-12)
    assert_allclose(bound, 1 / np.min(np.abs(diagonal)) / (1 - contraction), rtol=1e-12)
