import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tests.helpers import *

PASSING = (Verdict.HOLDS, Verdict.HOLDS_WITH_CALIBRATION)


@pytest.fixture
def torus_pair():
    return point_system(torus2(), [np.array([1.0, 1.0]), np.array([4.0, 3.5])], [1.0, 0.8], modes=64)


def test_system_kinds(torus_pair):
    assert system_kind(torus_pair) == 'nonrelativistic'
    assert system_kind(relativistic_torus()) == 'relativistic'
    lee = lee_system()
    assert system_kind(lee) == 'lee'
    assert system_manifold(lee) is lee.spec.manifold


def test_sample_points_reproducible():
    sphere = ManifoldSpec.sphere(1.0)
    first = sample_points(sphere, 5, seed=3)
    assert_allclose(first, sample_points(sphere, 5, seed=3))
    assert_allclose(np.linalg.norm(first, axis=-1), 1.0)
    points = sample_points(torus2(), 20)
    assert np.all((points >= 0) & (points <= 2 * math.pi))


def test_function_battery_is_normalized(torus_pair):
    battery = function_battery(torus_pair, kinds=('gaussian', 'eigenmode', 'band_limited'))
    assert list(battery) == ['gaussian', 'eigenmode', 'band_limited']
    for image in battery.values():
        assert_allclose(image.norm(), 1.0, rtol=1e-10)


def test_function_battery_validation(torus_pair):
    with pytest.raises(DomainError):
        function_battery(torus_pair, kinds=('square',))
    with pytest.raises(UnsupportedGeometryError):
        function_battery(point_system(flat(2), [np.zeros(2)], 1.0), kinds=('eigenmode',))


def test_identity_residual_eigenmode(torus_pair):
    image = function_battery(torus_pair, kinds=('eigenmode',))['eigenmode']
    assert identity_residual(image, -3.0, -7.0) < IDENTITY_TOLERANCE
    assert identity_residual(image, -3.0, -3.0) == 0.0


@pytest.mark.parametrize("manifold", [torus2(), ManifoldSpec.sphere(1.5, kappa=0.5)])
def test_principal_difference_identity(manifold):
    rng = np.random.default_rng(7)
    positions = sample_points(manifold, 3, seed=11)
    centers = CenterSet.build(positions, [0.7, 1.0, 1.3])
    for _ in range(5):
        first, second = -rng.uniform(0.5, 20.0, 2)
        assert principal_difference_residual(manifold, centers, first, second) <= ROUTE_TOLERANCE


def test_identity_on_flat_space_uses_matrix_form():
    system = point_system(flat(3), [np.zeros(3), np.array([1.0, 0.0, 0.0])], 1.0)
    report = check_resolvent_identity(system, -3.0, -7.0)
    assert report.grid == ('principal_difference',)
    assert report.verdict == Verdict.HOLDS


@pytest.mark.slow
def test_resolvent_identity_battery(torus_pair):
    report = check_resolvent_identity(torus_pair, -3.0, -7.0, threads=2)
    assert set(report.grid) == set(BATTERY) | {'principal_difference'}
    assert report.verdict == Verdict.HOLDS, report.details


def test_strong_limit_not_for_relativistic():
    with pytest.raises(UnsupportedGeometryError):
        check_strong_limit(relativistic_torus())
    with pytest.raises(DomainError):
        check_strong_limit(lee_system(), k_max=0)


@pytest.mark.slow
def test_strong_limit_torus():
    system = point_system(torus2(), [np.array([1.0, 2.0])], 1.0, modes=64)
    report = check_strong_limit(system, k_max=4096)
    assert report.grid[-1] == 4096
    values = report.value_array()
    assert np.all(np.diff(values[4:]) < 0)
    assert report.verdict != Verdict.VIOLATED, report.details


def test_strong_limit_lee():
    report = check_strong_limit(lee_system(), k_max=256)
    assert report.model == 'lee'
    assert report.values[-1].value < report.values[0].value


def test_symmetry_point_system():
    system = point_system(flat(2), [np.zeros(2), np.array([1.0, 0.5])], [1.0, 2.0])
    for energy in (complex(-5, 2), complex(-1, -3)):
        report = check_symmetry(system, energy)
        assert report.verdict == Verdict.HOLDS, report.details


def test_symmetry_lee():
    report = check_symmetry(lee_system(), complex(-2, 1))
    assert report.grid == ('vacuum', 'sector n=1')
    assert report.verdict == Verdict.HOLDS


def test_alpha_scaling_flat(fresh_registry):
    manifold = flat(3)
    report = check_alpha_scaling(manifold, single_center(manifold))
    assert report.verdict in PASSING, report.details
    assert_allclose(report.exponent_fit.exponent, -0.5, atol=1e-6)


def test_heat_bounds_flat_are_tight(fresh_registry):
    report = check_heat_bounds(flat(2))
    assert report.verdict == Verdict.HOLDS, report.details
    assert_allclose(report.value_array(), report.bound_array(), rtol=1e-12)


@pytest.mark.parametrize("manifold", [ManifoldSpec.sphere(1.0), ManifoldSpec.hyperbolic(1.0)])
def test_jacobian_bounds(manifold):
    report = check_jacobian_bounds(manifold)
    assert report.verdict == Verdict.HOLDS, report.details


def test_jacobian_bounds_need_two_dimensions():
    with pytest.raises(UnsupportedGeometryError):
        check_jacobian_bounds(flat(3))


def test_free_resolvent_bound_needs_three_dimensions():
    with pytest.raises(UnsupportedGeometryError):
        check_free_resolvent_bound(flat(2))


@pytest.mark.slow
@pytest.mark.parametrize("manifold", [flat(2), flat(3), torus2()])
def test_bound_shape_suite(manifold, fresh_registry):
    system = point_system(manifold, [np.zeros(manifold.dimension)], 1.0, modes=64)
    reports = [check_alpha_scaling(manifold, system.centers), check_phi_inverse_scaling(system),
               check_heat_bounds(manifold)]
    if manifold.dimension == 3:
        reports.append(check_free_resolvent_bound(manifold, system.centers.positions[0]))
    for report in reports:
        assert report.verdict in PASSING, f"{report.check}: {report.details}"


@pytest.mark.slow
def test_relativistic_routes_agree():
    for positions in ([np.zeros(2)], [np.zeros(2), np.array([2.0, 3.0])]):
        report = check_route_agreement(relativistic_torus(positions=positions))
        assert report.verdict == Verdict.HOLDS, report.details


@pytest.mark.slow
def test_decay_slope(fresh_registry):
    report = check_decay(relativistic_torus())
    assert abs(report.exponent_fit.exponent + 1.0) <= 0.1
    assert report.verdict in PASSING, report.details


@pytest.mark.slow
def test_lee_ground_state_acceptance(fresh_registry):
    spec = LeeModelSpec.default()
    basis = fock_basis(spec.manifold, 25, 2)
    report = ground_state_bound_check(spec, basis, 1, (0.1, 0.5, 1.0))
    assert report.verdict == Verdict.HOLDS_WITH_CALIBRATION, report.details
    assert abs(report.exponent_fit.exponent - 2.0) <= 0.2


@pytest.mark.slow
def test_suite_reports_every_check(fresh_registry):
    config = RunConfig(geometry=GeometryConfig('FlatSpace', 3), model=ModelConfig(centers=[[0.0, 0.0, 0.0]]))
    config = validate_config(config)
    reports = run_suite(config)
    checks = [report.check for report in reports]
    assert checks == ['resolvent_identity', 'symmetry', 'alpha_scaling', 'phi_inverse_scaling',
                      'free_resolvent_bound', 'heat_bounds']
    assert all(report.verdict != Verdict.VIOLATED for report in reports)
