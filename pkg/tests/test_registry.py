import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from deltaspec.constants import CALIBRATION_SAFETY, COMPACT_GAUSSIAN_WIDTH
from deltaspec.errors import ConfigurationError, MissingConstantsError
from deltaspec.manifold import ManifoldSpec
from deltaspec.registry import ConstantsRegistry, Provenance, geometry_from_key, geometry_key

TORUS = ManifoldSpec.torus((2 * math.pi, 2 * math.pi))
FLAT3 = ManifoldSpec.flat(3)


def test_flat_constants_are_exact():
    registry = ConstantsRegistry()
    constants = registry.heat_kernel_constants(FLAT3)
    assert_allclose(constants.c4, (4 * math.pi) ** -1.5)
    assert constants.c5 == 2.0
    assert math.isnan(constants.c1)
    assert dict(constants.provenance) == {'C4': 'exact', 'C5': 'exact'}


def test_compact_calibration():
    registry = ConstantsRegistry()
    constants = registry.heat_kernel_constants(TORUS)
    assert constants.c1 >= CALIBRATION_SAFETY
    assert constants.c3 == COMPACT_GAUSSIAN_WIDTH
    assert_allclose(constants.c2, CALIBRATION_SAFETY / (4 * math.pi))
    assert registry.constant(TORUS, 'C1').provenance == Provenance.CALIBRATED


def test_no_calibration_without_permission():
    registry = ConstantsRegistry(auto_calibrate=False)
    with pytest.raises(MissingConstantsError):
        registry.heat_kernel_constants(TORUS)
    with pytest.raises(MissingConstantsError):
        registry.constant(TORUS, 'C6')


def test_derived_constants():
    registry = ConstantsRegistry()
    assert_allclose(registry.constant(TORUS, 'C27').value, 1 / (2 * math.pi))
    assert registry.constant(TORUS, 'C16').value == 2 * math.pi
    assert registry.constant(TORUS, 'xi').provenance == Provenance.EXTERNAL
    c2 = registry.heat_kernel_constants(TORUS).c2
    assert_allclose(registry.constant(TORUS, 'C6').value, c2)
    assert_allclose(registry.constant(TORUS, 'A_prime').value, 2 * c2)
    assert_allclose(registry.constant(FLAT3, 'C30').value, 2 ** 1.5 * (4 * math.pi) ** -1.5)
    assert registry.constant(FLAT3, 'C6').provenance == Provenance.DERIVED


def test_missing_constant():
    with pytest.raises(MissingConstantsError):
        ConstantsRegistry().constant(TORUS, 'C46')


def test_calibrate_keeps_first_value():
    registry = ConstantsRegistry()
    first = registry.calibrate(TORUS, 'C46', [0.5, 2.0, np.nan])
    assert_allclose(first.value, CALIBRATION_SAFETY * 2.0)
    assert registry.calibrate(TORUS, 'C46', [10.0]) is first
    with pytest.raises(MissingConstantsError):
        registry.calibrate(TORUS, 'C47', [np.inf])


def test_record_and_clear():
    registry = ConstantsRegistry()
    registry.record(TORUS, 'C26', 3.0, Provenance.CALIBRATED, "test")
    assert registry.has(TORUS, 'C26')
    registry.clear()
    assert not registry.has(TORUS, 'C26')


def test_snapshot_round_trip():
    registry = ConstantsRegistry()
    registry.record(TORUS, 'C46', 1.25, Provenance.CALIBRATED, "sweep")
    registry.record(FLAT3, 'C4', 0.5, Provenance.EXACT)
    snapshot = registry.snapshot()
    assert snapshot['schema_version'] == 1
    loaded = ConstantsRegistry(auto_calibrate=False)
    loaded.load_snapshot(snapshot)
    assert loaded.constant(TORUS, 'C46') == registry.constant(TORUS, 'C46')
    assert loaded.snapshot() == snapshot


def test_snapshot_schema_checked():
    with pytest.raises(ConfigurationError):
        ConstantsRegistry().load_snapshot({'schema_version': 2, 'entries': []})


def test_geometry_keys():
    assert geometry_from_key(geometry_key(TORUS)) == TORUS
    with pytest.raises(ConfigurationError):
        geometry_from_key({'kind': 'Klein', 'dimension': 2, 'kappa': 0.5})
