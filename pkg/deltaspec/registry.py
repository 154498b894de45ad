"""
The constants registry.

Analytic bounds are stated with dimensionless constants whose exact values do
not matter for the existence theory, so every constant used by a bound check
is stored here together with where it came from:

* ``exact``: the bound form reproduces a closed-form kernel exactly.
* ``derived``: assembled from other registry constants by an explicit formula.
* ``calibrated``: the largest ratio of computed value to bound shape over a
  sweep, times :data:`~deltaspec.constants.CALIBRATION_SAFETY`.
* ``external-definition``: defined outside this library and reproduced here.
"""
import json
import math
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np

from deltaspec.constants import CALIBRATION_SAFETY, COMPACT_GAUSSIAN_WIDTH, DEFAULT_SEED, SCHEMA_VERSION
from deltaspec.errors import MissingConstantsError, ConfigurationError
from deltaspec.manifold import (ManifoldSpec, ManifoldKind, kernel_of_separation, make_point, exponential_map,
                                separation, geodesic_distance)
from deltaspec.setup import logger

CALIBRATION_TIMES = np.geomspace(1e-3, 10.0, 24)
CALIBRATION_DISTANCES = 20
CALIBRATION_DIRECTIONS = 8


class Provenance(Enum):
    EXACT = 'exact'
    DERIVED = 'derived'
    CALIBRATED = 'calibrated'
    EXTERNAL = 'external-definition'


@dataclass(frozen=True)
class Constant:
    name: str
    value: float
    provenance: Provenance
    note: str = ""


@dataclass(frozen=True)
class HeatKernelConstants:
    """
    Constants of the Gaussian heat-kernel bound. Compact geometries use
    ``c1, c2, c3``; Cartan-Hadamard geometries use ``c4, c5``.
    """
    c1: float = math.nan
    c2: float = math.nan
    c3: float = math.nan
    c4: float = math.nan
    c5: float = math.nan
    provenance: Tuple[Tuple[str, str], ...] = ()


def geometry_key(spec: ManifoldSpec) -> Dict[str, Any]:
    return {'kind': spec.kind.value, 'dimension': spec.dimension, 'sizes': list(spec.sizes), 'kappa': spec.kappa}


def geometry_from_key(data: Dict[str, Any]) -> ManifoldSpec:
    try:
        return ManifoldSpec(ManifoldKind(data['kind']), int(data['dimension']),
                            tuple(float(size) for size in data.get('sizes', ())), float(data['kappa']))
    except (KeyError, ValueError, TypeError) as error:
        raise ConfigurationError(f"Malformed geometry entry {data!r}: {error}", "constants snapshot")


def _calibration_pairs(spec: ManifoldSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Separations and distances covering the geometry from one base point."""
    base = make_point(spec, *([0.0] * spec.dimension)) if spec.kind in (ManifoldKind.FLAT_TORUS,
                                                                       ManifoldKind.FLAT_SPACE) \
        else make_point(spec, 0.3, 0.2)
    if spec.kind == ManifoldKind.FLAT_TORUS:
        reach = 0.5 * math.sqrt(sum(side ** 2 for side in spec.sizes))
    elif spec.kind == ManifoldKind.SPHERE2:
        reach = math.pi * spec.radius
    else:
        reach = 8.0 * spec.length_scale
    distances = np.linspace(0.0, reach, CALIBRATION_DISTANCES)
    rng = np.random.default_rng(DEFAULT_SEED)
    directions = rng.normal(size=(CALIBRATION_DIRECTIONS, spec.dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    tangents = (distances[:, None, None] * directions[None, :, :]).reshape(-1, spec.dimension)
    points = exponential_map(spec, base, tangents)
    return separation(spec, base, points), np.asarray(geodesic_distance(spec, base, points))


def _bounded_ratio(kernel: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """``kernel * exp(exponent)`` without overflow where the kernel has underflowed."""
    return np.where(kernel > 0, kernel * np.exp(np.minimum(exponent, 700.0)), 0.0)


def calibrate_heat_kernel(spec: ManifoldSpec) -> Dict[str, Constant]:
    """
    Fits the heat-kernel bound constants for one geometry over a grid of
    distances and times ``t in [1e-3, 10] * length_scale**2 / kappa``.
    """
    dimension = spec.dimension
    kappa = spec.kappa
    if spec.kind == ManifoldKind.FLAT_SPACE:
        return {'C4': Constant('C4', (4 * math.pi) ** (-dimension / 2), Provenance.EXACT,
                               "flat Gaussian kernel reproduced exactly"),
                'C5': Constant('C5', 2.0, Provenance.EXACT, "flat Gaussian kernel reproduced exactly")}
    separations, distances = _calibration_pairs(spec)
    times = CALIBRATION_TIMES * spec.length_scale ** 2 / kappa
    kernel = kernel_of_separation(spec, separations, times[:, None])
    t_grid = times[:, None]
    d_grid = distances[None, :]
    if spec.is_compact:
        c3 = COMPACT_GAUSSIAN_WIDTH
        c2 = CALIBRATION_SAFETY * (4 * math.pi) ** (-dimension / 2)
        ratio = _bounded_ratio(kernel, d_grid ** 2 / (2 * kappa * c3 * t_grid))
        excess = spec.volume * (ratio - c2 / (kappa * t_grid) ** (dimension / 2))
        c1 = CALIBRATION_SAFETY * max(1.0, float(np.max(excess)))
        logger.info(f"Calibrated heat-kernel bound on {spec.describe()}: C1={c1:.6g}, C2={c2:.6g}, C3={c3:g}")
        return {'C1': Constant('C1', c1, Provenance.CALIBRATED, "largest residual over the (d, t) grid"),
                'C2': Constant('C2', c2, Provenance.CALIBRATED, "safety factor on the flat short-time constant"),
                'C3': Constant('C3', c3, Provenance.CALIBRATED, "fixed Gaussian width above the flat value 2")}
    ratio = _bounded_ratio(kernel, d_grid ** 2 / (4 * kappa * t_grid)) * (kappa * t_grid) ** (dimension / 2)
    c4 = CALIBRATION_SAFETY * float(np.max(ratio))
    logger.info(f"Calibrated heat-kernel bound on {spec.describe()}: C4={c4:.6g}, C5=2")
    return {'C4': Constant('C4', c4, Provenance.CALIBRATED, "largest ratio over the (d, t) grid"),
            'C5': Constant('C5', 2.0, Provenance.EXACT, "flat Gaussian width")}


class ConstantsRegistry:
    """
    Thread-safe store of bound constants, keyed by geometry. Heat-kernel
    constants are calibrated on first use when ``auto_calibrate`` is set.
    """
    def __init__(self, auto_calibrate: bool = True) -> None:
        self.auto_calibrate = auto_calibrate
        self._entries: Dict[ManifoldSpec, Dict[str, Constant]] = {}
        self._lock = threading.RLock()

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def record(self, spec: ManifoldSpec, name: str, value: float, provenance: Provenance,
               note: str = "") -> Constant:
        constant = Constant(name, float(value), provenance, note)
        with self._lock:
            self._entries.setdefault(spec, {})[name] = constant
        return constant

    def has(self, spec: ManifoldSpec, name: str) -> bool:
        with self._lock:
            return name in self._entries.get(spec, {})

    def _ensure_heat_kernel(self, spec: ManifoldSpec) -> Dict[str, Constant]:
        with self._lock:
            entry = self._entries.setdefault(spec, {})
            needed = ('C1', 'C2', 'C3') if spec.is_compact else ('C4', 'C5')
            if all(name in entry for name in needed):
                return entry
            if not self.auto_calibrate:
                raise MissingConstantsError(f"No heat-kernel constants registered for {spec.describe()} "
                                            f"and automatic calibration is off")
            entry.update(calibrate_heat_kernel(spec))
            return entry

    def heat_kernel_constants(self, spec: ManifoldSpec) -> HeatKernelConstants:
        """
        :raises MissingConstantsError: If nothing is registered and calibration is off.
        """
        entry = self._ensure_heat_kernel(spec)
        values = {name.lower(): constant.value for name, constant in entry.items()
                  if name in ('C1', 'C2', 'C3', 'C4', 'C5')}
        provenance = tuple(sorted((name, constant.provenance.value) for name, constant in entry.items()
                                  if name in ('C1', 'C2', 'C3', 'C4', 'C5')))
        return HeatKernelConstants(provenance=provenance, **values)

    def constant(self, spec: ManifoldSpec, name: str) -> Constant:
        """
        Looks up a constant, deriving it from the heat-kernel constants when a
        formula exists.

        :raises MissingConstantsError: For calibrated constants nobody has fitted yet.
        """
        with self._lock:
            entry = self._entries.get(spec, {})
            if name in entry:
                return entry[name]
        derived = self._derive(spec, name)
        if derived is None:
            raise MissingConstantsError(f"Constant {name} for {spec.describe()} has not been calibrated; "
                                        f"run the corresponding check or the calibration tool first")
        with self._lock:
            self._entries.setdefault(spec, {})[name] = derived
        return derived

    def _derive(self, spec: ManifoldSpec, name: str) -> Optional[Constant]:
        dimension = spec.dimension
        if name == 'xi':
            return Constant('xi', spec.spectral_gap, Provenance.EXTERNAL,
                            "bottom of the L2 spectrum of -kappa*Laplacian")
        if name == 'C27':
            return Constant('C27', 1 / (2 * math.pi), Provenance.DERIVED, "leading Weyl density in 2D")
        if name == 'C16' and spec.kind in (ManifoldKind.FLAT_TORUS, ManifoldKind.FLAT_SPACE):
            return Constant('C16', 2 * math.pi, Provenance.DERIVED, "inverse of the Weyl-leading logarithm")
        if name not in ('C6', 'C12', 'C14', 'A_prime', 'C30'):
            return None
        entry = self._ensure_heat_kernel(spec)
        if name == 'C6':
            base = entry['C2'].value if spec.is_compact else entry['C4'].value
            return Constant('C6', base * math.gamma(2 - dimension / 2), Provenance.DERIVED,
                            "C2 * Gamma(2 - D/2)" if spec.is_compact else "C4 * Gamma(2 - D/2)")
        if name == 'C12' and spec.is_compact:
            value = 2 ** 1.5 * math.sqrt(math.pi * entry['C3'].value) * entry['C2'].value
            return Constant('C12', value, Provenance.DERIVED, "2^(3/2) sqrt(pi C3) C2")
        if name == 'C14' and not spec.is_compact:
            value = 2 ** 1.5 * math.sqrt(math.pi * entry['C5'].value) * entry['C4'].value
            return Constant('C14', value, Provenance.DERIVED, "2^(3/2) sqrt(pi C5) C4")
        if name == 'A_prime' and spec.is_compact:
            return Constant('A_prime', 2 ** (dimension / 2) * entry['C2'].value, Provenance.DERIVED,
                            "2^(D/2) C2")
        if name == 'C30' and not spec.is_compact:
            return Constant('C30', 2 ** (dimension / 2) * entry['C4'].value, Provenance.DERIVED, "2^(D/2) C4")
        return None

    def calibrate(self, spec: ManifoldSpec, name: str, ratios: Iterable[float], note: str = "") -> Constant:
        """
        Records ``CALIBRATION_SAFETY * max(ratios)`` as a calibrated constant,
        unless a value is already registered.
        """
        with self._lock:
            existing = self._entries.get(spec, {}).get(name)
            if existing is not None:
                return existing
            values = [float(ratio) for ratio in ratios if np.isfinite(ratio)]
            if not values:
                raise MissingConstantsError(f"Cannot calibrate {name} on {spec.describe()} from an empty sweep")
            constant = self.record(spec, name, CALIBRATION_SAFETY * max(values), Provenance.CALIBRATED,
                                   note or "largest ratio over the calibration sweep")
        logger.info(f"Calibrated {name}={constant.value:.6g} on {spec.describe()}")
        return constant

    def snapshot(self) -> Dict[str, Any]:
        with self._lock:
            entries = [{'geometry': geometry_key(spec),
                        'constants': {name: {'value': constant.value, 'provenance': constant.provenance.value,
                                             'note': constant.note}
                                      for name, constant in sorted(constants.items())}}
                       for spec, constants in self._entries.items()]
        entries.sort(key=lambda item: json.dumps(item['geometry'], sort_keys=True))
        return {'schema_version': SCHEMA_VERSION, 'entries': entries}

    def load_snapshot(self, data: Dict[str, Any]) -> None:
        if data.get('schema_version') != SCHEMA_VERSION:
            raise ConfigurationError(f"Unsupported constants snapshot schema {data.get('schema_version')!r}, "
                                     f"expected {SCHEMA_VERSION}", "constants snapshot")
        for entry in data.get('entries', []):
            spec = geometry_from_key(entry['geometry'])
            for name, item in entry['constants'].items():
                self.record(spec, name, item['value'], Provenance(item['provenance']), item.get('note', ""))


MAIN_REGISTRY = ConstantsRegistry()


def get_registry() -> ConstantsRegistry:
    return MAIN_REGISTRY


def set_registry(registry: ConstantsRegistry) -> None:
    global MAIN_REGISTRY
    MAIN_REGISTRY = registry
