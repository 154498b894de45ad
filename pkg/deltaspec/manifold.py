"""
Model geometries: flat space, the flat torus, the round sphere and the
hyperbolic plane.

Points are stored in intrinsic coordinates: fundamental-domain coordinates on
the torus and in flat space, unit vectors on the sphere and unit-hyperboloid
vectors on the hyperbolic plane. Distances are exact in each representation.
Heat kernels follow the convention ``dK/dt = kappa * Laplacian(K)``.
"""
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, Optional, Tuple

import numpy as np
from scipy import special

from deltaspec.constants import (TORUS_CROSSOVER, SPHERE_SERIES_THRESHOLD, LEGENDRE_TAIL_EXPONENT,
                                 MODE_SUM_TARGET_COUNT, MODE_SUM_SPAN, MODE_SUM_SPHERE_CUTOFF, DEFAULT_SPLIT_POINT)
from deltaspec.errors import DomainError, UnsupportedGeometryError, TruncationError
from deltaspec.specialfn import frozen, laplace_integral, semi_infinite_rule, sn
from deltaspec.setup import logger

IMAGE_TERMS = 8
HYPERBOLIC_NODES = 48
HYPERBOLIC_CHUNK = 2048


class ManifoldKind(Enum):
    FLAT_SPACE = 'FlatSpace'
    FLAT_TORUS = 'FlatTorus'
    SPHERE2 = 'Sphere2'
    HYPERBOLIC2 = 'Hyperbolic2'


class ManifoldClass(Enum):
    COMPACT = 'Compact'
    CARTAN_HADAMARD = 'CartanHadamard'


@dataclass(frozen=True)
class ManifoldSpec:
    """
    A concrete geometry together with the diffusion coefficient of its heat
    kernel.

    :ivar kind: Which model geometry.
    :ivar dimension: 2 or 3 (the sphere and hyperbolic plane are 2D only).
    :ivar sizes: Torus side lengths, or the single radius of the sphere or
        hyperbolic plane; empty for flat space.
    :ivar kappa: Diffusion coefficient; ``1/(2m)`` for non-relativistic
        particles of mass ``m`` and ``1`` for the relativistic convention.
    """
    kind: ManifoldKind
    dimension: int
    sizes: Tuple[float, ...] = ()
    kappa: float = 0.5

    def __post_init__(self) -> None:
        if self.dimension not in (2, 3):
            raise DomainError(f"Only dimensions 2 and 3 are supported, got {self.dimension}")
        if not self.kappa > 0:
            raise DomainError(f"The diffusion coefficient must be positive, got {self.kappa!r}")
        if self.kind in (ManifoldKind.SPHERE2, ManifoldKind.HYPERBOLIC2):
            if self.dimension != 2:
                raise DomainError(f"{self.kind.value} is two dimensional, got dimension {self.dimension}")
            if len(self.sizes) != 1 or not self.sizes[0] > 0:
                raise DomainError(f"{self.kind.value} needs one positive radius, got {self.sizes!r}")
        elif self.kind == ManifoldKind.FLAT_TORUS:
            if len(self.sizes) != self.dimension or min(self.sizes) <= 0:
                raise DomainError(f"A {self.dimension}D torus needs {self.dimension} positive side lengths, "
                                  f"got {self.sizes!r}")
        elif self.sizes:
            raise DomainError(f"Flat space takes no size parameters, got {self.sizes!r}")

    @classmethod
    def flat(cls, dimension: int, kappa: float = 0.5) -> 'ManifoldSpec':
        return cls(ManifoldKind.FLAT_SPACE, dimension, (), kappa)

    @classmethod
    def torus(cls, sides: Tuple[float, ...], kappa: float = 0.5) -> 'ManifoldSpec':
        return cls(ManifoldKind.FLAT_TORUS, len(sides), tuple(float(side) for side in sides), kappa)

    @classmethod
    def sphere(cls, radius: float = 1.0, kappa: float = 0.5) -> 'ManifoldSpec':
        return cls(ManifoldKind.SPHERE2, 2, (float(radius),), kappa)

    @classmethod
    def hyperbolic(cls, radius: float = 1.0, kappa: float = 0.5) -> 'ManifoldSpec':
        return cls(ManifoldKind.HYPERBOLIC2, 2, (float(radius),), kappa)

    @property
    def mass(self) -> float:
        """The particle mass ``m`` with ``kappa = 1/(2m)``."""
        return 1 / (2 * self.kappa)

    @property
    def radius(self) -> float:
        if self.kind not in (ManifoldKind.SPHERE2, ManifoldKind.HYPERBOLIC2):
            raise DomainError(f"{self.kind.value} has no radius")
        return self.sizes[0]

    @property
    def manifold_class(self) -> ManifoldClass:
        if self.kind in (ManifoldKind.FLAT_TORUS, ManifoldKind.SPHERE2):
            return ManifoldClass.COMPACT
        return ManifoldClass.CARTAN_HADAMARD

    @property
    def is_compact(self) -> bool:
        return self.manifold_class == ManifoldClass.COMPACT

    @property
    def volume(self) -> float:
        if self.kind == ManifoldKind.FLAT_TORUS:
            return math.prod(self.sizes)
        if self.kind == ManifoldKind.SPHERE2:
            return 4 * math.pi * self.radius ** 2
        return math.inf

    @property
    def curvature(self) -> float:
        if self.kind == ManifoldKind.SPHERE2:
            return 1 / self.radius ** 2
        if self.kind == ManifoldKind.HYPERBOLIC2:
            return -1 / self.radius ** 2
        return 0.0

    @property
    def ricci_lower(self) -> float:
        """The lower Ricci bound ``K_1``."""
        return self.curvature

    @property
    def sectional_upper(self) -> float:
        """The upper sectional bound ``K_2``."""
        return self.curvature

    @property
    def injectivity_radius(self) -> float:
        if self.kind == ManifoldKind.FLAT_TORUS:
            return min(self.sizes) / 2
        if self.kind == ManifoldKind.SPHERE2:
            return math.pi * self.radius
        return math.inf

    @property
    def spectral_gap(self) -> float:
        """Bottom of the spectrum of ``-kappa * Laplacian`` on L^2 (zero unless hyperbolic)."""
        if self.kind == ManifoldKind.HYPERBOLIC2:
            return self.kappa * (self.dimension - 1) ** 2 / (4 * self.radius ** 2)
        return 0.0

    @property
    def length_scale(self) -> float:
        """A natural length: the smallest side, the radius, or 1 in flat space."""
        if self.kind == ManifoldKind.FLAT_TORUS:
            return min(self.sizes)
        if self.kind == ManifoldKind.FLAT_SPACE:
            return 1.0
        return self.radius

    @property
    def point_size(self) -> int:
        if self.kind in (ManifoldKind.SPHERE2, ManifoldKind.HYPERBOLIC2):
            return 3
        return self.dimension

    def describe(self) -> str:
        sizes = ', '.join(f"{size:g}" for size in self.sizes)
        return f"{self.kind.value}(D={self.dimension}{', ' + sizes if sizes else ''}, kappa={self.kappa:g})"


# Points ---------------------------------------------------------------------

def make_point(spec: ManifoldSpec, *coordinates: float) -> np.ndarray:
    """
    Builds a point from convenient coordinates: Cartesian coordinates in flat
    space and on the torus (wrapped into the fundamental domain), the polar
    and azimuthal angles on the sphere, and geodesic polar coordinates
    ``(r, phi)`` around the hyperboloid vertex on the hyperbolic plane.
    """
    if spec.kind == ManifoldKind.SPHERE2:
        theta, phi = coordinates
        return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    if spec.kind == ManifoldKind.HYPERBOLIC2:
        r, phi = coordinates
        r = r / spec.radius
        return np.array([math.cosh(r), math.sinh(r) * math.cos(phi), math.sinh(r) * math.sin(phi)])
    if len(coordinates) != spec.dimension:
        raise DomainError(f"{spec.describe()} points need {spec.dimension} coordinates, got {coordinates!r}")
    point = np.array(coordinates, dtype=float)
    if spec.kind == ManifoldKind.FLAT_TORUS:
        point = np.mod(point, np.array(spec.sizes))
    return point


def _minkowski(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] + x[..., 2] * y[..., 2]


def torus_displacement(spec: ManifoldSpec, x: Any, y: Any) -> np.ndarray:
    """Per-axis distance to the nearest image, in ``[0, L_i/2]``."""
    sides = np.array(spec.sizes)
    delta = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.abs(delta - sides * np.round(delta / sides))


def geodesic_distance(spec: ManifoldSpec, x: Any, y: Any) -> Any:
    """
    Geodesic distance between points (or broadcastable arrays of points).

    :param spec: The geometry.
    :param x: A point, shape ``(..., point_size)``.
    :param y: A point, shape ``(..., point_size)``.
    :return: The distance, shape ``(...)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.kind == ManifoldKind.FLAT_TORUS:
        distance = np.sqrt(np.sum(torus_displacement(spec, x, y) ** 2, axis=-1))
    elif spec.kind == ManifoldKind.SPHERE2:
        cross = np.linalg.norm(np.cross(x, y), axis=-1)
        distance = spec.radius * np.arctan2(cross, np.sum(x * y, axis=-1))
    elif spec.kind == ManifoldKind.HYPERBOLIC2:
        distance = spec.radius * np.arccosh(np.maximum(-_minkowski(x, y), 1.0))
    else:
        distance = np.linalg.norm(x - y, axis=-1)
    return distance.item() if np.ndim(distance) == 0 else distance


def tangent_frame(spec: ManifoldSpec, base: np.ndarray) -> np.ndarray:
    """Orthonormal tangent vectors at ``base`` as rows, in ambient coordinates."""
    if spec.kind == ManifoldKind.SPHERE2:
        helper = np.array([1.0, 0.0, 0.0]) if abs(base[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        first = helper - np.dot(helper, base) * base
        first /= np.linalg.norm(first)
        return np.array([first, np.cross(base, first)])
    if spec.kind == ManifoldKind.HYPERBOLIC2:
        r = math.acosh(max(base[0], 1.0))
        phi = math.atan2(base[2], base[1])
        return np.array([[math.sinh(r), math.cosh(r) * math.cos(phi), math.cosh(r) * math.sin(phi)],
                         [0.0, -math.sin(phi), math.cos(phi)]])
    return np.eye(spec.dimension)


def exponential_map(spec: ManifoldSpec, base: np.ndarray, tangent: Any) -> np.ndarray:
    """
    Follows the geodesic from ``base`` along ``tangent`` (tangent-frame
    components, length equal to the geodesic distance travelled).

    ``tangent`` may carry leading batch axes.
    """
    tangent = np.asarray(tangent, dtype=float)
    if spec.kind in (ManifoldKind.FLAT_SPACE, ManifoldKind.FLAT_TORUS):
        point = base + tangent
        if spec.kind == ManifoldKind.FLAT_TORUS:
            point = np.mod(point, np.array(spec.sizes))
        return point
    frame = tangent_frame(spec, base)
    length = np.linalg.norm(tangent, axis=-1, keepdims=True)
    safe = np.where(length > 0, length, 1.0)
    direction = (tangent / safe) @ frame
    angle = length / spec.radius
    if spec.kind == ManifoldKind.SPHERE2:
        return np.cos(angle) * base + np.sin(angle) * direction
    return np.cosh(angle) * base + np.sinh(angle) * direction


def geodesic_circle_length(spec: ManifoldSpec, center: np.ndarray, r: float, samples: int = 1024) -> float:
    """
    Perimeter of the geodesic circle of radius ``r`` (2D geometries), from the
    polygon through ``samples`` points, Richardson-extrapolated against half
    as many points.
    """
    if spec.dimension != 2:
        raise UnsupportedGeometryError(f"Geodesic circles are measured on 2D geometries, got {spec.describe()}")

    def polygon(count: int) -> float:
        angles = 2 * math.pi * np.arange(count + 1) / count
        points = exponential_map(spec, center, r * np.stack((np.cos(angles), np.sin(angles)), axis=-1))
        return float(np.sum(geodesic_distance(spec, points[:-1], points[1:])))

    fine, coarse = polygon(samples), polygon(samples // 2)
    return (4 * fine - coarse) / 3


# Heat kernels -----------------------------------------------------------------

def _check_times(t: Any) -> np.ndarray:
    times = np.asarray(t, dtype=float)
    if np.any(times <= 0):
        raise DomainError(f"Heat kernels need positive times, got {t!r}")
    return times


def flat_kernel(dimension: int, kappa: float, distance: Any, t: np.ndarray) -> np.ndarray:
    return (4 * math.pi * kappa * t) ** (-dimension / 2) * np.exp(-np.asarray(distance) ** 2 / (4 * kappa * t))


def _theta_images(delta: np.ndarray, t: np.ndarray, side: float, kappa: float) -> np.ndarray:
    spread = 4 * kappa * t
    total = np.exp(-delta ** 2 / spread)
    for n in range(1, IMAGE_TERMS + 1):
        total = total + np.exp(-(delta + n * side) ** 2 / spread) + np.exp(-(delta - n * side) ** 2 / spread)
    return total / np.sqrt(math.pi * spread)


def _theta_modes(delta: np.ndarray, t: np.ndarray, side: float, kappa: float) -> np.ndarray:
    total = np.ones(np.broadcast(delta, t).shape)
    for n in range(1, IMAGE_TERMS + 1):
        wave = 2 * math.pi * n / side
        total = total + 2 * np.cos(wave * delta) * np.exp(-kappa * wave ** 2 * t)
    return total / side


def torus_kernel_images(spec: ManifoldSpec, displacement: Any, t: Any) -> np.ndarray:
    """Torus kernel as a product of per-axis image sums."""
    displacement = np.asarray(displacement, dtype=float)
    times = _check_times(t)
    result = np.ones(np.broadcast(displacement[..., 0], times).shape)
    for axis, side in enumerate(spec.sizes):
        result = result * _theta_images(displacement[..., axis], times, side, spec.kappa)
    return result


def torus_kernel_modes(spec: ManifoldSpec, displacement: Any, t: Any) -> np.ndarray:
    """Torus kernel as a product of per-axis Fourier series."""
    displacement = np.asarray(displacement, dtype=float)
    times = _check_times(t)
    result = np.ones(np.broadcast(displacement[..., 0], times).shape)
    for axis, side in enumerate(spec.sizes):
        result = result * _theta_modes(displacement[..., axis], times, side, spec.kappa)
    return result


def _torus_kernel(spec: ManifoldSpec, displacement: np.ndarray, times: np.ndarray) -> np.ndarray:
    result = np.ones(np.broadcast(displacement[..., 0], times).shape)
    for axis, side in enumerate(spec.sizes):
        delta = displacement[..., axis]
        images = spec.kappa * times <= TORUS_CROSSOVER * side ** 2
        with np.errstate(under='ignore'):
            factor = np.where(images, _theta_images(delta, times, side, spec.kappa),
                              _theta_modes(delta, times, side, spec.kappa))
        result = result * factor
    return result


def _legendre_heat_series(cosine: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """``sum_l (2l+1) P_l(cosine) exp(-l(l+1) tau)``, truncated by the Gaussian tail."""
    cosine, tau = np.broadcast_arrays(cosine, tau)
    l_max = int(math.ceil(math.sqrt(LEGENDRE_TAIL_EXPONENT / float(np.min(tau))))) + 2
    previous = np.ones(cosine.shape)
    current = cosine.copy()
    total = previous + 3 * current * np.exp(-2 * tau)
    for l in range(1, l_max):
        following = ((2 * l + 1) * cosine * current - l * previous) / (l + 1)
        previous, current = current, following
        total = total + (2 * l + 3) * current * np.exp(-(l + 1) * (l + 2) * tau)
    return total


def _sphere_kernel(spec: ManifoldSpec, angle: np.ndarray, times: np.ndarray) -> np.ndarray:
    angle, times = np.broadcast_arrays(np.asarray(angle, dtype=float), times)
    radius = spec.radius
    tau = spec.kappa * times / radius ** 2
    result = np.empty(angle.shape)
    series = tau >= SPHERE_SERIES_THRESHOLD
    if np.any(series):
        result[series] = _legendre_heat_series(np.cos(angle[series]), tau[series]) / (4 * math.pi * radius ** 2)
    small = ~series
    if np.any(small):
        theta, short = angle[small], tau[small]
        sine = np.sin(theta)
        ratio = np.where(theta < 1e-8, 1.0, theta / np.maximum(sine, 1e-300))
        correction = 1 + short / 3 + short ** 2 / 15 + 4 * short ** 3 / 315
        with np.errstate(under='ignore'):
            gaussian = np.exp(-theta ** 2 / (4 * short)) / (4 * math.pi * radius ** 2 * short)
        result[small] = gaussian * np.sqrt(ratio) * correction
    return result


def mckean_kernel(r: Any, tau: Any, nodes: int = HYPERBOLIC_NODES) -> np.ndarray:
    """
    Heat kernel of the unit hyperbolic plane (``dK/dtau = Laplacian K``) at
    geodesic distance ``r``, from the McKean integral over ``s = r + w``.
    """
    r, tau = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(tau, dtype=float))
    flat_r, flat_tau = r.ravel(), tau.ravel()
    rule = semi_infinite_rule(nodes, DEFAULT_SPLIT_POINT)
    output = np.empty(flat_r.shape)
    for start in range(0, flat_r.size, HYPERBOLIC_CHUNK):
        rr = flat_r[start:start + HYPERBOLIC_CHUNK, None]
        tt = flat_tau[start:start + HYPERBOLIC_CHUNK, None]
        rate = rr / (2 * tt) + 0.5 + 1 / (2 * np.sqrt(tt))
        w = rule.nodes[None, :] / rate
        exponent = -rr * w / (2 * tt) - w ** 2 / (4 * tt) + rate * w - (rr + w) / 2
        shape = np.sqrt(-np.expm1(-2 * rr - w) * -np.expm1(-w) / 2)
        with np.errstate(under='ignore'):
            integrand = (rr + w) * np.exp(exponent) / shape
        integral = np.sum(rule.weights[None, :] * integrand, axis=1) / rate[:, 0]
        prefactor = math.sqrt(2) * np.exp(-tt[:, 0] / 4 - rr[:, 0] ** 2 / (4 * tt[:, 0])) \
            / (4 * math.pi * tt[:, 0]) ** 1.5
        output[start:start + HYPERBOLIC_CHUNK] = prefactor * integral
    return output.reshape(r.shape)


def kernel_of_separation(spec: ManifoldSpec, separation: Any, t: Any) -> np.ndarray:
    """
    Heat kernel as a function of the precomputed separation: the per-axis
    displacement on the torus, the geodesic distance elsewhere. ``t``
    broadcasts against the separation batch.
    """
    times = _check_times(t)
    separation = np.asarray(separation, dtype=float)
    if spec.kind == ManifoldKind.FLAT_TORUS:
        return _torus_kernel(spec, separation, times)
    if spec.kind == ManifoldKind.SPHERE2:
        return _sphere_kernel(spec, separation / spec.radius, times)
    if spec.kind == ManifoldKind.HYPERBOLIC2:
        radius = spec.radius
        return mckean_kernel(separation / radius, spec.kappa * times / radius ** 2) / radius ** 2
    with np.errstate(under='ignore'):
        return flat_kernel(spec.dimension, spec.kappa, separation, times)


def separation(spec: ManifoldSpec, x: Any, y: Any) -> np.ndarray:
    """The argument :func:`kernel_of_separation` expects for the pair ``(x, y)``."""
    if spec.kind == ManifoldKind.FLAT_TORUS:
        return torus_displacement(spec, x, y)
    return np.asarray(geodesic_distance(spec, x, y))


def heat_kernel(spec: ManifoldSpec, x: Any, y: Any, t: Any) -> Any:
    """
    The heat kernel ``K_t(x, y)``.

    :param spec: The geometry.
    :param x: A point (or batch of points).
    :param y: A point (or batch of points).
    :param t: Positive time(s), broadcast against the point batch.
    :return: The kernel values.
    :raises DomainError: For nonpositive times.
    """
    values = kernel_of_separation(spec, separation(spec, x, y), t)
    return values.item() if np.ndim(values) == 0 else values


# Bounds -----------------------------------------------------------------------

def heat_kernel_upper_bound(spec: ManifoldSpec, x: Any, y: Any, t: Any) -> Any:
    """
    The Gaussian upper bound on the heat kernel, with constants from the
    registry: ``[C1/V + C2/(t/2m)^(D/2)] exp(-m d^2/(C3 t))`` on compact
    geometries and ``C4/(t/2m)^(D/2) exp(-m d^2/(C5 t))`` otherwise.

    :raises MissingConstantsError: If the registry has no entry for ``spec``.
    """
    from deltaspec.registry import get_registry
    times = _check_times(t)
    constants = get_registry().heat_kernel_constants(spec)
    distance = np.asarray(geodesic_distance(spec, x, y))
    mass = spec.mass
    dimension = spec.dimension
    with np.errstate(under='ignore'):
        if spec.is_compact:
            values = ((constants.c1 / spec.volume + constants.c2 / (times / (2 * mass)) ** (dimension / 2))
                      * np.exp(-mass * distance ** 2 / (constants.c3 * times)))
        else:
            values = (constants.c4 / (times / (2 * mass)) ** (dimension / 2)
                      * np.exp(-mass * distance ** 2 / (constants.c5 * times)))
    return values.item() if np.ndim(values) == 0 else values


def jacobian_bounds(spec: ManifoldSpec, r: float) -> Tuple[float, float]:
    """
    Bishop-Gunther bounds ``sn_K2(r)^(D-1)/r^(D-1) <= J(r) <= sn_K1(r)^(D-1)/r^(D-1)``.

    :raises DomainError: Outside ``(0, injectivity radius)``.
    """
    if not 0 < r < spec.injectivity_radius:
        raise DomainError(f"jacobian_bounds needs 0 < r < {spec.injectivity_radius!r} on {spec.describe()}, "
                          f"got {r!r}")
    power = spec.dimension - 1
    lower = (sn(spec.sectional_upper, r) / r) ** power
    upper = (sn(spec.ricci_lower, r) / r) ** power
    return float(lower), float(upper)


def sn_ratio_bounds(first_curvature: float, second_curvature: float, delta: float) -> Tuple[float, float]:
    """
    Bounds ``A_- <= sn_K1(r)/sn_K2(r) <= A_+`` over ``0 < r <= delta``. The
    ratio is monotone in ``r`` and tends to 1 at the origin, so the extremes
    sit at the two ends.
    """
    if not delta > 0:
        raise DomainError(f"sn_ratio_bounds needs a positive radius, got {delta!r}")
    ratio = float(sn(first_curvature, delta) / sn(second_curvature, delta))
    return min(1.0, ratio), max(1.0, ratio)


# Spectral data ------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralBasis:
    """
    The lowest ``mode_count`` Laplace-Beltrami eigenfunctions of a compact
    geometry, eigenvalues ascending with multiplicity.

    :ivar labels: Integer lattice vectors (torus) or ``(l, m)`` pairs (sphere).
    """
    spec: ManifoldSpec
    eigenvalues: np.ndarray
    labels: np.ndarray
    is_complex: bool

    @property
    def mode_count(self) -> int:
        return len(self.eigenvalues)

    @property
    def completeness_time(self) -> float:
        """Time beyond which the truncated heat kernel is complete to about 1e-10."""
        top = float(self.eigenvalues[-1])
        if top == 0:
            return math.inf
        return 23.0 / (self.spec.kappa * top)

    def evaluate(self, points: Any) -> np.ndarray:
        """Eigenfunction values, shape ``(..., mode_count)``."""
        points = np.asarray(points, dtype=float)
        if self.spec.kind == ManifoldKind.FLAT_TORUS:
            waves = 2 * math.pi * self.labels / np.array(self.spec.sizes)
            return np.exp(1j * points @ waves.T) / math.sqrt(self.spec.volume)
        return _real_spherical_harmonics(self.labels, points) / self.spec.radius


def _real_spherical_harmonics(labels: np.ndarray, points: np.ndarray) -> np.ndarray:
    cosine = np.clip(points[..., 2], -1.0, 1.0)
    azimuth = np.arctan2(points[..., 1], points[..., 0])
    columns = []
    for degree, order in labels:
        size = abs(int(order))
        norm = math.sqrt((2 * degree + 1) / (4 * math.pi)
                         * math.exp(math.lgamma(degree - size + 1) - math.lgamma(degree + size + 1)))
        legendre = special.lpmv(size, degree, cosine)
        if order > 0:
            columns.append(math.sqrt(2) * norm * legendre * np.cos(size * azimuth))
        elif order < 0:
            columns.append(math.sqrt(2) * norm * legendre * np.sin(size * azimuth))
        else:
            columns.append(norm * legendre)
    return np.stack(columns, axis=-1)


@lru_cache(maxsize=16)
def _torus_lattice(sides: Tuple[float, ...], limit: float) -> Tuple[np.ndarray, np.ndarray]:
    """Lattice vectors with eigenvalue at most ``limit``, in deterministic order."""
    sides_array = np.array(sides)
    reach = np.floor(np.sqrt(limit) * sides_array / (2 * math.pi)).astype(int)
    axes = [np.arange(-n, n + 1) for n in reach]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, len(sides))
    eigenvalues = np.sum((2 * math.pi * grid / sides_array) ** 2, axis=1)
    keep = eigenvalues <= limit * (1 + 1e-12)
    grid, eigenvalues = grid[keep], eigenvalues[keep]
    order = np.lexsort(tuple(grid[:, axis] for axis in reversed(range(grid.shape[1]))) + (eigenvalues,))
    return frozen(grid[order]), frozen(eigenvalues[order])


def spectral_basis(spec: ManifoldSpec, mode_count: int) -> SpectralBasis:
    """
    The first ``mode_count`` eigenmodes: plane waves on the torus, real
    spherical harmonics on the sphere.

    :raises UnsupportedGeometryError: On Cartan-Hadamard geometries.
    """
    if mode_count < 1:
        raise DomainError(f"spectral_basis needs at least one mode, got {mode_count}")
    if spec.kind == ManifoldKind.FLAT_TORUS:
        limit = (2 * math.pi / min(spec.sizes)) ** 2
        while True:
            labels, eigenvalues = _torus_lattice(spec.sizes, limit)
            if len(eigenvalues) >= mode_count:
                break
            limit *= 2
        return SpectralBasis(spec, eigenvalues[:mode_count].copy(), labels[:mode_count].copy(), True)
    if spec.kind == ManifoldKind.SPHERE2:
        labels = []
        degree = 0
        while len(labels) < mode_count:
            labels.extend((degree, order) for order in range(-degree, degree + 1))
            degree += 1
        label_array = np.array(labels[:mode_count])
        eigenvalues = label_array[:, 0] * (label_array[:, 0] + 1) / spec.radius ** 2
        return SpectralBasis(spec, eigenvalues.astype(float), label_array, False)
    raise UnsupportedGeometryError(f"{spec.describe()} has continuous spectrum; no spectral basis exists")


def weyl_density(spec: ManifoldSpec, eigenvalue: Any) -> Any:
    """Local Weyl density of ``sum_sigma |f_sigma(x)|^2 delta(lambda - lambda_sigma)``."""
    dimension = spec.dimension
    return np.asarray(eigenvalue) ** (dimension / 2 - 1) / ((4 * math.pi) ** (dimension / 2)
                                                          * math.gamma(dimension / 2))


@dataclass(frozen=True)
class ModeSum:
    """
    A regularized spectral sum.

    :ivar value: The sum, including the Weyl correction on the diagonal.
    :ivar error: Estimated error, from the comparison of two cutoffs.
    :ivar cutoff: The eigenvalue scale of the smooth cutoff.
    :ivar mode_count: How many modes entered the sum.
    """
    value: Any
    error: float
    cutoff: float
    mode_count: int


def _smooth_cutoff(ratio: np.ndarray) -> np.ndarray:
    return np.exp(-ratio) * (1 + ratio)


def default_cutoff(spec: ManifoldSpec) -> float:
    """Cutoff for which the smoothed sum touches about ``MODE_SUM_TARGET_COUNT`` modes."""
    if spec.kind == ManifoldKind.SPHERE2:
        return MODE_SUM_SPHERE_CUTOFF / spec.radius ** 2 / MODE_SUM_SPAN
    dimension = spec.dimension
    per_unit = spec.volume * math.pi ** (dimension / 2) / math.gamma(dimension / 2 + 1) / (2 * math.pi) ** dimension
    return (MODE_SUM_TARGET_COUNT / per_unit) ** (2 / dimension) / MODE_SUM_SPAN


def _weyl_remainder(spec: ManifoldSpec, function: Callable[[np.ndarray], Any], cutoff: float) -> Any:
    def integrand(eigenvalue: np.ndarray) -> Any:
        ratio = eigenvalue / cutoff
        remainder = -np.expm1(-ratio) - ratio * np.exp(-ratio)
        return np.asarray(function(eigenvalue)) * remainder * weyl_density(spec, eigenvalue) * np.exp(ratio)
    return laplace_integral(integrand, 1 / cutoff)


def _raw_smoothed(spec: ManifoldSpec, shift: Any, function: Callable[[np.ndarray], Any],
                  cutoff: float, diagonal: bool) -> Tuple[Any, int]:
    limit = MODE_SUM_SPAN * cutoff
    if spec.kind == ManifoldKind.FLAT_TORUS:
        labels, eigenvalues = _torus_lattice(spec.sizes, limit)
        phases = np.cos((2 * math.pi * labels / np.array(spec.sizes)) @ np.asarray(shift, dtype=float))
        weights = phases / spec.volume
        count = len(eigenvalues)
    else:
        radius = spec.radius
        degrees = np.arange(int(math.sqrt(limit) * radius) + 1)
        eigenvalues = degrees * (degrees + 1) / radius ** 2
        legendre = np.ones(len(degrees)) if diagonal else special.eval_legendre(degrees, float(np.cos(shift)))
        weights = (2 * degrees + 1) * legendre / (4 * math.pi * radius ** 2)
        count = int(np.sum(2 * degrees + 1))
    values = np.asarray(function(eigenvalues))
    smooth = _smooth_cutoff(eigenvalues / cutoff)
    total = np.tensordot(weights * smooth, values, axes=(0, 0))
    if diagonal:
        total = total + _weyl_remainder(spec, function, cutoff)
    return total, count


def smoothed_mode_sum(spec: ManifoldSpec, x: Any, y: Any, function: Callable[[np.ndarray], Any],
                      cutoff: Optional[float] = None, tolerance: Optional[float] = None) -> ModeSum:
    """
    Computes ``sum_sigma f_sigma(x) conj(f_sigma(y)) g(lambda_sigma)`` on a
    compact geometry.

    The sum is weighted by ``chi(lambda/cutoff) = exp(-r)(1 + r)``; on the
    diagonal the remainder ``1 - chi`` is replaced by its Weyl-density
    integral. Off the diagonal that remainder is of order ``cutoff**-2`` and is
    dropped. The error estimate compares the cutoff with half of it.

    :param spec: A compact geometry.
    :param x: First point.
    :param y: Second point.
    :param function: The function ``g`` of the eigenvalue, vectorized.
    :param cutoff: Eigenvalue scale of the cutoff; chosen from the volume by default.
    :param tolerance: If given, raise when the estimated error exceeds it (relative).
    :raises TruncationError: If the error estimate exceeds ``tolerance``.
    """
    if not spec.is_compact:
        raise UnsupportedGeometryError(f"Mode sums need a compact geometry, got {spec.describe()}")
    cutoff = cutoff or default_cutoff(spec)
    if spec.kind == ManifoldKind.FLAT_TORUS:
        shift = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        diagonal = bool(np.all(torus_displacement(spec, x, y) < 1e-14))
    else:
        shift = geodesic_distance(spec, x, y) / spec.radius
        diagonal = shift < 1e-14
    value, count = _raw_smoothed(spec, shift, function, cutoff, diagonal)
    half, _ = _raw_smoothed(spec, shift, function, cutoff / 2, diagonal)
    error = float(np.max(np.abs(np.asarray(value) - np.asarray(half)))) / 3
    if tolerance is not None:
        scale = float(np.max(np.abs(value))) or 1.0
        if error > tolerance * scale:
            raise TruncationError(f"Mode sum on {spec.describe()} has estimated error {error:.3e} "
                                  f"above {tolerance:.1e} relative at cutoff {cutoff:.3e}")
    logger.debug(f"smoothed_mode_sum on {spec.describe()}: {count} modes, error {error:.2e}")
    return ModeSum(value.item() if np.ndim(value) == 0 else value, error, cutoff, count)


# Integration grids ----------------------------------------------------------------

@dataclass(frozen=True)
class IntegrationGrid:
    """Quadrature points and weights for integrals over (a region of) a geometry."""
    spec: ManifoldSpec
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values: Any) -> Any:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def inner(self, first: Any, second: Any) -> Any:
        return self.integrate(np.conj(first) * second)

    def norm(self, values: Any) -> float:
        return float(np.sqrt(np.real(self.inner(values, values))))


def integration_grid(spec: ManifoldSpec, resolution: int = 64, center: Optional[np.ndarray] = None,
                     radius: Optional[float] = None) -> IntegrationGrid:
    """
    Product quadrature grids: a uniform grid offset by half a cell on the torus,
    Gauss-Legendre in the polar angle times a uniform azimuth on the sphere,
    and geodesic polar Gauss grids around ``center`` (out to ``radius``) in
    flat space and on the hyperbolic plane.
    """
    if spec.kind == ManifoldKind.FLAT_TORUS:
        axes = [(np.arange(resolution) + 0.5) * side / resolution for side in spec.sizes]
        points = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, spec.dimension)
        return IntegrationGrid(spec, points, np.full(len(points), spec.volume / len(points)))
    if spec.kind == ManifoldKind.SPHERE2:
        cosines, cosine_weights = special.roots_legendre(resolution)
        azimuths = 2 * math.pi * np.arange(2 * resolution) / (2 * resolution)
        cos_grid, azimuth_grid = np.meshgrid(cosines, azimuths, indexing='ij')
        sine = np.sqrt(1 - cos_grid ** 2)
        points = np.stack((sine * np.cos(azimuth_grid), sine * np.sin(azimuth_grid), cos_grid), axis=-1)
        weights = np.repeat(cosine_weights, 2 * resolution) * (math.pi / resolution) * spec.radius ** 2
        return IntegrationGrid(spec, points.reshape(-1, 3), weights)
    if center is None or radius is None:
        raise DomainError(f"Grids on {spec.describe()} need a center and a radius")
    radial, radial_weights = special.roots_legendre(resolution)
    radial = (radial + 1) * radius / 2
    radial_weights = radial_weights * radius / 2
    if spec.dimension == 3 and spec.kind == ManifoldKind.FLAT_SPACE:
        cosines, cosine_weights = special.roots_legendre(resolution)
        azimuths = 2 * math.pi * np.arange(2 * resolution) / (2 * resolution)
        r, c, a = np.meshgrid(radial, cosines, azimuths, indexing='ij')
        s = np.sqrt(1 - c ** 2)
        offsets = np.stack((r * s * np.cos(a), r * s * np.sin(a), r * c), axis=-1).reshape(-1, 3)
        weights = (radial_weights[:, None, None] * radial[:, None, None] ** 2 * cosine_weights[None, :, None]
                   * np.full((1, 1, len(azimuths)), math.pi / resolution)).ravel()
        return IntegrationGrid(spec, center + offsets, weights)
    azimuths = 2 * math.pi * np.arange(2 * resolution) / (2 * resolution)
    r, a = np.meshgrid(radial, azimuths, indexing='ij')
    tangent = np.stack((r * np.cos(a), r * np.sin(a)), axis=-1).reshape(-1, 2)
    points = exponential_map(spec, center, tangent)
    if spec.kind == ManifoldKind.HYPERBOLIC2:
        area = spec.radius * np.sinh(radial / spec.radius)
    else:
        area = radial
    weights = np.repeat(radial_weights * area, len(azimuths)) * (math.pi / resolution)
    return IntegrationGrid(spec, points, weights)
