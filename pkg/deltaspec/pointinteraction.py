"""
Non-relativistic N-center point interactions.

The free resolvent kernel is the Laplace transform of the heat kernel and the
principal matrix is assembled from the same transforms:

* ``Phi_ii(E) = int dt K_t(a_i, a_i) (exp(-t mu_i^2) - exp(t E))``
* ``Phi_ij(E) = -R0(a_i, a_j | E)`` for ``i != j``

The full resolvent is ``R0 + sum_ij R0(., a_i) [Phi^-1]_ij R0(a_j, .)``.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from deltaspec.constants import CONDITION_LIMIT, ROOT_RELATIVE_TOLERANCE, SCAN_POINTS
from deltaspec.errors import (DomainError, SingularMatrixError, UnsupportedGeometryError, WindowError,
                              warn_scan)
from deltaspec.manifold import (ManifoldSpec, ManifoldKind, SpectralBasis, IntegrationGrid, separation,
                                geodesic_distance, kernel_of_separation, spectral_basis)
from deltaspec.specialfn import QuadratureSpec, laplace_integral, expm1_difference
from deltaspec.setup import logger


@dataclass(frozen=True, eq=False)
class CenterSet:
    """
    Interaction centers with their binding parameters.

    :ivar positions: One point per center, in the geometry's coordinates.
    :ivar mu: Binding parameters ``mu_i > 0``; ``-mu_i**2`` is the single-center
        bound state in flat space.
    :ivar mass: Particle mass ``m``; the geometry must carry ``kappa = 1/(2m)``.
    """
    positions: Tuple[np.ndarray, ...]
    mu: Tuple[float, ...]
    mass: float = 1.0

    def __post_init__(self) -> None:
        if not self.positions:
            raise DomainError("A CenterSet needs at least one center")
        if len(self.mu) != len(self.positions):
            raise DomainError(f"Got {len(self.positions)} centers but {len(self.mu)} binding parameters")
        if min(self.mu) <= 0:
            raise DomainError(f"Binding parameters must be positive, got {self.mu!r}")
        if not self.mass > 0:
            raise DomainError(f"The mass must be positive, got {self.mass!r}")

    @classmethod
    def build(cls, positions: Sequence[Any], mu: Any, mass: float = 1.0) -> 'CenterSet':
        points = tuple(np.asarray(position, dtype=float) for position in positions)
        for point in points:
            point.setflags(write=False)
        mus = tuple(float(value) for value in np.broadcast_to(np.asarray(mu, dtype=float), (len(points),)))
        return cls(points, mus, float(mass))

    @property
    def count(self) -> int:
        return len(self.positions)

    @property
    def mu_squared(self) -> np.ndarray:
        return np.array(self.mu) ** 2


def check_centers(manifold: ManifoldSpec, centers: CenterSet) -> None:
    """
    :raises DomainError: If the mass and diffusion conventions disagree or two centers coincide.
    """
    if abs(manifold.kappa - 1 / (2 * centers.mass)) > 1e-12 * manifold.kappa:
        raise DomainError(f"{manifold.describe()} has kappa={manifold.kappa!r} but the centers carry mass "
                          f"{centers.mass!r}; kappa must equal 1/(2m)")
    for i in range(centers.count):
        for j in range(i):
            if geodesic_distance(manifold, centers.positions[i], centers.positions[j]) <= 0:
                raise DomainError(f"Centers {j} and {i} coincide")


def _negative_energy(energy: Any) -> complex:
    value = complex(energy)
    if not value.real < 0:
        raise DomainError(f"Energies must have negative real part, got {energy!r}")
    return value


def _plain(value: Any) -> Any:
    """Collapses complex results with no imaginary part and 0-d arrays to Python numbers."""
    array = np.asarray(value)
    if np.iscomplexobj(array) and not np.any(array.imag):
        array = array.real
    return array.item() if array.ndim == 0 else array


def kernel_laplace_transform(manifold: ManifoldSpec, separations: Any, first: Any, second: Any = None,
                             power: int = 0, quadrature: Optional[QuadratureSpec] = None,
                             distance: Any = None) -> Any:
    """
    Computes ``int_0^inf dt t**power K_t(sep) [exp(-first t) - exp(-second t)]``,
    or with ``second=None`` just the ``exp(-first t)`` term.

    The rates may be complex with positive real parts, and broadcast against
    the separation batch. The exponential decay of the hyperbolic kernel is
    folded into the weight.

    :param manifold: The geometry.
    :param separations: As returned by :func:`~deltaspec.manifold.separation`.
    :param first: First rate(s).
    :param second: Second rate(s), subtracted.
    :param power: Extra power of ``t``.
    :param quadrature: Accuracy settings.
    :param distance: Geodesic distances of the batch, used to place the quadrature peak.
    :return: The transform, shaped like the broadcast batch.
    :raises DomainError: If a rate has nonpositive real part.
    """
    separation_array = np.asarray(separations, dtype=float)
    torus = manifold.kind == ManifoldKind.FLAT_TORUS
    separation_batch = separation_array.shape[:-1] if torus else separation_array.shape
    first_rates = np.asarray(first, dtype=complex)
    second_rates = None if second is None else np.asarray(second, dtype=complex)
    shapes = [separation_batch, first_rates.shape]
    lowest = float(np.min(first_rates.real))
    if second_rates is not None:
        shapes.append(second_rates.shape)
        lowest = min(lowest, float(np.min(second_rates.real)))
    if not lowest > 0:
        raise DomainError(f"Laplace transforms of the heat kernel need rates with positive real part, "
                          f"got {first!r} and {second!r}")
    batch = np.broadcast_shapes(*shapes)
    real = not np.any(first_rates.imag) and (second_rates is None or not np.any(second_rates.imag))
    gap = manifold.spectral_gap
    rate = lowest + gap

    def integrand(t: np.ndarray) -> np.ndarray:
        times = t.reshape((-1,) + (1,) * len(batch))
        values = kernel_of_separation(manifold, separation_array, times)
        if gap:
            values = values * np.exp(gap * times)
        if second_rates is None:
            factor = np.exp(-(first_rates - lowest) * times)
        else:
            factor = expm1_difference(first_rates - lowest, second_rates - lowest, times)
        if real:
            factor = factor.real
        values = values * factor
        if power:
            values = values * times ** power
        return np.broadcast_to(values, (len(t),) + batch)

    peak = None
    if distance is not None:
        nearest = float(np.min(np.asarray(distance)))
        if nearest > 0:
            peak = nearest / (2 * math.sqrt(manifold.kappa * rate))
    return _plain(laplace_integral(integrand, rate, quadrature, peak_time=peak))


# Free resolvent --------------------------------------------------------------------

def free_resolvent(manifold: ManifoldSpec, x: Any, y: Any, energy: Any,
                   quadrature: Optional[QuadratureSpec] = None) -> Any:
    """
    The free resolvent kernel ``R0(x, y | E) = int dt exp(t E) K_t(x, y)``.

    ``y`` may be a batch of points.

    :raises DomainError: For ``Re E >= 0`` or coinciding points (the diagonal diverges).
    """
    value = _negative_energy(energy)
    distance = np.asarray(geodesic_distance(manifold, x, y))
    if np.any(distance <= 0):
        raise DomainError(f"The free resolvent kernel diverges on the diagonal in {manifold.dimension}D")
    return kernel_laplace_transform(manifold, separation(manifold, x, y), -value, quadrature=quadrature,
                                    distance=distance)


def free_resolvent_difference(manifold: ManifoldSpec, x: Any, y: Any, first_energy: Any, second_energy: Any,
                              quadrature: Optional[QuadratureSpec] = None) -> Any:
    """
    ``R0(x, y | E1) - R0(x, y | E2) = int dt K_t(x, y) (exp(t E1) - exp(t E2))``,
    finite on the diagonal.
    """
    first = _negative_energy(first_energy)
    second = _negative_energy(second_energy)
    if first == second:
        return 0.0
    distance = np.asarray(geodesic_distance(manifold, x, y))
    return kernel_laplace_transform(manifold, separation(manifold, x, y), -first, -second,
                                    quadrature=quadrature, distance=distance)


def alpha(manifold: ManifoldSpec, centers: CenterSet, i: int, l: int, energy: float,
          quadrature: Optional[QuadratureSpec] = None) -> float:
    """
    ``alpha_il(E) = int dt t K_t(a_i, a_l) exp(-t |E|) = int R0(a_i, x|E) R0(x, a_l|E) dx``.
    """
    value = _negative_energy(energy)
    first, second = centers.positions[i], centers.positions[l]
    return kernel_laplace_transform(manifold, separation(manifold, first, second), -value, power=1,
                                    quadrature=quadrature, distance=geodesic_distance(manifold, first, second))


# Principal matrix --------------------------------------------------------------------

@dataclass(frozen=True)
class PrincipalMatrixValue:
    """
    :ivar energy: Where the matrix was evaluated.
    :ivar entries: The matrix.
    :ivar error: Estimated truncation error of mode-sum evaluations (zero for quadrature).
    """
    energy: complex
    entries: np.ndarray
    error: float = 0.0

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues (real energies only)."""
        return np.linalg.eigvalsh(self.entries)

    def minimal_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def inverse(self) -> np.ndarray:
        return invert_principal(self.entries, self.energy)

    def inverse_norm(self) -> float:
        return float(np.linalg.norm(self.inverse(), 2))


def invert_principal(entries: np.ndarray, energy: Any = None) -> np.ndarray:
    """
    :raises SingularMatrixError: If the condition number exceeds ``CONDITION_LIMIT``.
    """
    singular_values = np.linalg.svd(entries, compute_uv=False)
    if singular_values[-1] <= singular_values[0] / CONDITION_LIMIT:
        raise SingularMatrixError(f"The principal matrix at E={energy!r} is singular to working precision "
                                  f"(singular values {singular_values[0]:.3e} .. {singular_values[-1]:.3e}); "
                                  f"E is at or next to a bound state")
    return np.linalg.inv(entries)


def _pairs(count: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(count) for j in range(i + 1, count)]


def principal_matrix(manifold: ManifoldSpec, centers: CenterSet, energy: Any,
                     quadrature: Optional[QuadratureSpec] = None) -> PrincipalMatrixValue:
    """
    The principal matrix at a (complex) energy with negative real part.

    :raises DomainError: For ``Re E >= 0`` or inconsistent centers.
    :raises ConvergenceError: If a quadrature fails to converge.
    """
    value = _negative_energy(energy)
    check_centers(manifold, centers)
    count = centers.count
    dtype = float if value.imag == 0 else complex
    entries = np.zeros((count, count), dtype=dtype)
    for i, position in enumerate(centers.positions):
        entries[i, i] = kernel_laplace_transform(manifold, separation(manifold, position, position),
                                                 centers.mu_squared[i], -value, quadrature=quadrature)
    for i, j in _pairs(count):
        first, second = centers.positions[i], centers.positions[j]
        entries[i, j] = entries[j, i] = -kernel_laplace_transform(
            manifold, separation(manifold, first, second), -value, quadrature=quadrature,
            distance=geodesic_distance(manifold, first, second))
    return PrincipalMatrixValue(value if dtype is complex else value.real, entries)


def resolvent_kernel(manifold: ManifoldSpec, centers: CenterSet, x: Any, y: Any, energy: Any,
                     quadrature: Optional[QuadratureSpec] = None) -> Any:
    """
    ``R(x, y | E) = R0(x, y|E) + sum_ij R0(x, a_i|E) [Phi^-1(E)]_ij R0(a_j, y|E)``.

    :raises SingularMatrixError: Next to a bound state.
    """
    inverse = principal_matrix(manifold, centers, energy, quadrature).inverse()
    left = np.array([free_resolvent(manifold, x, center, energy, quadrature) for center in centers.positions])
    right = np.array([free_resolvent(manifold, center, y, energy, quadrature) for center in centers.positions])
    return _plain(free_resolvent(manifold, x, y, energy, quadrature) + left @ inverse @ right)


def phi_inverse_norm_bound(value: PrincipalMatrixValue) -> Tuple[float, bool]:
    """
    Geometric-series bound on ``||Phi^-1||`` from the split ``Phi = D - K``
    into diagonal and off-diagonal parts.

    :return: ``(||D^-1|| / (1 - ||D^-1 K||), True)`` when ``||D^-1 K|| < 1``,
        otherwise ``(inf, False)``. A vanishing diagonal entry, as at a bound
        state of a single center, gives ``(inf, False)``.
    """
    diagonal = np.diag(value.entries)
    if np.any(diagonal == 0) or not np.all(np.isfinite(diagonal)):
        return math.inf, False
    off_diagonal = np.diag(diagonal) - value.entries
    inverse_diagonal = 1 / diagonal
    contraction = float(np.linalg.norm(inverse_diagonal[:, None] * off_diagonal, 2))
    if not contraction < 1:
        return math.inf, False
    return float(np.max(np.abs(inverse_diagonal))) / (1 - contraction), True


# Bound states --------------------------------------------------------------------

@dataclass(frozen=True)
class BoundState:
    """
    :ivar energy: Where an eigenvalue of the principal matrix vanishes.
    :ivar vector: The normalized null vector, largest component positive.
    :ivar residual: The eigenvalue left at the root.
    """
    energy: float
    vector: np.ndarray
    residual: float


def scan_grid(low: float, high: float, points: int) -> np.ndarray:
    """Log-spaced in ``|E|`` on the negative axis, uniform otherwise."""
    if high < 0:
        return -np.geomspace(-low, -high, points)
    return np.linspace(low, high, points)


def eigenvalue_crossings(evaluate: Callable[[float], np.ndarray], window: Tuple[float, float],
                         scan_points: int = SCAN_POINTS, what: str = "principal matrix") -> List[BoundState]:
    """
    Finds every energy in ``window`` where an eigenvalue of a Hermitian matrix
    function that is decreasing in ``E`` (in the operator sense) vanishes.

    The count of negative eigenvalues can only grow with ``E``; each step
    of the count over the scan grid brackets one root of the corresponding
    sorted eigenvalue, which is then polished by Brent's method.

    :param evaluate: Maps a real energy to the matrix.
    :param window: ``(E_low, E_high)``.
    :param scan_points: Size of the scan grid.
    :param what: Name used in messages.
    :return: The roots, ascending in energy.
    """
    low, high = window
    grid = scan_grid(low, high, scan_points)
    spectra = [np.linalg.eigvalsh(evaluate(float(energy))) for energy in grid]
    negatives = [int(np.sum(spectrum < 0)) for spectrum in spectra]
    states: List[BoundState] = []
    for cell in range(len(grid) - 1):
        first, last = negatives[cell], negatives[cell + 1]
        if last > first + 1:
            message = (f"{what}: {last - first} eigenvalue crossings fall between E={grid[cell]:.6g} and "
                       f"E={grid[cell + 1]:.6g}; the {scan_points}-point scan over [{low:g}, {high:g}] is "
                       f"too coarse to separate them")
            logger.warning(message)
            warn_scan(message)
        for index in range(first, last):
            def curve(energy: float, index: int = index) -> float:
                return float(np.linalg.eigvalsh(evaluate(energy))[index])
            left, right = float(grid[cell]), float(grid[cell + 1])
            if curve(left) == 0:
                root = left
            elif curve(right) == 0:
                root = right
            else:
                root = optimize.brentq(curve, left, right, xtol=ROOT_RELATIVE_TOLERANCE * max(abs(left), 1e-300),
                                       rtol=ROOT_RELATIVE_TOLERANCE)
            spectrum, vectors = np.linalg.eigh(evaluate(root))
            vector = vectors[:, index]
            vector = vector * np.sign(vector[np.argmax(np.abs(vector))])
            states.append(BoundState(float(root), vector, float(abs(spectrum[index]))))
    return states


def check_window(window: Tuple[float, float], upper: float, what: str) -> Tuple[float, float]:
    """
    :raises WindowError: Unless ``low < high < upper``.
    """
    low, high = float(window[0]), float(window[1])
    if not low < high:
        raise WindowError(f"Energy window [{low!r}, {high!r}] for {what} is empty")
    if not high < upper:
        raise WindowError(f"Energy window [{low!r}, {high!r}] for {what} must end below {upper!r}")
    return low, high


def bound_states(manifold: ManifoldSpec, centers: CenterSet, window: Tuple[float, float],
                 quadrature: Optional[QuadratureSpec] = None, scan_points: int = SCAN_POINTS) -> List[BoundState]:
    """
    Bound-state energies in ``window`` (below zero) with their null vectors.

    :raises WindowError: If the window reaches the continuum threshold.
    """
    low, high = check_window(window, 0.0, "non-relativistic bound states")
    return eigenvalue_crossings(lambda energy: principal_matrix(manifold, centers, energy, quadrature).entries,
                                (low, high), scan_points)


# Exact resolvent images ----------------------------------------------------------------

@lru_cache(maxsize=8192)
def _center_product(manifold: ManifoldSpec, centers: CenterSet, i: int, l: int, first: complex,
                    second: complex, quadrature: Optional[QuadratureSpec]) -> complex:
    """``int R0(a_i, x | first) R0(x, a_l | second) dx``."""
    a, b = centers.positions[i], centers.positions[l]
    sep = separation(manifold, a, b)
    distance = geodesic_distance(manifold, a, b)
    if first == second:
        return complex(kernel_laplace_transform(manifold, sep, -first, power=1, quadrature=quadrature,
                                                distance=distance))
    difference = kernel_laplace_transform(manifold, sep, -first, -second, quadrature=quadrature,
                                          distance=distance)
    return complex(difference) / (first - second)


@dataclass(frozen=True)
class SampledFunction:
    grid: IntegrationGrid
    values: np.ndarray

    def norm(self) -> float:
        return self.grid.norm(self.values)


@dataclass(frozen=True)
class ResolventImage:
    """
    A function of the form ``sum_s c_s f_s + sum_(E, j) b_j R0(., a_j | E)``.

    This family is closed under the action of the full resolvent, and its inner
    products reduce to center-to-center integrals, so norms of resolvent
    images are exact up to the Laplace quadrature.

    :ivar coefficients: Spectral coefficients ``c_s`` in ``basis``.
    :ivar terms: Pairs of an energy and the amplitude vector ``b`` over the centers.
    """
    manifold: ManifoldSpec
    centers: CenterSet
    basis: SpectralBasis
    coefficients: np.ndarray
    terms: Tuple[Tuple[complex, np.ndarray], ...] = ()
    quadrature: Optional[QuadratureSpec] = None

    @classmethod
    def from_coefficients(cls, manifold: ManifoldSpec, centers: CenterSet, basis: SpectralBasis,
                          coefficients: Any, quadrature: Optional[QuadratureSpec] = None) -> 'ResolventImage':
        return cls(manifold, centers, basis, np.asarray(coefficients, dtype=complex), (), quadrature)

    @classmethod
    def from_samples(cls, manifold: ManifoldSpec, centers: CenterSet, basis: SpectralBasis,
                     function: SampledFunction, quadrature: Optional[QuadratureSpec] = None) -> 'ResolventImage':
        """Projects grid samples onto the basis."""
        modes = basis.evaluate(function.grid.points)
        coefficients = function.grid.integrate(np.conj(modes) * function.values[:, None])
        return cls.from_coefficients(manifold, centers, basis, coefficients, quadrature)

    def _with(self, coefficients: np.ndarray, terms: Sequence[Tuple[complex, np.ndarray]]) -> 'ResolventImage':
        merged: dict = {}
        for energy, amplitudes in terms:
            merged[energy] = merged.get(energy, 0) + np.asarray(amplitudes, dtype=complex)
        ordered = tuple(sorted(merged.items(), key=lambda item: (item[0].real, item[0].imag)))
        return ResolventImage(self.manifold, self.centers, self.basis, coefficients, ordered, self.quadrature)

    def __add__(self, other: 'ResolventImage') -> 'ResolventImage':
        return self._with(self.coefficients + other.coefficients, self.terms + other.terms)

    def __sub__(self, other: 'ResolventImage') -> 'ResolventImage':
        return self + other.scale(-1)

    def scale(self, factor: complex) -> 'ResolventImage':
        return self._with(self.coefficients * factor, [(energy, amplitudes * factor)
                                                       for energy, amplitudes in self.terms])

    def _spectral_denominator(self, energy: complex) -> np.ndarray:
        return self.manifold.kappa * self.basis.eigenvalues - energy

    def _center_values(self) -> np.ndarray:
        """``f_s(a_j)``, shape ``(N, M)``."""
        return self.basis.evaluate(np.array(self.centers.positions))

    def pair_with_center(self, index: int, energy: complex) -> complex:
        """The bilinear pairing ``int R0(a_index, x | E) g(x) dx``."""
        center_values = self._center_values()[index]
        total = complex(np.sum(self.coefficients * center_values / self._spectral_denominator(energy)))
        for term_energy, amplitudes in self.terms:
            for j, amplitude in enumerate(amplitudes):
                if amplitude:
                    total += amplitude * _center_product(self.manifold, self.centers, index, j, energy,
                                                         term_energy, self.quadrature)
        return total

    def inner(self, other: 'ResolventImage') -> complex:
        """``<self, other>``, antilinear in ``self``."""
        total = complex(np.vdot(self.coefficients, other.coefficients))
        center_values = self._center_values()
        for energy, amplitudes in other.terms:
            overlap = np.conj(center_values) / self._spectral_denominator(energy)[None, :]
            total += complex(np.sum(np.conj(self.coefficients)[None, :] * overlap * amplitudes[:, None]))
        for energy, amplitudes in self.terms:
            overlap = center_values / np.conj(self._spectral_denominator(energy))[None, :]
            total += complex(np.sum(np.conj(amplitudes)[:, None] * overlap * other.coefficients[None, :]))
            for other_energy, other_amplitudes in other.terms:
                for i, left in enumerate(amplitudes):
                    for l, right in enumerate(other_amplitudes):
                        if left and right:
                            total += np.conj(left) * right * _center_product(
                                self.manifold, self.centers, i, l, np.conj(energy), other_energy, self.quadrature)
        return total

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self).real, 0.0))

    def apply_free_resolvent(self, energy: complex) -> 'ResolventImage':
        """
        ``R0(E)`` applied to the image.

        :raises DomainError: If the image already carries a term at ``E``.
        """
        terms: List[Tuple[complex, np.ndarray]] = []
        for term_energy, amplitudes in self.terms:
            if term_energy == energy:
                raise DomainError(f"R0({energy!r}) applied to R0(., a | {energy!r}) leaves the image family")
            shift = energy - term_energy
            terms.append((energy, amplitudes / shift))
            terms.append((term_energy, -amplitudes / shift))
        return self._with(self.coefficients / self._spectral_denominator(energy), terms)

    def sample(self, points: Any) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        values = self.basis.evaluate(points) @ self.coefficients
        for energy, amplitudes in self.terms:
            for j, amplitude in enumerate(amplitudes):
                if amplitude:
                    values = values + amplitude * np.asarray(
                        free_resolvent(self.manifold, self.centers.positions[j], points, energy, self.quadrature))
        return values


def apply_resolvent_image(image: ResolventImage, energy: Any) -> ResolventImage:
    """The full resolvent ``R(E)`` applied to a resolvent image."""
    value = _negative_energy(energy)
    inverse = principal_matrix(image.manifold, image.centers, value, image.quadrature).inverse()
    pairings = np.array([image.pair_with_center(j, value) for j in range(image.centers.count)])
    interaction = image._with(np.zeros_like(image.coefficients), [(value, inverse @ pairings)])
    return image.apply_free_resolvent(value) + interaction


def apply_resolvent(manifold: ManifoldSpec, centers: CenterSet, function: SampledFunction, energy: Any,
                    modes: int = 256, quadrature: Optional[QuadratureSpec] = None) -> SampledFunction:
    """
    ``(R(E) f)(x)`` on the grid of ``f``. The free part acts on the projection
    of ``f`` onto the lowest ``modes`` eigenmodes; the pairings with
    ``R0(a_j, .)`` are taken against the same projection.

    :raises UnsupportedGeometryError: On non-compact geometries.
    """
    if not manifold.is_compact:
        raise UnsupportedGeometryError(f"apply_resolvent needs a spectral basis; {manifold.describe()} has none")
    basis = spectral_basis(manifold, modes)
    image = ResolventImage.from_samples(manifold, centers, basis, function, quadrature)
    result = apply_resolvent_image(image, energy)
    return SampledFunction(function.grid, result.sample(function.grid.points))


# Bound forms -----------------------------------------------------------------------------

def _registry():
    from deltaspec.registry import get_registry
    return get_registry()


def alpha_bound(manifold: ManifoldSpec, energy: float) -> float:
    """
    ``C1/(V |E|^2) + C6 (2m)^(D/2) |E|^(D/2-2)`` on compact geometries and
    ``C4 (2m)^(D/2) Gamma(2-D/2) |E|^(D/2-2)`` otherwise.
    """
    magnitude = abs(_negative_energy(energy).real)
    dimension = manifold.dimension
    two_m = 2 * manifold.mass
    registry = _registry()
    constants = registry.heat_kernel_constants(manifold)
    c6 = registry.constant(manifold, 'C6').value
    scaling = two_m ** (dimension / 2) * magnitude ** (dimension / 2 - 2)
    if manifold.is_compact:
        return constants.c1 / (manifold.volume * magnitude ** 2) + c6 * scaling
    return c6 * scaling


def diagonal_inverse_shape(manifold: ManifoldSpec, mu: float, energy: float) -> float:
    """
    The unit-constant shape of the bound on ``1/Phi_ii``: ``(2m)^-1 / ln`` in
    2D and ``(2m)^-3/2 / (sqrt|E| - mu)`` in 3D, both shifted by ``xi`` on
    Cartan-Hadamard geometries.
    """
    magnitude = abs(_negative_energy(energy).real)
    shift = 0.0 if manifold.is_compact else _registry().constant(manifold, 'xi').value
    two_m = 2 * manifold.mass
    if manifold.dimension == 2:
        return 1 / (two_m * math.log((magnitude + shift) / (mu ** 2 + shift)))
    return 1 / (two_m ** 1.5 * (math.sqrt(magnitude + shift) - math.sqrt(mu ** 2 + shift)))


def diagonal_inverse_bound(manifold: ManifoldSpec, centers: CenterSet, energy: float) -> np.ndarray:
    """
    Bounds on ``1/Phi_ii(E)`` per center, with the calibrated constant ``C7``
    (compact 2D), ``C8`` (compact 3D), ``C9`` or ``C10`` (Cartan-Hadamard).

    :raises MissingConstantsError: Before the constant has been calibrated.
    """
    name = {(True, 2): 'C7', (True, 3): 'C8', (False, 2): 'C9', (False, 3): 'C10'}[
        (manifold.is_compact, manifold.dimension)]
    constant = _registry().constant(manifold, name).value
    return np.array([constant * diagonal_inverse_shape(manifold, mu, energy) for mu in centers.mu])


def inverse_norm_shape(manifold: ManifoldSpec, energy: float) -> float:
    """``(2m)^-3/2 |E|^-1/2``, the 3D shape of the bound on ``||Phi^-1||`` (constant ``C11``)."""
    return 1 / ((2 * manifold.mass) ** 1.5 * math.sqrt(abs(_negative_energy(energy).real)))


def free_resolvent_bound(manifold: ManifoldSpec, x: Any, y: Any, energy: float) -> float:
    """
    The 3D bound on ``R0(x, y | E)``: on compact geometries
    ``m C12/d exp(-2 q) + C13 d sqrt(m)/(V sqrt|E|) (1 + 1/q') exp(-2 q)`` with
    ``q = sqrt(m d^2 |E| / C3)``, and ``m C14/d exp(-2 sqrt(m d^2 |E| / C5))``
    otherwise.

    :raises UnsupportedGeometryError: Outside 3D.
    """
    if manifold.dimension != 3:
        raise UnsupportedGeometryError(f"The free-resolvent bound form is three dimensional, got "
                                       f"{manifold.describe()}")
    magnitude = abs(_negative_energy(energy).real)
    distance = float(geodesic_distance(manifold, x, y))
    mass = manifold.mass
    registry = _registry()
    constants = registry.heat_kernel_constants(manifold)
    if manifold.is_compact:
        exponent = math.sqrt(mass * distance ** 2 * magnitude / constants.c3)
        c12 = registry.constant(manifold, 'C12').value
        c13 = registry.constant(manifold, 'C13').value
        return (mass * c12 / distance * math.exp(-2 * exponent)
                + c13 * distance * math.sqrt(mass) / (manifold.volume * math.sqrt(magnitude))
                * (1 + 1 / exponent) * math.exp(-2 * exponent))
    exponent = math.sqrt(mass * distance ** 2 * magnitude / constants.c5)
    return mass * registry.constant(manifold, 'C14').value / distance * math.exp(-2 * exponent)
