"""
Numerical probes of the resolvent hypotheses (pseudo-resolvent identity,
strong limit, symmetry) and sweeps of every analytic bound form.

Each check returns a :class:`~deltaspec.reports.BoundReport`. Checks take a
*system*: a :class:`PointSystem` (non-relativistic centers), a
:class:`~deltaspec.relativistic.RelativisticModel`, or a :class:`LeeSystem`.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from deltaspec.constants import (DECADE_GROWTH_LIMIT, DEFAULT_SEED, EXPONENT_TOLERANCE, HEAT_BOUND_TOLERANCE,
                                 IDENTITY_TOLERANCE, ROUTE_TOLERANCE, STRONG_LIMIT_START, SUBORDINATION_TOLERANCE,
                                 SYMMETRY_TOLERANCE)
from deltaspec.errors import DeltaspecError, DomainError, UnsupportedGeometryError
from deltaspec.leemodel import (FockBasis, LeeModelSpec, build_principal_operator, ground_state_bound_check,
                                lee_strong_limit, relative_bound_check, u1_tilde_bound_check, vacuum_principal,
                                vacuum_identity_residual)
from deltaspec.manifold import (ManifoldKind, ManifoldSpec, exponential_map, geodesic_circle_length,
                                geodesic_distance, heat_kernel, heat_kernel_upper_bound, integration_grid,
                                jacobian_bounds, make_point, smoothed_mode_sum, spectral_basis)
from deltaspec.pointinteraction import (CenterSet, ResolventImage, SampledFunction, alpha, alpha_bound,
                                        apply_resolvent_image, diagonal_inverse_bound, diagonal_inverse_shape,
                                        free_resolvent, free_resolvent_bound, free_resolvent_difference,
                                        inverse_norm_shape, principal_matrix, resolvent_kernel)
from deltaspec.registry import get_registry
from deltaspec.relativistic import (RelativisticModel, decay_bound, decay_functional, matrix_difference_residual,
                                    phi_inverse_log_bound, phi_inverse_log_shape, principal_matrix_modesum,
                                    principal_matrix_quadrature, subordination_check)
from deltaspec.reports import (BoundReport, Verdict, compare_to_bound, evaluate_sweep, fit_power_law, measured,
                               residual_verdict, worst_verdict)
from deltaspec.specialfn import DEFAULT_QUADRATURE, QuadratureSpec
from deltaspec.setup import logger, DEFAULT_THREADS

if TYPE_CHECKING:
    from deltaspec.configuration import RunConfig

BATTERY = ('gaussian', 'eigenmode', 'band_limited', 'away')
BAND_LIMIT = 32
SAMPLE_POINTS = 4


@dataclass(frozen=True, eq=False)
class PointSystem:
    """
    Non-relativistic centers on a geometry.

    :ivar modes: Size of the spectral basis carrying test functions (compact geometries).
    """
    manifold: ManifoldSpec
    centers: CenterSet
    modes: int = 256
    quadrature: Optional[QuadratureSpec] = None


@dataclass(frozen=True, eq=False)
class LeeSystem:
    """A Lee model restricted to one boson sector of a truncated Fock basis."""
    spec: LeeModelSpec
    basis: FockBasis
    bosons: int = 1


System = Union[PointSystem, RelativisticModel, LeeSystem]


def system_kind(system: System) -> str:
    if isinstance(system, PointSystem):
        return 'nonrelativistic'
    if isinstance(system, RelativisticModel):
        return 'relativistic'
    if isinstance(system, LeeSystem):
        return 'lee'
    raise DomainError(f"Unknown system {system!r}")


def system_manifold(system: System) -> ManifoldSpec:
    if isinstance(system, LeeSystem):
        return system.spec.manifold
    return system.manifold


def _tolerance(quadrature: Optional[QuadratureSpec]) -> float:
    return (quadrature or DEFAULT_QUADRATURE).relative_tolerance


def _heat_constants(manifold: ManifoldSpec) -> Tuple[Tuple[Tuple[str, float, str], ...], bool]:
    """``(name, value, provenance)`` of the heat-kernel constants, and whether any was calibrated."""
    constants = get_registry().heat_kernel_constants(manifold)
    rows = []
    for name, provenance in constants.provenance:
        rows.append((name, float(getattr(constants, name.lower())), provenance))
    return tuple(rows), any(provenance == 'calibrated' for _, _, provenance in rows)


def _constant_rows(manifold: ManifoldSpec, names: Sequence[str]) -> Tuple[Tuple[str, float, str], ...]:
    registry = get_registry()
    rows = []
    for name in names:
        constant = registry.constant(manifold, name)
        rows.append((name, constant.value, constant.provenance.value))
    return tuple(rows)


# Sample points and test functions --------------------------------------------------------

def sample_points(manifold: ManifoldSpec, count: int = SAMPLE_POINTS, seed: int = DEFAULT_SEED,
                  around: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Reproducible random points: uniform on the torus and the sphere, and within
    two length scales of ``around`` in flat space and on the hyperbolic plane.
    """
    rng = np.random.default_rng(seed)
    scale = manifold.length_scale
    if manifold.kind == ManifoldKind.FLAT_TORUS:
        return rng.uniform(0, 1, (count, manifold.dimension)) * np.array(manifold.sizes)
    if manifold.kind == ManifoldKind.SPHERE2:
        vectors = rng.normal(size=(count, 3))
        return vectors / np.linalg.norm(vectors, axis=-1, keepdims=True)
    base = np.asarray(around if around is not None else _origin(manifold), dtype=float)
    radii = rng.uniform(0.1, 2.0, count) * scale
    if manifold.kind == ManifoldKind.HYPERBOLIC2:
        angles = rng.uniform(0, 2 * math.pi, count)
        return exponential_map(manifold, base, radii[:, None] * np.stack((np.cos(angles), np.sin(angles)), axis=-1))
    directions = rng.normal(size=(count, manifold.dimension))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    return base + radii[:, None] * directions


def _origin(manifold: ManifoldSpec) -> np.ndarray:
    if manifold.kind == ManifoldKind.SPHERE2:
        return make_point(manifold, 0.5, 0.5)
    if manifold.kind == ManifoldKind.HYPERBOLIC2:
        return make_point(manifold, 0.0, 0.0)
    return make_point(manifold, *([0.0] * manifold.dimension))


def function_battery(system: PointSystem, seed: int = DEFAULT_SEED, kinds: Sequence[str] = BATTERY,
                     resolution: int = 64) -> Dict[str, ResolventImage]:
    """
    Unit-norm test functions as resolvent images: a Gaussian bump next to the
    first center, the lowest nonconstant eigenmode, a random band-limited
    function, and a compactly supported bump as far from the centers as the
    grid allows.

    :raises UnsupportedGeometryError: On geometries without a spectral basis.
    """
    manifold, centers = system.manifold, system.centers
    basis = spectral_basis(manifold, system.modes)
    scale = manifold.length_scale
    rng = np.random.default_rng(seed)
    grid = None
    battery: Dict[str, ResolventImage] = {}
    for kind in kinds:
        if kind in ('gaussian', 'away') and grid is None:
            grid = integration_grid(manifold, resolution)
        if kind == 'gaussian':
            offset = np.zeros(manifold.dimension)
            offset[0] = 0.15 * scale
            peak = exponential_map(manifold, centers.positions[0], offset)
            distance = np.asarray(geodesic_distance(manifold, grid.points, peak))
            samples = SampledFunction(grid, np.exp(-distance ** 2 / (2 * (0.1 * scale) ** 2)))
            image = ResolventImage.from_samples(manifold, centers, basis, samples, system.quadrature)
        elif kind == 'eigenmode':
            coefficients = np.zeros(basis.mode_count)
            coefficients[min(1, basis.mode_count - 1)] = 1.0
            image = ResolventImage.from_coefficients(manifold, centers, basis, coefficients, system.quadrature)
        elif kind == 'band_limited':
            band = min(BAND_LIMIT, basis.mode_count)
            coefficients = np.zeros(basis.mode_count, dtype=complex)
            coefficients[:band] = rng.normal(size=band)
            if basis.is_complex:
                coefficients[:band] += 1j * rng.normal(size=band)
            image = ResolventImage.from_coefficients(manifold, centers, basis, coefficients, system.quadrature)
        elif kind == 'away':
            nearest = np.min([geodesic_distance(manifold, grid.points, position) for position in centers.positions],
                             axis=0)
            peak = grid.points[int(np.argmax(nearest))]
            width = min(0.2 * scale, 0.9 * float(np.max(nearest)))
            distance = np.asarray(geodesic_distance(manifold, grid.points, peak))
            samples = SampledFunction(grid, np.clip(1 - (distance / width) ** 2, 0, None) ** 4)
            image = ResolventImage.from_samples(manifold, centers, basis, samples, system.quadrature)
        else:
            raise DomainError(f"Unknown test function {kind!r}; expected one of {', '.join(BATTERY)}")
        battery[kind] = image.scale(1 / image.norm())
    return battery


# Pseudo-resolvent identity --------------------------------------------------------------------

def identity_residual(image: ResolventImage, first: complex, second: complex) -> float:
    """
    ``||(R(E1) - R(E2)) f - (E1 - E2) R(E1) R(E2) f|| / ||R(E1) f||``, exact up to
    the Laplace quadrature.
    """
    if first == second:
        return 0.0
    at_first = apply_resolvent_image(image, first)
    at_second = apply_resolvent_image(image, second)
    product = apply_resolvent_image(at_second, first)
    residual = at_first - at_second - product.scale(first - second)
    return residual.norm() / at_first.norm()


def principal_difference_residual(manifold: ManifoldSpec, centers: CenterSet, first: complex, second: complex,
                                  quadrature: Optional[QuadratureSpec] = None) -> float:
    """
    Largest entrywise relative residual of
    ``Phi(E2) - Phi(E1) = R0(a_i, a_j | E1) - R0(a_i, a_j | E2)``, the
    right side taken from the finite difference transform.
    """
    if first == second:
        return 0.0
    phi_first = principal_matrix(manifold, centers, first, quadrature).entries
    phi_second = principal_matrix(manifold, centers, second, quadrature).entries
    count = centers.count
    difference = np.zeros((count, count), dtype=np.result_type(phi_first, phi_second))
    for i in range(count):
        for j in range(count):
            difference[i, j] = free_resolvent_difference(manifold, centers.positions[i], centers.positions[j],
                                                         first, second, quadrature)
    scale = np.maximum(np.abs(phi_first), 1e-300 + 1e-12 * np.max(np.abs(phi_first)))
    return float(np.max(np.abs(phi_second - phi_first - difference) / scale))


def check_resolvent_identity(system: System, first: complex, second: complex,
                             functions: Optional[Dict[str, ResolventImage]] = None, seed: int = DEFAULT_SEED,
                             threads: int = DEFAULT_THREADS) -> BoundReport:
    """
    The pseudo-resolvent identity ``R(E1) - R(E2) = (E1 - E2) R(E1) R(E2)``.

    Non-relativistic systems on compact geometries apply the full resolvent to
    each function of the test battery; every finite-rank model is also
    checked in closed matrix form (the principal-difference identity, the
    relativistic matrix identity, or the Lee vacuum identity).

    :param functions: Named test functions; the battery by default.
    """
    manifold = system_manifold(system)
    kind = system_kind(system)
    names: List[str] = []
    residuals: List[float] = []
    tolerances: List[float] = []
    if isinstance(system, PointSystem):
        if functions is None and manifold.is_compact:
            functions = function_battery(system, seed)
        for name in functions or {}:
            names.append(name)
            tolerances.append(IDENTITY_TOLERANCE)
        residuals.extend(evaluate_sweep(lambda image: identity_residual(image, first, second),
                                        (functions or {}).values(), threads))
        names.append('principal_difference')
        residuals.append(principal_difference_residual(manifold, system.centers, first, second, system.quadrature))
        tolerances.append(ROUTE_TOLERANCE)
    elif isinstance(system, RelativisticModel):
        names.append('matrix_difference')
        residuals.append(0.0 if first == second else matrix_difference_residual(system, first, second))
        tolerances.append(IDENTITY_TOLERANCE)
    else:
        names.append('vacuum_difference')
        residuals.append(0.0 if first == second else vacuum_identity_residual(system.spec, first, second))
        tolerances.append(IDENTITY_TOLERANCE)
    verdicts = []
    details = []
    for name, residual, tolerance in zip(names, residuals, tolerances):
        verdict, detail = residual_verdict([residual], tolerance)
        verdicts.append(verdict)
        if verdict != Verdict.HOLDS:
            details.append(f"{name}: {detail}")
    largest = max(residuals) if residuals else 0.0
    details.insert(0, f"largest residual {largest:.3e} at (E1, E2) = ({first}, {second})")
    values = tuple(measured([residual], tolerance, 'resolvent image' if name in BATTERY else 'matrix')[0]
                   for name, residual, tolerance in zip(names, residuals, tolerances))
    return BoundReport('resolvent_identity', kind, manifold.describe(), 'test function', tuple(names),
                       values, (), None, worst_verdict(verdicts), (), "; ".join(details))


# Strong limit -----------------------------------------------------------------------------------

def _limit_steps(k_max: int) -> np.ndarray:
    if k_max < 1:
        raise DomainError(f"k_max must be at least 1, got {k_max!r}")
    return 2 ** np.arange(int(math.log2(k_max)) + 1)


def _richardson_limit(magnitudes: np.ndarray, errors: np.ndarray, exponent: float) -> float:
    """Extrapolates the last two terms of ``e = e_inf + A |E|^p``."""
    if len(errors) < 2 or not np.isfinite(exponent) or exponent >= 0:
        return float(errors[-1])
    ratio = (magnitudes[-1] / magnitudes[-2]) ** exponent
    return float((errors[-1] - ratio * errors[-2]) / (1 - ratio))


def _decay_verdicts(steps: np.ndarray, magnitudes: np.ndarray, errors: np.ndarray) -> Tuple[List[Verdict],
                                                                                             List[str], Any]:
    tail = steps >= min(STRONG_LIMIT_START, int(steps[-1]))
    fit = fit_power_law(magnitudes[tail], errors[tail])
    limit = _richardson_limit(magnitudes[tail], errors[tail], fit.exponent)
    verdicts = []
    details = [f"decay exponent {fit.exponent:.3f} +- {fit.error:.3f}", f"extrapolated limit {limit:.3e}"]
    if np.sum(tail) > 1 and not np.all(np.diff(errors[tail]) < 0):
        verdicts.append(Verdict.VIOLATED)
        details.append(f"e_k not strictly decreasing for k >= {STRONG_LIMIT_START}")
    elif abs(limit) > 0.5 * errors[-1]:
        verdicts.append(Verdict.INCONCLUSIVE)
        details.append("the extrapolated limit is not small against the last term")
    else:
        verdicts.append(Verdict.HOLDS)
    return verdicts, details, fit


def _interaction_decay(manifold: ManifoldSpec, magnitudes: np.ndarray, interaction: np.ndarray) -> Tuple[Verdict,
                                                                                                       str]:
    """
    The interaction part times ``ln|E|`` (2D) or ``|E|^(1/4)`` (3D) may not grow
    by more than ``DECADE_GROWTH_LIMIT`` over the last decade of the sweep.
    """
    if manifold.dimension == 2:
        weighted = interaction * np.log(magnitudes)
        label = "interaction * ln|E|"
    else:
        weighted = interaction * magnitudes ** 0.25
        label = "interaction * |E|^(1/4)"
    decade = magnitudes >= magnitudes[-1] / 10
    start = weighted[np.argmax(decade)]
    growth = float(np.max(weighted[decade]) / start) if start > 0 else math.inf
    verdict = Verdict.HOLDS if growth <= DECADE_GROWTH_LIMIT else Verdict.VIOLATED
    return verdict, f"{label} grows by a factor {growth:.3f} over the last decade"


def check_strong_limit(system: System, function: Optional[Any] = None, k_max: int = 4096,
                       base_energy: Optional[float] = None, seed: int = DEFAULT_SEED) -> BoundReport:
    """
    ``e_k = || |E_k| R(E_k) f - f ||`` along ``E_k = -k |E_0|`` for
    ``k = 1, 2, 4, ..., k_max``.

    The sequence has to decrease strictly from ``k = 16`` on and extrapolate
    to zero; for point interactions the interaction part of ``|E_k| R(E_k) f``
    must also decay like the ``1/ln|E|`` (2D) or ``|E|^(-1/4)`` (3D) shapes.

    :param function: A :class:`ResolventImage` (point systems) or a sector
        vector (Lee systems); a Gaussian bump or the uniform vector by default.
    :param base_energy: ``E_0``; by default below every bound state.
    :raises UnsupportedGeometryError: For relativistic systems.
    """
    manifold = system_manifold(system)
    steps = _limit_steps(k_max)
    if isinstance(system, RelativisticModel):
        raise UnsupportedGeometryError("The strong-limit probe needs the one-particle dynamics, which the "
                                       "relativistic model does not carry")
    if isinstance(system, LeeSystem):
        energies, errors = lee_strong_limit(system.spec, system.basis, system.bosons, k_max, function)
        magnitudes = np.abs(energies)
        verdicts, details, fit = _decay_verdicts(steps, magnitudes, errors)
        return BoundReport('strong_limit', 'lee', manifold.describe(), 'k', tuple(steps.tolist()),
                           measured(errors, method='dense solve'), (), fit, worst_verdict(verdicts),
                           (), "; ".join(details))
    image = function if function is not None else function_battery(system, seed, ('gaussian',))['gaussian']
    if base_energy is None:
        base_energy = -(2 * float(np.max(system.centers.mu_squared)) + 1)
    magnitudes = steps * abs(base_energy)
    errors = []
    interaction = []
    for magnitude in magnitudes:
        energy = -float(magnitude)
        full = apply_resolvent_image(image, energy)
        free = image.apply_free_resolvent(energy)
        errors.append((full.scale(magnitude) - image).norm())
        interaction.append((full - free).norm() * magnitude)
        logger.debug(f"strong limit at E={energy:.4g}: e={errors[-1]:.4e}")
    error_array = np.array(errors)
    verdicts, details, fit = _decay_verdicts(steps, magnitudes, error_array)
    verdict, detail = _interaction_decay(manifold, magnitudes, np.array(interaction))
    verdicts.append(verdict)
    details.append(detail)
    return BoundReport('strong_limit', 'nonrelativistic', manifold.describe(), 'k', tuple(steps.tolist()),
                       measured(error_array, _tolerance(system.quadrature), 'resolvent image'), (), fit,
                       worst_verdict(verdicts), (), "; ".join(details))


# Symmetry ---------------------------------------------------------------------------------------

def _pairs(points: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
    return [(points[i], points[j]) for i in range(len(points)) for j in range(len(points)) if i != j]


def check_symmetry(system: System, energy: complex, points: Optional[np.ndarray] = None,
                   seed: int = DEFAULT_SEED) -> BoundReport:
    """
    ``R(E)^+ = R(E*)``: for point systems the kernel ``|R(x, y|E) - conj(R(y, x|E*))|``
    over sample pairs and ``Phi(E*) = Phi(E)^+``; for relativistic systems the
    same for the mode-sum kernel ``Psi``; for Lee systems the vacuum scalar and
    the Hermiticity of the sector operator at ``Re E``.
    """
    manifold = system_manifold(system)
    value = complex(energy)
    conjugate = value.conjugate()
    names: List[str] = []
    residuals: List[float] = []
    if isinstance(system, LeeSystem):
        spec = system.spec
        scalar = vacuum_principal(spec, value)
        names.append('vacuum')
        residuals.append(abs(vacuum_principal(spec, conjugate) - np.conj(scalar)) / max(1.0, abs(scalar)))
        real = min(value.real, spec.threshold(system.bosons) - 1.0)
        operator = build_principal_operator(spec, system.basis, system.bosons, real)
        names.append(f"sector n={system.bosons}")
        residuals.append(float(np.max(np.abs(operator - operator.conj().T)) / max(1.0, np.max(np.abs(operator)))))
    else:
        if points is None:
            around = system.centers.positions[0] if isinstance(system, PointSystem) else system.positions[0]
            points = sample_points(manifold, SAMPLE_POINTS, seed, around)
        for index, (x, y) in enumerate(_pairs(np.asarray(points))):
            if isinstance(system, PointSystem):
                forward = resolvent_kernel(manifold, system.centers, x, y, value, system.quadrature)
                backward = resolvent_kernel(manifold, system.centers, y, x, conjugate, system.quadrature)
            else:
                forward = _psi_kernel(system, x, y, value)
                backward = _psi_kernel(system, y, x, conjugate)
            names.append(f"pair {index}")
            residuals.append(abs(forward - np.conj(backward)) / max(1.0, abs(forward)))
        if isinstance(system, PointSystem):
            phi = principal_matrix(manifold, system.centers, value, system.quadrature).entries
            phi_conjugate = principal_matrix(manifold, system.centers, conjugate, system.quadrature).entries
            names.append('principal matrix')
            residuals.append(float(np.max(np.abs(phi_conjugate - phi.conj().T)) / max(1.0, np.max(np.abs(phi)))))
    verdict, details = residual_verdict(residuals, SYMMETRY_TOLERANCE)
    return BoundReport('symmetry', system_kind(system), manifold.describe(), 'sample', tuple(names),
                       measured(residuals, SYMMETRY_TOLERANCE), (), None, verdict, (),
                       f"E = {value}; {details}")


def _psi_kernel(model: RelativisticModel, x: np.ndarray, y: np.ndarray, energy: complex) -> complex:
    """``Psi(x, y | E) = sum_s f_s(x) conj(f_s(y)) / (w_s (w_s - E))`` off the diagonal."""
    if not energy.real < model.mass:
        raise DomainError(f"Relativistic energies need Re E below the mass {model.mass!r}, got {energy!r}")

    def weight(eigenvalues: np.ndarray) -> np.ndarray:
        omega = model.frequencies(eigenvalues)
        return 1 / (omega * (omega - energy))
    return complex(smoothed_mode_sum(model.manifold, x, y, weight).value)


# Bound sweeps -----------------------------------------------------------------------------------

def check_free_resolvent_bound(manifold: ManifoldSpec, center: Optional[np.ndarray] = None,
                               energies: Optional[Sequence[float]] = None,
                               distances: Optional[Sequence[float]] = None,
                               quadrature: Optional[QuadratureSpec] = None,
                               threads: int = DEFAULT_THREADS) -> BoundReport:
    """
    Sweeps ``R0(a, y | E)`` over a ``(d, |E|)`` grid against the 3D bound form.
    ``C13`` is calibrated on compact geometries; the fitted log-slope of the
    exponential argument against ``|E|`` must be ``1/2``.

    Grid points whose exponent ``sqrt(2 m |E|) d`` exceeds 25 are dropped.
    """
    if manifold.dimension != 3:
        raise UnsupportedGeometryError(f"The free-resolvent bound is three dimensional, got {manifold.describe()}")
    base = np.asarray(center if center is not None else _origin(manifold), dtype=float)
    scale = manifold.length_scale
    if energies is None:
        energies = -np.geomspace(1.0, 1e3, 7)
    if distances is None:
        reach = min(0.45 * scale, 0.9 * manifold.injectivity_radius)
        distances = np.linspace(0.1, 1.0, 5) * reach
    mass = manifold.mass
    grid = [(float(d), float(energy)) for d in distances for energy in energies
            if math.sqrt(2 * mass * abs(energy)) * d <= 25]

    def evaluate(point: Tuple[float, float]) -> float:
        distance, energy = point
        offset = np.zeros(3)
        offset[0] = distance
        return float(np.real(free_resolvent(manifold, base, exponential_map(manifold, base, offset), energy,
                                            quadrature)))

    values = np.array(evaluate_sweep(evaluate, grid, threads))
    names = ['C12', 'C13'] if manifold.is_compact else ['C14']
    registry = get_registry()
    if manifold.is_compact:
        constants = registry.heat_kernel_constants(manifold)
        c12 = registry.constant(manifold, 'C12').value
        ratios = []
        for (distance, energy), value in zip(grid, values):
            exponent = math.sqrt(mass * distance ** 2 * abs(energy) / constants.c3)
            leading = mass * c12 / distance * math.exp(-2 * exponent)
            shape = distance * math.sqrt(mass) / (manifold.volume * math.sqrt(abs(energy))) \
                * (1 + 1 / exponent) * math.exp(-2 * exponent)
            ratios.append(max(0.0, (value - leading) / shape))
        registry.calibrate(manifold, 'C13', ratios, "largest excess over the C12 term on the sweep")
    offsets = [np.array([distance, 0.0, 0.0]) for distance, _ in grid]
    bounds = np.array([free_resolvent_bound(manifold, base, exponential_map(manifold, base, offset), energy)
                       for offset, (_, energy) in zip(offsets, grid)])
    heat_rows, calibrated = _heat_constants(manifold)
    rows = heat_rows + _constant_rows(manifold, names)
    calibrated = calibrated or any(provenance == 'calibrated' for _, _, provenance in rows)
    verdict, details = compare_to_bound(values, bounds, 1e-8, calibrated)
    # exponent of the exponential decay at the smallest distance
    nearest = min(distance for distance, _ in grid)
    row = [(abs(energy), value) for (distance, energy), value in zip(grid, values) if distance == nearest]
    magnitudes = np.array([magnitude for magnitude, _ in row])
    arguments = -np.log(np.array([value for _, value in row]) * 2 * math.pi * nearest / mass)
    fit = fit_power_law(magnitudes, arguments)
    if not fit.matches(0.5):
        verdict = Verdict.VIOLATED
        details += f"; exponent slope {fit.exponent:.3f} is not 1/2"
    else:
        details += f"; exponent slope {fit.exponent:.3f}"
    return BoundReport('free_resolvent_bound', 'nonrelativistic', manifold.describe(), '(d, E)', tuple(grid),
                       measured(values, _tolerance(quadrature), 'quadrature'), measured(bounds, method='bound form'),
                       fit, verdict, rows, details)


def check_alpha_scaling(manifold: ManifoldSpec, centers: CenterSet, energies: Optional[Sequence[float]] = None,
                        quadrature: Optional[QuadratureSpec] = None,
                        threads: int = DEFAULT_THREADS) -> BoundReport:
    """``alpha_ii(E)`` against its bound form, with the fitted exponent ``D/2 - 2``."""
    grid = np.asarray(energies if energies is not None else -np.geomspace(10.0, 1e5, 9), dtype=float)
    values = np.array(evaluate_sweep(lambda energy: float(np.real(alpha(manifold, centers, 0, 0, float(energy),
                                                                        quadrature))), grid, threads))
    bounds = np.array([alpha_bound(manifold, float(energy)) for energy in grid])
    rows, calibrated = _heat_constants(manifold)
    rows = rows + _constant_rows(manifold, ['C6'])
    verdict, details = compare_to_bound(values, bounds, 1e-8, calibrated)
    fit = fit_power_law(np.abs(grid), values)
    expected = manifold.dimension / 2 - 2
    if not fit.matches(expected):
        verdict = Verdict.VIOLATED
    details += f"; exponent {fit.exponent:.3f} +- {fit.error:.3f} against {expected:g}"
    return BoundReport('alpha_scaling', 'nonrelativistic', manifold.describe(), 'E', tuple(grid.tolist()),
                       measured(values, _tolerance(quadrature), 'quadrature'), measured(bounds, method='bound form'),
                       fit, verdict, rows, details)


def _bounded_tail(grid: np.ndarray, normalized: np.ndarray) -> Tuple[Verdict, str, Any]:
    """``normalized`` stays bounded: its log-log slope over the upper half of the sweep is at most zero."""
    magnitudes = np.abs(grid)
    tail = magnitudes >= np.median(magnitudes)
    fit = fit_power_law(magnitudes[tail], normalized[tail])
    verdict = Verdict.HOLDS if fit.at_most(0.0, EXPONENT_TOLERANCE) else Verdict.VIOLATED
    return verdict, f"normalized tail slope {fit.exponent:.3f}", fit


def check_phi_inverse_scaling(system: System, energies: Optional[Sequence[float]] = None,
                              threads: int = DEFAULT_THREADS) -> BoundReport:
    """
    Non-relativistic systems: ``1/Phi_00(E)`` against the calibrated
    diagonal-inverse bound; the value over its ``1/ln`` (2D) or
    ``|E|^(-1/2)`` (3D) shape must stay bounded. In 3D ``||Phi^-1||`` also
    calibrates ``C11``.

    Relativistic systems: ``||Phi^-1(E)||`` against ``C16 / ln(|E|/(m - mu))``.
    """
    manifold = system_manifold(system)
    registry = get_registry()
    if isinstance(system, RelativisticModel):
        grid = np.asarray(energies if energies is not None else -np.geomspace(10.0, 1e4, 7) * system.mass,
                          dtype=float)
        values = np.array(evaluate_sweep(lambda energy: principal_matrix_quadrature(system, float(energy))
                                         .inverse_norm(), grid, threads))
        shapes = np.array([phi_inverse_log_shape(system, float(energy)) for energy in grid])
        if not registry.has(manifold, 'C16') and manifold.kind not in (ManifoldKind.FLAT_TORUS,
                                                                       ManifoldKind.FLAT_SPACE):
            registry.calibrate(manifold, 'C16', values / shapes, "largest ||Phi^-1|| ln(|E|/(m - mu)) on the sweep")
        bounds = np.array([phi_inverse_log_bound(system, float(energy)) for energy in grid])
        rows = _constant_rows(manifold, ['C16'])
        verdict, details = compare_to_bound(values, bounds, 1e-8, rows[0][2] == 'calibrated')
        tail_verdict, tail_details, fit = _bounded_tail(grid, values / shapes)
        return BoundReport('phi_inverse_scaling', 'relativistic', manifold.describe(), 'E', tuple(grid.tolist()),
                           measured(values, DEFAULT_QUADRATURE.relative_tolerance, 'quadrature'),
                           measured(bounds, method='bound form'), fit, worst_verdict([verdict, tail_verdict]), rows,
                           f"{details}; {tail_details}")
    if not isinstance(system, PointSystem):
        raise UnsupportedGeometryError("The principal-matrix inverse sweep applies to point interactions")
    centers = system.centers
    mu = centers.mu[0]
    scale = max(1.0, float(np.max(centers.mu_squared)))
    grid = np.asarray(energies if energies is not None else -np.geomspace(10.0, 1e5, 9) * scale, dtype=float)
    matrices = evaluate_sweep(lambda energy: principal_matrix(manifold, centers, float(energy), system.quadrature),
                              grid, threads)
    values = np.array([1 / matrix.entries[0, 0] for matrix in matrices])
    shapes = np.array([diagonal_inverse_shape(manifold, mu, float(energy)) for energy in grid])
    name = {(True, 2): 'C7', (True, 3): 'C8', (False, 2): 'C9', (False, 3): 'C10'}[
        (manifold.is_compact, manifold.dimension)]
    registry.calibrate(manifold, name, values / shapes, "largest 1/Phi_ii over its shape on the sweep")
    bounds = np.array([diagonal_inverse_bound(manifold, centers, float(energy))[0] for energy in grid])
    names = [name]
    verdicts = []
    verdict, details = compare_to_bound(values, bounds, 1e-8, True)
    verdicts.append(verdict)
    if manifold.dimension == 3:
        norms = np.array([matrix.inverse_norm() for matrix in matrices])
        norm_shapes = np.array([inverse_norm_shape(manifold, float(energy)) for energy in grid])
        c11 = registry.calibrate(manifold, 'C11', norms / norm_shapes, "largest ||Phi^-1|| over its shape")
        norm_verdict, norm_details = compare_to_bound(norms, c11.value * norm_shapes, 1e-8, True)
        verdicts.append(norm_verdict)
        details += f"; ||Phi^-1||: {norm_details}"
        names.append('C11')
    tail_verdict, tail_details, fit = _bounded_tail(grid, values / shapes)
    verdicts.append(Verdict.HOLDS_WITH_CALIBRATION if tail_verdict == Verdict.HOLDS else tail_verdict)
    return BoundReport('phi_inverse_scaling', 'nonrelativistic', manifold.describe(), 'E', tuple(grid.tolist()),
                       measured(values, _tolerance(system.quadrature), 'quadrature'),
                       measured(bounds, method='bound form'), fit, worst_verdict(verdicts),
                       _constant_rows(manifold, names), f"{details}; {tail_details}")


def check_heat_bounds(manifold: ManifoldSpec, seed: int = DEFAULT_SEED, count: int = 6,
                      threads: int = DEFAULT_THREADS) -> BoundReport:
    """
    The Gaussian upper bound against the heat kernel at random point pairs and
    times inside the calibration range, plus the small-time diagonal exponent
    ``-D/2``.
    """
    points = sample_points(manifold, count, seed)
    scale = manifold.length_scale ** 2 / manifold.kappa
    times = np.geomspace(2e-3, 5.0, 9) * scale
    grid = [(i, j, float(t)) for i in range(count) for j in range(i, count) for t in times]

    def evaluate(point: Tuple[int, int, float]) -> Tuple[float, float]:
        i, j, t = point
        return (float(heat_kernel(manifold, points[i], points[j], t)),
                float(heat_kernel_upper_bound(manifold, points[i], points[j], t)))

    pairs = evaluate_sweep(evaluate, grid, threads)
    values = np.array([value for value, _ in pairs])
    bounds = np.array([bound for _, bound in pairs])
    rows, calibrated = _heat_constants(manifold)
    verdict, details = compare_to_bound(values, bounds, HEAT_BOUND_TOLERANCE, calibrated)
    short = np.geomspace(1e-4, 1e-3, 5) * scale
    diagonal = np.array([heat_kernel(manifold, points[0], points[0], float(t)) for t in short])
    fit = fit_power_law(short, diagonal)
    expected = -manifold.dimension / 2
    if not fit.matches(expected):
        verdict = Verdict.VIOLATED
    details += f"; small-time exponent {fit.exponent:.3f} against {expected:g}"
    labels = tuple(f"{float(geodesic_distance(manifold, points[i], points[j])):.6g}@{t:.6g}" for i, j, t in grid)
    return BoundReport('heat_bounds', 'geometry', manifold.describe(), 'd@t', labels,
                       measured(values, method='heat kernel'), measured(bounds, method='bound form'), fit, verdict,
                       rows, details)


def check_jacobian_bounds(manifold: ManifoldSpec, center: Optional[np.ndarray] = None,
                          radii: Optional[Sequence[float]] = None) -> BoundReport:
    """
    The measured Jacobian ``J(r) = length(circle of radius r) / (2 pi r)``
    against the Bishop-Gunther bounds.

    :raises UnsupportedGeometryError: Outside 2D.
    """
    if manifold.dimension != 2:
        raise UnsupportedGeometryError(f"Geodesic circles are measured on 2D geometries, got {manifold.describe()}")
    base = np.asarray(center if center is not None else _origin(manifold), dtype=float)
    if radii is None:
        reach = 0.9 * manifold.injectivity_radius if math.isfinite(manifold.injectivity_radius) \
            else 3 * manifold.length_scale
        radii = np.linspace(0.05, 1.0, 10) * reach
    grid = np.asarray(radii, dtype=float)
    values = np.array([geodesic_circle_length(manifold, base, float(r)) / (2 * math.pi * r) for r in grid])
    limits = [jacobian_bounds(manifold, float(r)) for r in grid]
    lower = np.array([low for low, _ in limits])
    upper = np.array([high for _, high in limits])
    verdict, details = compare_to_bound(values, upper, 1e-8, False)
    if np.any(values < lower * (1 - 1e-8)):
        worst = int(np.argmin(values - lower))
        verdict = Verdict.VIOLATED
        details = f"J={values[worst]:.10g} below the lower bound {lower[worst]:.10g} at r={grid[worst]:g}"
    return BoundReport('jacobian_bounds', 'geometry', manifold.describe(), 'r', tuple(grid.tolist()),
                       measured(values, 1e-10, 'geodesic polygon'), measured(upper, method='sn comparison'), None,
                       verdict, (), details)


# Relativistic checks ----------------------------------------------------------------------------

def check_route_agreement(model: RelativisticModel, energies: Optional[Sequence[float]] = None,
                          threads: int = DEFAULT_THREADS) -> BoundReport:
    """Relative agreement of the heat-kernel and mode-sum routes to the principal matrix."""
    grid = np.asarray(energies if energies is not None else np.array([-1.0, -10.0, -100.0]) * model.mass,
                      dtype=float)

    def evaluate(energy: float) -> float:
        quadrature = principal_matrix_quadrature(model, float(energy)).entries
        modesum = principal_matrix_modesum(model, float(energy)).entries
        return float(np.max(np.abs(quadrature - modesum)) / np.max(np.abs(quadrature)))

    residuals = evaluate_sweep(evaluate, grid, threads)
    verdict, details = residual_verdict(residuals, ROUTE_TOLERANCE)
    return BoundReport('route_agreement', 'relativistic', model.manifold.describe(), 'E', tuple(grid.tolist()),
                       measured(residuals, ROUTE_TOLERANCE, 'quadrature vs modesum'), (), None, verdict, (), details)


def check_subordination(mass: float = 1.0, distances: Sequence[float] = (0.5, 1.0, 2.0),
                        eigenvalues: Sequence[float] = (0.0, 1.0, 10.0)) -> BoundReport:
    """The subordination identity on an ``(s, lambda)`` grid."""
    grid = [(float(s), float(eigenvalue)) for s in distances for eigenvalue in eigenvalues]
    residuals = [subordination_check(s, mass, eigenvalue).residual for s, eigenvalue in grid]
    verdict, details = residual_verdict(residuals, SUBORDINATION_TOLERANCE)
    return BoundReport('subordination', 'relativistic', f"m={mass:g}", '(s, lambda)', tuple(grid),
                       measured(residuals, SUBORDINATION_TOLERANCE, 'quadrature'), (), None, verdict, (), details)


def check_decay(model: RelativisticModel, energies: Optional[Sequence[float]] = None, index: int = 0,
                threads: int = DEFAULT_THREADS) -> BoundReport:
    """
    The decay functional ``I(E)`` against ``C27/|E| + C26/(V |E|^3)``, with
    ``C26`` calibrated from the excess over the leading term and the fitted
    exponent ``-1``.
    """
    manifold = model.manifold
    grid = np.asarray(energies if energies is not None else -np.geomspace(1e2, 1e6, 9) * model.mass, dtype=float)
    results = evaluate_sweep(lambda energy: decay_functional(model, index, float(energy)), grid, threads)
    values = np.array([result.value for result in results])
    registry = get_registry()
    c27 = registry.constant(manifold, 'C27').value
    magnitudes = np.abs(grid)
    excess = np.maximum(0.0, (values - c27 / magnitudes) * manifold.volume * magnitudes ** 3)
    registry.calibrate(manifold, 'C26', excess, "largest excess of I(E) over C27/|E|, times V |E|^3")
    bounds = np.array([decay_bound(model, float(energy)) for energy in grid])
    rows = _constant_rows(manifold, ['C26', 'C27'])
    verdict, details = compare_to_bound(values, bounds, 1e-8, True)
    fit = fit_power_law(magnitudes, values)
    if not fit.matches(-1.0):
        verdict = Verdict.VIOLATED
    details += f"; exponent {fit.exponent:.3f} +- {fit.error:.3f}"
    errors = [result.error for result in results]
    return BoundReport('decay', 'relativistic', manifold.describe(), 'E', tuple(grid.tolist()),
                       tuple(measured([value], error, 'smoothed mode sum')[0] for value, error in zip(values, errors)),
                       measured(bounds, method='bound form'), fit, verdict, rows, details)


# Suite ------------------------------------------------------------------------------------------

def _safe(name: str, system: System, job: Callable[[], BoundReport]) -> BoundReport:
    try:
        return job()
    except DeltaspecError as error:
        logger.warning(f"{name} could not run: {error}")
        return BoundReport(name, system_kind(system), system_manifold(system).describe(), '', (), (),
                           verdict=Verdict.INCONCLUSIVE, details=str(error))


def suite_jobs(system: System, config: 'RunConfig') -> List[Tuple[str, Callable[[], BoundReport]]]:
    """The battery that applies to ``system``, as named zero-argument jobs."""
    task = config.task
    manifold = system_manifold(system)
    first, second = task.pair
    energy = complex(*task.complex_energy)
    seed = task.seed
    jobs: List[Tuple[str, Callable[[], BoundReport]]] = [
        ('resolvent_identity', lambda: check_resolvent_identity(system, first, second, seed=seed)),
        ('symmetry', lambda: check_symmetry(system, energy, seed=seed)),
    ]
    if isinstance(system, PointSystem):
        if manifold.is_compact:
            jobs.append(('strong_limit', lambda: check_strong_limit(system, k_max=task.k_max, seed=seed)))
        jobs.append(('alpha_scaling', lambda: check_alpha_scaling(manifold, system.centers)))
        jobs.append(('phi_inverse_scaling', lambda: check_phi_inverse_scaling(system)))
        if manifold.dimension == 3:
            jobs.append(('free_resolvent_bound',
                         lambda: check_free_resolvent_bound(manifold, system.centers.positions[0])))
    elif isinstance(system, RelativisticModel):
        jobs.append(('route_agreement', lambda: check_route_agreement(system)))
        jobs.append(('phi_inverse_scaling', lambda: check_phi_inverse_scaling(system)))
        jobs.append(('subordination', lambda: check_subordination(system.mass)))
        jobs.append(('decay', lambda: check_decay(system)))
    else:
        spec, basis, bosons = system.spec, system.basis, system.bosons
        jobs.append(('strong_limit', lambda: check_strong_limit(system, k_max=task.k_max)))
        jobs.append(('u1_tilde_bound', lambda: u1_tilde_bound_check(spec, basis, max(bosons, 1))))
        jobs.append(('relative_bound', lambda: relative_bound_check(spec, basis, max(bosons, 1))))
        jobs.append(('ground_state_bound', lambda: ground_state_bound_check(spec, basis, max(bosons, 1))))
    jobs.append(('heat_bounds', lambda: check_heat_bounds(manifold, seed)))
    if manifold.dimension == 2:
        jobs.append(('jacobian_bounds', lambda: check_jacobian_bounds(manifold)))
    return jobs


def run_suite(config: 'RunConfig', system: Optional[System] = None) -> List[BoundReport]:
    """
    Runs the whole battery for the configured system on a thread pool and
    returns the reports in battery order. A check that cannot run reports
    ``inconclusive`` with the error message.
    """
    system = system if system is not None else config.build_system()
    jobs = suite_jobs(system, config)
    threads = max(1, config.threads)
    logger.info(f"Running {len(jobs)} checks on {system_manifold(system).describe()} with {threads} thread(s)")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_safe, name, system, job) for name, job in jobs]
        return [future.result() for future in futures]
