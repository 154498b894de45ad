"""
Relativistic point interactions in two dimensions, restricted to the
no-particle sector.

Everything is expressed through

    Psi_ij(E) = sum_s f_s(a_i) conj(f_s(a_j)) / (w_s (w_s - E)),  w_s = sqrt(lambda_s + m^2),

with ``Phi_ii(E) = Psi_ii(mu_i) - Psi_ii(E)`` and ``Phi_ij(E) = -Psi_ij(E)``.
The heat-kernel route writes ``1/(w (w - E))`` as a double integral over
``(s, u)``; the spectral route sums the modes with a smooth cutoff.
"""
import math
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from deltaspec.constants import SCAN_POINTS
from deltaspec.errors import DomainError, TruncationError, UnsupportedGeometryError
from deltaspec.manifold import (ManifoldSpec, separation, kernel_of_separation, smoothed_mode_sum, default_cutoff,
                                spectral_basis)
from deltaspec.pointinteraction import PrincipalMatrixValue, BoundState, eigenvalue_crossings, check_window
from deltaspec.specialfn import QuadratureSpec, double_integral_su, laplace_integral
from deltaspec.setup import logger


@dataclass(frozen=True, eq=False)
class RelativisticModel:
    """
    :ivar manifold: A 2D geometry with ``kappa = 1``.
    :ivar positions: Center positions.
    :ivar mass: Boson mass ``m``.
    :ivar mu: Bound-state parameters, each below ``m``.
    """
    manifold: ManifoldSpec
    positions: Tuple[np.ndarray, ...]
    mass: float
    mu: Tuple[float, ...]

    def __post_init__(self) -> None:
        if self.manifold.dimension != 2:
            raise UnsupportedGeometryError(f"Relativistic point interactions are two dimensional, got "
                                           f"{self.manifold.describe()}")
        if self.manifold.kappa != 1.0:
            raise DomainError(f"The relativistic convention needs kappa = 1, got {self.manifold.kappa!r}")
        if not self.mass > 0:
            raise DomainError(f"The boson mass must be positive, got {self.mass!r}")
        if len(self.mu) != len(self.positions) or not self.positions:
            raise DomainError(f"Got {len(self.positions)} centers but {len(self.mu)} bound-state parameters")
        if max(self.mu) >= self.mass:
            raise DomainError(f"Bound-state parameters must lie below the mass {self.mass!r}, got {self.mu!r}")

    @classmethod
    def build(cls, manifold: ManifoldSpec, positions: Sequence[Any], mass: float, mu: Any) -> 'RelativisticModel':
        points = tuple(np.asarray(position, dtype=float) for position in positions)
        mus = tuple(float(value) for value in np.broadcast_to(np.asarray(mu, dtype=float), (len(points),)))
        return cls(manifold, points, float(mass), mus)

    @property
    def count(self) -> int:
        return len(self.positions)

    @property
    def threshold(self) -> float:
        return self.mass

    def frequencies(self, eigenvalues: Any) -> np.ndarray:
        return np.sqrt(np.asarray(eigenvalues) + self.mass ** 2)


def _check_energy(model: RelativisticModel, energy: float) -> float:
    value = float(energy)
    if not value < model.mass:
        raise DomainError(f"Relativistic energies must lie below the mass {model.mass!r}, got {energy!r}")
    return value


def principal_matrix_quadrature(model: RelativisticModel, energy: float,
                                quadrature: Optional[QuadratureSpec] = None) -> PrincipalMatrixValue:
    """
    Principal matrix from the double integral

        Psi_ij(E) = pi^-1/2 int ds exp(-s^2/4) int du exp(-u m^2) K_u(a_i, a_j) exp(s E sqrt(u)),

    with the diagonal carrying the ``exp(s mu_i sqrt(u)) - exp(s E sqrt(u))``
    difference so it never needs the divergent ``Psi_ii``.
    """
    value = _check_energy(model, energy)
    manifold = model.manifold
    count = model.count
    mu = np.array(model.mu)
    top = max(0.0, float(np.max(mu)), value)
    gap = manifold.spectral_gap
    u_decay = model.mass ** 2 - top ** 2 + gap
    points = np.array(model.positions)
    separations = separation(manifold, points[:, None, :], points[None, :, :])

    def integrand(s: np.ndarray, u: np.ndarray) -> np.ndarray:
        root = np.sqrt(u)
        kernel = kernel_of_separation(manifold, separations[None, None, ...],
                                      u[..., None, None]) * np.exp(gap * u)[..., None, None]
        base = -s ** 2 / 4 - top ** 2 * u
        with np.errstate(over='ignore', under='ignore'):
            energy_term = np.exp(base + s * value * root)
            values = -energy_term[..., None, None] * kernel
            for i in range(count):
                shift = s * (mu[i] - value) * root
                small = np.abs(shift) < 1
                difference = np.where(small, energy_term * np.expm1(np.where(small, shift, 0.0)),
                                      np.exp(base + s * mu[i] * root) - energy_term)
                values[..., i, i] = difference * kernel[..., i, i]
        return values

    entries = double_integral_su(integrand, quadrature, u_decay_rate=u_decay, drift=top,
                                 weight_in_integrand=True) / math.sqrt(math.pi)
    entries = np.real((np.asarray(entries) + np.asarray(entries).T) / 2)
    return PrincipalMatrixValue(value, entries)


def _psi_weights(model: RelativisticModel, first: float, second: Optional[float] = None):
    """``g(lambda) = 1/(w (w - E1))``, or the difference ``g(E1) - g(E2)`` in cancellation-free form."""
    def weight(eigenvalues: np.ndarray) -> np.ndarray:
        omega = model.frequencies(eigenvalues)
        if second is None:
            return 1 / (omega * (omega - first))
        return (first - second) / (omega * (omega - first) * (omega - second))
    return weight


def _mode_sum(model: RelativisticModel, i: int, j: int, weight, cutoff: Optional[float],
              tolerance: Optional[float]):
    return smoothed_mode_sum(model.manifold, model.positions[i], model.positions[j], weight, cutoff, tolerance)


def psi_difference(model: RelativisticModel, first: float, second: float, cutoff: Optional[float] = None,
                   tolerance: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """``Psi(E1) - Psi(E2)`` as a matrix, with its estimated error."""
    count = model.count
    entries = np.zeros((count, count))
    error = 0.0
    weight = _psi_weights(model, first, second)
    for i in range(count):
        for j in range(i, count):
            result = _mode_sum(model, i, j, weight, cutoff, tolerance)
            entries[i, j] = entries[j, i] = float(np.real(result.value))
            error = max(error, result.error)
    return entries, error


def principal_matrix_modesum(model: RelativisticModel, energy: float, cutoff: Optional[float] = None,
                             tolerance: Optional[float] = 1e-8) -> PrincipalMatrixValue:
    """
    Principal matrix from the spectral sums, with the smooth cutoff raised
    until the estimated tail is below a tenth of ``tolerance``.

    :raises UnsupportedGeometryError: Without a spectral basis.
    :raises TruncationError: If the largest cutoff still misses ``tolerance``.
    """
    value = _check_energy(model, energy)
    manifold = model.manifold
    if not manifold.is_compact:
        raise UnsupportedGeometryError(f"The mode-sum route needs a compact geometry, got {manifold.describe()}")
    cutoffs = [cutoff] if cutoff else [default_cutoff(manifold) / 4, default_cutoff(manifold)]
    count = model.count
    for scale in cutoffs:
        entries = np.zeros((count, count))
        error = 0.0
        for i in range(count):
            diagonal = _mode_sum(model, i, i, _psi_weights(model, model.mu[i], value), scale, None)
            entries[i, i] = float(np.real(diagonal.value))
            error = max(error, diagonal.error)
            for j in range(i + 1, count):
                off = _mode_sum(model, i, j, _psi_weights(model, value), scale, None)
                entries[i, j] = entries[j, i] = -float(np.real(off.value))
                error = max(error, off.error)
        scale_of_matrix = float(np.max(np.abs(entries))) or 1.0
        if tolerance is None or error <= 0.1 * tolerance * scale_of_matrix:
            return PrincipalMatrixValue(value, entries, error)
        logger.debug(f"principal_matrix_modesum: error {error:.2e} at cutoff {scale:.3e}, raising the cutoff")
    raise TruncationError(f"Mode sums for the relativistic principal matrix at E={value!r} keep an estimated "
                          f"error {error:.3e}, above {tolerance:.1e} relative")


@dataclass(frozen=True)
class SubordinationResult:
    lhs: float
    rhs: float
    residual: float


def subordination_check(s: float, mass: float, eigenvalue: float,
                        quadrature: Optional[QuadratureSpec] = None) -> SubordinationResult:
    """
    Compares ``exp(-s w)`` with
    ``(s / 2 sqrt(pi)) int du u^-3/2 exp(-s^2/(4u) - w^2 u)`` for ``w^2 = lambda + m^2``.
    """
    if not s > 0:
        raise DomainError(f"subordination_check needs s > 0, got {s!r}")
    if mass < 0 or eigenvalue < 0:
        raise DomainError(f"subordination_check needs m >= 0 and lambda >= 0, got {mass!r}, {eigenvalue!r}")
    omega_squared = eigenvalue + mass ** 2
    omega = math.sqrt(omega_squared)
    lhs = math.exp(-s * omega)
    if omega_squared == 0:
        rhs = laplace_integral(lambda v: 1 / np.sqrt(math.pi * v), 1.0, quadrature)
    else:
        def integrand(u: np.ndarray) -> np.ndarray:
            with np.errstate(under='ignore'):
                return s / (2 * math.sqrt(math.pi)) * u ** -1.5 * np.exp(-s ** 2 / (4 * u))
        rhs = laplace_integral(integrand, omega_squared, quadrature, peak_time=s / (2 * omega))
    return SubordinationResult(lhs, float(rhs), abs(lhs - float(rhs)) / lhs)


@dataclass(frozen=True)
class DecayValue:
    """
    :ivar value: The decay functional.
    :ivar error: Estimated error (smoothed sums) or Weyl tail beyond the last mode (truncated sums).
    :ivar modes: How many modes were summed.
    """
    value: float
    error: float
    modes: int


def _decay_weight(model: RelativisticModel, magnitude: float):
    def weight(eigenvalues: np.ndarray) -> np.ndarray:
        omega = model.frequencies(eigenvalues)
        return 1 / (omega * (omega + magnitude) ** 2)
    return weight


def decay_functional(model: RelativisticModel, index: int, energy: float, modes: Optional[int] = None,
                     tolerance: Optional[float] = None) -> DecayValue:
    """
    ``I(E) = sum_s |f_s(a)|^2 / (w_s (w_s + |E|)^2)``.

    With ``modes`` the sum is truncated to the lowest modes and the error is
    the Weyl estimate of the missing tail; otherwise the smoothed sum is used.

    :raises TruncationError: If ``tolerance`` is given and the tail is larger.
    """
    if not energy < 0:
        raise DomainError(f"decay_functional needs E < 0, got {energy!r}")
    manifold = model.manifold
    if not manifold.is_compact:
        raise UnsupportedGeometryError(f"decay_functional needs a spectral basis, got {manifold.describe()}")
    weight = _decay_weight(model, abs(energy))
    center = model.positions[index]
    if modes is None:
        result = smoothed_mode_sum(manifold, center, center, weight)
        value, error, used = float(np.real(result.value)), result.error, result.mode_count
    else:
        basis = spectral_basis(manifold, modes)
        values = np.abs(basis.evaluate(center)) ** 2
        value = float(np.sum(values * weight(basis.eigenvalues)))
        top = float(model.frequencies(basis.eigenvalues[-1]))
        error = 1 / (2 * math.pi * (top + abs(energy)))
        used = modes
    if tolerance is not None and error > tolerance * value:
        raise TruncationError(f"decay_functional at E={energy!r}: tail {error:.3e} exceeds {tolerance:.1e} "
                              f"relative with {used} modes")
    return DecayValue(value, error, used)


def rel_bound_states(model: RelativisticModel, window: Tuple[float, float], route: str = 'quadrature',
                     quadrature: Optional[QuadratureSpec] = None,
                     scan_points: int = SCAN_POINTS) -> List[BoundState]:
    """
    Energies in ``window`` (below the mass) where the relativistic principal
    matrix is singular.

    :param route: ``'quadrature'`` or ``'modesum'``.
    """
    low, high = check_window(window, model.mass, "relativistic bound states")
    if route == 'modesum':
        def evaluate(energy: float) -> np.ndarray:
            return principal_matrix_modesum(model, energy).entries
    elif route == 'quadrature':
        def evaluate(energy: float) -> np.ndarray:
            return principal_matrix_quadrature(model, energy, quadrature).entries
    else:
        raise DomainError(f"Unknown route {route!r}; expected 'quadrature' or 'modesum'")
    return eigenvalue_crossings(evaluate, (low, high), scan_points, "relativistic principal matrix")


def matrix_difference_residual(model: RelativisticModel, first: float, second: float,
                               quadrature: Optional[QuadratureSpec] = None) -> float:
    """
    Elementwise residual of ``Phi(E1) - Phi(E2) + [Psi(E1) - Psi(E2)] = 0``,
    with ``Phi`` from the heat-kernel route and ``Psi`` from the mode sums,
    relative to the largest entry of ``Phi(E1)``.
    """
    phi_first = principal_matrix_quadrature(model, first, quadrature).entries
    phi_second = principal_matrix_quadrature(model, second, quadrature).entries
    psi, _ = psi_difference(model, _check_energy(model, first), _check_energy(model, second))
    residual = phi_first - phi_second + psi
    return float(np.max(np.abs(residual)) / np.max(np.abs(phi_first)))


def phi_inverse_log_shape(model: RelativisticModel, energy: float) -> float:
    """``1 / ln(|E| / (m - mu_min))``."""
    return 1 / math.log(abs(energy) / (model.mass - min(model.mu)))


def phi_inverse_log_bound(model: RelativisticModel, energy: float) -> float:
    """
    ``C16 / ln(|E| / (m - mu_min))``; ``C16 = 2 pi`` on flat geometries and a
    calibrated constant elsewhere.
    """
    from deltaspec.registry import get_registry
    return get_registry().constant(model.manifold, 'C16').value * phi_inverse_log_shape(model, energy)


def decay_bound(model: RelativisticModel, energy: float) -> float:
    """``C27/|E| + C26/(V |E|^3)``."""
    from deltaspec.registry import get_registry
    registry = get_registry()
    magnitude = abs(energy)
    value = registry.constant(model.manifold, 'C27').value / magnitude
    if registry.has(model.manifold, 'C26'):
        value += registry.constant(model.manifold, 'C26').value / (model.manifold.volume * magnitude ** 3)
    return value
