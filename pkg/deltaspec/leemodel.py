"""
The non-relativistic Lee model: a static source at a point ``a`` of a compact
geometry coupled to a boson field, truncated to the lowest ``M`` boson modes
and at most ``n_max`` bosons.

On the n-boson sector the principal operator splits as

    ``Phi(E) = K(E) - U1(E) - U2(E)``,   ``K(E) = H0 - E + mu``,

with ``U1 = -lambda^2 S1`` diagonal and ``U2 = lambda^2 S2`` built from boson
hops ``a_sigma^+ W(E) a_tau``. A boson in mode ``sigma`` carries energy
``kappa * lambda_sigma + m`` with ``kappa = 1/(2m)``; the rest energy can be
overridden on :class:`LeeModelSpec`.
"""
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from deltaspec.errors import DomainError, PositivityError, UnsupportedGeometryError, WindowError
from deltaspec.manifold import (ManifoldSpec, SpectralBasis, spectral_basis, separation, smoothed_mode_sum,
                                integration_grid, heat_kernel)
from deltaspec.pointinteraction import kernel_laplace_transform, eigenvalue_crossings, check_window
from deltaspec.registry import ConstantsRegistry, Provenance, get_registry
from deltaspec.reports import (BoundReport, Verdict, fit_power_law, measured, evaluate_sweep, worst_verdict)
from deltaspec.specialfn import QuadratureSpec
from deltaspec.constants import ROOT_RELATIVE_TOLERANCE, SCAN_POINTS
from deltaspec.setup import logger, DEFAULT_THREADS

DEFAULT_MODES = 25
DEFAULT_MAX_BOSONS = 2
DEFAULT_SIDES = (2 * math.pi, 2 * math.pi)


@dataclass(frozen=True, eq=False)
class FockBasis:
    """
    Occupation-number states over a truncated set of boson modes, graded by
    boson number and ordered lexicographically (mode 0 most significant,
    higher occupations first) inside each grade.

    :ivar modes: The one-boson modes.
    :ivar max_bosons: Largest total boson number.
    :ivar states: Occupation vectors, shape ``(count, mode_count)``.
    """
    modes: SpectralBasis
    max_bosons: int
    states: np.ndarray

    @classmethod
    def build(cls, modes: SpectralBasis, max_bosons: int) -> 'FockBasis':
        if max_bosons < 0:
            raise DomainError(f"The boson cutoff must be nonnegative, got {max_bosons}")
        count = modes.mode_count
        rows: List[np.ndarray] = []
        for total in range(max_bosons + 1):
            for occupied in combinations_with_replacement(range(count), total):
                row = np.zeros(count, dtype=int)
                np.add.at(row, list(occupied), 1)
                rows.append(row)
        states = np.array(rows, dtype=int).reshape(-1, count)
        states.setflags(write=False)
        return cls(modes, max_bosons, states)

    @property
    def mode_count(self) -> int:
        return self.modes.mode_count

    @property
    def count(self) -> int:
        return len(self.states)

    @property
    def boson_numbers(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def sector(self, bosons: int) -> np.ndarray:
        """Indices of the states with exactly ``bosons`` bosons."""
        if not 0 <= bosons <= self.max_bosons:
            raise DomainError(f"Sector n={bosons} lies outside this basis (n_max={self.max_bosons})")
        return np.flatnonzero(self.boson_numbers == bosons)

    def index(self, occupation: Tuple[int, ...]) -> int:
        return self._positions()[tuple(int(value) for value in occupation)]

    def _positions(self) -> Dict[Tuple[int, ...], int]:
        positions = self.__dict__.get('_position_cache')
        if positions is None:
            positions = {tuple(int(value) for value in row): index for index, row in enumerate(self.states)}
            object.__setattr__(self, '_position_cache', positions)
        return positions


def fock_basis(manifold: ManifoldSpec, mode_count: int = DEFAULT_MODES,
               max_bosons: int = DEFAULT_MAX_BOSONS) -> FockBasis:
    """The truncated Fock basis over the lowest ``mode_count`` eigenmodes of ``manifold``."""
    return FockBasis.build(spectral_basis(manifold, mode_count), max_bosons)


@dataclass(frozen=True, eq=False)
class LeeModelSpec:
    """
    :ivar manifold: A compact 2D or 3D geometry whose ``kappa`` is ``1/(2m)``.
    :ivar center: The source position ``a``.
    :ivar coupling: ``lambda > 0``.
    :ivar mu: The renormalized binding parameter, below the boson rest energy.
    :ivar rest_energy: Energy each boson carries on top of ``kappa * lambda_sigma``; ``m`` when unset.
    :ivar quadrature: Accuracy of the heat-kernel transforms.
    """
    manifold: ManifoldSpec
    center: np.ndarray
    coupling: float
    mu: float
    rest_energy: Optional[float] = None
    quadrature: Optional[QuadratureSpec] = None

    def __post_init__(self) -> None:
        if not self.manifold.is_compact:
            raise UnsupportedGeometryError(f"The truncated Lee model needs a discrete spectrum; "
                                           f"{self.manifold.describe()} has none")
        if not self.coupling > 0:
            raise DomainError(f"The Lee coupling must be positive, got {self.coupling!r}")
        if not self.mu < self.rest:
            raise DomainError(f"The Lee binding parameter mu={self.mu!r} must lie below the boson rest "
                              f"energy {self.rest!r}")

    @classmethod
    def build(cls, manifold: ManifoldSpec, center: np.ndarray, coupling: float, mu: float,
              mass: Optional[float] = None, rest_energy: Optional[float] = None,
              quadrature: Optional[QuadratureSpec] = None) -> 'LeeModelSpec':
        """
        :raises DomainError: If ``mass`` is given and disagrees with the geometry's ``kappa``.
        """
        if mass is not None and abs(manifold.kappa - 1 / (2 * mass)) > 1e-12 * manifold.kappa:
            raise DomainError(f"{manifold.describe()} has kappa={manifold.kappa!r}, which does not match "
                              f"the boson mass {mass!r}; kappa must equal 1/(2m)")
        point = np.asarray(center, dtype=float)
        point.setflags(write=False)
        return cls(manifold, point, float(coupling), float(mu), rest_energy, quadrature)

    @classmethod
    def default(cls, coupling: float = 0.5, mu: float = 0.5, mass: float = 1.0) -> 'LeeModelSpec':
        """The torus ``L = (2 pi, 2 pi)`` with the source at the origin."""
        return cls.build(ManifoldSpec.torus(DEFAULT_SIDES, kappa=1 / (2 * mass)), np.zeros(2), coupling, mu)

    @property
    def mass(self) -> float:
        return self.manifold.mass

    @property
    def rest(self) -> float:
        return self.mass if self.rest_energy is None else float(self.rest_energy)

    def threshold(self, bosons: int) -> float:
        """``n m + mu``, the top of the admissible window on the n-boson sector."""
        return bosons * self.rest + self.mu

    def with_coupling(self, coupling: float) -> 'LeeModelSpec':
        return replace(self, coupling=float(coupling))


# Free part ----------------------------------------------------------------------

def mode_energies(spec: LeeModelSpec, basis: FockBasis) -> np.ndarray:
    """One-boson energies ``kappa * lambda_sigma + m``."""
    return spec.manifold.kappa * basis.modes.eigenvalues + spec.rest


def build_h0(spec: LeeModelSpec, basis: FockBasis) -> sparse.csr_matrix:
    """The free boson Hamiltonian, diagonal in the occupation basis."""
    return sparse.diags(basis.states @ mode_energies(spec, basis)).tocsr()


def _sector_energies(spec: LeeModelSpec, basis: FockBasis, bosons: int) -> np.ndarray:
    return basis.states[basis.sector(bosons)] @ mode_energies(spec, basis)


def _check_energy(spec: LeeModelSpec, bosons: int, energy: float) -> float:
    value = float(energy)
    if not value < spec.threshold(bosons):
        raise WindowError(f"The Lee principal operator on the {bosons}-boson sector needs "
                          f"E < n m + mu = {spec.threshold(bosons)!r}, got {energy!r}")
    return value


# Principal operator -----------------------------------------------------------------

def _source_self_energy(spec: LeeModelSpec, free_energies: np.ndarray, energy: complex) -> np.ndarray:
    """``S1 = int dt K_t(a, a) [exp(-t (m - mu)) - exp(-t (h + m - E))]`` for each free energy ``h``."""
    unique, inverse = np.unique(free_energies, return_inverse=True)
    values = kernel_laplace_transform(spec.manifold, separation(spec.manifold, spec.center, spec.center),
                                      spec.rest - spec.mu, unique + spec.rest - energy,
                                      quadrature=spec.quadrature)
    return np.atleast_1d(np.asarray(values))[inverse]


@dataclass(frozen=True)
class _HopPattern:
    """
    Nonzero structure of ``S2`` on one sector: entry ``(row, col)`` receives
    ``amplitude / (offset - E)`` for every hop ``a_sigma^+ a_tau`` connecting them.
    """
    rows: np.ndarray
    cols: np.ndarray
    amplitudes: np.ndarray
    offsets: np.ndarray
    size: int


@lru_cache(maxsize=32)
def _hop_pattern(spec: LeeModelSpec, basis: FockBasis, bosons: int) -> _HopPattern:
    indices = basis.sector(bosons)
    local = {tuple(int(value) for value in basis.states[index]): position
             for position, index in enumerate(indices)}
    couplings = np.atleast_1d(basis.modes.evaluate(spec.center))
    energies = mode_energies(spec, basis)
    rows: List[int] = []
    cols: List[int] = []
    amplitudes: List[complex] = []
    offsets: List[float] = []
    for col, index in enumerate(indices):
        occupation = basis.states[index]
        for tau in np.flatnonzero(occupation):
            reduced = occupation.copy()
            reduced[tau] -= 1
            # The time integral of pure exponentials is elementary: 1/(e_sigma + e_tau + h_reduced - E)
            offset = float(reduced @ energies) + energies[tau]
            for sigma in range(basis.mode_count):
                target = reduced.copy()
                target[sigma] += 1
                rows.append(local[tuple(int(value) for value in target)])
                cols.append(col)
                amplitudes.append(couplings[sigma] * np.conj(couplings[tau])
                                  * math.sqrt(occupation[tau] * target[sigma]))
                offsets.append(offset + energies[sigma])
    logger.debug(f"Lee hop pattern for n={bosons}: {len(indices)} states, {len(rows)} hops")
    return _HopPattern(np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(amplitudes, dtype=complex),
                       np.array(offsets), len(indices))


def _exchange_operator(spec: LeeModelSpec, basis: FockBasis, bosons: int, energy: float) -> np.ndarray:
    """``S2(E)`` on the sector, dense."""
    pattern = _hop_pattern(spec, basis, bosons)
    matrix = sparse.csr_matrix((pattern.amplitudes / (pattern.offsets - energy), (pattern.rows, pattern.cols)),
                               shape=(pattern.size, pattern.size)).toarray()
    if basis.modes.is_complex:
        return matrix
    return matrix.real


def split_KU(spec: LeeModelSpec, basis: FockBasis, bosons: int,
             energy: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ``(K, U1, U2)`` on the n-boson sector, with ``Phi = K - U1 - U2``.

    :raises WindowError: Unless ``E < n m + mu``.
    :raises PositivityError: If ``K`` is not positive definite, which means the
        energy conventions are inconsistent.
    """
    value = _check_energy(spec, bosons, energy)
    free = _sector_energies(spec, basis, bosons)
    k_diagonal = free - value + spec.mu
    if np.any(k_diagonal <= 0):
        raise PositivityError(f"K(E) = H0 - E + mu has the nonpositive eigenvalue {k_diagonal.min()!r} "
                              f"at E={value!r}; the sector floor and the threshold disagree")
    coupling = spec.coupling ** 2
    u1 = np.diag(-coupling * _source_self_energy(spec, free, value).real)
    u2 = coupling * _exchange_operator(spec, basis, bosons, value) if bosons else np.zeros((len(free), len(free)))
    return np.diag(k_diagonal), u1, u2


def build_principal_operator(spec: LeeModelSpec, basis: FockBasis, bosons: int, energy: float) -> np.ndarray:
    """
    ``Phi(E) = (H0 - E + mu) + lambda^2 S1(E) - lambda^2 S2(E)`` on the n-boson sector.

    :param spec: The model.
    :param basis: The truncated Fock basis.
    :param bosons: The sector ``n``.
    :param energy: Real ``E < n m + mu``.
    :return: The Hermitian sector matrix.
    :raises WindowError: Outside the window.
    """
    k, u1, u2 = split_KU(spec, basis, bosons, energy)
    return k - u1 - u2


def vacuum_principal(spec: LeeModelSpec, energy: complex) -> complex:
    """
    The vacuum-sector scalar ``-E + mu + lambda^2 int dt K_t(a, a) [exp(-t (m - mu)) - exp(-t (m - E))]``,
    for complex ``E`` with ``Re E < mu``.
    """
    value = complex(energy)
    if not value.real < spec.mu:
        raise WindowError(f"The vacuum principal function needs Re E < mu = {spec.mu!r}, got {energy!r}")
    transform = kernel_laplace_transform(spec.manifold, separation(spec.manifold, spec.center, spec.center),
                                         spec.rest - spec.mu, spec.rest - value, quadrature=spec.quadrature)
    result = -value + spec.mu + spec.coupling ** 2 * complex(transform)
    return result.real if value.imag == 0 else result


def _tilde(k: np.ndarray, operator: np.ndarray) -> np.ndarray:
    scale = 1 / np.sqrt(np.diag(k))
    return scale[:, None] * operator * scale[None, :]


def u2_tilde_norm(spec: LeeModelSpec, basis: FockBasis, bosons: int, energy: float) -> float:
    """``||K^-1/2 U2 K^-1/2||`` on the truncated sector."""
    k, _, u2 = split_KU(spec, basis, bosons, energy)
    return float(np.linalg.norm(_tilde(k, u2), 2))


def u1_tilde_norm(spec: LeeModelSpec, basis: FockBasis, bosons: int, energy: float) -> Tuple[float, float]:
    """
    :return: ``||K^-1/2 U1 K^-1/2||`` and the largest eigenvalue of that
        operator, which is never positive.
    """
    k, u1, _ = split_KU(spec, basis, bosons, energy)
    diagonal = np.diag(_tilde(k, u1))
    return float(np.max(np.abs(diagonal))), float(np.max(diagonal))


# Ground state ------------------------------------------------------------------------------

def lee_constant_c32(manifold: ManifoldSpec, mu: float, registry: Optional[ConstantsRegistry] = None) -> float:
    """
    The compact-geometry constant of the ground-state bound, assembled from the
    volume term, the ``A'^(1/2)`` cross term and the ``A'`` short-time term.

    :raises DomainError: Unless ``mu > 0``.
    """
    if not mu > 0:
        raise DomainError(f"The compact ground-state bound needs mu > 0, got {mu!r}")
    registry = registry or get_registry()
    a_prime = registry.constant(manifold, 'A_prime').value
    dimension = manifold.dimension
    mass = manifold.mass
    volume = manifold.volume
    quarter = dimension / 4
    volume_term = 4 / (volume * mu ** (dimension / 2))
    cross_term = (4 * math.sqrt(a_prime) * mass ** quarter * math.sqrt(math.pi) * math.gamma(2 - quarter)
                  * math.gamma(1 - quarter) / (mu ** quarter * math.sqrt(volume) * math.gamma(1.5 - quarter)))
    short_term = (a_prime * mass ** (dimension / 2) * math.pi * math.gamma(2 - dimension / 2)
                  * math.gamma(1 - quarter) ** 2 / math.gamma(1.5 - quarter) ** 2)
    value = math.gamma(2) / math.gamma(0.5) ** 2 * (volume_term + cross_term + short_term)
    # C32 depends on mu; the registry keeps the most recent one
    registry.record(manifold, 'C32', value, Provenance.DERIVED, f"assembled from A' at mu={mu:g}")
    return value


def lee_constant_c31(manifold: ManifoldSpec, registry: Optional[ConstantsRegistry] = None) -> float:
    """``C31 = C30 pi Gamma(2) Gamma(1-D/4)^2 Gamma(2-D/2) / (Gamma(1/2)^2 Gamma(3/2-D/4)^2)``."""
    registry = registry or get_registry()
    dimension = manifold.dimension
    quarter = dimension / 4
    c30 = registry.constant(manifold, 'C30').value
    return (c30 * math.pi * math.gamma(2) * math.gamma(1 - quarter) ** 2 * math.gamma(2 - dimension / 2)
            / (math.gamma(0.5) ** 2 * math.gamma(1.5 - quarter) ** 2))


def ground_state_lower_bound(dimension: int, bosons: int, coupling: float, mass: float, mu: float,
                             manifold: ManifoldSpec, registry: Optional[ConstantsRegistry] = None,
                             rest_energy: Optional[float] = None) -> float:
    """
    ``n m + mu - (n lambda^2 C32)^(1/(2-D/2))`` on compact geometries and
    ``n m + mu - (n C31 lambda^2 m^(D/2))^(1/(2-D/2))`` on Cartan-Hadamard ones.

    :raises DomainError: If ``dimension`` disagrees with the geometry.
    :raises MissingConstantsError: If the heat-kernel constants are unavailable.
    """
    if dimension != manifold.dimension:
        raise DomainError(f"Dimension {dimension} does not match {manifold.describe()}")
    rest = mass if rest_energy is None else rest_energy
    threshold = bosons * rest + mu
    if bosons == 0:
        return threshold
    exponent = 1 / (2 - dimension / 2)
    if manifold.is_compact:
        shift = (bosons * coupling ** 2 * lee_constant_c32(manifold, mu, registry)) ** exponent
    else:
        shift = (bosons * lee_constant_c31(manifold, registry) * coupling ** 2 * mass ** (dimension / 2)) ** exponent
    return threshold - shift


@dataclass(frozen=True)
class LeeGroundState:
    """
    :ivar sector: The boson number ``n``.
    :ivar energy: The ground-state energy, or ``None`` if ``Phi`` stays positive on the window.
    :ivar vector: The null vector of ``Phi`` at the root.
    :ivar residual: The eigenvalue left at the root.
    :ivar edge: Whether the root is the window edge ``n m + mu`` itself (the vacuum sector).
    :ivar mode_change: ``|E(M) - E(M/2)|``.
    :ivar boson_change: ``|E(n_max) - E(n_max - 1)|`` when the sector fits in the smaller basis.
    """
    sector: int
    energy: Optional[float]
    vector: Optional[np.ndarray] = None
    residual: float = 0.0
    edge: bool = False
    mode_change: Optional[float] = None
    boson_change: Optional[float] = None

    @property
    def found(self) -> bool:
        return self.energy is not None

    @property
    def convergence(self) -> float:
        changes = [change for change in (self.mode_change, self.boson_change) if change is not None]
        return max(changes) if changes else 0.0


def default_window(spec: LeeModelSpec, bosons: int) -> Tuple[float, float]:
    threshold = spec.threshold(bosons)
    depth = 4 * (1 + bosons * spec.coupling ** 2) * max(1.0, spec.rest)
    return threshold - depth, threshold - 1e-9 * max(1.0, abs(threshold))


def _lowest_crossing(spec: LeeModelSpec, basis: FockBasis, bosons: int, window: Tuple[float, float],
                     scan_points: int):
    states = eigenvalue_crossings(lambda energy: build_principal_operator(spec, basis, bosons, energy),
                                  window, scan_points, what=f"Lee principal operator (n={bosons})")
    return states[0] if states else None


def ground_state_energy(spec: LeeModelSpec, basis: FockBasis, bosons: int,
                        window: Optional[Tuple[float, float]] = None,
                        scan_points: int = SCAN_POINTS, convergence: bool = True) -> LeeGroundState:
    """
    The smallest energy in ``window`` where the lowest eigenvalue of ``Phi`` on
    the n-boson sector vanishes. The vacuum sector has ``Phi(mu) = 0`` and no
    other zero, so its ground state is the edge ``mu``.

    With ``convergence`` the root is recomputed with half the modes and,
    when the sector still fits, with a boson cutoff one lower.

    :raises WindowError: Unless the window ends below ``n m + mu``.
    """
    threshold = spec.threshold(bosons)
    basis.sector(bosons)  # validates n
    if bosons == 0:
        return LeeGroundState(0, spec.mu, np.ones(1), 0.0, True, 0.0 if convergence else None,
                              0.0 if convergence and basis.max_bosons else None)
    low, high = check_window(window or default_window(spec, bosons), threshold, f"the {bosons}-boson Lee sector")
    state = _lowest_crossing(spec, basis, bosons, (low, high), scan_points)
    if state is None:
        logger.warning(f"Lee principal operator stays positive on [{low:g}, {high:g}] for n={bosons}")
        return LeeGroundState(bosons, None)
    mode_change = boson_change = None
    if convergence:
        if basis.mode_count >= 2:
            coarse = _lowest_crossing(spec, FockBasis.build(spectral_basis(spec.manifold, basis.mode_count // 2),
                                                            basis.max_bosons), bosons, (low, high), scan_points)
            mode_change = None if coarse is None else abs(state.energy - coarse.energy)
        if bosons <= basis.max_bosons - 1:
            smaller = _lowest_crossing(spec, FockBasis.build(basis.modes, basis.max_bosons - 1), bosons,
                                       (low, high), scan_points)
            boson_change = None if smaller is None else abs(state.energy - smaller.energy)
    return LeeGroundState(bosons, state.energy, state.vector, state.residual, False, mode_change, boson_change)


# Identities -----------------------------------------------------------------------------------

def vacuum_identity_residual(spec: LeeModelSpec, first: float, second: float,
                             cutoff: Optional[float] = None) -> float:
    """
    Relative residual of ``Phi(E1) - Phi(E2) + b (R0(E1) - R0(E2)) b^+ + E1 - E2 = 0``
    on the vacuum sector, where ``b R0(E) b^+ = lambda^2 sum_sigma |f_sigma(a)|^2 / (e_sigma - E)``
    is evaluated as a smoothed mode sum.
    """
    manifold = spec.manifold
    kappa = manifold.kappa

    def difference(eigenvalues: np.ndarray) -> np.ndarray:
        return 1 / (kappa * eigenvalues + spec.rest - first) - 1 / (kappa * eigenvalues + spec.rest - second)

    exchange = spec.coupling ** 2 * smoothed_mode_sum(manifold, spec.center, spec.center, difference, cutoff).value
    phi_difference = vacuum_principal(spec, first) - vacuum_principal(spec, second)
    residual = abs(phi_difference + exchange + first - second)
    return residual / max(abs(phi_difference), abs(first - second))


def normal_ordering_check(spec: LeeModelSpec, basis: FockBasis, mode: int, t: float,
                          resolution: int = 64) -> float:
    """
    ``|int K_t(x, a) f_sigma(x) dx - exp(-kappa lambda_sigma t) f_sigma(a)|``
    by grid quadrature, relative to ``max |f_sigma|``.
    """
    manifold = spec.manifold
    grid = integration_grid(manifold, resolution)
    values = basis.modes.evaluate(grid.points)[:, mode]
    kernel = np.asarray(heat_kernel(manifold, grid.points, spec.center, t))
    smeared = grid.integrate(kernel * values)
    expected = math.exp(-manifold.kappa * basis.modes.eigenvalues[mode] * t) \
        * np.atleast_1d(basis.modes.evaluate(spec.center))[mode]
    return float(abs(smeared - expected) / np.max(np.abs(values)))


def lee_strong_limit(spec: LeeModelSpec, basis: FockBasis, bosons: int, k_max: int,
                     vector: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    ``e_k = || |E_k| Phi(E_k)^-1 f - f ||`` along ``E_k = -k |E_0|`` for
    ``k = 1, 2, 4, ..., k_max`` on the n-boson sector.

    :return: The energies and the sequence.
    """
    size = len(basis.sector(bosons))
    target = np.ones(size) if vector is None else np.asarray(vector)
    target = target / np.linalg.norm(target)
    base = abs(spec.threshold(bosons)) + spec.rest
    steps = 2 ** np.arange(int(math.log2(k_max)) + 1)
    energies = -steps * base
    errors = []
    for energy in energies:
        phi = build_principal_operator(spec, basis, bosons, float(energy))
        errors.append(float(np.linalg.norm(abs(energy) * np.linalg.solve(phi, target) - target)))
    return energies, np.array(errors)


# Bound checks -----------------------------------------------------------------------------------

def u1_tilde_bound_check(spec: LeeModelSpec, basis: FockBasis, bosons: int = 1,
                         energies: Optional[np.ndarray] = None, threads: int = DEFAULT_THREADS) -> BoundReport:
    """
    Sweeps ``||U1~(E)||`` over large negative energies and fits its decay;
    the bound form is ``C46 lambda^2 / (sqrt(m - mu) |E|^(1/2))`` in 2D and
    ``C47 lambda^2 / |E|^(1/2)`` in 3D, with the constant calibrated on the sweep.
    """
    if energies is None:
        energies = -np.geomspace(1e2, 1e6, 9) * spec.rest
    grid = np.asarray(energies, dtype=float)
    results = evaluate_sweep(lambda energy: u1_tilde_norm(spec, basis, bosons, float(energy)), grid, threads)
    norms = np.array([norm for norm, _ in results])
    top = max(largest for _, largest in results)
    magnitudes = np.abs(grid)
    if spec.manifold.dimension == 2:
        name, shapes = 'C46', spec.coupling ** 2 / (math.sqrt(spec.rest - spec.mu) * np.sqrt(magnitudes))
    else:
        name, shapes = 'C47', spec.coupling ** 2 / np.sqrt(magnitudes)
    constant = get_registry().calibrate(spec.manifold, name, norms / shapes,
                                        "largest ||U1~|| over the bound shape on the sweep")
    fit = fit_power_law(magnitudes, norms)
    if top > 1e-12:
        verdict, details = Verdict.VIOLATED, f"U1~ has the positive eigenvalue {top:.3e}"
    elif fit.at_most(-0.5):
        verdict, details = Verdict.HOLDS_WITH_CALIBRATION, f"decay exponent {fit.exponent:.3f} +- {fit.error:.3f}"
    else:
        verdict, details = Verdict.VIOLATED, f"decay exponent {fit.exponent:.3f} slower than -1/2"
    return BoundReport('u1_tilde_bound', 'lee', spec.manifold.describe(), 'E', tuple(grid.tolist()),
                       measured(norms, method='dense'), measured(constant.value * shapes, method='calibrated'),
                       fit, verdict, ((name, constant.value, constant.provenance.value),), details)


def _relative_norm(spec: LeeModelSpec, basis: FockBasis, bosons: int, energy: float) -> float:
    _, u1, u2 = split_KU(spec, basis, bosons, energy)
    free = _sector_energies(spec, basis, bosons)
    return float(np.linalg.norm((u1 + u2) / free[None, :], 2))


def relative_bound_check(spec: LeeModelSpec, basis: FockBasis, bosons: int = 1,
                         energies: Optional[np.ndarray] = None, threads: int = DEFAULT_THREADS) -> BoundReport:
    """
    ``||U(E) H0^-1||`` over ``E <= mu - 10^-3 m``: finite everywhere, growing at
    most like ``ln|E|`` (the ratio to it has log-log slope at most ``0.1``),
    and (when the basis holds two bosons) a ratio between the ``n = 2`` and ``n = 1`` values within a factor 3.

    :raises DomainError: On the vacuum sector, where ``H0`` is not invertible.
    """
    if bosons < 1:
        raise DomainError("relative_bound_check needs a sector with at least one boson")
    if energies is None:
        energies = spec.mu - np.geomspace(1e-3, 1e4, 12) * spec.rest
    grid = np.asarray(energies, dtype=float)
    norms = np.array(evaluate_sweep(lambda energy: _relative_norm(spec, basis, bosons, float(energy)), grid, threads))
    distances = spec.mu - grid
    # growth relative to ln|E|
    logarithmic = norms / np.log(math.e + distances / (spec.rest - spec.mu))
    tail = distances >= np.median(distances)
    fit = fit_power_law(distances[tail], logarithmic[tail])
    verdicts = []
    details = [f"tail slope {fit.exponent:.3f}"]
    if not np.all(np.isfinite(norms)):
        verdicts.append(Verdict.VIOLATED)
        details.append("non-finite norm")
    elif fit.at_most(0.0):
        verdicts.append(Verdict.HOLDS)
    else:
        verdicts.append(Verdict.VIOLATED)
    other = 2 if bosons == 1 else 1
    if other <= basis.max_bosons:
        ratio = _relative_norm(spec, basis, other, float(grid[0])) / norms[0]
        details.append(f"n={other}/n={bosons} ratio {ratio:.3f}")
        verdicts.append(Verdict.HOLDS if 1 / 3 <= ratio <= 3 else Verdict.INCONCLUSIVE)
    return BoundReport('relative_bound', 'lee', spec.manifold.describe(), 'E', tuple(grid.tolist()),
                       measured(norms, method='dense'), (), fit, worst_verdict(verdicts), (), "; ".join(details))


def ground_state_bound_check(spec: LeeModelSpec, basis: FockBasis, bosons: int = 1,
                             couplings: Tuple[float, ...] = (0.1, 0.5, 1.0),
                             threads: int = DEFAULT_THREADS) -> BoundReport:
    """
    Compares the truncated ground state with ``ground_state_lower_bound`` for
    each coupling and fits the departure ``n m + mu - E_gr`` against ``lambda``;
    in 2D it grows like ``lambda^2``.
    """
    grid = np.asarray(couplings, dtype=float)

    def solve(coupling: float) -> Optional[float]:
        return ground_state_energy(spec.with_coupling(coupling), basis, bosons, convergence=False).energy

    energies = evaluate_sweep(solve, grid, threads)
    registry = get_registry()
    bounds = np.array([ground_state_lower_bound(spec.manifold.dimension, bosons, float(coupling), spec.mass,
                                                spec.mu, spec.manifold, registry, spec.rest_energy)
                       for coupling in grid])
    name = 'C32' if spec.manifold.is_compact else 'C31'
    constant = registry.constant(spec.manifold, name)
    if any(energy is None for energy in energies):
        return BoundReport('ground_state_bound', 'lee', spec.manifold.describe(), 'lambda', tuple(grid.tolist()),
                           (), measured(bounds, method='closed form'), None, Verdict.INCONCLUSIVE,
                           ((name, constant.value, constant.provenance.value),),
                           "no ground state in the default window for some coupling")
    values = np.array(energies, dtype=float)
    departures = spec.threshold(bosons) - values
    fit = fit_power_law(grid, departures)
    slack = 1e-9 * np.maximum(1.0, np.abs(bounds))
    verdicts = []
    if np.any(values < bounds - slack):
        worst = int(np.argmin(values - bounds))
        verdicts.append(Verdict.VIOLATED)
        details = f"E_gr={values[worst]:.8g} below the bound {bounds[worst]:.8g} at lambda={grid[worst]:g}"
    else:
        verdicts.append(Verdict.HOLDS_WITH_CALIBRATION)
        details = f"smallest gap {float(np.min(values - bounds)):.4g}"
    if spec.manifold.dimension == 2 and len(grid) > 1:
        verdicts.append(Verdict.HOLDS_WITH_CALIBRATION if fit.matches(2.0, 0.2) else Verdict.VIOLATED)
        details += f"; departure exponent {fit.exponent:.3f} +- {fit.error:.3f}"
    return BoundReport('ground_state_bound', 'lee', spec.manifold.describe(), 'lambda', tuple(grid.tolist()),
                       measured(values, ROOT_RELATIVE_TOLERANCE, 'scan+brent'),
                       measured(bounds, method='closed form'), fit, worst_verdict(verdicts),
                       ((name, constant.value, constant.provenance.value),), details)
