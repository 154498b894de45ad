"""
Run configuration: what geometry, which model, what to compute and where to
write it. Configurations are JSON files; every field has a default, so ``{}``
is a valid configuration (the 2D torus with one center).
"""
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

from deltaspec.constants import DEFAULT_RELATIVE_TOLERANCE, DEFAULT_SEED, SCAN_POINTS, SCHEMA_VERSION
from deltaspec.errors import ConfigurationError, DeltaspecError
from deltaspec.leemodel import DEFAULT_MAX_BOSONS, DEFAULT_MODES, LeeModelSpec, fock_basis
from deltaspec.manifold import ManifoldKind, ManifoldSpec, make_point
from deltaspec.pointinteraction import CenterSet
from deltaspec.relativistic import RelativisticModel
from deltaspec.serialization import rehydrate_json
from deltaspec.specialfn import QuadratureSpec
from deltaspec.setup import DEFAULT_THREADS
from deltaspec.verification import BATTERY, LeeSystem, PointSystem, System

MODEL_KINDS = ('nonrelativistic', 'relativistic', 'lee')
OUTPUT_FORMATS = ('json', 'csv')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


@dataclass
class GeometryConfig:
    """
    :ivar kind: ``FlatSpace``, ``FlatTorus``, ``Sphere2`` or ``Hyperbolic2``.
    :ivar dimension: 2 or 3.
    :ivar sizes: Torus side lengths, or ``[radius]`` for the sphere and hyperbolic plane;
        ``2 pi`` sides and unit radius when unset.
    :ivar kappa: Diffusion coefficient; derived from the model mass when unset.
    """
    kind: str = 'FlatTorus'
    dimension: int = 2
    sizes: Optional[List[float]] = None
    kappa: Optional[float] = None


@dataclass
class ModelConfig:
    """
    :ivar kind: ``nonrelativistic``, ``relativistic`` or ``lee``.
    :ivar centers: Center coordinates (Cartesian in flat space and on the torus,
        polar and azimuthal angles on the sphere, geodesic polar coordinates on
        the hyperbolic plane). The Lee source is the first center.
    :ivar mu: One binding parameter per center, or a single shared one.
    :ivar mass: Particle (or boson) mass.
    :ivar coupling: Lee coupling ``lambda``.
    :ivar rest_energy: Lee boson rest energy, ``mass`` when unset.
    :ivar modes: Lee boson modes ``M``.
    :ivar max_bosons: Lee boson cutoff ``n_max``.
    :ivar sector: Lee boson number ``n``.
    """
    kind: str = 'nonrelativistic'
    centers: List[List[float]] = field(default_factory=lambda: [[0.0, 0.0]])
    mu: List[float] = field(default_factory=lambda: [1.0])
    mass: float = 1.0
    coupling: float = 0.5
    rest_energy: Optional[float] = None
    modes: int = DEFAULT_MODES
    max_bosons: int = DEFAULT_MAX_BOSONS
    sector: int = 1


@dataclass
class TaskConfig:
    """
    Settings of individual subcommands; each reads only the fields it needs.

    :ivar window: ``[E_low, E_high]`` for bound-state searches; model default when unset.
    :ivar route: ``quadrature`` or ``modesum`` for relativistic spectra.
    :ivar energy: Energy of the ``resolvent`` subcommand.
    :ivar points: Evaluation points of the ``resolvent`` subcommand, as center coordinates.
    :ivar pair: ``(E1, E2)`` for the resolvent identity.
    :ivar complex_energy: ``[Re E, Im E]`` for the symmetry check.
    :ivar energies: Energy sweep of the bound checks; each check's default when empty.
    :ivar k_max: Largest step of the strong-limit probe.
    :ivar base_energy: ``E_0`` of the strong-limit probe; below every bound state when unset.
    :ivar test_functions: Names from the test-function battery.
    :ivar image_modes: Spectral basis size carrying the test functions.
    :ivar couplings: Lee couplings of the ground-state bound sweep.
    :ivar checks: Which bound checks ``check-bounds`` runs; all that apply when empty.
    :ivar scan_points: Size of the eigenvalue scan grid.
    :ivar relative_tolerance: Quadrature tolerance.
    :ivar seed: Seed of the randomized test functions and sample points.
    """
    window: Optional[List[float]] = None
    route: str = 'quadrature'
    energy: float = -2.0
    points: List[List[float]] = field(default_factory=lambda: [[1.0, 0.5], [2.0, 3.0]])
    pair: List[float] = field(default_factory=lambda: [-3.0, -7.0])
    complex_energy: List[float] = field(default_factory=lambda: [-5.0, 2.0])
    energies: List[float] = field(default_factory=list)
    k_max: int = 4096
    base_energy: Optional[float] = None
    test_functions: List[str] = field(default_factory=lambda: list(BATTERY))
    image_modes: int = 256
    couplings: List[float] = field(default_factory=lambda: [0.1, 0.5, 1.0])
    checks: List[str] = field(default_factory=list)
    scan_points: int = SCAN_POINTS
    relative_tolerance: float = float(os.environ.get('DELTASPEC_RELATIVE_TOLERANCE', DEFAULT_RELATIVE_TOLERANCE))
    seed: int = DEFAULT_SEED


@dataclass
class OutputConfig:
    """
    :ivar format: ``json`` or ``csv``.
    :ivar path: Output file; standard output when unset.
    :ivar plot_data: Whether to write two-column plot-data files for each sweep.
    :ivar plot_directory: Where plot-data files go; next to ``path`` when unset.
    """
    format: str = os.environ.get('DELTASPEC_OUTPUT_FORMAT', 'json')
    path: Optional[str] = None
    plot_data: bool = False
    plot_directory: Optional[str] = None


@dataclass
class RunConfig:
    """
    One run of the command line interface.

    :ivar schema_version: Must equal the package's ``SCHEMA_VERSION``.
    :ivar threads: Worker threads for sweeps and the check suite.
    :ivar log_level: Level of the ``deltaspec`` logger.
    """
    schema_version: int = SCHEMA_VERSION
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    threads: int = int(os.environ.get('DELTASPEC_THREADS', DEFAULT_THREADS))
    log_level: str = os.environ.get('DELTASPEC_LOG_LEVEL', 'WARNING')

    def manifold(self) -> ManifoldSpec:
        """
        :raises ConfigurationError: For unknown kinds or invalid sizes.
        """
        geometry = self.geometry
        try:
            kind = ManifoldKind(geometry.kind)
        except ValueError:
            raise ConfigurationError(f"unknown geometry {geometry.kind!r}; expected one of "
                                     f"{', '.join(k.value for k in ManifoldKind)}", "geometry.kind")
        kappa = geometry.kappa
        if kappa is None:
            kappa = 1.0 if self.model.kind == 'relativistic' else 1 / (2 * self.model.mass)
        sizes: Tuple[float, ...] = ()
        if geometry.sizes is not None:
            sizes = tuple(geometry.sizes)
        elif kind == ManifoldKind.FLAT_TORUS:
            sizes = (2 * math.pi,) * geometry.dimension
        elif kind != ManifoldKind.FLAT_SPACE:
            sizes = (1.0,)
        try:
            return ManifoldSpec(kind, geometry.dimension, sizes, kappa)
        except DeltaspecError as error:
            raise ConfigurationError(str(error), "geometry")

    def quadrature(self) -> Optional[QuadratureSpec]:
        tolerance = self.task.relative_tolerance
        if tolerance == DEFAULT_RELATIVE_TOLERANCE:
            return None
        try:
            return QuadratureSpec(relative_tolerance=tolerance)
        except DeltaspecError as error:
            raise ConfigurationError(str(error), "task.relative_tolerance")

    def points(self, coordinates: List[List[float]], location: str) -> Tuple[Any, ...]:
        manifold = self.manifold()
        points = []
        for index, entry in enumerate(coordinates):
            try:
                points.append(make_point(manifold, *entry))
            except (DeltaspecError, TypeError, ValueError) as error:
                raise ConfigurationError(f"cannot place {entry!r} on {manifold.describe()}: {error}",
                                         f"{location}[{index}]")
        return tuple(points)

    def build_system(self) -> System:
        """
        The configured model.

        :raises ConfigurationError: If the model parameters are inconsistent.
        """
        model = self.model
        manifold = self.manifold()
        positions = self.points(model.centers, "model.centers")
        try:
            if model.kind == 'nonrelativistic':
                centers = CenterSet.build(positions, model.mu if len(model.mu) > 1 else model.mu[0], model.mass)
                return PointSystem(manifold, centers, self.task.image_modes, self.quadrature())
            if model.kind == 'relativistic':
                return RelativisticModel.build(manifold, positions, model.mass,
                                               model.mu if len(model.mu) > 1 else model.mu[0])
            spec = LeeModelSpec.build(manifold, positions[0], model.coupling, model.mu[0], model.mass,
                                      model.rest_energy, self.quadrature())
            return LeeSystem(spec, fock_basis(manifold, model.modes, model.max_bosons), model.sector)
        except DeltaspecError as error:
            raise ConfigurationError(str(error), "model")


def _check(condition: bool, message: str, location: str) -> None:
    if not condition:
        raise ConfigurationError(message, location)


def validate_config(config: RunConfig) -> RunConfig:
    """
    Checks everything that can be checked before computing, including that
    the model can be built and the energy window lies in the admissible region.

    :raises ConfigurationError: Naming the offending entry.
    """
    _check(config.schema_version == SCHEMA_VERSION,
           f"unsupported schema version {config.schema_version!r}, expected {SCHEMA_VERSION}", "schema_version")
    model, task, output = config.model, config.task, config.output
    _check(model.kind in MODEL_KINDS, f"unknown model {model.kind!r}; expected one of {', '.join(MODEL_KINDS)}",
           "model.kind")
    _check(output.format in OUTPUT_FORMATS, f"unknown format {output.format!r}; expected json or csv",
           "output.format")
    _check(config.threads >= 1, f"threads must be at least 1, got {config.threads!r}", "threads")
    _check(config.log_level.upper() in LOG_LEVELS, f"unknown log level {config.log_level!r}", "log_level")
    _check(model.mass > 0, f"the mass must be positive, got {model.mass!r}", "model.mass")
    _check(bool(model.centers), "at least one center is required", "model.centers")
    _check(bool(model.mu) and min(model.mu) > 0, f"binding parameters must be positive, got {model.mu!r}",
           "model.mu")
    _check(len(model.mu) in (1, len(model.centers)),
           f"got {len(model.centers)} centers but {len(model.mu)} binding parameters", "model.mu")
    _check(model.modes >= 1 and model.max_bosons >= 0 and 0 <= model.sector <= model.max_bosons,
           f"need modes >= 1 and 0 <= sector <= max_bosons, got {model.modes}, {model.sector}, {model.max_bosons}",
           "model")
    _check(task.route in ('quadrature', 'modesum'), f"unknown route {task.route!r}", "task.route")
    _check(len(task.pair) == 2, f"the identity pair needs two energies, got {task.pair!r}", "task.pair")
    _check(len(task.complex_energy) == 2, f"complex_energy is [re, im], got {task.complex_energy!r}",
           "task.complex_energy")
    _check(task.k_max >= 1, f"k_max must be at least 1, got {task.k_max!r}", "task.k_max")
    _check(task.scan_points >= 2, f"scan_points must be at least 2, got {task.scan_points!r}", "task.scan_points")
    unknown = sorted(set(task.test_functions) - set(BATTERY))
    _check(not unknown, f"unknown test function(s) {', '.join(unknown)}", "task.test_functions")
    system = config.build_system()
    if task.window is not None:
        _check(len(task.window) == 2 and task.window[0] < task.window[1],
               f"the window must be [low, high] with low < high, got {task.window!r}", "task.window")
        upper = admissible_upper(config, system)
        _check(task.window[1] < upper, f"the window must end below {upper!r} for the {model.kind} model",
               "task.window")
    return config


def admissible_upper(config: RunConfig, system: System) -> float:
    """The continuum threshold of the configured model."""
    if isinstance(system, RelativisticModel):
        return system.mass
    if isinstance(system, LeeSystem):
        return system.spec.threshold(system.bosons)
    return 0.0


def _line_of(text: str, location: str) -> Optional[int]:
    keys = re.findall(r"[A-Za-z_]+", location)
    if not keys or keys[-1] == 'config':
        return None
    pattern = f'"{keys[-1]}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern in line:
            return number
    return None


def parse_config(text: str, source: str = "config") -> RunConfig:
    """
    Parses and validates a JSON configuration.

    :raises ConfigurationError: With the line of the offending entry when it can be found.
    """
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as error:
        raise ConfigurationError(f"invalid JSON: {error.msg}", f"{source} line {error.lineno} column {error.colno}")
    try:
        config = rehydrate_json(data, RunConfig)
        return validate_config(config)
    except ConfigurationError as error:
        line = _line_of(text, error.location)
        if line is None:
            raise
        message = str(error)[len(error.location) + 2:] if error.location else str(error)
        raise ConfigurationError(message, f"{source} line {line} ({error.location})")


def load_config(path: Optional[str]) -> RunConfig:
    """Reads a configuration file; ``None`` gives the validated defaults."""
    if path is None:
        return validate_config(RunConfig())
    try:
        with open(path, encoding='utf-8') as config_file:
            text = config_file.read()
    except OSError as error:
        raise ConfigurationError(f"cannot read the configuration: {error}", path)
    return parse_config(text, path)
