"""
The subcommands. Each is a function of the validated :class:`RunConfig`
registered on the main runner with :func:`task`.
"""
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Tuple, Union, overload

import numpy as np

from deltaspec.configuration import RunConfig
from deltaspec.constants import ROOT_RELATIVE_TOLERANCE
from deltaspec.errors import ConfigurationError
from deltaspec.leemodel import (ground_state_bound_check, ground_state_energy, relative_bound_check,
                                u1_tilde_bound_check)
from deltaspec.pointinteraction import BoundState, bound_states, resolvent_kernel
from deltaspec.relativistic import RelativisticModel, rel_bound_states
from deltaspec.reports import BoundReport, Measurement
from deltaspec.runner import Runner, TaskOutput, get_main_runner
from deltaspec.verification import (LeeSystem, PointSystem, System, check_alpha_scaling, check_decay,
                                    check_free_resolvent_bound, check_heat_bounds, check_jacobian_bounds,
                                    check_phi_inverse_scaling, check_resolvent_identity, check_route_agreement,
                                    check_strong_limit, check_subordination, check_symmetry, function_battery,
                                    run_suite, system_kind, system_manifold)

TaskFunction = Callable[[RunConfig], TaskOutput]


@overload
def task(name: TaskFunction, runner: Optional[Runner] = None) -> TaskFunction: ...
@overload
def task(name: Optional[str] = None, runner: Optional[Runner] = None) -> Callable[[TaskFunction], TaskFunction]: ...

def task(name: Union[TaskFunction, str, None] = None,
         runner: Optional[Runner] = None) -> Union[TaskFunction, Callable[[TaskFunction], TaskFunction]]:
    """
    Registers a subcommand on the runner. Recommended to use as a decorator;
    the function name (with dashes for underscores) is used if no name is given.

    :param name: The subcommand name.
    :param runner: The runner to add the task to. Defaults to the main runner.
    :return: The unchanged task function.
    """
    runner = runner or get_main_runner()
    if callable(name):
        runner.add_task(name.__name__.replace('_', '-'), name)
        return name

    def make_task(func: TaskFunction) -> TaskFunction:
        local_name = name
        if local_name is None:
            local_name = func.__name__.replace('_', '-')
        runner.add_task(local_name, func)
        return func

    return make_task


@dataclass(frozen=True)
class BoundStateRow:
    """
    One row of a spectrum table.

    :ivar energy: The root, with the root-finding tolerance (or the Lee convergence estimate).
    :ivar residual: The eigenvalue of the principal matrix left at the root.
    :ivar vector: The null vector (empty for large Lee sectors).
    :ivar sector: The Lee boson number, when applicable.
    """
    energy: Measurement
    residual: Measurement
    vector: Tuple[float, ...] = ()
    sector: Optional[int] = None


@dataclass(frozen=True)
class ResolventRow:
    x: Tuple[float, ...]
    y: Tuple[float, ...]
    value: Measurement


# Printed vectors longer than this are dropped from the table
VECTOR_LIMIT = 16


def _output(name: str, system: System, **kwargs: Any) -> TaskOutput:
    return TaskOutput(name, system_manifold(system).describe(), system_kind(system), **kwargs)


def _require(system: System, kinds: Tuple[type, ...], name: str) -> None:
    if not isinstance(system, kinds):
        expected = ' or '.join({PointSystem: 'nonrelativistic', RelativisticModel: 'relativistic',
                                LeeSystem: 'lee'}[kind] for kind in kinds)
        raise ConfigurationError(f"{name} needs the {expected} model, got {system_kind(system)}", "model.kind")


def _energies(config: RunConfig) -> Optional[List[float]]:
    return list(config.task.energies) or None


def spectrum_window(system: System) -> Tuple[float, float]:
    """
    A window below the continuum threshold that holds every bound state of
    moderately coupled centers.
    """
    if isinstance(system, RelativisticModel):
        depth = 8 * (system.mass + 1)
        return -depth, system.mass * (1 - 1e-6)
    if isinstance(system, PointSystem):
        mu_squared = system.centers.mu_squared
        return -16 * (float(np.max(mu_squared)) + 1), -1e-3 * float(np.min(mu_squared))
    raise ConfigurationError("the Lee model chooses its windows per sector", "task.window")


def _state_row(state: BoundState, method: str, sector: Optional[int] = None) -> BoundStateRow:
    tolerance = ROOT_RELATIVE_TOLERANCE * max(abs(state.energy), 1.0)
    vector = tuple(float(entry) for entry in np.real(state.vector)) if state.vector.size <= VECTOR_LIMIT else ()
    return BoundStateRow(Measurement(state.energy, tolerance, True, method),
                         Measurement(state.residual, 0.0, True, 'eigenvalue at the root'), vector, sector)


@task
def spectrum(config: RunConfig) -> TaskOutput:
    """Bound states of the configured model inside the window."""
    system = config.build_system()
    settings = config.task
    if isinstance(system, LeeSystem):
        return replace(lee_spectrum(config), task='spectrum')
    window = tuple(settings.window) if settings.window is not None else spectrum_window(system)
    if isinstance(system, RelativisticModel):
        states = rel_bound_states(system, window, settings.route, config.quadrature(), settings.scan_points)
        method = f"relativistic {settings.route}"
    else:
        states = bound_states(system.manifold, system.centers, window, system.quadrature, settings.scan_points)
        method = 'heat-kernel quadrature'
    return _output('spectrum', system, table=[_state_row(state, method) for state in states], expects_rows=True)


@task
def resolvent(config: RunConfig) -> TaskOutput:
    """``R(x, y | E)`` at every pair of configured points."""
    system = config.build_system()
    _require(system, (PointSystem,), 'resolvent')
    assert isinstance(system, PointSystem)
    points = config.points(config.task.points, "task.points")
    energy = config.task.energy
    tolerance = config.task.relative_tolerance
    rows = []
    for i, x in enumerate(points):
        for y in points[i:]:
            value = resolvent_kernel(system.manifold, system.centers, x, y, energy, system.quadrature)
            rows.append(ResolventRow(tuple(np.asarray(x).tolist()), tuple(np.asarray(y).tolist()),
                                     Measurement(value, tolerance * abs(value), True, 'Krein formula')))
    return _output('resolvent', system, table=rows)


@task
def check_identity(config: RunConfig) -> TaskOutput:
    system = config.build_system()
    settings = config.task
    functions = None
    if isinstance(system, PointSystem) and system.manifold.is_compact:
        functions = function_battery(system, settings.seed, settings.test_functions)
    first, second = settings.pair
    report = check_resolvent_identity(system, first, second, functions, settings.seed, config.threads)
    return _output('check-identity', system, reports=[report])


@task
def check_limit(config: RunConfig) -> TaskOutput:
    system = config.build_system()
    _require(system, (PointSystem, LeeSystem), 'check-limit')
    settings = config.task
    report = check_strong_limit(system, k_max=settings.k_max, base_energy=settings.base_energy, seed=settings.seed)
    return _output('check-limit', system, reports=[report])


@task('check-symmetry')
def check_symmetry_task(config: RunConfig) -> TaskOutput:
    system = config.build_system()
    settings = config.task
    report = check_symmetry(system, complex(*settings.complex_energy), seed=settings.seed)
    return _output('check-symmetry', system, reports=[report])


def bound_checks(system: System, config: RunConfig) -> Dict[str, Callable[[], BoundReport]]:
    """The bound sweeps that apply to ``system``, by name."""
    manifold = system_manifold(system)
    energies = _energies(config)
    threads = config.threads
    checks: Dict[str, Callable[[], BoundReport]] = {}
    if isinstance(system, PointSystem):
        checks['alpha_scaling'] = lambda: check_alpha_scaling(manifold, system.centers, energies, system.quadrature,
                                                              threads)
        checks['phi_inverse_scaling'] = lambda: check_phi_inverse_scaling(system, energies, threads)
        if manifold.dimension == 3:
            checks['free_resolvent_bound'] = lambda: check_free_resolvent_bound(
                manifold, system.centers.positions[0], energies, quadrature=system.quadrature, threads=threads)
    elif isinstance(system, RelativisticModel):
        checks['phi_inverse_scaling'] = lambda: check_phi_inverse_scaling(system, energies, threads)
        checks['route_agreement'] = lambda: check_route_agreement(system, energies, threads)
    checks['heat_bounds'] = lambda: check_heat_bounds(manifold, config.task.seed, threads=threads)
    if manifold.dimension == 2:
        checks['jacobian_bounds'] = lambda: check_jacobian_bounds(manifold)
    return checks


@task
def check_bounds(config: RunConfig) -> TaskOutput:
    """The bound-shape sweeps; ``task.checks`` selects some of them."""
    system = config.build_system()
    _require(system, (PointSystem, RelativisticModel), 'check-bounds')
    checks = bound_checks(system, config)
    selected = list(config.task.checks) or list(checks)
    unknown = [name for name in selected if name not in checks]
    if unknown:
        raise ConfigurationError(f"{', '.join(unknown)} do(es) not apply here; available: {', '.join(checks)}",
                                 "task.checks")
    return _output('check-bounds', system, reports=[checks[name]() for name in selected])


@task('check-subordination')
def check_subordination_task(config: RunConfig) -> TaskOutput:
    system = config.build_system()
    _require(system, (RelativisticModel,), 'check-subordination')
    assert isinstance(system, RelativisticModel)
    return _output('check-subordination', system, reports=[check_subordination(system.mass)])


@task('check-decay')
def check_decay_task(config: RunConfig) -> TaskOutput:
    system = config.build_system()
    _require(system, (RelativisticModel,), 'check-decay')
    assert isinstance(system, RelativisticModel)
    return _output('check-decay', system, reports=[check_decay(system, _energies(config), threads=config.threads)])


@task
def lee_spectrum(config: RunConfig) -> TaskOutput:
    """Ground states of every boson sector up to the cutoff."""
    system = config.build_system()
    _require(system, (LeeSystem,), 'lee-spectrum')
    assert isinstance(system, LeeSystem)
    window = tuple(config.task.window) if config.task.window is not None else None
    rows = []
    for bosons in range(system.basis.max_bosons + 1):
        # A configured window belongs to the configured sector
        sector_window = window if bosons == system.bosons else None
        state = ground_state_energy(system.spec, system.basis, bosons, sector_window, config.task.scan_points)
        if not state.found:
            continue
        vector = state.vector if state.vector is not None else np.zeros(0)
        tolerance = max(state.convergence, ROOT_RELATIVE_TOLERANCE * max(abs(state.energy), 1.0))
        rows.append(BoundStateRow(
            Measurement(state.energy, tolerance, state.mode_change is not None, 'edge' if state.edge else 'Lee scan'),
            Measurement(state.residual, 0.0, True, 'eigenvalue at the root'),
            tuple(float(entry) for entry in np.real(vector)) if vector.size <= VECTOR_LIMIT else (), bosons))
    return _output('lee-spectrum', system, table=rows, expects_rows=True)


@task
def lee_bounds(config: RunConfig) -> TaskOutput:
    system = config.build_system()
    _require(system, (LeeSystem,), 'lee-bounds')
    assert isinstance(system, LeeSystem)
    spec, basis, bosons = system.spec, system.basis, max(system.bosons, 1)
    energies = np.asarray(config.task.energies, dtype=float) if config.task.energies else None
    reports = [
        u1_tilde_bound_check(spec, basis, bosons, energies, config.threads),
        relative_bound_check(spec, basis, bosons, energies, config.threads),
        ground_state_bound_check(spec, basis, bosons, tuple(config.task.couplings), config.threads),
    ]
    return _output('lee-bounds', system, reports=reports)


@task
def suite(config: RunConfig) -> TaskOutput:
    """Every check that applies to the configured model."""
    system = config.build_system()
    return _output('suite', system, reports=run_suite(config, system))
