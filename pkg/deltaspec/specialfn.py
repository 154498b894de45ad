"""
Special functions and quadrature engines used by every other module.

Every semi-infinite integral in the library goes through
:func:`semi_infinite_rule`: geometrically shrinking Gauss-Legendre panels in
``tau = sqrt(x)`` on ``[0, split_point]`` followed by a Gauss-Laguerre tail.
The square-root substitution absorbs ``x**-0.5`` endpoint behaviour, and the
geometric panels resolve integrands whose scale is many decades below the
decay scale (large ``|E|`` against a small binding energy).
"""
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy import special

from deltaspec.constants import (DEFAULT_NODE_COUNT, DEFAULT_RELATIVE_TOLERANCE, DEFAULT_MAX_REFINEMENTS,
                                 DEFAULT_SPLIT_POINT, PANEL_COUNT, S_PANEL_COUNT, S_GAUSSIAN_EXTENT,
                                 MAX_LAGUERRE_NODES, DEFAULT_NODE_COUNT_2D)
from deltaspec.errors import DomainError, ConvergenceError
from deltaspec.setup import logger

Number = Union[float, complex]

BESSEL_ORDERS = (0.0, 0.5, 1.0, 1.5)


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Accuracy settings for the quadrature engines.

    :ivar node_count: Gauss nodes per panel at the finest level of the first pass.
    :ivar relative_tolerance: Agreement demanded between two successive levels.
    :ivar max_refinements: How many times the node count may be doubled.
    :ivar split_point: End of the panel region, in units of the decay length.
    """
    node_count: int = DEFAULT_NODE_COUNT
    relative_tolerance: float = DEFAULT_RELATIVE_TOLERANCE
    max_refinements: int = DEFAULT_MAX_REFINEMENTS
    split_point: float = DEFAULT_SPLIT_POINT

    def __post_init__(self) -> None:
        if self.node_count < 8:
            raise DomainError(f"QuadratureSpec.node_count must be at least 8, got {self.node_count}")
        if not (0 < self.relative_tolerance <= 1e-3):
            raise DomainError(f"QuadratureSpec.relative_tolerance must lie in (0, 1e-3], "
                              f"got {self.relative_tolerance!r}")
        if self.max_refinements < 1:
            raise DomainError(f"QuadratureSpec.max_refinements must be positive, got {self.max_refinements}")
        if self.split_point <= 0:
            raise DomainError(f"QuadratureSpec.split_point must be positive, got {self.split_point!r}")

    def with_tolerance(self, relative_tolerance: float) -> 'QuadratureSpec':
        return replace(self, relative_tolerance=relative_tolerance)


DEFAULT_QUADRATURE = QuadratureSpec()
DEFAULT_QUADRATURE_2D = QuadratureSpec(node_count=DEFAULT_NODE_COUNT_2D)


@dataclass(frozen=True)
class Rule:
    """
    Nodes and weights on ``(0, inf)``.

    ``weights`` integrate against ``exp(-x)``; ``plain_weights`` integrate
    without a weight function.
    """
    nodes: np.ndarray
    weights: np.ndarray
    plain_weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)


def frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=32)
def gauss_legendre_panels(node_count: int, panel_count: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes on ``[0, 1]`` split into panels ``[2**-(j+1), 2**-j]``,
    with the last panel reaching down to zero.

    :param node_count: Nodes per panel.
    :param panel_count: Number of panels.
    :return: Nodes and weights, ascending.
    """
    base_nodes, base_weights = special.roots_legendre(node_count)
    edges = np.concatenate(([0.0], 2.0 ** -np.arange(panel_count - 1, -1, -1, dtype=float)))
    low, high = edges[:-1], edges[1:]
    half = (high - low) / 2
    middle = (high + low) / 2
    nodes = (middle[:, None] + half[:, None] * base_nodes[None, :]).ravel()
    weights = (half[:, None] * base_weights[None, :]).ravel()
    return frozen(nodes), frozen(weights)


@lru_cache(maxsize=32)
def semi_infinite_rule(node_count: int, split_point: float = DEFAULT_SPLIT_POINT,
                       panel_count: int = PANEL_COUNT) -> Rule:
    """
    Composite rule for ``int_0^inf exp(-x) phi(x) dx``.

    The panel region ``[0, split_point]`` uses Gauss-Legendre in
    ``tau = sqrt(x)``; the tail uses Gauss-Laguerre shifted to ``split_point``.
    Results are cached, so identical arguments give bit-identical rules.

    :param node_count: Nodes per panel and in the tail (the tail is capped).
    :param split_point: Where the panels hand over to the tail.
    :param panel_count: Number of geometric panels.
    :return: The cached rule.
    :rtype: Rule
    """
    root = math.sqrt(split_point)
    tau, tau_weights = gauss_legendre_panels(node_count, panel_count)
    tau = root * tau
    panel_nodes = tau ** 2
    panel_plain = 2 * tau * root * tau_weights
    tail_count = min(node_count, MAX_LAGUERRE_NODES)
    laguerre_nodes, laguerre_weights = special.roots_laguerre(tail_count)
    tail_nodes = split_point + laguerre_nodes
    tail_weights = laguerre_weights * math.exp(-split_point)
    with np.errstate(divide='ignore'):
        tail_plain = np.exp(np.log(laguerre_weights) + laguerre_nodes)
    nodes = np.concatenate((panel_nodes, tail_nodes))
    weights = np.concatenate((panel_plain * np.exp(-panel_nodes), tail_weights))
    plain = np.concatenate((panel_plain, tail_plain))
    return Rule(frozen(nodes), frozen(weights), frozen(plain))


def _relative_gap(current: Any, previous: Any) -> float:
    current = np.asarray(current)
    previous = np.asarray(previous)
    scale = float(np.max(np.abs(current))) if current.size else 0.0
    gap = float(np.max(np.abs(current - previous))) if current.size else 0.0
    if scale == 0.0:
        return gap
    return gap / scale


def _as_result(value: np.ndarray) -> Any:
    if np.ndim(value) == 0:
        return value.item()
    return value


def refine(evaluate: Callable[[int], np.ndarray], spec: QuadratureSpec, what: str) -> Any:
    """
    Runs ``evaluate`` at ``node_count // 2`` and ``node_count``, doubling both until
    two successive levels agree to ``spec.relative_tolerance``.

    :param evaluate: Maps a node count to a quadrature value (scalar or array).
    :param spec: Accuracy settings.
    :param what: Description used in log lines and errors.
    :return: The finer of the last two values.
    :raises ConvergenceError: If the levels never agree.
    """
    count = spec.node_count
    previous = evaluate(max(count // 2, 4))
    gap = math.inf
    for level in range(spec.max_refinements + 1):
        current = evaluate(count)
        gap = _relative_gap(current, previous)
        if gap <= spec.relative_tolerance:
            if level:
                logger.debug(f"{what}: converged after {level} refinements (gap {gap:.2e})")
            return _as_result(current)
        previous = current
        count *= 2
    raise ConvergenceError(f"{what} did not converge: successive refinements differ by {gap:.3e} "
                           f"(tolerance {spec.relative_tolerance:.1e}) after {spec.max_refinements} "
                           f"refinements, last node count {count // 2}")


def laplace_integral(integrand: Callable[[np.ndarray], Any], decay_rate: float,
                     spec: Optional[QuadratureSpec] = None,
                     small_t_limit: Optional[Number] = None,
                     small_t_cutoff: float = 1e-13,
                     peak_time: Optional[float] = None) -> Any:
    """
    Computes ``int_0^inf exp(-decay_rate * t) g(t) dt``.

    The integrand is called once per refinement level with the full node array
    and may return values of shape ``(n,)`` or ``(n, ...)``; the result has the
    trailing shape. It is never evaluated at ``t = 0``. Integrands that are a
    difference of exponentials over ``t`` lose every digit for tiny ``t``; pass
    their analytic limit as ``small_t_limit`` and it replaces the values below
    ``small_t_cutoff / decay_rate``.

    Integrands of the form ``exp(-c/t)`` peak near ``sqrt(c/decay_rate)``. When
    ``peak_time`` puts that peak far out on the rule, the nodes are placed with
    the smaller rate ``2/peak_time`` and the rest of the weight is folded into
    the integrand.

    :param integrand: The function ``g``, vectorized over ``t``.
    :param decay_rate: The rate ``p > 0`` of the exponential weight.
    :param spec: Accuracy settings.
    :param small_t_limit: Value of ``g`` as ``t -> 0``, when finite.
    :param small_t_cutoff: Dimensionless cutoff for ``small_t_limit``.
    :param peak_time: Where the integrand concentrates, when known.
    :return: The integral.
    :raises DomainError: If ``decay_rate`` is not positive.
    :raises ConvergenceError: If refinement fails.
    """
    if not decay_rate > 0:
        raise DomainError(f"laplace_integral needs a positive decay rate, got {decay_rate!r}")
    spec = spec or DEFAULT_QUADRATURE
    rate = decay_rate
    if peak_time is not None and decay_rate * peak_time > 2:
        rate = 2 / peak_time

    def evaluate(count: int) -> np.ndarray:
        rule = semi_infinite_rule(count, spec.split_point)
        t = rule.nodes / rate
        values = np.asarray(integrand(t))
        if rate != decay_rate:
            values = values * np.exp(-(decay_rate - rate) * t).reshape((-1,) + (1,) * (values.ndim - 1))
        if small_t_limit is not None:
            small = (rule.nodes < small_t_cutoff).reshape((-1,) + (1,) * (values.ndim - 1))
            values = np.where(small, small_t_limit, values)
        return np.tensordot(rule.weights, values, axes=(0, 0)) / rate

    return refine(evaluate, spec, "laplace_integral")


def _gaussian_s_rule(count: int) -> Tuple[np.ndarray, np.ndarray]:
    return gauss_legendre_panels(count, S_PANEL_COUNT)


def double_integral_su(integrand: Callable[[np.ndarray, np.ndarray], Any],
                       spec: Optional[QuadratureSpec] = None,
                       gaussian_weight: bool = True,
                       u_decay_rate: float = 1.0,
                       drift: float = 0.0,
                       s_decay_rate: float = 1.0,
                       chunk: int = 96,
                       weight_in_integrand: bool = False) -> Any:
    """
    Computes ``int_0^inf ds w(s) int_0^inf du exp(-p u) f(s, u)``.

    With ``gaussian_weight`` the s-weight is ``exp(-s**2/4)`` and the s-range is
    truncated at ``13 + 2 * drift * sqrt(u)``, which covers integrands carrying
    an extra ``exp(drift * s * sqrt(u))`` factor. Without it the integrand must
    decay on its own, at roughly ``exp(-s_decay_rate * s)``.

    The integrand receives ``s`` with shape ``(n_s, k)`` and ``u`` with shape
    ``(1, k)`` for chunks of ``k`` u-nodes, so anything depending on ``u`` only
    is evaluated once per node. With ``weight_in_integrand`` the Gaussian factor
    is left to the integrand, so it can be combined with large exponentials in
    one exponent.

    :param integrand: The function ``f``.
    :param spec: Accuracy settings (the 2D default uses 48 nodes per panel).
    :param gaussian_weight: Whether the Gaussian s-weight is applied.
    :param u_decay_rate: The rate ``p`` of the u-weight.
    :param drift: Shift of the Gaussian peak per unit ``sqrt(u)``.
    :param s_decay_rate: Decay scale of the s-integrand without Gaussian weight.
    :param chunk: Number of u-nodes handled at once.
    :param weight_in_integrand: Whether the integrand already carries ``exp(-s**2/4)``.
    :return: The double integral.
    """
    if not u_decay_rate > 0:
        raise DomainError(f"double_integral_su needs a positive u decay rate, got {u_decay_rate!r}")
    if drift < 0:
        raise DomainError(f"double_integral_su drift must be nonnegative, got {drift!r}")
    spec = spec or DEFAULT_QUADRATURE_2D

    def evaluate(count: int) -> np.ndarray:
        u_rule = semi_infinite_rule(count, spec.split_point)
        u_nodes = u_rule.nodes / u_decay_rate
        u_weights = u_rule.weights / u_decay_rate
        if gaussian_weight:
            fractions, fraction_weights = _gaussian_s_rule(count)
        else:
            s_rule = semi_infinite_rule(count, spec.split_point)
        total: Any = 0.0
        for start in range(0, len(u_nodes), chunk):
            u = u_nodes[None, start:start + chunk]
            if gaussian_weight:
                extent = S_GAUSSIAN_EXTENT + 2.0 * drift * np.sqrt(u)
                s = fractions[:, None] * extent
                s_weights = fraction_weights[:, None] * extent
                if not weight_in_integrand:
                    s_weights = s_weights * np.exp(-s ** 2 / 4)
            else:
                s = np.repeat(s_rule.nodes[:, None] / s_decay_rate, u.shape[1], axis=1)
                s_weights = np.repeat(s_rule.plain_weights[:, None] / s_decay_rate, u.shape[1], axis=1)
            values = np.asarray(integrand(s, u))
            weights = s_weights * u_weights[None, start:start + chunk]
            total = total + np.tensordot(weights, values, axes=([0, 1], [0, 1]))
        return np.asarray(total)

    return refine(evaluate, spec, "double_integral_su")


def bessel_k(order: float, x: Any) -> Any:
    """
    Modified Bessel function of the second kind for the orders the library
    needs (0, 1/2, 1, 3/2). Underflows quietly to zero for large arguments.

    :param order: One of ``BESSEL_ORDERS``.
    :param x: Positive argument (scalar or array).
    :return: ``K_order(x)``.
    :raises DomainError: For other orders or nonpositive arguments.
    """
    if float(order) not in BESSEL_ORDERS:
        raise DomainError(f"bessel_k supports orders {BESSEL_ORDERS}, got {order!r}")
    values = np.asarray(x, dtype=float)
    if np.any(values <= 0):
        raise DomainError(f"bessel_k needs a positive argument, got {x!r}")
    return _as_result(np.asarray(special.kv(float(order), values)))


def sn(curvature: float, r: Any) -> Any:
    """
    The curvature-normalized sine: ``sin(sqrt(K) r)/sqrt(K)``, ``r`` or
    ``sinh(sqrt(-K) r)/sqrt(-K)``. Continuous in ``K`` at zero.

    :param curvature: The curvature ``K``.
    :param r: Nonnegative radius (scalar or array).
    :return: ``sn_K(r)``.
    :raises DomainError: For negative ``r``, or ``r > pi/sqrt(K)`` when ``K > 0``.
    """
    radius = np.asarray(r, dtype=float)
    if np.any(radius < 0):
        raise DomainError(f"sn needs a nonnegative radius, got {r!r}")
    if curvature > 0 and np.any(radius > math.pi / math.sqrt(curvature) * (1 + 1e-12)):
        raise DomainError(f"sn with curvature {curvature!r} is only defined up to r = "
                          f"{math.pi / math.sqrt(curvature)!r}, got {r!r}")
    z = curvature * radius ** 2
    series = radius * (1 - z / 6 + z ** 2 / 120)
    if curvature > 0:
        root = math.sqrt(curvature)
        exact = np.sin(root * radius) / root
    elif curvature < 0:
        root = math.sqrt(-curvature)
        exact = np.sinh(root * radius) / root
    else:
        exact = radius
    return _as_result(np.where(np.abs(z) < 1e-6, series, exact))


def bessel_mellin_closed_form(power: float, mu: float, nu: float, a: float) -> float:
    """
    Closed form of ``int_0^inf r**(power-1) K_mu(a r) K_nu(a r) dr``.

    :raises DomainError: If the integral diverges at the origin.
    """
    arguments = [(power + mu + nu) / 2, (power + mu - nu) / 2, (power - mu + nu) / 2, (power - mu - nu) / 2]
    if min(arguments) <= 0:
        raise DomainError(f"Bessel product integral with power {power}, orders ({mu}, {nu}) diverges at r=0")
    product = math.prod(math.gamma(value) for value in arguments)
    return 2 ** (power - 3) * product / (a ** power * math.gamma(power))


def bessel_product_integral(power: float, mu: float, nu: float, a: float,
                            spec: Optional[QuadratureSpec] = None) -> float:
    """
    The same integral as :func:`bessel_mellin_closed_form`, by Laplace-style
    quadrature with the ``exp(-2 a r)`` decay split off through scaled Bessel
    functions.
    """
    def integrand(r: np.ndarray) -> np.ndarray:
        return r ** (power - 1) * special.kve(mu, a * r) * special.kve(nu, a * r)
    return laplace_integral(integrand, 2 * a, spec)


def bessel_estimate_integrals(a: float, dimension: int) -> Dict[str, Tuple[float, float, float]]:
    """
    The three Bessel integrals that bound the free-resolvent norms, as
    ``(power, mu, nu)`` triples keyed by name, ready for either route.
    """
    half = dimension / 2 - 1
    return {
        "r^(D+1) K1^2": (dimension + 2.0, 1.0, 1.0),
        "r K_(D/2-1)^2": (2.0, half, half),
        "r^(D/2+1) K1 K_(D/2-1)": (dimension / 2 + 2.0, 1.0, half),
    }


def bessel_closed_forms(a: float, dimension: int) -> Dict[str, float]:
    """
    Gamma-function closed forms of the three integrals listed by
    :func:`bessel_estimate_integrals`.
    """
    return {name: bessel_mellin_closed_form(power, mu, nu, a)
            for name, (power, mu, nu) in bessel_estimate_integrals(a, dimension).items()}


def expm1_difference(a: Any, b: Any, t: Any) -> Any:
    """
    ``exp(-a t) - exp(-b t)`` computed without cancellation when ``a t`` and
    ``b t`` are close.
    """
    return -np.exp(-a * t) * np.expm1(-(b - a) * t)
