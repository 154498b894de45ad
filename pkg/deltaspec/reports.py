"""
Report types shared by every check, plus the small numerical helpers that
turn a sweep into a verdict.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from deltaspec.constants import EXPONENT_TOLERANCE
from deltaspec.setup import logger, DEFAULT_THREADS


class Verdict(Enum):
    HOLDS = 'holds'
    HOLDS_WITH_CALIBRATION = 'holds_with_calibration'
    VIOLATED = 'violated'
    INCONCLUSIVE = 'inconclusive'


# Worst first
_SEVERITY = (Verdict.VIOLATED, Verdict.INCONCLUSIVE, Verdict.HOLDS_WITH_CALIBRATION, Verdict.HOLDS)


def worst_verdict(verdicts: Iterable[Verdict]) -> Verdict:
    verdicts = list(verdicts)
    if not verdicts:
        return Verdict.INCONCLUSIVE
    return min(verdicts, key=_SEVERITY.index)


@dataclass(frozen=True)
class Measurement:
    """
    A reported number with its accuracy metadata.

    :ivar value: The number (real or complex).
    :ivar tolerance: Absolute accuracy the producing routine was asked for, or its error estimate.
    :ivar converged: Whether the producing routine met that accuracy.
    :ivar method: Which route produced the number.
    """
    value: Any
    tolerance: float = 0.0
    converged: bool = True
    method: str = ""


def measured(values: Iterable[Any], tolerance: float = 0.0, method: str = "") -> Tuple[Measurement, ...]:
    return tuple(Measurement(_number(value), float(tolerance), True, method) for value in values)


def _number(value: Any) -> Any:
    value = complex(value) if np.iscomplexobj(value) else float(value)
    if isinstance(value, complex) and value.imag == 0:
        return value.real
    return value


@dataclass(frozen=True)
class ExponentFit:
    """
    Least-squares line through ``(log x, log y)``.

    :ivar exponent: The slope.
    :ivar error: Standard error of the slope.
    :ivar prefactor: ``exp(intercept)``.
    """
    exponent: float
    error: float
    prefactor: float

    def matches(self, expected: float, tolerance: float = EXPONENT_TOLERANCE) -> bool:
        return abs(self.exponent - expected) <= tolerance + self.error

    def at_most(self, limit: float, tolerance: float = EXPONENT_TOLERANCE) -> bool:
        return self.exponent <= limit + tolerance + self.error


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> ExponentFit:
    """
    Fits ``y = A x**p`` on the positive entries of both sequences.

    :return: The fit; ``nan`` everywhere with fewer than two usable points.
    """
    x_array = np.abs(np.asarray(x, dtype=float))
    y_array = np.abs(np.asarray(y, dtype=float))
    usable = (x_array > 0) & (y_array > 0) & np.isfinite(y_array)
    if np.sum(usable) < 2:
        return ExponentFit(math.nan, math.nan, math.nan)
    if np.sum(usable) == 2:
        log_x, log_y = np.log(x_array[usable]), np.log(y_array[usable])
        slope = float((log_y[1] - log_y[0]) / (log_x[1] - log_x[0]))
        return ExponentFit(slope, 0.0, float(math.exp(log_y[0] - slope * log_x[0])))
    result = stats.linregress(np.log(x_array[usable]), np.log(y_array[usable]))
    return ExponentFit(float(result.slope), float(result.stderr), float(math.exp(result.intercept)))


@dataclass(frozen=True)
class BoundReport:
    """
    The outcome of one check.

    :ivar check: Which check produced the report.
    :ivar model: ``nonrelativistic``, ``relativistic``, ``lee`` or ``geometry``.
    :ivar geometry: Description of the geometry.
    :ivar variable: Name of the swept quantity.
    :ivar grid: The sweep values.
    :ivar values: The computed quantity per grid point.
    :ivar bound: The bound form per grid point (empty for residual checks).
    :ivar exponent_fit: Fitted scaling of ``values`` against ``grid``, when meaningful.
    :ivar verdict: The outcome.
    :ivar constants: ``(name, value, provenance)`` of every registry constant used.
    :ivar details: A one-line explanation of the verdict.
    """
    check: str
    model: str
    geometry: str
    variable: str
    grid: Tuple[Any, ...]
    values: Tuple[Measurement, ...]
    bound: Tuple[Measurement, ...] = ()
    exponent_fit: Optional[ExponentFit] = None
    verdict: Verdict = Verdict.INCONCLUSIVE
    constants: Tuple[Tuple[str, float, str], ...] = ()
    details: str = ""

    def __post_init__(self) -> None:
        logger.info(f"{self.check} on {self.geometry}: {self.verdict.value}"
                    f"{' (' + self.details + ')' if self.details else ''}")

    @property
    def passed(self) -> bool:
        return self.verdict in (Verdict.HOLDS, Verdict.HOLDS_WITH_CALIBRATION)

    def value_array(self) -> np.ndarray:
        return np.array([measurement.value for measurement in self.values])

    def bound_array(self) -> np.ndarray:
        return np.array([measurement.value for measurement in self.bound])


def compare_to_bound(values: Sequence[float], bounds: Sequence[float], tolerance: float,
                     calibrated: bool) -> Tuple[Verdict, str]:
    """
    :return: ``VIOLATED`` if any value exceeds its bound by more than
        ``tolerance`` (relative to the bound), otherwise ``HOLDS`` or
        ``HOLDS_WITH_CALIBRATION``; and a short explanation.
    """
    value_array = np.asarray(values, dtype=float)
    bound_array = np.asarray(bounds, dtype=float)
    if not np.all(np.isfinite(value_array)):
        return Verdict.INCONCLUSIVE, "non-finite values in the sweep"
    excess = value_array - bound_array * (1 + tolerance)
    if np.any(excess > 0):
        worst = int(np.argmax(excess))
        return Verdict.VIOLATED, (f"value {value_array[worst]:.6g} exceeds bound {bound_array[worst]:.6g} "
                                  f"at grid point {worst}")
    margin = float(np.min(bound_array / np.where(value_array > 0, value_array, math.inf)))
    verdict = Verdict.HOLDS_WITH_CALIBRATION if calibrated else Verdict.HOLDS
    return verdict, f"smallest bound/value ratio {margin:.4g}"


def residual_verdict(residuals: Sequence[float], tolerance: float) -> Tuple[Verdict, str]:
    array = np.asarray(residuals, dtype=float)
    if not np.all(np.isfinite(array)):
        return Verdict.INCONCLUSIVE, "non-finite residual"
    worst = float(np.max(array)) if array.size else 0.0
    verdict = Verdict.HOLDS if worst <= tolerance else Verdict.VIOLATED
    return verdict, f"largest residual {worst:.3e} against tolerance {tolerance:.1e}"


def evaluate_sweep(function: Callable[[Any], Any], grid: Iterable[Any], threads: int = DEFAULT_THREADS) -> List[Any]:
    """
    Evaluates ``function`` at every grid point, in grid order. With more
    than one thread the points run on a thread pool; numpy releases the GIL
    in the heavy kernels.
    """
    points = list(grid)
    if threads <= 1 or len(points) <= 1:
        return [function(point) for point in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(function, points))


def report_rows(report: BoundReport) -> List[dict]:
    """Flattens a report into one CSV row per grid point."""
    rows = []
    for index, point in enumerate(report.grid):
        value = report.values[index] if index < len(report.values) else None
        bound = report.bound[index] if index < len(report.bound) else None
        rows.append({
            'check': report.check,
            'model': report.model,
            'geometry': report.geometry,
            'variable': report.variable,
            'grid': _number(point) if np.isscalar(point) else str(point),
            'value': None if value is None else value.value,
            'tolerance': None if value is None else value.tolerance,
            'bound': None if bound is None else bound.value,
            'verdict': report.verdict.value,
        })
    return rows
