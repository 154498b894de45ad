import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from deltaspec.reports import (BoundReport, Measurement, Verdict, compare_to_bound, evaluate_sweep, fit_power_law,
                               measured, report_rows, residual_verdict, worst_verdict)


def test_worst_verdict():
    assert worst_verdict([Verdict.HOLDS, Verdict.HOLDS_WITH_CALIBRATION]) == Verdict.HOLDS_WITH_CALIBRATION
    assert worst_verdict([Verdict.INCONCLUSIVE, Verdict.VIOLATED, Verdict.HOLDS]) == Verdict.VIOLATED
    assert worst_verdict([Verdict.HOLDS, Verdict.INCONCLUSIVE]) == Verdict.INCONCLUSIVE
    assert worst_verdict([]) == Verdict.INCONCLUSIVE


def test_fit_power_law_exact():
    x = np.geomspace(1, 1000, 7)
    fit = fit_power_law(x, 3 * x ** -1.5)
    assert_allclose(fit.exponent, -1.5, rtol=1e-12)
    assert_allclose(fit.prefactor, 3.0, rtol=1e-12)
    assert fit.matches(-1.5)
    assert not fit.matches(-1.0)
    assert fit.at_most(-1.45)


def test_fit_power_law_two_points():
    fit = fit_power_law([1.0, 4.0], [2.0, 1.0])
    assert_allclose(fit.exponent, -0.5)
    assert fit.error == 0.0


def test_fit_power_law_skips_unusable_points():
    fit = fit_power_law([1.0, 2.0, 0.0], [1.0, 0.0, 5.0])
    assert math.isnan(fit.exponent)


def test_compare_to_bound():
    verdict, details = compare_to_bound([1.0, 2.0], [1.5, 2.5], 0.0, False)
    assert verdict == Verdict.HOLDS
    assert "1.25" in details
    verdict, _ = compare_to_bound([1.0, 2.0], [1.5, 2.5], 0.0, True)
    assert verdict == Verdict.HOLDS_WITH_CALIBRATION
    verdict, details = compare_to_bound([1.0, 3.0], [1.5, 2.5], 0.1, True)
    assert verdict == Verdict.VIOLATED
    assert "grid point 1" in details
    verdict, _ = compare_to_bound([1.0, math.nan], [1.5, 2.5], 0.1, True)
    assert verdict == Verdict.INCONCLUSIVE


def test_compare_to_bound_tolerance():
    verdict, _ = compare_to_bound([1.0 + 1e-10], [1.0], 1e-8, False)
    assert verdict == Verdict.HOLDS


def test_residual_verdict():
    assert residual_verdict([1e-12, 1e-10], 1e-9)[0] == Verdict.HOLDS
    assert residual_verdict([1e-12, 1e-8], 1e-9)[0] == Verdict.VIOLATED
    assert residual_verdict([math.inf], 1e-9)[0] == Verdict.INCONCLUSIVE
    assert residual_verdict([], 1e-9)[0] == Verdict.HOLDS


def test_measured_collapses_real_complex():
    values = measured([complex(2.0, 0.0), np.float64(1.5), 1 + 2j], 1e-9, "test")
    assert values[0].value == 2.0 and isinstance(values[0].value, float)
    assert isinstance(values[1].value, float)
    assert values[2].value == 1 + 2j
    assert values[2].tolerance == 1e-9


@pytest.mark.parametrize("threads", [1, 4])
def test_evaluate_sweep_keeps_order(threads):
    assert evaluate_sweep(lambda x: x * x, range(10), threads) == [x * x for x in range(10)]


def test_report_rows():
    report = BoundReport('alpha_scaling', 'nonrelativistic', 'FlatTorus(...)', 'E', (-1.0, -10.0),
                         measured([0.5, 0.05]), measured([1.0]), None, Verdict.HOLDS)
    rows = report_rows(report)
    assert len(rows) == 2
    assert rows[0]['bound'] == 1.0 and rows[1]['bound'] is None
    assert rows[1]['value'] == 0.05
    assert rows[0]['verdict'] == 'holds'
    assert report.passed
    assert_allclose(report.value_array(), [0.5, 0.05])


def test_report_rows_tuple_grid():
    report = BoundReport('subordination', 'relativistic', 'm=1', '(s, lambda)', ((0.5, 1.0),),
                         (Measurement(1e-12),), verdict=Verdict.VIOLATED)
    assert report_rows(report)[0]['grid'] == '(0.5, 1.0)'
    assert not report.passed
