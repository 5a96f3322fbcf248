import numpy as np
import pytest

from crownlab.errors import EstimationError
from crownlab.fitting import ExpansionReport, fit_power_pair, loglog_fit


def test_loglog_recovers_power_law():
    x = np.logspace(-6, -2, 5)
    fit = loglog_fit(x, 3.0 * x**0.75)
    assert fit.slope == pytest.approx(0.75, abs=1e-12)
    assert fit.coefficient == pytest.approx(3.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0)


def test_loglog_uses_magnitudes():
    x = np.array([1e-3, 1e-4])
    assert loglog_fit(x, -2 * x).slope == pytest.approx(1.0)


def test_loglog_rejects_bad_samples():
    with pytest.raises(EstimationError):
        loglog_fit([1.0], [1.0])
    with pytest.raises(EstimationError):
        loglog_fit([1.0, 2.0], [0.0, 1.0])


def test_power_pair():
    x = np.logspace(-7, -3, 6)
    K1, K2 = fit_power_pair(x, 2.0 * x**0.5 - 300.0 * x, 0.5, 1.0)
    assert K1 == pytest.approx(2.0, rel=1e-9)
    assert K2 == pytest.approx(-300.0, rel=1e-7)


def test_report_verdicts():
    r = ExpansionReport("c", exponent=0.52, target_exponent=0.5, coefficient=1.1, target_coefficient=1.0)
    assert r.exponent_ok and r.coefficient_ok and r.passed
    r = ExpansionReport("c", exponent=0.6, target_exponent=0.5)
    assert not r.exponent_ok and r.coefficient_ok and not r.passed
