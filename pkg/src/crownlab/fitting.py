"""Log-log regressions and the report type for asymptotic scaling claims."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EstimationError


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r_squared: float

    @property
    def coefficient(self) -> float:
        return float(np.exp(self.intercept))


def loglog_fit(x, y) -> LogLogFit:
    """Least-squares line through (log x, log |y|)."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise EstimationError("log-log fit needs at least two positive samples")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LogLogFit(float(slope), float(intercept), r2)


def fit_power_pair(x, y, e1: float, e2: float) -> tuple[float, float]:
    """Least-squares (K1, K2) in y = K1 x^e1 + K2 x^e2, scaled column-wise."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.stack([x**e1, x**e2], axis=1)
    s = np.max(np.abs(A), axis=0)
    c, *_ = np.linalg.lstsq(A / s, y, rcond=None)
    return float(c[0] / s[0]), float(c[1] / s[1])


@dataclass
class ExpansionReport:
    """One asymptotic claim: measured exponent/coefficient against a target."""

    claim: str
    exponent: float
    target_exponent: float
    coefficient: float = float("nan")
    target_coefficient: Optional[float] = None
    residual: float = float("nan")
    rel_tol_exponent: float = 0.1
    rel_tol_coefficient: float = 0.15
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def exponent_ok(self) -> bool:
        return abs(self.exponent - self.target_exponent) <= self.rel_tol_exponent * abs(self.target_exponent)

    @property
    def coefficient_ok(self) -> bool:
        if self.target_coefficient is None:
            return True
        return abs(self.coefficient / self.target_coefficient - 1) <= self.rel_tol_coefficient

    @property
    def passed(self) -> bool:
        return self.exponent_ok and self.coefficient_ok
