"""Leading-order projection of Q_A onto functions vanishing on the punctured ball.

P = Q_A - gamma^{-1} lambda^m Q(-R a) H(x, xi) - lambda^{-m} F(tau, a, theta) eps^{n-2} |x|^{2-n}

The two corrections are harmonic, so P and the true projection differ by a
harmonic function whose boundary values are -P on |x| = eps and |x| = 1; by
the maximum principle the boundary sups of P bound that remainder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .crown import far_field_constant
from .errors import ParameterError
from .fields import ScalarField, as_points, linear_combination, sphere_directions
from .fitting import ExpansionReport, loglog_fit
from .geometry import (
    ball_regular_part,
    ball_regular_part_gradient,
    conformal_weight,
    critical_exponent,
    green_constant,
    rotation_matrix,
    rotation_pairs,
)
from .kelvin import ParamSet, ReducedPoint, q_family
from .quadrature import weighted_norm


def _inversion_vector(a, theta, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[:2] = a
    return rotation_matrix(theta, n) @ v


def f_function(tau, a, theta, Q: ScalarField) -> float:
    """F(tau, a, theta) = |tau|^{2-n} Q(-tau/|tau|^2 - R a), extended to tau = 0 by the far field.

    For Kelvin-invariant Q the equivalent form
    (1 + 2 tau.b + |b|^2|tau|^2)^{-m} Q((-tau - b|tau|^2)/(1 + 2 tau.b + |b|^2|tau|^2)), b = R a,
    is used; it is smooth through tau = 0.
    """
    n = Q.n
    tau = np.asarray(tau, dtype=float)
    b = _inversion_vector(a, theta, n)
    if Q.kelvin_invariant:
        tt = float(tau @ tau)
        g = 1.0 + 2.0 * float(tau @ b) + float(b @ b) * tt
        return float(g ** (-conformal_weight(n)) * Q.value(((-tau - b * tt) / g)[None, :])[0])
    return f_function_direct(tau, a, theta, Q)


def f_function_direct(tau, a, theta, Q: ScalarField) -> float:
    """The defining expression, with the tau = 0 branch taken from the far field of Q."""
    n = Q.n
    tau = np.asarray(tau, dtype=float)
    r = float(np.linalg.norm(tau))
    if r == 0.0:
        return Q.far_field if Q.far_field is not None else far_field_constant(Q)
    b = _inversion_vector(a, theta, n)
    z = -tau / r**2 - b
    return float(r ** (2 - n) * Q.value(z[None, :])[0])


@dataclass
class ProjectionField:
    base: ScalarField
    h_correction: ScalarField
    hole_correction: ScalarField
    eps: float
    params: ParamSet
    F: float
    boundary_weight: float   # gamma^{-1} lambda^m Q(-R a)

    @property
    def field(self) -> ScalarField:
        f = linear_combination([self.base, self.h_correction, self.hole_correction], [1, 1, 1], "P_leading")
        base = self.base

        def lap(y):
            return base.lap(y)

        return ScalarField(n=f.n, value=f.value, gradient=f.gradient, laplacian=lap, label="P_leading",
                           meta={"projection": self})


def _check_regime(A: ParamSet, eps: float):
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    if not A.lam < 1:
        raise ParameterError("lambda must be below 1")
    if float(np.linalg.norm(A.xi_vec)) >= 1:
        raise ParameterError("xi must lie inside the unit ball")


def project_leading(A: ParamSet, eps: float, Q: ScalarField) -> ProjectionField:
    _check_regime(A, eps)
    n = Q.n
    m = conformal_weight(n)
    gam = green_constant(n)
    lam = A.lam
    xi = A.xi_vec
    tau = xi / lam
    b = A.rotation @ A.a_vec
    base = q_family(A, Q)
    c_out = lam**m * float(Q.value((-b)[None, :])[0]) / gam
    F = f_function(tau, A.a, A.theta, Q)
    c_in = lam ** (-m) * F * eps ** (n - 2)

    def h_val(x):
        x = as_points(x, n)
        return -c_out * ball_regular_part(x, np.broadcast_to(xi, x.shape))

    def h_grad(x):
        x = as_points(x, n)
        return -c_out * ball_regular_part_gradient(x, np.broadcast_to(xi, x.shape))

    def hole_val(x):
        x = as_points(x, n)
        return -c_in * np.sum(x * x, axis=1) ** ((2 - n) / 2)

    def hole_grad(x):
        x = as_points(x, n)
        r2 = np.sum(x * x, axis=1)
        return -c_in * (2 - n) * r2[:, None] ** (-n / 2) * x

    zero = lambda x: np.zeros(len(as_points(x, n)))
    hc = ScalarField(n=n, value=h_val, gradient=h_grad, laplacian=zero, label="H correction")
    ho = ScalarField(n=n, value=hole_val, gradient=hole_grad, laplacian=zero, label="hole correction")
    return ProjectionField(base, hc, ho, eps, A, F, c_out)


def boundary_points(n: int, radius: float, n_dirs: int = 256, seed: int = 0) -> np.ndarray:
    return radius * sphere_directions(n, n_dirs, seed=seed)


def remainder_boundary_defect(A: ParamSet, eps: float, Q: ScalarField, n_dirs: int = 256) -> tuple[float, float]:
    """(sup_{|x|=eps} |P|, sup_{|x|=1} |P|) for the leading projection P."""
    P = project_leading(A, eps, Q).field
    n = Q.n
    inner = float(np.max(np.abs(P.value(boundary_points(n, eps, n_dirs)))))
    outer = float(np.max(np.abs(P.value(boundary_points(n, 1.0, n_dirs)))))
    return inner, outer


def defect_bound(n: int, eps: float, lam: float, which: str, parameter: str = "value") -> float:
    """The model bounds with unit constant.

    value/a/theta: inner lam^m (1 + eps lam^{1-n}), outer lam^m (lam^2 + (eps/lam)^{n-2});
    lambda: the same divided by lam;
    tau: lam^{n/2} [eps^{n-2}(1 + eps lam^{-n})|x|^{2-n} + lam^2 + eps^{n-2} lam^{1-n}] at |x| = eps or 1.
    """
    m = conformal_weight(n)
    if parameter == "tau":
        r = eps if which == "inner" else 1.0
        return lam ** (n / 2) * (eps ** (n - 2) * (1 + eps * lam ** (-n)) * r ** (2 - n)
                                 + lam**2 + eps ** (n - 2) * lam ** (1 - n))
    if which == "inner":
        v = lam**m * (1 + eps * lam ** (1 - n))
    else:
        v = lam**m * (lam**2 + (eps / lam) ** (n - 2))
    return v / lam if parameter == "lambda" else v


def _bound_slope(n, point: ReducedPoint, eps_list, which, parameter="value"):
    vals = [defect_bound(n, e, point.d * math.sqrt(e), which, parameter) for e in eps_list]
    return loglog_fit(eps_list, vals).slope


def defect_sweep(point: ReducedPoint, eps_list: Sequence[float], Q: ScalarField, n_dirs: int = 256,
                 rel_tol: float = 0.1) -> dict[str, ExpansionReport]:
    """Fit the eps-slopes of both boundary sups and compare with the unit-constant bounds."""
    n = Q.n
    inner, outer = [], []
    for e in eps_list:
        i, o = remainder_boundary_defect(point.params(e), e, Q, n_dirs)
        inner.append(i)
        outer.append(o)
    out = {}
    for name, data in (("inner", inner), ("outer", outer)):
        fit = loglog_fit(eps_list, data)
        out[name] = ExpansionReport(
            claim=f"boundary defect {name}", exponent=fit.slope,
            target_exponent=_bound_slope(n, point, eps_list, name), coefficient=fit.coefficient,
            residual=1 - fit.r_squared, rel_tol_exponent=rel_tol, x=list(eps_list), y=data,
        )
    m = conformal_weight(n)
    out["inner"].notes["asymptotic_exponent"] = m / 2 + min(0.0, (3 - n) / 2)
    out["outer"].notes["asymptotic_exponent"] = m / 2 + min(1.0, (n - 2) / 2)
    return out


def _shift_parameter(point: ReducedPoint, eps: float, parameter: str, s: float) -> ParamSet:
    A = point.params(eps)
    n = point.n
    if parameter == "lambda":
        lam = A.lam + s
        return A.replace(lam=lam, xi=tuple(lam * point.tau_vec))
    if parameter.startswith("tau"):
        t = point.tau_vec.copy()
        t[int(parameter[3:]) - 1] += s
        return A.replace(xi=tuple(A.lam * t))
    if parameter in ("a1", "a2"):
        a = list(A.a)
        a[int(parameter[1]) - 1] += s
        return A.replace(a=tuple(a))
    if parameter.startswith("theta"):
        i, j = int(parameter[5]) - 1, int(parameter[6:]) - 1
        th = list(A.theta)
        th[rotation_pairs(n).index((i, j))] += s
        return A.replace(theta=tuple(th))
    raise ParameterError(f"unknown parameter {parameter!r}")


def defect_derivative(point: ReducedPoint, eps: float, Q: ScalarField, parameter: str,
                      step: Optional[float] = None, n_dirs: int = 256) -> tuple[float, float]:
    """Boundary sups of the parameter derivative of P (central differences at fixed boundary points)."""
    n = Q.n
    lam = point.d * math.sqrt(eps)
    if step is None:
        step = 1e-4 * lam if parameter == "lambda" else 1e-4
    xin = boundary_points(n, eps, n_dirs)
    xout = boundary_points(n, 1.0, n_dirs)
    out = []
    for x in (xin, xout):
        fp = project_leading(_shift_parameter(point, eps, parameter, step), eps, Q).field.value(x)
        fm = project_leading(_shift_parameter(point, eps, parameter, -step), eps, Q).field.value(x)
        out.append(float(np.max(np.abs(fp - fm))) / (2 * step))
    return out[0], out[1]


def derivative_sweep(point: ReducedPoint, eps_list, Q: ScalarField, parameter: str,
                     n_dirs: int = 128) -> dict[str, ExpansionReport]:
    n = Q.n
    fam = "lambda" if parameter == "lambda" else ("tau" if parameter.startswith("tau") else "value")
    data = {"inner": [], "outer": []}
    for e in eps_list:
        i, o = defect_derivative(point, e, Q, parameter, n_dirs=n_dirs)
        data["inner"].append(i)
        data["outer"].append(o)
    out = {}
    for name in ("inner", "outer"):
        fit = loglog_fit(eps_list, data[name])
        out[name] = ExpansionReport(
            claim=f"d/d{parameter} boundary defect {name}", exponent=fit.slope,
            target_exponent=_bound_slope(n, point, eps_list, name, fam), coefficient=fit.coefficient,
            residual=1 - fit.r_squared, x=list(eps_list), y=data[name],
        )
    return out


# ------------------------------------------------------------------ error term

def blown_up_projection(point: ReducedPoint, eps: float, Q: ScalarField) -> ScalarField:
    """V(y) = eps^{m/2} P(sqrt(eps) y) on the blown-up domain."""
    n = Q.n
    m = conformal_weight(n)
    P = project_leading(point.params(eps), eps, Q).field
    se = math.sqrt(eps)

    def value(y):
        return eps ** (m / 2) * P.value(se * as_points(y, n))

    def gradient(y):
        return eps ** (m / 2) * se * P.grad(se * as_points(y, n))

    return ScalarField(n=n, value=value, gradient=gradient, label="V")


def error_field(point: ReducedPoint, eps: float, Q: ScalarField) -> ScalarField:
    """E = |V|^{p-1}V - |Q_A~|^{p-1}Q_A~ with V - Q_A~ written out in closed form.

    V - Q_A~ = -eps^m [d^m gamma^{-1} Q(-R a) H(sqrt(eps) y, xi) + d^{-m} F |y|^{2-n}].
    """
    n = Q.n
    m = conformal_weight(n)
    p = critical_exponent(n)
    gam = green_constant(n)
    A = point.params(eps)
    _check_regime(A, eps)
    QA = q_family(point.rescaled(), Q)
    b = _inversion_vector(point.a, point.theta, n)
    qb = float(Q.value((-b)[None, :])[0])
    F = f_function(point.tau_vec, point.a, point.theta, Q)
    xi = A.xi_vec
    se = math.sqrt(eps)
    d = point.d

    def diff(y):
        y = as_points(y, n)
        H = ball_regular_part(se * y, np.broadcast_to(xi, y.shape))
        r2 = np.sum(y * y, axis=1)
        return -eps**m * (d**m * qb * H / gam + d ** (-m) * F * r2 ** ((2 - n) / 2))

    def value(y):
        y = as_points(y, n)
        q = QA.value(y)
        v = q + diff(y)
        return np.abs(v) ** (p - 1) * v - np.abs(q) ** (p - 1) * q

    return ScalarField(n=n, value=value, label="E", meta={"difference": diff, "QA": QA})


def error_norm(point: ReducedPoint, eps: float, Q: ScalarField, n_radii: int = 200, n_dirs: int = 64) -> float:
    E = error_field(point, eps, Q)
    extra = [np.eye(Q.n)[0]]
    if np.any(point.tau_vec):
        extra.append(point.tau_vec)
    return weighted_norm(E, "starstar", eps, n_radii=n_radii, n_dirs=n_dirs, extra_directions=np.array(extra))


def error_region_split(point: ReducedPoint, eps: float, Q: ScalarField, n_radii: int = 200, n_dirs: int = 64):
    """Inner/outer weighted sups of E, with inner ratios to eps^m/|y|^{n-2} and to its p-th power."""
    from .quadrature import probe_grid

    n = Q.n
    m = conformal_weight(n)
    p = critical_exponent(n)
    E = error_field(point, eps, Q)
    y = probe_grid(n, math.sqrt(eps), 1 / math.sqrt(eps), n_radii, n_dirs).points()
    r = np.linalg.norm(y, axis=1)
    v = np.abs(E.value(y))
    inner = r < 1
    linear = eps**m / r[inner] ** (n - 2)
    return {
        "inner_sup": float(np.max(r[inner] ** (n - 2) * v[inner])),
        "outer_sup": float(np.max((1 + r[~inner] ** 4) * v[~inner])),
        "inner_ratio_linear": float(np.max(v[inner] / linear)),
        "inner_ratio_power": float(np.max(v[inner] / linear**p)),
    }


def error_norm_scaling(point: ReducedPoint, eps_list: Sequence[float], Q: ScalarField,
                       rel_tol: float = 0.1, n_radii: int = 200, n_dirs: int = 64) -> ExpansionReport:
    n = Q.n
    norms = [error_norm(point, e, Q, n_radii, n_dirs) for e in eps_list]
    fit = loglog_fit(eps_list, norms)
    return ExpansionReport(
        claim="error term starstar norm", exponent=fit.slope, target_exponent=(n - 2) / 2,
        coefficient=fit.coefficient, residual=1 - fit.r_squared, rel_tol_exponent=rel_tol,
        x=list(eps_list), y=norms,
    )
