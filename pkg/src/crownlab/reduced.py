"""The reduced functional Psi(d, tau, a, theta), its critical point in d, and a saddle search.

Psi = 1/2 [B d^{n-2} + C d^{2-n}],   B = gamma^{-2} Q(-R a)^2 H(0, 0),   C = c2 F(tau, a, theta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import mpmath
import numpy as np
from scipy.optimize import minimize

from .energy import EnergyConstants, energy_domain
from .errors import ConsistencyError, NonConvergenceError, OutOfRegimeError, ParameterError
from .fields import ScalarField
from .fitting import ExpansionReport, fit_power_pair, loglog_fit
from .geometry import ball_regular_part, conformal_weight, rotation_matrix
from .kelvin import ReducedPoint
from .projection import f_function, project_leading
from .quadrature import QuadratureSpec


def psi_coefficients(tau, a, theta, consts: EnergyConstants, Q: ScalarField) -> tuple[float, float]:
    """(B, C) with Psi = (B d^{n-2} + C d^{2-n}) / 2."""
    n = Q.n
    v = np.zeros(n)
    v[:2] = a
    b = rotation_matrix(theta, n) @ v
    q = float(Q.value((-b)[None, :])[0])
    H00 = float(ball_regular_part(np.zeros(n), np.zeros(n)))
    B = q**2 * H00 / consts.gamma_n**2
    C = consts.c2 * f_function(tau, a, theta, Q)
    return B, C


def psi(pt: ReducedPoint, consts: EnergyConstants, Q: ScalarField) -> float:
    if not pt.eta < pt.d < 1 / pt.eta:
        raise ParameterError("d outside its box")
    n = Q.n
    B, C = psi_coefficients(pt.tau, pt.a, pt.theta, consts, Q)
    return 0.5 * (B * pt.d ** (n - 2) + C * pt.d ** (2 - n))


def psi_d_derivative(pt: ReducedPoint, consts: EnergyConstants, Q: ScalarField) -> float:
    n = Q.n
    B, C = psi_coefficients(pt.tau, pt.a, pt.theta, consts, Q)
    return 0.5 * (n - 2) * (B * pt.d ** (n - 3) - C * pt.d ** (1 - n))


def psi_vector(x: np.ndarray, consts: EnergyConstants, Q: ScalarField) -> float:
    """Psi on the flat coordinates x = (d, tau_1..tau_n, a_1, a_2, theta_1..theta_{2n-3})."""
    n = Q.n
    d = x[0]
    tau, a, theta = x[1:n + 1], x[n + 1:n + 3], x[n + 3:]
    B, C = psi_coefficients(tau, a, theta, consts, Q)
    return 0.5 * (B * d ** (n - 2) + C * d ** (2 - n))


def to_vector(pt: ReducedPoint) -> np.ndarray:
    return np.concatenate([[pt.d], pt.tau, pt.a, pt.theta])


def from_vector(x: np.ndarray, n: int, eta: float = 0.25) -> ReducedPoint:
    return ReducedPoint(float(x[0]), tuple(x[1:n + 1]), tuple(x[n + 1:n + 3]), tuple(x[n + 3:]), eta=eta)


def d_critical(tau, a, theta, consts: EnergyConstants, Q: ScalarField, check: bool = True) -> float:
    """d0 = (C/B)^{1/(2n-4)}, the unique critical point (a minimum) of Psi in d."""
    n = Q.n
    B, C = psi_coefficients(tau, a, theta, consts, Q)
    if C <= 0:
        raise OutOfRegimeError("F <= 0: no critical point in d", C)
    if B <= 0:
        raise OutOfRegimeError("Q(-R a) = 0: no critical point in d", B)
    d0 = (C / B) ** (1 / (2 * n - 4))
    if check:
        g = 0.5 * (n - 2) * (B * d0 ** (n - 3) - C * d0 ** (1 - n))
        scale = 0.5 * (n - 2) * B * d0 ** (n - 3)
        h = 1e-4 * d0

        def f(d):
            return 0.5 * (B * d ** (n - 2) + C * d ** (2 - n))

        curv = (f(d0 + h) - 2 * f(d0) + f(d0 - h)) / h**2
        if abs(g) > 1e-10 * max(1.0, scale) or not curv > 0:
            raise ConsistencyError(f"closed-form d0 fails its checks (dPsi={g:.3g}, curvature={curv:.3g})")
    return float(d0)


def golden_section_argmin(B: float, C: float, n: int, lo: float, hi: float, tol: float = 1e-14,
                          dps: int = 40) -> float:
    """argmin of (B d^{n-2} + C d^{2-n})/2 by golden-section search in extended precision.

    In double precision the argmin of a smooth minimum is only resolved to
    about sqrt(machine eps); working with ``dps`` digits removes that floor.
    """
    with mpmath.workdps(dps):
        Bm, Cm = mpmath.mpf(B), mpmath.mpf(C)

        def f(d):
            return (Bm * d ** (n - 2) + Cm * d ** (2 - n)) / 2

        a, b = mpmath.mpf(lo), mpmath.mpf(hi)
        invphi = (mpmath.sqrt(5) - 1) / 2
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc, fd = f(c), f(d)
        while b - a > tol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = f(d)
        return float((a + b) / 2)


def richardson_gradient(fun, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = 1.0
        d1 = (fun(x + h * e) - fun(x - h * e)) / (2 * h)
        d2 = (fun(x + h / 2 * e) - fun(x - h / 2 * e)) / h
        g[i] = (4 * d2 - d1) / 3
    return g


def richardson_hessian(fun, x: np.ndarray, idx: Sequence[int], h: float = 1e-4) -> np.ndarray:
    """Hessian block over the coordinates ``idx`` from Richardson-extrapolated second differences."""
    idx = list(idx)
    k = len(idx)
    H = np.empty((k, k))

    def second(i, j, s):
        ei = np.zeros_like(x)
        ej = np.zeros_like(x)
        ei[i] = s
        ej[j] = s
        if i == j:
            return (fun(x + ei) - 2 * fun(x) + fun(x - ei)) / s**2
        return (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)) / (4 * s**2)

    for a, i in enumerate(idx):
        for b, j in enumerate(idx[a:], start=a):
            v = (4 * second(i, j, h / 2) - second(i, j, h)) / 3
            H[a, b] = H[b, a] = v
    return H


# ------------------------------------------------------------------ expansion

def expansion_check(pt: ReducedPoint, eps_list: Sequence[float], consts: EnergyConstants, Q: ScalarField,
                    spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-11), rel_tol: float = 0.15) -> ExpansionReport:
    """J_eps(P) - c1 against K eps^{(n-2)/2}, with K compared to Psi(pt).

    K is obtained jointly with the next power eps^{(n-1)/2}; the log-log
    slope of J - c1 and the sign of K are recorded as well.
    """
    n = Q.n
    m = conformal_weight(n)
    radial = bool(Q.meta.get("radial")) and not np.any(pt.tau) and not np.any(pt.a)
    s = replace(spec, symmetry="radial" if radial else spec.symmetry)
    J = []
    for e in eps_list:
        P = project_leading(pt.params(e), e, Q).field
        J.append(float(energy_domain(P, e, s).value))
    J = np.array(J)
    diff = J - consts.c1
    eps = np.asarray(eps_list, dtype=float)
    K, K2 = fit_power_pair(eps, diff, m, (n - 1) / 2)
    fit = loglog_fit(eps, diff)
    target = psi(pt, consts, Q)
    rep = ExpansionReport(
        claim="energy expansion", exponent=fit.slope, target_exponent=m, coefficient=K,
        target_coefficient=target, residual=1 - fit.r_squared, rel_tol_exponent=0.1,
        rel_tol_coefficient=rel_tol, x=list(eps_list), y=list(diff),
    )
    rep.notes.update({"K_next": K2, "sign": int(np.sign(K)), "all_positive": bool(np.all(diff > 0))})
    return rep


def expansion_derivative_check(pt: ReducedPoint, eps_list: Sequence[float], consts: EnergyConstants,
                               Q: ScalarField, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-12),
                               rel_step: float = 1e-3, rel_tol: float = 0.15) -> ExpansionReport:
    """Central difference of J_eps in d against eps^{(n-2)/2} dPsi/dd."""
    n = Q.n
    m = conformal_weight(n)
    radial = bool(Q.meta.get("radial")) and not np.any(pt.tau) and not np.any(pt.a)
    s = replace(spec, symmetry="radial" if radial else spec.symmetry)
    h = rel_step * pt.d
    D = []
    for e in eps_list:
        vals = []
        for sgn in (1, -1):
            q = pt.replace(d=pt.d + sgn * h)
            vals.append(float(energy_domain(project_leading(q.params(e), e, Q).field, e, s).value))
        D.append((vals[0] - vals[1]) / (2 * h))
    eps = np.asarray(eps_list, dtype=float)
    K, K2 = fit_power_pair(eps, np.array(D), m, (n - 1) / 2)
    fit = loglog_fit(eps, D)
    return ExpansionReport(
        claim="energy expansion d-derivative", exponent=fit.slope, target_exponent=m, coefficient=K,
        target_coefficient=psi_d_derivative(pt, consts, Q), residual=1 - fit.r_squared,
        rel_tol_coefficient=rel_tol, x=list(eps_list), y=D, notes={"K_next": K2},
    )


# ------------------------------------------------------------------ saddle search

@dataclass
class OptimizeResult:
    point: ReducedPoint
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    d_curvature: float
    tau_a_eigenvalues: np.ndarray
    theta_curvature: np.ndarray
    theta_flat: bool
    trace: list = field(default_factory=list)


def _wrap(theta: np.ndarray) -> np.ndarray:
    return np.mod(theta + math.pi, 2 * math.pi) - math.pi


def tau_a_hessian(pt: ReducedPoint, consts: EnergyConstants, Q: ScalarField, h: float = 1e-4) -> np.ndarray:
    n = Q.n
    x = to_vector(pt)
    return richardson_hessian(lambda v: psi_vector(v, consts, Q), x, range(1, n + 3), h)


def optimize(consts: EnergyConstants, Q: ScalarField, start: ReducedPoint, max_iter: int = 200,
             gtol: float = 1e-9, h: float = 1e-4, flat_tol: float = 1e-5) -> OptimizeResult:
    """Critical point of Psi: minimise in d and theta, maximise in (tau, a).

    Each sweep sets d to its closed-form minimiser, maximises over (tau, a)
    with L-BFGS-B inside the box, then minimises over theta treating the
    angles periodically.  A Newton step on the full gradient polishes the
    point.  Theta directions whose curvature is below ``flat_tol`` times the
    largest (tau, a) curvature are reported as flat rather than as failure.
    """
    n = Q.n
    eta = start.eta
    x = to_vector(start).astype(float)
    i_tau = slice(1, n + 1)
    i_a = slice(n + 1, n + 3)
    i_th = slice(n + 3, 3 * n)
    f = lambda v: psi_vector(v, consts, Q)
    trace = []

    def full_grad(v):
        return richardson_gradient(f, v, h)

    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        x[0] = d_critical(x[i_tau], x[i_a], x[i_th], consts, Q, check=False)
        ta0 = np.concatenate([x[i_tau], x[i_a]])

        def neg(v):
            y = x.copy()
            y[1:n + 3] = v
            return -f(y)

        def neg_grad(v):
            y = x.copy()
            y[1:n + 3] = v
            return -richardson_gradient(f, y, h)[1:n + 3]

        bounds = [(-eta / math.sqrt(n) * 0.999, eta / math.sqrt(n) * 0.999)] * n + [(-0.35, 0.35)] * 2
        r = minimize(neg, ta0, jac=neg_grad, method="L-BFGS-B", bounds=bounds,
                     options={"gtol": 1e-13, "ftol": 1e-15, "maxiter": 200})
        x[1:n + 3] = r.x
        if np.any(x[i_a]):
            def th_f(v):
                y = x.copy()
                y[i_th] = v
                return f(y)

            def th_g(v):
                y = x.copy()
                y[i_th] = v
                return richardson_gradient(f, y, h)[i_th]

            r2 = minimize(th_f, x[i_th], jac=th_g, method="L-BFGS-B",
                          options={"gtol": 1e-13, "ftol": 1e-15, "maxiter": 200})
            x[i_th] = _wrap(r2.x)
        x[0] = d_critical(x[i_tau], x[i_a], x[i_th], consts, Q, check=False)
        g = full_grad(x)
        gn = float(np.linalg.norm(g))
        trace.append({"iteration": it, "grad_norm": gn, "value": f(x)})
        if gn < gtol:
            converged = True
            break
        # Newton polish on the non-flat coordinates
        idx = list(range(0, n + 3)) + ([] if not np.any(x[i_a]) else list(range(n + 3, 3 * n)))
        Hs = richardson_hessian(f, x, idx, h)
        try:
            step = np.linalg.solve(Hs, g[idx])
        except np.linalg.LinAlgError:
            continue
        if np.linalg.norm(step) < 0.1:
            y = x.copy()
            y[idx] -= step
            if np.linalg.norm(full_grad(y)) < gn:
                x = y
                x[i_th] = _wrap(x[i_th])
                gn = float(np.linalg.norm(full_grad(x)))
                trace.append({"iteration": it, "grad_norm": gn, "value": f(x), "newton": True})
                if gn < gtol:
                    converged = True
                    break
    pt = from_vector(x, n, eta)
    Hd = richardson_hessian(f, x, [0], h)[0, 0]
    Hta = richardson_hessian(f, x, range(1, n + 3), h)
    Hth = richardson_hessian(f, x, range(n + 3, 3 * n), h)
    th_eigs = np.linalg.eigvalsh(Hth)
    ta_eigs = np.linalg.eigvalsh(Hta)
    gn = float(np.linalg.norm(full_grad(x)))
    flat = bool(np.min(np.abs(th_eigs)) < flat_tol * np.max(np.abs(ta_eigs)))
    res = OptimizeResult(pt, f(x), gn, it, converged, float(Hd), ta_eigs, th_eigs, flat, trace)
    if not converged:
        raise NonConvergenceError(f"saddle search stopped with gradient norm {gn:.3g}", trace)
    return res
