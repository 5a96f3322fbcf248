"""The conformal parameter family Theta_A, the family Q_A, and the 3n kernel fields.

Coordinates are 0-based in code.  Kernel index alpha follows the layout

    0            dilation          z0 = w Q + y.grad Q
    1..n         translations      z_i = d_i Q
    n+1          rotation (1,2)    y1 d2Q - y2 d1Q
    n+2, n+3     inversions        -2 y_a z0 + |y|^2 d_a Q   (a = 1, 2)
    n+4..2n+1    rotations (1,l)   y1 dlQ - yl d1Q           (l = 3..n)
    2n+2..3n-1   rotations (2,l)   y2 dlQ - yl d2Q           (l = 3..n)

where w is the conformal weight (n-2)/2 unless stated otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SingularityError
from .fields import ScalarField, as_points, richardson_derivative, richardson_laplacian
from .geometry import check_dimension, conformal_weight, critical_exponent, rotation_matrix, rotation_pairs

SINGULAR_MODULUS = 1e-12


@dataclass(frozen=True)
class ParamSet:
    """A = (lambda, xi, a, theta); ``a`` lives in the (y1, y2)-plane."""

    lam: float
    xi: tuple
    a: tuple = (0.0, 0.0)
    theta: tuple = ()

    def __post_init__(self):
        n = len(self.xi)
        check_dimension(n)
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if len(self.a) != 2:
            raise ParameterError("a must be a 2-vector")
        if math.hypot(*self.a) >= 0.5:
            raise ParameterError(f"|a| must stay below 1/2, got {math.hypot(*self.a):.4g}")
        th = tuple(self.theta) if len(self.theta) else (0.0,) * (2 * n - 3)
        if len(th) != 2 * n - 3:
            raise ParameterError(f"theta needs {2 * n - 3} angles, got {len(th)}")
        object.__setattr__(self, "theta", tuple(float(t) for t in th))
        object.__setattr__(self, "xi", tuple(float(t) for t in self.xi))
        object.__setattr__(self, "a", tuple(float(t) for t in self.a))

    @classmethod
    def identity(cls, n: int) -> "ParamSet":
        return cls(1.0, (0.0,) * n)

    @classmethod
    def regime(cls, eps: float, d: float, tau, a=(0.0, 0.0), theta=()) -> "ParamSet":
        """lambda = d sqrt(eps), xi = lambda tau."""
        lam = d * math.sqrt(eps)
        return cls(lam, tuple(lam * np.asarray(tau, dtype=float)), a, theta)

    @property
    def n(self) -> int:
        return len(self.xi)

    @property
    def xi_vec(self) -> np.ndarray:
        return np.asarray(self.xi)

    @property
    def a_vec(self) -> np.ndarray:
        v = np.zeros(self.n)
        v[:2] = self.a
        return v

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.theta, self.n)

    def replace(self, **kw) -> "ParamSet":
        d = dict(lam=self.lam, xi=self.xi, a=self.a, theta=self.theta)
        d.update(kw)
        return ParamSet(**d)


@dataclass(frozen=True)
class ReducedPoint:
    """eps-independent coordinates (d, tau, a, theta) with lambda = d sqrt(eps), xi = lambda tau."""

    d: float
    tau: tuple
    a: tuple = (0.0, 0.0)
    theta: tuple = ()
    eta: float = 0.25

    def __post_init__(self):
        n = len(self.tau)
        check_dimension(n)
        if not self.eta < self.d < 1 / self.eta:
            raise ParameterError(f"d = {self.d} outside ({self.eta}, {1 / self.eta})")
        if float(np.linalg.norm(self.tau)) >= self.eta:
            raise ParameterError(f"|tau| must stay below eta = {self.eta}")
        if len(self.a) != 2 or math.hypot(*self.a) >= 0.5:
            raise ParameterError("a must be a 2-vector with |a| < 1/2")
        th = tuple(self.theta) if len(self.theta) else (0.0,) * (2 * n - 3)
        if len(th) != 2 * n - 3:
            raise ParameterError(f"theta needs {2 * n - 3} angles, got {len(th)}")
        object.__setattr__(self, "theta", tuple(float(t) for t in th))
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        object.__setattr__(self, "a", tuple(float(t) for t in self.a))

    @classmethod
    def origin(cls, n: int, d: float, **kw) -> "ReducedPoint":
        return cls(d, (0.0,) * n, **kw)

    @property
    def n(self) -> int:
        return len(self.tau)

    @property
    def tau_vec(self) -> np.ndarray:
        return np.asarray(self.tau)

    def params(self, eps: float) -> ParamSet:
        return ParamSet.regime(eps, self.d, self.tau, self.a, self.theta)

    def rescaled(self) -> ParamSet:
        """The parameters (d, d tau, a, theta) of the blown-up picture."""
        return ParamSet(self.d, tuple(self.d * self.tau_vec), self.a, self.theta)

    def replace(self, **kw) -> "ReducedPoint":
        d = dict(d=self.d, tau=self.tau, a=self.a, theta=self.theta, eta=self.eta)
        d.update(kw)
        return ReducedPoint(**d)


def conformal_field(f: ScalarField, lam: float, xi, b, R, label: str = "") -> ScalarField:
    """x -> lam^{-m} g^{-m} f(R w), y = (x - xi)/lam, g = 1 - 2 b.y + |b|^2|y|^2, w = (y - b|y|^2)/g.

    This is a dilation/translation composed with the Kelvin-conjugated
    translation by b and the rotation R; it maps solutions of the critical
    equation to solutions.  sqrt(g) is the modulus |y/|y| - b|y||.
    """
    n = f.n
    m = conformal_weight(n)
    xi = np.asarray(xi, dtype=float)
    b = np.asarray(b, dtype=float)
    R = np.asarray(R, dtype=float)
    bb = float(b @ b)

    def parts(x):
        y = (as_points(x, n) - xi) / lam
        yy = np.sum(y * y, axis=1)
        g = 1.0 - 2.0 * (y @ b) + bb * yy
        if np.any(np.sqrt(np.maximum(g, 0.0)) < SINGULAR_MODULUS):
            raise SingularityError("evaluation on the singular point of the conformal map")
        w = (y - np.outer(yy, b)) / g[:, None]
        return y, yy, g, w, w @ R.T

    def value(x):
        _, _, g, _, Rw = parts(x)
        return lam ** (-m) * g ** (-m) * f.value(Rw)

    def gradient(x):
        y, yy, g, w, Rw = parts(x)
        fv = f.value(Rw)
        v = f.grad(Rw) @ R  # R^T grad f, as rows
        dg = -2.0 * b[None, :] + 2.0 * bb * y
        jt = (v - 2.0 * y * (v @ b)[:, None] - dg * np.sum(w * v, axis=1)[:, None]) / g[:, None]
        gy = -m * (g ** (-m - 1) * fv)[:, None] * dg + (g ** (-m))[:, None] * jt
        return lam ** (-m - 1) * gy

    lap = None
    if f.laplacian is not None or f.hessian is not None:
        def lap(x):
            _, _, g, _, Rw = parts(x)
            return lam ** (-m - 2) * g ** (-m - 2) * f.lap(Rw)

    far = None
    if bb > 0:
        far = float(lam**m * bb ** (-m) * f.value((-(R @ b) / bb)[None, :])[0])
    elif f.far_field is not None:
        far = lam**m * f.far_field
    meta = {"source": f, "lam": lam, "xi": xi, "b": b, "R": R}
    return ScalarField(n=n, value=value, gradient=gradient, laplacian=lap, far_field=far,
                       kelvin_invariant=False, label=label or f"conformal[{f.label}]", meta=meta)


def theta_transform(A: ParamSet, f: ScalarField) -> ScalarField:
    if A.n != f.n:
        raise ParameterError("parameter and field dimensions differ")
    return conformal_field(f, A.lam, A.xi_vec, A.a_vec, A.rotation, label=f"Theta[{f.label}]")


def q_family(A: ParamSet, Q: ScalarField) -> ScalarField:
    """Q_A(x) = Theta_A[Q](xi + R^{-1}(x - xi)): the inversion vector becomes R a and the argument is not rotated."""
    if A.n != Q.n:
        raise ParameterError("parameter and field dimensions differ")
    return conformal_field(Q, A.lam, A.xi_vec, A.rotation @ A.a_vec, np.eye(Q.n), label=f"Q_A[{Q.label}]")


def q_family_composed(A: ParamSet, Q: ScalarField) -> ScalarField:
    """The same field obtained by composing theta_transform with the rotation about xi."""
    T = theta_transform(A, Q)
    R = A.rotation
    xi = A.xi_vec

    def value(x):
        x = as_points(x, Q.n)
        return T.value(xi + (x - xi) @ R)

    return ScalarField(n=Q.n, value=value, label="Q_A composed")


# ------------------------------------------------------------------ kernel fields

def kernel_count(n: int) -> int:
    return 3 * check_dimension(n)


def kernel_labels(n: int) -> list[str]:
    labels = ["dilation"] + [f"d{i}" for i in range(1, n + 1)] + ["rot12", "inv1", "inv2"]
    labels += [f"rot1{l}" for l in range(3, n + 1)] + [f"rot2{l}" for l in range(3, n + 1)]
    return labels


def _rot_index(n: int, i: int, j: int) -> int:
    """Kernel index of the rotation generator in the (i, j) plane (0-based, i < j, i in {0, 1})."""
    if (i, j) == (0, 1):
        return n + 1
    if i == 0:
        return n + 2 + j
    return 2 * n + j


def all_kernel_values(Q: ScalarField, y, weight: float | None = None, with_gradient: bool = False):
    """Values (N, 3n) of every kernel field, and optionally gradients (N, 3n, n)."""
    n = Q.n
    y = as_points(y, n)
    w = conformal_weight(n) if weight is None else weight
    q = Q.value(y)
    t = Q.grad(y)
    yy = np.sum(y * y, axis=1)
    z0 = w * q + np.sum(y * t, axis=1)
    N = len(y)
    Z = np.empty((N, 3 * n))
    Z[:, 0] = z0
    Z[:, 1:n + 1] = t
    for (i, j) in rotation_pairs(n):
        Z[:, _rot_index(n, i, j)] = y[:, i] * t[:, j] - y[:, j] * t[:, i]
    for a in (0, 1):
        Z[:, n + 2 + a] = -2.0 * y[:, a] * z0 + yy * t[:, a]
    if not with_gradient:
        return Z
    Hs = Q.hess(y)
    G = np.empty((N, 3 * n, n))
    gz0 = (w + 1.0) * t + np.einsum("nij,nj->ni", Hs, y)
    G[:, 0] = gz0
    G[:, 1:n + 1] = np.transpose(Hs, (0, 2, 1))
    eye = np.eye(n)
    for (i, j) in rotation_pairs(n):
        G[:, _rot_index(n, i, j)] = (eye[i][None] * t[:, j:j + 1] + y[:, i:i + 1] * Hs[:, :, j]
                                     - eye[j][None] * t[:, i:i + 1] - y[:, j:j + 1] * Hs[:, :, i])
    for a in (0, 1):
        G[:, n + 2 + a] = (-2.0 * eye[a][None] * z0[:, None] - 2.0 * y[:, a:a + 1] * gz0
                           + 2.0 * y * t[:, a:a + 1] + yy[:, None] * Hs[:, :, a])
    return Z, G


def kernel_field(alpha: int, Q: ScalarField, weight: float | None = None) -> ScalarField:
    """The kernel field z_alpha of Q (see the module docstring for the layout)."""
    n = Q.n
    if not 0 <= alpha < 3 * n:
        raise IndexError(f"kernel index {alpha} outside 0..{3 * n - 1}")
    grad = None
    if Q.hessian is not None:
        def grad(y):
            return all_kernel_values(Q, y, weight, True)[1][:, alpha]

    def value(y):
        return all_kernel_values(Q, y, weight)[:, alpha]

    far = None
    return ScalarField(n=n, value=value, gradient=grad, far_field=far,
                       label=f"z{alpha}[{Q.label}]", meta={"alpha": alpha, "source": Q})


# ------------------------------------------------------------- identity checks

@dataclass
class IdentityLine:
    parameter: str
    kernel_index: int
    expected_sign: int
    signed_error: float
    flipped_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.signed_error <= self.tolerance

    @property
    def passed_up_to_sign(self) -> bool:
        return min(self.signed_error, self.flipped_error) <= self.tolerance

    @property
    def sign_flipped(self) -> bool:
        return self.flipped_error <= self.tolerance < self.signed_error


@dataclass
class IdentityReport:
    lines: list[IdentityLine] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(l.passed for l in self.lines)

    @property
    def passed_up_to_sign(self) -> bool:
        return all(l.passed_up_to_sign for l in self.lines)

    @property
    def flipped(self) -> list[str]:
        return [l.parameter for l in self.lines if l.sign_flipped]

    def max_error(self, up_to_sign: bool = False) -> float:
        if up_to_sign:
            return max(min(l.signed_error, l.flipped_error) for l in self.lines)
        return max(l.signed_error for l in self.lines)


def identity_directions(n: int) -> list[tuple[str, int, int]]:
    """(parameter name, kernel index, sign) with d/ds Theta = sign * z_index at the identity."""
    out = [("lambda", 0, -1)]
    out += [(f"xi{j + 1}", 1 + j, -1) for j in range(n)]
    out += [("a1", n + 2, +1), ("a2", n + 3, +1)]
    for (i, j) in rotation_pairs(n):
        out.append((f"theta{i + 1}{j + 1}", _rot_index(n, i, j), +1))
    return out


def _perturbed(A0: ParamSet, name: str, s: float) -> ParamSet:
    n = A0.n
    if name == "lambda":
        return A0.replace(lam=A0.lam + s)
    if name.startswith("xi"):
        xi = list(A0.xi)
        xi[int(name[2:]) - 1] += s
        return A0.replace(xi=tuple(xi))
    if name in ("a1", "a2"):
        a = list(A0.a)
        a[int(name[1]) - 1] += s
        return A0.replace(a=tuple(a))
    i, j = int(name[5]) - 1, int(name[6:]) - 1
    th = list(A0.theta)
    th[rotation_pairs(n).index((i, j))] += s
    return A0.replace(theta=tuple(th))


def derivative_identity_check(A0: ParamSet, Q: ScalarField, probes=None, step: float = 1e-5,
                              tol: float = 1e-5, seed: int = 0) -> IdentityReport:
    """Richardson central differences of Theta_A[Q] in each parameter against the kernel fields.

    Each line records the relative error for the stated sign and for the
    opposite sign, so a flipped identity is reported instead of hidden.
    """
    n = Q.n
    if probes is None:
        rng = np.random.default_rng(seed)
        probes = rng.standard_normal((20, n))
        probes *= np.exp(rng.uniform(np.log(0.1), np.log(3.0), 20))[:, None] / np.linalg.norm(probes, axis=1)[:, None]
    y = as_points(probes, n)
    Z = all_kernel_values(Q, y)
    report = IdentityReport()
    for name, idx, sign in identity_directions(n):
        def g(s, name=name):
            return theta_transform(_perturbed(A0, name, s), Q).value(y)

        D = richardson_derivative(g, step)
        ref = sign * Z[:, idx]
        # fields that vanish identically (rotations of a radial profile) are measured against Q itself
        scale = max(float(np.max(np.abs(ref))), float(np.max(np.abs(Q.value(y)))))
        report.lines.append(IdentityLine(
            parameter=name, kernel_index=idx, expected_sign=sign,
            signed_error=float(np.max(np.abs(D - ref))) / scale,
            flipped_error=float(np.max(np.abs(D + ref))) / scale,
            tolerance=tol,
        ))
    return report


@dataclass
class LinearizedLine:
    alpha: int
    weighted_residual: float     # sup (1+|y|)^{n+2} |L z_alpha|
    budget: float                # sup (1+|y|)^{n+2} |generator applied to the profile residual|
    mismatch: float              # sup (1+|y|)^{n+2} |L z_alpha - that prediction|
    scale: float                 # sup (1+|y|)^{n+2} (|Delta z| + p|Q|^{p-1}|z|)
    tolerance: float
    margin: float = 0.01

    @property
    def passed(self) -> bool:
        return self.weighted_residual <= (1 + self.margin) * self.budget + self.tolerance * self.scale


def default_stencil_step(Q: ScalarField, y: np.ndarray) -> np.ndarray:
    """1e-3 times the local length scale of Q (bubble sums know it), else 1e-3 (1 + |y|)."""
    core = Q.meta.get("bubble_sum")
    if core is not None:
        return 1e-3 * np.minimum(core.local_scale(y), 1 + np.linalg.norm(y, axis=1))
    return 1e-3 * (1 + np.linalg.norm(y, axis=1))


def linearized_residual_check(Q: ScalarField, probes, h=None, tol: float = 1e-7) -> list[LinearizedLine]:
    """L(z_alpha) = Delta z_alpha + p|Q|^{p-1} z_alpha at the probes, for all alpha.

    For an exact solution every line vanishes.  For an approximate profile
    with residual S = Delta Q + |Q|^{p-1}Q, the symmetry behind z_alpha maps S
    to the same generator with weight (n+2)/2, and that field is the budget.
    ``h`` is the stencil step (array or scalar); it should resolve the
    smallest length scale of Q.
    """
    from .crown import residual_field

    n = Q.n
    p = critical_exponent(n)
    y = as_points(probes, n)
    if h is None:
        h = default_stencil_step(Q, y)
    wts = (1 + np.linalg.norm(y, axis=1)) ** (n + 2)
    S = residual_field(Q)
    q = Q.value(y)
    pot = p * np.abs(q) ** (p - 1)
    Z = all_kernel_values(Q, y)
    pred = all_kernel_values(S, y, weight=(n + 2) / 2) if S.gradient is not None else None
    out = []
    for alpha in range(3 * n):
        zf = kernel_field(alpha, Q)
        lapz = richardson_laplacian(zf.value, y, h)
        Lz = lapz + pot * Z[:, alpha]
        scale = float(np.max(wts * (np.abs(lapz) + pot * np.abs(Z[:, alpha]))))
        if pred is None:
            budget = float("nan")
            mism = float("nan")
        else:
            budget = float(np.max(wts * np.abs(pred[:, alpha])))
            mism = float(np.max(wts * np.abs(Lz - pred[:, alpha])))
        out.append(LinearizedLine(alpha, float(np.max(wts * np.abs(Lz))), budget, mism, scale, tol))
    return out


def projected_kernel(j: int, A: ParamSet, eps: float, Q: ScalarField) -> ScalarField:
    """Z_j = Theta_{A~}[z_j] with A~ = (lambda/sqrt(eps), xi/lambda * lambda/sqrt(eps), a, theta)."""
    if not 0 < eps < 1:
        raise ParameterError("eps must lie in (0, 1)")
    d = A.lam / math.sqrt(eps)
    At = A.replace(lam=d, xi=tuple(A.xi_vec / math.sqrt(eps)))
    return theta_transform(At, kernel_field(j, Q))
