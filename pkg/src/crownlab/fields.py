"""Scalar fields on R^n with vectorised value/gradient/Laplacian evaluators.

Every evaluator takes an array of points of shape (N, n) (a single point of
shape (n,) is also accepted) and returns values of shape (N,), gradients of
shape (N, n), Hessians of shape (N, n, n).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Evaluator = Callable[[np.ndarray], np.ndarray]


def as_points(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    if y.shape[-1] != n:
        from .errors import DimensionMismatchError

        raise DimensionMismatchError(f"points have dimension {y.shape[-1]}, field expects {n}")
    return y


def fd_step(y: np.ndarray, base: float = 1e-4) -> np.ndarray:
    return base * (1.0 + np.linalg.norm(y, axis=-1))


def central_gradient(f: Evaluator, y: np.ndarray, h=None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    N, n = y.shape
    h = fd_step(y) if h is None else np.broadcast_to(np.asarray(h, dtype=float), (N,))
    g = np.empty((N, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        g[:, i] = (f(y + h[:, None] * e) - f(y - h[:, None] * e)) / (2 * h)
    return g


def stencil_laplacian(f: Evaluator, y: np.ndarray, h=None) -> np.ndarray:
    """The (2n+1)-point Laplacian stencil."""
    y = np.asarray(y, dtype=float)
    N, n = y.shape
    h = fd_step(y) if h is None else np.broadcast_to(np.asarray(h, dtype=float), (N,))
    f0 = f(y)
    acc = -2.0 * n * f0
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        acc = acc + f(y + h[:, None] * e) + f(y - h[:, None] * e)
    return acc / h**2


def richardson_laplacian(f: Evaluator, y: np.ndarray, h=None) -> np.ndarray:
    """Stencil Laplacian with one Richardson step (fourth order)."""
    y = np.asarray(y, dtype=float)
    h = fd_step(y, 1e-3) if h is None else np.broadcast_to(np.asarray(h, dtype=float), (len(y),))
    coarse = stencil_laplacian(f, y, h)
    fine = stencil_laplacian(f, y, h / 2)
    return (4.0 * fine - coarse) / 3.0


def richardson_derivative(g: Callable[[float], np.ndarray], h: float) -> np.ndarray:
    """d/dt g(t) at t = 0 from central differences at steps h and h/2."""
    d1 = (g(h) - g(-h)) / (2 * h)
    d2 = (g(h / 2) - g(-h / 2)) / h
    return (4.0 * d2 - d1) / 3.0


@dataclass(frozen=True)
class ScalarField:
    """A smooth function R^n -> R with optional analytic derivatives.

    Missing derivatives fall back to centred finite differences with step
    1e-4 (1 + |y|); ``fd_gradient`` / ``fd_laplacian`` report when that happens.
    ``far_field`` holds lim |y|^{n-2} f(y) when it is known in closed form.
    """

    n: int
    value: Evaluator
    gradient: Optional[Evaluator] = None
    laplacian: Optional[Evaluator] = None
    hessian: Optional[Evaluator] = None
    far_field: Optional[float] = None
    kelvin_invariant: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, y) -> np.ndarray:
        return self.value(as_points(y, self.n))

    @property
    def fd_gradient(self) -> bool:
        return self.gradient is None

    @property
    def fd_laplacian(self) -> bool:
        return self.laplacian is None

    def grad(self, y) -> np.ndarray:
        y = as_points(y, self.n)
        if self.gradient is not None:
            return self.gradient(y)
        return central_gradient(self.value, y)

    def lap(self, y) -> np.ndarray:
        y = as_points(y, self.n)
        if self.laplacian is not None:
            return self.laplacian(y)
        if self.hessian is not None:
            return np.trace(self.hessian(y), axis1=1, axis2=2)
        return stencil_laplacian(self.value, y)

    def hess(self, y) -> np.ndarray:
        y = as_points(y, self.n)
        if self.hessian is not None:
            return self.hessian(y)
        N, n = y.shape
        h = fd_step(y)
        H = np.empty((N, n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            H[:, :, i] = (self.grad(y + h[:, None] * e) - self.grad(y - h[:, None] * e)) / (2 * h[:, None])
        return 0.5 * (H + np.transpose(H, (0, 2, 1)))


def linear_combination(fields: list[ScalarField], coeffs: list[float], label: str = "") -> ScalarField:
    """sum_i c_i f_i, keeping analytic derivatives where every term has them."""
    n = fields[0].n
    coeffs = [float(c) for c in coeffs]

    def value(y):
        return sum(c * f.value(y) for f, c in zip(fields, coeffs))

    def gradient(y):
        return sum(c * f.grad(y) for f, c in zip(fields, coeffs))

    lap = None
    if all(f.laplacian is not None for f in fields):
        def lap(y):
            return sum(c * f.laplacian(y) for f, c in zip(fields, coeffs))

    grad = gradient if all(f.gradient is not None for f in fields) else None
    far = None
    if all(f.far_field is not None for f in fields):
        far = sum(c * f.far_field for f, c in zip(fields, coeffs))
    return ScalarField(n=n, value=value, gradient=grad, laplacian=lap, far_field=far, label=label)


def sphere_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit vectors: the 2n coordinate directions, then seeded random ones.

    Points are added in antipodal pairs, so averages over the set kill odd terms.
    """
    dirs = [np.eye(n), -np.eye(n)]
    extra = max(0, count - 2 * n)
    if extra:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(((extra + 1) // 2, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        dirs += [v, -v]
    out = np.vstack(dirs)
    return out[:count] if count >= 2 * n else out[: 2 * n]


def random_points(n: int, count: int, r_min: float, r_max: float, seed: int = 0) -> np.ndarray:
    """Seeded probe points with log-uniform radii in [r_min, r_max]."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = np.exp(rng.uniform(np.log(r_min), np.log(r_max), count))
    return v * r[:, None]
