"""Dimension constants, plane rotations, and the Green's function of the unit ball."""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatchError, DomainError, ParameterError, SingularityError


def check_dimension(n: int) -> int:
    if int(n) != n or n < 3:
        raise ParameterError(f"dimension must be an integer >= 3, got {n}")
    return int(n)


def critical_exponent(n: int) -> float:
    n = check_dimension(n)
    return (n + 2) / (n - 2)


def conformal_weight(n: int) -> float:
    """The homogeneity (n-2)/2 carried by solutions under dilations."""
    return (check_dimension(n) - 2) / 2


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def bubble_height(n: int) -> float:
    n = check_dimension(n)
    return float(n * (n - 2)) ** ((n - 2) / 4)


def green_constant(n: int) -> float:
    """Normalisation of |x|^{2-n} making it the fundamental solution of -Laplace."""
    n = check_dimension(n)
    return 1.0 / ((n - 2) * sphere_area(n))


def rotation_pairs(n: int) -> list[tuple[int, int]]:
    """Coordinate planes (0-based) in the order (1,2),(1,3),...,(1,n),(2,3),...,(2,n)."""
    n = check_dimension(n)
    return [(0, j) for j in range(1, n)] + [(1, j) for j in range(2, n)]


def plane_rotation(n: int, i: int, j: int, angle: float) -> np.ndarray:
    P = np.eye(n)
    c, s = math.cos(angle), math.sin(angle)
    P[i, i] = c
    P[j, j] = c
    P[i, j] = -s
    P[j, i] = s
    return P


def rotation_matrix(theta, n: int) -> np.ndarray:
    """Ordered product of plane rotations P_12 P_13 ... P_1n P_23 ... P_2n."""
    theta = np.asarray(theta, dtype=float).ravel()
    pairs = rotation_pairs(n)
    if theta.size != len(pairs):
        raise DimensionMismatchError(f"expected {len(pairs)} angles for n={n}, got {theta.size}")
    R = np.eye(n)
    for (i, j), t in zip(pairs, theta):
        if t != 0.0:
            R = R @ plane_rotation(n, i, j, t)
    return R


def reduce_angles(theta) -> np.ndarray:
    """Map angles into (-pi, pi] for comparisons."""
    t = np.mod(np.asarray(theta, dtype=float) + math.pi, 2 * math.pi) - math.pi
    return np.where(t == -math.pi, math.pi, t)


def fundamental_solution(x) -> np.ndarray:
    """gamma_n |x|^{2-n}, evaluated along the last axis of ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularityError("fundamental solution evaluated at the origin")
    return green_constant(n) * r ** (2.0 - n)


def _check_ball(x, name, closed=True):
    r = np.linalg.norm(x, axis=-1)
    bad = r > 1 + 1e-12 if closed else r >= 1
    if np.any(bad):
        raise DomainError(f"{name} lies outside the unit ball")


def _image_quadratic(x, y):
    # |(|y| x - y/|y|)|^2 written so that y = 0 is regular
    return 1.0 - 2.0 * np.sum(x * y, axis=-1) + np.sum(x * x, axis=-1) * np.sum(y * y, axis=-1)


def ball_regular_part(x, y) -> np.ndarray:
    """Regular part H(x,y) = Gamma(x-y) - G(x,y) for the unit ball."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_ball(x, "x")
    _check_ball(y, "y")
    n = x.shape[-1]
    q = _image_quadratic(x, y)
    if np.any(q <= 0):
        raise SingularityError("regular part evaluated with both points on the boundary")
    return green_constant(n) * q ** (-(n - 2) / 2)


def ball_regular_part_gradient(x, y) -> np.ndarray:
    """Gradient of H(., y) with respect to the first argument."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    q = _image_quadratic(x, y)
    dq = -2.0 * y + 2.0 * x * np.sum(y * y, axis=-1)[..., None]
    return green_constant(n) * (-(n - 2) / 2) * q[..., None] ** (-n / 2) * dq


def ball_green(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_ball(x, "x")
    _check_ball(y, "y")
    if np.any(np.linalg.norm(x - y, axis=-1) == 0):
        raise SingularityError("Green's function evaluated on the diagonal")
    return fundamental_solution(x - y) - ball_regular_part(x, y)
