"""Twenty integrals with known values, each paired with the integrator call that estimates it."""
import math

import numpy as np

from crownlab.crown import bubble
from crownlab.energy import sobolev_energy
from crownlab.geometry import critical_exponent
from crownlab.quadrature import QuadratureSpec, adaptive_box, integrate_annulus, integrate_rn

REL = 1e-7


def _box(f, lo, hi):
    return lambda: adaptive_box(f, lo, hi, rel_tol=REL, abs_tol=1e-15)


def _bubble_power(n):
    U = bubble(n)
    p = critical_exponent(n)
    return lambda: integrate_rn(lambda y: U.value(y) ** (p + 1), QuadratureSpec(rel_tol=REL, symmetry="radial"), n=n)


CASES = [
    ("x^5 on [0,1]", _box(lambda x: x[:, 0] ** 5, [0], [1]), 1 / 6),
    ("sin on [0,pi]", _box(lambda x: np.sin(x[:, 0]), [0], [math.pi]), 2.0),
    ("exp on [0,1]", _box(lambda x: np.exp(x[:, 0]), [0], [1]), math.e - 1),
    ("1/(1+x^2) on [0,1]", _box(lambda x: 1 / (1 + x[:, 0] ** 2), [0], [1]), math.pi / 4),
    ("sqrt on [0,1]", _box(lambda x: np.sqrt(x[:, 0]), [0], [1]), 2 / 3),
    ("log on [0,1]", _box(lambda x: np.log(x[:, 0]), [0], [1]), -1.0),
    ("exp(x+y) on unit square", _box(lambda x: np.exp(x[:, 0] + x[:, 1]), [0, 0], [1, 1]), (math.e - 1) ** 2),
    ("x^2 y^3 on unit square", _box(lambda x: x[:, 0] ** 2 * x[:, 1] ** 3, [0, 0], [1, 1]), 1 / 12),
    ("1/(1+x+y) on unit square", _box(lambda x: 1 / (1 + x[:, 0] + x[:, 1]), [0, 0], [1, 1]),
     3 * math.log(3) - 4 * math.log(2)),
    ("gaussian on [-3,3]^2", _box(lambda x: np.exp(-np.sum(x * x, axis=1)), [-3, -3], [3, 3]),
     math.pi * math.erf(3) ** 2),
    ("cos x cos y on [0,pi/2]^2", _box(lambda x: np.cos(x[:, 0]) * np.cos(x[:, 1]), [0, 0],
                                       [math.pi / 2, math.pi / 2]), 1.0),
    ("xyz on unit cube", _box(lambda x: np.prod(x, axis=1), [0, 0, 0], [1, 1, 1]), 1 / 8),
    ("exp(-x-y-z) on unit cube", _box(lambda x: np.exp(-np.sum(x, axis=1)), [0, 0, 0], [1, 1, 1]),
     (1 - math.exp(-1)) ** 3),
    ("sin sin sin on [0,pi]^3", _box(lambda x: np.prod(np.sin(x), axis=1), [0, 0, 0], [math.pi] * 3), 8.0),
    ("corner peak on unit cube", _box(lambda x: (1 + np.sum(x, axis=1)) ** -4, [0, 0, 0], [1, 1, 1]), 1 / 24),
    ("U^(p+1) over R^3", _bubble_power(3), 3 * sobolev_energy(3)),
    ("U^(p+1) over R^4", _bubble_power(4), 4 * sobolev_energy(4)),
    ("U^(p+1) over R^5", _bubble_power(5), 5 * sobolev_energy(5)),
    ("(1+|y|^2)^-4 over R^4, full sphere chart",
     lambda: integrate_rn(lambda y: (1 + np.sum(y * y, axis=1)) ** -4.0, QuadratureSpec(rel_tol=REL), n=4),
     math.pi**2 / 6),
    ("annulus volume 0.1<|x|<1 in R^3",
     lambda: integrate_annulus(lambda y: np.ones(len(y)), 0.1, QuadratureSpec(rel_tol=REL), n=3),
     4 * math.pi / 3 * (1 - 1e-3)),
]
