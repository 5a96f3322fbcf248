"""Adaptive cubature over R^n and annuli, plus weighted sup-norms on probe grids.

The engine is a batched, deterministic adaptive scheme: every region carries
an embedded pair of rules (Genz-Malik 7/5 in d >= 2, Gauss-Kronrod 7/15 in
d = 1); each round bisects the regions that together hold a quarter of the
total error estimate.  Integrands are vectorised and may be vector-valued.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError, QuadratureError
from .fields import ScalarField, sphere_directions
from .geometry import check_dimension, sphere_area

SYMMETRIES = ("none", "radial", "full_even", "dihedral")
EXTERIORS = ("kelvin", "cutoff")


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and geometry options for one integration.

    ``max_depth`` caps how often a single region may be bisected;
    ``split_radius`` is where the interior ball meets the Kelvin-mapped
    exterior (or the cutoff radius when ``exterior='cutoff'``).
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-14
    max_depth: int = 40
    symmetry: str = "none"
    k: int = 1
    exterior: str = "kelvin"
    split_radius: float = 1.0
    max_regions: int = 400_000
    split_fraction: float = 0.25

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("tolerances must be positive")
        if not 1 <= self.max_depth <= 40:
            raise ParameterError("max_depth must lie in [1, 40]")
        if self.symmetry not in SYMMETRIES:
            raise ParameterError(f"unknown symmetry {self.symmetry!r}")
        if self.exterior not in EXTERIORS:
            raise ParameterError(f"unknown exterior treatment {self.exterior!r}")
        if self.symmetry == "dihedral" and self.k < 1:
            raise ParameterError("dihedral symmetry needs k >= 1")
        if self.split_radius <= 0:
            raise ParameterError("split_radius must be positive")


@dataclass
class QuadResult:
    value: np.ndarray | float
    error: float
    regions: int = 0
    evaluations: int = 0

    def __iter__(self):
        yield self.value
        yield self.error


# ----------------------------------------------------------------------------- rules

@dataclass(frozen=True)
class _Rule:
    nodes: np.ndarray        # (P, d) on [-1, 1]^d
    high: np.ndarray         # (P,) weights of the higher-order rule (sum 1)
    low: np.ndarray          # (P,) weights of the embedded rule (sum 1)


def genz_malik(d: int) -> _Rule:
    l2 = math.sqrt(9 / 70)
    l3 = math.sqrt(9 / 10)
    l4 = math.sqrt(9 / 10)
    l5 = math.sqrt(9 / 19)
    pts = [np.zeros(d)]
    w7 = [(12824 - 9120 * d + 400 * d * d) / 19683]
    w5 = [(729 - 950 * d + 50 * d * d) / 729]
    for lam, a7, a5 in ((l2, 980 / 6561, 245 / 486), (l3, (1820 - 400 * d) / 19683, (265 - 100 * d) / 1458)):
        for i in range(d):
            for s in (1, -1):
                x = np.zeros(d)
                x[i] = s * lam
                pts.append(x)
                w7.append(a7)
                w5.append(a5)
    for i, j in combinations(range(d), 2):
        for si in (1, -1):
            for sj in (1, -1):
                x = np.zeros(d)
                x[i] = si * l4
                x[j] = sj * l4
                pts.append(x)
                w7.append(200 / 19683)
                w5.append(25 / 729)
    for bits in range(2**d):
        pts.append(np.array([l5 if (bits >> i) & 1 else -l5 for i in range(d)]))
        w7.append(6859 / 19683 / 2**d)
        w5.append(0.0)
    return _Rule(np.array(pts), np.array(w7), np.array(w5))


def gauss_kronrod15() -> _Rule:
    xk = np.array([0.991455371120812639, 0.949107912342758525, 0.864864423359769073,
                   0.741531185599394440, 0.586087235467691130, 0.405845151377397167,
                   0.207784955007898468, 0.0])
    wk = np.array([0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
                   0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
                   0.204432940075298892, 0.209482141084727828])
    wg = np.array([0.129484966168869693, 0.279705391489276668, 0.381830050505118945, 0.417959183673469388])
    nodes = np.concatenate([-xk[:-1], xk[::-1]])
    high = np.concatenate([wk[:-1], wk[::-1]]) / 2
    low = np.zeros(15)
    # Gauss nodes are the odd-indexed Kronrod nodes xk[1], xk[3], xk[5], xk[7]=0
    gpos = {1: wg[0], 3: wg[1], 5: wg[2]}
    for i, w in gpos.items():
        low[i] = w / 2
        low[14 - i] = w / 2
    low[7] = wg[3] / 2
    return _Rule(nodes[:, None], high, low)


_RULE_CACHE: dict[int, _Rule] = {}


def _rule(d: int) -> _Rule:
    if d not in _RULE_CACHE:
        _RULE_CACHE[d] = gauss_kronrod15() if d == 1 else genz_malik(d)
    return _RULE_CACHE[d]


def adaptive_box(f: Callable[[np.ndarray], np.ndarray], lo, hi, rel_tol=1e-8, abs_tol=1e-14,
                 max_depth=40, max_regions=400_000, split_fraction=0.25, raise_on_failure=True) -> QuadResult:
    """Integrate a vectorised f over the box [lo, hi].

    f maps (N, d) points to (N,) or (N, m) values.  The reported error is the
    sum over regions of |high - low|, taking the max across components.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    rule = _rule(d)
    P = rule.nodes
    npt = len(P)
    if d >= 2:
        l2, l3 = math.sqrt(9 / 70), math.sqrt(9 / 10)
        ratio = (l2 / l3) ** 2

    def evaluate(c, h):
        x = (c[:, None, :] + h[:, None, :] * P[None]).reshape(-1, d)
        v = np.asarray(f(x), dtype=float)
        scalar = v.ndim == 1
        v = v.reshape(len(c), npt, -1)
        vol = np.prod(2 * h, axis=1)[:, None]
        i_hi = vol * np.einsum("rpm,p->rm", v, rule.high)
        i_lo = vol * np.einsum("rpm,p->rm", v, rule.low)
        err = np.max(np.abs(i_hi - i_lo), axis=1)
        if d == 1:
            axis = np.zeros(len(c), dtype=int)
        else:
            f0 = v[:, 0, :]
            dd = np.empty((len(c), d))
            for i in range(d):
                a = v[:, 1 + 2 * i, :] + v[:, 2 + 2 * i, :] - 2 * f0
                b = v[:, 1 + 2 * d + 2 * i, :] + v[:, 2 + 2 * d + 2 * i, :] - 2 * f0
                dd[:, i] = np.max(np.abs(a - ratio * b), axis=1)
            axis = np.argmax(dd, axis=1)
        return i_hi, err, axis, scalar

    C = ((lo + hi) / 2)[None]
    H = ((hi - lo) / 2)[None]
    I, E, A, scalar = evaluate(C, H)
    D = np.zeros(1, dtype=int)
    nev = npt
    converged = False
    while True:
        total = I.sum(axis=0)
        terr = float(E.sum())
        tol = max(abs_tol, rel_tol * float(np.max(np.abs(total))))
        if terr <= tol:
            converged = True
            break
        splittable = D < max_depth
        if len(C) >= max_regions or not np.any(splittable):
            break
        Es = np.where(splittable, E, -1.0)
        order = np.argsort(-Es, kind="stable")
        order = order[Es[order] >= 0]
        cum = np.cumsum(E[order])
        nsel = max(1, int(np.searchsorted(cum, split_fraction * terr) + 1))
        nsel = min(nsel, len(order), max(1, (max_regions - len(C)) // 1))
        sel = order[:nsel]
        keep = np.ones(len(C), dtype=bool)
        keep[sel] = False
        c = C[sel]
        h = H[sel].copy()
        ax = A[sel]
        idx = np.arange(nsel)
        h[idx, ax] /= 2
        c1 = c.copy()
        c1[idx, ax] -= h[idx, ax]
        c2 = c.copy()
        c2[idx, ax] += h[idx, ax]
        nc = np.vstack([c1, c2])
        nh = np.vstack([h, h])
        i, e, a, _ = evaluate(nc, nh)
        nev += len(nc) * npt
        nd = np.concatenate([D[sel] + 1, D[sel] + 1])
        C = np.vstack([C[keep], nc])
        H = np.vstack([H[keep], nh])
        I = np.vstack([I[keep], i])
        E = np.concatenate([E[keep], e])
        A = np.concatenate([A[keep], a])
        D = np.concatenate([D[keep], nd])
    total = I.sum(axis=0)
    value = float(total[0]) if scalar else total
    res = QuadResult(value, float(E.sum()), len(C), nev)
    if not converged and raise_on_failure:
        raise QuadratureError(
            f"tolerance not reached ({res.error:.3g} with {len(C)} regions)", res.value, res.error
        )
    return res


# ------------------------------------------------------------------ angular charts

def hyperspherical(angles: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors and surface Jacobian from n-1 hyperspherical angles."""
    N = len(angles)
    w = np.ones((N, n))
    jac = np.ones(N)
    s = np.ones(N)
    for i in range(n - 1):
        phi = angles[:, i]
        w[:, i] = s * np.cos(phi)
        if i < n - 2:
            jac = jac * np.sin(phi) ** (n - 2 - i)
        s = s * np.sin(phi)
    w[:, n - 1] = s
    return w, jac


def transverse_design(n: int) -> tuple[np.ndarray, float]:
    """Cross-polytope points on S^{n-3} with equal weights (exact to degree 3)."""
    q = n - 2
    if q == 1:
        return np.array([[1.0], [-1.0]]), 1.0
    pts = np.vstack([np.eye(q), -np.eye(q)])
    return pts, sphere_area(q) / (2 * q)


@dataclass(frozen=True)
class _Chart:
    """An angular parametrisation: box bounds plus a map to (directions, weights).

    ``directions`` returns an array (N, J, n) of J unit vectors per parameter
    point and weights (N, J) that already include every multiplicity factor.
    """

    lo: tuple
    hi: tuple
    directions: Callable


def _chart(n: int, symmetry: str, k: int = 1, sector: Optional[tuple[float, float]] = None) -> _Chart:
    if symmetry == "radial":
        area = sphere_area(n)

        def dirs(_):
            e = np.zeros((1, 1, n))
            e[0, 0, 0] = 1.0
            return e, np.full((1, 1), area)

        return _Chart((), (), dirs)
    if symmetry in ("none", "full_even"):
        even = symmetry == "full_even"
        lo = tuple([0.0] * (n - 1))
        hi = tuple([math.pi / 2] * (n - 1)) if even else tuple([math.pi] * (n - 2) + [2 * math.pi])
        factor = 2.0**n if even else 1.0

        def dirs(ang):
            w, jac = hyperspherical(ang, n)
            return w[:, None, :], factor * jac[:, None]

        return _Chart(lo, hi, dirs)
    # ring charts: (psi, phi) with y = (s cos phi, s sin phi, rho * w), s = sin psi, rho = cos psi
    design, dw = transverse_design(n)
    if sector is None:
        sector = (0.0, math.pi / k)
        factor = 2.0 * k
    else:
        factor = 1.0

    def dirs(ang):
        psi, phi = ang[:, 0], ang[:, 1]
        s, rho = np.sin(psi), np.cos(psi)
        N, J = len(ang), len(design)
        w = np.zeros((N, J, n))
        w[:, :, 0] = (s * np.cos(phi))[:, None]
        w[:, :, 1] = (s * np.sin(phi))[:, None]
        w[:, :, 2:] = rho[:, None, None] * design[None]
        jac = s * rho ** (n - 3)
        return w, np.broadcast_to((factor * dw * jac)[:, None], (N, J))

    return _Chart((0.0, sector[0]), (math.pi / 2, sector[1]), dirs)


def _radial_pieces(kind: str, R: float, eps: float = 0.0, outer: float = 1.0):
    """List of maps t in [0,1] -> (r, dr/dt)."""
    if kind == "kelvin":
        return [lambda t: (R * t, np.full_like(t, R)),
                lambda t: (R / t, R / t**2)]
    if kind == "cutoff":
        return [lambda t: (R * t, np.full_like(t, R))]
    if kind == "annulus":
        L = math.log(outer / eps)
        return [lambda t: (eps * np.exp(L * t), L * eps * np.exp(L * t))]
    raise ParameterError(kind)


def _polar_integrand(f, n, chart: _Chart, pieces):
    def g(x):
        t = x[:, 0]
        omega, weight = chart.directions(x[:, 1:])
        N, J = len(x), weight.shape[1]
        omega = np.broadcast_to(omega, (N, J, n))
        weight = np.broadcast_to(weight, (N, J))
        acc = None
        for piece in pieces:
            r, dr = piece(t)
            y = (r[:, None, None] * omega).reshape(-1, n)
            v = np.asarray(f(y), dtype=float)
            v = v.reshape(N, J, -1)
            wt = weight * (r ** (n - 1) * dr)[:, None]
            term = np.einsum("nj,njm->nm", wt, v)
            acc = term if acc is None else acc + term
        return acc

    return g


def _callable(f):
    return f.value if isinstance(f, ScalarField) else f


def _run(g, chart, spec: QuadratureSpec, raise_on_failure=True) -> QuadResult:
    lo = (0.0,) + tuple(chart.lo)
    hi = (1.0,) + tuple(chart.hi)
    res = adaptive_box(g, lo, hi, spec.rel_tol, spec.abs_tol, spec.max_depth, spec.max_regions,
                       spec.split_fraction, raise_on_failure)
    if np.ndim(res.value) == 1 and len(res.value) == 1:
        res.value = float(res.value[0])
    return res


def integrate_rn(f, spec: QuadratureSpec, n: Optional[int] = None, raise_on_failure: bool = True) -> QuadResult:
    """Integral over R^n of a vectorised integrand (or ScalarField).

    The ball |y| < R is integrated in polar form; the exterior is either
    mapped onto the same box by r -> R/t (the Kelvin inversion, whose
    Jacobian t^{-2n} is folded into the radial weight) or dropped beyond R.
    ``symmetry`` chooses the angular chart: ``none`` (full sphere),
    ``full_even`` (one orthant times 2^n), ``radial`` (one ray times the
    sphere area) or ``dihedral`` (sector of angle pi/k in the (y1, y2)-plane
    times 2k, with a degree-3 design in the remaining directions).
    """
    if n is None:
        if not isinstance(f, ScalarField):
            raise ParameterError("dimension n is required for a plain callable")
        n = f.n
    n = check_dimension(n)
    func = _callable(f)
    chart = _chart(n, spec.symmetry, spec.k)
    pieces = _radial_pieces(spec.exterior, spec.split_radius)
    return _run(_polar_integrand(func, n, chart, pieces), chart, spec, raise_on_failure)


def integrate_sector(f, n: int, phi_range: tuple[float, float], spec: QuadratureSpec,
                     raise_on_failure: bool = True) -> QuadResult:
    """Integral over the wedge phi in phi_range of the (y1, y2)-plane, all radii."""
    func = _callable(f)
    chart = _chart(check_dimension(n), "dihedral", sector=phi_range)
    pieces = _radial_pieces(spec.exterior, spec.split_radius)
    return _run(_polar_integrand(func, n, chart, pieces), chart, spec, raise_on_failure)


def integrate_annulus(f, eps: float, spec: QuadratureSpec, n: Optional[int] = None, outer: float = 1.0,
                      raise_on_failure: bool = True) -> QuadResult:
    """Integral over eps < |x| < outer with a logarithmic radial grading."""
    if not 0 < eps < outer:
        raise ParameterError(f"need 0 < eps < outer, got eps={eps}, outer={outer}")
    if n is None:
        if not isinstance(f, ScalarField):
            raise ParameterError("dimension n is required for a plain callable")
        n = f.n
    n = check_dimension(n)
    chart = _chart(n, spec.symmetry, spec.k)
    pieces = _radial_pieces("annulus", 0.0, eps=eps, outer=outer)
    return _run(_polar_integrand(_callable(f), n, chart, pieces), chart, spec, raise_on_failure)


# ------------------------------------------------------------------ weighted norms

def norm_exponents(n: int, sigma: float = 0.1) -> tuple[float, float]:
    """Inner/outer weight exponents (alpha, beta) of the star norm for n >= 4."""
    if n >= 5:
        return float(n - 4), 2.0
    if n == 4:
        return sigma, 2.0 - sigma
    raise ParameterError("n = 3 uses its own star norm")


@dataclass(frozen=True)
class ProbeGrid:
    radii: np.ndarray
    directions: np.ndarray

    def points(self) -> np.ndarray:
        return (self.radii[:, None, None] * self.directions[None]).reshape(-1, self.directions.shape[1])


def probe_grid(n: int, r_min: float, r_max: float, n_radii: int = 200, n_dirs: int = 64,
               extra_directions=None, seed: int = 0) -> ProbeGrid:
    if n_radii < 1 or n_dirs < 1:
        raise ParameterError("empty probe grid")
    radii = np.exp(np.linspace(math.log(r_min), math.log(r_max), n_radii))
    dirs = sphere_directions(n, n_dirs, seed=seed)
    if extra_directions is not None:
        extra = np.asarray(extra_directions, dtype=float)
        extra = extra / np.linalg.norm(extra, axis=1, keepdims=True)
        dirs = np.vstack([dirs, extra])
    return ProbeGrid(radii, dirs)


def weighted_norm(f: ScalarField, which: str, eps: Optional[float] = None, sigma: float = 0.1,
                  n_radii: int = 200, n_dirs: int = 64, grid: Optional[ProbeGrid] = None,
                  extra_directions=None) -> float:
    """Weighted sup-norm of f on a log-radial x angular probe grid.

    ``starstar``: sup_{|y|<1} |y|^{n-2}|f| + sup_{|y|>1} (1+|y|^4)|f| on
    sqrt(eps) < |y| < 1/sqrt(eps).  ``star``: the dimension-dependent norm
    with gradient terms on the same set.  ``fundamental``: sup (1+|y|^{n-2})|f|
    on R^n, probed for 1e-3 <= |y| <= 1e3 plus the origin.
    """
    n = f.n
    if which not in ("star", "starstar", "fundamental"):
        raise ParameterError(f"unknown norm {which!r}")
    if grid is None:
        if which == "fundamental":
            grid = probe_grid(n, 1e-3, 1e3, n_radii, n_dirs, extra_directions)
        else:
            if eps is None or not 0 < eps < 1:
                raise ParameterError("star norms need 0 < eps < 1")
            grid = probe_grid(n, math.sqrt(eps), 1 / math.sqrt(eps), n_radii, n_dirs, extra_directions)
    y = grid.points()
    if which == "fundamental":
        y = np.vstack([np.zeros((1, n)), y])
    if len(y) == 0:
        raise ParameterError("empty probe grid")
    r = np.linalg.norm(y, axis=1)
    v = np.abs(f.value(y))
    if which == "fundamental":
        return float(np.max((1 + r ** (n - 2)) * v))
    inner = r < 1
    outer = ~inner
    if which == "starstar":
        a = np.max(r[inner] ** (n - 2) * v[inner], initial=0.0)
        b = np.max((1 + r[outer] ** 4) * v[outer], initial=0.0)
        return float(a + b)
    g = np.linalg.norm(f.grad(y), axis=1)
    if n == 3:
        return float(np.max((1 + r) * v + (1 + r**2) * g))
    al, be = norm_exponents(n, sigma)
    a = np.max(r[inner] ** al * v[inner] + r[inner] ** (al + 1) * g[inner], initial=0.0)
    b = np.max((1 + r[outer] ** be) * v[outer] + (1 + r[outer] ** (be + 1)) * g[outer], initial=0.0)
    return float(a + b)
