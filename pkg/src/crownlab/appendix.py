"""Weighted decay of kernel fields and the two Riesz-type convolution bounds.

Convolution integrals are axially symmetric about y, so they are computed in
the (r, angle) half-plane with the measure |S^{n-2}| r^{n-1} sin^{n-2}.  The
whole space is split into B_d(0), B_d(y) and the rest, d = |y|/2, each in its
own polar chart; the spherical-mean identity

    mean over |z| = r of |y - z|^{2-n} = max(|y|, r)^{2-n}

gives an independent one-dimensional value for any radial weight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .crown import CrownSpec, crown
from .errors import ParameterError, QuadratureError
from .fields import ScalarField, sphere_directions
from .geometry import check_dimension, sphere_area
from .kelvin import all_kernel_values, kernel_labels
from .quadrature import QuadResult, adaptive_box


# ------------------------------------------------------------------ kernel decay

@dataclass
class KernelDecayReport:
    n: int
    radii: np.ndarray
    sup: np.ndarray            # (3n,) over all probes
    sup_half: np.ndarray       # (3n,) over probes with |y| <= r_max / 2
    argmax_radius: np.ndarray
    labels: list

    @property
    def doubling_change(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.abs(self.sup / self.sup_half - 1)
        return np.where(self.sup == 0, 0.0, rel)

    def stable(self, tol: float = 0.05) -> bool:
        return bool(np.all(self.doubling_change <= tol))


def decay_probes(Q: ScalarField, radii: Sequence[float], n_dirs: int = 64, seed: int = 0) -> np.ndarray:
    """Spherical shells, plus rings around each bubble centre when Q is a crown."""
    n = Q.n
    dirs = sphere_directions(n, n_dirs, seed=seed)
    pts = (np.asarray(radii, dtype=float)[:, None, None] * dirs[None]).reshape(-1, n)
    cs = Q.meta.get("spec")
    if isinstance(cs, CrownSpec):
        local = cs.mu * np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0])
        ring = (cs.centers[:, None, None, :] + local[None, :, None, None] * dirs[None, None]).reshape(-1, n)
        pts = np.vstack([pts, ring])
    return pts


def kernel_decay_report(Q: ScalarField, radii: Sequence[float], n_dirs: int = 64, seed: int = 0) -> KernelDecayReport:
    """sup over probes of (1 + |y|^{n-2}) |z_alpha(y)| for every alpha."""
    n = Q.n
    radii = np.asarray(sorted(radii), dtype=float)
    if radii[-1] > 1e3 * (1 + 1e-12):
        raise ParameterError("radii beyond 1e3")
    pts = decay_probes(Q, radii, n_dirs, seed)
    r = np.linalg.norm(pts, axis=1)
    W = (1.0 + r ** (n - 2))[:, None] * np.abs(all_kernel_values(Q, pts))
    half = r <= radii[-1] / 2
    return KernelDecayReport(
        n=n, radii=radii, sup=W.max(axis=0), sup_half=W[half].max(axis=0),
        argmax_radius=r[W.argmax(axis=0)], labels=kernel_labels(n),
    )


def radial_dilation_sup(n: int, r_max: float = 1e3, count: int = 20001) -> tuple[float, float]:
    """sup_r (1 + r^{n-2}) |z0(r)| for the bubble from a dense 1-D scan; returns (sup, argmax)."""
    from .crown import bubble

    U = bubble(n)
    r = np.concatenate([[0.0], np.exp(np.linspace(math.log(1e-4), math.log(r_max), count))])
    y = np.zeros((len(r), n))
    y[:, 0] = r
    v = (1 + r ** (n - 2)) * np.abs(all_kernel_values(U, y)[:, 0])
    i = int(np.argmax(v))
    return float(v[i]), float(r[i])


def kernel_decay_trend(n: int, ks: Sequence[int], radii: Sequence[float], n_dirs: int = 32) -> dict:
    """Largest weighted sup over alpha for crowns at several k, with a log-log exponent in k."""
    sups = []
    for k in ks:
        rep = kernel_decay_report(crown(CrownSpec.build(n, k)), radii, n_dirs)
        sups.append(float(rep.sup.max()))
    slope = float(np.polyfit(np.log(ks), np.log(sups), 1)[0]) if len(ks) > 1 else float("nan")
    return {"k": list(ks), "sup": sups, "k_exponent": slope}


# ------------------------------------------------------------------ convolution integrals

def _riesz(n: int, dist2: np.ndarray) -> np.ndarray:
    return dist2 ** ((2 - n) / 2)


def _sphere_factor(n: int) -> float:
    """|S^{n-2}|, the measure of the circle of revolution (2 pi when n = 3)."""
    return sphere_area(n - 1) if n > 3 else 2 * math.pi


@dataclass
class SplitIntegral:
    value: float
    error: float
    parts: dict = field(default_factory=dict)


def _half_plane(n, yy, f_r, r_lo, r_hi, theta_lo: Optional[Callable] = None, r_map=None, rel_tol=1e-10):
    """int over r in [r_lo, r_hi], angle in [theta_lo(r), pi] of r^{n-1} sin^{n-2} f(|z|) |y - z|^{2-n}.

    ``r_map(u) -> (r, dr/du)`` reparametrises r on u in [0, 1].
    """
    def g(P):
        u, v = P[:, 0], P[:, 1]
        if r_map is None:
            r = r_lo + (r_hi - r_lo) * u
            jr = np.full_like(u, r_hi - r_lo)
        else:
            r, jr = r_map(u)
        t0 = theta_lo(r) if theta_lo is not None else np.zeros_like(r)
        th = t0 + (math.pi - t0) * v
        dist2 = yy * yy + r * r - 2 * yy * r * np.cos(th)
        out = r ** (n - 1) * np.sin(th) ** (n - 2) * f_r(r) * _riesz(n, np.maximum(dist2, 1e-300))
        return out * jr * (math.pi - t0)

    return adaptive_box(g, [0.0, 0.0], [1.0, 1.0], rel_tol=rel_tol, abs_tol=1e-15)


def _around_y(n, yy, f_r, d, rel_tol=1e-10):
    """Ball B_d(y) in polar coordinates (s, phi) about y; the kernel times s^{n-1} is s."""
    def g(P):
        s = d * P[:, 0]
        ph = math.pi * P[:, 1]
        rz = np.sqrt(yy * yy + s * s + 2 * yy * s * np.cos(ph))
        return s * np.sin(ph) ** (n - 2) * f_r(rz) * d * math.pi

    return adaptive_box(g, [0.0, 0.0], [1.0, 1.0], rel_tol=rel_tol, abs_tol=1e-15)


def split_convolution(n: int, f_r: Callable[[np.ndarray], np.ndarray], y_norm: float,
                      outer: float = math.inf, inner_power: Optional[float] = None,
                      tail_power: Optional[float] = None, rel_tol: float = 1e-10) -> SplitIntegral:
    """int_{|z| < outer} |y - z|^{2-n} f(|z|) dz by the three-region split.

    ``inner_power`` b means f ~ r^{b-n} at 0 (handled by r = d u^{1/b});
    ``tail_power`` a means r^{n-1} f ~ r^{-1-a} at infinity (handled by
    r = 3d u^{-1/a}).  Requires outer > 3 |y| / 2.
    """
    n = check_dimension(n)
    if y_norm <= 0:
        raise ParameterError("y must be nonzero for the split")
    d = y_norm / 2
    if outer <= 3 * d:
        raise ParameterError("outer radius must exceed 3|y|/2")
    yy = y_norm

    def theta_c(r):
        c = (r * r + yy * yy - d * d) / (2 * r * yy)
        return np.arccos(np.clip(c, -1.0, 1.0))

    if inner_power is not None:
        b = inner_power
        r1 = lambda u: (d * u ** (1 / b), d / b * u ** (1 / b - 1))
    else:
        r1 = None
    parts = {
        "near_origin": _half_plane(n, yy, f_r, 0.0, d, None, r1, rel_tol),
        "near_y": _around_y(n, yy, f_r, d, rel_tol),
        "shell": _half_plane(n, yy, f_r, d, 3 * d, theta_c, None, rel_tol),
    }
    if math.isinf(outer):
        if tail_power is None or tail_power <= 0:
            raise ParameterError("an infinite domain needs a positive tail power")
        a = tail_power
        parts["tail"] = _half_plane(n, yy, f_r, 3 * d, math.inf, None,
                                    lambda u: (3 * d * np.maximum(u, 1e-300) ** (-1 / a),
                                               3 * d / a * np.maximum(u, 1e-300) ** (-1 / a - 1)), rel_tol)
    else:
        parts["tail"] = _half_plane(n, yy, f_r, 3 * d, outer, None, None, rel_tol)
    c = _sphere_factor(n)
    val = c * sum(float(p.value) for p in parts.values())
    err = c * sum(float(p.error) for p in parts.values())
    return SplitIntegral(val, err, {k: c * float(p.value) for k, p in parts.items()})


def radial_convolution(n: int, f_r: Callable[[float], float], y_norm: float, outer: float = math.inf,
                       inner_power: Optional[float] = None) -> tuple[float, float]:
    """The same integral from the spherical-mean identity, by scipy's adaptive quad."""
    S = sphere_area(n)
    g = lambda r: r ** (n - 1) * f_r(r) * max(y_norm, r) ** (2 - n)
    pts = []
    if y_norm > 0:
        pts.append(y_norm)
    edges = [0.0] + [p for p in pts if p < outer] + [outer]
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == 0.0 and inner_power is not None:
            # r = lo + u^{1/b} removes the r^{b-1} endpoint singularity
            b = inner_power
            h = lambda u, hi=hi: g(u ** (1 / b)) * u ** (1 / b - 1) / b if u > 0 else 0.0
            v, e = integrate.quad(h, 0.0, hi ** b, epsabs=0, epsrel=1e-12, limit=200)
        else:
            v, e = integrate.quad(g, lo, hi, epsabs=0, epsrel=1e-12, limit=200)
        total += v
        err += e
    return S * total, S * err


@dataclass
class BoundReport:
    kind: str
    n: int
    exponent: float
    y_norms: list
    integrals: list
    errors: list
    oracle: list
    products: list
    constant: float
    final_decade_spread: float
    divergent: bool
    notes: dict = field(default_factory=dict)

    def stable(self, tol: float = 0.2) -> bool:
        return self.final_decade_spread <= tol


def _decade_spread(y: Sequence[float], v: Sequence[float], toward_zero: bool) -> float:
    """max/min - 1 of v over the last decade of the sweep."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if toward_zero:
        sel = y <= 10 * y.min() * (1 + 1e-12)
    else:
        sel = y >= y.max() / 10 * (1 - 1e-12)
    w = v[sel]
    return float(w.max() / w.min() - 1)


def convolution_bound_a(n: int, a_exp: float, y_norms: Sequence[float] = (1, 3, 10, 30, 100),
                        rel_tol: float = 1e-10) -> BoundReport:
    """sup_y (1 + |y|^a) int |y - z|^{2-n} (1 + |z|)^{-2-a} dz over the sweep."""
    n = check_dimension(n)
    if a_exp <= 0:
        raise ParameterError("a must be positive")
    a = a_exp
    f = lambda r: (1.0 + r) ** (-2.0 - a)
    vals, errs, orc, prods = [], [], [], []
    for yn in y_norms:
        r = split_convolution(n, f, yn, tail_power=a, rel_tol=rel_tol)
        o, _ = radial_convolution(n, f, yn)
        vals.append(r.value)
        errs.append(r.error)
        orc.append(o)
        prods.append(r.value * (1 + yn**a))
    return BoundReport(
        kind="a", n=n, exponent=a, y_norms=list(y_norms), integrals=vals, errors=errs, oracle=orc,
        products=prods, constant=max(prods), final_decade_spread=_decade_spread(y_norms, prods, False),
        divergent=a >= n - 2,
        notes={"at_zero": radial_convolution(n, f, 0.0)[0],
               "decreasing_beyond_10": bool(np.all(np.diff([v for y, v in zip(y_norms, vals) if y >= 10]) < 0))},
    )


def sup_constant_b(n: int, b_exp: float) -> float:
    """int_{R^n} |e - w|^{2-n} |w|^{b-n} dw for a unit vector e; infinite unless 0 < b < n - 2."""
    if not 0 < b_exp < n - 2:
        return math.inf
    return sphere_area(n) * (1 / b_exp + 1 / (n - 2 - b_exp))


def sup_constant_b_sampled(n: int, b_exp: float, n_dirs: int = 16, rel_tol: float = 1e-9) -> np.ndarray:
    """The same constant by split quadrature at ``n_dirs`` unit directions.

    The split chart is aligned with e, so every direction reuses the same
    two-dimensional integral; the sampled values document that the sup over
    directions is the common value.
    """
    f = lambda r: np.asarray(r, dtype=float) ** (b_exp - n)
    tail = n - 2 - b_exp
    if tail <= 0:
        return np.full(n_dirs, math.inf)
    dirs = sphere_directions(n, n_dirs)
    out = np.empty(n_dirs)
    for i, e in enumerate(dirs):
        out[i] = split_convolution(n, f, float(np.linalg.norm(e)), inner_power=b_exp, tail_power=tail,
                                   rel_tol=rel_tol).value
    return out


def convolution_bound_b(n: int, b_exp: float, y_norms: Sequence[float] = (0.5, 0.2, 0.1, 0.05, 0.02),
                        rel_tol: float = 1e-10) -> BoundReport:
    """|y|^{n-2-b} int_{B(0,1)} |y - z|^{2-n} |z|^{b-n} dz over a sweep toward 0."""
    n = check_dimension(n)
    if not 0 < b_exp < n:
        raise ParameterError("b must lie in (0, n)")
    if any(y <= 0 or y >= 2 / 3 for y in y_norms):
        raise ParameterError("|y| must lie in (0, 2/3)")
    b = b_exp
    f = lambda r: np.asarray(r, dtype=float) ** (b - n)
    fs = lambda r: r ** (b - n)
    vals, errs, orc, prods = [], [], [], []
    for yn in y_norms:
        r = split_convolution(n, f, yn, outer=1.0, inner_power=b, rel_tol=rel_tol)
        o, _ = radial_convolution(n, fs, yn, outer=1.0, inner_power=b)
        vals.append(r.value)
        errs.append(r.error)
        orc.append(o)
        prods.append(r.value * yn ** (n - 2 - b))
    return BoundReport(
        kind="b", n=n, exponent=b, y_norms=list(y_norms), integrals=vals, errors=errs, oracle=orc,
        products=prods, constant=max(prods), final_decade_spread=_decade_spread(y_norms, prods, True),
        divergent=b >= n - 2, notes={"sup_constant": sup_constant_b(n, b)},
    )


# ------------------------------------------------------------------ auxiliary fields

@dataclass(frozen=True)
class AuxiliaryField:
    """A field that vanishes because the correction it is built from is taken to be zero."""

    alpha: int
    field: ScalarField
    budget: str


def auxiliary_fields(n: int) -> list[AuxiliaryField]:
    """Zero fields pi_alpha, one per kernel direction, each carrying its error budget."""
    n = check_dimension(n)
    zero = lambda y: np.zeros(len(np.atleast_2d(y)))
    zgrad = lambda y: np.zeros((len(np.atleast_2d(y)), n))
    note = ("set to zero with the profile correction; omitted size is bounded by the residual budget "
            "k^{1 - n/q} (1/log k when n = 3)")
    out = []
    for a in range(3 * n):
        f = ScalarField(n=n, value=zero, gradient=zgrad, laplacian=zero, far_field=0.0, label=f"pi{a}")
        out.append(AuxiliaryField(a, f, note))
    return out


__all__ = [
    "KernelDecayReport", "kernel_decay_report", "radial_dilation_sup", "kernel_decay_trend",
    "split_convolution", "radial_convolution", "SplitIntegral", "BoundReport",
    "convolution_bound_a", "convolution_bound_b", "sup_constant_b", "sup_constant_b_sampled",
    "AuxiliaryField", "auxiliary_fields", "QuadResult", "QuadratureError",
]
