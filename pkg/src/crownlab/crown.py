"""The standard bubble, the k-crown profile, and diagnostics on such profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateProfileError,
    EstimationError,
    OutOfRegimeError,
    ParameterError,
    SingularityError,
)
from .fields import ScalarField, as_points, sphere_directions
from .geometry import bubble_height, check_dimension, conformal_weight, critical_exponent

K_MIN_DEFAULT = 5


class BubbleSum:
    """Signed sum of rescaled bubbles  sum_j c_j mu_j^{-m} U((y - x_j)/mu_j).

    Each term equals alpha c_j mu_j^m (mu_j^2 + |y - x_j|^2)^{-m}, so value,
    gradient, Hessian, Laplacian and the gradient of the Laplacian are all
    available in closed form.
    """

    def __init__(self, n: int, centers, scales, signs, chunk: int = 4096):
        self.n = check_dimension(n)
        self.m = conformal_weight(n)
        self.p = critical_exponent(n)
        self.alpha = bubble_height(n)
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.scales = np.asarray(scales, dtype=float).ravel()
        self.signs = np.asarray(signs, dtype=float).ravel()
        self.coef = self.alpha * self.signs * self.scales**self.m
        self.chunk = chunk

    def _parts(self, y):
        d = y[:, None, :] - self.centers[None, :, :]
        s = self.scales[None, :] ** 2 + np.einsum("nkj,nkj->nk", d, d)
        return d, s

    def value(self, y):
        _, s = self._parts(y)
        return (self.coef * s ** (-self.m)).sum(axis=1)

    def gradient(self, y):
        d, s = self._parts(y)
        w = -2 * self.m * self.coef * s ** (-self.m - 1)
        return np.einsum("nk,nkj->nj", w, d)

    def hessian(self, y):
        out = np.empty((len(y), self.n, self.n))
        m = self.m
        for lo in range(0, len(y), self.chunk):
            d, s = self._parts(y[lo:lo + self.chunk])
            w1 = -2 * m * self.coef * s ** (-m - 1)
            w2 = 4 * m * (m + 1) * self.coef * s ** (-m - 2)
            H = np.einsum("nk,nki,nkj->nij", w2, d, d)
            H += w1.sum(axis=1)[:, None, None] * np.eye(self.n)
            out[lo:lo + self.chunk] = H
        return out

    def laplacian(self, y):
        d, s = self._parts(y)
        r2 = s - self.scales[None, :] ** 2
        m = self.m
        t = -2 * m * self.coef * (self.n * s ** (-m - 1) - 2 * (m + 1) * r2 * s ** (-m - 2))
        return t.sum(axis=1)

    def laplacian_gradient(self, y):
        # each term solves Delta u_j = -c_j^{1-p} u_j^p, i.e. Delta u_j = -alpha^p c_j mu_j^{m+2} s^{-m-2}
        d, s = self._parts(y)
        m = self.m
        c = -self.alpha**self.p * self.signs * self.scales ** (m + 2)
        w = c * (-2) * (m + 2) * s ** (-m - 3)
        return np.einsum("nk,nkj->nj", w, d)

    def local_scale(self, y):
        """min_j sqrt(mu_j^2 + |y - x_j|^2): the length on which the sum varies near y."""
        _, s = self._parts(y)
        return np.sqrt(s.min(axis=1))

    @property
    def far_field(self) -> float:
        return float(self.coef.sum())

    def field(self, label: str, kelvin_invariant: bool, meta: dict) -> ScalarField:
        meta = dict(meta)
        meta["laplacian_gradient"] = self.laplacian_gradient
        meta["bubble_sum"] = self
        return ScalarField(
            n=self.n,
            value=self.value,
            gradient=self.gradient,
            laplacian=self.laplacian,
            hessian=self.hessian,
            far_field=self.far_field,
            kelvin_invariant=kelvin_invariant,
            label=label,
            meta=meta,
        )


def bubble(n: int) -> ScalarField:
    """U(y) = alpha_n (1 + |y|^2)^{-(n-2)/2}."""
    n = check_dimension(n)
    core = BubbleSum(n, np.zeros((1, n)), [1.0], [1.0])
    return core.field("bubble", True, {"radial": True})


def shifted_bubble(n: int, center, scale: float = 1.0) -> ScalarField:
    center = np.asarray(center, dtype=float)
    core = BubbleSum(n, center[None, :], [scale], [1.0])
    kelvin = bool(abs(scale**2 + center @ center - 1.0) < 1e-14)
    return core.field("shifted bubble", kelvin, {"radial": not np.any(center)})


def ring_angles(k: int) -> np.ndarray:
    return 2 * np.pi * np.arange(k) / k


def balance_sum(n: int, k: int) -> float:
    """sum_{j=2..k} (1 - cos theta_j)^{-(n-2)/2}."""
    th = ring_angles(k)[1:]
    return float(np.sum((1.0 - np.cos(th)) ** (-(n - 2) / 2)))


def balance_residual(n: int, k: int, mu: float) -> float:
    return balance_sum(n, k) * mu ** ((n - 2) / 2) - 1.0


def solve_mu(n: int, k: int) -> float:
    """Scale mu_k of the outer bubbles from  S_k mu^{(n-2)/2} = 1.

    The root is explicit; one Newton step polishes the last bits.  Values
    mu >= 1 raise OutOfRegimeError carrying the root.
    """
    n = check_dimension(n)
    if int(k) != k or k < 2:
        raise ParameterError(f"k must be an integer >= 2, got {k}")
    S = balance_sum(n, int(k))
    m = (n - 2) / 2
    mu = S ** (-1.0 / m)
    f = S * mu**m - 1.0
    mu -= f / (S * m * mu ** (m - 1))
    if mu >= 1.0:
        raise OutOfRegimeError(f"mu = {mu:.6g} >= 1 for n={n}, k={k}: outer bubbles do not fit", mu)
    return float(mu)


@dataclass(frozen=True)
class CrownSpec:
    n: int
    k: int
    mu: float
    k_min: int = K_MIN_DEFAULT

    def __post_init__(self):
        check_dimension(self.n)
        if self.k < self.k_min:
            raise ParameterError(f"k = {self.k} below k_min = {self.k_min}")
        if not 0.0 < self.mu < 1.0:
            raise ParameterError(f"mu must lie in (0, 1), got {self.mu}")

    @classmethod
    def build(cls, n: int, k: int, k_min: int = K_MIN_DEFAULT) -> "CrownSpec":
        if k < k_min:
            raise ParameterError(f"k = {k} below k_min = {k_min}")
        return cls(n=n, k=k, mu=solve_mu(n, k), k_min=k_min)

    @property
    def centers(self) -> np.ndarray:
        th = ring_angles(self.k)
        c = np.zeros((self.k, self.n))
        rad = math.sqrt(1.0 - self.mu**2)
        c[:, 0] = rad * np.cos(th)
        c[:, 1] = rad * np.sin(th)
        return c

    @property
    def ring_radius(self) -> float:
        return math.sqrt(1.0 - self.mu**2)


def crown(spec: CrownSpec) -> ScalarField:
    """U minus k bubbles of scale mu centred on a regular k-gon of radius sqrt(1 - mu^2)."""
    n, k = spec.n, spec.k
    centers = np.vstack([np.zeros((1, n)), spec.centers])
    scales = np.concatenate([[1.0], np.full(k, spec.mu)])
    signs = np.concatenate([[1.0], -np.ones(k)])
    core = BubbleSum(n, centers, scales, signs)
    # |xi_j|^2 + mu^2 = 1 makes every term, hence the sum, Kelvin invariant
    return core.field(f"crown(n={n},k={k})", True, {"spec": spec, "radial": False})


def kelvin_image(Q: ScalarField, y) -> np.ndarray:
    y = as_points(y, Q.n)
    r2 = np.sum(y * y, axis=1)
    if np.any(r2 == 0):
        raise SingularityError("Kelvin image requested at the origin")
    return r2 ** ((2 - Q.n) / 2) * Q.value(y / r2[:, None])


def kelvin_defect(Q: ScalarField, sample) -> float:
    """max |Q(y) - |y|^{2-n} Q(y/|y|^2)| / (1 + |Q(y)|) over the sample."""
    y = as_points(sample, Q.n)
    v = Q.value(y)
    return float(np.max(np.abs(v - kelvin_image(Q, y)) / (1.0 + np.abs(v))))


def far_field_constant(Q: ScalarField, radii=(1e2, 1e3, 1e4), n_dirs: int = 32, tol: float = 1e-3) -> float:
    """lim |y|^{n-2} Q(y), averaged over antipodal directions and Richardson-extrapolated.

    The direction average removes the O(1/R) term, leaving an O(R^-2) error;
    each consecutive radius pair gives one extrapolated value and their
    relative spread must stay below ``tol``.
    """
    n = Q.n
    dirs = sphere_directions(n, max(n_dirs, 2 * n))
    radii = np.asarray(radii, dtype=float)
    means = np.array([np.mean(R ** (n - 2) * Q.value(R * dirs)) for R in radii])
    ests = []
    for i in range(len(radii) - 1):
        q = (radii[i + 1] / radii[i]) ** 2
        ests.append((q * means[i + 1] - means[i]) / (q - 1))
    ests = np.array(ests)
    best = float(ests[-1])
    scale = max(abs(best), 1e-300)
    spread = float(np.max(np.abs(ests - best))) / scale if len(ests) > 1 else 0.0
    if not np.all(np.isfinite(ests)) or spread > tol:
        raise EstimationError(f"far-field extrapolation did not settle (relative spread {spread:.3g})")
    return best


def _bisect_sign(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 4e-16 * max(1.0, hi):
            break
    return lo, hi


def sign_radii(Q: ScalarField, direction=None, n_scan: int = 4000, n_dirs: int = 64) -> tuple[float, float]:
    """(R1, R2): Q > 0 on |y| <= R1 and on |y| >= R2, found along the worst ray.

    For a crown the worst ray passes through the first outer centre (e1).
    Positivity on the balls is confirmed on ``n_dirs`` sample directions.
    """
    n = Q.n
    e = np.zeros(n)
    e[0] = 1.0
    if direction is not None:
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)

    def along(r):
        return float(Q.value((r * e)[None, :])[0])

    if along(0.0) <= 0:
        raise DegenerateProfileError("profile is not positive at the origin")
    r = np.linspace(0.0, 1.0, n_scan + 1)[1:]
    v = Q.value(r[:, None] * e[None, :])
    neg = np.nonzero(v <= 0)[0]
    if neg.size == 0:
        raise DegenerateProfileError("no sign change detected on the unit ball along the scan ray")
    i = neg[0]
    lo = r[i - 1] if i > 0 else 0.0
    R1, _ = _bisect_sign(along, lo, r[i])
    # outer radius via Kelvin symmetry of the scan in 1/r
    s = np.linspace(0.0, 1.0, n_scan + 1)[1:]
    vo = Q.value((1.0 / s)[:, None] * e[None, :])
    nego = np.nonzero(vo <= 0)[0]
    if nego.size == 0:
        raise DegenerateProfileError("no sign change detected outside the unit ball")
    j = nego[0]
    slo = s[j - 1] if j > 0 else 1e-300

    def along_inv(t):
        return along(1.0 / t)

    S2, _ = _bisect_sign(along_inv, slo, s[j])
    R2 = 1.0 / S2
    dirs = sphere_directions(n, n_dirs, seed=1)
    shrink = 1.0 - 1e-9
    ball = (np.linspace(0.0, R1 * shrink, 64)[:, None, None] * dirs[None]).reshape(-1, n)
    outer = (R2 / (shrink * np.linspace(1e-3, 1.0, 64)))[:, None, None] * dirs[None]
    if np.any(Q.value(ball) <= 0) or np.any(Q.value(outer.reshape(-1, n)) <= 0):
        raise DegenerateProfileError("scan ray is not the worst direction for this profile")
    return float(R1), float(R2)


def residual_field(Q: ScalarField) -> ScalarField:
    """S = Delta Q + |Q|^{p-1} Q with its gradient (needs the analytic grad of Delta Q)."""
    n = Q.n
    p = critical_exponent(n)
    lapgrad = Q.meta.get("laplacian_gradient")

    def value(y):
        v = Q.value(y)
        return Q.lap(y) + np.abs(v) ** (p - 1) * v

    gradient = None
    if lapgrad is not None:
        def gradient(y):
            v = Q.value(y)
            return lapgrad(y) + (p * np.abs(v) ** (p - 1))[:, None] * Q.grad(y)

    return ScalarField(n=n, value=value, gradient=gradient, label=f"residual[{Q.label}]")


def residual_sup(Q: ScalarField, probes) -> float:
    """sup over probes of (1 + |y|)^{n+2} |Delta Q + |Q|^{p-1} Q|."""
    y = as_points(probes, Q.n)
    S = residual_field(Q).value(y)
    return float(np.max((1 + np.linalg.norm(y, axis=1)) ** (Q.n + 2) * np.abs(S)))


def phi_budget(n: int, k: int, q: float | None = None) -> float:
    """Size of the dropped correction: k^{1-n/q} (n >= 4) or 1/log k (n = 3)."""
    n = check_dimension(n)
    if n == 3:
        return 1.0 / math.log(k)
    q = 0.75 * n if q is None else q
    return float(k ** (1.0 - n / q))


def crown_probes(spec: CrownSpec, count: int = 50, seed: int = 0) -> np.ndarray:
    """Probe points mixing the bulk, the ring of outer bubbles, and the far field."""
    rng = np.random.default_rng(seed)
    n = spec.n
    bulk = rng.standard_normal((count // 2, n))
    bulk *= np.exp(rng.uniform(np.log(0.05), np.log(20.0), len(bulk)))[:, None] / np.linalg.norm(bulk, axis=1)[:, None]
    near = spec.centers[rng.integers(0, spec.k, count - len(bulk))]
    jitter = rng.standard_normal(near.shape)
    jitter *= spec.mu * rng.uniform(0.2, 3.0, len(near))[:, None] / np.linalg.norm(jitter, axis=1)[:, None]
    return np.vstack([bulk, near + jitter])
