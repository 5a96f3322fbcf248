"""Critical energies on R^n and on the punctured ball, the associated constants, and Gram matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .crown import CrownSpec, bubble, crown
from .errors import ConsistencyError, ParameterError
from .fields import ScalarField
from .geometry import bubble_height, check_dimension, critical_exponent, green_constant, sphere_area
from .kelvin import all_kernel_values
from .quadrature import QuadratureSpec, QuadResult, integrate_annulus, integrate_rn, integrate_sector


def sobolev_energy(n: int) -> float:
    """S_n = (1/n) int U^{p+1} in closed form."""
    n = check_dimension(n)
    return (n * (n - 2)) ** (n / 2) * math.pi ** (n / 2) * math.gamma(n / 2) / (n * math.gamma(n))


def c_tilde_stated(n: int) -> float:
    """The closed form 2^{(n-4)/2} n (n-2)^2 Gamma(n/2)^2 / Gamma(n+2)."""
    n = check_dimension(n)
    return 2 ** ((n - 4) / 2) * n * (n - 2) ** 2 * math.gamma(n / 2) ** 2 / math.gamma(n + 2)


def c_tilde_exact(n: int) -> float:
    """int U^{p-1} z0^2 in closed form: alpha^{p+1} |S^{n-1}| n (n-2)^2 Gamma(n/2)^2 / (8 Gamma(n+2))."""
    n = check_dimension(n)
    p = critical_exponent(n)
    return (bubble_height(n) ** (p + 1) * sphere_area(n) * n * (n - 2) ** 2
            * math.gamma(n / 2) ** 2 / (8 * math.gamma(n + 2)))


def _spec_for(u: ScalarField, spec: QuadratureSpec) -> QuadratureSpec:
    """Pick a symmetry chart from what the field declares about itself."""
    if spec.symmetry != "none":
        return spec
    if u.meta.get("radial"):
        return replace(spec, symmetry="radial")
    cs = u.meta.get("spec")
    if isinstance(cs, CrownSpec):
        return replace(spec, symmetry="dihedral", k=cs.k)
    return spec


def _energy_integrand(u: ScalarField):
    p = critical_exponent(u.n)

    def f(y):
        g = u.grad(y)
        v = u.value(y)
        return 0.5 * np.sum(g * g, axis=1) - np.abs(v) ** (p + 1) / (p + 1)

    return f


def energy_entire(u: ScalarField, spec: QuadratureSpec = QuadratureSpec()) -> QuadResult:
    """E(u) = 1/2 int |grad u|^2 - 1/(p+1) int |u|^{p+1} over R^n."""
    return integrate_rn(_energy_integrand(u), _spec_for(u, spec), n=u.n)


def energy_domain(u: ScalarField, eps: float, spec: QuadratureSpec = QuadratureSpec(), outer: float = 1.0) -> QuadResult:
    """J_eps(u): the same functional on eps < |x| < outer."""
    return integrate_annulus(_energy_integrand(u), eps, spec, n=u.n, outer=outer)


def energy_terms_domain(u: ScalarField, eps: float, spec: QuadratureSpec = QuadratureSpec(), outer: float = 1.0) -> QuadResult:
    """(int |grad u|^2, int |u|^{p+1}) on the annulus, as a 2-vector."""
    p = critical_exponent(u.n)

    def f(y):
        g = u.grad(y)
        return np.stack([np.sum(g * g, axis=1), np.abs(u.value(y)) ** (p + 1)], axis=1)

    return integrate_annulus(f, eps, spec, n=u.n, outer=outer)


@dataclass(frozen=True)
class EnergyConstants:
    n: int
    c1: float
    c2: float
    S_n: float
    c_tilde: float
    alpha_n: float
    gamma_n: float
    c_tilde_closed_form: float
    c_tilde_exact: float
    errors: dict = field(default_factory=dict, compare=False)
    profile: str = "bubble"


def c_tilde_quadrature(n: int, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-11)) -> QuadResult:
    U = bubble(n)
    p = critical_exponent(n)

    def f(y):
        z0 = all_kernel_values(U, y)[:, 0]
        return U.value(y) ** (p - 1) * z0**2

    return integrate_rn(f, replace(spec, symmetry="radial"), n=n)


def constants(n: int, Q: Optional[ScalarField] = None, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-10),
              consistency_tol: float = 1e-4) -> EnergyConstants:
    """c1 = (1/n) int |Q|^{p+1}, c2 = int |Q|^p, S_n, and c~ by quadrature.

    Q defaults to the bubble.  The quadrature value of c~ is compared with
    its exact closed form and a ConsistencyError is raised beyond
    ``consistency_tol``; the other closed form is reported alongside.
    """
    n = check_dimension(n)
    p = critical_exponent(n)
    Q = bubble(n) if Q is None else Q
    if Q.n != n:
        raise ParameterError("profile dimension differs from n")
    s = _spec_for(Q, spec)

    def f(y):
        a = np.abs(Q.value(y))
        return np.stack([a ** (p + 1), a**p], axis=1)

    res = integrate_rn(f, s, n=n)
    ct = c_tilde_quadrature(n)
    exact = c_tilde_exact(n)
    if abs(ct.value / exact - 1) > consistency_tol:
        raise ConsistencyError(f"c~ quadrature {ct.value:.12g} disagrees with closed form {exact:.12g}")
    U = bubble(n)
    sn = integrate_rn(lambda y: U.value(y) ** (p + 1), replace(spec, symmetry="radial"), n=n)
    return EnergyConstants(
        n=n,
        c1=float(res.value[0]) / n,
        c2=float(res.value[1]),
        S_n=float(sn.value) / n,
        c_tilde=float(ct.value),
        alpha_n=bubble_height(n),
        gamma_n=green_constant(n),
        c_tilde_closed_form=c_tilde_stated(n),
        c_tilde_exact=exact,
        errors={"c1": res.error / n, "c2": res.error, "S_n": sn.error / n, "c_tilde": ct.error},
        profile=Q.label,
    )


# ------------------------------------------------------------------ Gram matrices

def dihedral_elements(k: int) -> list[np.ndarray]:
    """The 2k planar matrices rot(2 pi j / k) and rot(2 pi j / k) diag(1, -1)."""
    out = []
    for j in range(k):
        c, s = math.cos(2 * math.pi * j / k), math.sin(2 * math.pi * j / k)
        r = np.array([[c, -s], [s, c]])
        out.append(r)
        out.append(r @ np.diag([1.0, -1.0]))
    return out


def kernel_representation(n: int, G2: np.ndarray) -> np.ndarray:
    """T with z(G y) = T z(y) for a profile invariant under the planar map G2.

    Dilation and the transverse translations are invariant; (d1, d2),
    (inv1, inv2) and each pair (rot1l, rot2l) rotate like vectors; rot12
    picks up det G2.
    """
    T = np.zeros((3 * n, 3 * n))
    T[0, 0] = 1.0
    T[1:3, 1:3] = G2
    for l in range(3, n + 1):
        T[l, l] = 1.0
    T[n + 1, n + 1] = round(np.linalg.det(G2))
    T[n + 2:n + 4, n + 2:n + 4] = G2
    for l in range(2, n):
        i1, i2 = n + 2 + l, 2 * n + l
        T[np.ix_([i1, i2], [i1, i2])] = G2
    return T


def equivariant_sum(Ms: np.ndarray, n: int, k: int) -> np.ndarray:
    M = np.zeros_like(Ms)
    for G2 in dihedral_elements(k):
        T = kernel_representation(n, G2)
        M += T @ Ms @ T.T
    return M


def structural_zeros(n: int, k: int, seed: int = 0) -> np.ndarray:
    """Mask of Gram entries that vanish for every dihedrally invariant profile."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3 * n, 3 * n))
    M = equivariant_sum(A + A.T, n, k)
    return np.abs(M) < 1e-9 * np.max(np.abs(M))


@dataclass
class GramResult:
    matrix: np.ndarray
    error: float
    n: int
    k: int
    mu: float
    c_tilde: float
    zero_mask: np.ndarray
    regions: int = 0

    @property
    def normalized(self) -> np.ndarray:
        return self.matrix / ((self.k + 1) * self.c_tilde)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())


def gram_integrand(Q: ScalarField):
    n = Q.n
    p = critical_exponent(n)
    iu = np.triu_indices(3 * n)

    def f(y):
        Z = all_kernel_values(Q, y)
        w = np.abs(Q.value(y)) ** (p - 1)
        return w[:, None] * Z[:, iu[0]] * Z[:, iu[1]]

    return f


def _unpack(vec: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(3 * n)
    M = np.zeros((3 * n, 3 * n))
    M[iu] = vec
    return M + M.T - np.diag(np.diag(M))


def gram_matrix(cs: CrownSpec, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-6), full_circle: bool = False) -> GramResult:
    """M_ij = int |Q|^{p-1} z_i z_j for the crown.

    The integral is taken over one sector of angle pi/k and spread over the
    dihedral group with the kernel representation; ``full_circle`` instead
    integrates all 2k sectors directly (the brute-force cross-check).
    Entries that vanish by symmetry are set to exactly zero.
    """
    n, k = cs.n, cs.k
    Q = crown(cs)
    f = gram_integrand(Q)
    s = replace(spec, symmetry="none")
    mask = structural_zeros(n, k)
    if full_circle:
        total = 0.0
        err = 0.0
        regions = 0
        for j in range(2 * k):
            r = integrate_sector(f, n, (j * math.pi / k, (j + 1) * math.pi / k), s)
            total = total + r.value
            err += r.error
            regions += r.regions
        M = _unpack(np.asarray(total), n)
    else:
        r = integrate_sector(f, n, (0.0, math.pi / k), s)
        M = equivariant_sum(_unpack(np.asarray(r.value), n), n, k)
        err = 2 * k * r.error
        regions = r.regions
    M[mask] = 0.0
    return GramResult(M, float(err), n, k, cs.mu, c_tilde_exact(n), mask, regions)


def gram_rate(n: int, k: int, q: Optional[float] = None) -> float:
    """Predicted relative deviation k^{(1 - n/q) max(1, 4/(n-2))}, q = 0.75 n by default."""
    q = 0.75 * n if q is None else q
    return float(k ** ((1 - n / q) * max(1.0, 4 / (n - 2))))
