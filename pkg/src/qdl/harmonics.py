"""Harmonic polynomials, annulus solutions and related closed forms.

Polynomials in N = 2 or 3 variables are dense coefficient arrays ``c`` with
``c[i, j(, k)]`` the coefficient of x^i y^j (z^k).  Sphere inner products are
exact: they come from the moments of monomials on S^(N-1).

Conventions on the circle: ``<p, q> = int_{S^1} p q``, so r^m cos(m theta)
has squared norm pi for m >= 1 and the constant 1 has squared norm 2 pi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import optimize, signal, special

from .fracsob import FourierSeries1D, SampledCurveFunction, seminorm


# ---------------------------------------------------------------- polynomials


def _check_dim(N):
    if N not in (2, 3):
        raise ValueError(f"only N = 2, 3 are supported, got N = {N}")


def zero_poly(N: int, m: int) -> np.ndarray:
    return np.zeros((m + 1,) * N)


def r2_poly(N: int) -> np.ndarray:
    c = np.zeros((3,) * N)
    for k in range(N):
        idx = [0] * N
        idx[k] = 2
        c[tuple(idx)] = 1.0
    return c


def poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return signal.convolve(a, b, method="direct")


def poly_eval(c: np.ndarray, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if c.ndim == 2:
        return P.polyval2d(X[..., 0], X[..., 1], c)
    return P.polyval3d(X[..., 0], X[..., 1], X[..., 2], c)


def poly_deriv(c: np.ndarray, axis: int) -> np.ndarray:
    if c.shape[axis] == 1:
        return np.zeros_like(c)
    return P.polyder(c, axis=axis)


def _pad_to(c, shape):
    return np.pad(c, [(0, s - d) for s, d in zip(shape, c.shape)])


def poly_laplacian(c: np.ndarray) -> np.ndarray:
    out = np.zeros(c.shape)
    for k in range(c.ndim):
        out += _pad_to(poly_deriv(poly_deriv(c, k), k), c.shape)
    return out


def homogeneous_degree(c: np.ndarray) -> int:
    idx = np.argwhere(c != 0)
    if idx.size == 0:
        return 0
    deg = idx.sum(axis=1)
    if np.any(deg != deg[0]):
        raise ValueError("polynomial is not homogeneous")
    return int(deg[0])


@lru_cache(maxsize=None)
def _moment_table(N: int, size: int) -> np.ndarray:
    """int_{S^(N-1)} x^a over all exponents a < size in each variable."""
    grids = np.meshgrid(*([np.arange(size)] * N), indexing="ij")
    even = np.ones(grids[0].shape, dtype=bool)
    num = np.zeros(grids[0].shape)
    for g in grids:
        even &= g % 2 == 0
        num += special.gammaln((g + 1) / 2.0)
    tot = sum(grids)
    val = 2.0 * np.exp(num - special.gammaln((tot + N) / 2.0))
    table = np.where(even, val, 0.0)
    table.setflags(write=False)
    return table


def sphere_inner(a: np.ndarray, b: np.ndarray) -> float:
    """int_{S^(N-1)} a b for coefficient arrays a and b."""
    c = poly_mul(a, b)
    size = max(c.shape)
    c = _pad_to(c, (size,) * c.ndim)
    return float((c * _moment_table(c.ndim, size)).sum())


def harmonic_projection(c: np.ndarray) -> np.ndarray:
    """Harmonic part p_m of a homogeneous polynomial of degree m.

    p_m = sum_j (-1)^j |x|^(2j) Lap^j c / (2^j j! prod_(i=1..j) (N + 2m - 2 - 2i)).
    """
    N = c.ndim
    m = homogeneous_degree(c)
    out = np.zeros(c.shape)
    lap = c
    r2j = np.ones((1,) * N)
    den = 1.0
    for j in range(0, m // 2 + 1):
        if j > 0:
            lap = poly_laplacian(lap)
            r2j = poly_mul(r2j, r2_poly(N))
            den *= 2.0 * j * (N + 2 * m - 2 - 2 * j)
        term = poly_mul(r2j, lap)[tuple(slice(0, s) for s in c.shape)]
        out += (-1) ** j * term / den
    return out


def divide_r2(c: np.ndarray) -> np.ndarray:
    """Exact quotient c / |x|^2; raises if the division leaves a remainder."""
    N = c.ndim
    rem = c.astype(float).copy()
    q = np.zeros(c.shape)
    scale = max(np.abs(c).max(), 1.0)
    for e1 in range(c.shape[0] - 1, 1, -1):
        for rest in np.ndindex(*c.shape[1:]):
            v = rem[(e1,) + rest]
            if v == 0.0:
                continue
            q[(e1 - 2,) + rest] += v
            rem[(e1,) + rest] = 0.0
            for k in range(1, N):
                idx = [e1 - 2] + list(rest)
                idx[k] += 2
                if idx[k] >= c.shape[k]:
                    raise ValueError("polynomial is not divisible by |x|^2")
                rem[tuple(idx)] -= v
    if np.abs(rem).max() > 1e-9 * scale:
        raise ValueError("polynomial is not divisible by |x|^2")
    m = max(homogeneous_degree(c) - 2, 0)
    return q[tuple(slice(0, m + 1) for _ in range(N))]


def decompose(c: np.ndarray) -> list:
    """Split a homogeneous polynomial as sum_j |x|^(2j) h_j with h_j harmonic.

    Returns the list [h_0, h_1, ...] (h_j has degree m - 2j).
    """
    parts = []
    cur = c
    while True:
        m = homogeneous_degree(cur)
        h = harmonic_projection(cur)
        parts.append(h)
        if m < 2:
            break
        cur = divide_r2(cur - h)
        if not np.any(cur):
            break
    return parts


def recompose(parts: list, N: int) -> np.ndarray:
    m = homogeneous_degree(parts[0])
    out = zero_poly(N, m)
    r2j = np.ones((1,) * N)
    for j, h in enumerate(parts):
        if j > 0:
            r2j = poly_mul(r2j, r2_poly(N))
        term = poly_mul(r2j, h)
        out += _pad_to(term, out.shape)[tuple(slice(0, m + 1) for _ in range(N))]
    return out


@lru_cache(maxsize=None)
def harmonic_basis(N: int, m: int) -> tuple:
    """Basis of homogeneous harmonic polynomials of degree m.

    N = 2: r^m cos(m theta), r^m sin(m theta) (just 1 for m = 0).
    N = 3: 2m + 1 real solid harmonics, orthonormal on S^2.
    """
    _check_dim(N)
    if m < 0:
        raise ValueError("degree must be non-negative")
    if N == 2:
        if m == 0:
            return (np.ones((1, 1)),)
        cos_c, sin_c = zero_poly(2, m), zero_poly(2, m)
        for j in range(m + 1):
            # (x + i y)^m = sum_j binom(m, j) x^(m-j) (i y)^j
            val = special.comb(m, j, exact=True) * (1j) ** j
            cos_c[m - j, j] = val.real
            sin_c[m - j, j] = val.imag
        return (cos_c, sin_c)
    if m > 6:
        raise ValueError("3-D solid harmonics are provided up to degree 6")
    raw = []
    for c3 in (0, 1):
        for a in range(m - c3, -1, -1):
            b = m - c3 - a
            mono = zero_poly(3, m)
            mono[a, b, c3] = 1.0
            raw.append(harmonic_projection(mono))
    G = np.array([[sphere_inner(x, y) for y in raw] for x in raw])
    L = np.linalg.cholesky(G)
    T = np.linalg.inv(L)
    basis = tuple(sum(T[i, j] * raw[j] for j in range(i + 1)) for i in range(len(raw)))
    return basis


@dataclass(frozen=True)
class HarmonicPoly:
    """Homogeneous harmonic polynomial given by coefficients in harmonic_basis."""

    N: int
    m: int
    coef: np.ndarray

    def __post_init__(self):
        _check_dim(self.N)
        c = np.atleast_1d(np.asarray(self.coef, dtype=float))
        if c.shape != (len(harmonic_basis(self.N, self.m)),):
            raise ValueError(f"expected {len(harmonic_basis(self.N, self.m))} coefficients")
        object.__setattr__(self, "coef", c)

    @classmethod
    def from_poly(cls, c: np.ndarray) -> "HarmonicPoly":
        """Coordinates of a harmonic coefficient array in the basis."""
        N, m = c.ndim, homogeneous_degree(c)
        B = harmonic_basis(N, m)
        G = np.array([[sphere_inner(x, y) for y in B] for x in B])
        rhs = np.array([sphere_inner(x, c) for x in B])
        return cls(N, m, np.linalg.solve(G, rhs))

    @classmethod
    def constant(cls, N: int, value: float) -> "HarmonicPoly":
        return cls(N, 0, [value / float(harmonic_basis(N, 0)[0].ravel()[0])])

    def poly(self) -> np.ndarray:
        return sum(a * b for a, b in zip(self.coef, harmonic_basis(self.N, self.m)))

    def __call__(self, X) -> np.ndarray:
        return poly_eval(self.poly(), X)

    def gradient(self, X) -> np.ndarray:
        c = self.poly()
        return np.stack([poly_eval(poly_deriv(c, k), X) for k in range(self.N)], axis=-1)

    def inner(self, other: "HarmonicPoly") -> float:
        return sphere_inner(self.poly(), other.poly())

    def norm2(self) -> float:
        return self.inner(self)

    def __add__(self, other):
        return HarmonicPoly(self.N, self.m, self.coef + other.coef)

    def __sub__(self, other):
        return HarmonicPoly(self.N, self.m, self.coef - other.coef)

    def __mul__(self, a: float):
        return HarmonicPoly(self.N, self.m, a * self.coef)

    __rmul__ = __mul__


def kelvin(p: HarmonicPoly) -> Callable:
    """x -> p(x) / |x|^(N + 2m - 2), harmonic on R^N minus the origin."""
    k = p.N + 2 * p.m - 2

    def K(X):
        X = np.asarray(X, dtype=float)
        r2 = (X**2).sum(-1)
        if np.any(r2 == 0):
            raise ValueError("the Kelvin transform is not defined at 0")
        return p(X) / r2 ** (k / 2)

    return K


# ---------------------------------------------------------------- annulus


def _log_inv(R):
    if not 0.0 < R < 1.0:
        raise ValueError(f"inner radius must lie in (0, 1), got {R}")
    return -np.log(R)


@dataclass
class AnnulusSolution:
    """Harmonic P on {R < |x| < 1} with P = p on |x| = 1 and P(R x) = q(x).

    P = p_t + q_t ln r (N = 2, m = 0) and P = p_t + K[q_t] otherwise.
    """

    N: int
    m: int
    R: float
    p: HarmonicPoly
    q: HarmonicPoly
    p_t: HarmonicPoly
    q_t: HarmonicPoly
    t: float = field(default=None)

    def __post_init__(self):
        if self.t is None:
            self.t = _log_inv(self.R)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        r2 = (X**2).sum(-1)
        if self.N == 2 and self.m == 0:
            return self.p_t(X) + self.q_t(X) * 0.5 * np.log(r2)
        return self.p_t(X) + kelvin(self.q_t)(X)

    def gradient(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        r2 = (X**2).sum(-1)[..., None]
        if self.N == 2 and self.m == 0:
            return self.q_t(X)[..., None] * X / r2
        k = self.N + 2 * self.m - 2
        g = self.q_t.gradient(X) / r2 ** (k / 2) - k * self.q_t(X)[..., None] * X / r2 ** (k / 2 + 1)
        return self.p_t.gradient(X) + g


def solve_annulus(p: HarmonicPoly, q: HarmonicPoly, R: float = None,
                  t: float = None) -> AnnulusSolution:
    """Exact harmonic interpolant between p on S^(N-1) and q on R S^(N-1).

    The radius may be given as ``t = -ln R`` for annuli very close to the
    unit sphere.
    """
    if p.N != q.N or p.m != q.m:
        raise ValueError("p and q must have the same dimension and degree")
    t = _log_inv(R) if t is None else float(t)
    if not t > 0:
        raise ValueError("inner radius must lie in (0, 1)")
    R = np.exp(-t) if R is None else R
    N, m = p.N, p.m
    if m == 0 and N == 2:
        q_t = (q - p) * (1.0 / -t)
        p_t = p
    elif m == 0:
        # R^(2-N) - 1
        q_t = (q - p) * (1.0 / np.expm1((N - 2) * t))
        p_t = p - q_t
    else:
        # D = R^(2-N-m) - R^m = R^m (R^(2-N-2m) - 1)
        D = np.exp(-m * t) * np.expm1((2 * m + N - 2) * t)
        p_t = (p * np.exp((m + N - 2) * t) - q) * (1.0 / D)
        q_t = (q - p * np.exp(-m * t)) * (1.0 / D)
    return AnnulusSolution(N, m, R, p, q, p_t, q_t, t)


def degree_constant(N: int, m: int, t: float) -> float:
    """(2m + N - 2) / (R^(2-N-m) - R^m) with R = e^-t; 1/t for N = 2, m = 0.

    This is the coefficient of ||p - q||^2 in the annulus energy.
    """
    if m == 0 and N == 2:
        return 1.0 / t
    D = np.exp(-m * t) * np.expm1((2 * m + N - 2) * t)
    return (2 * m + N - 2) / D


def energy_from_norms(N: int, m: int, t: float, pp: float, qq: float, dd: float) -> float:
    """Annulus energy from ||p||^2, ||q||^2 and ||p - q||^2 on S^(N-1)."""
    B = degree_constant(N, m, t)
    if m == 0:
        return B * dd
    D = np.exp(-m * t) * np.expm1((2 * m + N - 2) * t)
    k = m + N - 2
    Ap = (m * np.expm1(k * t) + k * np.expm1(-m * t)) / D
    Aq = (m * np.expm1(-k * t) + k * np.expm1(m * t)) / D
    return B * dd + Ap * pp + Aq * qq


def annulus_energy(sol: AnnulusSolution) -> float:
    """Exact Dirichlet energy of the annulus solution.

    In terms of ||p - q||^2 this is 2 pi |p - q|^2 / (-ln R) for N = 2, m = 0
    and N (N - 2) omega_N |p - q|^2 / (R^(2-N) - 1) for N = 3, m = 0.
    """
    pp, qq = sol.p.norm2(), sol.q.norm2()
    dd = (sol.p - sol.q).norm2()
    return energy_from_norms(sol.N, sol.m, sol.t, pp, qq, dd)


def annulus_energy_quadrature(sol: AnnulusSolution, n_r: int = 32, n_ang: int = 16) -> float:
    """int |D P|^2 over the annulus by tensor Gauss rules in polar/spherical coordinates.

    Independent of the closed form: only the gradient of P is used.
    """
    g, w = np.polynomial.legendre.leggauss(n_r)
    R = sol.R
    r = 0.5 * (1 - R) * (g + 1) + R
    wr = 0.5 * (1 - R) * w
    if sol.N == 2:
        th = 2 * np.pi * np.arange(2 * n_ang) / (2 * n_ang)
        rr, tt = np.meshgrid(r, th, indexing="ij")
        X = np.stack([rr * np.cos(tt), rr * np.sin(tt)], -1)
        G2 = (sol.gradient(X) ** 2).sum(-1)
        return float(wr @ (G2 * rr).sum(1) * (2 * np.pi / (2 * n_ang)))
    c, wc = np.polynomial.legendre.leggauss(n_ang)
    ph = 2 * np.pi * np.arange(2 * n_ang) / (2 * n_ang)
    rr, cc, pp = np.meshgrid(r, c, ph, indexing="ij")
    sn = np.sqrt(1 - cc**2)
    X = np.stack([rr * sn * np.cos(pp), rr * sn * np.sin(pp), rr * cc], -1)
    G2 = (sol.gradient(X) ** 2).sum(-1) * rr**2
    return float(np.einsum("i,j,ijk->", wr, wc, G2) * (2 * np.pi / (2 * n_ang)))


def f_threshold(t, N: int = 2):
    """(cosh((N - 1) t) - 1) / sinh t."""
    t = np.asarray(t, dtype=float)
    return (np.cosh((N - 1) * t) - 1.0) / np.sinh(t)


def f_tilde(t):
    """t / (t - 1/t)."""
    t = np.asarray(t, dtype=float)
    return t / (t - 1.0 / t)


def energy_bounds(m: int, R: float = None, pp: float = 0.0, qq: float = 0.0,
                  dd: float = 0.0, N: int = 2, t: float = None) -> tuple:
    """Two upper bounds for the degree-m annulus energy (m >= 1).

    bound21 = c_m ||p - q||^2 + f(m ln(1/R)) m (||p||^2 + ||q||^2)
    bound22 = 4 N f~(R^-m) m (||p||^2 + ||q||^2)
    """
    if m < 1:
        raise ValueError("the bounds need m >= 1")
    t = _log_inv(R) if t is None else t
    b21 = degree_constant(N, m, t) * dd + f_threshold(m * t, N) * m * (pp + qq)
    ftil = 1.0 / -np.expm1(-2 * m * t)
    b22 = 4 * N * ftil * m * (pp + qq)
    return float(b21), float(b22)


# ---------------------------------------------------------------- interpolation


def m_epsilon(epsilon: float, s: float, N: int = 2) -> int:
    """Smallest m >= 2 with f((m - 1)^-delta) <= epsilon and 8N / m^delta < epsilon.

    delta = s - 1/2.  Both conditions are monotone in m, so the start point
    comes from closed forms and a short local scan confirms minimality.
    """
    delta = s - 0.5
    if not 0 < delta < 0.5:
        raise ValueError("s must lie in (1/2, 1)")
    if not 0 < epsilon:
        raise ValueError("epsilon must be positive")

    def ok(m):
        return (m >= 2 and f_threshold((m - 1.0) ** -delta, N) <= epsilon
                and 8.0 * N / m**delta < epsilon)

    ystar = optimize.brentq(lambda y: f_threshold(y, N) - epsilon, 1e-300, 50.0)
    m1 = int(np.floor(ystar ** (-1.0 / delta))) + 1
    m2 = int(np.floor((8.0 * N / epsilon) ** (1.0 / delta))) + 1
    m = max(m1, m2, 2)
    while not ok(m):
        m += 1
    while ok(m - 1):
        m -= 1
    return m


def m_radius(t: float, s: float) -> int:
    """m_R with e^(-(m_R - 1)^(-1-delta)) < R <= e^(-m_R^(-1-delta)), R = e^-t."""
    delta = s - 0.5
    m = max(int(np.ceil(t ** (-1.0 / (1.0 + delta)))), 1)
    while m ** (-1.0 - delta) > t:
        m += 1
    while m > 1 and (m - 1) ** (-1.0 - delta) <= t:
        m -= 1
    return m


@dataclass
class InterpolationReport:
    solutions: list
    energy: float
    eps_term: float
    C_term: float
    C: float
    epsilon: float
    s: float
    t: float
    t_epsilon: float
    m_epsilon: int
    m_R: int

    @property
    def R(self) -> float:
        return float(np.exp(-self.t))

    @property
    def R_epsilon(self) -> float:
        return float(np.exp(-self.t_epsilon))

    @property
    def holds(self) -> bool:
        return self.energy <= self.eps_term + self.C_term

    def __call__(self, X):
        return sum(sol(X) for sol in self.solutions)


def _series_mode(F: FourierSeries1D, m: int) -> HarmonicPoly:
    if m > F.K:
        return HarmonicPoly(2, m, np.zeros(1 if m == 0 else 2))
    if m == 0:
        return HarmonicPoly(2, 0, [F.a[0]])
    return HarmonicPoly(2, m, [F.a[m], F.b[m]])


def interpolate_annulus(u: FourierSeries1D, v: FourierSeries1D, epsilon: float,
                        R: Optional[float] = None, s: float = 0.75,
                        t: Optional[float] = None) -> InterpolationReport:
    """Harmonic interpolant between u on S^1 and v on R S^1, mode by mode.

    Checks energy <= epsilon ([u]^2 + [v]^2) + C ||u - v||^2 where [.] is
    the Fourier H^s seminorm sum m^(2s) ||p_m||^2 and C is the largest
    degree constant below m_R.  R defaults to R_epsilon = exp(-m_eps^(-1-delta)).
    """
    delta = s - 0.5
    me = m_epsilon(epsilon, s, 2)
    t_eps = me ** (-1.0 - delta)
    if t is None:
        t = t_eps if R is None else _log_inv(R)
    if t > t_eps * (1 + 1e-12):
        raise ValueError(
            f"R = {np.exp(-t)!r} is below R_epsilon = {np.exp(-t_eps)!r} "
            f"(m_epsilon = {me}); choose R in [R_epsilon, 1)")
    mR = m_radius(t, s)
    # degree constants decrease in m (x / sinh x is decreasing), so a
    # bounded scan past the data band is enough
    scan = range(0, min(mR, max(u.K, v.K) + 2))
    C = max(degree_constant(2, m, t) for m in scan)
    sols, E, hs2, l2 = [], 0.0, 0.0, 0.0
    for m in range(0, max(u.K, v.K) + 1):
        p, q = _series_mode(u, m), _series_mode(v, m)
        sol = solve_annulus(p, q, t=t)
        sols.append(sol)
        pp, qq, dd = p.norm2(), q.norm2(), (p - q).norm2()
        E += energy_from_norms(2, m, t, pp, qq, dd)
        hs2 += m ** (2 * s) * (pp + qq) if m > 0 else 0.0
        l2 += dd
    return InterpolationReport(sols, E, epsilon * hs2, C * l2, C, epsilon, s, t,
                               t_eps, me, mR)


# ---------------------------------------------------------------- disk, half-disk


@dataclass
class DiskExtension:
    """Harmonic extension of a trigonometric polynomial into the unit disk."""

    boundary: FourierSeries1D

    def __call__(self, x, y):
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        k = np.arange(self.boundary.K + 1)
        rk = np.power.outer(r, k)
        ang = np.multiply.outer(th, k)
        return (rk * np.cos(ang)) @ self.boundary.a + (rk * np.sin(ang)) @ self.boundary.b

    @property
    def energy(self) -> float:
        """pi sum_k k (a_k^2 + b_k^2)."""
        F = self.boundary
        k = np.arange(F.K + 1)
        return float(np.pi * (k * (F.a**2 + F.b**2)).sum())


def disk_harmonic_extension(boundary: FourierSeries1D) -> DiskExtension:
    return DiskExtension(boundary)


def disk_to_halfdisk(w):
    """Conformal map of the unit disk onto the upper half-disk.

    The arc 0 < arg w < pi goes to the upper half-circle, pi < arg w < 2 pi
    to the segment (-1, 1); w = 1 and w = -1 go to the corners 1 and -1.
    """
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = np.sqrt(1j * (1 + w) / (1 - w))
        # the branch in the closed first quadrant; signed zeros would flip it
        zeta = np.abs(zeta.real) + 1j * np.abs(zeta.imag)
        z = (zeta - 1) / (zeta + 1)
    z = np.where(w == 1, 1.0 + 0j, z)
    return z


@dataclass
class HalfDiskReport:
    energy: float
    arc_energy: float
    graph_seminorm2: float
    epsilon: float
    s: float

    def implied_constant(self) -> float:
        """Smallest C making energy <= (1+eps) arc + (C/eps) graph term."""
        excess = self.energy - (1 + self.epsilon) * self.arc_energy
        if excess <= 0:
            return 0.0
        if self.graph_seminorm2 == 0:
            return np.inf
        return self.epsilon * excess / self.graph_seminorm2

    def rhs(self, C: float) -> float:
        return (1 + self.epsilon) * self.arc_energy + C / self.epsilon * self.graph_seminorm2

    def holds(self, C: float) -> bool:
        return self.energy <= self.rhs(C)


def _pullback_energy(g_arc: Callable, g_seg: Callable, M: int) -> float:
    phi = 2 * np.pi * np.arange(M) / M
    w = np.exp(1j * phi)
    w[0] = 1.0
    w[M // 2] = -1.0
    z = disk_to_halfdisk(w)
    on_arc = (phi > 0) & (phi < np.pi)
    vals = np.empty(M)
    vals[on_arc] = g_arc(np.angle(z[on_arc]))
    seg = ~on_arc
    vals[seg] = g_seg(np.clip(z[seg].real, -1.0, 1.0))
    return DiskExtension(FourierSeries1D.from_samples(vals)).energy


def halfdisk_energy(g_arc: Callable, g_seg: Callable, M: int = 1 << 14) -> float:
    """Dirichlet energy of the harmonic function on the upper half-disk.

    ``g_arc(theta)`` gives data on the half-circle (0 <= theta <= pi) and
    ``g_seg(x)`` on the diameter.  The data are pulled back to the unit
    circle by the conformal map, where the energy is pi sum k |c_k|^2;
    Dirichlet energy is conformally invariant.  Near the corners the
    pulled-back data behave like sqrt(|phi|), so the truncated sums err by
    c1 / M + c2 / M^1.5 + ...; two Richardson steps over M, 2M, 4M remove
    both terms (relative error near 1e-9 at the default M).
    """
    E = np.array([_pullback_energy(g_arc, g_seg, M << j) for j in range(3)])
    R1 = 2 * E[1:] - E[:-1]
    q = 2.0**1.5
    return float((q * R1[1] - R1[0]) / (q - 1))


def _arc_energy(g_arc: Callable, n: int) -> float:
    # second order in the grid step, so one Richardson step
    T = []
    for m in (n, 2 * n - 1):
        th = np.linspace(0, np.pi, m)
        T.append(seminorm(SampledCurveFunction(th, g_arc(th), kind="arc"), 1) ** 2)
    return (4 * T[1] - T[0]) / 3


def halfdisk_energy_bound_check(g_arc: Callable, g_seg: Callable, epsilon: float,
                                s: float, M: int = 1 << 14,
                                n_arc: int = 4097, n_seg: int = 1025) -> HalfDiskReport:
    """Both sides of the half-disk energy estimate.

    Left: Dirichlet energy of the harmonic extension.  Right: tangential
    energy on the half-circle and the s-seminorm of the data on the diameter
    (s = 1 means the tangential energy of the diameter data).
    """
    if not 0.5 < s <= 1.0:
        raise ValueError("s must lie in (1/2, 1]")
    if abs(float(g_arc(np.array([0.0]))[0]) - float(g_seg(np.array([1.0]))[0])) > 1e-9 or \
            abs(float(g_arc(np.array([np.pi]))[0]) - float(g_seg(np.array([-1.0]))[0])) > 1e-9:
        raise ValueError("data on the arc and on the diameter disagree at the corners")
    E = halfdisk_energy(g_arc, g_seg, M)
    arcE = _arc_energy(g_arc, n_arc)
    x = np.linspace(-1, 1, n_seg)
    seg = SampledCurveFunction(x, g_seg(x), kind="interval")
    G2 = seminorm(seg, s) ** 2
    return HalfDiskReport(E, arcE, G2, epsilon, s)


def random_halfdisk_data(rng: np.random.Generator, zero_graph: bool = False,
                         modes: int = 5) -> tuple:
    """Random smooth boundary data (g_arc, g_seg) agreeing at the corners.

    The arc data are l0 + l1 cos(theta) + sum b_k sin(k theta) and the
    diameter data l0 + l1 x + sum c_k sin(k pi (x + 1) / 2), with
    coefficients decaying like 1/k.  ``zero_graph`` sets l0 = l1 = c = 0.
    """
    b = rng.standard_normal(modes) / np.arange(1, modes + 1)
    c = rng.standard_normal(modes) / np.arange(1, modes + 1)
    l0, l1 = rng.standard_normal(2)
    if zero_graph:
        c[:] = 0.0
        l0 = l1 = 0.0
    k = np.arange(1, modes + 1)

    def g_arc(th):
        th = np.asarray(th, dtype=float)
        return l0 + l1 * np.cos(th) + np.sin(np.multiply.outer(th, k)) @ b

    def g_seg(x):
        x = np.asarray(x, dtype=float)
        return l0 + l1 * x + np.sin(np.multiply.outer(np.pi * (x + 1) / 2, k)) @ c

    return g_arc, g_seg


# Frozen constant for the half-disk estimate at epsilon = 0.5, s = 0.75: about
# twice the largest implied constant (0.134) over 200 calibration samples
# of random_halfdisk_data (seed 2024).
HALFDISK_C_GOLDEN = 0.3


def calibrate_halfdisk_constant(rng: np.random.Generator, count: int, epsilon: float = 0.5,
                                s: float = 0.75, M: int = 1 << 12) -> float:
    """Largest implied constant over ``count`` random mixed data sets."""
    return max(halfdisk_energy_bound_check(*random_halfdisk_data(rng), epsilon, s, M=M)
               .implied_constant() for _ in range(count))


def linear_trace_part(g_seg: Callable) -> tuple:
    """Coefficients (slope, offset) of the linear function matching g at +-1."""
    g1, gm1 = float(g_seg(np.array([1.0]))[0]), float(g_seg(np.array([-1.0]))[0])
    return 0.5 * (g1 - gm1), 0.5 * (g1 + gm1)


# ---------------------------------------------------------------- counterexample


def bump(theta, eps: float):
    """exp(1 - 1/(1 - (theta/eps)^2)) for |theta| < eps, else 0."""
    theta = np.asarray(theta, dtype=float)
    x = theta / eps
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _bump_coefficients(eps: float, M: int = 1 << 16, rel_tail: float = 1e-8):
    th = 2 * np.pi * np.arange(M) / M
    th = np.where(th > np.pi, th - 2 * np.pi, th)
    c = np.fft.rfft(bump(th, eps)) / M
    a = 2 * c.real
    a[0] = c[0].real
    # smallest L with sum_(l > L) (l + 1) |a_l| < rel_tail * A
    w = (np.arange(a.size) + 1) * np.abs(a)
    A_full = w.sum()
    tail = np.cumsum(w[::-1])[::-1]
    L = int(np.argmax(tail < rel_tail * A_full)) - 1
    L = max(L, 1)
    a = a[: L + 1].copy()
    a.setflags(write=False)
    return a, float(tail[L + 1]), float(np.abs(c[L + 1:]).sum() * 2)


@dataclass
class CounterexampleFamily:
    """f_k = g_k / sqrt(k), g_k the harmonic extension of 2 eta cos(k theta)."""

    eps: float
    k: int
    a: np.ndarray = field(init=False, repr=False)
    tail: float = field(init=False)
    abs_tail: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.eps < np.pi / 2:
            raise ValueError("eps must lie in (0, pi/2)")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        self.a, self.tail, self.abs_tail = _bump_coefficients(float(self.eps))

    @property
    def L(self) -> int:
        return self.a.size - 1

    @property
    def a0(self) -> float:
        return float(self.a[0])

    @property
    def A(self) -> float:
        return float(((np.arange(self.L + 1) + 1) * np.abs(self.a)).sum())

    @property
    def k0(self) -> int:
        bad = np.flatnonzero(2 * np.abs(self.a) >= self.a[0])
        bad = bad[bad > 0]
        return int(bad.max()) + 1 if bad.size else 1

    def g_coefficients(self) -> np.ndarray:
        """Cosine coefficients c_m of g_k: a_(m-k) [m > k] + a_(m+k) + a_(k-m) [m < k], c_k = 2 a_0 + a_2k."""
        k, a = self.k, self.a
        c = np.zeros(self.L + k + 1)
        for l, al in enumerate(a):
            c[l + k] += al
            c[abs(l - k)] += al
        return c

    def boundary_series(self) -> FourierSeries1D:
        return FourierSeries1D(self.g_coefficients() / np.sqrt(self.k))

    def energy_ratio(self) -> float:
        """(1/pi) int |D f_k|^2 = sum m c_m^2 / k."""
        c = self.g_coefficients()
        m = np.arange(c.size)
        return float((m * c**2).sum() / self.k)

    def hs_norm2(self, s: float) -> float:
        """sum m^(2s) c_m^2 / k, the weighting used for the decay estimate."""
        c = self.g_coefficients()
        m = np.arange(c.size, dtype=float)
        w = m ** (2 * s)
        if s == 0:
            w[0] = 1.0
        return float((w * c**2).sum() / self.k)

    def sup_norm(self, M: int = 1 << 14) -> float:
        """max |f_k| on the circle (equal to the max over the disk)."""
        c = self.g_coefficients() / np.sqrt(self.k)
        M = max(M, 4 * c.size)
        vals = np.fft.irfft(np.pad(c, (0, M // 2 + 1 - c.size)) * M / 2, n=M)
        vals += c[0] / 2
        return float(np.abs(vals).max())

    def truncation_bound(self) -> float:
        """Bound on |f_k - truncated f_k| on the closed disk."""
        return 2 * self.abs_tail / np.sqrt(self.k)

    def diagnostics(self, s_values=(0.2, 0.35, 0.45)) -> dict:
        d = {
            "k": self.k,
            "a0": self.a0,
            "A": self.A,
            "k0": self.k0,
            "energy": self.energy_ratio(),
            "energy_lower": self.a0**2 / 4,
            "energy_upper": 4 * self.A**2,
            "sup_sqrtk": self.sup_norm() * np.sqrt(self.k),
            "sup_bound": 2.0,
            "sup_slack": self.truncation_bound() * np.sqrt(self.k),
        }
        for s in s_values:
            d[f"hs_scaled_{s}"] = self.hs_norm2(s) * self.k ** (1 - 2 * s)
        d["hs_bound"] = 8 * self.A**2
        d["half_norm"] = self.hs_norm2(0.5)
        return d


def counterexample_family(epsilon: float, k: int) -> CounterexampleFamily:
    return CounterexampleFamily(epsilon, k)
