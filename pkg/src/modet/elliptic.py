"""Genus-one twisted special functions.

Coordinates follow the additive convention q_z = e^z: the torus is
C / (2 pi i Z + 2 pi i tau Z), and a point is written z = 2 pi i (u + v tau).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .classical import eta
from .config import Conventions, default_conventions
from .series import bernoulli_over_factorial

TWO_PI_I = 2j * math.pi
_SNAP = 1e-12


class DegenerateConfiguration(ValueError):
    """Raised when a sample lands on (or numerically at) a zero or pole."""


def _frac_part(x: float) -> float:
    f = x - math.floor(x)
    if f > 1 - _SNAP or f < _SNAP:
        return 0.0
    return f


def _reduce_half(x: float, lower_closed: bool) -> float:
    """x mod 1 into [-1/2, 1/2) when ``lower_closed`` else (-1/2, 1/2]."""
    if lower_closed:
        return _frac_part(x + 0.5) - 0.5
    return 0.5 - _frac_part(0.5 - x)


@dataclass(frozen=True)
class TwistData:
    alpha: float
    beta: float
    theta: complex
    phi: complex
    lam: float
    kappa: float
    untwisted: bool

    @property
    def characteristics(self) -> tuple:
        """(1/2 - beta, 1/2 + alpha): the theta characteristics paired with this twist."""
        return (0.5 - self.beta, 0.5 + self.alpha)


def twist_from_angles(alpha: float, beta: float, conventions: Conventions | None = None) -> TwistData:
    conv = conventions or default_conventions()
    alpha, beta = float(alpha), float(beta)
    theta = cmath.exp(-TWO_PI_I * alpha)
    phi = cmath.exp(-TWO_PI_I * beta)
    lam = _frac_part(conv.lambda_sign * beta)
    kappa = _reduce_half(conv.kappa_sign * beta + conv.kappa_shift, conv.kappa_shift != 0)
    untwisted = _frac_part(alpha) == 0.0 and _frac_part(beta) == 0.0
    if untwisted:
        theta, phi = 1.0 + 0j, 1.0 + 0j
    return TwistData(alpha, beta, theta, phi, lam, kappa, untwisted)


@dataclass(frozen=True)
class TorusPoint:
    u: float
    v: float

    def __post_init__(self):
        if not (0.0 < self.v < 1.0):
            raise ValueError(f"v={self.v} outside the strip 0 < v < 1")

    def z(self, tau: complex) -> complex:
        return TWO_PI_I * (self.u + self.v * complex(tau))


def uv_of(z: complex, tau: complex) -> tuple:
    w = complex(z) / TWO_PI_I
    v = w.imag / complex(tau).imag
    return w.real - v * complex(tau).real, v


def _check_tau(tau) -> complex:
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("tau not in upper half-plane")
    return tau


# -- theta functions -------------------------------------------------------------


def theta_char(a: float, b: float, z, tau, convention: str = "paper", tol: float = 1e-17):
    """sum_n exp(i pi (n+a)^2 tau + (n+a)(z + 2 pi i b)), vectorised over ``z``.

    ``convention='standard'`` replaces z by 2 pi i z.
    """
    tau = _check_tau(tau)
    zarr = np.asarray(z, dtype=complex)
    zz = zarr if convention == "paper" else TWO_PI_I * zarr
    if convention not in ("paper", "standard"):
        raise ValueError(f"unknown theta convention {convention!r}")
    peak = zz.real / (2 * math.pi * tau.imag)
    width = math.ceil(math.sqrt(-math.log(tol) / (math.pi * tau.imag))) + 2
    lo = math.floor(float(np.min(peak)) - a) - width
    hi = math.ceil(float(np.max(peak)) - a) + width
    n = np.arange(lo, hi + 1, dtype=float) + a
    n = n.reshape((-1,) + (1,) * zz.ndim)
    expo = 1j * math.pi * n * n * tau + n * (zz + TWO_PI_I * b)
    out = np.exp(expo).sum(axis=0)
    return complex(out) if np.ndim(z) == 0 else out


@lru_cache(maxsize=256)
def _eta3(tau: complex) -> complex:
    return eta(tau) ** 3


def prime_form(z, tau, convention: str = "paper"):
    """K(z, tau) = -(i/eta^3) theta[1/2;1/2](z, tau)."""
    tau = _check_tau(tau)
    return -1j / _eta3(tau) * theta_char(0.5, 0.5, z, tau, convention)


# -- deformed Eisenstein series --------------------------------------------------


def _q_pow(tau: complex, x):
    return np.exp(TWO_PI_I * tau * x)


def _sum_terms(tau: complex, depth: int) -> int:
    return int(math.ceil((42 + 2.0 * depth) / (math.pi * tau.imag))) + depth + 8


def deformed_eisenstein(n: int, tw: TwistData, tau, *, pole_tol: float = 1e-12) -> complex:
    """E_n[theta; phi](tau) as a twisted Lambert-type sum.

    For the untwisted case the r = 0 mode is omitted, which turns the
    Bernoulli term into B_n(1) (equal to B_n(0) except at n = 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tau = _check_tau(tau)
    lam = tw.lam
    lead = 1.0 if tw.untwisted else lam
    bn = bernoulli_over_factorial(n, lead)[n]
    R = _sum_terms(tau, n)
    fact = math.factorial(n - 1)

    r0 = 1 if tw.untwisted else 0
    m = np.arange(r0, R) + lam
    x = _q_pow(tau, m) / tw.theta
    if np.any(np.abs(1 - x) < pole_tol):
        raise ZeroDivisionError("deformed Eisenstein pole")
    w = m ** (n - 1) if n > 1 else np.ones_like(m)
    s1 = np.sum(w * x / (1 - x))

    m2 = np.arange(1, R) - lam
    y = tw.theta * _q_pow(tau, m2)
    if np.any(np.abs(1 - y) < pole_tol):
        raise ZeroDivisionError("deformed Eisenstein pole")
    s2 = np.sum(m2 ** (n - 1) * y / (1 - y))
    return complex(-bn + s1 / fact + (-1) ** n * s2 / fact)


# -- deformed Weierstrass functions ---------------------------------------------

_LAURENT_RE = 1.0


def _f_derivs(t: complex, j: int, lam: float, mmax: int) -> np.ndarray:
    """f^(m)(z)/m! for f(z) = e^{lam z}/(e^z - 1), z = t + 2 pi i j, |Im t| <= pi."""
    if abs(t.real) <= _LAURENT_RE:
        nb = mmax + 160
        b = np.array(bernoulli_over_factorial(nb, lam))
        # g(t) = 1/t + sum_{n>=1} b_n t^{n-1}
        p = np.arange(nb)
        tp = t ** p.astype(float)
        out = np.empty(mmax + 1, dtype=complex)
        for k in range(mmax + 1):
            nn = np.arange(k + 1, nb + 1)
            c = np.array([math.comb(int(q) - 1, k) for q in nn], dtype=float)
            out[k] = (-1) ** k / t ** (k + 1) + np.sum(b[nn] * c * tp[nn - 1 - k])
        return out * cmath.exp(TWO_PI_I * j * lam)
    z = t + TWO_PI_I * j
    a = abs(z.real)
    R = int(math.ceil((45 + 2 * mmax) / a)) + 2 * mmax + 10
    r = np.arange(R, dtype=float)
    if z.real < 0:
        expn, sign = r + lam, -1.0
    else:
        expn, sign = lam - 1 - r, 1.0
    terms = _power_table(expn, mmax) * np.exp(expn * z)[:, None]
    return sign * terms.sum(axis=0)


def _power_table(nvals: np.ndarray, mmax: int) -> np.ndarray:
    """n^m/m! for each n (rows) and m = 0..mmax (columns), with 0^0 = 1."""
    m = np.arange(mmax + 1)
    lgam = np.array([math.lgamma(k + 1) for k in m])
    zero = nvals == 0
    logabs = np.log(np.where(zero, 1.0, np.abs(nvals)))
    mag = m[None, :] * logabs[:, None] - lgam[None, :]
    mag = np.where(zero[:, None] & (m[None, :] > 0), -np.inf, mag)
    sgn = np.where(nvals[:, None] < 0, (-1.0) ** m[None, :], 1.0)
    return sgn * np.exp(mag)


def _nearest_lattice_gap(tau: complex) -> float:
    return min(abs(TWO_PI_I * (a + b * tau)) for a in range(-2, 3) for b in range(-2, 3) if a or b)


def p1_derivatives(z: complex, tw: TwistData, tau, mmax: int, method: str = "auto") -> np.ndarray:
    """d[m] = (1/m!) d^m/dz^m P_1[theta;phi](z, tau), m = 0..mmax.

    ``auto`` splits P_1 = e^{lam z}/(e^z - 1) - (positive-mode Lambert sum)
    + (negative-mode Lambert sum), valid for -1 < v < 1, after moving v into
    [-1/2, 1/2) with P_1(z + 2 pi i tau) = theta P_1(z) (twisted) or
    P_1(z) - 1 (untwisted).
    ``lattice-sum`` evaluates the defining mode sum term by term (0 < v < 1).
    ``expansion`` sums 1/z - sum E_n z^{n-1}, valid inside the first pole ring.
    """
    tau = _check_tau(tau)
    z = complex(z)
    if method == "auto":
        return _p1_resummed(z, tw, tau, mmax)
    if method == "lattice-sum":
        return _p1_lattice(z, tw, tau, mmax)
    if method == "expansion":
        return _p1_expansion(z, tw, tau, mmax)
    raise ValueError(f"unknown method {method!r}")


def _p1_resummed(z: complex, tw: TwistData, tau: complex, mmax: int) -> np.ndarray:
    _, v = uv_of(z, tau)
    s = -math.floor(v + 0.5)
    z = z + TWO_PI_I * s * tau
    mult = tw.theta ** (-s)
    j = int(round(z.imag / (2 * math.pi)))
    t = z - TWO_PI_I * j
    if abs(t) < 1e-10:
        raise DegenerateConfiguration("Weierstrass pole")
    lam = tw.lam
    lead = 1.0 if tw.untwisted else lam
    out = _f_derivs(t, j, lead, mmax)

    R = _sum_terms(tau, mmax)
    r0 = 1 if tw.untwisted else 0
    npos = np.arange(r0, R) + lam
    x = np.exp(npos * (z + TWO_PI_I * tau)) / tw.theta
    den = 1 - _q_pow(tau, npos) / tw.theta
    out -= (_power_table(npos, mmax) * (x / den)[:, None]).sum(axis=0)

    nneg = lam - np.arange(1, R)
    y = tw.theta * np.exp(nneg * (z - TWO_PI_I * tau))
    den = 1 - tw.theta * _q_pow(tau, -nneg)
    out += (_power_table(nneg, mmax) * (y / den)[:, None]).sum(axis=0)
    if tw.untwisted:
        out[0] += s
        return out
    return out * mult


def _p1_lattice(z: complex, tw: TwistData, tau: complex, mmax: int) -> np.ndarray:
    _, v = uv_of(z, tau)
    if not (0.0 < v < 1.0):
        raise ValueError(f"lattice sum needs 0 < v < 1, got v={v:.6g}")
    rate = 2 * math.pi * tau.imag * min(v, 1 - v)
    R = min(int(math.ceil((42 + 2.5 * mmax) / rate)) + mmax + 10, 400000)
    r = np.arange(-R, R + 1)
    n = r + tw.lam
    if tw.untwisted:
        n = n[n != 0]
    pos = n >= 0
    terms = np.empty(n.shape, dtype=complex)
    npos = n[pos]
    terms[pos] = np.exp(npos * z) / (1 - _q_pow(tau, npos) / tw.theta)
    nneg = n[~pos]
    # 1/(1 - q^n/theta) = -theta q^{-n}/(1 - theta q^{-n}) for n < 0
    terms[~pos] = -tw.theta * np.exp(nneg * (z - TWO_PI_I * tau)) / (1 - tw.theta * _q_pow(tau, -nneg))
    return -(_power_table(n, mmax) * terms[:, None]).sum(axis=0)


def _p1_expansion(z: complex, tw: TwistData, tau: complex, mmax: int) -> np.ndarray:
    if z == 0:
        raise DegenerateConfiguration("Weierstrass pole")
    ratio = abs(z) / _nearest_lattice_gap(tau)
    if ratio >= 0.9:
        raise ValueError("expansion used outside its disc of convergence")
    nmax = mmax + int(math.ceil(math.log(1e-19) / math.log(ratio))) + 8
    nmax = min(nmax, 400)
    E = [deformed_eisenstein(n, tw, tau) for n in range(1, nmax + 1)]
    out = np.empty(mmax + 1, dtype=complex)
    for m in range(mmax + 1):
        acc = 0j
        for n in range(m + 1, nmax + 1):
            acc += E[n - 1] * math.comb(n - 1, m) * z ** (n - 1 - m)
        out[m] = (-1) ** m / z ** (m + 1) - acc
    return out


def p_deformed(k: int, tw: TwistData, z, tau, method: str = "auto"):
    """P_k[theta;phi](z, tau) = ((-1)^{k-1}/(k-1)!) d^{k-1}/dz^{k-1} P_1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if np.ndim(z):
        return np.array([p_deformed(k, tw, zi, tau, method) for zi in np.ravel(z)]).reshape(np.shape(z))
    d = p1_derivatives(z, tw, tau, k - 1, method)
    return complex((-1) ** (k - 1) * d[k - 1])


def p_all(kmax: int, tw: TwistData, z, tau, method: str = "auto") -> np.ndarray:
    """[P_1, ..., P_kmax] at one point."""
    d = p1_derivatives(z, tw, tau, kmax - 1, method)
    return d * (-1.0) ** np.arange(kmax)


def d_coeff(k: int, l: int, tw: TwistData, z, tau, method: str = "auto") -> complex:
    """Coefficient of z1^{k-1} z2^{l-1} in P_1(z + z1 - z2)."""
    if k < 1 or l < 1:
        raise ValueError("k, l must be >= 1")
    return (-1) ** (k + 1) * math.comb(k + l - 2, k - 1) * p_deformed(k + l - 1, tw, z, tau, method)


# -- partition functions ---------------------------------------------------------


def sphere_sewing_det(tw: TwistData, tau, tol: float = 1e-18) -> complex:
    """prod_{l>=1} (1 - theta^{-1} q^{l-1/2-kappa})(1 - theta q^{l-1/2+kappa})."""
    tau = _check_tau(tau)
    k = tw.kappa
    L = int(math.ceil(-math.log(tol) / (2 * math.pi * tau.imag))) + 3
    l = np.arange(1, L + 1)
    f1 = 1 - _q_pow(tau, l - 0.5 - k) / tw.theta
    f2 = 1 - tw.theta * _q_pow(tau, l - 0.5 + k)
    return complex(np.prod(f1 * f2))


def boson_phase(alpha: float, beta: float, conventions: Conventions) -> complex:
    shift = 0.5 if conventions.boson_phase == "printed" else -0.5
    if conventions.boson_phase not in ("printed", "shifted"):
        raise ValueError(f"unknown boson phase reading {conventions.boson_phase!r}")
    return cmath.exp(TWO_PI_I * (alpha + 0.5) * (beta + shift))


def fermion_partition(alpha: float, beta: float, tau, form: str = "product",
                      conventions: Conventions | None = None) -> complex:
    """Twisted free-fermion torus partition function, product or theta (boson) form."""
    conv = conventions or default_conventions()
    tau = _check_tau(tau)
    tw = twist_from_angles(alpha, beta, conv)
    if form == "product":
        k = tw.kappa
        return cmath.exp(TWO_PI_I * tau * (k * k / 2 - 1 / 24)) * sphere_sewing_det(tw, tau)
    if form == "boson":
        a, b = tw.characteristics
        th = theta_char(a, b, 0.0, tau, conv.theta)
        return complex(conv.global_phase) * boson_phase(alpha, beta, conv) * th / eta(tau)
    raise ValueError(f"unknown form {form!r}")


# -- theta products and prime-form cross ratios ---------------------------------


def _pairwise(values: Sequence[complex]):
    v = list(values)
    for i in range(len(v)):
        for k in range(i + 1, len(v)):
            yield i, k, v[i] - v[k]


def theta_block_product(x: Sequence[complex], y: Sequence[complex], m: Sequence[int], n: Sequence[int],
                        tau, convention: str = "paper", zero_tol: float = 1e-300) -> complex:
    if len(x) != len(m) or len(y) != len(n):
        raise ValueError("one weight per point required")
    if sum(m) != sum(n):
        raise ValueError("weights unbalanced: sum(m) != sum(n)")
    tau = _check_tau(tau)

    def th(d):
        return theta_char(0.5, 0.5, d, tau, convention)

    num = 1 + 0j
    for i, xi in enumerate(x):
        for j, yj in enumerate(y):
            num *= th(xi - yj) ** (m[i] * n[j])
    den = 1 + 0j
    for i, k, d in _pairwise(x):
        den *= th(d) ** (m[i] * m[k])
    for j, l, d in _pairwise(y):
        den *= th(d) ** (n[j] * n[l])
    if abs(den) <= zero_tol:
        raise DegenerateConfiguration("degenerate configuration: theta denominator vanishes")
    return num / den


def kn_cross_ratio(x: Sequence[complex], y: Sequence[complex], tau, orientation: str = "printed",
                   convention: str = "paper", zero_tol: float = 1e-300) -> complex:
    """prod_{i<j} K(x_i-x_j) K(y_i-y_j) / prod_{i,j} K(x_i-y_j).

    ``orientation='cauchy'`` uses K(y_j - y_i) in the numerator instead.
    """
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    tau = _check_tau(tau)
    if orientation not in ("printed", "cauchy"):
        raise ValueError(f"unknown orientation {orientation!r}")

    def K(d):
        return prime_form(d, tau, convention)

    num = 1 + 0j
    for _, _, d in _pairwise(x):
        num *= K(d)
    for _, _, d in _pairwise(y):
        num *= K(-d if orientation == "cauchy" else d)
    den = 1 + 0j
    for xi in x:
        for yj in y:
            den *= K(xi - yj)
    if abs(den) <= zero_tol:
        raise DegenerateConfiguration("degenerate configuration: prime form vanishes")
    return num / den
