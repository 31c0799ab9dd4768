"""Genus-two sewing: two tori joined by a handle, and one torus sewn to itself.

Infinite sewing matrices are truncated at ``M`` modes per puncture and
indexed puncture-major: row ``(a, k)`` sits at ``a*M + (k-1)``.  Fractional
powers of the sewing parameters use the principal branch.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .classical import eta, log_eta
from .config import Conventions, TruncationPolicy, default_conventions
from .elliptic import (
    TWO_PI_I,
    DegenerateConfiguration,
    boson_phase,
    deformed_eisenstein,
    fermion_partition,
    p_all,
    prime_form,
    theta_char,
    twist_from_angles,
)
from .identities import AS_PRINTED, FIT_CONSTANT, IdentityReport
from .linalg import FredholmResult, det_c, fredholm_det
from .quadrature import laurent_1d, laurent_2d


def _check_xi(xi) -> complex:
    xi = complex(xi)
    if abs(xi * xi + 1) > 1e-14:
        raise ValueError("xi must be +i or -i")
    return xi


def _check_tau(tau, name="tau") -> complex:
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError(f"{name} not in upper half-plane")
    return tau


@dataclass(frozen=True)
class TwoTorusSewing:
    tau1: complex
    tau2: complex
    eps: complex
    alpha1: float = 0.3
    beta1: float = 0.2
    alpha2: float = 0.1
    beta2: float = 0.4
    xi: complex = 1j
    eps_bound: float = 0.05

    def __post_init__(self):
        t1, t2 = _check_tau(self.tau1, "tau1"), _check_tau(self.tau2, "tau2")
        _check_xi(self.xi)
        if abs(self.eps) > self.eps_bound * min(t1.imag, t2.imag):
            raise ValueError("|eps| outside the sewing domain")


@dataclass(frozen=True)
class SelfSewing:
    tau: complex
    w: complex
    rho: complex
    kappa: float = 0.25
    B: int = 1
    xi: complex = 1j
    alpha1: float = 0.3
    beta1: float = 0.2
    alpha2: float = 0.1
    beta2: float = 0.4
    rho_bound: float = 0.01

    def __post_init__(self):
        _check_tau(self.tau)
        _check_xi(self.xi)
        if not (-0.5 < self.kappa < 0.5):
            raise ValueError("kappa must satisfy -1/2 < kappa < 1/2")
        if int(self.B) != self.B or self.B % 2 == 0:
            raise ValueError("B must be an odd integer")
        if abs(self.rho) > self.rho_bound:
            raise ValueError("|rho| outside the sewing domain")
        if abs(theta_char(0.5, 0.5, self.w, self.tau)) < 1e-8:
            raise ValueError("w too close to a lattice point")

    @property
    def theta2(self) -> complex:
        return cmath.exp(-TWO_PI_I * self.alpha2)


def _ppow(base: complex, e: float) -> complex:
    """base**e on the principal branch, with 0**e = 0 for e > 0."""
    if base == 0:
        return 0j if e > 0 else 1 + 0j
    return cmath.exp(e * cmath.log(base))


def _block_builder(X: np.ndarray, M: int, nblocks: int = 2):
    def build(m: int) -> np.ndarray:
        idx = np.concatenate([np.arange(m) + b * M for b in range(nblocks)])
        return X[np.ix_(idx, idx)]
    return build


# -- two-tori matrices -------------------------------------------------------------


@lru_cache(maxsize=64)
def _e_twisted(nmax: int, alpha: float, beta: float, tau: complex, conv: Conventions) -> tuple:
    tw = twist_from_angles(alpha, beta, conv)
    return tuple(deformed_eisenstein(n, tw, tau) for n in range(1, nmax + 1))


@lru_cache(maxsize=64)
def _e_plain(nmax: int, tau: complex) -> tuple:
    """Untwisted deformed-limit E_n, n = 1..nmax, with odd weights exactly zero."""
    tw = twist_from_angles(0, 0)
    return tuple(0j if n % 2 and n > 1 else deformed_eisenstein(n, tw, tau) for n in range(1, nmax + 1))


def _f_matrix(eps: complex, E: Sequence[complex], M: int) -> np.ndarray:
    out = np.zeros((M, M), dtype=complex)
    for k in range(1, M + 1):
        for l in range(1, M + 1):
            out[k - 1, l - 1] = (-1) ** l * _ppow(eps, (k + l - 1) / 2) * math.comb(k + l - 2, k - 1) * E[k + l - 2]
    return out


def _a_matrix(eps: complex, E: Sequence[complex], M: int) -> np.ndarray:
    out = np.zeros((M, M), dtype=complex)
    for k in range(1, M + 1):
        for l in range(1, M + 1):
            c = (k + l - 1) * math.comb(k + l - 2, k - 1) / math.sqrt(k * l)
            out[k - 1, l - 1] = _ppow(eps, (k + l) / 2) * (-1) ** (k + 1) * c * E[k + l - 1]
    return out


_KINDS = ("F", "A", "Q1", "AA", "R", "Dtheta", "Dθ", "G2", "T2")


def build_sewing_matrix(kind: str, cfg, policy: TruncationPolicy | None = None, a: int = 1,
                        conventions: Conventions | None = None) -> np.ndarray:
    """F (per torus ``a``), A (per torus), Q1, AA (= A_1 A_2) for two tori; R, Dtheta, G2, T2 for self-sewing."""
    if kind not in _KINDS:
        raise ValueError(f"unknown sewing matrix {kind!r}")
    policy = policy or TruncationPolicy()
    conv = conventions or default_conventions()
    M = policy.M
    if kind in ("F", "A", "Q1", "AA"):
        if not isinstance(cfg, TwoTorusSewing):
            raise TypeError(f"{kind} needs a TwoTorusSewing configuration")
        if kind == "F":
            tau = complex(cfg.tau1 if a == 1 else cfg.tau2)
            al, be = (cfg.alpha1, cfg.beta1) if a == 1 else (cfg.alpha2, cfg.beta2)
            return _f_matrix(complex(cfg.eps), _e_twisted(2 * M - 1, al, be, tau, conv), M)
        if kind == "A":
            tau = complex(cfg.tau1 if a == 1 else cfg.tau2)
            return _a_matrix(complex(cfg.eps), _e_plain(2 * M, tau), M)
        if kind == "AA":
            return build_sewing_matrix("A", cfg, policy, 1, conv) @ build_sewing_matrix("A", cfg, policy, 2, conv)
        xi = complex(cfg.xi)
        F1 = build_sewing_matrix("F", cfg, policy, 1, conv)
        F2 = build_sewing_matrix("F", cfg, policy, 2, conv)
        Z = np.zeros((M, M), dtype=complex)
        return np.block([[Z, xi * F1], [-xi * F2, Z]])
    if not isinstance(cfg, SelfSewing):
        raise TypeError(f"{kind} needs a SelfSewing configuration")
    if kind == "R":
        return _r_matrix(cfg, M)
    if kind in ("Dtheta", "Dθ"):
        return _dtheta(cfg, M)
    if kind == "G2":
        return selfsew_moments(cfg, M, policy, conv).G
    if kind == "T2":
        return complex(cfg.xi) * selfsew_moments(cfg, M, policy, conv).G @ _dtheta(cfg, M)
    raise ValueError(f"unknown sewing matrix {kind!r}")


def _dtheta(cfg: SelfSewing, M: int) -> np.ndarray:
    t = cfg.theta2
    return np.diag(np.concatenate([np.full(M, 1 / t), np.full(M, -t)]))


def c_coeff(k: int, l: int, E: Sequence[complex]) -> complex:
    return (-1) ** (k + 1) * (k + l - 1) * math.comb(k + l - 2, k - 1) * E[k + l - 1]


def d1_coeff(k: int, l: int, P: Sequence[complex]) -> complex:
    return (-1) ** (k + 1) * (k + l - 1) * math.comb(k + l - 2, k - 1) * P[k + l - 1]


def _r_matrix(cfg: SelfSewing, M: int) -> np.ndarray:
    tau, w, rho = complex(cfg.tau), complex(cfg.w), complex(cfg.rho)
    E = _e_plain(2 * M, tau)
    P = p_all(2 * M, twist_from_angles(0, 0), w, tau)  # P[j-1] = P_j(w)
    out = np.zeros((2 * M, 2 * M), dtype=complex)
    for k in range(1, M + 1):
        for l in range(1, M + 1):
            wgt = -_ppow(rho, (k + l) / 2) / math.sqrt(k * l)
            c = c_coeff(k, l, E)
            out[k - 1, l - 1] = wgt * d1_coeff(k, l, P)
            out[k - 1, M + l - 1] = wgt * c
            out[M + k - 1, l - 1] = wgt * c
            out[M + k - 1, M + l - 1] = wgt * d1_coeff(l, k, P)
    return out


# -- Fredholm determinants and partition functions ---------------------------------


def sewing_det(kind: str, cfg, policy: TruncationPolicy | None = None, root: bool = False,
               conventions: Conventions | None = None) -> FredholmResult:
    """det(I - X) (or its square root) for X in {Q1, AA, R, T2}, estimate |d_M - d_{M/2}|."""
    policy = policy or TruncationPolicy()
    M = policy.M
    if kind == "AA":
        A1 = build_sewing_matrix("A", cfg, policy, 1, conventions)
        A2 = build_sewing_matrix("A", cfg, policy, 2, conventions)
        build = lambda m: A1[:m, :m] @ A2[:m, :m]  # noqa: E731
    else:
        X = build_sewing_matrix(kind, cfg, policy, conventions=conventions)
        build = _block_builder(X, M)
    return fredholm_det(build, M, "sqrt-det" if root else "det")


def theta_genus2(alpha: Sequence[float], beta: Sequence[float], omega, z: Sequence[complex] = (0, 0),
                 tol: float = 1e-17) -> complex:
    """sum_{n in Z^2} exp(i pi (n+a).Omega.(n+a) + (n+a).(z + 2 pi i b)), bare-z convention."""
    Om = np.asarray(omega, dtype=complex)
    if Om.shape != (2, 2):
        raise ValueError("Omega must be 2x2")
    if abs(Om[0, 1] - Om[1, 0]) > 1e-14 * max(1.0, abs(Om[0, 1])):
        raise ValueError("Omega must be symmetric")
    im = Om.imag
    ev = np.linalg.eigvalsh((im + im.T) / 2)
    if ev[0] <= 0:
        raise ValueError("Im Omega not positive definite")
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    zz = np.asarray(z, dtype=complex)
    # Gaussian window around the stationary point of the real part of the exponent
    centre = np.linalg.solve(2 * math.pi * im, zz.real) if np.any(zz.real) else np.zeros(2)
    R = math.sqrt(-math.log(tol) / (math.pi * ev[0])) + 2
    n0 = np.arange(math.floor(centre[0] - a[0] - R), math.ceil(centre[0] - a[0] + R) + 1)
    n1 = np.arange(math.floor(centre[1] - a[1] - R), math.ceil(centre[1] - a[1] + R) + 1)
    N0, N1 = np.meshgrid(n0 + a[0], n1 + a[1], indexing="ij")
    quad = Om[0, 0] * N0 * N0 + 2 * Om[0, 1] * N0 * N1 + Om[1, 1] * N1 * N1
    lin = N0 * (zz[0] + TWO_PI_I * b[0]) + N1 * (zz[1] + TWO_PI_I * b[1])
    return complex(np.exp(1j * math.pi * quad + lin).sum())


def twist_characteristics(alpha: float, beta: float) -> tuple:
    return (0.5 - beta, 0.5 + alpha)


def default_omega(cfg: TwoTorusSewing) -> np.ndarray:
    """Leading-order placeholder period matrix: diag(tau1, tau2) with off-diagonal -eps/(2 pi i)."""
    off = -complex(cfg.eps) / TWO_PI_I
    return np.array([[cfg.tau1, off], [off, cfg.tau2]], dtype=complex)


def z2_partition(cfg: TwoTorusSewing, form: str = "fermion", omega=None,
                 policy: TruncationPolicy | None = None, conventions: Conventions | None = None) -> tuple:
    """(value, convergence estimate) of the genus-two fermion or boson partition function."""
    conv = conventions or default_conventions()
    policy = policy or TruncationPolicy()
    t1, t2 = complex(cfg.tau1), complex(cfg.tau2)
    if form == "fermion":
        z1 = fermion_partition(cfg.alpha1, cfg.beta1, t1, "product", conv)
        z2 = fermion_partition(cfg.alpha2, cfg.beta2, t2, "product", conv)
        d = sewing_det("Q1", cfg, policy, root=True, conventions=conv)
        return z1 * z2 * d.value, abs(z1 * z2) * d.estimate
    if form == "boson":
        if omega is None:
            raise ValueError("boson form needs the genus-two period matrix Omega")
        a1, b1 = twist_characteristics(cfg.alpha1, cfg.beta1)
        a2, b2 = twist_characteristics(cfg.alpha2, cfg.beta2)
        th = theta_genus2((a1, a2), (b1, b2), omega)
        d = sewing_det("AA", cfg, policy, root=True, conventions=conv)
        val = th / (eta(t1) * eta(t2) * d.value)
        return val, abs(val) * d.estimate / max(abs(d.value), 1e-300)
    raise ValueError(f"unknown form {form!r}")


def check_factorization(cfg: TwoTorusSewing, policy: TruncationPolicy | None = None,
                        conventions: Conventions | None = None, tol: float = 1e-9) -> IdentityReport:
    """At eps = 0: fermion Z2 = (product of genus-one boson phases) * boson Z2 with diagonal Omega."""
    conv = conventions or default_conventions()
    policy = policy or TruncationPolicy()
    c0 = TwoTorusSewing(cfg.tau1, cfg.tau2, 0, cfg.alpha1, cfg.beta1, cfg.alpha2, cfg.beta2, cfg.xi)
    omega = np.diag([complex(cfg.tau1), complex(cfg.tau2)])
    ferm, _ = z2_partition(c0, "fermion", None, policy, conv)
    bos, _ = z2_partition(c0, "boson", omega, policy, conv)
    phase = complex(conv.global_phase) ** 2 * boson_phase(cfg.alpha1, cfg.beta1, conv) * boson_phase(
        cfg.alpha2, cfg.beta2, conv)
    rhs = phase * bos
    err = abs(ferm - rhs)
    rel = err / max(abs(ferm), abs(rhs))
    return IdentityReport("z2_factorization", _cfg_params(c0), ferm, rhs, err, rel, None, None, AS_PRINTED,
                          rel <= tol, policy.to_dict())


def check_eta6(cfg: TwoTorusSewing, omega=None, zs: Sequence[complex] | None = None,
               policy: TruncationPolicy | None = None, conventions: Conventions | None = None) -> IdentityReport:
    """eta^6 formula at tau1 = tau2: the eps = 0 factorisation is asserted, the z-scan is only reported."""
    conv = conventions or default_conventions()
    policy = policy or TruncationPolicy()
    if complex(cfg.tau1) != complex(cfg.tau2):
        raise ValueError("the eta^6 formula needs tau1 = tau2")
    sub = check_factorization(cfg, policy, conv)
    tau = complex(cfg.tau1)
    omega = default_omega(cfg) if omega is None else np.asarray(omega, dtype=complex)
    zs = list(zs) if zs is not None else [TWO_PI_I * (u + 0.5 * tau) for u in (0.1, 0.2, 0.3, 0.4)]
    a_half = (cfg.alpha1, 0.5)
    b_half = (cfg.beta1, 0.5)
    th2 = theta_genus2(a_half, b_half, omega)
    dA = sewing_det("AA", cfg, policy, root=True, conventions=conv).value
    dQ = sewing_det("Q1", cfg, policy, root=False, conventions=conv).value
    pref = cmath.exp(TWO_PI_I * (a_half[0] * b_half[0] + a_half[1] * b_half[1]))
    lhs = eta(tau) ** 6
    scan = []
    for z in zs:
        if th2 == 0:
            scan.append({"z": z, "ratio": None})
            continue
        rhs = pref * prime_form(z, tau, conv.theta) ** 4 / th2 * dA * dQ
        scan.append({"z": z, "ratio": lhs / rhs})
    ratios = []
    for m in (policy.M, 2 * policy.M):
        pm = TruncationPolicy(**{**policy.to_dict(), "M": m})
        ratios.append(z2_partition(cfg, "fermion", None, pm, conv)[0] / z2_partition(cfg, "boson", omega, pm, conv)[0])
    notes = {"z_scan": scan, "theta2": th2, "asserted": "eps=0 factorisation only",
             "fermion_boson_ratio": ratios[1], "ratio_M_stability": abs(ratios[0] - ratios[1])}
    return IdentityReport("eta6", {**_cfg_params(cfg), "omega": omega.tolist()}, sub.lhs, sub.rhs, sub.abs_err,
                          sub.rel_err, None, None, AS_PRINTED, sub.passed, policy.to_dict(), notes)


def _cfg_params(cfg) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


# -- self-sewing: the kappa kernel and its moments ---------------------------------


def _theta_outer(a: float, b: float, xs: np.ndarray, ys: np.ndarray, shift: complex, tau: complex,
                 convention: str, tol: float = 1e-17) -> np.ndarray:
    """theta[a;b](x_i - y_j + shift) for all pairs, as a rank-K product over the summation index."""
    scale = 1.0 if convention == "paper" else TWO_PI_I
    X, Y, s = scale * xs, scale * ys, scale * shift
    x0, y0 = X.mean(), Y.mean()
    re = (X.real.min() - Y.real.max() + s.real, X.real.max() - Y.real.min() + s.real)
    width = math.ceil(math.sqrt(-math.log(tol) / (math.pi * tau.imag))) + 2
    lo = math.floor(re[0] / (2 * math.pi * tau.imag) - a) - width
    hi = math.ceil(re[1] / (2 * math.pi * tau.imag) - a) + width
    n = np.arange(lo, hi + 1) + a
    base = np.exp(1j * math.pi * n * n * tau + n * (s + x0 - y0 + TWO_PI_I * b))
    A = np.exp(np.outer(X - x0, n)) * base[None, :]
    Bm = np.exp(-np.outer(n, Y - y0))
    return A @ Bm


def _odd(z, tau, conv):
    return theta_char(0.5, 0.5, z, tau, conv.theta)


@dataclass(frozen=True)
class _Strip:
    """Strip zeta^{sign*kappa} at ``center`` from a kappa-power on a quadrature circle."""
    center: complex
    sign: int


def _kappa_power(ratio: np.ndarray, zeta_nodes: np.ndarray | None, strip: _Strip | None, kappa: float) -> np.ndarray:
    if strip is None:
        return np.exp(kappa * np.log(ratio))
    g = ratio / zeta_nodes ** strip.sign
    g0 = g.mean()
    return np.exp(kappa * (cmath.log(g0) + np.log(g / g0)))


def skappa_grid(xs, ys, cfg: SelfSewing, conv: Conventions, xstrip: _Strip | None = None,
                ystrip: _Strip | None = None) -> np.ndarray:
    """S_kappa(x_i, y_j), half-differentials dropped; stripped factors when on a puncture circle."""
    xs = np.atleast_1d(np.asarray(xs, dtype=complex))
    ys = np.atleast_1d(np.asarray(ys, dtype=complex))
    tau, w, k = complex(cfg.tau), complex(cfg.w), cfg.kappa
    X = _odd(xs - w, tau, conv) / _odd(xs, tau, conv)
    Y = _odd(ys, tau, conv) / _odd(ys - w, tau, conv)
    Bx = _kappa_power(X, xs - xstrip.center if xstrip else None, xstrip, k)
    By = _kappa_power(Y, ys - ystrip.center if ystrip else None, ystrip, k)
    a1, b1 = cfg.alpha1, cfg.beta1
    num = _theta_outer(a1, b1, xs, ys, k * w, tau, conv.theta)
    den = theta_char(a1, b1, k * w, tau, conv.theta) * (-1j / eta(tau) ** 3) * _theta_outer(
        0.5, 0.5, xs, ys, 0.0, tau, conv.theta)
    if np.any(np.abs(den) < 1e-300):
        raise DegenerateConfiguration("degenerate configuration: S_kappa denominator vanishes")
    return Bx[:, None] * By[None, :] * num / den


def szego_kappa(x: complex, y: complex, cfg: SelfSewing, conventions: Conventions | None = None) -> complex:
    conv = conventions or default_conventions()
    return complex(skappa_grid([x], [y], cfg, conv)[0, 0])


def punctures(cfg: SelfSewing, conv: Conventions) -> tuple:
    w = complex(cfg.w)
    if conv.puncture_order == "w0":
        return (w, 0j)
    if conv.puncture_order == "0w":
        return (0j, w)
    raise ValueError(f"unknown puncture order {conv.puncture_order!r}")


def _x_strip(center: complex, cfg: SelfSewing) -> _Strip:
    # (theta(x-w)/theta(x)) vanishes at x = w and has a pole at x = 0
    return _Strip(center, 1 if center == complex(cfg.w) else -1)


def _y_strip(center: complex, cfg: SelfSewing) -> _Strip:
    # (theta(y)/theta(y-w)) vanishes at y = 0 and has a pole at y = w
    return _Strip(center, -1 if center == complex(cfg.w) else 1)


def _radii(cfg: SelfSewing, policy: TruncationPolicy) -> tuple:
    s = math.sqrt(abs(cfg.rho))
    return policy.r1_factor * s, policy.r2_factor * s


@dataclass(frozen=True)
class SelfSewMoments:
    G: np.ndarray
    M: int


@lru_cache(maxsize=32)
def selfsew_moments(cfg: SelfSewing, M: int, policy: TruncationPolicy, conv: Conventions) -> SelfSewMoments:
    """G^(2)_{ab}(k, l) = rho^{(k+l-1)/2} [x^{k-1} y^{l-1}] of S_kappa at (P_abar, P_b)."""
    G = np.zeros((2 * M, 2 * M), dtype=complex)
    if cfg.rho == 0:
        return SelfSewMoments(G, M)
    P = punctures(cfg, conv)
    r1, r2 = _radii(cfg, policy)
    rho = complex(cfg.rho)
    kk = np.arange(1, M + 1)
    wgt = np.array([[_ppow(rho, (k + l - 1) / 2) for l in kk] for k in kk])
    for a in range(2):
        cx = P[1 - a]
        for b in range(2):
            cy = P[b]
            xs_strip, ys_strip = _x_strip(cx, cfg), _y_strip(cy, cfg)
            f = lambda xs, ys: skappa_grid(xs, ys, cfg, conv, xs_strip, ys_strip)  # noqa: E731
            mom = laurent_2d(f, cx, r1, cy, r2, M, M, policy.n_quad, policy.n_quad_max, policy.quad_tol)
            G[a * M:(a + 1) * M, b * M:(b + 1) * M] = wgt * mom
    return SelfSewMoments(G, M)


def h_rows(xs: Sequence[complex], cfg: SelfSewing, M: int, policy: TruncationPolicy, conv: Conventions) -> np.ndarray:
    """H(i, (a,k)) = rho^{(k-1/2)/2} [y^{k-1}] S_kappa(x_i, y) at y = P_a."""
    xs = np.atleast_1d(np.asarray(xs, dtype=complex))
    H = np.zeros((len(xs), 2 * M), dtype=complex)
    if cfg.rho == 0:
        return H
    P = punctures(cfg, conv)
    _, r2 = _radii(cfg, policy)
    wgt = np.array([_ppow(complex(cfg.rho), (k - 0.5) / 2) for k in range(1, M + 1)])
    for a in range(2):
        strip = _y_strip(P[a], cfg)
        f = lambda ys: skappa_grid(xs, ys, cfg, conv, None, strip)  # noqa: E731
        H[:, a * M:(a + 1) * M] = wgt * laurent_1d(f, P[a], r2, M, policy.n_quad, policy.n_quad_max * 4,
                                                   policy.quad_tol)
    return H


def hbar_rows(ys: Sequence[complex], cfg: SelfSewing, M: int, policy: TruncationPolicy,
              conv: Conventions) -> np.ndarray:
    """Hbar(j, (b,l)) = rho^{(l-1/2)/2} [x^{l-1}] S_kappa(x, y_j) at x = P_bbar."""
    ys = np.atleast_1d(np.asarray(ys, dtype=complex))
    Hb = np.zeros((len(ys), 2 * M), dtype=complex)
    if cfg.rho == 0:
        return Hb
    P = punctures(cfg, conv)
    r1, _ = _radii(cfg, policy)
    wgt = np.array([_ppow(complex(cfg.rho), (l - 0.5) / 2) for l in range(1, M + 1)])
    for b in range(2):
        cx = P[1 - b]
        strip = _x_strip(cx, cfg)
        f = lambda xs: skappa_grid(xs, ys, cfg, conv, strip, None).T  # noqa: E731
        Hb[:, b * M:(b + 1) * M] = wgt * laurent_1d(f, cx, r1, M, policy.n_quad, policy.n_quad_max * 4,
                                                    policy.quad_tol)
    return Hb


@dataclass
class SelfSewBlocks:
    G2: np.ndarray
    T2: np.ndarray
    H: np.ndarray
    Hbar: np.ndarray
    Skn: np.ndarray
    D: np.ndarray


def build_selfsew_blocks(cfg: SelfSewing, xs: Sequence[complex], ys: Sequence[complex],
                         policy: TruncationPolicy | None = None, conventions: Conventions | None = None,
                         M: int | None = None) -> SelfSewBlocks:
    policy = policy or TruncationPolicy()
    conv = conventions or default_conventions()
    M = M or policy.M
    G = selfsew_moments(cfg, M, policy, conv).G
    D = _dtheta(cfg, M)
    T = complex(cfg.xi) * G @ D
    H = h_rows(xs, cfg, M, policy, conv)
    Hb = hbar_rows(ys, cfg, M, policy, conv)
    Skn = skappa_grid(xs, ys, cfg, conv)
    return SelfSewBlocks(G, T, H, Hb, Skn, D)


class IllConditioned(RuntimeError):
    pass


def _resolvent(T: np.ndarray, max_cond: float = 1e10) -> np.ndarray:
    A = np.eye(T.shape[0]) - T
    c = np.linalg.cond(A)
    if not np.isfinite(c) or c > max_cond:
        raise IllConditioned(f"ill-conditioned resolvent: cond(I - T) = {c:.3g}")
    return A


def szego_matrix(cfg: SelfSewing, xs, ys, policy: TruncationPolicy | None = None,
                 conventions: Conventions | None = None, M: int | None = None) -> np.ndarray:
    """S^(2)(x_i, y_j) = S_kappa + xi h(x_i) D (I - T)^{-1} hbar(y_j)^t at truncation M."""
    bl = build_selfsew_blocks(cfg, xs, ys, policy, conventions, M)
    A = _resolvent(bl.T2)
    corr = complex(cfg.xi) * (bl.H @ bl.D) @ np.linalg.solve(A, bl.Hbar.T)
    return bl.Skn + corr


def szego_full(x: complex, y: complex, cfg: SelfSewing, policy: TruncationPolicy | None = None,
               conventions: Conventions | None = None) -> tuple:
    """(S^(2)(x, y) at truncation M, |S_M - S_2M|)."""
    policy = policy or TruncationPolicy()
    v1 = complex(szego_matrix(cfg, [x], [y], policy, conventions)[0, 0])
    v2 = complex(szego_matrix(cfg, [x], [y], policy, conventions, 2 * policy.M)[0, 0])
    return v1, abs(v1 - v2)


def szego_moment(k: int, l: int, cfg: SelfSewing, policy: TruncationPolicy | None = None,
                 conventions: Conventions | None = None, base: complex | None = None,
                 radius: float = 0.3) -> complex:
    """Coefficient of s^k t^l in S^(2)(p + s, p + t) - 1/(s - t) around a base point p."""
    policy = policy or TruncationPolicy()
    conv = conventions or default_conventions()
    tau = complex(cfg.tau)
    p = TWO_PI_I * (0.75 + 0.5 * tau) if base is None else complex(base)
    return szego_moment_table(max(k, l) + 1, cfg, policy, conv, p, radius)[k, l]


@lru_cache(maxsize=16)
def szego_moment_table(K: int, cfg: SelfSewing, policy: TruncationPolicy, conv: Conventions, p: complex,
                       radius: float) -> np.ndarray:
    def f(xs, ys):
        # the two circles are offset by half a node so that s != t
        ys = p + (ys - p) * cmath.exp(1j * math.pi / len(ys))
        S = szego_matrix(cfg, xs, ys, policy, conv)
        return (S - 1 / (xs[:, None] - ys[None, :])) * 1.0

    n = policy.n_quad
    while n < 4 * K:
        n *= 2
    prev = None
    while True:
        xs = p + radius * np.exp(2j * math.pi * np.arange(n) / n)
        ys = p + radius * np.exp(2j * math.pi * (np.arange(n) + 0.5) / n)
        S = szego_matrix(cfg, xs, ys, policy, conv) - 1 / (xs[:, None] - ys[None, :])
        raw = np.fft.fft2(S) / (n * n)
        # undo the half-node rotation of the t circle
        rot = np.exp(-1j * math.pi * np.arange(K) / n)
        b = raw[:K, :K] * rot[None, :]
        if prev is not None and np.max(np.abs(b - prev)) <= 1e-11 * max(1.0, float(np.max(np.abs(raw)))):
            kk = np.arange(K, dtype=float)
            return b * radius ** (-kk[:, None]) * radius ** (-kk[None, :])
        if 2 * n > policy.n_quad_max:
            raise RuntimeError("moment extraction did not converge")
        prev = b
        n *= 2


# -- the block determinant identity and the kernel consistency check (prop3) -----


def sample_near_punctures(n: int, cfg: SelfSewing, seed, distance: float | None = None,
                          min_separation: float | None = None, conventions: Conventions | None = None) -> tuple:
    """n x-points and n y-points on circles of radius ``distance`` around alternating punctures.

    The default radius 2 sqrt|rho| keeps the points outside the excised discs while
    leaving the truncation error (about (|rho|/distance^2)^M) visible at M = 16.
    """
    conv = conventions or default_conventions()
    if distance is None:
        distance = 2 * math.sqrt(abs(cfg.rho)) if cfg.rho != 0 else 0.1
    if min_separation is None:
        min_separation = 0.6 * distance
    P = punctures(cfg, conv)
    rng = np.random.default_rng(seed)
    pts: list = []
    tries = 0
    while len(pts) < 2 * n:
        tries += 1
        if tries > 10000:
            raise ValueError("separation infeasible")
        c = P[len(pts) % 2]
        z = c + distance * cmath.exp(2j * math.pi * rng.random())
        if all(abs(z - q) >= min_separation for q in pts):
            pts.append(z)
    return pts[:n], pts[n:]


def block_matrix(cfg: SelfSewing, xs, ys, policy: TruncationPolicy | None = None,
                 conventions: Conventions | None = None, M: int | None = None) -> np.ndarray:
    bl = build_selfsew_blocks(cfg, xs, ys, policy, conventions, M)
    xi = complex(cfg.xi)
    return np.block([[bl.Skn, -xi * bl.H @ bl.D], [bl.Hbar.T, np.eye(bl.T2.shape[0]) - bl.T2]])


def _reference_M(policy: TruncationPolicy) -> int:
    return max(64, 2 * policy.M)


def block_det_sides(cfg: SelfSewing, xs, ys, policy: TruncationPolicy | None = None,
                    conventions: Conventions | None = None, M_ref: int | None = None) -> tuple:
    """(det of the bordered matrix at M, det S^(2)_n * det(I - T) at the reference truncation)."""
    policy = policy or TruncationPolicy()
    conv = conventions or default_conventions()
    M_ref = M_ref or _reference_M(policy)
    lhs = det_c(block_matrix(cfg, xs, ys, policy, conv))
    S2 = szego_matrix(cfg, xs, ys, policy, conv, M_ref)
    T = build_sewing_matrix("T2", cfg, TruncationPolicy(**{**policy.to_dict(), "M": M_ref}), conventions=conv)
    rhs = det_c(S2) * det_c(np.eye(T.shape[0]) - T)
    return lhs, rhs


def check_block_det(n: int, cfg: SelfSewing, policy: TruncationPolicy | None = None, seed=0, points=None,
                    conventions: Conventions | None = None, tol: float = 1e-6,
                    M_ref: int | None = None) -> IdentityReport:
    policy = policy or TruncationPolicy()
    conv = conventions or default_conventions()
    xs, ys = points if points is not None else sample_near_punctures(n, cfg, seed, conventions=conv)
    lhs, rhs = block_det_sides(cfg, xs, ys, policy, conv, M_ref)
    err = abs(lhs - rhs)
    rel = err / max(abs(lhs), abs(rhs))
    params = {**_cfg_params(cfg), "n": n, "seed": seed, "M_ref": M_ref or _reference_M(policy)}
    return IdentityReport("block_det", params, lhs, rhs, err, rel, None, None, AS_PRINTED, rel <= tol,
                          policy.to_dict(), {"x": list(xs), "y": list(ys)})


def oracle_theta_ratio(cfg: SelfSewing, policy: TruncationPolicy, conv: Conventions, M_ref: int) -> complex:
    """Genus-two theta over genus-one theta(kappa w) from the sewing determinants (principal branch)."""
    tau, w, rho, k = complex(cfg.tau), complex(cfg.w), complex(cfg.rho), cfg.kappa
    pol = TruncationPolicy(**{**policy.to_dict(), "M": M_ref})
    dT = sewing_det("T2", cfg, pol, conventions=conv).value
    dR = sewing_det("R", cfg, pol, root=True, conventions=conv).value
    K = prime_form(w, tau, conv.theta)
    return cmath.exp(TWO_PI_I * cfg.beta2 * k) * _ppow(cmath.exp(1j * math.pi * cfg.B) * rho / K ** 2,
                                                        k * k / 2) * dT * dR


def prop3_sides(cfg: SelfSewing, xs, ys, policy: TruncationPolicy, conv: Conventions,
                M_ref: int | None = None) -> tuple:
    tau, w, rho, k = complex(cfg.tau), complex(cfg.w), complex(cfg.rho), cfg.kappa
    M_ref = M_ref or _reference_M(policy)
    ratio = oracle_theta_ratio(cfg, policy, conv, M_ref)
    block, _ = block_det_sides(cfg, xs, ys, policy, conv, M_ref)
    detS = det_c(szego_matrix(cfg, xs, ys, policy, conv, M_ref))
    dR = sewing_det("R", cfg, policy, root=True, conventions=conv).value
    odd_w = _ppow(theta_char(0.5, 0.5, w, tau, conv.theta), k * k)
    # (-e^{i pi B} rho)^{kappa^2/2} taken formally: exp(kappa^2/2 (i pi (B+1) + Log rho))
    formal = cmath.exp(k * k / 2 * (1j * math.pi * (cfg.B + 1) + cmath.log(rho))) if rho != 0 else (
        1 + 0j if k == 0 else 0j)
    num = cmath.exp(-TWO_PI_I * cfg.beta2 * k) * ratio * odd_w * detS
    den = formal * dR * block
    lhs = cmath.exp(3 * k * k * log_eta(tau))
    return lhs, num / den


def check_prop3(cfg: SelfSewing, n: int = 1, policy: TruncationPolicy | None = None, mode: str | None = None,
                seed=0, n_samples: int = 5, conventions: Conventions | None = None,
                tol: float | None = None) -> IdentityReport:
    policy = policy or TruncationPolicy()
    conv = conventions or default_conventions()
    mode = mode or (AS_PRINTED if cfg.kappa == 0 else FIT_CONSTANT)
    params = {**_cfg_params(cfg), "n": n, "seed": seed}
    if mode == AS_PRINTED:
        tol = policy.tol if tol is None else tol
        xs, ys = sample_near_punctures(n, cfg, [seed, 0], conventions=conv)
        lhs, rhs = prop3_sides(cfg, xs, ys, policy, conv)
        err = abs(lhs - rhs)
        rel = err / max(abs(lhs), abs(rhs))
        return IdentityReport("prop3", params, lhs, rhs, err, rel, None, None, mode, rel <= tol, policy.to_dict())
    tol = 1e-5 if tol is None else tol
    runs = []
    for s in range(n_samples):
        xs, ys = sample_near_punctures(n, cfg, [seed, s], conventions=conv)
        runs.append(prop3_sides(cfg, xs, ys, policy, conv))
    ratios = np.array([L / R for L, R in runs])
    c = complex(np.median(ratios.real), np.median(ratios.imag))
    disp = float(np.max(np.abs(ratios - c)) / abs(c))
    errs = [abs(L - c * R) for L, R in runs]
    rels = [e / abs(L) for e, (L, _) in zip(errs, runs)]
    return IdentityReport("prop3", params, runs[0][0], runs[0][1], max(errs), max(rels), c, disp, mode,
                          disp <= tol, policy.to_dict(), {"n_samples": n_samples, "B": cfg.B})


def calibrate_puncture_order(cfg: SelfSewing, conventions: Conventions | None = None,
                             policy: TruncationPolicy | None = None, seed=0) -> dict:
    """Scan which puncture carries label 1; ties keep the base convention."""
    base = conventions or default_conventions()
    order = [base.puncture_order] + [o for o in ("w0", "0w") if o != base.puncture_order]
    scores = {}
    for o in order:
        r = check_prop3(cfg, policy=policy, seed=seed, conventions=base.with_(puncture_order=o))
        scores[o] = r.dispersion if r.dispersion is not None else r.rel_err
    winner = order[0]
    for o in order[1:]:
        if scores[o] < 0.5 * scores[winner]:
            winner = o
    return {"scores": scores, "winner": winner}
