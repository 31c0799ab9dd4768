"""Eisenstein series, Dedekind eta and the discriminant, exactly and numerically."""

from __future__ import annotations

import cmath
import math
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import mpmath

from .config import TruncationPolicy, precision_mode
from .series import QSeries, bernoulli_number, eta_series


class Normalization(str, Enum):
    STANDARD = "standard"
    DEFORMED_LIMIT = "deformed-limit"


def _norm(norm) -> Normalization:
    return Normalization(norm)


@lru_cache(maxsize=None)
def divisor_sums(power: int, order: int) -> tuple:
    """sigma_power(r) for r = 0..order (index 0 unused, set to 0)."""
    sig = [0] * (order + 1)
    for d in range(1, order + 1):
        dp = d**power
        for m in range(d, order + 1, d):
            sig[m] += dp
    return tuple(sig)


def eisenstein_series(n: int, order: int, norm=Normalization.STANDARD) -> QSeries:
    """E_n through q^order.

    ``standard``: 1 - (2n/B_n) sum sigma_{n-1}(r) q^r.
    ``deformed-limit``: -B_n/n! + (2/(n-1)!) sum sigma_{n-1}(r) q^r, the
    untwisted limit of the deformed Eisenstein series.
    """
    if n <= 0:
        raise ValueError("weight must be a positive even integer")
    if n % 2:
        raise ValueError(f"E_{n} with odd weight is identically zero; use modular_eval")
    norm = _norm(norm)
    sig = divisor_sums(n - 1, order)
    bn = bernoulli_number(n)
    if norm is Normalization.STANDARD:
        c0, c = Fraction(1), Fraction(-2 * n) / bn
    else:
        c0, c = -bn / math.factorial(n), Fraction(2, math.factorial(n - 1))
    return QSeries([c0] + [c * sig[r] for r in range(1, order + 1)])


def discriminant_series(order: int) -> QSeries:
    """q prod (1-q^n)^24 with coefficients through the absolute power q^order."""
    if order < 1:
        raise ValueError("order must be >= 1")
    return eta_series(order - 1) ** 24


# -- numeric evaluation ---------------------------------------------------------


def log_eta(tau: complex) -> complex:
    """Analytic logarithm of eta: i pi tau/12 + sum log(1 - q^n)."""
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("tau not in upper half-plane")
    q = cmath.exp(2j * math.pi * tau)
    acc = 1j * math.pi * tau / 12
    qn = q
    while abs(qn) > 1e-18:
        acc += cmath.log(1 - qn)
        qn *= q
    return acc


def eta(tau: complex) -> complex:
    """Dedekind eta via Euler's pentagonal series."""
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("tau not in upper half-plane")
    q = cmath.exp(2j * math.pi * tau)
    s = 1.0 + 0j
    k = 1
    while True:
        e1 = k * (3 * k - 1) // 2
        if abs(q) ** e1 < 1e-18:
            break
        sign = -1 if k % 2 else 1
        s += sign * (q**e1 + q ** (e1 + k))
        k += 1
    return cmath.exp(2j * math.pi * tau / 24) * s


def _eisenstein_numeric(n: int, tau: complex, norm: Normalization) -> complex:
    q = cmath.exp(2j * math.pi * tau)
    bn = float(bernoulli_number(n))
    s = 0j
    r = 1
    qr = q
    while True:
        term = r ** (n - 1) * qr / (1 - qr)
        s += term
        if abs(term) < 1e-18 * max(1.0, abs(s)) and r > 2:
            break
        r += 1
        qr *= q
    if norm is Normalization.STANDARD:
        return 1 - 2 * n / bn * s
    return -bn / math.factorial(n) + 2 / math.factorial(n - 1) * s


def _eval_extended(name: str, n: int, tau: complex, norm: Normalization) -> complex:
    with mpmath.workdps(40):
        t = mpmath.mpc(tau.real, tau.imag)
        q = mpmath.exp(2j * mpmath.pi * t)
        if name in ("eta", "delta"):
            e = mpmath.exp(2j * mpmath.pi * t / 24) * mpmath.qp(q)
            return complex(e if name == "eta" else e**24)
        s = mpmath.nsum(lambda r: r ** (n - 1) * q**r / (1 - q**r), [1, mpmath.inf])
        bn = mpmath.bernoulli(n)
        if norm is Normalization.STANDARD:
            return complex(1 - 2 * n / bn * s)
        return complex(-bn / mpmath.factorial(n) + 2 / mpmath.factorial(n - 1) * s)


def modular_eval(
    name: str,
    tau: complex,
    norm=Normalization.STANDARD,
    policy: TruncationPolicy | None = None,
    n: int | None = None,
):
    """Numeric value of ``eta``, ``delta`` or ``eisenstein`` (weight ``n``) at tau.

    Returns ``(value, tail)``; the sums are run until terms fall below 1e-18,
    so ``tail`` is that stopping threshold scaled by the value.
    """
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("tau not in upper half-plane")
    norm = _norm(norm)
    if name == "eisenstein":
        if n is None or n <= 0:
            raise ValueError("eisenstein needs a positive weight n")
        if n % 2:
            return 0j, 0.0
    elif name not in ("eta", "delta"):
        raise ValueError(f"unknown modular object {name!r}")
    if precision_mode() == "extended":
        v = _eval_extended(name, n or 0, tau, norm)
        return v, 1e-30 * abs(v)
    if name == "eta":
        v = eta(tau)
    elif name == "delta":
        v = eta(tau) ** 24
    else:
        v = _eisenstein_numeric(n, tau, norm)
    return v, 1e-16 * max(1.0, abs(v))


def delta_power(zeta, tau: complex) -> complex:
    """Delta(tau)**zeta on the branch continuous in tau: exp(24 zeta log eta)."""
    return cmath.exp(24 * zeta * log_eta(tau))
