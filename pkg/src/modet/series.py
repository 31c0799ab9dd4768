"""Exact truncated q-series with a rational leading exponent, plus Bernoulli values.

A :class:`QSeries` stores ``offset`` (the exponent of the first stored
coefficient) and coefficients ``c_0 .. c_N``; ``c_k`` multiplies
``q**(offset + k)`` and everything beyond ``q**(offset + N)`` is unknown.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational as _RationalABC
from typing import Iterable, Sequence

import mpmath

from .config import precision_mode

Rational = Fraction


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, _RationalABC)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"exact coefficient required, got {type(x).__name__}")


@dataclass(frozen=True)
class QSeries:
    offset: Fraction
    coeffs: tuple

    def __init__(self, coeffs: Iterable, offset=0):
        cs = tuple(_frac(c) for c in coeffs)
        if not cs:
            raise ValueError("a QSeries needs at least one coefficient")
        object.__setattr__(self, "coeffs", cs)
        object.__setattr__(self, "offset", _frac(offset))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def top(self) -> Fraction:
        """Highest exponent whose coefficient is known."""
        return self.offset + self.order

    @classmethod
    def one(cls, order: int) -> "QSeries":
        return cls([1] + [0] * order)

    @classmethod
    def monomial(cls, exponent, order: int, coeff=1) -> "QSeries":
        return cls([coeff] + [0] * order, offset=exponent)

    def __repr__(self):
        head = ", ".join(str(c) for c in self.coeffs[:6])
        more = ", ..." if self.order > 5 else ""
        return f"QSeries(offset={self.offset}, order={self.order}, [{head}{more}])"

    def __getitem__(self, exponent) -> Fraction:
        """Coefficient of q**exponent (absolute exponent)."""
        k = _frac(exponent) - self.offset
        if k.denominator != 1 or k < 0:
            return Fraction(0)
        k = int(k)
        if k > self.order:
            raise IndexError(f"q^{exponent} lies beyond the truncation q^{self.top}")
        return self.coeffs[k]

    # -- alignment ---------------------------------------------------------

    def _aligned(self, other: "QSeries"):
        d = other.offset - self.offset
        if d.denominator != 1:
            raise ValueError(
                f"cannot align offsets {self.offset} and {other.offset}: "
                "they differ by a non-integer"
            )
        lo = min(self.offset, other.offset)
        top = min(self.top, other.top)
        n = int(top - lo)
        if n < 0:
            raise ValueError("no overlapping valid range")

        def pad(s):
            shift = int(s.offset - lo)
            out = [Fraction(0)] * (n + 1)
            for i, c in enumerate(s.coeffs):
                j = i + shift
                if j > n:
                    break
                out[j] = c
            return out

        return lo, pad(self), pad(other)

    def truncate(self, order: int) -> "QSeries":
        if order > self.order:
            raise ValueError("cannot extend a truncated series")
        return QSeries(self.coeffs[: order + 1], self.offset)

    def shift(self, exponent) -> "QSeries":
        """Multiply by q**exponent."""
        return QSeries(self.coeffs, self.offset + _frac(exponent))

    def strip(self) -> "QSeries":
        """Drop leading zero coefficients (keeps at least one)."""
        k = 0
        while k < self.order and self.coeffs[k] == 0:
            k += 1
        return QSeries(self.coeffs[k:], self.offset + k)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, QSeries):
            try:
                c = _frac(other)
            except TypeError:
                return NotImplemented
            other = QSeries([c] + [0] * max(0, math.floor(self.top)))
        lo, a, b = self._aligned(other)
        return QSeries([x + y for x, y in zip(a, b)], lo)

    __radd__ = __add__

    def __neg__(self):
        return QSeries([-c for c in self.coeffs], self.offset)

    def __sub__(self, other):
        if isinstance(other, QSeries):
            return self + (-other)
        return self + (-_frac(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, QSeries):
            try:
                c = _frac(other)
            except TypeError:
                return NotImplemented
            return QSeries([c * x for x in self.coeffs], self.offset)
        n = min(self.order, other.order)
        a, b = self.coeffs, other.coeffs
        out = []
        for k in range(n + 1):
            s = Fraction(0)
            for i in range(k + 1):
                ai = a[i]
                if ai:
                    bk = b[k - i]
                    if bk:
                        s += ai * bk
            out.append(s)
        return QSeries(out, self.offset + other.offset)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, QSeries):
            return self * other.invert()
        return self * (1 / _frac(other))

    def invert(self) -> "QSeries":
        c0 = self.coeffs[0]
        if c0 == 0:
            raise ZeroDivisionError("non-invertible series: leading coefficient is zero")
        a = self.coeffs
        inv = [1 / c0]
        for k in range(1, self.order + 1):
            s = sum((a[i] * inv[k - i] for i in range(1, k + 1)), Fraction(0))
            inv.append(-s / c0)
        return QSeries(inv, -self.offset)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer powers of a QSeries are supported")
        if n < 0:
            return self.invert() ** (-n)
        result = QSeries.one(self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def equals(self, other: "QSeries") -> bool:
        """Exact equality on the common range of validity."""
        _, a, b = self._aligned(other)
        return a == b

    # -- serialisation ---------------------------------------------------

    def to_json(self) -> dict:
        return {"offset": _fstr(self.offset), "coeffs": [_fstr(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, data: dict) -> "QSeries":
        return cls([Fraction(c) for c in data["coeffs"]], Fraction(data["offset"]))


def _fstr(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def series_arith(a: QSeries, b: QSeries, op: str) -> QSeries:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def series_invert(a: QSeries) -> QSeries:
    return a.invert()


# -- Bernoulli numbers and polynomials --------------------------------------


@lru_cache(maxsize=None)
def _bernoulli_numbers(nmax: int) -> tuple:
    # B_1 = -1/2, i.e. the coefficients of z/(e^z - 1)
    B = [Fraction(1)]
    for m in range(1, nmax + 1):
        B.append(-sum(math.comb(m + 1, k) * B[k] for k in range(m)) / (m + 1))
    return tuple(B)


def bernoulli_number(n: int) -> Fraction:
    if n < 0:
        raise ValueError("n must be >= 0")
    size = max(32, 1 << (n.bit_length()))
    return _bernoulli_numbers(size)[n]


def bernoulli_poly(n: int, lam):
    """B_n(lam) from z e^{lam z}/(e^z - 1) = sum B_n(lam) z^n/n!.

    Exact for rational ``lam``; float (or complex) arithmetic otherwise.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    exact = isinstance(lam, (int, Fraction))
    x = Fraction(lam) if exact else lam
    total = Fraction(0) if exact else 0.0
    for k in range(n + 1):
        bk = bernoulli_number(k)
        if bk:
            term = math.comb(n, k) * (bk if exact else float(bk))
            total += term * x ** (n - k)
    return total


@lru_cache(maxsize=64)
def bernoulli_over_factorial(nmax: int, lam: float) -> tuple:
    """Floats B_n(lam)/n! for n = 0..nmax, via the product of e^{lam z} and z/(e^z-1)."""
    bn = [float(bernoulli_number(k) / math.factorial(k)) for k in range(nmax + 1)]
    ex = [1.0]
    for k in range(1, nmax + 1):
        ex.append(ex[-1] * lam / k)
    return tuple(sum(ex[n - k] * bn[k] for k in range(n + 1)) for n in range(nmax + 1))


# -- eta and numeric evaluation ----------------------------------------------


def eta_series(order: int) -> QSeries:
    """q^{1/24} prod_{n>=1} (1 - q^n), exact through q^{1/24 + order}."""
    if order < 0:
        raise ValueError("order must be >= 0")
    c = [Fraction(0)] * (order + 1)
    c[0] = Fraction(1)
    for n in range(1, order + 1):
        for k in range(order, n - 1, -1):
            c[k] -= c[k - n]
    return QSeries(c, Fraction(1, 24))


def series_eval(s: QSeries, tau: complex, precision: str | None = None):
    """Evaluate ``s`` at q = exp(2 pi i tau).

    Returns ``(value, tail)`` where ``tail`` estimates the size of the
    discarded terms: the largest stored coefficient magnitude times the
    geometric remainder |q|^(N+1)/(1-|q|), inflated by a polynomial growth
    allowance (N+1)^6 that covers the weight <= 12 forms handled here.
    """
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("tau not in upper half-plane")
    precision = precision or precision_mode()
    absq = math.exp(-2 * math.pi * tau.imag)
    cmax = max(float(abs(c)) for c in s.coeffs) or 1.0
    n = s.order
    tail = cmax * (n + 1) ** 6 * absq ** (float(s.offset) + n + 1) / (1 - absq)
    if precision == "extended":
        with mpmath.workdps(40):
            t = mpmath.mpc(tau.real, tau.imag)
            q = mpmath.exp(2j * mpmath.pi * t)
            acc = mpmath.mpc(0)
            for k, c in enumerate(s.coeffs):
                if c:
                    acc += mpmath.mpf(c.numerator) / c.denominator * q**k
            acc *= mpmath.exp(2j * mpmath.pi * t * mpmath.mpf(s.offset.numerator) / s.offset.denominator)
            return complex(acc), tail
    q = cmath.exp(2j * math.pi * tau)
    acc = 0j
    for c in reversed(s.coeffs):
        acc = acc * q + float(c)
    lead = cmath.exp(2j * math.pi * tau * float(s.offset))
    return acc * lead, tail

