"""Exact scalar and series arithmetic.

Every quantity in the workbench is a fraction with arbitrary-precision
integer parts; there is no floating point anywhere in the pipeline.
Series are truncated at an explicit order and all ring operations track
that order, so a residual of zero is a proof of the identity up to the
stated order rather than a numerical coincidence.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

Scalar = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


def sc(x) -> Scalar:
    """Coerce ints, strings like '3/4', or Fractions to an exact Scalar."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise InvalidType(f"cannot build an exact scalar from {type(x).__name__}")


class ZeroConstantTerm(ArithmeticError):
    """Inversion of a series whose constant term vanishes."""


class BadConstantTerm(ArithmeticError):
    """log needs constant term 1, exp needs constant term 0."""


class InvalidType(TypeError):
    """A non-exact scalar (e.g. float) leaked into the pipeline."""


class NomeOutOfRange(ValueError):
    """|q| >= 1 or a degenerate parameter where a nome is required."""


class ClosureViolation(ValueError):
    """A fractional power was requested outside the stored closure."""


class ParameterMismatch(ValueError):
    """Two objects built over different parameter points were combined."""


def exact_sqrt(x: Scalar) -> Scalar:
    """Rational square root of a rational, or ClosureViolation."""
    x = sc(x)
    if x < 0:
        raise ClosureViolation(f"{x} has no rational square root")
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn != n or rd * rd != d:
        raise ClosureViolation(f"{x} is not a perfect rational square")
    return Fraction(rn, rd)


class TruncatedSeries:
    """Power series in one formal variable, exact coefficients, hard order cap.

    coeffs[k] is the coefficient of x^k; len(coeffs) == order + 1.
    """

    __slots__ = ("order", "coeffs")

    def __init__(self, order: int, coeffs: Sequence[Scalar]):
        if order < 0:
            raise ValueError("order must be >= 0")
        cs = list(coeffs)
        if len(cs) > order + 1:
            cs = cs[: order + 1]
        for c in cs:
            if not isinstance(c, Fraction):
                raise InvalidType("series coefficients must be exact Scalars")
        cs += [ZERO] * (order + 1 - len(cs))
        self.order = order
        self.coeffs = tuple(cs)

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value: Scalar, order: int) -> "TruncatedSeries":
        return TruncatedSeries(order, [sc(value)])

    @staticmethod
    def one(order: int) -> "TruncatedSeries":
        return TruncatedSeries(order, [ONE])

    @staticmethod
    def zero(order: int) -> "TruncatedSeries":
        return TruncatedSeries(order, [])

    @staticmethod
    def x(order: int) -> "TruncatedSeries":
        return TruncatedSeries(order, [ZERO, ONE])

    @staticmethod
    def from_coeff_fn(order: int, fn) -> "TruncatedSeries":
        return TruncatedSeries(order, [sc(fn(k)) for k in range(order + 1)])

    # -- ring ops -----------------------------------------------------

    def _common(self, other: "TruncatedSeries") -> int:
        return min(self.order, other.order)

    def __add__(self, other):
        if isinstance(other, Fraction):
            other = TruncatedSeries.constant(other, self.order)
        n = self._common(other)
        return TruncatedSeries(n, [self.coeffs[k] + other.coeffs[k] for k in range(n + 1)])

    def __sub__(self, other):
        if isinstance(other, Fraction):
            other = TruncatedSeries.constant(other, self.order)
        n = self._common(other)
        return TruncatedSeries(n, [self.coeffs[k] - other.coeffs[k] for k in range(n + 1)])

    def __neg__(self):
        return TruncatedSeries(self.order, [-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, Fraction):
            return self.scale(other)
        n = self._common(other)
        a, b = self.coeffs, other.coeffs
        out = [ZERO] * (n + 1)
        for i in range(n + 1):
            ai = a[i]
            if ai == 0:
                continue
            for j in range(n + 1 - i):
                bj = b[j]
                if bj != 0:
                    out[i + j] += ai * bj
        return TruncatedSeries(n, out)

    __rmul__ = __mul__

    def scale(self, k: Scalar) -> "TruncatedSeries":
        k = sc(k)
        return TruncatedSeries(self.order, [k * c for c in self.coeffs])

    def inverse(self) -> "TruncatedSeries":
        a = self.coeffs
        if a[0] == 0:
            raise ZeroConstantTerm("cannot invert a series with zero constant term")
        n = self.order
        inv0 = ONE / a[0]
        out = [inv0] + [ZERO] * n
        for k in range(1, n + 1):
            s = ZERO
            for j in range(1, k + 1):
                if a[j] != 0:
                    s += a[j] * out[k - j]
            out[k] = -inv0 * s
        return TruncatedSeries(n, out)

    def log(self) -> "TruncatedSeries":
        a = self.coeffs
        if a[0] != 1:
            raise BadConstantTerm("log requires constant term 1")
        n = self.order
        out = [ZERO] * (n + 1)
        for k in range(1, n + 1):
            s = Fraction(k) * a[k]
            for j in range(1, k):
                s -= Fraction(j) * out[j] * a[k - j]
            out[k] = s / k
        return TruncatedSeries(n, out)

    def exp(self) -> "TruncatedSeries":
        a = self.coeffs
        if a[0] != 0:
            raise BadConstantTerm("exp requires constant term 0")
        n = self.order
        out = [ONE] + [ZERO] * n
        for k in range(1, n + 1):
            s = ZERO
            for j in range(1, k + 1):
                if a[j] != 0:
                    s += Fraction(j) * a[j] * out[k - j]
            out[k] = s / k
        return TruncatedSeries(n, out)

    def pow_int(self, e: int) -> "TruncatedSeries":
        if e == 0:
            return TruncatedSeries.one(self.order)
        base = self if e > 0 else self.inverse()
        out = TruncatedSeries.one(self.order)
        for _ in range(abs(e)):
            out = out * base
        return out

    def substitute_scaled(self, sigma: Scalar) -> "TruncatedSeries":
        """x -> sigma * x, exactly."""
        sigma = sc(sigma)
        out, p = [], ONE
        for c in self.coeffs:
            out.append(c * p)
            p *= sigma
        return TruncatedSeries(self.order, out)

    def truncate(self, order: int) -> "TruncatedSeries":
        if order >= self.order:
            return self
        return TruncatedSeries(order, self.coeffs[: order + 1])

    # -- queries ------------------------------------------------------

    def __getitem__(self, k: int) -> Scalar:
        if 0 <= k <= self.order:
            return self.coeffs[k]
        return ZERO

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def is_one(self) -> bool:
        return self.coeffs[0] == 1 and all(c == 0 for c in self.coeffs[1:])

    def max_abs(self) -> Scalar:
        m = ZERO
        for c in self.coeffs:
            a = -c if c < 0 else c
            if a > m:
                m = a
        return m

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        n = self._common(other)
        return all(self.coeffs[k] == other.coeffs[k] for k in range(n + 1))

    def __hash__(self):
        return hash((self.order, self.coeffs))

    def __repr__(self):
        head = ", ".join(str(c) for c in self.coeffs[:6])
        tail = ", ..." if self.order > 5 else ""
        return f"TruncatedSeries(order={self.order}, [{head}{tail}])"


class GLaurent:
    """Generalized Laurent element x^exponent * body, body constant term nonzero.

    The zero element is represented with body=None.
    """

    __slots__ = ("exponent", "body")

    def __init__(self, exponent: int, body: TruncatedSeries | None):
        if body is not None:
            if body.coeffs[0] == 0:
                k = next((i for i, c in enumerate(body.coeffs) if c != 0), None)
                if k is None:
                    body = None
                else:
                    exponent += k
                    body = TruncatedSeries(body.order - k, body.coeffs[k:])
        self.exponent = exponent
        self.body = body

    @staticmethod
    def zero() -> "GLaurent":
        return GLaurent(0, None)

    def is_zero(self) -> bool:
        return self.body is None

    def __mul__(self, other: "GLaurent") -> "GLaurent":
        if self.is_zero() or other.is_zero():
            return GLaurent.zero()
        return GLaurent(self.exponent + other.exponent, self.body * other.body)

    def inverse(self) -> "GLaurent":
        if self.is_zero():
            raise ZeroConstantTerm("zero GLaurent has no inverse")
        return GLaurent(-self.exponent, self.body.inverse())

    def coeff(self, k: int) -> Scalar:
        if self.is_zero():
            return ZERO
        return self.body[k - self.exponent]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GLaurent):
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return self.is_zero() and other.is_zero()
        return self.exponent == other.exponent and self.body == other.body

    def __hash__(self):
        return hash((self.exponent, self.body))

    def __repr__(self):
        return f"GLaurent(x^{self.exponent} * {self.body!r})"


class BiSeriesWindow:
    """Finite window of a formal bi-distribution sum_{m,n} c[m,n] z^m w^n.

    Entries outside |m| <= bound, |n| <= bound are out of window; reads
    return 0, writes raise.
    """

    __slots__ = ("bound", "data")

    def __init__(self, bound: int):
        self.bound = bound
        self.data: dict[tuple[int, int], Scalar] = {}

    def in_window(self, m: int, n: int) -> bool:
        return abs(m) <= self.bound and abs(n) <= self.bound

    def get(self, m: int, n: int) -> Scalar:
        return self.data.get((m, n), ZERO)

    def add(self, m: int, n: int, value: Scalar) -> None:
        if not self.in_window(m, n):
            raise IndexError(f"entry ({m},{n}) outside window bound {self.bound}")
        v = self.data.get((m, n), ZERO) + value
        if v == 0:
            self.data.pop((m, n), None)
        else:
            self.data[(m, n)] = v

    def __sub__(self, other: "BiSeriesWindow") -> "BiSeriesWindow":
        b = min(self.bound, other.bound)
        out = BiSeriesWindow(b)
        keys = set(self.data) | set(other.data)
        for m, n in keys:
            if out.in_window(m, n):
                v = self.get(m, n) - other.get(m, n)
                if v != 0:
                    out.data[(m, n)] = v
        return out

    def scale(self, k: Scalar) -> "BiSeriesWindow":
        out = BiSeriesWindow(self.bound)
        if k != 0:
            for key, v in self.data.items():
                out.data[key] = k * v
        return out

    def max_abs(self) -> Scalar:
        m = ZERO
        for v in self.data.values():
            a = -v if v < 0 else v
            if a > m:
                m = a
        return m

    def is_zero(self) -> bool:
        return not self.data


def bis_delta_template(a: Scalar, g_exponent: int, bound: int) -> BiSeriesWindow:
    """Window of delta(z/w * a) * w^g_exponent.

    delta(t) = sum_{l in Z} t^l, so the support is the lattice line
    (m, n) = (l, g_exponent - l) with value a^l.
    """
    a = sc(a)
    out = BiSeriesWindow(bound)
    for l in range(-bound, bound + 1):
        n = g_exponent - l
        if abs(n) <= bound:
            out.add(l, n, a**l)
    return out


@dataclass(frozen=True)
class ParameterPoint:
    """Closed-form parameter point for the two algebra families.

    Family 1 stores quartic roots s, t with q = t^4 and p = s^4, so that
    p^{1/4} = s, p^{1/2} = s^2, (pq)^{1/2} = s^2 t^2 and every shift the
    relations use stays an exact Scalar.  The central charge c is an
    integer and qt = q * p^c.

    Family 2 stores (q, qt, b, g) with beta = b^2, gamma = g^2.  The
    optional witness r satisfies r^2 = g/b and unlocks the quarter power
    (beta^{-1} gamma)^{1/4} = r needed by the mu map.
    """

    family: int
    s: Scalar | None = None
    t: Scalar | None = None
    c: int = 1
    q2: Scalar | None = None
    qt2: Scalar | None = None
    b: Scalar | None = None
    g: Scalar | None = None
    r: Scalar | None = None

    # -- family 1 -----------------------------------------------------

    @staticmethod
    def family1(s, t, c: int = 1) -> "ParameterPoint":
        s, t = sc(s), sc(t)
        if s == 0 or t == 0:
            raise NomeOutOfRange("s and t must be nonzero")
        pt = ParameterPoint(family=1, s=s, t=t, c=c)
        if pt.p in (ONE, -ONE) or pt.q in (ONE, -ONE):
            raise NomeOutOfRange("degenerate parameter: q, p must avoid 0, 1, -1")
        return pt

    @property
    def q(self) -> Scalar:
        if self.family == 1:
            return self.t**4
        return self.q2

    @property
    def p(self) -> Scalar:
        self._need1()
        return self.s**4

    @property
    def qt(self) -> Scalar:
        if self.family == 1:
            return self.q * self.p**self.c
        return self.qt2

    @property
    def x(self) -> Scalar:
        """Default structure-function base x = p^{1/2}."""
        self._need1()
        return self.s**2

    def p_quarter(self, k: int) -> Scalar:
        """p^{k/4} for integer k, exact."""
        self._need1()
        return self.s**k

    def q_quarter(self, k: int) -> Scalar:
        self._need1()
        return self.t**k

    def shift(self, quarters_of_p: Fraction) -> Scalar:
        """p^e for e with 4e an integer; the only fractional powers used."""
        self._need1()
        k4 = quarters_of_p * 4
        if k4.denominator != 1:
            raise ClosureViolation(f"p^{quarters_of_p} is outside the quartic closure")
        return self.s ** int(k4)

    def _need1(self):
        if self.family != 1:
            raise ParameterMismatch("family-1 data requested from a family-2 point")

    def theta_safe(self) -> bool:
        return abs(self.q) < 1 and abs(self.p) < 1

    # -- family 2 -----------------------------------------------------

    @staticmethod
    def family2(q, qt, b, g, r=None) -> "ParameterPoint":
        q, qt, b, g = sc(q), sc(qt), sc(b), sc(g)
        if b == 0 or g == 0 or q == 0 or qt == 0:
            raise NomeOutOfRange("family-2 parameters must be nonzero")
        if r is not None:
            r = sc(r)
            if r * r != g / b:
                raise ClosureViolation("witness r does not satisfy r^2 = g/b")
        return ParameterPoint(family=2, q2=q, qt2=qt, b=b, g=g, r=r)

    @property
    def beta(self) -> Scalar:
        self._need2()
        return self.b**2

    @property
    def gamma(self) -> Scalar:
        self._need2()
        return self.g**2

    def bg_quarter(self, k: int) -> Scalar:
        """(beta^{-1} gamma)^{k/4}; needs the closure witness r."""
        self._need2()
        if self.r is None:
            raise ClosureViolation("no quartic witness r for (beta^{-1} gamma)^{1/4}")
        return self.r**k

    def _need2(self):
        if self.family != 2:
            raise ParameterMismatch("family-2 data requested from a family-1 point")

    @staticmethod
    def family2_from_family1(pt: "ParameterPoint") -> "ParameterPoint":
        """The section-5 regime beta = q, gamma = qt over a family-1 point."""
        pt._need1()
        b = pt.t**2
        g = pt.t**2 * pt.s ** (2 * pt.c)
        return ParameterPoint.family2(pt.q, pt.qt, b, g, r=pt.s ** pt.c)


# -- samplers ---------------------------------------------------------

# Pools keep the nome small relative to every shift that appears in the
# suites; |t| <= |s|/2 keeps the tail bound |q|^(N-5) meaningful at the
# default windows.
_THETA_POOL = [
    ("1/2", "1/4"),
    ("-1/2", "1/4"),
    ("1/2", "-1/4"),
    ("1/2", "1/5"),
    ("-1/2", "-1/5"),
    ("2/5", "1/5"),
    ("-2/5", "1/5"),
    ("2/5", "-1/6"),
    ("1/2", "1/6"),
    ("-1/2", "1/6"),
    ("2/5", "1/7"),
    ("1/2", "2/9"),
]

_RATIONAL_POOL = ["2", "-2", "3", "1/2", "-1/2", "3/2", "2/3", "-3", "5/2", "1/3", "4", "-3/2"]


def sample_family1_theta(rng: random.Random, c: int = 1) -> ParameterPoint:
    s, t = rng.choice(_THETA_POOL)
    return ParameterPoint.family1(sc(s), sc(t), c=c)


def sample_family1_rational(rng: random.Random, c: int = 1) -> ParameterPoint:
    while True:
        s = sc(rng.choice(_RATIONAL_POOL))
        t = sc(rng.choice(_RATIONAL_POOL))
        try:
            return ParameterPoint.family1(s, t, c=c)
        except NomeOutOfRange:
            continue


def sample_family2(rng: random.Random) -> ParameterPoint:
    """Generic family-2 point with independent q, qt and a quartic witness."""
    pools = ["1/2", "1/3", "2/5", "-1/2", "3/4", "-2/5", "1/4"]
    q = sc(rng.choice(pools))
    qt = sc(rng.choice(pools))
    b = sc(rng.choice(["1/2", "2", "1/3", "3/2", "-1/2"]))
    r = sc(rng.choice(["2", "1/2", "3", "2/3"]))
    g = b * r * r
    return ParameterPoint.family2(q, qt, b, g, r=r)
