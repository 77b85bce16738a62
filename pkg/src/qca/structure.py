"""Structure functions Psi_ij, the inversion condition, Riemann factors,
Serre coefficients, and the closed-form EF templates.

Two internal value types carry every identity check:

RationalGerm: exact rational function of one variable zeta, compared by
cross-multiplication; residual 0 is a proof.

RegionGerm: monomial * constant * (series in zeta) * (series in 1/zeta),
the expansion of a theta-kernel object in an annulus around |zeta| = 1.
Products of germs stay germs; identities that hold germ-componentwise
have residual exactly 0, while identities that mix regions are compared
on a Laurent window after a single inner-times-outer convolution.
"""

from __future__ import annotations

from fractions import Fraction

from .cartan import validate_simply_laced
from .qfunctions import (
    RATIONAL,
    THETA,
    PsiKernel,
    pochhammer_log_coeff,
    pochhammer_series,
    theta_eval,
)
from .series_core import (
    ONE,
    ZERO,
    BiSeriesWindow,
    ClosureViolation,
    GLaurent,
    NomeOutOfRange,
    ParameterPoint,
    Scalar,
    TruncatedSeries,
    bis_delta_template,
    exact_sqrt,
    sc,
)

USER = "user"
FAMILY_KINDS = (USER, RATIONAL, THETA)

INNER = "inner"
OUTER = "outer"


class UnsupportedKernel(ValueError):
    pass


class WrongCartanEntry(ValueError):
    pass


class TableFormatError(ValueError):
    pass


# -- exact rational functions ----------------------------------------


def _pstrip(cs: tuple[Scalar, ...]) -> tuple[int, tuple[Scalar, ...]]:
    lead = next((k for k, c in enumerate(cs) if c != 0), None)
    if lead is None:
        raise ZeroDivisionError("zero polynomial where a unit is required")
    last = max(k for k, c in enumerate(cs) if c != 0)
    return lead, tuple(cs[lead : last + 1])


def _pmul(a: tuple[Scalar, ...], b: tuple[Scalar, ...]) -> tuple[Scalar, ...]:
    out = [ZERO] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            if bj != 0:
                out[i + j] += ai * bj
    return tuple(out)


def _psub(a: tuple[Scalar, ...], b: tuple[Scalar, ...]) -> tuple[Scalar, ...]:
    n = max(len(a), len(b))
    ga = a + (ZERO,) * (n - len(a))
    gb = b + (ZERO,) * (n - len(b))
    return tuple(x - y for x, y in zip(ga, gb))


class RationalGerm:
    """zeta^m * num(zeta)/den(zeta) with num, den of nonzero constant term."""

    __slots__ = ("m", "num", "den")

    def __init__(self, m: int, num, den):
        num = tuple(sc(c) for c in num)
        den = tuple(sc(c) for c in den)
        ln, num = _pstrip(num)
        ld, den = _pstrip(den)
        self.m = m + ln - ld
        self.num = num
        self.den = den

    @staticmethod
    def one() -> "RationalGerm":
        return RationalGerm(0, (ONE,), (ONE,))

    @staticmethod
    def monomial(m: int, c: Scalar = ONE) -> "RationalGerm":
        return RationalGerm(m, (sc(c),), (ONE,))

    def __mul__(self, other: "RationalGerm") -> "RationalGerm":
        return RationalGerm(self.m + other.m, _pmul(self.num, other.num), _pmul(self.den, other.den))

    def inverse(self) -> "RationalGerm":
        return RationalGerm(-self.m, self.den, self.num)

    def pow_int(self, e: int) -> "RationalGerm":
        out = RationalGerm.one()
        base = self if e >= 0 else self.inverse()
        for _ in range(abs(e)):
            out = out * base
        return out

    def scale(self, c: Scalar) -> "RationalGerm":
        return RationalGerm(self.m, tuple(sc(c) * x for x in self.num), self.den)

    def substitute_scaled(self, sigma: Scalar) -> "RationalGerm":
        """zeta -> sigma * zeta."""
        sigma = sc(sigma)
        num = tuple(c * sigma**k for k, c in enumerate(self.num))
        den = tuple(c * sigma**k for k, c in enumerate(self.den))
        return RationalGerm(self.m, num, den).scale(sigma**self.m)

    def at_reciprocal(self) -> "RationalGerm":
        """The germ of R(1/zeta)."""
        num = tuple(reversed(self.num))
        den = tuple(reversed(self.den))
        return RationalGerm(-self.m - (len(self.num) - 1) + (len(self.den) - 1), num, den)

    def equals(self, other: "RationalGerm") -> bool:
        return self.residual_from(other) == 0

    def residual_from(self, other: "RationalGerm") -> Scalar:
        if self.m != other.m:
            return ONE
        diff = _psub(_pmul(self.num, other.den), _pmul(other.num, self.den))
        # scale-free comparison: normalize by the leading cross product
        norm = abs(self.den[0] * other.den[0])
        return max((abs(c) for c in diff), default=ZERO) / norm

    def residual_from_one(self) -> Scalar:
        return self.residual_from(RationalGerm.one())

    def eval_at(self, z0: Scalar) -> Scalar:
        z0 = sc(z0)
        nv = sum(c * z0**k for k, c in enumerate(self.num))
        dv = sum(c * z0**k for k, c in enumerate(self.den))
        if dv == 0:
            raise ZeroDivisionError("evaluation at a pole")
        return z0**self.m * nv / dv

    def series(self, order: int) -> GLaurent:
        """One-sided expansion around zeta = 0."""
        num = TruncatedSeries(order, self.num)
        den = TruncatedSeries(order, self.den)
        return GLaurent(self.m, num * den.inverse())

    def __repr__(self):
        return f"RationalGerm(z^{self.m} * {list(self.num)}/{list(self.den)})"


# -- annulus germs ----------------------------------------------------


class RegionGerm:
    """m, kappa, inner series (const 1), outer series in 1/zeta (const 1)."""

    __slots__ = ("m", "kappa", "inner", "outer")

    def __init__(self, m: int, kappa: Scalar, inner: TruncatedSeries, outer: TruncatedSeries):
        if inner.coeffs[0] != 1 or outer.coeffs[0] != 1:
            raise ValueError("germ parts must be normalized to constant term 1")
        self.m = m
        self.kappa = sc(kappa)
        self.inner = inner
        self.outer = outer

    @staticmethod
    def one(order: int) -> "RegionGerm":
        return RegionGerm(0, ONE, TruncatedSeries.one(order), TruncatedSeries.one(order))

    @staticmethod
    def from_log_data(m: int, kappa: Scalar, inner_log, outer_log, order: int) -> "RegionGerm":
        li = TruncatedSeries(order, [ZERO] + [sc(inner_log(n)) for n in range(1, order + 1)])
        lo = TruncatedSeries(order, [ZERO] + [sc(outer_log(n)) for n in range(1, order + 1)])
        return RegionGerm(m, kappa, li.exp(), lo.exp())

    def __mul__(self, other: "RegionGerm") -> "RegionGerm":
        return RegionGerm(
            self.m + other.m,
            self.kappa * other.kappa,
            self.inner * other.inner,
            self.outer * other.outer,
        )

    def inverse(self) -> "RegionGerm":
        return RegionGerm(-self.m, ONE / self.kappa, self.inner.inverse(), self.outer.inverse())

    def pow_int(self, e: int) -> "RegionGerm":
        order = self.inner.order
        out = RegionGerm.one(order)
        base = self if e >= 0 else self.inverse()
        for _ in range(abs(e)):
            out = out * base
        return out

    def substitute_scaled(self, sigma: Scalar) -> "RegionGerm":
        sigma = sc(sigma)
        return RegionGerm(
            self.m,
            self.kappa * sigma**self.m,
            self.inner.substitute_scaled(sigma),
            self.outer.substitute_scaled(ONE / sigma),
        )

    def at_reciprocal(self) -> "RegionGerm":
        return RegionGerm(-self.m, self.kappa, self.outer, self.inner)

    def componentwise_residual(self, other: "RegionGerm") -> Scalar:
        if self.m != other.m:
            return ONE
        r = abs(self.kappa - other.kappa)
        n = min(self.inner.order, other.inner.order)
        for k in range(n + 1):
            r = max(r, abs(self.kappa * self.inner[k] - other.kappa * other.inner[k]))
            r = max(r, abs(self.kappa * self.outer[k] - other.kappa * other.outer[k]))
        return r

    def residual_from_one(self) -> Scalar:
        return self.componentwise_residual(RegionGerm.one(self.inner.order))

    def laurent_window(self, lo: int, hi: int) -> dict[int, Scalar]:
        """Coefficients of zeta^k, lo <= k <= hi, by one full convolution."""
        out: dict[int, Scalar] = {k: ZERO for k in range(lo, hi + 1)}
        for i in range(self.inner.order + 1):
            ci = self.inner[i]
            if ci == 0:
                continue
            for j in range(self.outer.order + 1):
                cj = self.outer[j]
                if cj == 0:
                    continue
                k = self.m + i - j
                if lo <= k <= hi:
                    out[k] += self.kappa * ci * cj
        return out

    def window_residual(self, other: "RegionGerm", lo: int, hi: int) -> Scalar:
        a = self.laurent_window(lo, hi)
        b = other.laurent_window(lo, hi)
        return max(abs(a[k] - b[k]) for k in range(lo, hi + 1))

    def __repr__(self):
        return f"RegionGerm(m={self.m}, kappa={self.kappa})"


# -- Psi constructors -------------------------------------------------


def psi_rational_germ(a: int, x: Scalar, signed: bool = False, sigma: Scalar = ONE) -> RationalGerm:
    """Psi(sigma zeta) for the rational kernel: the ratio collapses to
    (x^a sigma zeta - 1)/(sigma zeta - x^a), times (-1)^a when signed."""
    x, sigma = sc(x), sc(sigma)
    xa = x**a
    g = RationalGerm(0, (-ONE, sigma * xa), (-xa, sigma))
    if signed and a % 2:
        g = g.scale(-ONE)
    return g


def _theta_log_magnitude(a: int, x: Scalar, nome: Scalar, n: int) -> Scalar:
    qn = nome**n
    if qn == 1:
        raise NomeOutOfRange("nome power hits 1")
    return (x ** (a * n) - x ** (-a * n)) / (n * (ONE - qn))


def psi_theta_germ(
    a: int,
    x: Scalar,
    nome: Scalar,
    order: int,
    region: str = INNER,
    signed: bool = False,
    sigma: Scalar = ONE,
) -> RegionGerm:
    """Annulus expansion of Psi(sigma zeta) for the theta kernel.

    The two regions come from independent Pochhammer factorizations (the
    outer one is reached through the reflection of theta), so pairing an
    inner germ with an outer germ in the inversion check is not circular.
    """
    x, nome, sigma = sc(x), sc(nome), sc(sigma)
    sign = -ONE if (signed and a % 2) else ONE

    def d(n):
        return _theta_log_magnitude(a, x, nome, n)

    if region == INNER:
        kappa = sign * x ** (-a)
        inner = lambda n: -d(n) * sigma**n
        outer = lambda n: d(n) * nome**n * sigma ** (-n)
    elif region == OUTER:
        kappa = sign * x**a
        inner = lambda n: -d(n) * nome**n * sigma**n
        outer = lambda n: d(n) * sigma ** (-n)
    else:
        raise ValueError(f"unknown region {region!r}")
    return RegionGerm.from_log_data(0, kappa, inner, outer, order)


def psi_theta_germ_product(
    a: int,
    x: Scalar,
    nome: Scalar,
    order: int,
    factors: int,
    region: str = INNER,
    signed: bool = False,
    sigma: Scalar = ONE,
) -> RegionGerm:
    """Same germ from truncated Pochhammer products; cross-oracle with
    error O(nome^factors) against the closed-form logs."""
    x, nome, sigma = sc(x), sc(nome), sc(sigma)
    sign = -ONE if (signed and a % 2) else ONE
    xa, xia = x**a, x ** (-a)
    if region == INNER:
        kappa = sign * xia
        inner = pochhammer_series(sigma * xa, nome, order, factors) * pochhammer_series(
            sigma * xia, nome, order, factors
        ).inverse()
        outer = pochhammer_series(nome * xia / sigma, nome, order, factors) * pochhammer_series(
            nome * xa / sigma, nome, order, factors
        ).inverse()
    elif region == OUTER:
        kappa = sign * xa
        inner = pochhammer_series(nome * sigma * xa, nome, order, factors) * pochhammer_series(
            nome * sigma * xia, nome, order, factors
        ).inverse()
        outer = pochhammer_series(xia / sigma, nome, order, factors) * pochhammer_series(
            xa / sigma, nome, order, factors
        ).inverse()
    else:
        raise ValueError(f"unknown region {region!r}")
    return RegionGerm(0, kappa, inner, outer)


def psi_scalar_value(
    kind: str,
    a: int,
    x: Scalar,
    z: Scalar,
    nome: Scalar | None = None,
    signed: bool = False,
    factors: int = 40,
) -> Scalar:
    """Direct kernel-ratio value (-1)^a x^{-a} psi(z x^a)/psi(z x^{-a})."""
    x, z = sc(x), sc(z)
    sign = -ONE if (signed and a % 2) else ONE
    if kind == RATIONAL:
        den = ONE - z * x ** (-a)
        if den == 0:
            raise ZeroDivisionError("evaluation at a pole")
        return sign * x ** (-a) * (ONE - z * x**a) / den
    if kind == THETA:
        return sign * x ** (-a) * theta_eval(z * x**a, nome, factors) / theta_eval(
            z * x ** (-a), nome, factors
        )
    raise UnsupportedKernel(kind)


def drinfeld_structure_value(a: int, qstar: Scalar, z: Scalar, w: Scalar) -> Scalar:
    """Independently coded standard quantum-affine structure function
    (qstar^a z - w)/(z - qstar^a w), written from the Drinfeld relation
    E_i(z)E_j(w)(z - qstar^a w) = (qstar^a z - w)E_j(w)E_i(z)."""
    qstar, z, w = sc(qstar), sc(z), sc(w)
    den = z - qstar**a * w
    if den == 0:
        raise ZeroDivisionError("evaluation at a pole")
    return (qstar**a * z - w) / den


# -- the star reduction for the theta Riemann factor ------------------


def _w_shift_factor(c: Scalar, p: Scalar) -> RationalGerm:
    """W(p v)/W(v) at v = c zeta, where W(u) = (u p; p)oo (p/u; p)oo.

    Equals (1 - 1/v)/(1 - p v) = zeta^{-1}(zeta - 1/c)/(1 - p c zeta).
    """
    c, p = sc(c), sc(p)
    return RationalGerm(-1, (-ONE / c, ONE), (ONE, -p * c))


def star_identity_residual(a: int, x: Scalar, p: Scalar) -> Scalar:
    """Exact residual of the two-nome collapse

    W(zeta x^a)/W(zeta x^{-a}) = (-1)^a x^{-a} zeta^{-a} (zeta - x^a)/(zeta - x^{-a})

    under x^2 = p, where the left side telescopes through the W shift
    because zeta x^a = p^a (zeta x^{-a})."""
    x, p = sc(x), sc(p)
    if x * x != p:
        raise ClosureViolation("the collapse needs x^2 = p exactly")
    lhs = RationalGerm.one()
    if a >= 0:
        for k in range(a):
            lhs = lhs * _w_shift_factor(p**k * x ** (-a), p)
    else:
        for k in range(-a):
            lhs = lhs * _w_shift_factor(p**k * x**a, p).inverse()
    sign = -ONE if a % 2 else ONE
    rhs = RationalGerm(-a, (-(x**a), ONE), (-(x ** (-a)), ONE)).scale(sign * x ** (-a))
    return lhs.residual_from(rhs)


# -- Riemann factors --------------------------------------------------


def _telescoped_ratio(a: int, x: Scalar, p: Scalar) -> RationalGerm:
    """(t x^a; p)oo / (t x^{-a}; p)oo as a finite rational function of t,
    valid exactly when x^2 = p."""
    x, p = sc(x), sc(p)
    if x * x != p:
        raise ClosureViolation("telescoping needs x^2 = p exactly")
    out = RationalGerm.one()
    if a > 0:
        for j in range(a):
            out = out * RationalGerm(0, (ONE,), (ONE, -(x**a) * p ** (j - a)))
    elif a < 0:
        for j in range(-a):
            out = out * RationalGerm(0, (ONE, -(x ** (-a)) * p ** (j + a)), (ONE,))
    return out


class RiemannFactor:
    """Phi_ij with Phi_ij(z)/Phi_ji(1/z) = Psi_ij(z), Phi(0) = x^{-a}.

    rational kernel: fully rational, the invariant is checked by exact
    cross-multiplication.  theta kernel: a single-nome Pochhammer ratio
    times a rational correction; the correction is exactly the inverse
    of the rational-kernel factor, which is what makes the invariant
    close (the residual mismatch of the bare Pochhammer ratio is the
    rational structure function itself).
    """

    def __init__(self, kind: str, a: int, x: Scalar, p: Scalar, nome: Scalar | None,
                 signed: bool = False):
        if kind not in (RATIONAL, THETA):
            raise UnsupportedKernel(kind)
        self.kind = kind
        self.a = a
        self.x = sc(x)
        self.p = sc(p)
        self.nome = None if nome is None else sc(nome)
        self.signed = signed
        edge = (ONE, ONE) if signed else (ONE, -ONE)  # (1 + z)^a vs (1 - z)^a
        self._edge = RationalGerm(0, edge, (ONE,)).pow_int(a)
        self._tel = _telescoped_ratio(a, self.x, self.p)

    def rational_germ(self) -> RationalGerm:
        """The rational-kernel factor x^{-a} T(z) (1 -+ z)^a."""
        return (self._tel * self._edge).scale(self.x ** (-self.a))

    def correction_germ(self) -> RationalGerm:
        """Rational correction of the theta factor: [T(z)(1 -+ z)^a]^{-1}."""
        return (self._tel * self._edge).inverse()

    def eval_scalar(self, z: Scalar, factors: int = 40) -> Scalar:
        z = sc(z)
        if self.kind == RATIONAL:
            return self.rational_germ().eval_at(z)
        x, a, q = self.x, self.a, self.nome
        poch = ONE
        u, v = z * x**a, z * x ** (-a)
        c = ONE
        for _ in range(factors):
            poch *= (ONE - u * c) / (ONE - v * c)
            c *= q
        return x ** (-a) * poch * self.correction_germ().eval_at(z)

    def series_inner(self, order: int) -> GLaurent:
        """Expansion of Phi(z) around z = 0."""
        if self.kind == RATIONAL:
            return self.rational_germ().series(order)
        x, a, q = self.x, self.a, self.nome
        lg = TruncatedSeries(
            order,
            [ZERO]
            + [
                pochhammer_log_coeff(x**a, q, n) - pochhammer_log_coeff(x ** (-a), q, n)
                for n in range(1, order + 1)
            ],
        )
        body = lg.exp()
        corr = self.correction_germ()
        cg = corr.series(order)
        if cg.exponent != 0:
            raise UnsupportedKernel("correction factor lost analyticity at 0")
        return GLaurent(0, body.scale(x ** (-a)) * cg.body)

    def invariant_residual_rational(self) -> Scalar:
        """Exact residual of Phi(z)/Phi(1/z) = Psi(z), rational kernel."""
        g = self.rational_germ()
        ratio = g * g.at_reciprocal().inverse()
        target = psi_rational_germ(self.a, self.x, signed=self.signed)
        return ratio.residual_from(target)

    def invariant_residual_theta_at(self, z0: Scalar, factors: int = 40) -> Scalar:
        """|Phi(z0)/Phi(1/z0) - Psi(z0)| by truncated products."""
        z0 = sc(z0)
        ratio = self.eval_scalar(z0, factors) / self.eval_scalar(ONE / z0, factors)
        target = psi_scalar_value(
            THETA, self.a, self.x, z0, nome=self.nome, signed=self.signed, factors=factors
        )
        return abs(ratio - target)


# -- Serre coefficients -----------------------------------------------


def serre_f_scalar(
    psi_at,
    sign: str,
    x1: Scalar,
    x2: Scalar,
) -> Scalar:
    """f+- at sample points x1 = z1/w, x2 = z2/w.

    psi_at(entry, z) must return the structure function value at the
    relation's nome (q for '+', qt for '-'); the '-' coefficient uses
    inverted Psi values per its defining display.
    """
    x1, x2 = sc(x1), sc(x2)
    inv = sign == "-"

    def val(entry, z):
        v = psi_at(entry, z)
        return ONE / v if inv else v

    pii = val(2, x2 / x1)
    p1 = val(-1, ONE / x1)
    p2 = val(-1, ONE / x2)
    den = p2 + pii * p1
    if den == 0:
        raise ZeroDivisionError("Serre coefficient evaluated at a pole")
    return (pii + ONE) * (p1 * p2 + ONE) / den


# -- EF closed-form templates ----------------------------------------


def upsilon_closed_form(p: Scalar, region: str, bound: int) -> BiSeriesWindow:
    """Window of the Cartan-entry-2 template.

    region 'upsilon': 1/(z^2 (1 - (w/z)X)(1 - (w/z)/X)) expanded for
    |w/z| < 1; region 'bar': the same expression with z and w swapped,
    expanded for |z/w| < 1.  X = sqrt(p) must be rational.
    """
    X = exact_sqrt(sc(p))
    out = BiSeriesWindow(bound)
    for k in range(0, 2 * bound + 1):
        h = sum(X ** (k - 2 * i) for i in range(k + 1))
        if region == "upsilon":
            m, n = -2 - k, k
        elif region == "bar":
            m, n = k, -2 - k
        else:
            raise ValueError(f"unknown region {region!r}")
        if out.in_window(m, n):
            out.add(m, n, h)
    return out


def upsilon_delta_target(p: Scalar, bound: int) -> BiSeriesWindow:
    """The two delta lines that Upsilon - Upsilon-bar must equal:
    support z/w = X^{+-1}, overall weight 1/(X - 1/X), line weights
    X^{-. -1} and -X^{.+1} on m + n = -2."""
    X = exact_sqrt(sc(p))
    pref = ONE / (X - ONE / X)
    line_a = bis_delta_template(ONE / X, -2, bound).scale(pref / X)
    line_b = bis_delta_template(X, -2, bound).scale(pref * X)
    return line_a - line_b


def upsilon_general(a: int, x: Scalar) -> tuple[int, RationalGerm]:
    """Kernel-independent EF contraction shape for any Cartan entry.

    Returns (w_degree, R) with the function equal to w^{w_degree} R(z/w):
    a > 0: w^{-a} / prod_i (zeta - x^{a-1-2i}); a < 0: w^{|a|} * the
    matching polynomial; a = 0: 1.
    """
    x = sc(x)
    if a == 0:
        return 0, RationalGerm.one()
    if a > 0:
        g = RationalGerm.one()
        for i in range(a):
            g = g * RationalGerm(0, (ONE,), (-(x ** (a - 1 - 2 * i)), ONE))
        return -a, g
    b = -a
    g = RationalGerm.one()
    for i in range(b):
        g = g * RationalGerm(0, (-(x ** (b - 1 - 2 * i)), ONE), (ONE,))
    return b, g


# -- user-supplied rational tables ------------------------------------


def _parse_poly(text: str) -> tuple[Scalar, ...]:
    try:
        return tuple(Fraction(part.strip()) for part in text.split(","))
    except (ValueError, ZeroDivisionError) as exc:
        raise TableFormatError(f"bad polynomial {text!r}: {exc}") from None


def parse_psi_table(text: str) -> dict[int, RationalGerm]:
    """Parse lines `A_entry=<n> num=<poly> den=<poly>` into germs.

    Polynomials are comma-separated exact rationals, ascending powers.
    Each loaded entry must satisfy the inversion condition
    Psi_a(z) Psi_a(1/z) = 1 exactly (the Cartan matrix is symmetric, so
    the condition pairs an entry with itself).
    """
    table: dict[int, RationalGerm] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = {}
        for tok in line.split():
            if "=" not in tok:
                raise TableFormatError(f"bad token {tok!r} in line {raw!r}")
            k, v = tok.split("=", 1)
            fields[k] = v
        missing = {"A_entry", "num", "den"} - set(fields)
        if missing:
            raise TableFormatError(f"line {raw!r} lacks {sorted(missing)}")
        try:
            a = int(fields["A_entry"])
        except ValueError:
            raise TableFormatError(f"bad A_entry in {raw!r}") from None
        if a in table:
            raise TableFormatError(f"duplicate A_entry={a}")
        g = RationalGerm(0, _parse_poly(fields["num"]), _parse_poly(fields["den"]))
        if (g * g.at_reciprocal()).residual_from_one() != 0:
            raise TableFormatError(f"entry A_entry={a} violates the inversion condition")
        table[a] = g
    return table


def drinfeld_table_text(qstar: Scalar) -> str:
    """Canonical user table for the standard rational family at base qstar."""
    qstar = sc(qstar)
    lines = []
    for a in (2, -1, 0):
        xa = qstar**a
        lines.append(f"A_entry={a} num={-ONE},{xa} den={-xa},{ONE}")
    return "\n".join(lines)


# -- the family object ------------------------------------------------


class StructureFunctionFamily:
    """Provider of Psi_ij and its derived objects over one parameter point.

    Psi depends on (i, j) only through the Cartan entry A_ij; the sign
    toggle selects whether the signature (-1)^{A_ij} multiplies the
    kernel ratio.  x defaults to sqrt(p) of the point; an x_rule
    callback may override it.
    """

    def __init__(self, cartan, point: ParameterPoint, kind: str,
                 signed: bool = False, x_rule=None, user_table: dict | None = None):
        validate_simply_laced(cartan)
        if kind not in FAMILY_KINDS:
            raise UnsupportedKernel(kind)
        if kind == USER and not user_table:
            raise TableFormatError("user kind needs a loaded table")
        if kind == THETA and not point.theta_safe():
            raise NomeOutOfRange("theta kernel needs |q| < 1 and |p| < 1")
        self.cartan = cartan
        self.point = point
        self.kind = kind
        self.signed = signed
        self.x = x_rule(point) if x_rule else point.x
        self.user_table = user_table or {}
        if kind == USER:
            need = {e for row in cartan for e in row}
            have = set(self.user_table)
            if not need <= have:
                raise TableFormatError(f"table lacks Cartan entries {sorted(need - have)}")

    def a_entry(self, i: int, j: int) -> int:
        return self.cartan[i][j]

    @property
    def rank(self) -> int:
        return len(self.cartan)

    def psi_germ(self, i: int, j: int, order: int = 0, region: str = INNER,
                 nome: Scalar | None = None, sigma: Scalar = ONE):
        """Germ of Psi_ij(sigma zeta | nome); nome defaults to the point's q."""
        a = self.a_entry(i, j)
        if self.kind == USER:
            g = self.user_table[a]
            if self.signed and a % 2:
                g = g.scale(-ONE)
            return g.substitute_scaled(sigma)
        if self.kind == RATIONAL:
            return psi_rational_germ(a, self.x, self.signed, sigma)
        q = self.point.q if nome is None else nome
        return psi_theta_germ(a, self.x, q, order, region, self.signed, sigma)

    def psi_eval(self, i: int, j: int, region: str, order: int) -> GLaurent:
        """Series expansion of Psi_ij in the chosen region.

        For the outer region the GLaurent is a series in the reciprocal
        variable u = 1/z.  The theta kernel returns the windowed annulus
        expansion as a GLaurent of bounded depth.
        """
        g = self.psi_germ(i, j, order=order, region=region)
        if isinstance(g, RationalGerm):
            if region == OUTER:
                g = g.at_reciprocal()
            elif region != INNER:
                raise ValueError(f"unknown region {region!r}")
            return g.series(order)
        win = g.laurent_window(-order, order)
        return GLaurent(-order, TruncatedSeries(2 * order, [win[k] for k in range(-order, order + 1)]))

    def psi_scalar(self, i: int, j: int, z: Scalar, nome: Scalar | None = None,
                   factors: int = 40) -> Scalar:
        a = self.a_entry(i, j)
        if self.kind == USER:
            g = self.user_table[a]
            v = g.eval_at(z)
            return -v if (self.signed and a % 2) else v
        if self.kind == RATIONAL:
            return psi_scalar_value(RATIONAL, a, self.x, z, signed=self.signed)
        q = self.point.q if nome is None else nome
        return psi_scalar_value(THETA, a, self.x, z, nome=q, signed=self.signed, factors=factors)

    # -- checks -------------------------------------------------------

    def aa_residual_pair(self, i: int, j: int, order: int) -> Scalar:
        """Residual of Psi_ij(z) Psi_ji(1/z) = 1; exactly 0 when it holds.

        Rational paths multiply germs and cross-multiply; the theta path
        pairs the inner germ of Psi_ij with the outer-region germ of
        Psi_ji taken at the reciprocal argument, and the identity closes
        termwise in the log data.
        """
        if self.kind in (USER, RATIONAL):
            g1 = self.psi_germ(i, j)
            g2 = self.psi_germ(j, i)
            return (g1 * g2.at_reciprocal()).residual_from_one()
        g1 = self.psi_germ(i, j, order=order, region=INNER)
        g2 = self.psi_germ(j, i, order=order, region=OUTER).at_reciprocal()
        return (g1 * g2).residual_from_one()

    def aa_residual_at_point(self, i: int, j: int, z: Scalar, factors: int = 40) -> Scalar:
        v = self.psi_scalar(i, j, z, factors=factors) * self.psi_scalar(
            j, i, ONE / sc(z), factors=factors
        )
        return abs(v - ONE)

    def entry_dependence_residual(self, order: int = 8) -> Scalar:
        """Pairs with equal Cartan entries must give identical Psi."""
        seen: dict[int, object] = {}
        worst = ZERO
        for i in range(self.rank):
            for j in range(self.rank):
                a = self.a_entry(i, j)
                g = self.psi_germ(i, j, order=order)
                if a in seen:
                    ref = seen[a]
                    if isinstance(g, RationalGerm):
                        worst = max(worst, g.residual_from(ref))
                    else:
                        worst = max(worst, g.componentwise_residual(ref))
                else:
                    seen[a] = g
        return worst

    def serre_f(self, sign: str, i: int, j: int, x1: Scalar, x2: Scalar,
                factors: int = 40) -> Scalar:
        if self.a_entry(i, j) != -1:
            raise WrongCartanEntry("Serre coefficients exist only for entry -1 pairs")
        if sign not in ("+", "-"):
            raise ValueError("sign must be '+' or '-'")
        nome = None
        if self.kind == THETA:
            nome = self.point.q if sign == "+" else self.point.qt
            if not abs(nome) < 1:
                raise NomeOutOfRange("Serre coefficient nome outside the unit disk")

        def psi_at(entry, z):
            if self.kind == USER:
                g = self.user_table[entry]
                v = g.eval_at(z)
                return -v if (self.signed and entry % 2) else v
            if self.kind == RATIONAL:
                return psi_scalar_value(RATIONAL, entry, self.x, z, signed=self.signed)
            return psi_scalar_value(THETA, entry, self.x, z, nome=nome,
                                    signed=self.signed, factors=factors)

        return serre_f_scalar(psi_at, sign, x1, x2)

    def riemann_factor(self, i: int, j: int) -> RiemannFactor:
        if self.kind == USER:
            raise UnsupportedKernel("decomposition is provided for the two kernel families")
        return RiemannFactor(self.kind, self.a_entry(i, j), self.x, self.point.p,
                             self.point.q if self.kind == THETA else None, self.signed)
