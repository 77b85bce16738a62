"""Level-one free-field realization on a truncated Fock space.

The currents are normal-ordered exponentials of a lattice-extended
Heisenberg algebra

    [a_i[n], a_j[m]] = C_ij(n) delta_{n+m,0},      [P_i, Q_j] = A_ij,

with C_ij(n) = (1/n)(1 - q^{-n})(X^{A_ij n} - X^{-A_ij n})
(1 - (pq)^n)/(1 - p^n) and X = p^{1/2}.  Everything runs over exact
rationals: parameter points carry quartic roots of p and q, so every
shift and square root the construction needs is a Scalar.

Vertex coefficients u[n], v[n] are not trusted from a display; they are
fitted against the Riemann factors of the structure functions and the
closed EF kernel, with the printed values kept alongside so the
per-mode discrepancy can be reported (see coefficient_divergence).

Only the mode products u[n]u[-n], v[n]v[-n], u[n]v[-n] are observable;
the fitter fixes the split by the u[-n] = 1 gauge.  The mixed product
must satisfy (u[n]v[-n])^2 = u[n]u[-n] v[n]v[-n], otherwise no single
split serves both operator orders; violations raise InconsistentTarget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .cartan import validate_simply_laced
from .qfunctions import RATIONAL, THETA, pochhammer_log_coeff
from .series_core import (
    ONE,
    ZERO,
    BiSeriesWindow,
    GLaurent,
    ParameterPoint,
    Scalar,
    TruncatedSeries,
    sc,
)
from .structure import RationalGerm, RiemannFactor, _telescoped_ratio

PHI = "phi"
PSI = "psi"

E_KIND = "E"
F_KIND = "F"
HP_KIND = "H+"
HM_KIND = "H-"
VERTEX_KINDS = (E_KIND, F_KIND, HP_KIND, HM_KIND)


class ZeroMode(ValueError):
    """The n = 0 mode belongs to (P, Q), not to the oscillator family."""


class ModeCutoffExceeded(ValueError):
    """A computation needs oscillator coefficients beyond the stored modes."""


class CutoffExceeded(ValueError):
    """A state of degree beyond the Fock-space cutoff would be produced."""


class RegionMismatch(ValueError):
    """Operator order contradicts the declared modulus ordering."""


class InconsistentTarget(ValueError):
    """No single coefficient set reproduces all fitting targets."""


class ZeroDivisor(ValueError):
    """A fit step divides by a vanishing commutator or product."""


# -- Heisenberg data --------------------------------------------------


@dataclass(frozen=True)
class HeisenbergData:
    """Commutator table of the oscillators over one parameter point.

    Stores q, p together with exact square roots; C_ij(n) depends on
    (i, j) only through the Cartan entry, which is what makes a single
    coefficient set serve every pair of sites.
    """

    cartan: tuple
    q: Scalar
    p: Scalar
    sqrt_p: Scalar
    sqrt_q: Scalar

    def __post_init__(self):
        validate_simply_laced([list(r) for r in self.cartan])
        if self.sqrt_p * self.sqrt_p != self.p:
            raise ValueError("sqrt_p is not a square root of p")
        if self.sqrt_q * self.sqrt_q != self.q:
            raise ValueError("sqrt_q is not a square root of q")

    @staticmethod
    def from_point(cartan, pt: ParameterPoint) -> "HeisenbergData":
        return HeisenbergData(
            cartan=tuple(tuple(r) for r in cartan),
            q=pt.q,
            p=pt.p,
            sqrt_p=pt.x,
            sqrt_q=pt.q_quarter(2),
        )

    @property
    def rank(self) -> int:
        return len(self.cartan)

    @property
    def qt(self) -> Scalar:
        """Second nome of the level-one realization, qt = q p."""
        return self.q * self.p

    def entry(self, i: int, j: int) -> int:
        return self.cartan[i][j]

    def pairing(self, i: int, j: int) -> int:
        """[P_i, Q_j] = A_ij."""
        return self.cartan[i][j]

    def entry_coefficient(self, a: int, n: int) -> Scalar:
        """C(n) for a Cartan entry value a."""
        if n == 0:
            raise ZeroMode("n = 0 is carried by P and Q")
        q, X = self.q, self.sqrt_p
        pq = self.p * q
        return (
            Fraction(1, n)
            * (ONE - q ** (-n))
            * (X ** (a * n) - X ** (-a * n))
            * (ONE - pq**n)
            / (ONE - self.p**n)
        )

    def commutator_coefficient(self, i: int, j: int, n: int) -> Scalar:
        return self.entry_coefficient(self.cartan[i][j], n)

    def bracket(self, i: int, j: int, n: int, m: int) -> Scalar:
        """[a_i[n], a_j[m]], zero unless n + m = 0."""
        if n == 0 or m == 0:
            raise ZeroMode("n = 0 is carried by P and Q")
        if n + m != 0:
            return ZERO
        return self.commutator_coefficient(i, j, n)


# -- coefficient sets -------------------------------------------------


@dataclass
class CoefficientSet:
    """Vertex-operator mode coefficients for 0 < |n| <= order.

    provenance is 'paper-printed' for the displayed n-independent
    prefactor form and 'fitted' for the gauge-fixed solution of the
    target equations.
    """

    order: int
    u: dict
    v: dict
    A: Scalar = ONE
    B: Scalar = ONE
    provenance: str = "fitted"

    def _get(self, table: dict, n: int) -> Scalar:
        if n == 0:
            raise ZeroMode("mode 0 has no u/v coefficient")
        if abs(n) > self.order:
            raise ModeCutoffExceeded(f"mode {n} beyond stored order {self.order}")
        return table[n]

    def u_at(self, n: int) -> Scalar:
        return self._get(self.u, n)

    def v_at(self, n: int) -> Scalar:
        return self._get(self.v, n)

    def leg_coefficient(self, boson: str, n: int) -> Scalar:
        """Coefficient of a_i[n] inside phi (u[n]) or psi (-v[n])."""
        if boson == PHI:
            return self.u_at(n)
        if boson == PSI:
            return -self.v_at(n)
        raise ValueError(f"unknown boson kind {boson!r}")

    # observable mode products, n > 0
    def uu(self, n: int) -> Scalar:
        return self.u_at(n) * self.u_at(-n)

    def vv(self, n: int) -> Scalar:
        return self.v_at(n) * self.v_at(-n)

    def uv(self, n: int) -> Scalar:
        """Effective <phi psi> product u[n] * (-v[-n])."""
        return -self.u_at(n) * self.v_at(-n)

    def vu(self, n: int) -> Scalar:
        """Effective <psi phi> product (-v[n]) * u[-n]."""
        return -self.v_at(n) * self.u_at(-n)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "A": str(self.A),
            "B": str(self.B),
            "provenance": self.provenance,
            "u": {str(n): str(c) for n, c in sorted(self.u.items())},
            "v": {str(n): str(c) for n, c in sorted(self.v.items())},
        }

    @staticmethod
    def from_json(data: dict) -> "CoefficientSet":
        return CoefficientSet(
            order=int(data["order"]),
            u={int(n): Fraction(c) for n, c in data["u"].items()},
            v={int(n): Fraction(c) for n, c in data["v"].items()},
            A=Fraction(data["A"]),
            B=Fraction(data["B"]),
            provenance=data["provenance"],
        )


def paper_printed_coefficients(heis: HeisenbergData, order: int) -> CoefficientSet:
    """The displayed coefficients with n-independent prefactors.

    u[n] = (pq)^{-1/2} / (q^n - 1), v[n] = q^{-1/2} / ((pq)^{-n} - 1).
    These do not solve the fitting equations; keep them for the
    side-by-side report.
    """
    q = heis.q
    pq = heis.p * q
    rpq = heis.sqrt_p * heis.sqrt_q
    u, v = {}, {}
    for n in range(1, order + 1):
        for m in (n, -n):
            u[m] = (ONE / rpq) / (q**m - ONE)
            v[m] = (ONE / heis.sqrt_q) / (pq ** (-m) - ONE)
    return CoefficientSet(order=order, u=u, v=v, provenance="paper-printed")


# -- fitting targets --------------------------------------------------


@dataclass(frozen=True)
class FitTargets:
    """One-sided expansions the coefficient products must reproduce.

    ee[a]: the contraction-normalized Riemann factor at nome q, whose
    inverse is exp<phi phi> without the zero-mode power.  ff[a]: the
    same object on the qt side for <psi psi>.  ef[a]: the closed EF
    kernel, equal to exp<phi psi> directly.  All are series in w/z with
    the Cartan entry a running over the nonzero entries.
    """

    kind: str
    order: int
    ee: dict
    ff: dict
    ef: dict


def _edge_germ(a: int, signed: bool) -> RationalGerm:
    base = (ONE, ONE) if signed else (ONE, -ONE)
    return RationalGerm(0, base, (ONE,)).pow_int(a)


def _poch_ratio_series(num: Scalar, den: Scalar, nome: Scalar, order: int) -> TruncatedSeries:
    """(num zeta; nome)_inf / (den zeta; nome)_inf as a series."""
    lg = TruncatedSeries(
        order,
        [ZERO]
        + [
            pochhammer_log_coeff(num, nome, n) - pochhammer_log_coeff(den, nome, n)
            for n in range(1, order + 1)
        ],
    )
    return lg.exp()


def upsilon_inner(a: int, X: Scalar, order: int) -> TruncatedSeries:
    """exp<phi psi> oscillator part as a series in x = w/z.

    Product form prod_i (1 - x X^{a-1-2i})^{-1} for a > 0 and the
    reciprocal polynomial for a < 0; log coefficients are
    (X^{an} - X^{-an})/(n (X^n - X^{-n})), independent of both nomes.
    """
    g = RationalGerm.one()
    for i in range(abs(a)):
        lin = RationalGerm(0, (ONE, -(X ** (abs(a) - 1 - 2 * i))), (ONE,))
        g = g * lin
    if a > 0:
        g = g.inverse()
    lau = g.series(order)
    if lau.exponent != 0:
        raise ValueError("EF kernel lost analyticity at 0")
    return lau.body


def _stripped_riemann(kind: str, a: int, heis: HeisenbergData, order: int,
                      signed: bool) -> TruncatedSeries:
    """Contraction-normalized EE factor from the structure-function one.

    The working factor satisfies Phi(z)/Phi(1/z) = Psi(z); the boson
    contraction produces the variant obeying the z^{-a}-twisted ratio
    identity instead, because the zero modes carry the z^{A_ij} power
    separately.  The two differ by an exact rational bridge: the edge
    factor (1 -+ z)^{-a} alone for the rational kernel, and
    (1 -+ z)^a T^2 (1 - z X^{-a})/(1 - z X^{a}) for theta, T being the
    telescoped ratio prod_j (1 - X^a p^{j-a} z)^{-1}.
    """
    X = heis.sqrt_p
    factor = RiemannFactor(kind, a, X, heis.p, heis.q, signed=signed)
    body = factor.series_inner(order).body
    if kind == RATIONAL:
        bridge = _edge_germ(a, signed).inverse()
    else:
        tel = _telescoped_ratio(a, X, heis.p)
        lin = RationalGerm(0, (ONE, -(X ** (-a))), (ONE, -(X**a)))
        bridge = _edge_germ(a, signed) * lin * tel * tel
    blau = bridge.series(order)
    if blau.exponent != 0:
        raise ValueError("bridge germ lost analyticity at 0")
    return body * blau.body


def _ff_factor(kind: str, a: int, heis: HeisenbergData, order: int) -> TruncatedSeries:
    """qt-side factor X^{a}/S_d with exp<psi psi> = (Bz)^{a} S_d(w/z).

    Theta: 1/S_d = T (X^{-a} z; qt)/(X^{a} z; qt) with T the
    telescoped rational ratio shared with the EE side.  Rational:
    1/S_d collapses to the finite product (p X^{a} z; p)/(p X^{-a} z; p)
    with no telescoped piece left over.
    """
    X = heis.sqrt_p
    if kind == THETA:
        tel = _telescoped_ratio(a, X, heis.p).series(order)
        if tel.exponent != 0:
            raise ValueError("telescoped factor lost analyticity at 0")
        ratio = _poch_ratio_series(X ** (-a), X**a, heis.qt, order)
        return (tel.body * ratio).scale(X**a)
    ratio = _poch_ratio_series(heis.p * X**a, heis.p * X ** (-a), heis.p, order)
    return ratio.scale(X**a)


def _entries(heis: HeisenbergData) -> list:
    vals = sorted({v for row in heis.cartan for v in row}, reverse=True)
    return [a for a in vals if a != 0]


def theta_fit_targets(heis: HeisenbergData, order: int, signed: bool = True) -> FitTargets:
    ee, ff, ef = {}, {}, {}
    for a in _entries(heis):
        ee[a] = _stripped_riemann(THETA, a, heis, order, signed)
        ff[a] = _ff_factor(THETA, a, heis, order)
        ef[a] = upsilon_inner(a, heis.sqrt_p, order)
    return FitTargets(kind=THETA, order=order, ee=ee, ff=ff, ef=ef)


def rational_fit_targets(heis: HeisenbergData, order: int, signed: bool = True) -> FitTargets:
    ee, ff, ef = {}, {}, {}
    for a in _entries(heis):
        ee[a] = _stripped_riemann(RATIONAL, a, heis, order, signed)
        ff[a] = _ff_factor(RATIONAL, a, heis, order)
        ef[a] = upsilon_inner(a, heis.sqrt_p, order)
    return FitTargets(kind=RATIONAL, order=order, ee=ee, ff=ff, ef=ef)


# -- the fitter -------------------------------------------------------


def _product_profile(series_by_a: dict, heis: HeisenbergData, order: int,
                     log_sign: int, label: str) -> list:
    """Solve w_n C_a(n) = (log target)_n across all Cartan entries."""
    out = [None] * (order + 1)
    for a, series in sorted(series_by_a.items(), reverse=True):
        const = series[0]
        if const == 0:
            raise ZeroDivisor(f"{label} target for entry {a} vanishes at 0")
        lg = series.scale(ONE / const).log()
        for n in range(1, order + 1):
            coeff = sc(log_sign) * lg[n]
            C = heis.entry_coefficient(a, n)
            if C == 0:
                if coeff != 0:
                    raise ZeroDivisor(
                        f"{label}: C(n={n}) = 0 for entry {a} but target is nonzero"
                    )
                continue
            w = coeff / C
            if out[n] is None:
                out[n] = w
            elif out[n] != w:
                raise InconsistentTarget(
                    f"{label}: entry {a} needs w_{n} = {w}, entry fit gave {out[n]}"
                )
    for n in range(1, order + 1):
        if out[n] is None:
            raise ZeroDivisor(f"{label}: no Cartan entry constrains mode {n}")
    return out


def fit_coefficients(targets: FitTargets, heis: HeisenbergData,
                     order: int | None = None) -> CoefficientSet:
    """Gauge-fixed coefficient set reproducing all three target families.

    exp<phi phi> must invert the normalized ee factor, exp<psi psi> the
    ff factor, and exp<phi psi> must equal the ef kernel, mode by mode
    after dividing by C(n).  The same w_n has to fit every Cartan entry
    at once; the a-dependence of both sides sits entirely in
    (X^{an} - X^{-an}), which is what the cross-check verifies.
    """
    if order is None:
        order = targets.order
    if order > targets.order:
        raise ModeCutoffExceeded(f"targets stop at order {targets.order}")
    w_uu = _product_profile(targets.ee, heis, order, -1, "ee")
    w_vv = _product_profile(targets.ff, heis, order, -1, "ff")
    w_uv = _product_profile(targets.ef, heis, order, +1, "ef")
    u, v = {}, {}
    for n in range(1, order + 1):
        if w_uv[n] * w_uv[n] != w_uu[n] * w_vv[n]:
            raise InconsistentTarget(
                f"mode {n}: (uv)^2 = {w_uv[n]**2} against uu*vv = {w_uu[n]*w_vv[n]};"
                " no split serves both operator orders"
            )
        if w_uu[n] == 0:
            raise ZeroDivisor(f"uu product vanishes at mode {n}")
        if w_uv[n] == 0:
            raise ZeroDivisor(f"uv product vanishes at mode {n}")
        u[-n] = ONE
        u[n] = w_uu[n]
        v[-n] = -w_uv[n] / w_uu[n]
        v[n] = w_vv[n] / v[-n]
    return CoefficientSet(order=order, u=u, v=v, provenance="fitted")


def verify_coefficients(coeffs: CoefficientSet, targets: FitTargets,
                        heis: HeisenbergData) -> Scalar:
    """Largest residual of the re-exponentiated contractions, exact."""
    order = min(coeffs.order, targets.order)
    worst = ZERO
    for family, product, log_sign in (
        ("ee", coeffs.uu, -1),
        ("ff", coeffs.vv, -1),
        ("ef", coeffs.uv, +1),
    ):
        for a, series in getattr(targets, family).items():
            osc = TruncatedSeries(
                order,
                [ZERO]
                + [product(n) * heis.entry_coefficient(a, n) for n in range(1, order + 1)],
            )
            norm = series.truncate(order).scale(ONE / series[0])
            got = osc.exp()
            want = norm.inverse() if log_sign < 0 else norm
            worst = max(worst, (got - want).max_abs())
    return worst


def coefficient_divergence(printed: CoefficientSet, fitted: CoefficientSet) -> dict:
    """Per-mode ratios printed/fitted of the observable products.

    The uu and vv ratios come out mode-independent ((pq)^{-1} and
    q^{-1}); the mixed products disagree mode-dependently and in the
    two operator orders differently, which is the substantive finding
    about the displayed coefficients.  Nothing is corrected silently.
    """
    order = min(printed.order, fitted.order)
    report = {"uu": {}, "vv": {}, "uv": {}, "vu": {}}
    for n in range(1, order + 1):
        for key, fn_p, fn_f in (
            ("uu", printed.uu, fitted.uu),
            ("vv", printed.vv, fitted.vv),
            ("uv", printed.uv, fitted.uv),
            ("vu", printed.vu, fitted.vu),
        ):
            denom = fn_f(n)
            report[key][n] = None if denom == 0 else fn_p(n) / denom
    return report


# -- contractions -----------------------------------------------------


@dataclass(frozen=True)
class Contraction:
    """<left_i(z) right_j(w)> split into zero-mode and oscillator data.

    osc is the one-sided series in x = w/z.  The zero modes contribute
    log_charge * log(base * z) with base A for a phi on the left and B
    for a psi; that power is genuinely a power of z, not of x, so it is
    kept as an integer tag.  exponentiated() returns exp of the whole
    contraction as a GLaurent whose exponent field records this z-power.
    """

    left: str
    right: str
    i: int
    j: int
    log_charge: int
    log_base: str
    base_value: Scalar
    osc: TruncatedSeries

    def exponentiated(self) -> GLaurent:
        body = self.osc.exp().scale(self.base_value**self.log_charge)
        return GLaurent(self.log_charge, body)


def contraction(left: str, right: str, i: int, j: int, coeffs: CoefficientSet,
                heis: HeisenbergData, order: int) -> Contraction:
    """Wick contraction of two boson legs, exact in every mode."""
    if left not in (PHI, PSI) or right not in (PHI, PSI):
        raise ValueError(f"legs must be {PHI!r} or {PSI!r}")
    if order > coeffs.order:
        raise ModeCutoffExceeded(
            f"order {order} beyond coefficient modes {coeffs.order}"
        )
    a = heis.entry(i, j)
    body = [ZERO]
    for n in range(1, order + 1):
        body.append(
            coeffs.leg_coefficient(left, n)
            * coeffs.leg_coefficient(right, -n)
            * heis.entry_coefficient(a, n)
        )
    charge = a if left == right else -a
    base = "A" if left == PHI else "B"
    return Contraction(
        left=left,
        right=right,
        i=i,
        j=j,
        log_charge=charge,
        log_base=base,
        base_value=coeffs.A if base == "A" else coeffs.B,
        osc=TruncatedSeries(order, body),
    )


# -- vertex operators -------------------------------------------------


@dataclass(frozen=True)
class Leg:
    site: int
    boson: str
    shift: Scalar


@dataclass(frozen=True)
class VertexOperator:
    """Normal-ordered current: charge, z^P rule and exponential legs.

    charge is the lattice charge in units of e_site; zpow the explicit
    prefactor power of the argument (z^{-2} for the Cartan currents).
    The z^P eigenvalue on momentum m is sum_k A_{site,k} m_k per leg
    sign, applied before the charge shifts the momentum.
    """

    kind: str
    site: int
    legs: tuple
    charge: int
    zpow: int


def build_vertex(kind: str, site: int, quarter: Scalar | None = None) -> VertexOperator:
    """E, F or the Cartan currents H+- at one site.

    quarter = p^{1/4} is required only for H+-, whose two legs sit at
    arguments shifted by p^{+-1/4}.
    """
    if kind == E_KIND:
        return VertexOperator(kind, site, (Leg(site, PHI, ONE),), +1, 0)
    if kind == F_KIND:
        return VertexOperator(kind, site, (Leg(site, PSI, ONE),), -1, 0)
    if kind not in (HP_KIND, HM_KIND):
        raise ValueError(f"unknown vertex kind {kind!r}")
    if quarter is None:
        raise ValueError("H currents need the exact quarter power p^{1/4}")
    quarter = sc(quarter)
    up = quarter if kind == HP_KIND else ONE / quarter
    legs = (Leg(site, PHI, up), Leg(site, PSI, ONE / up))
    return VertexOperator(kind, site, legs, 0, -2)


def vertex_operators(pt: ParameterPoint, site: int) -> dict:
    quarter = pt.p_quarter(1)
    return {k: build_vertex(k, site, quarter) for k in VERTEX_KINDS}


# -- Fock states ------------------------------------------------------


@dataclass(frozen=True)
class FockState:
    """Momentum lattice point dressed with creation modes.

    osc is a sorted tuple of ((site, n), multiplicity) with n > 0
    standing for a_site[-n]; degree is the total mode weight.
    """

    momentum: tuple
    osc: tuple = ()

    @staticmethod
    def vacuum(rank: int) -> "FockState":
        return FockState(momentum=(0,) * rank)

    @property
    def degree(self) -> int:
        return sum(n * mult for (_, n), mult in self.osc)

    def with_momentum(self, momentum) -> "FockState":
        return FockState(momentum=tuple(momentum), osc=self.osc)


def _with_osc(momentum, counts: dict) -> FockState:
    osc = tuple(sorted((key, m) for key, m in counts.items() if m > 0))
    return FockState(momentum=tuple(momentum), osc=osc)


def cocycle_sign(cartan, site: int, momentum) -> int:
    """Two-cocycle factor for a charged current crossing momentum m.

    epsilon(e_i, e_j) = (-1)^{A_ij} for i > j and +1 otherwise, so the
    ratio epsilon(e_i,e_j)/epsilon(e_j,e_i) is the (-1)^{A_ij} that
    converts the signed structure functions into the unsigned family.
    The sign is even in the charge, so E and F at one site agree.
    """
    total = 0
    for j in range(site):
        total += cartan[site][j] * momentum[j]
    return -1 if total % 2 else 1


def _partitions(total: int, maxpart: int):
    """Yield weight partitions of total with parts <= maxpart as dicts."""
    if total == 0:
        yield {}
        return
    for part in range(min(total, maxpart), 0, -1):
        for rest in _partitions(total - part, part):
            out = dict(rest)
            out[part] = out.get(part, 0) + 1
            yield out


def vertex_apply(V: VertexOperator, state: FockState, heis: HeisenbergData,
                 coeffs: CoefficientSet, window: tuple, *,
                 cocycle: bool = False, cutoff: int | None = None) -> dict:
    """Expansion of V(z)|state> over a window of powers of z.

    Returns {z-power: {FockState: Scalar}}, exact within the window.
    The annihilation exponential contracts into the state's creators
    (across sites, through C), the creation exponential repopulates
    them, and the zero modes contribute the charge shift, the z^P
    power and the shift-dependent scalar.
    """
    lo, hi = window
    site = V.site
    m = state.momentum
    pe = sum(heis.cartan[site][k] * m[k] for k in range(heis.rank))
    base_pow = V.zpow + V.charge * pe

    scalar0 = ONE
    for leg in V.legs:
        base = coeffs.A if leg.boson == PHI else coeffs.B
        eps = 1 if leg.boson == PHI else -1
        scalar0 *= (base * leg.shift) ** (eps * pe)
    if cocycle and V.charge != 0:
        scalar0 *= cocycle_sign(heis.cartan, site, m)

    new_m = list(m)
    new_m[site] += V.charge
    new_m = tuple(new_m)

    # leg sums of annihilation/creation coefficients at the vertex site
    def ann(n: int) -> Scalar:
        return sum(
            coeffs.leg_coefficient(leg.boson, n) * leg.shift ** (-n) for leg in V.legs
        )

    def cre(n: int) -> Scalar:
        return sum(
            coeffs.leg_coefficient(leg.boson, -n) * leg.shift**n for leg in V.legs
        )

    need = hi - base_pow + state.degree
    if need > coeffs.order:
        raise ModeCutoffExceeded(
            f"window needs creation modes up to {need}, stored {coeffs.order}"
        )

    entries = list(state.osc)
    out: dict = {}
    kill_choices = [range(mult + 1) for _, mult in entries]
    for kills in _iter_products(kill_choices):
        coeff = scalar0
        killpow = 0
        counts = {key: mult for key, mult in entries}
        ok = True
        for ((ksite, n), mult), c in zip(entries, kills):
            if c == 0:
                continue
            if n > coeffs.order:
                raise ModeCutoffExceeded(
                    f"state carries mode {n} beyond stored order {coeffs.order}"
                )
            gamma = ann(n) * heis.commutator_coefficient(site, ksite, n)
            if gamma == 0 and c > 0:
                ok = False
                break
            coeff *= math.comb(mult, c) * gamma**c
            counts[(ksite, n)] -= c
            killpow += n * c
        if not ok:
            continue
        kept_degree = state.degree - killpow
        for k in range(lo, hi + 1):
            needed = k - base_pow + killpow
            if needed < 0:
                continue
            for part in _partitions(needed, coeffs.order):
                ccoeff = coeff
                ncounts = dict(counts)
                for n, times in part.items():
                    ccoeff *= cre(n) ** times / math.factorial(times)
                    ncounts[(site, n)] = ncounts.get((site, n), 0) + times
                if ccoeff == 0:
                    continue
                if cutoff is not None and kept_degree + needed > cutoff:
                    raise CutoffExceeded(
                        f"degree {kept_degree + needed} beyond cutoff {cutoff}"
                    )
                st = _with_osc(new_m, ncounts)
                slot = out.setdefault(k, {})
                slot[st] = slot.get(st, ZERO) + ccoeff
                if slot[st] == 0:
                    del slot[st]
    return {k: states for k, states in out.items() if states}


def _iter_products(ranges):
    if not ranges:
        yield ()
        return
    for head in ranges[0]:
        for tail in _iter_products(ranges[1:]):
            yield (head,) + tail


def pair_states(bra: FockState, ket: FockState, heis: HeisenbergData) -> Scalar:
    """<bra|ket> under a_i[-n]^dagger = a_i[n]; a permanent in C per mode.

    Oscillators at different sites pair through the off-diagonal
    commutator, so the inner product is the permanent of the C_jk(n)
    matchings mode by mode, not a diagonal norm.
    """
    if bra.momentum != ket.momentum:
        return ZERO
    by_n: dict = {}
    for (site, n), mult in bra.osc:
        by_n.setdefault(n, ([], []))[0].extend([site] * mult)
    for (site, n), mult in ket.osc:
        by_n.setdefault(n, ([], []))[1].extend([site] * mult)
    total = ONE
    for n, (bsites, ksites) in by_n.items():
        if len(bsites) != len(ksites):
            return ZERO
        total *= _permanent(bsites, ksites, heis, n)
    return total


def _permanent(bsites, ksites, heis: HeisenbergData, n: int) -> Scalar:
    if not bsites:
        return ONE
    head, rest = bsites[0], bsites[1:]
    acc = ZERO
    for idx in range(len(ksites)):
        c = heis.commutator_coefficient(head, ksites[idx], n)
        if c == 0:
            continue
        acc += c * _permanent(rest, ksites[:idx] + ksites[idx + 1 :], heis, n)
    return acc


def matrix_element(bra: FockState, ops, ket: FockState, heis: HeisenbergData,
                   coeffs: CoefficientSet, bound: int, *,
                   region=None, cocycle: bool = False,
                   cutoff: int | None = None) -> dict:
    """<bra| V_1(x_1)...V_N(x_N) |ket> over the power window |k_i| <= bound.

    ops is a sequence of (VertexOperator, label); the product is
    expanded in the region where moduli decrease left to right, which
    is the order the operators are applied.  A region tuple that lists
    the labels in any other order raises RegionMismatch rather than
    silently re-expanding.
    """
    labels = tuple(label for _, label in ops)
    if len(set(labels)) != len(labels):
        raise ValueError("operator labels must be distinct")
    if region is not None and tuple(region) != labels:
        raise RegionMismatch(
            f"declared region {tuple(region)} against operator order {labels}"
        )
    frames = {ket: {(): ONE}}
    for V, _ in reversed(list(ops)):
        nxt: dict = {}
        for state, powmap in frames.items():
            res = vertex_apply(
                V, state, heis, coeffs, (-bound, bound),
                cocycle=cocycle, cutoff=cutoff,
            )
            for k, states in res.items():
                for st, cf in states.items():
                    slot = nxt.setdefault(st, {})
                    for pows, prev in powmap.items():
                        key = (k,) + pows
                        slot[key] = slot.get(key, ZERO) + cf * prev
        frames = nxt
    out: dict = {}
    for state, powmap in frames.items():
        overlap = pair_states(bra, state, heis)
        if overlap == 0:
            continue
        for pows, cf in powmap.items():
            val = cf * overlap
            if val != 0:
                out[pows] = out.get(pows, ZERO) + val
    return {k: v for k, v in out.items() if v != 0}


def element_window(elem: dict, bound: int) -> BiSeriesWindow:
    """Two-variable element as a BiSeriesWindow."""
    win = BiSeriesWindow(bound)
    for (kz, kw), val in elem.items():
        if win.in_window(kz, kw):
            win.add(kz, kw, val)
    return win


def wick_two_point(V1: VertexOperator, V2: VertexOperator, heis: HeisenbergData,
                   coeffs: CoefficientSet, bound: int, *,
                   cocycle: bool = False) -> BiSeriesWindow:
    """<vac|V1(z)V2(w)|vac> from the contraction exponential alone.

    Independent of the state-summation path: the product of all four
    leg pairings is exponentiated as a series in w/z, the zero-mode
    powers ride on the log-charges, and cross-checking against
    matrix_element is the Wick-consistency invariant.
    """
    rank = heis.rank
    charge = [0] * rank
    charge[V1.site] += V1.charge
    charge[V2.site] += V2.charge
    win = BiSeriesWindow(bound)
    if any(charge):
        return win
    order = 2 * bound + abs(V1.zpow) + abs(V2.zpow) + 4
    if order > coeffs.order:
        raise ModeCutoffExceeded(
            f"window bound {bound} needs modes up to {order}, stored {coeffs.order}"
        )
    total = TruncatedSeries.zero(order)
    zshift = 0
    scalar = ONE
    for l1 in V1.legs:
        for l2 in V2.legs:
            con = contraction(l1.boson, l2.boson, l1.site, l2.site, coeffs, heis, order)
            total = total + con.osc.substitute_scaled(l2.shift / l1.shift)
            zshift += con.log_charge
            scalar *= (con.base_value * l1.shift) ** con.log_charge
    if cocycle and V1.charge != 0:
        mom = [0] * rank
        mom[V2.site] += V2.charge
        scalar *= cocycle_sign(heis.cartan, V1.site, mom)
    body = total.exp()
    zp = V1.zpow + zshift
    wp = V2.zpow
    for j in range(order + 1):
        mz, nw = zp - j, wp + j
        if win.in_window(mz, nw):
            win.add(mz, nw, scalar * body[j])
    return win
