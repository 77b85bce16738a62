"""Relation verification on the free-boson realization.

Every check instantiates the currents on a truncated Fock space at c=1,
computes both sides of one defining relation with exact rational
arithmetic, and returns a CheckReport with the worst residual found.
Pass means residual <= tolerance; rational-kernel checks and all
region-closing comparisons run at tolerance zero, theta-kernel checks
that need resummation across regions run scalar-point comparisons
against truncated infinite products with a |q|-power tail bound.

The exchange checks come in three shapes:

* H-involved pairs close termwise: the realized two-sided normalization
  germ equals a single region expansion of the structure-function
  target, coefficient by coefficient.  Which region depends only on the
  sign of the quarter-power shift the currents carry: H+ against E or F
  closes in the outer expansion, H- in the inner one, and the HH pairs
  close inner/inner because the q-side and qt-side logs telescope
  through (1-q^n) d_q(n) = (1-qt^n) d_qt(n).
* The H+H- pair is the one relation whose two regions never share an
  annulus.  Its realized germ differs from the inner/inner target by an
  explicitly known rational factor R on each component, with R equal to
  its own reciprocal as a rational function; the check verifies both
  component matches and that palindromy certificate exactly, then
  confirms the resummed identity at scalar points.
* Charged pairs (EE, FF) carry a zero-mode monomial u^a, so no single
  region matches.  The check verifies the realized series against the
  closed product forms termwise, then the product-form ratio identity:
  exactly by rational-germ cross multiplication for the rational
  kernel, at scalar points for theta.

The EF bracket, the Serre relation, the level-2 coproduct images and
the two-parameter substitution map get their own checks below.
"""
from __future__ import annotations

import decimal
import math
import random
from dataclasses import dataclass

from .series_core import (
    ONE, ZERO, Scalar, sc, ParameterPoint, TruncatedSeries, GLaurent,
    BiSeriesWindow,
)
from .qfunctions import RATIONAL, THETA
from .cartan import cartan_matrix
from .structure import (
    INNER, OUTER, RationalGerm, RegionGerm, psi_rational_germ,
    psi_theta_germ, psi_scalar_value, upsilon_delta_target,
    _telescoped_ratio,
)
from .fock import (
    PHI, PSI, E_KIND, F_KIND, HP_KIND, HM_KIND,
    HeisenbergData, CoefficientSet, FockState, VertexOperator,
    ModeCutoffExceeded, build_vertex, contraction, cocycle_sign,
    fit_coefficients, pair_states, paper_printed_coefficients,
    rational_fit_targets, theta_fit_targets, upsilon_inner,
    verify_coefficients, coefficient_divergence, vertex_apply,
    wick_two_point, _partitions, _poch_ratio_series, _with_osc,
)
from .algebra_spec import (
    AlgebraSpec, LadderConfig, make_family1, mu_central, mu_map,
    specialization_prefactor_ratio, CurrentSymbol,
)
from . import hopf as _hopf


class RealizationError(ValueError):
    pass


def _fmt(v) -> str:
    """Exact string when printable, scientific approximation otherwise.

    Residuals of deep theta runs are exact rationals whose digits can
    exceed interpreter string-conversion limits."""
    try:
        return str(v)
    except ValueError:
        return f"{float(v):.6e}"


# -- reports -----------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    """One verified statement: id, parameters, worst residual, verdict."""

    check: str
    params: dict
    residual: Scalar
    tolerance: Scalar
    passed: bool
    notes: tuple

    @staticmethod
    def from_residual(check: str, params: dict, residual: Scalar,
                      tolerance: Scalar, notes=()) -> "CheckReport":
        residual = sc(residual)
        tolerance = sc(tolerance)
        return CheckReport(check, dict(params), residual, tolerance,
                           residual <= tolerance, tuple(notes))

    def as_dict(self) -> dict:
        return {
            "id": self.check,
            "params": {k: _fmt(v) for k, v in self.params.items()},
            "residual": _fmt(self.residual),
            "tolerance": _fmt(self.tolerance),
            "pass": self.passed,
            "notes": list(self.notes),
        }


def _max(*vals: Scalar) -> Scalar:
    out = ZERO
    for v in vals:
        a = -v if v < 0 else v
        if a > out:
            out = a
    return out


# -- the realized algebra ----------------------------------------------


class Realization:
    """A c=1 free-boson realization pinned to one parameter point.

    Bundles the Heisenberg data, a coefficient set (fitted by default,
    or the printed closed forms for divergence reports) and the vertex
    operator dressing.  kernel selects which structure-function family
    the relations are checked against.
    """

    def __init__(self, cartan, point: ParameterPoint, kernel: str = THETA,
                 order: int = 40, provenance: str = "fitted",
                 coeffs: CoefficientSet | None = None):
        if point.family != 1 or point.c != 1:
            raise RealizationError("free-boson dressing needs a family-1 point at c=1")
        if kernel not in (RATIONAL, THETA):
            raise RealizationError(f"unsupported kernel {kernel!r}")
        self.cartan = tuple(tuple(int(a) for a in row) for row in cartan)
        self.point = point
        self.kernel = kernel
        self.order = order
        self.provenance = provenance
        self.heis = HeisenbergData.from_point(cartan, point)
        self.targets = (theta_fit_targets(self.heis, order) if kernel == THETA
                        else rational_fit_targets(self.heis, order))
        if coeffs is not None:
            self.coeffs = coeffs
        elif provenance == "fitted":
            self.coeffs = fit_coefficients(self.targets, self.heis)
        elif provenance == "paper":
            self.coeffs = paper_printed_coefficients(self.heis, order)
        else:
            raise RealizationError(f"unknown provenance {provenance!r}")
        self.sigma = point.p_quarter(1)
        self.x = self.heis.sqrt_p
        self._vertices: dict[tuple[str, int], VertexOperator] = {}
        self._legsums: dict = {}
        self._spec: AlgebraSpec | None = None

    @property
    def rank(self) -> int:
        return len(self.cartan)

    def entry(self, i: int, j: int) -> int:
        return self.cartan[i][j]

    def vertex(self, kind: str, site: int) -> VertexOperator:
        key = (kind, site)
        if key not in self._vertices:
            self._vertices[key] = build_vertex(kind, site, self.sigma)
        return self._vertices[key]

    def _leg_sums(self, V: VertexOperator):
        """Memoized creation/annihilation leg-coefficient sums of V."""
        got = self._legsums.get(V)
        if got is None:
            coeffs = self.coeffs
            cre_cache: dict = {}
            ann_cache: dict = {}

            def cre(n: int) -> Scalar:
                v = cre_cache.get(n)
                if v is None:
                    v = sum(coeffs.leg_coefficient(leg.boson, -n) * leg.shift ** n
                            for leg in V.legs)
                    cre_cache[n] = v
                return v

            def ann(n: int) -> Scalar:
                v = ann_cache.get(n)
                if v is None:
                    v = sum(coeffs.leg_coefficient(leg.boson, n) * leg.shift ** (-n)
                            for leg in V.legs)
                    ann_cache[n] = v
                return v

            got = (cre, ann)
            self._legsums[V] = got
        return got

    def spec(self) -> AlgebraSpec:
        if self._spec is None:
            self._spec = make_family1(self.cartan, self.point)
        return self._spec

    def tolerance(self, order: int) -> Scalar:
        if self.kernel == RATIONAL:
            return ZERO
        q = self.heis.q
        return abs(q) ** max(order - 5, 1)

    def describe(self) -> dict:
        return {
            "s": self.point.s, "t": self.point.t,
            "q": self.heis.q, "p": self.heis.p,
            "kernel": self.kernel, "order": self.order,
            "provenance": self.provenance,
        }


def realize(diagram: str = "A2", s=None, t=None, kernel: str = THETA,
            order: int = 40, provenance: str = "fitted") -> Realization:
    """Standard entry point: simply-laced diagram plus quartic roots."""
    s = sc(s) if s is not None else sc("1/2")
    t = sc(t) if t is not None else sc("1/3")
    point = ParameterPoint.family1(s, t, 1)
    return Realization(cartan_matrix(diagram), point, kernel=kernel,
                       order=order, provenance=provenance)


# -- closed product forms of the contraction exponentials --------------
#
# exp<phi phi> = (Az)^a S_c(w/z), exp<psi psi> = (Bz)^a S_d(w/z),
# exp<phi psi> = (Az)^{-a} U(w/z); the series below are the oscillator
# parts, the values their resummations.  T is the finite telescoped
# p-ratio shared by S_c and S_d.


def _rd_germ(a: int, x: Scalar) -> RationalGerm:
    # S_d telescopes to a polynomial: prod_{k=1}^{|a|} (1 - x^{2k-|a|} zeta)
    out = RationalGerm.one()
    for k in range(1, abs(a) + 1):
        out = out * RationalGerm(0, (ONE, -(x ** (2 * k - abs(a)))), (ONE,))
    return out if a > 0 else out.inverse()


def _s_series(real: Realization, left: str, right: str, a: int,
              order: int) -> TruncatedSeries:
    x = real.x
    if left != right:
        return upsilon_inner(a, x, order)
    if a == 0:
        return TruncatedSeries.one(order)
    heis = real.heis
    if left == PHI:
        if real.kernel == RATIONAL:
            return _telescoped_ratio(a, x, heis.p).inverse().series(order).body
        tinv = _telescoped_ratio(a, x, heis.p).inverse().series(order).body
        return tinv * _poch_ratio_series(x ** (-a) * heis.q, x ** a * heis.q,
                                         heis.q, order)
    if real.kernel == RATIONAL:
        return _rd_germ(a, x).series(order).body
    tinv = _telescoped_ratio(a, x, heis.p).inverse().series(order).body
    return tinv * _poch_ratio_series(x ** a, x ** (-a), heis.qt, order)


def _poch_value(c: Scalar, nome: Scalar, factors: int) -> Scalar:
    out = ONE
    cur = sc(c)
    for _ in range(factors):
        out *= ONE - cur
        cur *= nome
    return out


def _s_value(real: Realization, left: str, right: str, a: int,
             zeta: Scalar, factors: int) -> Scalar:
    x = real.x
    if left != right:
        out = ONE
        for i in range(abs(a)):
            out *= ONE - zeta * x ** (abs(a) - 1 - 2 * i)
        return ONE / out if a > 0 else out
    if a == 0:
        return ONE
    heis = real.heis
    tval = _telescoped_ratio(a, x, heis.p).eval_at(zeta)
    if left == PHI:
        if real.kernel == RATIONAL:
            return ONE / tval
        return (_poch_value(x ** (-a) * heis.q * zeta, heis.q, factors)
                / _poch_value(x ** a * heis.q * zeta, heis.q, factors) / tval)
    if real.kernel == RATIONAL:
        return _rd_germ(a, x).eval_at(zeta)
    return (_poch_value(x ** a * zeta, heis.qt, factors)
            / _poch_value(x ** (-a) * zeta, heis.qt, factors) / tval)


# -- two-sided normalizations ------------------------------------------


def _pair_profile(real: Realization, VA: VertexOperator, VB: VertexOperator,
                  i: int, j: int, order: int):
    """(zshift, kappa, series) of exp<A_i(z) B_j(w)> in zeta = w/z."""
    total = TruncatedSeries.zero(order)
    zshift = 0
    kappa = ONE
    for l1 in VA.legs:
        for l2 in VB.legs:
            con = contraction(l1.boson, l2.boson, i, j, real.coeffs,
                              real.heis, order)
            total = total + con.osc.substitute_scaled(l2.shift / l1.shift)
            zshift += con.log_charge
            kappa *= (con.base_value * l1.shift) ** con.log_charge
    return zshift, kappa, total.exp()


_CHARGED = (E_KIND, F_KIND)


def _cocycle_ratio(real: Realization, kindA: str, kindB: str,
                   i: int, j: int, cocycle: bool) -> Scalar:
    # two-cocycle exchange ratio epsilon(e_i,e_j)/epsilon(e_j,e_i)
    if cocycle and kindA in _CHARGED and kindB in _CHARGED:
        return sc(-1) ** real.entry(i, j)
    return ONE


def exchange_germ(real: Realization, kindA: str, i: int, kindB: str, j: int,
                  order: int, *, cocycle: bool = False) -> RegionGerm:
    """Realized A_i(z) B_j(w) = G(z/w) B_j(w) A_i(z) as a region germ.

    Inner component in u = z/w, outer in 1/u; the monomial power is the
    zero-mode charge pairing and kappa collects lattice shift scalars.
    """
    VA, VB = real.vertex(kindA, i), real.vertex(kindB, j)
    sA, kapA, serA = _pair_profile(real, VA, VB, i, j, order)
    sB, kapB, serB = _pair_profile(real, VB, VA, j, i, order)
    if sA != sB:
        raise RealizationError(f"zero-mode pairing asymmetry {sA} != {sB}")
    eps = _cocycle_ratio(real, kindA, kindB, i, j, cocycle)
    return RegionGerm(sA, eps * kapA / kapB, serB.inverse(), serA)


def _profile_value(real: Realization, VA: VertexOperator, VB: VertexOperator,
                   i: int, j: int, u0: Scalar, factors: int):
    """(zshift, kappa * resummed series) of exp<A_i(z) B_j(w)> at z/w = u0.

    The zero-mode monomial u0^zshift is left to the caller so that the
    exchange ratio carries it exactly once.
    """
    a = real.entry(i, j)
    val = ONE
    zshift = 0
    kappa = ONE
    for l1 in VA.legs:
        for l2 in VB.legs:
            charge = a if l1.boson == l2.boson else -a
            zshift += charge
            base = real.coeffs.A if l1.boson == PHI else real.coeffs.B
            kappa *= (base * l1.shift) ** charge
            val *= _s_value(real, l1.boson, l2.boson, a,
                            l2.shift / (l1.shift * u0), factors)
    return zshift, kappa * val


def exchange_value(real: Realization, kindA: str, i: int, kindB: str, j: int,
                   u0: Scalar, factors: int, *, cocycle: bool = False) -> Scalar:
    VA, VB = real.vertex(kindA, i), real.vertex(kindB, j)
    eps = _cocycle_ratio(real, kindA, kindB, i, j, cocycle)
    sA, nAB = _profile_value(real, VA, VB, i, j, u0, factors)
    sB, nBA = _profile_value(real, VB, VA, j, i, ONE / u0, factors)
    if sA != sB:
        raise RealizationError(f"zero-mode pairing asymmetry {sA} != {sB}")
    return eps * u0 ** sA * nAB / nBA


# -- structure-function targets ----------------------------------------


_PAIR_TAG = {
    (HP_KIND, HP_KIND): "HpHp", (HM_KIND, HM_KIND): "HmHm",
    (HP_KIND, HM_KIND): "HpHm",
    (HP_KIND, E_KIND): "HpE", (HM_KIND, E_KIND): "HmE",
    (HP_KIND, F_KIND): "HpF", (HM_KIND, F_KIND): "HmF",
    (E_KIND, E_KIND): "EE", (F_KIND, F_KIND): "FF",
    (E_KIND, F_KIND): "EF",
}

# tag -> (nome key, sigma exponent in p^{1/4}, closing region, invert)
_H_REGION = {
    "HpE": ("q", 1, OUTER, False),
    "HmE": ("q", -1, INNER, False),
    "HpF": ("qt", -1, OUTER, True),
    "HmF": ("qt", 1, INNER, True),
}


def _canonical_pair(kindA: str, kindB: str):
    if (kindA, kindB) in _PAIR_TAG:
        return kindA, kindB, _PAIR_TAG[(kindA, kindB)], False
    if (kindB, kindA) in _PAIR_TAG:
        return kindB, kindA, _PAIR_TAG[(kindB, kindA)], True
    raise RealizationError(f"no exchange relation for ({kindA}, {kindB})")


def _nome(real: Realization, key: str) -> Scalar:
    return real.heis.q if key == "q" else real.heis.qt


def _rational_region(P: RationalGerm, order: int, region: str) -> RegionGerm:
    """One-region expansion of a rational structure factor as a germ."""
    if region == INNER:
        gl = P.series(order)
        return RegionGerm(gl.exponent, gl.body[0],
                          gl.body.scale(ONE / gl.body[0]),
                          TruncatedSeries.one(order))
    gl = P.at_reciprocal().series(order)
    return RegionGerm(-gl.exponent, gl.body[0], TruncatedSeries.one(order),
                      gl.body.scale(ONE / gl.body[0]))


def _hh_mirror_defect(a: int, x: Scalar) -> RationalGerm:
    """The H+H- region defect [(1-X^{a+1}w)(1-X^{-a-1}w)] /
    [(1-X^{a-1}w)(1-X^{-a+1}w)]; equal to its own reciprocal."""
    num = (RationalGerm(0, (ONE, -(x ** (a + 1))), (ONE,))
           * RationalGerm(0, (ONE, -(x ** (-a - 1))), (ONE,)))
    den = (RationalGerm(0, (ONE, -(x ** (a - 1))), (ONE,))
           * RationalGerm(0, (ONE, -(x ** (-a + 1))), (ONE,)))
    return num * den.inverse()


def _h_target_germ(real: Realization, tag: str, a: int, order: int) -> RegionGerm:
    x = real.x
    sig = real.sigma
    if real.kernel == THETA:
        if tag in ("HpHp", "HmHm"):
            return (psi_theta_germ(a, x, real.heis.q, order, INNER)
                    * psi_theta_germ(a, x, real.heis.qt, order, INNER).inverse())
        if tag == "HpHm":
            return (psi_theta_germ(a, x, real.heis.q, order, INNER, sigma=x)
                    * psi_theta_germ(a, x, real.heis.qt, order, INNER,
                                     sigma=ONE / x).inverse())
        key, sexp, region, invert = _H_REGION[tag]
        g = psi_theta_germ(a, x, _nome(real, key), order, region,
                           sigma=sig ** sexp)
        return g.inverse() if invert else g
    # rational kernel: same region rule on the rational factors
    if tag in ("HpHp", "HmHm"):
        return RegionGerm.one(order)
    if tag == "HpHm":
        P = (psi_rational_germ(a, x, sigma=x)
             * psi_rational_germ(a, x, sigma=ONE / x).inverse())
        return _rational_region(P, order, OUTER)
    key, sexp, region, invert = _H_REGION[tag]
    P = psi_rational_germ(a, x, sigma=sig ** sexp)
    if invert:
        P = P.inverse()
    return _rational_region(P, order, region)


def _target_value(real: Realization, tag: str, i: int, j: int, u0: Scalar,
                  factors: int, signed: bool) -> Scalar:
    spec = real.spec()
    out = ONE
    for fac in spec.exchange_factors(tag, i, j):
        a = real.entry(fac.i, fac.j)
        nome = _nome(real, fac.nome_key) if real.kernel == THETA else None
        v = psi_scalar_value(real.kernel, a, real.x, u0 * fac.shift,
                             nome=nome, signed=signed, factors=factors)
        out *= ONE / v if fac.invert else v
    return out


def _dyadic(n: int) -> bool:
    return n & (n - 1) == 0


def _scalar_points(seed: int, count: int) -> list[Scalar]:
    # dyadic num/den ratios sit on the x- and sigma-power pole lattice
    # of the standard point, so they are excluded up front
    rng = random.Random(seed)
    pts = []
    while len(pts) < count:
        num = rng.randint(2, 23)
        den = rng.randint(2, 23)
        if _dyadic(num) and _dyadic(den):
            continue
        u0 = sc(num) / sc(den)
        if u0 != 1 and u0 not in pts:
            pts.append(u0)
    return pts


# -- the exchange check ------------------------------------------------


def check_exchange(real: Realization, kindA: str, kindB: str, i: int, j: int,
                   *, order: int = 16, cocycle: bool = False, seed: int = 11,
                   points: int = 3, factors: int = 48) -> CheckReport:
    """One delta-free defining relation A_i(z) B_j(w) = Psi(...) B_j(w) A_i(z).

    H-involved pairs are compared termwise against the region expansion
    that closes exactly; EE/FF and H+H- additionally certify the
    cross-region resummation (rational-germ identity for the rational
    kernel, scalar points for theta).
    """
    if order > real.order:
        raise RealizationError("germ order exceeds the coefficient cutoff")
    cA, cB, tag, mirrored = _canonical_pair(kindA, kindB)
    ci, cj = (j, i) if mirrored else (i, j)
    a = real.entry(ci, cj)
    check_id = f"exchange.{tag}.{real.kernel}.i{ci}j{cj}"
    params = dict(real.describe(), tag=tag, i=ci, j=cj, entry=a,
                  germ_order=order, cocycle=cocycle, seed=seed, points=points)
    notes = []
    if mirrored:
        notes.append("mirrored argument order; verified via the canonical relation")
    signed = not cocycle
    tol = ZERO

    g = exchange_germ(real, cA, ci, cB, cj, order, cocycle=cocycle)

    if a == 0:
        notes.append("Cartan entry 0: contraction exponential is 1 and the "
                     "structure function is 1; the currents commute")
        return CheckReport.from_residual(check_id, params,
                                         g.residual_from_one(), ZERO, notes)

    if tag in ("EE", "FF", "EF"):
        boson = {
            "EE": (PHI, PHI), "FF": (PSI, PSI), "EF": (PHI, PSI),
        }[tag]
        S = _s_series(real, boson[0], boson[1], a, order)
        Sinv = S.inverse()
        m_expect = a if tag != "EF" else -a
        res_shape = _max(ZERO if g.m == m_expect else ONE,
                         g.kappa - _cocycle_ratio(real, cA, cB, ci, cj, cocycle))
        res_inner = (g.inner - Sinv).max_abs()
        res_outer = (g.outer - S).max_abs()
        notes.append("realized normalization matches the closed product "
                     "form termwise on both sides")
        if tag == "EF":
            notes.append("charge-paired normalizations only; the bracket is "
                         "a delta distribution, see the EF delta check")
            return CheckReport.from_residual(
                check_id, params, _max(res_shape, res_inner, res_outer),
                ZERO, notes)
        if real.kernel == RATIONAL:
            if tag == "EE":
                base = _telescoped_ratio(a, real.x, real.heis.p)
            else:
                base = _rd_germ(a, real.x).inverse()
            # exchange function u^a S(1/u)/S(u) with S = 1/base
            lhs = (RationalGerm.monomial(a) * base
                   * base.at_reciprocal().inverse())
            target = psi_rational_germ(a, real.x, signed=signed)
            if tag == "FF":
                target = target.inverse()
            res_closure = lhs.residual_from(target)
            notes.append("ratio identity certified by rational-germ cross "
                         "multiplication")
        else:
            key = "q" if tag == "EE" else "qt"
            nome = _nome(real, key)
            res_closure = ZERO
            for u0 in _scalar_points(seed, points):
                lhs = (u0 ** a
                       * _s_value(real, boson[0], boson[1], a, ONE / u0, factors)
                       / _s_value(real, boson[0], boson[1], a, u0, factors))
                rhs = psi_scalar_value(THETA, a, real.x, u0, nome=nome,
                                       signed=signed, factors=factors)
                if tag == "FF":
                    rhs = ONE / rhs
                if cocycle:
                    lhs = lhs * _cocycle_ratio(real, cA, cB, ci, cj, True)
                res_closure = _max(res_closure, lhs - rhs)
            tol = real.tolerance(order)
            notes.append(f"ratio identity at {points} scalar points, "
                         f"truncated products with {factors} factors")
        conv = "unsigned (cocycle-dressed)" if cocycle else "signed (bare)"
        notes.append(f"structure-function sign convention: {conv}")
        return CheckReport.from_residual(
            check_id, params, _max(res_shape, res_inner, res_outer, res_closure),
            tol, notes)

    # H-involved relations; sign convention immaterial (kappa ratios cancel)
    target = _h_target_germ(real, tag, a, order)
    if tag == "HpHm":
        defect = g * target.inverse()
        if real.kernel == RATIONAL:
            res = g.componentwise_residual(target)
            notes.append("rational kernel: single outer expansion closes")
            return CheckReport.from_residual(check_id, params, res, ZERO, notes)
        R = _hh_mirror_defect(a, real.x)
        rs = R.series(order).body
        ris = R.inverse().series(order).body
        res_m = ZERO if defect.m == 0 else ONE
        res_k = defect.kappa - ONE
        res_in = (defect.inner - ris).max_abs()
        res_out = (defect.outer - rs).max_abs()
        res_pal = R.residual_from(R.at_reciprocal())
        res_scalar = ZERO
        for u0 in _scalar_points(seed, points):
            lhs = exchange_value(real, cA, ci, cB, cj, u0, factors)
            rhs = _target_value(real, tag, ci, cj, u0, factors, signed=False)
            res_scalar = _max(res_scalar, lhs - rhs)
        notes.append("the two regions of this relation share no annulus; "
                     "the inner/inner target is off by the palindromic "
                     "rational factor R on each component, and R equals "
                     "its own reciprocal, so the resummed identity holds")
        notes.append(f"resummation confirmed at {points} scalar points")
        res = _max(res_m, res_k, res_in, res_out, res_pal)
        return CheckReport.from_residual(
            check_id, params, _max(res, res_scalar),
            real.tolerance(order), notes)
    res = g.componentwise_residual(target)
    if tag in ("HpHp", "HmHm"):
        if real.kernel == RATIONAL:
            notes.append("rational kernel has one nome, so the q/qt ratio "
                         "degenerates to 1 and the currents commute")
        else:
            notes.append("q-side and qt-side contraction logs telescope "
                         "through the shared numerator; inner/inner "
                         "expansion closes termwise")
    else:
        region = _H_REGION[tag][2]
        notes.append(f"closes termwise in the {region} expansion; "
                     "quarter-power shift direction selects the region")
    notes.append("H-involved relations are insensitive to the cocycle "
                 "toggle and the kernel sign convention")
    return CheckReport.from_residual(check_id, params, res, ZERO, notes)


# -- capped state-sum pipeline -----------------------------------------
#
# vertex_apply explores every window power at every step, which is
# wasteful in chains: an intermediate state whose degree exceeds what
# the remaining operators can shed again never reaches the bra.  The
# capped variant reproduces vertex_apply coefficients exactly but only
# keeps images of degree <= cap, and the chain driver derives the caps
# from the exact grading  degree(image) - degree(state) = k - base.


def _vertex_apply_capped(real: Realization, V: VertexOperator,
                         state: FockState, bound: int, cap: int, *,
                         cocycle: bool = False) -> dict:
    """{z-power: {FockState: Scalar}} of V(z)|state>, image degree <= cap."""
    heis, coeffs = real.heis, real.coeffs
    if cap > coeffs.order:
        raise ModeCutoffExceeded(
            f"degree cap {cap} beyond coefficient modes {coeffs.order}")
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
    cre, ann = real._leg_sums(V)

    entries = list(state.osc)
    out: dict = {}

    def walk(idx, counts, coeff, killpow):
        if idx == len(entries):
            kept = state.degree - killpow
            if kept > cap:
                return
            for needed in range(cap - kept + 1):
                k = base_pow - killpow + needed
                if abs(k) > bound:
                    continue
                for part in _partitions(needed, coeffs.order):
                    ccoeff = coeff
                    ncounts = dict(counts)
                    for n, times in part.items():
                        ccoeff *= cre(n) ** times / math.factorial(times)
                        ncounts[(site, n)] = ncounts.get((site, n), 0) + times
                    if ccoeff == 0:
                        continue
                    st = _with_osc(new_m, ncounts)
                    slot = out.setdefault(k, {})
                    slot[st] = slot.get(st, ZERO) + ccoeff
                    if slot[st] == 0:
                        del slot[st]
            return
        (ksite, n), mult = entries[idx]
        if n > coeffs.order:
            raise ModeCutoffExceeded(
                f"state carries mode {n} beyond stored order {coeffs.order}")
        gamma = ann(n) * heis.commutator_coefficient(site, ksite, n)
        for c in range(mult + 1):
            if c > 0 and gamma == 0:
                break
            counts[(ksite, n)] = mult - c
            walk(idx + 1, counts, coeff * math.comb(mult, c) * gamma ** c,
                 killpow + n * c)
        counts[(ksite, n)] = mult

    walk(0, {key: mult for key, mult in entries}, scalar0, 0)
    return {k: states for k, states in out.items() if states}


def _chain_tables(real: Realization, ops, bras, ket: FockState, bound: int,
                  *, cocycle: bool = False):
    """Matrix elements of a chain of vertex operators for several bras.

    ops is a list of VertexOperator applied right to left on ket; the
    result maps each bra to {(k_0,...,k_{n-1}): value} with |k_i| <=
    bound, plus the per-operator base powers.  All bras must share one
    momentum; frames are shared across bras and pruned by the exact
    reachability ceilings.
    """
    heis = real.heis
    rank = heis.rank
    bmoms = {bra.momentum for bra in bras}
    if len(bmoms) != 1:
        raise RealizationError("chain bras must share one momentum")
    bmom = next(iter(bmoms))
    n = len(ops)
    mom_right = [None] * n
    cur = ket.momentum
    for idx in range(n - 1, -1, -1):
        mom_right[idx] = cur
        nxt = list(cur)
        nxt[ops[idx].site] += ops[idx].charge
        cur = tuple(nxt)
    bases = []
    for idx in range(n):
        pe = sum(heis.cartan[ops[idx].site][k] * mom_right[idx][k]
                 for k in range(rank))
        bases.append(ops[idx].zpow + ops[idx].charge * pe)
    if cur != bmom:
        return {bra: {} for bra in bras}, bases
    dmax = max(bra.degree for bra in bras)
    ceils = [dmax + sum(bound + bases[m] for m in range(idx))
             for idx in range(n)]

    frames = {ket: {(): ONE}}
    for idx in range(n - 1, 0, -1):
        nxt: dict = {}
        for state, powmap in frames.items():
            res = _vertex_apply_capped(real, ops[idx], state, bound,
                                       ceils[idx], cocycle=cocycle)
            for k, states in res.items():
                for st, cf in states.items():
                    slot = nxt.setdefault(st, {})
                    for pows, prev in powmap.items():
                        key = (k,) + pows
                        slot[key] = slot.get(key, ZERO) + cf * prev
        frames = nxt
    out = {bra: {} for bra in bras}
    for state, powmap in frames.items():
        res = _vertex_apply_capped(real, ops[0], state, bound, ceils[0],
                                   cocycle=cocycle)
        for k, states in res.items():
            for st, cf in states.items():
                if st.momentum != bmom:
                    continue
                for bra in bras:
                    overlap = pair_states(bra, st, heis)
                    if overlap == 0:
                        continue
                    tab = out[bra]
                    for pows, prev in powmap.items():
                        key = (k,) + pows
                        val = tab.get(key, ZERO) + cf * prev * overlap
                        if val == 0:
                            tab.pop(key, None)
                        else:
                            tab[key] = val
    return out, bases


def _me_table(real: Realization, bra: FockState, ops, ket: FockState,
              bound: int, cocycle: bool) -> dict:
    """Single-bra chain table; ops is a list of (VertexOperator, label)."""
    tables, _ = _chain_tables(real, [V for V, _ in ops], [bra], ket, bound,
                              cocycle=cocycle)
    return tables[bra]


# -- the EF delta bracket ----------------------------------------------


def _commutator_window(real: Realization, i: int, j: int, bra: FockState,
                       ket: FockState, bound: int, *, cocycle: bool,
                       bare_weight: Scalar = ONE) -> dict:
    """[E_i(z), F_j(w)] matrix elements keyed (kz, kw)."""
    E, F = real.vertex(E_KIND, i), real.vertex(F_KIND, j)
    ef = _me_table(real, bra, [(E, "z"), (F, "w")], ket, bound, cocycle)
    fe = _me_table(real, bra, [(F, "w"), (E, "z")], ket, bound, cocycle)
    out = dict(ef)
    for (kw, kz), v in fe.items():
        out[(kz, kw)] = out.get((kz, kw), ZERO) - bare_weight * v
    return {k: v for k, v in out.items() if v != 0}


def _delta_dressed_rhs(real: Realization, i: int, bra: FockState,
                       ket: FockState, bound: int, cocycle: bool) -> dict:
    """pref [delta(z p^{-1/2}/w) H+_i(w p^{1/4}) - delta(w p^{-1/2}/z)
    H-_i(z p^{1/4})] from the actual H matrix elements."""
    x, sig = real.x, real.sigma
    pref = ONE / (x - ONE / x)
    hp = _me_table(real, bra, [(real.vertex(HP_KIND, i), "v")], ket,
                   bound + 4, cocycle)
    hm = _me_table(real, bra, [(real.vertex(HM_KIND, i), "v")], ket,
                   bound + 4, cocycle)
    out: dict = {}
    for (k,), hv in hp.items():
        for m in range(max(-bound, k - bound), min(bound, k + bound) + 1):
            key = (m, k - m)
            out[key] = out.get(key, ZERO) + pref * x ** (-m) * sig ** k * hv
    for (k,), hv in hm.items():
        for m in range(max(-bound, k - bound), min(bound, k + bound) + 1):
            key = (k - m, m)
            out[key] = out.get(key, ZERO) - pref * x ** (-m) * sig ** k * hv
    return out


def _window_diff(D: dict, R: dict, bound: int) -> Scalar:
    worst = ZERO
    for key in set(D) | set(R):
        kz, kw = key
        if abs(kz) > bound or abs(kw) > bound:
            continue
        worst = _max(worst, D.get(key, ZERO) - R.get(key, ZERO))
    return worst


def _default_ef_states(real: Realization, i: int, j: int) -> list[FockState]:
    rank = real.rank
    states = [FockState.vacuum(rank)]
    states.append(FockState(momentum=(0,) * rank, osc=(((i, 1), 1),)))
    if rank > 1:
        other = (i + 1) % rank
        mom = tuple(1 if k == other else 0 for k in range(rank))
        states.append(FockState(momentum=mom, osc=()))
        states.append(FockState(momentum=mom, osc=(((j, 2), 1),)))
    return states


def check_EF_delta(real: Realization, i: int, j: int, *, window: int = 12,
                   states: list[FockState] | None = None) -> CheckReport:
    """The bracket [E_i(z), F_j(w)] as a window of matrix elements.

    For i = j the commutator must live on the two lines z/w = p^{+-1/2}
    with weights reproduced by the H+- matrix elements at shifted
    arguments and prefactor 1/(p^{1/2} - p^{-1/2}).  For i != j it
    vanishes identically: as a plain difference in the cocycle-dressed
    convention, and against the weight (-1)^{A_ij} in the bare one.
    All comparisons are exact.
    """
    params = dict(real.describe(), i=i, j=j, window=window)
    notes = []
    kets = states if states is not None else _default_ef_states(real, i, j)
    rank = real.rank
    shift_mom = tuple((1 if k == i else 0) - (1 if k == j else 0)
                      for k in range(rank))
    worst = ZERO
    for ket in kets:
        bra = ket.with_momentum(tuple(m + d for m, d in
                                      zip(ket.momentum, shift_mom)))
        D = _commutator_window(real, i, j, bra, ket, window, cocycle=True)
        if i != j:
            worst = _max(worst, *(D.values() or (ZERO,)))
            wt = sc(-1) ** real.entry(i, j)
            Db = _commutator_window(real, i, j, bra, ket, window,
                                    cocycle=False, bare_weight=wt)
            worst = _max(worst, *(Db.values() or (ZERO,)))
            continue
        rhs = _delta_dressed_rhs(real, i, bra, ket, window, True)
        worst = _max(worst, _window_diff(D, rhs, window))
        if not ket.osc and not any(ket.momentum):
            closed = upsilon_delta_target(real.heis.p, window)
            worst = _max(worst, _window_diff(D, closed.data, window))
            notes.append("vacuum window agrees with the closed-form "
                         "delta-line template")
    if i == j:
        notes.append("support lines z/w = p^{1/2} and z/w = p^{-1/2}; "
                     "weights match H+- matrix elements at w p^{1/4}, "
                     "z p^{1/4} with prefactor 1/(p^{1/2}-p^{-1/2})")
        notes.append("the z^{-2} normal-ordering power of H+- supplies "
                     "the g(v) = v^{-2} weight")
    else:
        notes.append("off-diagonal bracket vanishes identically: plain "
                     "difference when cocycle-dressed, weighted by "
                     f"(-1)^{{{real.entry(i, j)}}} bare")
    notes.append(f"{len(kets)} states checked, exact arithmetic")
    check_id = f"ef_delta.{real.kernel}.i{i}j{j}"
    return CheckReport.from_residual(check_id, params, worst, ZERO, notes)


# -- Serre relation ----------------------------------------------------
#
# Bivariate truncated Laurent helpers in (t, s) = (z2/z1, w/z2).  Keys
# are (kt, ks); entries outside |kt|,|ks| <= cap are dropped, which is
# safe as long as cap exceeds the inspection window plus every factor's
# support radius.


def _bv_from_laurent(lc: dict, vec: tuple) -> dict:
    out = {}
    for k, v in lc.items():
        if v != 0:
            out[(k * vec[0], k * vec[1])] = v
    return out


def _bv_add(A: dict, B: dict) -> dict:
    out = dict(A)
    for k, v in B.items():
        w = out.get(k, ZERO) + v
        if w == 0:
            out.pop(k, None)
        else:
            out[k] = w
    return out


def _bv_scale(A: dict, c: Scalar) -> dict:
    if c == 0:
        return {}
    return {k: c * v for k, v in A.items()}


def _bv_mul(A: dict, B: dict, cap: int) -> dict:
    if len(A) > len(B):
        A, B = B, A
    out: dict = {}
    for (a1, a2), va in A.items():
        for (b1, b2), vb in B.items():
            k1, k2 = a1 + b1, a2 + b2
            if abs(k1) > cap or abs(k2) > cap:
                continue
            key = (k1, k2)
            w = out.get(key, ZERO) + va * vb
            if w == 0:
                out.pop(key, None)
            else:
                out[key] = w
    return out


def _bv_mul_project(small: dict, big: dict, cap: int) -> dict:
    """small * big restricted to |kt|,|ks| <= cap by window lookups."""
    out: dict = {}
    rng = range(-cap, cap + 1)
    for (a1, a2), va in small.items():
        for k1 in rng:
            b1 = k1 - a1
            for k2 in rng:
                vb = big.get((b1, k2 - a2))
                if vb is None:
                    continue
                key = (k1, k2)
                w = out.get(key, ZERO) + va * vb
                if w == 0:
                    out.pop(key, None)
                else:
                    out[key] = w
    return out


def _psi_laurent(real: Realization, a: int, depth: int, *, invert: bool,
                 signed: bool, reciprocal: bool) -> dict:
    """Laurent coefficients of Psi(v)^{+-1} (or Psi(1/v)^{+-1}) in the
    master region |v| < 1, through the appropriate region expansion."""
    x = real.x
    if real.kernel == RATIONAL:
        P = psi_rational_germ(a, x, signed=signed)
        if invert:
            P = P.inverse()
        if reciprocal:
            P = P.at_reciprocal()
        gl = P.series(depth)
        return {gl.exponent + k: gl.body[k]
                for k in range(depth + 1) if gl.body[k] != 0}
    nome = real.heis.q if not invert else real.heis.qt
    region = OUTER if reciprocal else INNER
    g = psi_theta_germ(a, x, nome, depth, region, signed=signed)
    if invert:
        g = g.inverse()
    if reciprocal:
        g = g.at_reciprocal()
    return {k: v for k, v in g.laurent_window(-depth, depth).items() if v != 0}


def _serre_f_bivar(real: Realization, i: int, j: int, sign: str,
                   signed: bool, depth: int, cap: int, swapped: bool):
    """Numerator and denominator of f(z1/w, z2/w) (or the z1<->z2 swap)
    as bivariate windows; f multiplies the middle Serre term."""
    invert = sign == "-"
    pii_rec = swapped
    pii = _bv_from_laurent(
        _psi_laurent(real, 2, depth, invert=invert, signed=signed,
                     reciprocal=pii_rec), (1, 0))
    # p1 = Psi(w/z1) = Psi(ts); p2 = Psi(w/z2) = Psi(s); the swap trades roles
    base = _psi_laurent(real, real.entry(i, j), depth, invert=invert,
                        signed=signed, reciprocal=False)
    p_ts = _bv_from_laurent(base, (1, 1))
    p_s = _bv_from_laurent(base, (0, 1))
    p1, p2 = (p_s, p_ts) if swapped else (p_ts, p_s)
    one = {(0, 0): ONE}
    num = _bv_mul(_bv_add(pii, one), _bv_add(_bv_mul(p1, p2, cap), one), cap)
    den = _bv_add(p2, _bv_mul(pii, p1, cap))
    return num, den


def _serre_term_ops(real: Realization, i: int, j: int):
    Ei, Ej = real.vertex(E_KIND, i), real.vertex(E_KIND, j)
    return [
        ([(Ei, "z1"), (Ei, "z2"), (Ej, "w")], "dd", ONE),
        ([(Ei, "z1"), (Ej, "w"), (Ei, "z2")], "f", -ONE),
        ([(Ej, "w"), (Ei, "z1"), (Ei, "z2")], "dd", ONE),
        ([(Ei, "z2"), (Ei, "z1"), (Ej, "w")], "dd", ONE),
        ([(Ei, "z2"), (Ej, "w"), (Ei, "z1")], "fswap", -ONE),
        ([(Ej, "w"), (Ei, "z2"), (Ei, "z1")], "dd", ONE),
    ]


def _serre_f_term_ops(real: Realization, i: int, j: int):
    Fi, Fj = real.vertex(F_KIND, i), real.vertex(F_KIND, j)
    return [
        ([(Fi, "z1"), (Fi, "z2"), (Fj, "w")], "dd", ONE),
        ([(Fi, "z1"), (Fj, "w"), (Fi, "z2")], "f", -ONE),
        ([(Fj, "w"), (Fi, "z1"), (Fi, "z2")], "dd", ONE),
        ([(Fi, "z2"), (Fi, "z1"), (Fj, "w")], "dd", ONE),
        ([(Fi, "z2"), (Fj, "w"), (Fi, "z1")], "fswap", -ONE),
        ([(Fj, "w"), (Fi, "z2"), (Fi, "z1")], "dd", ONE),
    ]


def _table_to_bivar(table: dict, labels: tuple) -> dict:
    """Mode table keyed by per-operator powers -> (kt, ks) window at the
    fixed conserved total power; z2, w contribute t and s columns."""
    out: dict = {}
    for key, v in table.items():
        kt = ks = 0
        for lbl, k in zip(labels, key):
            if lbl == "z2":
                kt += k
            elif lbl == "w":
                kt += k
                ks += k
        bk = (kt, ks)
        w = out.get(bk, ZERO) + v
        if w == 0:
            out.pop(bk, None)
        else:
            out[bk] = w
    return out


def _degree_basis(rank: int, momentum: tuple, max_degree: int) -> list[FockState]:
    """All oscillator states of total degree <= max_degree at a momentum."""

    def parts(d):
        if d == 0:
            yield ()
            return
        def rec(remaining, minimum):
            if remaining == 0:
                yield ()
                return
            for first in range(minimum, remaining + 1):
                for rest in rec(remaining - first, first):
                    yield (first,) + rest
        yield from rec(d, 1)

    states = []
    def site_splits(d, site):
        if site == rank:
            if d == 0:
                yield {}
            return
        for here in range(d + 1):
            for lam in parts(here):
                for rest in site_splits(d - here, site + 1):
                    comp = dict(rest)
                    if lam:
                        comp[site] = lam
                    yield comp

    for d in range(max_degree + 1):
        for comp in site_splits(d, 0):
            counts: dict = {}
            for site, lam in comp.items():
                for n in lam:
                    counts[(site, n)] = counts.get((site, n), 0) + 1
            osc = tuple(sorted(counts.items()))
            states.append(FockState(momentum=momentum, osc=osc))
    return states


# -- Serre master-region assembly --------------------------------------
#
# A product of three charged currents factorizes over Wick pairs:
# zero-mode monomials and shift scalars that see only the ket momentum,
# one pairwise contraction exponential per unordered operator pair, and
# a finite source-pairing polynomial between the operators and the
# bra/ket dressings.  A pair already in master order (left variable
# larger) enters as its one-sided profile; a reversed pair enters
# through the verified exchange identity as the structure-function
# Laurent times the reversed profile, again one-sided in the master
# ratio.  Every ordering is therefore assembled directly in the master
# region |z1| > |z2| > |w|, and the cleared six-term combination with
# the f coefficients must vanish cell by cell.  The leading ordering is
# independently re-derived through the capped state-sum pipeline, which
# pins every bookkeeping convention the assembly uses.

_SERRE_EMBED = {"z1": (0, 0), "z2": (1, 0), "w": (1, 1)}
_MASTER_RANK = {"z1": 2, "z2": 1, "w": 0}


def _serre_pair_factor(real: Realization, opA, opB, depth: int,
                       cap: int) -> dict:
    """Master-region expansion of one pairwise contraction exponential.

    opA stands left of opB in the operator product; if its variable is
    the master-smaller one the factor is re-expanded through the signed
    structure function of the pair.
    """
    (VA, la), (VB, lb) = opA, opB
    ea, eb = _SERRE_EMBED[la], _SERRE_EMBED[lb]
    if _MASTER_RANK[la] > _MASTER_RANK[lb]:
        zs, kap, ser = _pair_profile(real, VA, VB, VA.site, VB.site, depth)
        ratio = (eb[0] - ea[0], eb[1] - ea[1])
        base = (zs * ea[0], zs * ea[1])
        out = {}
        for k in range(depth + 1):
            v = ser[k]
            if v != 0:
                out[(base[0] + k * ratio[0], base[1] + k * ratio[1])] = kap * v
        return out
    a = real.entry(VA.site, VB.site)
    lc = _psi_laurent(real, a, depth, invert=(VA.kind == F_KIND),
                      signed=True, reciprocal=False)
    ratio = (ea[0] - eb[0], ea[1] - eb[1])
    psi_bv = _bv_from_laurent(lc, ratio)
    zs, kap, ser = _pair_profile(real, VB, VA, VB.site, VA.site, depth)
    base = (zs * eb[0], zs * eb[1])
    prof = {}
    for k in range(depth + 1):
        v = ser[k]
        if v != 0:
            prof[(base[0] + k * ratio[0], base[1] + k * ratio[1])] = kap * v
    return _bv_mul(psi_bv, prof, cap)


def _serre_zero_mode(real: Realization, ops, ket: FockState):
    """Momentum monomial vector and shift scalar of one ordering.

    Only the ket momentum enters here; the sequential momentum buildup
    along the product is exactly the pairwise zero-mode monomials and
    kappa scalars already carried by the pair factors.
    """
    vec = [0, 0]
    scal = ONE
    for V, lbl in ops:
        emb = _SERRE_EMBED[lbl]
        pe = sum(real.cartan[V.site][l] * ket.momentum[l]
                 for l in range(real.rank))
        pw = V.zpow + V.charge * pe
        vec[0] += pw * emb[0]
        vec[1] += pw * emb[1]
        for leg in V.legs:
            base = real.coeffs.A if leg.boson == PHI else real.coeffs.B
            eps = 1 if leg.boson == PHI else -1
            scal *= (base * leg.shift) ** (eps * pe)
    return (vec[0], vec[1]), scal


def _serre_walk_sign(real: Realization, ops, ket: FockState) -> int:
    mom = list(ket.momentum)
    sign = 1
    for V, _ in reversed(ops):
        if V.charge != 0:
            sign *= cocycle_sign(real.cartan, V.site, mom)
            mom[V.site] += V.charge
    return sign


def _serre_core(real: Realization, ops, ket: FockState, depth: int,
                cap: int, cocycle: bool) -> dict:
    """Bra-independent part of one ordering: pair factors, zero modes
    and, when dressed, the cocycle walk sign."""
    core = {(0, 0): ONE}
    for ai in range(len(ops)):
        for bi in range(ai + 1, len(ops)):
            core = _bv_mul(core, _serre_pair_factor(real, ops[ai], ops[bi],
                                                    depth, cap), cap)
    zvec, zscal = _serre_zero_mode(real, ops, ket)
    if cocycle:
        zscal *= _serre_walk_sign(real, ops, ket)
    return {(k1 + zvec[0], k2 + zvec[1]): v * zscal
            for (k1, k2), v in core.items()}


def _wick_m_poly(real: Realization, ops, bra: FockState, ket: FockState,
                 cap: int) -> dict:
    """Source-pairing polynomial of the bra/ket dressings.

    Bra annihilation modes pair with an operator's creation sum (weight
    cre(n) C(bra site, op site; n), monomial x_op^n) or with a matching
    ket mode (a plain commutator weight); leftover ket modes pair with
    the annihilation sums at x_op^{-n}.  Identical copies are walked in
    list order, which reproduces the permanent convention of the state
    overlap.  The result does not depend on the operator ordering.
    """
    heis = real.heis
    info = []
    for V, lbl in ops:
        cre, ann = real._leg_sums(V)
        info.append((V.site, cre, ann, _SERRE_EMBED[lbl]))
    bra_modes = []
    for (s, n), mult in bra.osc:
        bra_modes.extend([(s, n)] * mult)
    ket_modes = []
    for (s, n), mult in ket.osc:
        ket_modes.extend([(s, n)] * mult)
    used = [False] * len(ket_modes)
    out: dict = {}

    def ket_tail(vec, coeff):
        poly = {vec: coeff}
        for idx, (sk, n) in enumerate(ket_modes):
            if used[idx]:
                continue
            fac: dict = {}
            for site, cre, ann, emb in info:
                w = ann(n) * heis.commutator_coefficient(site, sk, n)
                if w != 0:
                    key = (-n * emb[0], -n * emb[1])
                    fac[key] = fac.get(key, ZERO) + w
            poly = _bv_mul(poly, fac, cap)
            if not poly:
                return
        for k, v in poly.items():
            w = out.get(k, ZERO) + v
            if w == 0:
                out.pop(k, None)
            else:
                out[k] = w

    def rec(bi, vec, coeff):
        if coeff == 0:
            return
        if bi == len(bra_modes):
            ket_tail(vec, coeff)
            return
        sb, n = bra_modes[bi]
        for site, cre, ann, emb in info:
            w = cre(n) * heis.commutator_coefficient(sb, site, n)
            if w != 0:
                rec(bi + 1, (vec[0] + n * emb[0], vec[1] + n * emb[1]),
                    coeff * w)
        for idx, (sk, kn) in enumerate(ket_modes):
            if not used[idx] and kn == n:
                w = heis.commutator_coefficient(sb, sk, n)
                if w != 0:
                    used[idx] = True
                    rec(bi + 1, vec, coeff * w)
                    used[idx] = False

    rec(0, (0, 0), ONE)
    return out


def _serre_bra_momentum(real: Realization, i: int, j: int, sign: str,
                        ket: FockState) -> tuple:
    charge = 2 if sign == "+" else -2
    unit = 1 if sign == "+" else -1
    return tuple(ket.momentum[k] + charge * (1 if k == i else 0)
                 + unit * (1 if k == j else 0) for k in range(real.rank))


def _bv_lcm_denominator(polys) -> int:
    d = 1
    for P in polys:
        for v in P.values():
            dv = v.denominator
            d = d * (dv // math.gcd(d, dv))
    return d


def _bv_to_int(P: dict, d: int) -> dict:
    return {k: int(v * d) for k, v in P.items()}


def _serre_run(real: Realization, i: int, j: int, sign: str, n_order: int,
               degree: int, cocycle: bool, f_signed: bool, B: int,
               ket: FockState):
    """Worst cleared-identity residual over the bra basis.

    The heavy convolutions run on denominator-cleared integers: both
    halves of each f fraction are scaled by one common denominator, so
    every mkey group carries the identical factor D_f D_g, the summed
    cores carry one common D_c, and the window cells are divided back
    at the end.  The caps are chosen so that every product cell a core
    entry can land in the inspection box through is actually present:
    mult_cap = box + capF, and the f factors are built to the full mult
    depth.  With the rational kernel every expansion is one-sided, so
    the capped cells are finite sums and the result is exact; the theta
    kernel goes through the pinned-slice assembly instead.
    """
    W = n_order - 2
    box = W + 8
    capF = box + 8
    mult_cap = box + capF
    f_cap = mult_cap + 6
    Bf = f_cap
    num_f, den_f = _serre_f_bivar(real, i, j, sign, f_signed, Bf, f_cap, False)
    num_g, den_g = _serre_f_bivar(real, i, j, sign, f_signed, Bf, f_cap, True)
    Df = _bv_lcm_denominator((num_f, den_f))
    Dg = _bv_lcm_denominator((num_g, den_g))
    num_f, den_f = _bv_to_int(num_f, Df), _bv_to_int(den_f, Df)
    num_g, den_g = _bv_to_int(num_g, Dg), _bv_to_int(den_g, Dg)
    mult = {"dd": _bv_mul(den_f, den_g, mult_cap),
            "f": _bv_mul(num_f, den_g, mult_cap),
            "fswap": _bv_mul(num_g, den_f, mult_cap)}
    terms = (_serre_term_ops(real, i, j) if sign == "+"
             else _serre_f_term_ops(real, i, j))
    # group the orderings by their f multiplier before the bra loop; the
    # combined core*mult window is bra independent
    group_cores: dict = {}
    for ops, mkey, coeff in terms:
        core = _serre_core(real, ops, ket, B, capF, cocycle)
        group_cores[mkey] = _bv_add(group_cores.get(mkey, {}),
                                    _bv_scale(core, coeff))
    Dc = _bv_lcm_denominator(group_cores.values())
    combined: dict = {}
    for mkey, core in group_cores.items():
        combined = _bv_add(combined, _bv_mul_project(_bv_to_int(core, Dc),
                                                     mult[mkey], box))
    scale = Dc * Df * Dg
    bras = _degree_basis(real.rank, _serre_bra_momentum(real, i, j, sign, ket),
                         degree)
    worst = ZERO
    for bra in bras:
        M = _wick_m_poly(real, terms[0][0], bra, ket, capF)
        total = _bv_mul_project(M, combined, W + 1)
        for (kt, ks), v in total.items():
            if abs(kt) <= W and abs(ks) <= W:
                worst = _max(worst, v)
    return worst / scale, len(bras)


def _serre_t1_residual(real: Realization, term_ops, bras, ket: FockState,
                       bound: int, cocycle: bool) -> Scalar:
    """Leading-ordering oracle: the master assembly of the in-order term
    must match the capped state-sum tables cell by cell, exactly, for
    both kernels (no re-expansion enters the in-order term)."""
    depth = 3 * bound + 20
    cap = 2 * bound + 14
    core = _serre_core(real, term_ops, ket, depth, cap, cocycle)
    labels = tuple(lbl for _, lbl in term_ops)
    tables, bases = _chain_tables(real, [V for V, _ in term_ops], bras, ket,
                                  bound, cocycle=cocycle)
    worst = ZERO
    for bra in bras:
        M = _wick_m_poly(real, term_ops, bra, ket, cap)
        asm = _bv_mul(core, M, 2 * bound + 8)
        chain = _table_to_bivar(tables[bra], labels)
        total = bra.degree - ket.degree + sum(bases)
        for kt in range(-2 * bound, 2 * bound + 1):
            for ks in range(-bound, bound + 1):
                if abs(total - kt) > bound or abs(kt - ks) > bound:
                    continue
                worst = _max(worst, asm.get((kt, ks), ZERO)
                             - chain.get((kt, ks), ZERO))
    return worst


# -- theta slices -------------------------------------------------------
#
# Theta structure functions are two sided in every master ratio, so each
# window cell of the cleared identity is an infinite sum whose tail
# shrinks by roughly q/x^2 per extra depth step on one side against the
# x^2 growth of Psi_ii on the other.  Keeping both window variables
# formal therefore multiplies the needed depth into uneconomical exact
# arithmetic.  The theta check instead pins the inner ratio s = w/z2 at
# rational sample values in the annulus every factor shares and keeps
# t = z2/z1 formal: each pinned slice must vanish cell by cell in t.
# The cells are evaluated in high-precision decimal floating point
# seeded from the exact closed-form log coefficients; with fifty digits
# the rounding noise sits dozens of orders below tolerance, and an
# adaptive depth keeps the geometric truncation tails there too.


def _dec(v) -> decimal.Decimal:
    return decimal.Decimal(v.numerator) / decimal.Decimal(v.denominator)


def _dx_add(A: dict, B: dict) -> dict:
    out = dict(A)
    for k, v in B.items():
        out[k] = out.get(k, decimal.Decimal(0)) + v
    return out


def _dx_mul(A: dict, B: dict, cap: int) -> dict:
    out: dict = {}
    for ka, va in A.items():
        for kb, vb in B.items():
            k = ka + kb
            if abs(k) <= cap:
                out[k] = out.get(k, decimal.Decimal(0)) + va * vb
    return out


def _dx_exp(logs: list, depth: int) -> list:
    """exp of sum logs[n] u^n as coefficient list, by the ODE recurrence."""
    out = [decimal.Decimal(0)] * (depth + 1)
    out[0] = decimal.Decimal(1)
    for k in range(1, depth + 1):
        acc = decimal.Decimal(0)
        for m in range(1, k + 1):
            lm = logs[m]
            if lm:
                acc += m * lm * out[k - m]
        out[k] = acc / k
    return out


def _dx_profile(real: Realization, VA: VertexOperator, VB: VertexOperator,
                depth: int, memo: dict):
    """(zshift, kappa, series) of one pair profile in decimal form."""
    key = ("prof", VA.kind, VA.site, VB.kind, VB.site)
    got = memo.get(key)
    if got is None:
        total = TruncatedSeries.zero(depth)
        zshift = 0
        kappa = ONE
        for l1 in VA.legs:
            for l2 in VB.legs:
                con = contraction(l1.boson, l2.boson, VA.site, VB.site,
                                  real.coeffs, real.heis, depth)
                total = total + con.osc.substitute_scaled(l2.shift / l1.shift)
                zshift += con.log_charge
                kappa *= (con.base_value * l1.shift) ** con.log_charge
        ser = _dx_exp([_dec(total[k]) for k in range(depth + 1)], depth)
        got = (zshift, _dec(kappa), ser)
        memo[key] = got
    return got


def _dx_psi_factor(real: Realization, a: int, depth: int, cap: int,
                   ratio: tuple, s0d: decimal.Decimal, memo: dict, *,
                   invert: bool, signed: bool, reciprocal: bool = False) -> dict:
    """Pinned Laurent data of Psi along one embedding direction.

    The inner-region germ has closed-form logs, inversion negates them,
    and the reciprocal case goes through the outer region exactly as the
    exact-germ path does.  A pure s direction collapses to one scalar.
    """
    key = ("psi", a, invert, signed, reciprocal)
    parts = memo.get(key)
    if parts is None:
        x = real.x
        nome = real.heis.qt if invert else real.heis.q
        sgn = -ONE if (signed and a % 2) else ONE
        dd = [ZERO] * (depth + 1)
        for n in range(1, depth + 1):
            dd[n] = (x ** (a * n) - x ** (-a * n)) / (n * (ONE - nome ** n))
        if reciprocal:
            kap = sgn * x ** a
            il = [ZERO] + [-dd[n] * nome ** n for n in range(1, depth + 1)]
            ol = [ZERO] + [dd[n] for n in range(1, depth + 1)]
        else:
            kap = sgn * x ** (-a)
            il = [ZERO] + [-dd[n] for n in range(1, depth + 1)]
            ol = [ZERO] + [dd[n] * nome ** n for n in range(1, depth + 1)]
        if invert:
            kap = ONE / kap
            il = [-v for v in il]
            ol = [-v for v in ol]
        if reciprocal:
            il, ol = ol, il
        inner = _dx_exp([_dec(v) for v in il], depth)
        outer = _dx_exp([_dec(v) for v in ol], depth)
        parts = (_dec(kap), inner, outer)
        memo[key] = parts
    kapd, inner, outer = parts
    rt, rs = ratio
    if rt == 0:
        vi = sum(inner[k] * s0d ** (k * rs) for k in range(depth + 1))
        vo = sum(outer[k] * s0d ** (-k * rs) for k in range(depth + 1))
        return {0: kapd * vi * vo}
    out: dict = {}
    for c in range(-cap, cap + 1):
        acc = decimal.Decimal(0)
        for jj in range(max(0, -c), min(depth, depth - c) + 1):
            vo = outer[jj]
            if vo:
                acc += inner[c + jj] * vo
        if acc:
            out[c * rt] = kapd * acc * s0d ** (c * rs)
    return out


def _dx_ray(zs: int, kapd: decimal.Decimal, ser: list, ea: tuple, eb: tuple,
            cap: int, s0d: decimal.Decimal) -> dict:
    """Profile entries at zs*ea + k*(eb - ea) with the s column pinned."""
    bt, bs = zs * ea[0], zs * ea[1]
    rt, rs = eb[0] - ea[0], eb[1] - ea[1]
    out: dict = {}
    for k in range(len(ser)):
        v = ser[k]
        if not v:
            continue
        kt = bt + k * rt
        if rt and abs(kt) > cap:
            if kt > cap:
                break
            continue
        w = kapd * v * s0d ** (bs + k * rs)
        out[kt] = out.get(kt, decimal.Decimal(0)) + w
    return out


def _dx_pair_factor(real: Realization, opA, opB, depth: int, cap: int,
                    s0d: decimal.Decimal, memo: dict) -> dict:
    (VA, la), (VB, lb) = opA, opB
    ea, eb = _SERRE_EMBED[la], _SERRE_EMBED[lb]
    if _MASTER_RANK[la] > _MASTER_RANK[lb]:
        zs, kapd, ser = _dx_profile(real, VA, VB, depth, memo)
        return _dx_ray(zs, kapd, ser, ea, eb, cap, s0d)
    a = real.entry(VA.site, VB.site)
    ratio = (ea[0] - eb[0], ea[1] - eb[1])
    psi = _dx_psi_factor(real, a, depth, cap, ratio, s0d, memo,
                         invert=(VA.kind == F_KIND), signed=True)
    zs, kapd, ser = _dx_profile(real, VB, VA, depth, memo)
    prof = _dx_ray(zs, kapd, ser, eb, ea, cap, s0d)
    return _dx_mul(psi, prof, cap)


def _dx_core(real: Realization, ops, ket: FockState, depth: int, cap: int,
             cocycle: bool, s0d: decimal.Decimal, memo: dict) -> dict:
    core = {0: decimal.Decimal(1)}
    for ai in range(len(ops)):
        for bi in range(ai + 1, len(ops)):
            core = _dx_mul(core, _dx_pair_factor(real, ops[ai], ops[bi],
                                                 depth, cap, s0d, memo), cap)
    zvec, zscal = _serre_zero_mode(real, ops, ket)
    if cocycle:
        zscal *= _serre_walk_sign(real, ops, ket)
    zd = _dec(zscal) * s0d ** zvec[1]
    return {k + zvec[0]: v * zd for k, v in core.items()}


def _dx_f_parts(real: Realization, i: int, j: int, sign: str, f_signed: bool,
                depth: int, cap: int, swapped: bool, s0d: decimal.Decimal,
                memo: dict):
    invert = sign == "-"
    pii = _dx_psi_factor(real, 2, depth, cap, (1, 0), s0d, memo,
                         invert=invert, signed=f_signed, reciprocal=swapped)
    a = real.entry(i, j)
    p_ts = _dx_psi_factor(real, a, depth, cap, (1, 1), s0d, memo,
                          invert=invert, signed=f_signed)
    p_s = _dx_psi_factor(real, a, depth, cap, (0, 1), s0d, memo,
                         invert=invert, signed=f_signed)
    p1, p2 = (p_s, p_ts) if swapped else (p_ts, p_s)
    one = {0: decimal.Decimal(1)}
    num = _dx_mul(_dx_add(pii, one), _dx_add(_dx_mul(p1, p2, cap), one), cap)
    den = _dx_add(p2, _dx_mul(pii, p1, cap))
    return num, den


def _dx_m_poly(real: Realization, ops, bra: FockState, ket: FockState,
               cap: int, s0d: decimal.Decimal) -> dict:
    out: dict = {}
    for (kt, ks), v in _wick_m_poly(real, ops, bra, ket, cap).items():
        w = _dec(v) * s0d ** ks
        out[kt] = out.get(kt, decimal.Decimal(0)) + w
    return out


def _slice_pins(real: Realization) -> tuple:
    """Two pin values near sqrt(q)/x, the coupling-balancing optimum."""
    q, x = abs(real.heis.q), real.x
    rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        s0 = Scalar(rn, rd) / x
    else:
        s0 = Scalar(float(q) ** 0.5).limit_denominator(48) / x
    return (s0, s0 * Scalar(11, 10))


def _slice_depths(real: Realization, sign: str, n_order: int, s0):
    """(coupling rate, formal cap, series depth) for one pinned slice.

    The rate bounds every per-step tail: q_eff/(x^3 s0) couples the
    Psi_ii growth to the pinned-side decay and s0/x is the pinned-side
    convergence itself.  Depth is chosen so rate^slack clears the window
    scale x^{-2W} with margin below tolerance.
    """
    q_eff = abs(real.heis.qt if sign == "-" else real.heis.q)
    xf, sf, qf = float(real.x), float(s0), float(q_eff)
    r = max(qf / (xf ** 3 * sf), sf / xf)
    if r >= 0.85:
        raise RealizationError(
            "theta Serre slices diverge termwise at this parameter point; "
            "|q| must sit well inside p^2 (for s = 1/2, t = 1/5 works)")
    W = n_order - 2
    log_tol = max(n_order - 5, 1) * math.log(float(abs(real.heis.q)))
    log_scale = 2 * W * math.log(1.0 / xf) + math.log(32.0)
    slack = int(math.ceil((log_tol - log_scale) / math.log(r))) + 12
    K = W + max(slack, 24)
    return r, K, K + 32


def _with_order(real: Realization, order: int) -> Realization:
    """The same realization refitted deep enough for slice contractions."""
    if real.order >= order:
        return real
    deep = getattr(real, "_deeper", None)
    if deep is None or deep.order < order:
        order = 32 * ((order + 31) // 32)
        deep = Realization(real.cartan, real.point, kernel=real.kernel,
                           order=order, provenance=real.provenance)
        real._deeper = deep
    return deep


def _serre_slice_run(real: Realization, i: int, j: int, sign: str,
                     n_order: int, degree: int, cocycle: bool, f_signed: bool,
                     ket: FockState, s0, K: int, depth: int):
    """Worst formal-cell residual of one pinned slice."""
    W = n_order - 2
    with decimal.localcontext() as ctx:
        ctx.prec = 50
        s0d = _dec(sc(s0))
        memo: dict = {}
        num_f, den_f = _dx_f_parts(real, i, j, sign, f_signed, depth, K,
                                   False, s0d, memo)
        num_g, den_g = _dx_f_parts(real, i, j, sign, f_signed, depth, K,
                                   True, s0d, memo)
        mult = {"dd": _dx_mul(den_f, den_g, K),
                "f": _dx_mul(num_f, den_g, K),
                "fswap": _dx_mul(num_g, den_f, K)}
        terms = (_serre_term_ops(real, i, j) if sign == "+"
                 else _serre_f_term_ops(real, i, j))
        combined: dict = {}
        for ops, mkey, coeff in terms:
            core = _dx_core(real, ops, ket, depth, K, cocycle, s0d, memo)
            contrib = _dx_mul(core, mult[mkey], K)
            if coeff != ONE:
                contrib = {k: -v for k, v in contrib.items()}
            combined = _dx_add(combined, contrib)
        bras = _degree_basis(real.rank,
                             _serre_bra_momentum(real, i, j, sign, ket), degree)
        worst = decimal.Decimal(0)
        for bra in bras:
            Md = _dx_m_poly(real, terms[0][0], bra, ket, K, s0d)
            for k, v in _dx_mul(Md, combined, W).items():
                if abs(v) > worst:
                    worst = abs(v)
    return Scalar(worst), len(bras)


def _serre_worst(real: Realization, i: int, j: int, sign: str, n_order: int,
                 degree: int, cocycle: bool, f_signed: bool, B: int,
                 ket: FockState):
    """(worst, bras, notes) through the kernel-matched assembly."""
    if real.kernel == RATIONAL:
        worst, nbras = _serre_run(_with_order(real, B + 2), i, j, sign,
                                  n_order, degree, cocycle, f_signed, B, ket)
        return worst, nbras, [f"exact bivariate assembly, expansion depth {B}"]
    pins = _slice_pins(real)
    specs = [_slice_depths(real, sign, n_order, s0) for s0 in pins]
    deep = _with_order(real, max(d for _, _, d in specs) + 4)
    worst, nbras = ZERO, 0
    for s0, (r, K, dep) in zip(pins, specs):
        w, nbras = _serre_slice_run(deep, i, j, sign, n_order, degree,
                                    cocycle, f_signed, ket, s0, K, dep)
        worst = _max(worst, w)
    notes = [
        "theta cells are two-sided sums, so the identity is checked on "
        "pinned slices: w/z2 = " + ", ".join(str(p) for p in pins)
        + f"; z2/z1 formal to depth {max(K for _, K, _ in specs)}",
        f"worst per-step tail coupling {max(r for r, _, _ in specs):.2f}; "
        "50-digit decimal cells seeded from exact log coefficients",
    ]
    return worst, nbras, notes


def _slice_feasible(real: Realization) -> bool:
    q, p = abs(real.heis.q), real.heis.p
    return 8 * q <= 5 * p * p


def _conditioned_twin(real: Realization) -> Realization:
    """Same diagram and kernel at a t small enough for the slice rates."""
    s = real.point.s
    lim = 0.9 * (0.625 ** 0.25) * float(s) ** 2
    k = max(2, math.ceil(1.0 / lim))
    point = ParameterPoint.family1(s, Scalar(1, int(k)), 1)
    return Realization(real.cartan, point, kernel=real.kernel,
                       order=real.order, provenance=real.provenance)


def check_serre(real: Realization, i: int, j: int, *, sign: str = "+",
                n_order: int = 8, degree: int = 3, cocycle: bool = True,
                expand_depth: int | None = None,
                ket: FockState | None = None,
                oracle: bool = True) -> CheckReport:
    """Six-term symmetrized Serre relation at an A_ij = -1 pair.

    All terms are assembled in the master region |z1| > |z2| > |w|:
    reversed pairs re-expand through the signed structure functions, so
    every factor is one-sided and the window cells are complete.  To
    avoid inverting a bivariate series the identity is multiplied
    through by both f denominators, which are unit-constant series, so
    the cleared form vanishes iff the relation does.  The rational
    kernel runs the full bivariate window exactly; the theta kernel
    verifies pinned slices of the window (see the theta slices block).
    The in-order term is re-derived through the state-sum pipeline as
    an exact oracle on the assembly's conventions.
    """
    if real.entry(i, j) != -1:
        raise RealizationError("Serre check needs a Cartan entry -1 pair")
    if sign not in ("+", "-"):
        raise RealizationError("sign must be '+' or '-'")
    B = expand_depth if expand_depth is not None else 3 * n_order + 6
    ket = ket if ket is not None else FockState.vacuum(real.rank)
    params = dict(real.describe(), i=i, j=j, sign=sign, n_order=n_order,
                  degree=degree, cocycle=cocycle, expand_depth=B,
                  ket_degree=ket.degree)
    worst, nbras, how = _serre_worst(real, i, j, sign, n_order, degree,
                                     cocycle, not cocycle, B, ket)
    notes = [
        "master region |z1| > |z2| > |w|; reversed pairs re-expanded "
        "through the exchange identity; identity cleared of both f "
        "denominators before comparison",
        *how,
        f"{nbras} charge-compensated bra states of degree <= {degree}",
        ("cocycle-dressed operators against unsigned f coefficients"
         if cocycle else "bare operators against signed f coefficients"),
    ]
    if oracle:
        ob = min(6, max(2, n_order - 2))
        od = min(2, degree)
        terms = (_serre_term_ops(real, i, j) if sign == "+"
                 else _serre_f_term_ops(real, i, j))
        bras = _degree_basis(real.rank,
                             _serre_bra_momentum(real, i, j, sign, ket), od)
        res_o = _serre_t1_residual(_with_order(real, 3 * ob + 22),
                                   terms[0][0], bras, ket, ob, cocycle)
        if res_o != 0:
            worst = _max(worst, ONE)
            notes.append("ORACLE ANOMALY: leading-ordering assembly "
                         f"disagrees with the state-sum tables ({_fmt(res_o)})")
        else:
            notes.append("leading-ordering assembly matches the state-sum "
                         f"tables exactly (bound {ob}, degree {od})")
    tol = real.tolerance(n_order)
    check_id = f"serre.{'plus' if sign == '+' else 'minus'}.{real.kernel}.i{i}j{j}"
    return CheckReport.from_residual(check_id, params, worst, tol, notes)


def serre_cocycle_diagnostic(real: Realization, i: int, j: int, *,
                             sign: str = "+", n_order: int = 6,
                             degree: int = 1) -> CheckReport:
    """Deliberately mismatched toggle: dressed operators against signed
    f coefficients must fail, and the matched settings must pass.  The
    report's residual is the matched worst case."""
    ok_dressed = check_serre(real, i, j, sign=sign, n_order=n_order,
                             degree=degree, cocycle=True)
    ket = FockState.vacuum(real.rank)
    mismatched, _, _ = _serre_worst(real, i, j, sign, n_order, degree, True,
                                    True, 3 * n_order + 6, ket)
    notes = list(ok_dressed.notes)
    if mismatched <= ok_dressed.tolerance:
        notes.append("DIAGNOSTIC ANOMALY: mismatched toggle did not fail")
        residual = ONE
    else:
        notes.append("mismatched sign convention fails as expected "
                     f"(residual {_fmt(mismatched)})")
        residual = ok_dressed.residual
    params = dict(ok_dressed.params)
    return CheckReport.from_residual(
        f"serre.toggle.{real.kernel}.i{i}j{j}", params, residual,
        ok_dressed.tolerance, notes)


# -- level-2 coproduct images ------------------------------------------


_DELTA_FREE_TAGS = ("HpHp", "HmHm", "HpHm", "HpE", "HmE", "HpF", "HmF",
                    "EE", "FF")


def _coproduct_terms(real1: Realization, kind: str):
    """Tensor terms of the level-2 coproduct of one current, as
    [(kindL, shiftL) | None, (kindR, shiftR) | None] pairs."""
    sig = real1.sigma
    comp = {"l": "l", "r": "r", "s4l": sig, "s4r": sig}
    sym = _hopf.NSym(kind, 0, "z", ONE, 1)
    out = []
    for left, right in _hopf.numeric_coproduct_terms(sym, 1, comp):
        out.append((
            None if left is None else (left.kind, left.shift),
            None if right is None else (right.kind, right.shift),
        ))
    return out


def _glued_target_value(real1: Realization, glued_spec: AlgebraSpec,
                        tag: str, i: int, j: int, u0: Scalar,
                        factors: int) -> Scalar:
    q1 = real1.heis.q
    qt_glued = q1 * real1.heis.p ** 2
    out = ONE
    for fac in glued_spec.exchange_factors(tag, i, j):
        a = real1.entry(fac.i, fac.j)
        nome = q1 if fac.nome_key == "q" else qt_glued
        v = psi_scalar_value(THETA, a, real1.x, u0 * fac.shift, nome=nome,
                             signed=False, factors=factors)
        out *= ONE / v if fac.invert else v
    return out


def _slot_exchange_value(real: Realization, termA, termB, i: int, j: int,
                         u0: Scalar, factors: int) -> Scalar:
    if termA is None or termB is None:
        return ONE
    kA, sA = termA
    kB, sB = termB
    return exchange_value(real, kA, i, kB, j, u0 * sA / sB, factors,
                          cocycle=True)


def _tensor_element(real1: Realization, real2: Realization, slot_ops,
                    braT, ketT, bound: int) -> dict:
    """Convolved two-slot matrix elements keyed (kz, kw).

    slot_ops[s] is a list of (kind, site, var, shift) applied in written
    order on slot s; missing vars contribute power zero."""
    out: dict = {}
    tables = []
    for s, real in ((0, real1), (1, real2)):
        ops = slot_ops[s]
        bra, ket = braT[s], ketT[s]
        if not ops:
            if bra != ket:
                return {}
            tables.append({(0, 0): ONE})
            continue
        me = _me_table(real, bra,
                       [(real.vertex(k, idx), var) for k, idx, var, _ in ops],
                       ket, bound, True)
        tab: dict = {}
        varlist = [var for _, _, var, _ in ops]
        shifts = [sh for _, _, _, sh in ops]
        for key, v in me.items():
            kz = kw = 0
            scale = ONE
            for var, k, sh in zip(varlist, key, shifts):
                scale *= sh ** k
                if var == "z":
                    kz += k
                else:
                    kw += k
            bk = (kz, kw)
            w = tab.get(bk, ZERO) + scale * v
            if w == 0:
                tab.pop(bk, None)
            else:
                tab[bk] = w
        tables.append(tab)
    for (kz1, kw1), v1 in tables[0].items():
        for (kz2, kw2), v2 in tables[1].items():
            key = (kz1 + kz2, kw1 + kw2)
            w = out.get(key, ZERO) + v1 * v2
            if w == 0:
                out.pop(key, None)
            else:
                out[key] = w
    return out


def _coproduct_pair_table(real1, real2, termsA, termsB, i, j, braT, ketT,
                          bound, reverse: bool) -> dict:
    """Sum over tensor terms of <bra| DA(z) DB(w) |ket> (or the reversed
    operator order when reverse is set), keyed (kz, kw)."""
    out: dict = {}
    for tA in termsA:
        for tB in termsB:
            slot_ops = []
            for s in range(2):
                ops = []
                first = (tA[s], "z", i)
                second = (tB[s], "w", j)
                seq = (second, first) if reverse else (first, second)
                for part, var, idx in seq:
                    if part is not None:
                        ops.append((part[0], idx, var, part[1]))
                slot_ops.append(ops)
            tab = _tensor_element(real1, real2, slot_ops, braT, ketT, bound)
            for k, v in tab.items():
                w = out.get(k, ZERO) + v
                if w == 0:
                    out.pop(k, None)
                else:
                    out[k] = w
    return out


def check_level2_coproduct(ladder: LadderConfig | None = None,
                           diagram: str = "A2", *, n: int = 1,
                           tag: str = "EE", window: int = 8,
                           order: int = 40, seed: int = 5, points: int = 2,
                           factors: int = 48) -> CheckReport:
    """Coproduct images on the two-slot Fock space satisfy the c=2
    relations at (q_n, qt = q_n p^2).

    Delta-free relations: every tensor term pair exchanges with one and
    the same factor, the glued structure function; checked at scalar
    points through the closed product forms, with the group-like H+H+
    telescoping additionally certified termwise.  The EF bracket is
    checked on tensor matrix-element windows with the c=2 support lines
    z/w = p^{+-1} and arguments shifted by p^{1/2}.
    """
    ladder = ladder or LadderConfig(sc("1/2"), sc("1/3"))
    cartan = cartan_matrix(diagram)
    p1 = ladder.point_at(n)
    p2 = ladder.point_at(n + 1)
    real1 = Realization(cartan, p1, kernel=THETA, order=order)
    real2 = Realization(cartan, p2, kernel=THETA, order=order)
    if real2.heis.q != real1.heis.q * real1.heis.p:
        raise RealizationError("ladder step is not q -> q p")
    glued_point = ParameterPoint.family1(p1.s, p1.t, 2)
    glued_spec = make_family1(cartan, glued_point)
    params = {"s": p1.s, "t1": p1.t, "slot": n, "tag": tag,
              "window": window, "order": order, "seed": seed}
    notes = []
    worst = ZERO
    tol = real1.tolerance(16)

    if tag in _DELTA_FREE_TAGS:
        kA, kB = {v: k for k, v in _PAIR_TAG.items()}[tag]
        i, j = (0, 1) if len(cartan) > 1 else (0, 0)
        termsA = _coproduct_terms(real1, kA)
        termsB = _coproduct_terms(real1, kB)
        for (i2, j2) in ((i, j), (0, 0)):
            for u0 in _scalar_points(seed, points):
                target = _glued_target_value(real1, glued_spec, tag, i2, j2,
                                             u0, factors)
                for tA in termsA:
                    for tB in termsB:
                        v1 = _slot_exchange_value(real1, tA[0], tB[0], i2, j2,
                                                  u0, factors)
                        v2 = _slot_exchange_value(real2, tA[1], tB[1], i2, j2,
                                                  u0, factors)
                        worst = _max(worst, v1 * v2 - target)
        notes.append("every tensor term pair exchanges with the same glued "
                     "structure function; quarter shifts p^{1/4} ride the "
                     "coproduct legs")
        if tag in ("HpHp", "HmHm"):
            kind = HP_KIND if tag == "HpHp" else HM_KIND
            g1 = exchange_germ(real1, kind, i, kind, j, 16)
            g2 = exchange_germ(real2, kind, i, kind, j, 16)
            a = real1.entry(i, j)
            glued = (psi_theta_germ(a, real1.x, real1.heis.q, 16, INNER)
                     * psi_theta_germ(a, real1.x,
                                      real1.heis.q * real1.heis.p ** 2, 16,
                                      INNER).inverse())
            worst = _max(worst, (g1 * g2).componentwise_residual(glued))
            notes.append("group-like telescoping: slot-1 qt equals slot-2 q, "
                         "so the middle logs cancel termwise; certified "
                         "exactly")
        check_id = f"coproduct.level2.{tag}"
        return CheckReport.from_residual(check_id, params, worst, tol, notes)

    if tag != "EF":
        raise RealizationError(f"no level-2 check for tag {tag!r}")

    # EF bracket on the tensor space
    x = real1.x
    p = real1.heis.p
    pref = ONE / (x - ONE / x)
    rank = len(cartan)
    vac = FockState.vacuum(rank)
    osc_state = FockState(momentum=(0,) * rank, osc=(((0, 1), 1),))
    state_pairs = [((vac, vac), (vac, vac)), ((vac, osc_state), (vac, osc_state))]
    termsE = _coproduct_terms(real1, E_KIND)
    termsF = _coproduct_terms(real1, F_KIND)
    termsHp = _coproduct_terms(real1, HP_KIND)
    termsHm = _coproduct_terms(real1, HM_KIND)
    slot_bound = window + 12
    pairs = [(0, 0)]
    if rank > 1:
        pairs.append((0, 1))
    for (i, j) in pairs:
        for braT, ketT in state_pairs:
            ef = _coproduct_pair_table(real1, real2, termsE, termsF, i, j,
                                       braT, ketT, slot_bound, False)
            fe = _coproduct_pair_table(real1, real2, termsE, termsF, i, j,
                                       braT, ketT, slot_bound, True)
            D = dict(ef)
            for k, v in fe.items():
                D[k] = D.get(k, ZERO) - v
            if i != j:
                worst = _max(worst, *((v for key, v in D.items()
                                       if abs(key[0]) <= window
                                       and abs(key[1]) <= window) or (ZERO,)))
                continue
            rhs: dict = {}
            for terms, sgn, plus in ((termsHp, ONE, True), (termsHm, -ONE, False)):
                h: dict = {}
                for tH in terms:
                    slot_ops = []
                    for s in range(2):
                        part = tH[s]
                        slot_ops.append([] if part is None
                                        else [(part[0], i, "z", part[1])])
                    tab = _tensor_element(real1, real2, slot_ops, braT, ketT,
                                          slot_bound)
                    for (kz, _), v in tab.items():
                        h[kz] = h.get(kz, ZERO) + v
                for k, hv in h.items():
                    base = pref * sgn * x ** k * hv
                    for m in range(max(-window, k - window),
                                   min(window, k + window) + 1):
                        key = (m, k - m) if plus else (k - m, m)
                        rhs[key] = rhs.get(key, ZERO) + base * p ** (-m)
            worst = _max(worst, _window_diff(D, rhs, window))
    notes.append("c=2 support lines z/w = p^{+-1}; H images at arguments "
                 "shifted by p^{1/2}; prefactor 1/(p^{1/2}-p^{-1/2}); "
                 "exact tensor arithmetic")
    return CheckReport.from_residual("coproduct.level2.EF", params, worst,
                                     ZERO, notes)


# -- the two-parameter substitution ------------------------------------


def check_mu(ladder: LadderConfig | None = None, diagram: str = "A2", *,
             tag: str = "HpE", seed: int = 13, points: int = 3,
             factors: int = 48) -> CheckReport:
    """Substitution of the one-parameter currents into the two-parameter
    relations at the evaluation beta = q, gamma = qt.

    At that point the two families share nome data and x, so each
    delta-free relation reduces to a shift bookkeeping identity; the
    check certifies the composite shifts exactly, confirms the
    structure-function values at random points, pins the central image,
    and reports the EF prefactor ratio at several parameter points as
    data rather than absorbing it."""
    ladder = ladder or LadderConfig(sc("1/2"), sc("1/3"))
    cartan = cartan_matrix(diagram)
    spec2 = ladder.family2_spec_at(cartan, 1)
    spec1 = ladder.family1_spec_at(cartan, 1)
    real = Realization(cartan, ladder.point_at(1), kernel=THETA, order=16)
    params = {"s": ladder.s, "t1": ladder.t1, "tag": tag, "seed": seed,
              "beta": spec2.point.beta, "gamma": spec2.point.gamma}
    notes = []
    worst = ZERO
    if mu_central(spec2) != spec1.point.p ** spec1.point.c:
        worst = ONE
        notes.append("central image gamma/beta does not match p^c")
    else:
        notes.append("central image: gamma/beta = p^c exactly")
    kinds = {v: k for k, v in _PAIR_TAG.items()}
    if tag not in kinds or tag == "EF":
        raise RealizationError(f"mu check covers delta-free tags, not {tag!r}")
    kA, kB = kinds[tag]
    i, j = (0, 1) if len(cartan) > 1 else (0, 0)
    for (i2, j2) in ((i, j), (0, 0)):
        f1 = spec1.exchange_factors(tag, i2, j2)
        f2 = spec2.exchange_factors(tag, i2, j2)
        if len(f1) != len(f2):
            worst = ONE
            notes.append("factor shapes disagree between the families")
            continue
        symA = CurrentSymbol(kA, i2, "z", ONE, 1)
        symB = CurrentSymbol(kB, j2, "w", ONE, 1)
        muA = mu_map(symA, spec2, spec1)
        muB = mu_map(symB, spec2, spec1)
        arg_ratio = muA.shift / muB.shift
        for fa, fb in zip(f1, f2):
            # family-1 factor at the image arguments == family-2 factor
            shift_img = fa.shift * arg_ratio
            worst = _max(worst, shift_img - fb.shift,
                         ZERO if fa.invert == fb.invert else ONE,
                         ZERO if fa.nome_key == fb.nome_key else ONE)
        for u0 in _scalar_points(seed, points):
            v1 = _target_value(real, tag, i2, j2, u0 * arg_ratio, factors,
                               signed=False)
            out = ONE
            for fb in f2:
                a = cartan[fb.i][fb.j]
                nome = spec2.point.q if fb.nome_key == "q" else spec2.point.qt
                v = psi_scalar_value(THETA, a, real.x, u0 * fb.shift,
                                     nome=nome, signed=False, factors=factors)
                out *= ONE / v if fb.invert else v
            worst = _max(worst, v1 - out)
    notes.append("shift bookkeeping certificate: family-1 shifts times the "
                 "image argument ratio reproduce the family-2 shifts "
                 "exactly; structure values agree at the shared nomes")
    if tag == "EE":
        notes.append("EE image carries the common shift 1/gamma^{1/2} on "
                     "both arguments, which cancels in z/w")
    ratios = []
    for (s_, t_) in ((sc("1/2"), sc("1/3")), (sc("1/3"), sc("1/2")),
                     (sc("1/2"), sc("1/5")), (sc("2/3"), sc("1/5")),
                     (sc("1/5"), sc("1/4"))):
        lad = LadderConfig(s_, t_)
        sp2 = lad.family2_spec_at(cartan, 1)
        sp1 = lad.family1_spec_at(cartan, 1)
        ratios.append(str(specialization_prefactor_ratio(sp2, sp1)))
    notes.append("EF prefactor ratio (qt/q - 1)/(p^{1/2} - p^{-1/2}) at 5 "
                 "parameter points: " + ", ".join(ratios))
    tol = real.tolerance(16)
    return CheckReport.from_residual(f"mu.{tag}", params, worst, tol, notes)


# -- boson-level checks ------------------------------------------------


def check_bracket_antisymmetry(real: Realization, *, nmax: int = 40) -> CheckReport:
    """C_ij(n) = -C_ji(-n) and the bracket's n+m = 0 support."""
    heis = real.heis
    worst = ZERO
    rank = real.rank
    for i in range(rank):
        for j in range(rank):
            for n in range(-nmax, nmax + 1):
                if n == 0:
                    continue
                worst = _max(worst, heis.commutator_coefficient(i, j, n)
                             + heis.commutator_coefficient(j, i, -n))
            for n, m in ((1, 2), (3, -1), (2, 2), (-4, 1)):
                worst = _max(worst, heis.bracket(i, j, n, m))
    params = dict(real.describe(), nmax=nmax)
    notes = ["bracket vanishes off n + m = 0; antisymmetry exact on the "
             f"checked range |n| <= {nmax}"]
    return CheckReport.from_residual("boson.bracket_antisymmetry", params,
                                     worst, ZERO, notes)


def check_coefficient_fit(real: Realization) -> CheckReport:
    """Fitted coefficients reproduce every target normalization; the
    printed closed forms do not, and their divergence is the report."""
    res_fit = verify_coefficients(real.coeffs, real.targets, real.heis)
    printed = paper_printed_coefficients(real.heis, real.order)
    res_printed = verify_coefficients(printed, real.targets, real.heis)
    div = coefficient_divergence(printed, real.coeffs)
    notes = [f"fitted residual {res_fit}; printed closed forms residual "
             f"{res_printed}"]
    for key, table in div.items():
        if table:
            head = list(table.items())[:3]
            notes.append(f"printed/fitted {key} ratio per mode: "
                         + ", ".join(f"n={n}: {r}" for n, r in head))
    notes.append("suites run on fitted coefficients; both outcomes recorded")
    params = dict(real.describe())
    return CheckReport.from_residual("boson.coefficients", params, res_fit,
                                     ZERO, notes)


def check_charge_conservation(real: Realization, *, bound: int = 4) -> CheckReport:
    """Mismatched lattice charge kills every matrix element."""
    rank = real.rank
    vac = FockState.vacuum(rank)
    worst = ZERO
    E = real.vertex(E_KIND, 0)
    table = _me_table(real, vac, [(E, "z")], vac, bound, False)
    worst = _max(worst, *(table.values() or (ZERO,)))
    win = wick_two_point(real.vertex(E_KIND, 0), real.vertex(E_KIND, 0),
                         real.heis, real.coeffs, bound)
    worst = _max(worst, win.max_abs())
    params = dict(real.describe(), bound=bound)
    notes = ["<vac|E|vac> and the EE two-point window vanish by lattice "
             "charge"]
    return CheckReport.from_residual("boson.charge_conservation", params,
                                     worst, ZERO, notes)


def check_h_neutrality(real: Realization, *, bound: int = 4) -> CheckReport:
    """H+- carry no lattice charge and act on momenta by p-power scalars."""
    rank = real.rank
    worst = ZERO
    x = real.x
    for kind, sgn in ((HP_KIND, 1), (HM_KIND, -1)):
        V = real.vertex(kind, 0)
        if V.charge != 0:
            worst = ONE
        mom = tuple(1 if k == 0 else 0 for k in range(rank))
        st = FockState(momentum=mom, osc=())
        out = vertex_apply(V, st, real.heis, real.coeffs, (-bound, bound))
        pe = sum(real.cartan[0][k] * mom[k] for k in range(rank))
        expect = x ** (sgn * pe)
        for k, states in out.items():
            for s2, val in states.items():
                if s2 == st and k == V.zpow:
                    worst = _max(worst, val - expect)
                if s2.momentum != mom:
                    worst = ONE
    params = dict(real.describe(), bound=bound)
    notes = ["H+- preserve momenta; the zero-mode scalar is p^{+-<alpha,m>/2}"]
    return CheckReport.from_residual("boson.h_neutrality", params, worst,
                                     ZERO, notes)


# -- suites ------------------------------------------------------------


def exchange_suite(real: Realization, *, order: int = 16, cocycle: bool = False,
                   seed: int = 11, points: int = 2,
                   pairs=None) -> list[CheckReport]:
    kinds = [(HP_KIND, HP_KIND), (HM_KIND, HM_KIND), (HP_KIND, HM_KIND),
             (HP_KIND, E_KIND), (HM_KIND, E_KIND), (HP_KIND, F_KIND),
             (HM_KIND, F_KIND), (E_KIND, E_KIND), (F_KIND, F_KIND),
             (E_KIND, F_KIND)]
    rank = real.rank
    sites = pairs if pairs is not None else [
        (i, j) for i in range(rank) for j in range(rank)]
    out = []
    for kA, kB in kinds:
        for (i, j) in sites:
            out.append(check_exchange(real, kA, kB, i, j, order=order,
                                      cocycle=cocycle, seed=seed,
                                      points=points))
    return out


def ef_delta_suite(real: Realization, *, window: int = 12) -> list[CheckReport]:
    rank = real.rank
    out = [check_EF_delta(real, 0, 0, window=window)]
    if rank > 1:
        out.append(check_EF_delta(real, 0, 1, window=window))
        out.append(check_EF_delta(real, 1, 1, window=window))
    return out


def serre_suite(real: Realization, *, n_order: int = 8, degree: int = 3,
                pairs=None) -> list[CheckReport]:
    if real.kernel == THETA and not _slice_feasible(real):
        # slice tails only converge with |q| well inside p^2; rerun the
        # same diagram at a smaller t and let the reports carry the point
        real = _conditioned_twin(real)
    rank = real.rank
    if pairs is None:
        pairs = [(i, j) for i in range(rank) for j in range(rank)
                 if real.entry(i, j) == -1]
    out = []
    for (i, j) in pairs[:1]:
        for sign in ("+", "-"):
            out.append(check_serre(real, i, j, sign=sign, n_order=n_order,
                                   degree=degree, cocycle=True))
        out.append(serre_cocycle_diagnostic(real, i, j, sign="+",
                                            n_order=max(4, n_order - 2),
                                            degree=1))
    return out


def boson_suite(real: Realization) -> list[CheckReport]:
    return [
        check_bracket_antisymmetry(real),
        check_coefficient_fit(real),
        check_charge_conservation(real),
        check_h_neutrality(real),
    ]


def hopf_suite(diagram: str = "A2", *, order: int = 20,
               seed: int = 3) -> list[CheckReport]:
    """Coproduct homomorphism reports lifted from the symbolic layer."""
    ladder = LadderConfig(sc("1/2"), sc("1/3"))
    cartan = cartan_matrix(diagram)
    out = []
    for kernel in (RATIONAL, THETA):
        for tag in ("EE", "HpE", "HpHm"):
            rep = _hopf.check_rho_homomorphism(
                ladder, cartan, kernel=kernel, tag=tag, order=order)
            params = {"tag": tag, "kernel": kernel, "order": order}
            residual = sc(rep.get("residual", 0 if rep.get("pass") else 1))
            tol = sc(rep.get("tolerance", 0))
            notes = [str(rep.get("notes", "coproduct factor gluing"))]
            out.append(CheckReport.from_residual(
                f"hopf.rho.{tag}.{kernel}", params, residual, tol, notes))
    return out


def verification_suite(real: Realization, *, serre: bool = True) -> list[CheckReport]:
    """The whole desk-scale battery on one realization."""
    out = []
    out.extend(boson_suite(real))
    out.extend(exchange_suite(real))
    out.extend(ef_delta_suite(real))
    if serre and any(real.entry(i, j) == -1
                     for i in range(real.rank) for j in range(real.rank)):
        out.extend(serre_suite(real))
    return out
