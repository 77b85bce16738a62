"""Concrete algebra descriptors: relation enumeration as symbolic current
products, parameter ladders, the slot-relabeling morphisms, the
restriction of the second family onto the first, and the mu substitution.

Relations are data, not code.  The verifier walks RelationInstance lists
and never hard-codes a relation, so the same machinery serves both
families and the coproduct-image checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction

from .cartan import cartan_matrix, validate_simply_laced
from .series_core import (
    ONE,
    ClosureViolation,
    ParameterMismatch,
    ParameterPoint,
    Scalar,
    exact_sqrt,
    sc,
)

E, F, HP, HM = "E", "F", "H+", "H-"
HP_INV, HM_INV = "H+inv", "H-inv"
KINDS = (E, F, HP, HM, HP_INV, HM_INV)

# sign-resolved relation tags; the displayed H+-H+- rows resolve into
# upper/lower sign instances
EXCHANGE_TAGS = ("HpHp", "HmHm", "HpHm", "HpE", "HmE", "HpF", "HmF", "EE", "FF")
DELTA_FREE_TAGS = frozenset(EXCHANGE_TAGS)
ALL_TAGS = EXCHANGE_TAGS + ("EF", "SerreE", "SerreF")


class RestrictionViolated(ValueError):
    pass


@dataclass(frozen=True)
class CurrentSymbol:
    kind: str
    index: int
    var: str
    shift: Scalar
    slot: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown current kind {self.kind!r}")

    def scaled(self, extra: Scalar) -> "CurrentSymbol":
        return replace(self, shift=self.shift * sc(extra))

    def __str__(self):
        s = "" if self.shift == 1 else f"{self.shift}*"
        return f"{self.kind}_{self.index}({s}{self.var}|{self.slot})"


@dataclass(frozen=True)
class PsiFactor:
    """One Psi factor of an exchange coefficient: Psi_ij(shift * z/w | nome),
    inverted when invert is set."""

    i: int
    j: int
    nome_key: str  # "q" | "qt"
    shift: Scalar
    invert: bool = False


@dataclass(frozen=True)
class DeltaTerm:
    """sign * delta(ratio * shift) * h, ratio in {"z/w", "w/z"}."""

    sign: int
    ratio: str
    shift: Scalar
    h: CurrentSymbol


@dataclass(frozen=True)
class RelationInstance:
    display: str
    tag: str
    i: int
    j: int
    lhs: tuple
    rhs: tuple
    psi_factors: tuple[PsiFactor, ...] = ()
    delta_prefactor: Scalar | None = None
    delta_terms: tuple[DeltaTerm, ...] = ()

    @property
    def is_delta(self) -> bool:
        return self.tag == "EF"

    @property
    def is_serre(self) -> bool:
        return self.tag in ("SerreE", "SerreF")

    @property
    def delta_free(self) -> bool:
        return self.tag in DELTA_FREE_TAGS


class AlgebraSpec:
    """One member algebra of a family, at one ladder slot.

    family 1 carries (point, c) with qt = q p^c baked into the point;
    family 2 carries independent (q, qt) plus central squares beta,
    gamma through the point's (b, g).
    """

    def __init__(self, cartan, point: ParameterPoint, slot: int = 1, ladder=None):
        validate_simply_laced(cartan)
        self.cartan = cartan
        self.point = point
        self.family = point.family
        self.slot = slot
        self.ladder = ladder

    @property
    def rank(self) -> int:
        return len(self.cartan)

    @property
    def q(self) -> Scalar:
        return self.point.q

    @property
    def qt(self) -> Scalar:
        return self.point.qt

    def ef_prefactor(self) -> Scalar:
        if self.family == 1:
            x = self.point.x
            return ONE / (x - ONE / x)
        return ONE / (self.qt / self.q - ONE)

    def exchange_factors(self, tag: str, i: int, j: int) -> tuple[PsiFactor, ...]:
        pt = self.point
        if self.family == 1:
            half = pt.p_quarter(2 * pt.c)  # p^{c/2}
            quarter = pt.p_quarter(pt.c)  # p^{c/4}
            table = {
                "HpHp": ((("q", ONE, False), ("qt", ONE, True))),
                "HmHm": ((("q", ONE, False), ("qt", ONE, True))),
                "HpHm": ((("q", half, False), ("qt", ONE / half, True))),
                "HpE": ((("q", quarter, False),)),
                "HmE": ((("q", ONE / quarter, False),)),
                "HpF": ((("qt", ONE / quarter, True),)),
                "HmF": ((("qt", quarter, True),)),
                "EE": ((("q", ONE, False),)),
                "FF": ((("qt", ONE, True),)),
            }
        else:
            b, g = self.point.b, self.point.g
            table = {
                "HpHp": ((("q", ONE, False), ("qt", ONE, True))),
                "HmHm": ((("q", ONE, False), ("qt", ONE, True))),
                "HpHm": ((("q", g / b, False), ("qt", b / g, True))),
                "HpE": ((("q", ONE / b, False),)),
                "HmE": ((("q", ONE / g, False),)),
                "HpF": ((("qt", b, True),)),
                "HmF": ((("qt", g, True),)),
                "EE": ((("q", ONE, False),)),
                "FF": ((("qt", ONE, True),)),
            }
        return tuple(PsiFactor(i, j, k, s, inv) for (k, s, inv) in table[tag])

    def _ef_terms(self, i: int) -> tuple[DeltaTerm, ...]:
        pt = self.point
        if self.family == 1:
            dshift = ONE / pt.p_quarter(2 * pt.c)  # p^{-c/2}
            harg = pt.p_quarter(pt.c)  # p^{c/4}
            return (
                DeltaTerm(1, "z/w", dshift, CurrentSymbol(HP, i, "w", harg, self.slot)),
                DeltaTerm(-1, "w/z", dshift, CurrentSymbol(HM, i, "z", harg, self.slot)),
            )
        b, g = pt.b, pt.g
        return (
            DeltaTerm(1, "z/w", b * b, CurrentSymbol(HP, i, "w", ONE / b, self.slot)),
            DeltaTerm(-1, "w/z", ONE / (g * g), CurrentSymbol(HM, i, "z", g, self.slot)),
        )

    def relations(self) -> list[RelationInstance]:
        """Every defining relation, once per valid index combination."""
        out: list[RelationInstance] = []
        r = self.rank
        kind_of = {"Hp": HP, "Hm": HM, "E": E, "F": F}
        displays = {
            "HpHp": "H+H+", "HmHm": "H-H-", "HpHm": "H+H-",
            "HpE": "H+E", "HmE": "H-E", "HpF": "H+F", "HmF": "H-F",
            "EE": "EE", "FF": "FF",
        }
        for tag in EXCHANGE_TAGS:
            if tag[0] == "H":
                left_k, right_k = kind_of[tag[:2]], kind_of[tag[2:]]
            else:
                left_k, right_k = kind_of[tag[0]], kind_of[tag[1]]
            for i in range(r):
                for j in range(r):
                    a = CurrentSymbol(left_k, i, "z", ONE, self.slot)
                    b = CurrentSymbol(right_k, j, "w", ONE, self.slot)
                    out.append(RelationInstance(
                        display=displays[tag], tag=tag, i=i, j=j,
                        lhs=((ONE, (a, b)),),
                        rhs=((ONE, (b, a)),),
                        psi_factors=self.exchange_factors(tag, i, j),
                    ))
        for i in range(r):
            for j in range(r):
                ei = CurrentSymbol(E, i, "z", ONE, self.slot)
                fj = CurrentSymbol(F, j, "w", ONE, self.slot)
                out.append(RelationInstance(
                    display="EF", tag="EF", i=i, j=j,
                    lhs=((ONE, (ei, fj)), (-ONE, (fj, ei))),
                    rhs=(),
                    delta_prefactor=self.ef_prefactor() if i == j else None,
                    delta_terms=self._ef_terms(i) if i == j else (),
                ))
        for i in range(r):
            for j in range(r):
                if self.cartan[i][j] != -1:
                    continue
                for tag, kind, fname in (("SerreE", E, "f+"), ("SerreF", F, "f-")):
                    s1 = CurrentSymbol(kind, i, "z1", ONE, self.slot)
                    s2 = CurrentSymbol(kind, i, "z2", ONE, self.slot)
                    sw = CurrentSymbol(kind, j, "w", ONE, self.slot)
                    terms = []
                    for a, b in ((s1, s2), (s2, s1)):
                        terms += [
                            (ONE, (a, b, sw)),
                            (f"-{fname}({a.var}/w,{b.var}/w)", (a, sw, b)),
                            (ONE, (sw, a, b)),
                        ]
                    out.append(RelationInstance(
                        display=tag[:5] + " " + tag[5], tag=tag, i=i, j=j,
                        lhs=tuple(terms), rhs=(),
                    ))
        return out


def make_family1(cartan, point: ParameterPoint, c: int | None = None,
                 slot: int = 1, ladder=None) -> AlgebraSpec:
    if point.family != 1:
        raise ParameterMismatch("family-1 spec needs a family-1 point")
    if c is not None and c != point.c:
        point = ParameterPoint.family1(point.s, point.t, c=c)
    return AlgebraSpec(cartan, point, slot=slot, ladder=ladder)


def make_family2(cartan, q: Scalar, qt: Scalar, beta: Scalar, gamma: Scalar,
                 slot: int = 1, witness: Scalar | None = None, ladder=None) -> AlgebraSpec:
    """beta and gamma must be perfect rational squares: every relation
    shift uses their square roots."""
    b = exact_sqrt(sc(beta))
    g = exact_sqrt(sc(gamma))
    point = ParameterPoint.family2(q, qt, b, g, r=witness)
    return AlgebraSpec(cartan, point, slot=slot, ladder=ladder)


# -- ladders ----------------------------------------------------------


class LadderConfig:
    """The parameter ladder q_{n+1} = q_n p^{c_n}, anchored at slot 1.

    Quartic roots ride along: t_n carries q_n = t_n^4, so every slot's
    point keeps the full shift closure.  charges maps slot -> c_n;
    missing slots default to default_charge.
    """

    def __init__(self, s: Scalar, t1: Scalar, charges: dict[int, int] | None = None,
                 default_charge: int = 1):
        self.s = sc(s)
        self.t1 = sc(t1)
        self.charges = dict(charges or {})
        self.default_charge = default_charge

    def charge(self, n: int) -> int:
        return self.charges.get(n, self.default_charge)

    def t_at(self, n: int) -> Scalar:
        e = 0
        if n >= 1:
            for k in range(1, n):
                e += self.charge(k)
        else:
            for k in range(n, 1):
                e -= self.charge(k)
        return self.t1 * self.s**e

    def q_at(self, n: int) -> Scalar:
        return self.t_at(n) ** 4

    def point_at(self, n: int) -> ParameterPoint:
        return ParameterPoint.family1(self.s, self.t_at(n), c=self.charge(n))

    def family1_spec_at(self, cartan, n: int) -> AlgebraSpec:
        return AlgebraSpec(cartan, self.point_at(n), slot=n, ladder=self)

    def family2_spec_at(self, cartan, n: int) -> AlgebraSpec:
        """The bosonization regime beta_n = q_n, gamma_n = q_{n+1}."""
        tn, tn1 = self.t_at(n), self.t_at(n + 1)
        witness = self.s ** self.charge(n)
        return make_family2(cartan, tn**4, tn1**4, tn**4, tn1**4,
                            slot=n, witness=witness, ladder=self)


# -- slot morphisms ---------------------------------------------------


def tau_symbol(sym: CurrentSymbol, direction: int) -> CurrentSymbol:
    """Slot relabeling v^(n) -> v^(n + direction); shifts untouched."""
    return replace(sym, slot=sym.slot + direction)


def tau(spec: AlgebraSpec, direction: int) -> AlgebraSpec:
    """Relabel the spec to the adjacent slot.  With a ladder attached the
    parameters move along it; otherwise only the slot label moves."""
    n = spec.slot + direction
    if spec.ladder is not None and spec.family == 1:
        return spec.ladder.family1_spec_at(spec.cartan, n)
    if spec.ladder is not None and spec.family == 2:
        return spec.ladder.family2_spec_at(spec.cartan, n)
    return AlgebraSpec(spec.cartan, spec.point, slot=n, ladder=None)


def tau_nm(sym: CurrentSymbol, n: int, m: int) -> CurrentSymbol:
    """Composite relabeling onto slot m from slot n; the composition law
    tau(m,p) tau(p,n) = tau(m,n) is associativity of integer shifts."""
    if sym.slot != n:
        raise ParameterMismatch(f"symbol lives at slot {sym.slot}, not {n}")
    return replace(sym, slot=m)


# -- the restriction of family 2 onto family 1 ------------------------


def specialize_family2_to_family1(spec2: AlgebraSpec, c: int = 1,
                                  fam1_point: ParameterPoint | None = None) -> AlgebraSpec:
    """Restrict beta = gamma^{-1} = p^{-c/2}, qt = q p^c onto family 1.

    The branch b g = 1 is required at square-root level, not just
    beta gamma = 1: the b = -1/g branch flips the sign of every odd
    shift and the relation lists would no longer match.  When no target
    point is supplied, s and t are extracted from gamma and q (s^c = g,
    t^4 = q); the relation lists of the result then agree
    shift-for-shift with spec2's on every non-EF relation and on the EF
    delta structure.  The EF prefactors do not agree and are left to
    the caller to compare.
    """
    if spec2.family != 2:
        raise ParameterMismatch("expected a family-2 spec")
    pt2 = spec2.point
    if pt2.b * pt2.g != ONE:
        if pt2.beta * pt2.gamma == ONE:
            raise RestrictionViolated("b = -1/g branch: odd shifts change sign")
        raise RestrictionViolated("beta != gamma^{-1} at the point")
    if fam1_point is None:
        if c == 1:
            s = pt2.g
        elif c == 2:
            s = exact_sqrt(pt2.g)
        else:
            raise ClosureViolation(f"no rational {c}-th root extraction for s")
        t = exact_sqrt(exact_sqrt(pt2.q))
        fam1_point = ParameterPoint.family1(s, t, c=c)
    pt1 = fam1_point
    half = pt1.p_quarter(2 * pt1.c)  # p^{c/2}
    if pt2.beta * half != ONE or pt2.gamma != half:
        raise RestrictionViolated("beta = gamma^{-1} = p^{-c/2} fails at the target point")
    if pt2.q != pt1.q or pt2.qt != pt1.q * pt1.p**pt1.c:
        raise RestrictionViolated("nomes do not satisfy qt = q p^c at the target point")
    return AlgebraSpec(spec2.cartan, pt1, slot=spec2.slot)


def specialization_prefactor_ratio(spec2: AlgebraSpec, spec1: AlgebraSpec) -> Scalar:
    """The EF normalization discrepancy 1/(qt/q-1) vs 1/(sqrt p - 1/sqrt p),
    reported as a ratio rather than silently absorbed."""
    return spec1.ef_prefactor() / spec2.ef_prefactor()


# -- the mu substitution ----------------------------------------------


def mu_central(spec2: AlgebraSpec) -> Scalar:
    """Image of the family-1 central power p^c."""
    return spec2.point.gamma / spec2.point.beta


def mu_map(sym: CurrentSymbol, spec2: AlgebraSpec, spec1: AlgebraSpec) -> CurrentSymbol:
    """Generator-wise substitution of the section-3 homomorphism.

    E(z) -> E(z gamma^{-1/2}), F(z) -> F(z beta^{1/2}),
    H+-(z) -> H+-(z (beta^{-1} gamma)^{-1/4}); the quarter power needs
    the point's closure witness.
    """
    if spec1.point.p ** spec1.point.c != mu_central(spec2):
        raise ParameterMismatch("qt/q = p^c does not hold between the specs")
    pt2 = spec2.point
    if sym.kind == E:
        return sym.scaled(ONE / pt2.g)
    if sym.kind == F:
        return sym.scaled(pt2.b)
    if sym.kind in (HP, HM, HP_INV, HM_INV):
        return sym.scaled(ONE / pt2.bg_quarter(1))
    raise ValueError(f"mu image undefined for kind {sym.kind!r}")


# -- serialization ----------------------------------------------------


def spec_to_json(spec: AlgebraSpec) -> str:
    pt = spec.point
    doc = {
        "family": spec.family,
        "rank": spec.rank,
        "cartan": spec.cartan,
        "slot": spec.slot,
    }
    if spec.family == 1:
        doc["point"] = {"s": str(pt.s), "t": str(pt.t), "c": pt.c}
    else:
        doc["point"] = {
            "q": str(pt.q), "qt": str(pt.qt), "b": str(pt.b), "g": str(pt.g),
            "r": None if pt.r is None else str(pt.r),
        }
    return json.dumps(doc, indent=2, sort_keys=True)


def spec_from_json(text: str) -> AlgebraSpec:
    doc = json.loads(text)
    cartan = [list(map(int, row)) for row in doc["cartan"]]
    validate_simply_laced(cartan)
    p = doc["point"]
    if doc["family"] == 1:
        point = ParameterPoint.family1(Fraction(p["s"]), Fraction(p["t"]), c=int(p["c"]))
    else:
        r = None if p.get("r") is None else Fraction(p["r"])
        point = ParameterPoint.family2(Fraction(p["q"]), Fraction(p["qt"]),
                                       Fraction(p["b"]), Fraction(p["g"]), r=r)
    return AlgebraSpec(cartan, point, slot=int(doc.get("slot", 1)))
