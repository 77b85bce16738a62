"""FF rational identity, remaining rational H regions, R palindromy."""
import sys
sys.path.insert(0, "src")
from fractions import Fraction as F

from qca.series_core import ONE, ParameterPoint, TruncatedSeries
from qca.cartan import cartan_matrix
from qca.fock import (
    HeisenbergData, fit_coefficients, rational_fit_targets,
    contraction, build_vertex, E_KIND, F_KIND, HP_KIND, HM_KIND,
)
from qca.structure import (
    INNER, OUTER, RationalGerm, RegionGerm, psi_rational_germ, _telescoped_ratio,
)

PT = ParameterPoint.family1(F(1, 2), F(1, 3), 1)
A2 = cartan_matrix("A2")
HEIS = HeisenbergData.from_point(A2, PT)
ORDER = 14
CO_R = fit_coefficients(rational_fit_targets(HEIS, ORDER), HEIS)
X = HEIS.sqrt_p
SIG = PT.p_quarter(1)


def exchange_germ(coeffs, kA, kB, i, j, order):
    VA = build_vertex(kA, 0, SIG) if True else None
    VA = build_vertex(kA, i, SIG)
    VB = build_vertex(kB, j, SIG)

    def side(V1, V2, s1, s2):
        total = TruncatedSeries.zero(order)
        zshift = 0
        kappa = ONE
        for l1 in V1.legs:
            for l2 in V2.legs:
                con = contraction(l1.boson, l2.boson, s1, s2, coeffs, HEIS, order)
                total = total + con.osc.substitute_scaled(l2.shift / l1.shift)
                zshift += con.log_charge
                kappa *= (con.base_value * l1.shift) ** con.log_charge
        return zshift, kappa, total.exp()

    sA, kapA, serA = side(VA, VB, i, j)
    sB, kapB, serB = side(VB, VA, j, i)
    return RegionGerm(sA, kapA / kapB, serB.inverse(), serA)


def rd_germ(a):
    out = RationalGerm.one()
    for k in range(1, abs(a) + 1):
        out = out * RationalGerm(0, (ONE, -(X ** (2 * k - abs(a)))), (ONE,))
    return out if a > 0 else out.inverse()


ORD = 10
for a, i, j in ((2, 0, 0), (-1, 0, 1)):
    g = exchange_germ(CO_R, F_KIND, F_KIND, i, j, ORD)
    Rd = rd_germ(a)
    s = Rd.series(ORD)
    si = Rd.inverse().series(ORD)
    print(f"FF rational a={a}: m={g.m} kappa={g.kappa}")
    print("  inner:", [g.inner[k] for k in range(3)], " Rd^-1:", [si.body[k] for k in range(3)])
    print("  outer:", [g.outer[k] for k in range(3)], " Rd   :", [s.body[k] for k in range(3)])
    lhs = RationalGerm.monomial(a) * Rd.at_reciprocal() * Rd.inverse()
    rhs = psi_rational_germ(a, X, signed=True).inverse()
    print("  FF closure residual:", lhs.residual_from(rhs))

# remaining rational H-tags, same region rule as theta?
cases = [
    (HM_KIND, E_KIND, "HmE", INNER, -1, "q", False),
    (HP_KIND, F_KIND, "HpF", OUTER, -1, "qt", True),
    (HM_KIND, F_KIND, "HmF", INNER, +1, "qt", True),
]
for kA, kB, tag, region, sexp, key, invert in cases:
    for a, i, j in ((2, 0, 0), (-1, 0, 1)):
        g = exchange_germ(CO_R, kA, kB, i, j, ORD)
        P = psi_rational_germ(a, X, sigma=SIG ** sexp)
        if invert:
            P = P.inverse()
        if region == INNER:
            gl = P.series(ORD)
            t = RegionGerm(gl.exponent, gl.body[0], gl.body.scale(ONE / gl.body[0]),
                           TruncatedSeries.one(ORD))
        else:
            gl = P.at_reciprocal().series(ORD)
            t = RegionGerm(-gl.exponent, gl.body[0], TruncatedSeries.one(ORD),
                           gl.body.scale(ONE / gl.body[0]))
        print(f"rational {tag} a={a}: residual={g.componentwise_residual(t)}")

# rational HpHm: OUTER target from the psi product
for a, i, j in ((2, 0, 0), (-1, 0, 1)):
    g = exchange_germ(CO_R, HP_KIND, HM_KIND, i, j, ORD)
    P = psi_rational_germ(a, X, sigma=X) * psi_rational_germ(a, X, sigma=ONE / X).inverse()
    gl = P.at_reciprocal().series(ORD)
    t = RegionGerm(-gl.exponent, gl.body[0], TruncatedSeries.one(ORD),
                   gl.body.scale(ONE / gl.body[0]))
    print(f"rational HpHm a={a}: residual={g.componentwise_residual(t)}")

# R palindromy certificate
for a in (2, -1, 3):
    R = (RationalGerm(0, (ONE, -(X ** (a + 1))), (ONE, -(X ** (a - 1))))
         * RationalGerm(0, (ONE, -(X ** (-a - 1))), (ONE, -(X ** (-a + 1)))))
    print(f"R palindromy a={a}: residual={R.residual_from(R.at_reciprocal())}")
