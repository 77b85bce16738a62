"""Rational-kernel exchange germ shapes + HpHm defect orientation."""
import sys
sys.path.insert(0, "src")
from fractions import Fraction as F

from qca.series_core import ONE, ParameterPoint, TruncatedSeries
from qca.cartan import cartan_matrix
from qca.fock import (
    HeisenbergData, fit_coefficients, rational_fit_targets, theta_fit_targets,
    contraction, build_vertex, E_KIND, F_KIND, HP_KIND, HM_KIND,
)
from qca.structure import (
    INNER, OUTER, RationalGerm, RegionGerm, psi_rational_germ, psi_theta_germ,
    _telescoped_ratio,
)

PT = ParameterPoint.family1(F(1, 2), F(1, 3), 1)
A2 = cartan_matrix("A2")
HEIS = HeisenbergData.from_point(A2, PT)
ORDER = 18
CO_R = fit_coefficients(rational_fit_targets(HEIS, ORDER), HEIS)
CO_T = fit_coefficients(theta_fit_targets(HEIS, ORDER), HEIS)
X = HEIS.sqrt_p
p = HEIS.p
q = HEIS.q
qt = HEIS.qt
SIG = PT.p_quarter(1)


def exchange_germ(coeffs, kA, kB, i, j, order):
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


def dump_germ(label, g, n=4):
    inner = [g.inner[k] for k in range(n)]
    outer = [g.outer[k] for k in range(n)]
    print(f"{label}: m={g.m} kappa={g.kappa}\n  inner={inner}\n  outer={outer}")


ORD = 12
# rational H+E germ: is outer trivial?
g = exchange_germ(CO_R, HP_KIND, E_KIND, 0, 0, ORD)
dump_germ("rational HpE a=2", g)
t_r = psi_rational_germ(2, X, sigma=SIG)
print("  target rational psi (sigma=p^1/4):", t_r.m, t_r.num, t_r.den)
# compare inner against target series
ts = t_r.series(ORD)
print("  target series head:", [ts.body[k] for k in range(4)], "exp", ts.exponent, "const", ts.body[0])

g = exchange_germ(CO_R, HP_KIND, HP_KIND, 0, 0, ORD)
dump_germ("rational HpHp a=2", g)

g = exchange_germ(CO_R, HP_KIND, HM_KIND, 0, 0, ORD)
dump_germ("rational HpHm a=2", g)

g = exchange_germ(CO_R, E_KIND, E_KIND, 0, 0, ORD)
dump_germ("rational EE a=2", g)
tel = _telescoped_ratio(2, X, p)
tser = tel.series(ORD)
print("  T series head:", [tser.body[k] for k in range(4)])
# identity: monomial(a) * T * T.at_reciprocal().inverse() == psi_rational_germ(a, X, signed)
lhs = RationalGerm.monomial(2) * tel * tel.at_reciprocal().inverse()
rhs = psi_rational_germ(2, X, signed=True)
print("  EE rational germ identity residual:", lhs.residual_from(rhs))
lhs = RationalGerm.monomial(-1) * _telescoped_ratio(-1, X, p) * _telescoped_ratio(-1, X, p).at_reciprocal().inverse()
rhs = psi_rational_germ(-1, X, signed=True)
print("  EE rational germ identity residual (a=-1):", lhs.residual_from(rhs))

# theta HpHm defect orientation
for a, i, j in ((2, 0, 0), (-1, 0, 1)):
    g = exchange_germ(CO_T, HP_KIND, HM_KIND, i, j, ORD)
    t = (psi_theta_germ(a, X, q, ORD, INNER, sigma=X)
         * psi_theta_germ(a, X, qt, ORD, INNER, sigma=ONE / X).inverse())
    defect = g * t.inverse()
    R = (RationalGerm(0, (ONE, -(X ** (a + 1))), (ONE, -(X ** (a - 1))))
         * RationalGerm(0, (ONE, -(X ** (-a - 1))), (ONE, -(X ** (-a + 1)))))
    rs = R.series(ORD)
    rsi = R.inverse().series(ORD)
    din = [defect.inner[k] for k in range(3)]
    dou = [defect.outer[k] for k in range(3)]
    rr = [rs.body[k] for k in range(3)]
    ri = [rsi.body[k] for k in range(3)]
    print(f"theta HpHm a={a}: kappa={defect.kappa} inner={din}\n  outer={dou}\n  R={rr}\n  Rinv={ri}")
