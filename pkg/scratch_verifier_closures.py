"""Pre-flight checks for the verifier design.

1. H-relation germ closures (expected exact residual 0 at specific regions):
   HpHp INNER/INNER, HpE OUTER, HmE INNER, HpF OUTER-inv, HmF INNER-inv.
2. HpHm: no single-region closure; verify scalar identity via product forms.
3. EF delta on a non-vacuum state: D window == H-dressed RHS.
"""
import sys
sys.path.insert(0, "src")
from fractions import Fraction as F

from qca.series_core import ONE, ZERO, ParameterPoint, TruncatedSeries, sc
from qca.cartan import cartan_matrix
from qca.fock import (
    HeisenbergData, FockState, theta_fit_targets, fit_coefficients,
    contraction, build_vertex, vertex_operators, matrix_element,
    wick_two_point, PHI, PSI, E_KIND, F_KIND, HP_KIND, HM_KIND,
)
from qca.structure import (
    INNER, OUTER, RegionGerm, psi_theta_germ, psi_scalar_value,
    _telescoped_ratio, upsilon_delta_target,
)
from qca.qfunctions import THETA

PT = ParameterPoint.family1(F(1, 2), F(1, 3), 1)
A2 = cartan_matrix("A2")
HEIS = HeisenbergData.from_point(A2, PT)
ORDER = 24
COEFFS = fit_coefficients(theta_fit_targets(HEIS, ORDER), HEIS)
X = HEIS.sqrt_p
q = HEIS.q
qt = HEIS.qt
p = HEIS.p
SIG = PT.p_quarter(1)  # p^{1/4}

VOPS = {k: build_vertex(k, 0, SIG) for k in (E_KIND, F_KIND, HP_KIND, HM_KIND)}
VOPS1 = {k: build_vertex(k, 1, SIG) for k in (E_KIND, F_KIND, HP_KIND, HM_KIND)}


def pair_normalization(VA, VB, i_site, j_site, order):
    """(zshift, kappa, series in w/z) of exp<VA_i(z) VB_j(w)>."""
    total = TruncatedSeries.zero(order)
    zshift = 0
    kappa = ONE
    for l1 in VA.legs:
        for l2 in VB.legs:
            con = contraction(l1.boson, l2.boson, i_site, j_site, COEFFS, HEIS, order)
            total = total + con.osc.substitute_scaled(l2.shift / l1.shift)
            zshift += con.log_charge
            kappa *= (con.base_value * l1.shift) ** con.log_charge
    return zshift, kappa, total.exp()


def exchange_germ(kA, kB, i, j, order):
    VA = build_vertex(kA, i, SIG)
    VB = build_vertex(kB, j, SIG)
    sA, kapA, serA = pair_normalization(VA, VB, i, j, order)
    sB, kapB, serB = pair_normalization(VB, VA, j, i, order)
    assert sA == sB, (sA, sB)
    m = -sA if sA else 0
    # G(u) = u^{-(-sA)}... monomial z^{sA}/w^{sB} = u^{sA};  inner = 1/serB, outer = serA
    return RegionGerm(sA, kapA / kapB, serB.inverse(), serA)


def show(label, res):
    print(f"{label}: residual = {res}")


ORD = 20
# 1. closures
g = exchange_germ(HP_KIND, HP_KIND, 0, 1, ORD)
t = psi_theta_germ(-1, X, q, ORD, INNER) * psi_theta_germ(-1, X, qt, ORD, INNER).inverse()
show("HpHp a=-1 INNER/INNER", g.componentwise_residual(t))

g = exchange_germ(HP_KIND, HP_KIND, 0, 0, ORD)
t = psi_theta_germ(2, X, q, ORD, INNER) * psi_theta_germ(2, X, qt, ORD, INNER).inverse()
show("HpHp a=2  INNER/INNER", g.componentwise_residual(t))

g = exchange_germ(HP_KIND, E_KIND, 0, 0, ORD)
t = psi_theta_germ(2, X, q, ORD, OUTER, sigma=SIG)
show("HpE  a=2  OUTER sigma=p^1/4", g.componentwise_residual(t))

g = exchange_germ(HM_KIND, E_KIND, 0, 1, ORD)
t = psi_theta_germ(-1, X, q, ORD, INNER, sigma=ONE / SIG)
show("HmE  a=-1 INNER sigma=p^-1/4", g.componentwise_residual(t))

g = exchange_germ(HP_KIND, F_KIND, 0, 0, ORD)
t = psi_theta_germ(2, X, qt, ORD, OUTER, sigma=ONE / SIG).inverse()
show("HpF  a=2  OUTER-inv sigma=p^-1/4", g.componentwise_residual(t))

g = exchange_germ(HM_KIND, F_KIND, 0, 1, ORD)
t = psi_theta_germ(-1, X, qt, ORD, INNER, sigma=SIG).inverse()
show("HmF  a=-1 INNER-inv sigma=p^1/4", g.componentwise_residual(t))

# EE / FF germ closures are NOT expected; show the mismatch scale
g = exchange_germ(E_KIND, E_KIND, 0, 0, ORD)
t = psi_theta_germ(2, X, q, ORD, INNER, signed=True)
show("EE   a=2  INNER signed (expect FAIL)", g.componentwise_residual(t))

# 2. HpHm scalar identity via product forms
FACTORS = 200


def poch(c, nome, factors=FACTORS):
    out = ONE
    cur = sc(c)
    for _ in range(factors):
        out *= ONE - cur
        cur *= nome
    return out


def sc_eval(a, zeta):
    """S_c(zeta) = T(zeta)^-1 (X^-a q zeta; q)/(X^a q zeta; q)."""
    tel = _telescoped_ratio(a, X, p)
    return (ONE / tel.eval_at(zeta)) * poch(X ** (-a) * q * zeta, q) / poch(X ** a * q * zeta, q)


def sd_eval(a, zeta):
    """S_d(zeta) = T(zeta)^-1 (X^a zeta; qt)/(X^-a zeta; qt)."""
    tel = _telescoped_ratio(a, X, p)
    return (ONE / tel.eval_at(zeta)) * poch(X ** a * zeta, qt) / poch(X ** (-a) * zeta, qt)


def ups_eval(a, zeta):
    out = ONE
    for i in range(abs(a)):
        out *= ONE - zeta * X ** (abs(a) - 1 - 2 * i)
    return ONE / out if a > 0 else out


for a in (2, -1):
    for u0 in (sc(F(3, 2)), sc(5), sc(F(2, 7))):
        lhs = (
            sc_eval(a, ONE / (X * u0)) * sd_eval(a, X / u0) * ups_eval(a, ONE / u0) ** 2
            / (sc_eval(a, X * u0) * sd_eval(a, u0 / X) * ups_eval(a, u0) ** 2)
        )
        rhs = psi_scalar_value(THETA, a, X, u0 * X, nome=q, signed=True, factors=FACTORS) / \
            psi_scalar_value(THETA, a, X, u0 / X, nome=qt, signed=True, factors=FACTORS)
        rhs_u = psi_scalar_value(THETA, a, X, u0 * X, nome=q, signed=False, factors=FACTORS) / \
            psi_scalar_value(THETA, a, X, u0 / X, nome=qt, signed=False, factors=FACTORS)
        ds = abs(lhs - rhs)
        du = abs(lhs - rhs_u)
        print(f"HpHm a={a} u0={u0}: |lhs-signed|~{float(ds):.3e} |lhs-unsigned|~{float(du):.3e}")

# also EE scalar: u^a S_c(1/u)/S_c(u) vs signed psi
for a in (2, -1):
    u0 = sc(F(3, 2))
    lhs = u0 ** a * sc_eval(a, ONE / u0) / sc_eval(a, u0)
    rhs = psi_scalar_value(THETA, a, X, u0, nome=q, signed=True, factors=FACTORS)
    print(f"EE scalar a={a}: diff ~ {float(abs(lhs - rhs)):.3e}")

# FF scalar: u^a S_d(1/u)/S_d(u) vs 1/psi(qt) signed
for a in (2, -1):
    u0 = sc(F(3, 2))
    lhs = u0 ** a * sd_eval(a, ONE / u0) / sd_eval(a, u0)
    rhs = ONE / psi_scalar_value(THETA, a, X, u0, nome=qt, signed=True, factors=FACTORS)
    print(f"FF scalar a={a}: diff ~ {float(abs(lhs - rhs)):.3e}")

# 3. EF delta on non-vacuum state, dressed RHS from actual H matrix elements
W = 6
BOUND = W
pref = ONE / (X - ONE / X)
st = FockState(momentum=(0, 0), osc=(((0, 1), 1),))  # a_0[-1]|0>

E0, F0 = VOPS[E_KIND], VOPS[F_KIND]
HP0, HM0 = VOPS[HP_KIND], VOPS[HM_KIND]

ef = matrix_element(st, [(E0, "z"), (F0, "w")], st, HEIS, COEFFS, BOUND, cocycle=True)
fe = matrix_element(st, [(F0, "w"), (E0, "z")], st, HEIS, COEFFS, BOUND, cocycle=True)
D = dict(ef)
for (kw, kz), v in fe.items():
    D[(kz, kw)] = D.get((kz, kw), ZERO) - v

hp = matrix_element(st, [(HP0, "v")], st, HEIS, COEFFS, BOUND + 4, cocycle=True)
hm = matrix_element(st, [(HM0, "v")], st, HEIS, COEFFS, BOUND + 4, cocycle=True)

RHS = {}
for (k,), hv in hp.items():
    for m in range(-BOUND - 8, BOUND + 9):
        key = (m, k - m)
        RHS[key] = RHS.get(key, ZERO) + pref * X ** (-m) * SIG ** k * hv
for (k,), hv in hm.items():
    for m in range(-BOUND - 8, BOUND + 9):
        key = (k - m, m)
        RHS[key] = RHS.get(key, ZERO) - pref * X ** (-m) * SIG ** k * hv

worst = ZERO
for key in set(D) | set(RHS):
    kz, kw = key
    if abs(kz) > BOUND or abs(kw) > BOUND:
        continue
    diff = abs(D.get(key, ZERO) - RHS.get(key, ZERO))
    worst = max(worst, diff)
print(f"EF delta dressed-state check, worst residual on window {W}: {worst}")

# i != j vanishing
ef01 = matrix_element(
    FockState.vacuum(2), [(VOPS[E_KIND], "z"), (VOPS1[F_KIND], "w")],
    FockState.vacuum(2), HEIS, COEFFS, BOUND, cocycle=True)
fe01 = matrix_element(
    FockState.vacuum(2), [(VOPS1[F_KIND], "w"), (VOPS[E_KIND], "z")],
    FockState.vacuum(2), HEIS, COEFFS, BOUND, cocycle=True)
D01 = dict(ef01)
for (kw, kz), v in fe01.items():
    D01[(kz, kw)] = D01.get((kz, kw), ZERO) - v
print("EF i!=j dressed max:", max((abs(v) for v in D01.values()), default=ZERO))
