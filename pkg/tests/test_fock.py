"""Free-field realization: commutators, coefficient fits, matrix elements."""

from fractions import Fraction as F

import pytest

from qca.cartan import cartan_matrix
from qca.fock import (
    CoefficientSet,
    CutoffExceeded,
    E_KIND,
    F_KIND,
    FitTargets,
    FockState,
    HP_KIND,
    HeisenbergData,
    InconsistentTarget,
    ModeCutoffExceeded,
    PHI,
    PSI,
    RegionMismatch,
    ZeroDivisor,
    ZeroMode,
    _poch_ratio_series,
    build_vertex,
    cocycle_sign,
    coefficient_divergence,
    contraction,
    element_window,
    fit_coefficients,
    matrix_element,
    pair_states,
    paper_printed_coefficients,
    rational_fit_targets,
    theta_fit_targets,
    upsilon_inner,
    verify_coefficients,
    vertex_apply,
    vertex_operators,
    wick_two_point,
)
from qca.series_core import ONE, ZERO, ParameterPoint, TruncatedSeries
from qca.structure import _telescoped_ratio, upsilon_closed_form

PT = ParameterPoint.family1(F(1, 2), F(1, 3), 1)
A2 = cartan_matrix("A2")
HEIS = HeisenbergData.from_point(A2, PT)
ORDER = 24
THETA_TARGETS = theta_fit_targets(HEIS, ORDER)
COEFFS = fit_coefficients(THETA_TARGETS, HEIS)
VAC = FockState.vacuum(2)


# -- Heisenberg table -------------------------------------------------

def test_commutator_spot_value():
    # q = 4, p = 9 with exact roots 2 and 3; a = 2, n = 1
    h = HeisenbergData(cartan=((2,),), q=F(4), p=F(9), sqrt_p=F(3), sqrt_q=F(2))
    assert h.entry_coefficient(2, 1) == F(175, 6)
    assert h.entry_coefficient(2, -1) == F(-175, 6)


def test_commutator_antisymmetry_many_points():
    for s, t in [(F(1, 2), F(1, 3)), (F(2, 3), F(1, 5)), (F(3, 5), F(2, 7))]:
        h = HeisenbergData.from_point(A2, ParameterPoint.family1(s, t, 1))
        for n in range(1, 12):
            for a in (2, -1):
                assert h.entry_coefficient(a, n) == -h.entry_coefficient(a, -n)


def test_bracket_delta_support():
    assert HEIS.bracket(0, 1, 3, -3) == HEIS.commutator_coefficient(0, 1, 3)
    assert HEIS.bracket(0, 1, 3, -2) == 0
    assert HEIS.bracket(0, 0, 2, 2) == 0
    with pytest.raises(ZeroMode):
        HEIS.bracket(0, 0, 0, 1)
    with pytest.raises(ZeroMode):
        HEIS.entry_coefficient(2, 0)


def test_pairing_is_cartan():
    assert HEIS.pairing(0, 1) == -1
    assert HEIS.pairing(1, 1) == 2


def test_bad_roots_rejected():
    with pytest.raises(ValueError):
        HeisenbergData(cartan=((2,),), q=F(4), p=F(9), sqrt_p=F(2), sqrt_q=F(2))


# -- fitted coefficients ----------------------------------------------

def test_fit_is_exact_both_kernels():
    assert verify_coefficients(COEFFS, THETA_TARGETS, HEIS) == 0
    tr = rational_fit_targets(HEIS, 12)
    cr = fit_coefficients(tr, HEIS)
    assert verify_coefficients(cr, tr, HEIS) == 0


def test_fitted_products_closed_forms():
    q, p, X = HEIS.q, HEIS.p, HEIS.sqrt_p
    pq = p * q
    for n in (1, 2, 5):
        assert COEFFS.uu(n) == 1 / ((q**n - 1) * (q**-n - 1))
        assert COEFFS.vv(n) == 1 / ((1 - pq**n) * (1 - pq**-n))
        assert COEFFS.uv(n) == X**n * q**n / ((1 - q**n) * (1 - pq**n))
        # mirror order must agree or no coefficient split exists
        assert COEFFS.vu(n) == COEFFS.uv(n)


def test_fitted_gauge_and_frozen_values():
    assert COEFFS.u_at(-1) == 1
    assert COEFFS.u_at(1) == F(-81, 6400)
    assert COEFFS.v_at(-1) == F(64, 259)
    assert COEFFS.v_at(1) == F(-81, 25900)


def test_rational_products():
    h = HEIS
    X, p = h.sqrt_p, h.p
    cr = fit_coefficients(rational_fit_targets(h, 10), h)

    def crat(a, n):
        return (X ** (a * n) - X ** (-a * n)) / (n * (1 - p**n))

    for n in (1, 3):
        C = h.entry_coefficient(2, n)
        assert cr.uu(n) * C == crat(2, n)
        assert cr.vv(n) == p**n * cr.uu(n)
        assert cr.uv(n) * C == -(X**n) * crat(2, n)


def test_target_log_profiles():
    # S_c, S_d, and the EF kernel have the announced log coefficients
    q, p, X = HEIS.q, HEIS.p, HEIS.sqrt_p
    qt = HEIS.qt
    a = 2
    Sc = THETA_TARGETS.ee[a].inverse().scale(X ** (-a)).log()
    Sd = THETA_TARGETS.ff[a].inverse().scale(X**a).log()
    Ups = THETA_TARGETS.ef[a].log()
    for n in range(1, 9):
        D = (X ** (a * n) - X ** (-a * n)) / n
        crat = D / (1 - p**n)
        assert Sc[n] == crat + D * q**n / (1 - q**n)
        assert Sd[n] == crat - D / (1 - qt**n)
        assert Ups[n] == D / (X**n - X ** (-n))


def test_ee_target_product_form():
    # stripped Riemann factor against the independent Pochhammer product
    X, p, q = HEIS.sqrt_p, HEIS.p, HEIS.q
    for a in (2, -1):
        tel = _telescoped_ratio(a, X, p).series(ORDER)
        assert tel.exponent == 0
        direct = (tel.body * _poch_ratio_series(X**a * q, X ** (-a) * q, q, ORDER)).scale(
            X ** (-a)
        )
        assert THETA_TARGETS.ee[a] == direct


def test_targets_signed_independent():
    alt = theta_fit_targets(HEIS, 8, signed=False)
    for a in alt.ee:
        assert alt.ee[a] == THETA_TARGETS.ee[a].truncate(8)


def test_ef_kernel_matches_delta_weights():
    # a = 2 kernel is the pole form, never a polynomial
    X = HEIS.sqrt_p
    ser = upsilon_inner(2, X, 6)
    direct = TruncatedSeries.one(6)
    for c in (X, 1 / X):
        lin = TruncatedSeries(6, [ONE, -c] + [ZERO] * 5)
        direct = direct * lin
    assert (ser * direct).is_one()
    assert upsilon_inner(0, X, 4).is_one()
    # a = -1 flips to the polynomial 1 - x
    m = upsilon_inner(-1, X, 4)
    assert m[0] == 1 and m[1] == -1 and m[2] == 0


def test_printed_coefficients_diverge_by_reported_ratios():
    printed = paper_printed_coefficients(HEIS, 8)
    assert printed.u_at(1) == F(-729, 20)
    div = coefficient_divergence(printed, COEFFS)
    q, p, X = HEIS.q, HEIS.p, HEIS.sqrt_p
    for n in range(1, 8):
        assert div["uu"][n] == 1 / (p * q)
        assert div["vv"][n] == 1 / q
        assert div["uv"][n] == -(X ** -(n + 1)) * q ** -(n + 1)
        # the printed set is not mirror-symmetric, so vu drifts separately
        assert div["vu"][n] == div["uv"][n] * (p * q**2) ** n


def test_fit_failure_modes():
    tg = theta_fit_targets(HEIS, 6)
    # cross-entry disagreement
    bad_ee = dict(tg.ee)
    bad_ee[2] = bad_ee[2] * TruncatedSeries(6, [ONE, F(1, 7)] + [ZERO] * 5)
    bad = FitTargets(kind=tg.kind, order=6, ee=bad_ee, ff=tg.ff, ef=tg.ef)
    with pytest.raises(InconsistentTarget):
        fit_coefficients(bad, HEIS)
    # coherent perturbation across entries passes the profile but breaks
    # the product constraint (uv)^2 = uu * vv
    mu = F(1, 5)
    bad_ef = {}
    for a, ser in tg.ef.items():
        bump = TruncatedSeries(6, [ZERO, mu * HEIS.entry_coefficient(a, 1)] + [ZERO] * 5)
        bad_ef[a] = ser * bump.exp()
    bad = FitTargets(kind=tg.kind, order=6, ee=tg.ee, ff=tg.ff, ef=bad_ef)
    with pytest.raises(InconsistentTarget):
        fit_coefficients(bad, HEIS)
    # vanishing constant term
    bad_ee = dict(tg.ee)
    bad_ee[2] = bad_ee[2].scale(ZERO)
    bad = FitTargets(kind=tg.kind, order=6, ee=bad_ee, ff=tg.ff, ef=tg.ef)
    with pytest.raises(ZeroDivisor):
        fit_coefficients(bad, HEIS)
    with pytest.raises(ModeCutoffExceeded):
        fit_coefficients(tg, HEIS, order=7)


def test_coefficient_set_json_round_trip():
    data = COEFFS.to_json()
    back = CoefficientSet.from_json(data)
    assert back.order == COEFFS.order
    assert back.provenance == "fitted"
    assert back.u == COEFFS.u and back.v == COEFFS.v
    assert back.A == COEFFS.A and back.B == COEFFS.B


def test_coefficient_set_mode_guards():
    with pytest.raises(ZeroMode):
        COEFFS.u_at(0)
    with pytest.raises(ModeCutoffExceeded):
        COEFFS.v_at(ORDER + 1)
    assert COEFFS.leg_coefficient(PHI, 2) == COEFFS.u_at(2)
    assert COEFFS.leg_coefficient(PSI, 2) == -COEFFS.v_at(2)


# -- contractions -----------------------------------------------------

def test_contraction_log_charges_and_bases():
    c = contraction(PHI, PSI, 0, 1, COEFFS, HEIS, 6)
    assert c.log_charge == 1 and c.log_base == "A"
    c = contraction(PSI, PHI, 0, 0, COEFFS, HEIS, 6)
    assert c.log_charge == -2 and c.log_base == "B"
    c = contraction(PHI, PHI, 0, 0, COEFFS, HEIS, 6)
    assert c.log_charge == 2
    for n in range(1, 7):
        assert c.osc[n] == COEFFS.uu(n) * HEIS.commutator_coefficient(0, 0, n)
    lau = c.exponentiated()
    assert lau.exponent == 2
    with pytest.raises(ModeCutoffExceeded):
        contraction(PHI, PHI, 0, 0, COEFFS, HEIS, ORDER + 1)


def test_h_plus_e_contraction_is_outer_structure_germ():
    # c_n + e_n p^{+-n/2} collapse to the one-nome kernel coefficients
    X, q = HEIS.sqrt_p, HEIS.q
    a = 2
    for n in range(1, 8):
        C = HEIS.entry_coefficient(a, n)
        c_n = COEFFS.uu(n) * C
        e_n = COEFFS.uv(n) * C
        D = (X ** (a * n) - X ** (-a * n)) / n
        assert c_n + e_n * X**n == D / (1 - q**n)
        assert c_n + e_n * X**-n == D * q**n / (1 - q**n)


# -- vertex operators on states ---------------------------------------

def test_vertex_shapes():
    ops = vertex_operators(PT, 0)
    assert ops[E_KIND].charge == 1 and ops[E_KIND].zpow == 0
    assert ops[F_KIND].charge == -1
    hp = ops[HP_KIND]
    assert hp.charge == 0 and hp.zpow == -2
    assert {leg.boson for leg in hp.legs} == {PHI, PSI}
    shifts = {leg.boson: leg.shift for leg in hp.legs}
    assert shifts[PHI] * shifts[PSI] == 1
    assert shifts[PHI] == PT.p_quarter(1)
    with pytest.raises(ValueError):
        build_vertex(HP_KIND, 0)
    with pytest.raises(ValueError):
        build_vertex("X", 0)


def test_e_on_vacuum():
    E0 = build_vertex(E_KIND, 0)
    res = vertex_apply(E0, VAC, HEIS, COEFFS, (-2, 2))
    assert res[0] == {FockState(momentum=(1, 0)): ONE}
    one_mode = FockState(momentum=(1, 0), osc=(((0, 1), 1),))
    assert res[1] == {one_mode: COEFFS.u_at(-1)}
    assert all(k >= 0 for k in res)


def test_h_on_momentum_picks_half_power():
    Hp = vertex_operators(PT, 0)[HP_KIND]
    st = FockState(momentum=(1, 0))
    res = vertex_apply(Hp, st, HEIS, COEFFS, (-2, -2))
    # pe = A_00 = 2, zero-mode scalar (sigma+/sigma-)^pe = X^2
    assert res[-2][st] == HEIS.sqrt_p**2
    Hm = vertex_operators(PT, 0)["H-"]
    res = vertex_apply(Hm, st, HEIS, COEFFS, (-2, -2))
    assert res[-2][st] == HEIS.sqrt_p**-2


def test_vertex_apply_degree_grading():
    E0 = build_vertex(E_KIND, 0)
    st = FockState(momentum=(0, 1), osc=(((1, 2), 1),))
    res = vertex_apply(E0, st, HEIS, COEFFS, (-3, 3))
    # base power is charge * pe = A_01 = -1 here
    for k, states in res.items():
        for out in states:
            assert out.degree == st.degree + k + 1


def test_vertex_apply_cross_site_annihilation():
    # E at site 0 must contract a_1[-n] through the off-diagonal C
    E0 = build_vertex(E_KIND, 0)
    st = FockState(momentum=(0, 0), osc=(((1, 1), 1),))
    res = vertex_apply(E0, st, HEIS, COEFFS, (-1, -1))
    dropped = FockState(momentum=(1, 0))
    assert res[-1][dropped] == COEFFS.u_at(1) * HEIS.commutator_coefficient(0, 1, 1)


def test_vertex_apply_guards():
    E0 = build_vertex(E_KIND, 0)
    with pytest.raises(ModeCutoffExceeded):
        vertex_apply(E0, VAC, HEIS, COEFFS, (0, ORDER + 1))
    with pytest.raises(CutoffExceeded):
        vertex_apply(E0, VAC, HEIS, COEFFS, (0, 5), cutoff=2)


def test_pair_states_permanent():
    two = FockState(momentum=(0, 0), osc=(((0, 1), 2),))
    C = HEIS.commutator_coefficient(0, 0, 1)
    assert pair_states(two, two, HEIS) == 2 * C**2
    left = FockState(momentum=(0, 0), osc=(((0, 1), 1),))
    right = FockState(momentum=(0, 0), osc=(((1, 1), 1),))
    assert pair_states(left, right, HEIS) == HEIS.commutator_coefficient(0, 1, 1)
    mixed = FockState(momentum=(0, 0), osc=(((0, 1), 1), ((1, 1), 1)))
    C00 = HEIS.commutator_coefficient(0, 0, 1)
    C01 = HEIS.commutator_coefficient(0, 1, 1)
    C11 = HEIS.commutator_coefficient(1, 1, 1)
    assert pair_states(mixed, mixed, HEIS) == C00 * C11 + C01 * C01
    assert pair_states(left, FockState(momentum=(1, 0), osc=left.osc), HEIS) == 0
    assert pair_states(left, two, HEIS) == 0


# -- matrix elements and Wick consistency -----------------------------

def test_ef_vacuum_window_matches_closed_form():
    E0 = build_vertex(E_KIND, 0)
    F0 = build_vertex(F_KIND, 0)
    elem = matrix_element(VAC, [(E0, "z"), (F0, "w")], VAC, HEIS, COEFFS, 6)
    win = element_window(elem, 6)
    assert (win - upsilon_closed_form(HEIS.p, "upsilon", 6)).is_zero()
    # powers sit on the line k_z + k_w = -2
    assert all(kz + kw == -2 for kz, kw in elem)


def test_wick_against_state_sums():
    ops0 = vertex_operators(PT, 0)
    ops1 = vertex_operators(PT, 1)
    pairs = [
        (ops0[E_KIND], ops0[F_KIND]),
        (ops0[F_KIND], ops0[E_KIND]),
        (ops0[HP_KIND], ops0["H-"]),
        (ops0[HP_KIND], ops1[HP_KIND]),
        (ops0[HP_KIND], ops0[HP_KIND]),
        (ops0[E_KIND], ops1[F_KIND]),
    ]
    for V1, V2 in pairs:
        direct = element_window(
            matrix_element(VAC, [(V1, "z"), (V2, "w")], VAC, HEIS, COEFFS, 4), 4
        )
        wick = wick_two_point(V1, V2, HEIS, COEFFS, 4)
        assert (direct - wick).is_zero()


def test_wick_charge_conservation():
    E0 = build_vertex(E_KIND, 0)
    F1 = build_vertex(F_KIND, 1)
    assert wick_two_point(E0, F1, HEIS, COEFFS, 4).is_zero()
    assert wick_two_point(E0, E0, HEIS, COEFFS, 4).is_zero()


def test_three_point_against_manual_wick():
    ops = vertex_operators(PT, 0)
    E0, F0, Hp = ops[E_KIND], ops[F_KIND], ops[HP_KIND]
    bound = 3
    elem = matrix_element(
        VAC, [(E0, "z"), (F0, "w"), (Hp, "v")], VAC, HEIS, COEFFS, bound
    )
    order = 3 * bound + 6

    def pair_series(V1, V2):
        total = TruncatedSeries.zero(order)
        zshift = 0
        for l1 in V1.legs:
            for l2 in V2.legs:
                con = contraction(
                    l1.boson, l2.boson, l1.site, l2.site, COEFFS, HEIS, order
                )
                total = total + con.osc.substitute_scaled(l2.shift / l1.shift)
                zshift += con.log_charge
        return total.exp(), zshift

    s_zw, c_zw = pair_series(E0, F0)
    s_zv, c_zv = pair_series(E0, Hp)
    s_wv, c_wv = pair_series(F0, Hp)
    assert (c_zw, c_zv, c_wv) == (-2, 0, 0)
    manual = {}
    for j1 in range(order + 1):
        for j2 in range(order + 1 - j1):
            for j3 in range(order + 1 - j1 - j2):
                val = s_zw[j1] * s_zv[j2] * s_wv[j3]
                if val == 0:
                    continue
                kz = c_zw - j1 - j2
                kw = j1 - j3
                kv = Hp.zpow + j2 + j3
                if max(abs(kz), abs(kw), abs(kv)) <= bound:
                    key = (kz, kw, kv)
                    manual[key] = manual.get(key, ZERO) + val
    manual = {k: v for k, v in manual.items() if v != 0}
    assert elem == manual


def test_region_tag_guard():
    E0 = build_vertex(E_KIND, 0)
    F0 = build_vertex(F_KIND, 0)
    ops = [(E0, "z"), (F0, "w")]
    matrix_element(VAC, ops, VAC, HEIS, COEFFS, 3, region=("z", "w"))
    with pytest.raises(RegionMismatch):
        matrix_element(VAC, ops, VAC, HEIS, COEFFS, 3, region=("w", "z"))
    with pytest.raises(ValueError):
        matrix_element(VAC, [(E0, "z"), (F0, "z")], VAC, HEIS, COEFFS, 3)


def test_cocycle_asymmetry():
    # crossing E_1 past an e_0 charge flips sign; the reverse does not
    assert cocycle_sign(A2, 1, (1, 0)) == -1
    assert cocycle_sign(A2, 0, (0, 1)) == 1
    assert cocycle_sign(A2, 1, (2, 0)) == 1
    E0 = build_vertex(E_KIND, 0)
    F1 = build_vertex(F_KIND, 1)
    bare = matrix_element(
        FockState(momentum=(1, -1)), [(E0, "z"), (F1, "w")], VAC, HEIS, COEFFS, 3
    )
    dressed = matrix_element(
        FockState(momentum=(1, -1)),
        [(E0, "z"), (F1, "w")],
        VAC,
        HEIS,
        COEFFS,
        3,
        cocycle=True,
    )
    # here F1 hits the vacuum first, so neither operator sees a charge
    assert bare and dressed == bare
    flipped = matrix_element(
        FockState(momentum=(1, -1)), [(F1, "w"), (E0, "z")], VAC, HEIS, COEFFS, 3
    )
    flipped_dressed = matrix_element(
        FockState(momentum=(1, -1)),
        [(F1, "w"), (E0, "z")],
        VAC,
        HEIS,
        COEFFS,
        3,
        cocycle=True,
    )
    # reversed order makes F1 cross the e_0 charge E0 created
    assert flipped and flipped_dressed == {k: -v for k, v in flipped.items()}
