import random
from fractions import Fraction

import pytest

from fdamalg.algebra import (
    AmalgamSetup,
    Inclusion,
    canonical_inclusion,
    condexp_trace_preserving,
    identity_inclusion,
    make_algebra,
    matrix_algebra,
)
from fdamalg.linalg import GaussRational, RatMatrix, is_psd
from fdamalg.noninj import (
    INCONCLUSIVE,
    NON_INJECTIVE,
    CertInput,
    MembershipFailure,
    MissingExpectation,
    WrongDShape,
    check_commutant_variant,
    check_cor_scalarD,
    check_prop_noninj,
    econd_value,
    is_faithful_expectation,
    membership,
    pair_two_tensor,
)
from helpers import random_cert_input, random_element

C, C2, M2, M4 = make_algebra([1]), make_algebra([1, 1]), matrix_algebra(2), matrix_algebra(4)


def m2(rows):
    return M2.element([RatMatrix(rows)])


def c2(x, y):
    return C2.element([RatMatrix([[x]]), RatMatrix([[y]])])


E11, E21, E12 = m2([[1, 0], [0, 0]]), m2([[0, 0], [1, 0]]), m2([[0, 1], [0, 0]])
DT = c2(1, -1)


def fixture(a=E11, b=E21, dt=DT, with_E=True):
    incl = canonical_inclusion([[2]], C, M2)
    lam = identity_inclusion(M2)
    setup = AmalgamSetup(incl, incl, lam, lam, canonical_inclusion([[1], [1]], C, C2),
                         canonical_inclusion([[1, 1]], C2, M2), canonical_inclusion([[1, 1]], C2, M2))
    E = condexp_trace_preserving(incl) if with_E else None
    return CertInput(setup, a, b, dt, E, E)


def scalar(x):
    return x.blocks[0][0, 0]


class TestMembership:
    def test_examples(self, rng):
        incl = canonical_inclusion([[1, 2]], C2, make_algebra([3]))
        assert membership(incl.target.unit(), incl) == C2.unit()
        assert membership(incl.target.matrix_unit(0, 0, 1), incl) is None
        for _ in range(10):
            d = random_element(rng, C2)
            assert membership(incl(d), incl) == d


class TestPairing:
    def test_units(self):
        inp = fixture()
        one = pair_two_tensor(M2.unit(), M2.unit(), M2.unit(), M2.unit(), inp.E_A_D, inp.E_B_D)
        assert one == C.unit()

    def test_conjugate_symmetric(self, rng):
        inp = fixture()
        for _ in range(10):
            x, y, x2, y2 = (random_element(rng, M2) for _ in range(4))
            p = pair_two_tensor(x, y, x2, y2, inp.E_A_D, inp.E_B_D)
            q = pair_two_tensor(x2, y2, x, y, inp.E_A_D, inp.E_B_D)
            assert p == q.adjoint()

    def test_fixture_value(self):
        inp = fixture()
        ad, db = E11, -E21  # a dt and dt b
        P = lambda x, y, x2, y2: scalar(pair_two_tensor(x, y, x2, y2, inp.E_A_D, inp.E_B_D))  # noqa: E731
        # each of the four terms has modulus 1/4; together they give 1
        assert P(ad, E21, ad, E21) == Fraction(1, 4)
        assert P(ad, E21, E11, db) == Fraction(-1, 4)
        assert P(ad, E21, ad, E21) - P(ad, E21, E11, db) - P(E11, db, ad, E21) + P(E11, db, E11, db) == 1


def four_term(inp):
    """The same form as <xi, xi> with xi = (a dt) (x) b - a (x) (dt b), by sesquilinear expansion."""
    s = inp.setup
    ad = membership(s.lam_A(inp.a) * s.phi_At(inp.dt), s.lam_A)
    db = membership(s.phi_Bt(inp.dt) * s.lam_B(inp.b), s.lam_B)
    P = lambda x, y, x2, y2: pair_two_tensor(x, y, x2, y2, inp.E_A_D, inp.E_B_D)  # noqa: E731
    a, b = inp.a, inp.b
    return P(ad, b, ad, b) - P(ad, b, a, db) - P(a, db, ad, b) + P(a, db, a, db)


class TestEcond:
    def test_fixture(self):
        v = econd_value(fixture())
        assert scalar(v.value) == 1 and v.conclusion == NON_INJECTIVE
        assert v.to_json()["value"] == "1"
        assert four_term(fixture()) == v.value

    def test_fixture_intermediates(self):
        inp = fixture()
        ad = membership(inp.setup.lam_A(E11) * inp.setup.phi_At(DT), inp.setup.lam_A)
        assert scalar(inp.E_A_D(ad.adjoint() * ad)) == Fraction(1, 2)
        # bracket = 1 - dt = diag(0, 2) in Dt
        E = lambda x: inp.setup.lam_D(inp.E_A_D(x))  # noqa: E731
        a = E11
        bracket = E(ad.adjoint() * ad) - E(ad.adjoint() * a) * DT - DT.adjoint() * E(a.adjoint() * ad) \
            + DT.adjoint() * E(a.adjoint() * a) * DT
        assert bracket == c2(0, 2)

    def test_vanishing_cases(self):
        assert econd_value(fixture(dt=C2.unit() * 3)).value.is_zero()
        zero = econd_value(fixture(a=M2.zero()))
        assert zero.value.is_zero() and zero.conclusion == INCONCLUSIVE

    def test_membership_failure(self):
        lam_A = canonical_inclusion([[2]], C, M2)
        setup = AmalgamSetup(identity_inclusion(C), canonical_inclusion([[2]], C, M2), lam_A, identity_inclusion(M2),
                             canonical_inclusion([[1], [1]], C, C2), canonical_inclusion([[1, 1]], C2, M2),
                             canonical_inclusion([[1, 1]], C2, M2))
        E_A = condexp_trace_preserving(identity_inclusion(C))
        E_B = condexp_trace_preserving(setup.incl_B)
        inp = CertInput(setup, C.unit(), E21, DT, E_A, E_B)
        with pytest.raises(MembershipFailure):
            econd_value(inp)

    def test_missing_expectation(self):
        with pytest.raises(MissingExpectation):
            econd_value(fixture(with_E=False))

    def test_properties_random(self, rng):
        for _ in range(40):
            inp = random_cert_input(rng)
            v = econd_value(inp).value
            assert four_term(inp) == v
            assert all(is_psd(blk) for blk in v.blocks)
            t = GaussRational(rng.randint(-3, 3), rng.randint(-3, 3))
            scaled = CertInput(inp.setup, inp.a * t, inp.b, inp.dt, inp.E_A_D, inp.E_B_D)
            assert econd_value(scaled).value == v * t.norm2()
            scaled_b = CertInput(inp.setup, inp.a, inp.b * t, inp.dt, inp.E_A_D, inp.E_B_D)
            assert econd_value(scaled_b).value == v * t.norm2()
            vanish = random_cert_input(rng, dt_in_D=True)
            assert econd_value(vanish).value.is_zero()

    def test_soundness_cross_check(self, rng):
        passed = 0
        for _ in range(150):
            inp = random_cert_input(rng)
            if check_prop_noninj(inp).conclusion == NON_INJECTIVE:
                passed += 1
                assert not econd_value(inp).value.is_zero()
        assert passed > 0


class TestProp:
    def test_fixture_is_inconclusive_but_econd_certifies(self):
        rep = check_prop_noninj(fixture())
        assert rep.hypotheses["D_dtb_meets_Db_trivially"] is False
        assert rep.hypotheses["E_dtaadt_b_nonzero"] and rep.hypotheses["E_B_D_faithful"]
        assert rep.conclusion == INCONCLUSIVE
        assert econd_value(fixture()).conclusion == NON_INJECTIVE

    def test_b_zero(self):
        rep = check_prop_noninj(fixture(b=M2.zero()))
        assert rep.hypotheses["D_dtb_meets_Db_trivially"] and not rep.hypotheses["E_dtaadt_b_nonzero"]

    def test_dt_unit(self):
        assert not check_prop_noninj(fixture(dt=C2.unit())).hypotheses["D_dtb_meets_Db_trivially"]

    def test_faithfulness(self):
        assert is_faithful_expectation(condexp_trace_preserving(canonical_inclusion([[1, 1]], C2, M2)))
        # E(x) = x_11 * 1 kills e22
        incl = canonical_inclusion([[2]], C, M2)
        from fdamalg.algebra import CondExp
        E = CondExp(M2, incl, RatMatrix([[1, 0, 0, 0]]))
        assert not is_faithful_expectation(E)


class TestCor:
    def test_pass(self):
        rep = check_cor_scalarD(fixture(b=E21 + E11))
        assert rep.conclusion == NON_INJECTIVE and all(rep.hypotheses.values())

    def test_scalar_dt(self):
        assert not check_cor_scalarD(fixture(b=E21 + E11, dt=C2.unit() * 2)).hypotheses["dt_b_not_in_Cb"]

    def test_a_dt_zero(self):
        rep = check_cor_scalarD(fixture(a=E11, dt=c2(0, 1)))
        assert not rep.hypotheses["a_dt_nonzero"] and rep.conclusion == INCONCLUSIVE

    def test_wrong_shape(self):
        incl = canonical_inclusion([[1, 1]], C2, M2)
        lam = identity_inclusion(M2)
        setup = AmalgamSetup(incl, incl, lam, lam, identity_inclusion(C2), incl, incl)
        with pytest.raises(WrongDShape):
            check_cor_scalarD(CertInput(setup, E11, E21, C2.unit()))

    def test_zero_D_through_unitization(self):
        Z = make_algebra([])
        incl = Inclusion(Z, M2, ())
        setup = AmalgamSetup(incl, incl, identity_inclusion(M2), identity_inclusion(M2), Inclusion(Z, C2, ()),
                             canonical_inclusion([[1, 1]], C2, M2), canonical_inclusion([[1, 1]], C2, M2))
        rep = check_cor_scalarD(CertInput(setup, E11, E21 + E11, DT))
        assert rep.conclusion == NON_INJECTIVE


def commutant_input(b=None, dt=None, a1=None):
    incl_A = canonical_inclusion([[4]], C, M4)
    incl_B = canonical_inclusion([[2]], C, M2)
    phi = canonical_inclusion([[2, 2]], C2, M4)  # diag(x, x, y, y) = u (x) 1
    setup = AmalgamSetup(incl_A, incl_B, identity_inclusion(M4), canonical_inclusion([[2]], M2, M4),
                         canonical_inclusion([[1], [1]], C, C2), phi, phi)
    b = E12 if b is None else b  # lam_B(b) = 1 (x) e12
    dt = DT if dt is None else dt
    a1 = M4.unit() if a1 is None else a1
    return CertInput(setup, M4.unit(), b, dt, a1=a1, a2=M4.unit())


class TestCommutant:
    def test_pass(self):
        rep = check_commutant_variant(commutant_input())
        assert rep.conclusion == NON_INJECTIVE and all(rep.hypotheses.values())

    def test_b_in_D(self):
        rep = check_commutant_variant(commutant_input(b=M2.unit()))
        assert not rep.hypotheses["b_not_in_D"]

    def test_dt_unit(self):
        rep = check_commutant_variant(commutant_input(dt=C2.unit()))
        assert not rep.hypotheses["a1_dt_not_scalar"]

    def test_needs_a1_a2(self):
        inp = commutant_input()
        with pytest.raises(MembershipFailure):
            check_commutant_variant(CertInput(inp.setup, inp.a, inp.b, inp.dt))
