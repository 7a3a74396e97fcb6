from fractions import Fraction

import pytest

from fdamalg.algebra import (
    AmalgamSetup,
    Inclusion,
    canonical_inclusion,
    identity_inclusion,
    make_algebra,
    make_trace,
    matrix_algebra,
    validate_star_hom,
)
from fdamalg.linalg import StiemkeCertificate
from fdamalg.rfd import (
    InclusionMatrix,
    InvalidInclusion,
    NotFaithful,
    NotNormalized,
    ShapeMismatch,
    TraceSolution,
    inclusion_matrix,
    integer_scaling,
    pulled_back_trace,
    restrict_trace,
    rfd_decide,
    solve_trace_matching,
    trace_system,
)
from helpers import positive_nullvector_exists, random_over

C, C2, M2, M3 = make_algebra([1]), make_algebra([1, 1]), matrix_algebra(2), matrix_algebra(3)


def lam(entries, D, A):
    return InclusionMatrix(tuple(tuple(r) for r in entries), D, A)


class TestInclusionMatrix:
    def test_examples(self):
        assert inclusion_matrix(canonical_inclusion([[2]], C, M2)).entries == ((2,),)
        assert inclusion_matrix(canonical_inclusion([[1, 1]], C2, M2)).entries == ((1, 1),)
        A = make_algebra([2, 1, 3])
        assert inclusion_matrix(identity_inclusion(A)).entries == ((1, 0, 0), (0, 1, 0), (0, 0, 1))

    def test_round_trip_random(self, rng):
        for _ in range(15):
            D = make_algebra([rng.randint(1, 2) for _ in range(rng.randint(1, 3))])
            incl, rows = random_over(rng, D, 3, 4)
            got = inclusion_matrix(incl)
            assert [list(r) for r in got.entries] == rows and got.is_consistent

    def test_rejects_invalid(self):
        with pytest.raises(InvalidInclusion):
            inclusion_matrix(Inclusion(C, C, (C.scalar(2),)))


class TestRestrict:
    def test_examples(self):
        assert restrict_trace(lam([[2]], C, M2), make_trace(M2, ["1/2"])).s == (1,)
        A = make_algebra([2, 3])
        tau = make_trace(A, ["1/4", "1/6"])
        assert restrict_trace(lam([[1, 0], [0, 1]], A, A), tau).s == tau.s
        assert restrict_trace(lam([[1, 1]], C2, M2), make_trace(M2, ["1/2"])).s == (Fraction(1, 2),) * 2

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            restrict_trace(lam([[2]], C, M2), make_trace(M3, ["1/3"]))


class TestSolver:
    def test_scalar_amalgam(self):
        out = solve_trace_matching(lam([[2]], C, M2), lam([[3]], C, M3))
        assert out == TraceSolution((Fraction(1, 2),), (Fraction(1, 3),))

    def test_infeasible(self):
        LA, LB = lam([[1, 1]], C2, M2), lam([[1, 2]], C2, M3)
        cert = solve_trace_matching(LA, LB)
        assert isinstance(cert, StiemkeCertificate)
        assert cert.verify(trace_system(LA, LB))
        # swapped order certifies the swapped system
        cert2 = solve_trace_matching(LB, LA)
        assert cert2.verify(trace_system(LB, LA))

    def test_identical_inclusions(self):
        A = make_algebra([2, 1])
        L = lam([[1, 1], [1, 0]], C2, A)
        out = solve_trace_matching(L, L)
        assert out.s_A == out.s_B and all(v > 0 for v in out.s_A)

    def test_symmetry_swaps_witness(self, rng):
        for _ in range(30):
            D = make_algebra([rng.randint(1, 2) for _ in range(rng.randint(1, 3))])
            a, _ = random_over(rng, D, 3, 4)
            b, _ = random_over(rng, D, 3, 4)
            LA, LB = inclusion_matrix(a), inclusion_matrix(b)
            x, y = solve_trace_matching(LA, LB), solve_trace_matching(LB, LA)
            assert isinstance(x, StiemkeCertificate) == isinstance(y, StiemkeCertificate)
            if isinstance(x, TraceSolution):
                assert (x.s_A, x.s_B) == (y.s_B, y.s_A)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            solve_trace_matching(lam([[2]], C, M2), lam([[1, 1]], C2, M2))

    def test_scale_invariance(self):
        # any positive multiple of a solution solves the homogeneous system
        LA, LB = lam([[1, 1], [1, 1]], C2, make_algebra([2, 2])), lam([[1, 1]], C2, M2)
        out = solve_trace_matching(LA, LB)
        M = trace_system(LA, LB)
        for t in (Fraction(1, 3), Fraction(7)):
            x = [t * v for v in out.s_A + out.s_B]
            assert all(v == 0 for v in M.apply(x))


class TestIntegerScaling:
    def test_examples(self):
        assert integer_scaling(make_trace(M2, ["1/2"])) == (2, (1,))
        assert integer_scaling(make_trace(make_algebra([2, 3]), ["1/4", "1/6"])) == (12, (3, 2))
        assert integer_scaling(make_trace(C2, ["1/3", "2/3"])) == (3, (1, 2))

    def test_errors(self):
        with pytest.raises(NotFaithful):
            integer_scaling(make_trace(C2, [1, 0]))
        with pytest.raises(NotNormalized):
            integer_scaling(make_trace(C2, ["1/2", "1/3"]))


class TestDecide:
    def test_positive(self):
        d = rfd_decide(AmalgamSetup(canonical_inclusion([[2]], C, M2), canonical_inclusion([[3]], C, M3)))
        assert d.verdict and d.witness.k == 2 and d.witness.l == 3
        assert d.to_json()["witness"]["s_B"] == ["1/3"]

    def test_negative(self):
        d = rfd_decide(AmalgamSetup(canonical_inclusion([[1, 1]], C2, M2), canonical_inclusion([[1, 2]], C2, M3)))
        assert not d.verdict and d.certificate.verify(d.system)
        assert d.to_json()["certificate"]["system"] == [["1", "-1"], ["1", "-2"]]

    def test_identical_diagonal(self):
        i = canonical_inclusion([[1, 1]], C2, M2)
        d = rfd_decide(AmalgamSetup(i, i))
        assert d.verdict and d.witness.tau_A.s == (Fraction(1, 2),) and d.witness.k == d.witness.l == 2

    def test_witness_properties_random(self, rng):
        seen = set()
        for _ in range(40):
            D = make_algebra([rng.randint(1, 2) for _ in range(rng.randint(1, 3))])
            a, _ = random_over(rng, D, 3, 4)
            b, _ = random_over(rng, D, 3, 4)
            d = rfd_decide(AmalgamSetup(a, b))
            seen.add(d.verdict)
            rows = [list(r) for r in d.system]
            assert d.verdict == positive_nullvector_exists([[int(v.re) for v in r] for r in rows])
            if d.verdict:
                w = d.witness
                assert restrict_trace(d.lam_A, w.tau_A) == restrict_trace(d.lam_B, w.tau_B)
                for tau, emb in ((w.tau_A, w.embed_A), (w.tau_B, w.embed_B)):
                    assert tau.is_faithful and tau.is_normalized
                    assert validate_star_hom(emb).ok
                    assert pulled_back_trace(emb) == tau
                assert rfd_decide(AmalgamSetup(b, a)).verdict
            else:
                assert d.certificate.verify(d.system)
        assert seen == {True, False}

    def test_identical_law(self, rng):
        for _ in range(10):
            D = make_algebra([rng.randint(1, 2) for _ in range(rng.randint(1, 3))])
            a, _ = random_over(rng, D, 3, 4)
            assert rfd_decide(AmalgamSetup(a, a)).verdict
