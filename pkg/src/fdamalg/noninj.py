"""Certificates that ``lambda: A *_D B -> At *_Dt Bt`` is not injective.

All computations are exact and happen on finite-dimensional data.  The
central quantity is the ``D``-valued form

    E^B_D(b* (E^A_D(dt* a* a dt) - E^A_D(dt* a* a) dt
              - dt* E^A_D(a* a dt) + dt* E^A_D(a* a) dt) b)

which equals ``<xi, xi>`` for ``xi = (a dt)^ (x) b^ - a^ (x) (dt b)^`` in the
interior tensor product ``L^2(A, E^A_D) (x)_D L^2(B, E^B_D)``.  A nonzero
value means ``lambda`` kills a nonzero element.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import (
    AmalgamSetup,
    CondExp,
    DimensionMismatch,
    Element,
    Inclusion,
    RatMatrix,
    default_trace,
    unitize,
    unitize_inclusion,
    validate_star_hom,
)
from .linalg import ZERO, rank, solve

__all__ = [
    "MembershipFailure",
    "WrongDShape",
    "MissingExpectation",
    "CertInput",
    "CertVerdict",
    "NON_INJECTIVE",
    "INCONCLUSIVE",
    "membership",
    "pair_two_tensor",
    "econd_value",
    "check_prop_noninj",
    "check_cor_scalarD",
    "check_commutant_variant",
    "is_faithful_expectation",
    "unitize_setup",
]

NON_INJECTIVE = "non-injective"
INCONCLUSIVE = "inconclusive"


class MembershipFailure(ValueError):
    pass


class WrongDShape(ValueError):
    pass


class MissingExpectation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CertInput:
    """Diagram with both rows, the expectations onto ``D`` and the test elements.

    ``E_A_D`` is an expectation ``A -> D`` through ``setup.incl_A`` and
    ``E_B_D`` one ``B -> D`` through ``setup.incl_B``.  ``a`` lives in ``A``,
    ``b`` in ``B`` and ``dt`` in ``Dt``.
    """

    setup: AmalgamSetup
    a: Element
    b: Element
    dt: Element
    E_A_D: CondExp | None = None
    E_B_D: CondExp | None = None
    a1: Element | None = None
    a2: Element | None = None

    def __post_init__(self):
        s = self.setup
        if not s.has_upper_row:
            raise DimensionMismatch("certificates need both rows of the diagram")
        for name, x, alg in (("a", self.a, s.A), ("b", self.b, s.B), ("dt", self.dt, s.Dt),
                             ("a1", self.a1, s.A), ("a2", self.a2, s.A)):
            if x is not None and x.algebra != alg:
                raise DimensionMismatch(f"{name} must lie in {alg}, got {x.algebra}")
        for name, E, incl in (("E_A_D", self.E_A_D, s.incl_A), ("E_B_D", self.E_B_D, s.incl_B)):
            if E is not None and not E.sub.same_map(incl):
                raise DimensionMismatch(f"{name} is not an expectation onto D through incl")

    def require_expectations(self):
        if self.E_A_D is None or self.E_B_D is None:
            raise MissingExpectation("this check needs both E_A_D and E_B_D")


@dataclass(frozen=True, eq=False)
class CertVerdict:
    conclusion: str
    hypotheses: dict[str, bool] = field(default_factory=dict)
    value: Element | None = None

    @property
    def nonzero(self) -> bool | None:
        return None if self.value is None else not self.value.is_zero()

    def to_json(self):
        out = {"conclusion": self.conclusion, "hypotheses": dict(self.hypotheses)}
        if self.value is not None:
            # D = C gives a number; print it as one
            scalar = self.value.algebra.block_sizes == (1,)
            out["value"] = self.value.blocks[0][0, 0].to_json() if scalar else self.value.to_json()
            out["nonzero"] = self.nonzero
        return out


def membership(x: Element, sub: Inclusion) -> Element | None:
    """The preimage of ``x`` under ``sub`` if ``x`` lies in its image."""
    if x.algebra != sub.target:
        raise DimensionMismatch("element is not in the ambient algebra of the inclusion")
    coords = solve(sub.matrix, x.coords())
    if coords is None:
        return None
    return sub.source.from_coords(coords)


def pair_two_tensor(x: Element, y: Element, x2: Element, y2: Element, E_A_D: CondExp, E_B_D: CondExp) -> Element:
    """``<x^ (x) y^, x2^ (x) y2^> = E^B_D(y* E^A_D(x* x2) y2)``, an element of ``D``."""
    inner = E_A_D(x.adjoint() * x2)
    return E_B_D(y.adjoint() * E_B_D.sub(inner) * y2)


def _ad_and_db(inp: CertInput) -> tuple[Element, Element]:
    s = inp.setup
    ad_t = s.lam_A(inp.a) * s.phi_At(inp.dt)
    db_t = s.phi_Bt(inp.dt) * s.lam_B(inp.b)
    ad = membership(ad_t, s.lam_A)
    if ad is None:
        raise MembershipFailure("a dt does not lie in A")
    db = membership(db_t, s.lam_B)
    if db is None:
        raise MembershipFailure("dt b does not lie in B")
    return ad, db


def econd_value(inp: CertInput) -> CertVerdict:
    """Evaluate the weakened non-injectivity form exactly.

    The bracket is assembled in ``Dt``, sandwiched by ``b`` inside ``Bt`` and
    pulled back to ``B`` before ``E^B_D`` is applied.
    """
    inp.require_expectations()
    s = inp.setup
    ad, db = _ad_and_db(inp)
    EA, EB = inp.E_A_D, inp.E_B_D
    a, dt = inp.a, inp.dt
    dts = dt.adjoint()
    up = s.lam_D
    bracket = (up(EA(ad.adjoint() * ad))
               - up(EA(ad.adjoint() * a)) * dt
               - dts * up(EA(a.adjoint() * ad))
               + dts * up(EA(a.adjoint() * a)) * dt)
    bt = s.lam_B(inp.b)
    sandwiched = bt.adjoint() * s.phi_Bt(bracket) * bt
    pulled = membership(sandwiched, s.lam_B)
    if pulled is None:
        raise MembershipFailure("b* (...) b does not lie in B")
    value = EB(pulled)
    conclusion = INCONCLUSIVE if value.is_zero() else NON_INJECTIVE
    return CertVerdict(conclusion, {"a_dt_in_A": True, "dt_b_in_B": True, "econd_nonzero": not value.is_zero()},
                       value)


def _span_rank(elements: list[Element]) -> int:
    if not elements:
        return 0
    return rank(RatMatrix([e.coords() for e in elements]))


def is_faithful_expectation(E: CondExp) -> bool:
    """``E(x* x) = 0 => x = 0``, via nondegeneracy of ``(x, y) -> tau_D(E(x* y))``."""
    D, A = E.sub.source, E.ambient
    tau = default_trace(D)
    tau_units = [tau.s[k] if i == j else 0 for (k, i, j) in D.matrix_units()]
    # t[u] = tau_D(E(e_u)) for every matrix unit e_u of A
    t = [sum((E.matrix[c, u] * tau_units[c] for c in range(D.dim) if tau_units[c]), ZERO) for u in range(A.dim)]
    units = A.matrix_units()
    # e_(k,i,j)* e_(k',i',j') = delta_kk' delta_ii' e_(k,j,j')
    gram = RatMatrix([[t[A.unit_index((k, j, j2))] if (k, i) == (k2, i2) else ZERO for (k2, i2, j2) in units]
                      for (k, i, j) in units])
    return rank(gram) == A.dim


def check_prop_noninj(inp: CertInput) -> CertVerdict:
    """Hypotheses of the strong criterion: trivial ``D(dt b) & D b``, nonzero ``E(dt* a* a dt) b``, faithful ``E^B_D``."""
    inp.require_expectations()
    s = inp.setup
    hyp = {"a_dt_in_A": False, "dt_b_in_B": False}
    ad_t = s.lam_A(inp.a) * s.phi_At(inp.dt)
    db_t = s.phi_Bt(inp.dt) * s.lam_B(inp.b)
    ad = membership(ad_t, s.lam_A)
    db = membership(db_t, s.lam_B)
    hyp["a_dt_in_A"] = ad is not None
    hyp["dt_b_in_B"] = db is not None
    bt = s.lam_B(inp.b)
    d_images = [s.lam_B(s.incl_B(e)) for e in s.D.basis()]
    U = [d * db_t for d in d_images]
    V = [d * bt for d in d_images]
    ru, rv = _span_rank(U), _span_rank(V)
    hyp["D_dtb_meets_Db_trivially"] = ru + rv - _span_rank(U + V) == 0
    if ad is not None:
        e = inp.E_A_D(ad.adjoint() * ad)
        hyp["E_dtaadt_b_nonzero"] = not (s.incl_B(e) * inp.b).is_zero()
    else:
        hyp["E_dtaadt_b_nonzero"] = False
    hyp["E_B_D_faithful"] = is_faithful_expectation(inp.E_B_D)
    conclusion = NON_INJECTIVE if all(hyp.values()) else INCONCLUSIVE
    return CertVerdict(conclusion, hyp)


def _scalar_lower_row(setup: AmalgamSetup) -> bool:
    D = setup.D
    if D.block_sizes != (1,):
        return False
    return validate_star_hom(setup.incl_A).ok and validate_star_hom(setup.incl_B).ok


def unitize_setup(setup: AmalgamSetup) -> AmalgamSetup:
    """Replace every algebra by its unitization (direct-sum model).

    Used for amalgamation over ``D = 0``: afterwards ``D^u = C`` sits
    unitally in ``A^u`` and ``B^u``.
    """
    lift = unitize_inclusion
    return AmalgamSetup(lift(setup.incl_A), lift(setup.incl_B), lift(setup.lam_A), lift(setup.lam_B),
                        lift(setup.lam_D), lift(setup.phi_At), lift(setup.phi_Bt))


def _lift_element(x: Element | None) -> Element | None:
    if x is None:
        return None
    U = unitize(x.algebra)
    return U.to_direct_sum(U.embed(x))


def _scalar_case(inp: CertInput) -> CertInput:
    s = inp.setup
    if s.D.is_zero:
        us = unitize_setup(s)
        return CertInput(us, _lift_element(inp.a), _lift_element(inp.b), _lift_element(inp.dt),
                         a1=_lift_element(inp.a1), a2=_lift_element(inp.a2))
    if not _scalar_lower_row(s):
        raise WrongDShape(f"D must be 0 or C included unitally, got {s.D}")
    return inp


def check_cor_scalarD(inp: CertInput) -> CertVerdict:
    """``a dt`` in ``A`` and nonzero, ``dt b`` in ``B``, ``dt b`` not in ``C b``."""
    inp = _scalar_case(inp)
    s = inp.setup
    ad = membership(s.lam_A(inp.a) * s.phi_At(inp.dt), s.lam_A)
    db_t = s.phi_Bt(inp.dt) * s.lam_B(inp.b)
    db = membership(db_t, s.lam_B)
    hyp = {
        "a_dt_in_A": ad is not None,
        "a_dt_nonzero": ad is not None and not ad.is_zero(),
        "dt_b_in_B": db is not None,
        "dt_b_not_in_Cb": _span_rank([inp.b, db]) > _span_rank([inp.b]) if db is not None else False,
    }
    conclusion = NON_INJECTIVE if all(hyp.values()) else INCONCLUSIVE
    return CertVerdict(conclusion, hyp)


def check_commutant_variant(inp: CertInput) -> CertVerdict:
    """``a1 dt, dt a2`` in ``A``, ``a1 dt`` not scalar, ``b`` outside ``D``, ``dt b = b dt``."""
    if inp.a1 is None or inp.a2 is None:
        raise MembershipFailure("the commutant variant needs a1 and a2")
    inp = _scalar_case(inp)
    s = inp.setup
    dtA = s.phi_At(inp.dt)
    a1d = membership(s.lam_A(inp.a1) * dtA, s.lam_A)
    da2 = membership(dtA * s.lam_A(inp.a2), s.lam_A)
    scalars = [s.A.unit()]
    bt = s.lam_B(inp.b)
    dtB = s.phi_Bt(inp.dt)
    hyp = {
        "a1_dt_in_A": a1d is not None,
        "dt_a2_in_A": da2 is not None,
        "a1_dt_not_scalar": a1d is not None and _span_rank(scalars + [a1d]) > 1,
        "b_not_in_D": membership(inp.b, s.incl_B) is None,
        "dt_b_commute": dtB * bt == bt * dtB,
    }
    conclusion = NON_INJECTIVE if all(hyp.values()) else INCONCLUSIVE
    return CertVerdict(conclusion, hyp)
