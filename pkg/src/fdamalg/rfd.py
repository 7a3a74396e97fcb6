"""Residual finite dimensionality of ``A *_D B`` for finite-dimensional data.

The full amalgamated free product of finite-dimensional ``A`` and ``B`` over a
common unital subalgebra ``D`` is RFD exactly when there are faithful tracial
states on ``A`` and ``B`` with equal restrictions to ``D``.  In terms of
inclusion matrices this is the existence of strictly positive ``s_A, s_B``
with ``Lam_A^T s_A = Lam_B^T s_B``, which is decided here exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .algebra import (
    AmalgamSetup,
    DimensionMismatch,
    FdAlgebra,
    Inclusion,
    Trace,
    canonical_inclusion,
    make_trace,
    matrix_algebra,
    minimal_central_projections,
    validate_star_hom,
)
from .linalg import RatMatrix, StiemkeCertificate, format_rational, rank, strictly_positive_nullvector

__all__ = [
    "InvalidInclusion",
    "ShapeMismatch",
    "NotNormalized",
    "NotFaithful",
    "InclusionMatrix",
    "TraceSolution",
    "RfdWitness",
    "RfdDecision",
    "inclusion_matrix",
    "restrict_trace",
    "trace_system",
    "solve_trace_matching",
    "integer_scaling",
    "rfd_decide",
]


class InvalidInclusion(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class NotNormalized(ValueError):
    pass


class NotFaithful(ValueError):
    pass


@dataclass(frozen=True)
class InclusionMatrix:
    """Bratteli multiplicities: ``entries[i][j]`` copies of ``sub`` block ``j`` in ``ambient`` block ``i``."""

    entries: tuple[tuple[int, ...], ...]
    sub: FdAlgebra
    ambient: FdAlgebra

    def __post_init__(self):
        if len(self.entries) != self.ambient.n_blocks or any(len(r) != self.sub.n_blocks for r in self.entries):
            raise ShapeMismatch("inclusion matrix shape does not match the algebras")

    @property
    def is_consistent(self) -> bool:
        return all(sum(v * n for v, n in zip(row, self.sub.block_sizes)) == m
                   for row, m in zip(self.entries, self.ambient.block_sizes))

    def transpose_apply(self, s: Sequence[Fraction]) -> tuple[Fraction, ...]:
        return tuple(sum((self.entries[i][j] * s[i] for i in range(len(self.entries))), Fraction(0))
                     for j in range(self.sub.n_blocks))

    def to_json(self):
        return [list(r) for r in self.entries]


def inclusion_matrix(incl: Inclusion) -> InclusionMatrix:
    """Entry ``(i, j)`` is ``rank(q_j p_i A q_j) / rank(q_j D)``."""
    report = validate_star_hom(incl)
    if not report.ok:
        raise InvalidInclusion("; ".join(report.failures))
    D, A = incl.source, incl.target
    rows = []
    for i, p in enumerate(minimal_central_projections(A)):
        row = []
        for j, q in enumerate(minimal_central_projections(D)):
            corner = (incl(q) * p).blocks[i]
            r = rank(corner)
            n = D.block_sizes[j]
            if r % n:
                raise InvalidInclusion(f"corner rank {r} is not a multiple of block size {n}")
            row.append(r // n)
        rows.append(tuple(row))
    return InclusionMatrix(tuple(rows), D, A)


def restrict_trace(lam: InclusionMatrix, tau: Trace) -> Trace:
    if tau.algebra != lam.ambient:
        raise ShapeMismatch("trace does not live on the ambient algebra of the inclusion matrix")
    return Trace(lam.sub, lam.transpose_apply(tau.s))


def trace_system(lam_A: InclusionMatrix, lam_B: InclusionMatrix) -> RatMatrix:
    """``[Lam_A^T, -Lam_B^T]``, the homogeneous system for matching traces."""
    if lam_A.sub != lam_B.sub:
        raise ShapeMismatch("inclusion matrices must share the subalgebra D")
    n = lam_A.sub.n_blocks
    rows = []
    for j in range(n):
        rows.append([lam_A.entries[i][j] for i in range(len(lam_A.entries))]
                    + [-lam_B.entries[i][j] for i in range(len(lam_B.entries))])
    return RatMatrix(rows, rows=n, cols=lam_A.ambient.n_blocks + lam_B.ambient.n_blocks)


@dataclass(frozen=True)
class TraceSolution:
    s_A: tuple[Fraction, ...]
    s_B: tuple[Fraction, ...]


def _normalize(lam: InclusionMatrix, s: Sequence[Fraction]) -> tuple[Fraction, ...]:
    total = sum((n * v for n, v in zip(lam.ambient.block_sizes, s)), Fraction(0))
    return tuple(v / total for v in s)


def _key(lam: InclusionMatrix):
    return (lam.sub.block_sizes, lam.entries)


def _solve_ordered(lam_A: InclusionMatrix, lam_B: InclusionMatrix):
    system = trace_system(lam_A, lam_B)
    out = strictly_positive_nullvector(system)
    if isinstance(out, StiemkeCertificate):
        return out
    m = lam_A.ambient.n_blocks
    return tuple(out[:m]), tuple(out[m:])


def solve_trace_matching(lam_A: InclusionMatrix, lam_B: InclusionMatrix) -> TraceSolution | StiemkeCertificate:
    """Strictly positive normalized ``s_A, s_B`` with equal restrictions to ``D``.

    The result does not depend on which side is called ``A``: the simplex is
    always run with the lexicographically smaller inclusion first, and when
    both inclusion matrices coincide the solution is symmetrized.  The
    certificate, if any, is always stated for ``[Lam_A^T, -Lam_B^T]`` in the
    caller's order.
    """
    if lam_A.sub != lam_B.sub:
        raise ShapeMismatch("inclusion matrices must share the subalgebra D")
    flip = _key(lam_B) < _key(lam_A)
    first, second = (lam_B, lam_A) if flip else (lam_A, lam_B)
    out = _solve_ordered(first, second)
    if isinstance(out, StiemkeCertificate):
        # M' = -M with columns permuted; y -> -y certifies the caller's system
        return StiemkeCertificate(tuple(-v for v in out.y)) if flip else out
    u, v = out
    if flip:
        u, v = v, u
    if _key(lam_A) == _key(lam_B):
        avg = tuple((x + y) / 2 for x, y in zip(u, v))
        u = v = avg
    s_A, s_B = _normalize(lam_A, u), _normalize(lam_B, v)
    # both normalizations equal the D-trace of the unit, so scaling is shared
    assert lam_A.transpose_apply(s_A) == lam_B.transpose_apply(s_B)
    return TraceSolution(s_A, s_B)


def integer_scaling(tau: Trace) -> tuple[int, tuple[int, ...]]:
    """``k = lcm`` of denominators and ``mult = k s``, so ``A`` sits unitally in ``M_k``."""
    if not tau.is_faithful:
        raise NotFaithful("trace has a nonpositive entry")
    if not tau.is_normalized:
        raise NotNormalized("trace is not a state")
    k = math.lcm(*(v.denominator for v in tau.s)) if tau.s else 1
    mult = tuple(int(v * k) for v in tau.s)
    assert sum(m * n for m, n in zip(mult, tau.algebra.block_sizes)) == k
    return k, mult


@dataclass(frozen=True, eq=False)
class RfdWitness:
    tau_A: Trace
    tau_B: Trace
    k: int
    mult_A: tuple[int, ...]
    l: int
    mult_B: tuple[int, ...]
    embed_A: Inclusion
    embed_B: Inclusion

    def to_json(self):
        return {
            "s_A": [format_rational(v) for v in self.tau_A.s],
            "s_B": [format_rational(v) for v in self.tau_B.s],
            "k": self.k,
            "mult_A": list(self.mult_A),
            "l": self.l,
            "mult_B": list(self.mult_B),
        }


@dataclass(frozen=True, eq=False)
class RfdDecision:
    """Verdict plus exactly one of a trace witness or a Stiemke certificate.

    A ``False`` verdict is backed by the certificate (infeasibility of the
    trace-matching system) together with the theorem that every separable RFD
    algebra has a faithful tracial state; the free product itself is never
    built.
    """

    verdict: bool
    lam_A: InclusionMatrix
    lam_B: InclusionMatrix
    system: RatMatrix
    witness: RfdWitness | None = None
    certificate: StiemkeCertificate | None = None

    def __post_init__(self):
        if (self.witness is None) == (self.certificate is None) or self.verdict != (self.witness is not None):
            raise ValueError("exactly one of witness/certificate must match the verdict")

    def to_json(self):
        return {
            "rfd": self.verdict,
            "inclusion_matrices": {"A": self.lam_A.to_json(), "B": self.lam_B.to_json()},
            "witness": self.witness.to_json() if self.witness else None,
            "certificate": ({**self.certificate.to_json(), "system": [[str(v) for v in r] for r in self.system]}
                            if self.certificate else None),
        }


def _embedding(tau: Trace) -> tuple[int, tuple[int, ...], Inclusion]:
    k, mult = integer_scaling(tau)
    emb = canonical_inclusion([list(mult)], tau.algebra, matrix_algebra(k))
    return k, mult, emb


def rfd_decide(setup: AmalgamSetup) -> RfdDecision:
    lam_A = inclusion_matrix(setup.incl_A)
    lam_B = inclusion_matrix(setup.incl_B)
    system = trace_system(lam_A, lam_B)
    out = solve_trace_matching(lam_A, lam_B)
    if isinstance(out, StiemkeCertificate):
        assert out.verify(system)
        return RfdDecision(False, lam_A, lam_B, system, certificate=out)
    tau_A = make_trace(setup.A, out.s_A)
    tau_B = make_trace(setup.B, out.s_B)
    k, mult_A, emb_A = _embedding(tau_A)
    l, mult_B, emb_B = _embedding(tau_B)
    if restrict_trace(lam_A, tau_A) != restrict_trace(lam_B, tau_B):
        raise AssertionError("witness traces disagree on D")
    witness = RfdWitness(tau_A, tau_B, k, mult_A, l, mult_B, emb_A, emb_B)
    return RfdDecision(True, lam_A, lam_B, system, witness=witness)


def pulled_back_trace(embedding: Inclusion) -> Trace:
    """Normalized trace of ``M_k`` pulled back along ``A -> M_k``."""
    if embedding.target.n_blocks != 1:
        raise DimensionMismatch("target must be a full matrix algebra")
    k = embedding.target.block_sizes[0]
    lam = inclusion_matrix(embedding)
    return restrict_trace(lam, make_trace(embedding.target, [Fraction(1, k)]))
