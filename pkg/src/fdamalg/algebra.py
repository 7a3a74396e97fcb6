"""Finite-dimensional C*-algebras as multi-matrix algebras.

An :class:`FdAlgebra` is ``M_{n_1} + ... + M_{n_m}``.  Elements carry one exact
square matrix per block.  Coordinates of an element are its entries listed
block by block in row-major order, which is also the order of
:meth:`FdAlgebra.matrix_units`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from .linalg import (
    ONE,
    ZERO,
    GaussRational,
    RatMatrix,
    as_gauss,
    format_rational,
    is_psd,
    parse_rational,
    rank,
    rref,
    solve,
)

__all__ = [
    "InvalidBlockSize",
    "DimensionMismatch",
    "LengthMismatch",
    "NonFaithfulTrace",
    "FdAlgebra",
    "Element",
    "Inclusion",
    "ValidationReport",
    "Trace",
    "CondExp",
    "AmalgamSetup",
    "Unitization",
    "UnitElement",
    "make_algebra",
    "matrix_algebra",
    "canonical_inclusion",
    "identity_inclusion",
    "validate_star_hom",
    "minimal_central_projections",
    "unitize",
    "unitize_inclusion",
    "make_trace",
    "trace_apply",
    "default_trace",
    "condexp_trace_preserving",
    "validate_condexp",
    "validate_diagram",
]


class InvalidBlockSize(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class NonFaithfulTrace(ValueError):
    pass


UnitKey = tuple[int, int, int]


@dataclass(frozen=True)
class FdAlgebra:
    block_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(self.block_sizes)
        for n in sizes:
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise InvalidBlockSize(f"block sizes must be positive integers, got {n!r}")
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def n_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def dim(self) -> int:
        return sum(n * n for n in self.block_sizes)

    @property
    def is_zero(self) -> bool:
        return not self.block_sizes

    @cached_property
    def _units(self) -> tuple[UnitKey, ...]:
        return tuple((k, i, j) for k, n in enumerate(self.block_sizes) for i in range(n) for j in range(n))

    @cached_property
    def _unit_pos(self) -> dict[UnitKey, int]:
        return {u: p for p, u in enumerate(self._units)}

    @cached_property
    def block_offsets(self) -> tuple[int, ...]:
        """Offset of each block in the coordinate vector."""
        out, acc = [], 0
        for n in self.block_sizes:
            out.append(acc)
            acc += n * n
        return tuple(out)

    def matrix_units(self) -> tuple[UnitKey, ...]:
        return self._units

    def unit_index(self, key: UnitKey) -> int:
        return self._unit_pos[tuple(key)]

    def element(self, blocks: Sequence) -> "Element":
        return Element(self, tuple(b if isinstance(b, RatMatrix) else RatMatrix(b) for b in blocks))

    def zero(self) -> "Element":
        return Element(self, tuple(RatMatrix.zeros(n, n) for n in self.block_sizes))

    def unit(self) -> "Element":
        return Element(self, tuple(RatMatrix.identity(n) for n in self.block_sizes))

    def matrix_unit(self, k: int, i: int, j: int) -> "Element":
        blocks = []
        for kk, n in enumerate(self.block_sizes):
            if kk == k:
                blocks.append(RatMatrix._raw(tuple(tuple(ONE if (r, c) == (i, j) else ZERO for c in range(n))
                                                   for r in range(n)), n, n))
            else:
                blocks.append(RatMatrix.zeros(n, n))
        return Element(self, tuple(blocks))

    def basis(self) -> list["Element"]:
        return [self.matrix_unit(*u) for u in self._units]

    def from_coords(self, coords: Sequence) -> "Element":
        if len(coords) != self.dim:
            raise LengthMismatch(f"expected {self.dim} coordinates, got {len(coords)}")
        vals = [as_gauss(c) for c in coords]
        blocks, pos = [], 0
        for n in self.block_sizes:
            blocks.append(RatMatrix._raw(tuple(tuple(vals[pos + r * n: pos + (r + 1) * n]) for r in range(n)), n, n))
            pos += n * n
        return Element(self, tuple(blocks))

    def scalar(self, c) -> "Element":
        return self.unit() * as_gauss(c)

    def to_json(self):
        return {"blocks": list(self.block_sizes)}

    @classmethod
    def from_json(cls, data) -> "FdAlgebra":
        return make_algebra(data["blocks"])

    def __str__(self):
        if self.is_zero:
            return "0"
        return " + ".join("C" if n == 1 else f"M{n}" for n in self.block_sizes)


def make_algebra(block_sizes: Iterable[int]) -> FdAlgebra:
    return FdAlgebra(tuple(block_sizes))


def matrix_algebra(n: int) -> FdAlgebra:
    return FdAlgebra((n,))


@dataclass(frozen=True, eq=False)
class Element:
    algebra: FdAlgebra
    blocks: tuple[RatMatrix, ...]

    def __post_init__(self):
        sizes = self.algebra.block_sizes
        if len(self.blocks) != len(sizes) or any(b.shape != (n, n) for b, n in zip(self.blocks, sizes)):
            raise DimensionMismatch(f"blocks do not match algebra {self.algebra}")

    def _same(self, other: "Element"):
        if other.algebra != self.algebra:
            raise DimensionMismatch(f"elements of different algebras: {self.algebra} vs {other.algebra}")

    def __add__(self, other: "Element") -> "Element":
        self._same(other)
        return Element(self.algebra, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "Element") -> "Element":
        self._same(other)
        return Element(self.algebra, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __neg__(self) -> "Element":
        return Element(self.algebra, tuple(-a for a in self.blocks))

    def __mul__(self, other):
        if isinstance(other, Element):
            self._same(other)
            return Element(self.algebra, tuple(a @ b for a, b in zip(self.blocks, other.blocks)))
        c = as_gauss(other)
        return Element(self.algebra, tuple(a.scale(c) for a in self.blocks))

    def __rmul__(self, other):
        c = as_gauss(other)
        return Element(self.algebra, tuple(a.scale(c) for a in self.blocks))

    def adjoint(self) -> "Element":
        return Element(self.algebra, tuple(a.adjoint() for a in self.blocks))

    @property
    def H(self) -> "Element":
        return self.adjoint()

    def coords(self) -> tuple[GaussRational, ...]:
        return tuple(v for b in self.blocks for row in b for v in row)

    def to_numpy_coords(self):
        import numpy as np
        return np.array([complex(v) for v in self.coords()], dtype=complex)

    def is_zero(self) -> bool:
        return all(b.is_zero() for b in self.blocks)

    def is_self_adjoint(self) -> bool:
        return all(b.is_self_adjoint() for b in self.blocks)

    def is_psd(self) -> bool:
        return all(is_psd(b) for b in self.blocks)

    def block(self, k: int) -> RatMatrix:
        return self.blocks[k]

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self.algebra == other.algebra and self.blocks == other.blocks

    def __hash__(self):
        return hash((self.algebra, self.blocks))

    def to_json(self):
        return {"blocks": [b.to_json() for b in self.blocks]}

    @classmethod
    def from_json(cls, algebra: FdAlgebra, data) -> "Element":
        return algebra.element([RatMatrix.from_json(b) for b in data["blocks"]])

    def __repr__(self):
        return f"Element({self.algebra}: {', '.join(repr(b) for b in self.blocks)})"


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failures: tuple[str, ...] = ()

    def __bool__(self):
        return self.ok

    def to_json(self):
        return {"ok": self.ok, "failures": list(self.failures)}


@dataclass(frozen=True, eq=False)
class Inclusion:
    """A linear map given by the images of the source's matrix units.

    Nothing is assumed about the map at construction time; use
    :func:`validate_star_hom` to check that it is a unital injective
    *-homomorphism.
    """

    source: FdAlgebra
    target: FdAlgebra
    images: tuple[Element, ...]

    def __post_init__(self):
        if len(self.images) != self.source.dim:
            raise DimensionMismatch("one image per source matrix unit is required")
        for img in self.images:
            if img.algebra != self.target:
                raise DimensionMismatch("image outside the target algebra")

    def image(self, k: int, i: int, j: int) -> Element:
        return self.images[self.source.unit_index((k, i, j))]

    def __call__(self, x: Element) -> Element:
        if x.algebra != self.source:
            raise DimensionMismatch(f"{x.algebra} is not the source {self.source}")
        return self.target.from_coords(self.matrix.apply(x.coords()))

    @cached_property
    def matrix(self) -> RatMatrix:
        """Coordinates: column p is the image of the p-th source matrix unit."""
        if not self.images:
            return RatMatrix.zeros(self.target.dim, 0)
        return RatMatrix([img.coords() for img in self.images]).transpose()

    @cached_property
    def float_matrix(self):
        return self.matrix.to_numpy()

    def compose(self, inner: "Inclusion") -> "Inclusion":
        """``self o inner``."""
        if inner.target != self.source:
            raise DimensionMismatch("cannot compose: target/source mismatch")
        return Inclusion(inner.source, self.target, tuple(self(img) for img in inner.images))

    def same_map(self, other: "Inclusion") -> bool:
        return (self.source, self.target) == (other.source, other.target) and self.images == other.images

    def to_json(self):
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "images": {f"{k}:{i}:{j}": img.to_json() for (k, i, j), img in zip(self.source.matrix_units(), self.images)},
        }

    @classmethod
    def from_images(cls, source: FdAlgebra, target: FdAlgebra, images: dict) -> "Inclusion":
        keyed = {}
        for key, img in images.items():
            if isinstance(key, str):
                key = tuple(int(p) for p in key.split(":"))
            keyed[tuple(key)] = img if isinstance(img, Element) else Element.from_json(target, img)
        missing = [u for u in source.matrix_units() if u not in keyed]
        if missing:
            raise DimensionMismatch(f"missing images for matrix units {missing}")
        extra = set(keyed) - set(source.matrix_units())
        if extra:
            raise DimensionMismatch(f"images given for unknown matrix units {sorted(extra)}")
        return cls(source, target, tuple(keyed[u] for u in source.matrix_units()))


def canonical_inclusion(mult, D: FdAlgebra, A: FdAlgebra) -> Inclusion:
    """Block-diagonal unital embedding of ``D`` into ``A`` with multiplicities ``mult``.

    ``mult[i][j]`` copies of the ``j``-th block of ``D`` are placed along the
    diagonal of the ``i``-th block of ``A``, ordered by ``j`` and then by copy.
    """
    mult = [list(r) for r in mult]
    if len(mult) != A.n_blocks or any(len(r) != D.n_blocks for r in mult):
        raise DimensionMismatch(f"multiplicity matrix must be {A.n_blocks}x{D.n_blocks}")
    for i, row in enumerate(mult):
        if any(isinstance(v, bool) or not isinstance(v, int) or v < 0 for v in row):
            raise DimensionMismatch("multiplicities must be nonnegative integers")
        if sum(v * n for v, n in zip(row, D.block_sizes)) != A.block_sizes[i]:
            raise DimensionMismatch(f"block {i} of A has size {A.block_sizes[i]}, "
                                    f"multiplicities fill {sum(v * n for v, n in zip(row, D.block_sizes))}")
    # offsets[i][j] = list of diagonal offsets of copies of D-block j in A-block i
    offsets = []
    for i, row in enumerate(mult):
        pos, per = 0, []
        for j, v in enumerate(row):
            per.append([pos + c * D.block_sizes[j] for c in range(v)])
            pos += v * D.block_sizes[j]
        offsets.append(per)
    images = []
    for (j, a, b) in D.matrix_units():
        blocks = []
        for i, n in enumerate(A.block_sizes):
            hits = {(o + a, o + b) for o in offsets[i][j]}
            blocks.append(RatMatrix._raw(tuple(tuple(ONE if (r, c) in hits else ZERO for c in range(n))
                                               for r in range(n)), n, n))
        images.append(Element(A, tuple(blocks)))
    return Inclusion(D, A, tuple(images))


def identity_inclusion(A: FdAlgebra) -> Inclusion:
    return Inclusion(A, A, tuple(A.basis()))


def validate_star_hom(incl: Inclusion, *, unital: bool = True) -> ValidationReport:
    """Check unitality, multiplicativity and *-preservation on matrix units, and injectivity."""
    S, T = incl.source, incl.target
    failures = []
    if unital:
        total = T.zero()
        for k, n in enumerate(S.block_sizes):
            for i in range(n):
                total = total + incl.image(k, i, i)
        if total != T.unit():
            failures.append("unitality: image of the unit is not the unit")
    units = S.matrix_units()
    for (k, i, j) in units:
        x = incl.image(k, i, j)
        if x.adjoint() != incl.image(k, j, i):
            failures.append(f"adjoint: image of e{(k, j, i)} is not the adjoint of image of e{(k, i, j)}")
        for (k2, i2, j2) in units:
            prod = x * incl.image(k2, i2, j2)
            expect = incl.image(k, i, j2) if (k == k2 and j == i2) else T.zero()
            if prod != expect:
                failures.append(f"multiplicativity: e{(k, i, j)} * e{(k2, i2, j2)}")
    for k in range(S.n_blocks):
        if incl.image(k, 0, 0).is_zero():
            failures.append(f"injectivity: block {k} is sent to zero")
    return ValidationReport(not failures, tuple(failures))


def minimal_central_projections(A: FdAlgebra) -> list[Element]:
    out = []
    for k, n in enumerate(A.block_sizes):
        blocks = tuple(RatMatrix.identity(m) if kk == k else RatMatrix.zeros(m, m)
                       for kk, m in enumerate(A.block_sizes))
        out.append(Element(A, blocks))
    return out


# -- unitization -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UnitElement:
    """A pair ``(a, mu)`` in the unitization ``A + C``."""

    owner: "Unitization"
    a: Element
    mu: GaussRational

    def __mul__(self, other):
        if isinstance(other, UnitElement):
            # (a, mu)(a', mu') = (aa' + mu a' + mu' a, mu mu')
            a = self.a * other.a + other.a * self.mu + self.a * other.mu
            return UnitElement(self.owner, a, self.mu * other.mu)
        c = as_gauss(other)
        return UnitElement(self.owner, self.a * c, self.mu * c)

    def __rmul__(self, other):
        return self * other

    def __add__(self, other: "UnitElement") -> "UnitElement":
        return UnitElement(self.owner, self.a + other.a, self.mu + other.mu)

    def __sub__(self, other: "UnitElement") -> "UnitElement":
        return UnitElement(self.owner, self.a - other.a, self.mu - other.mu)

    def adjoint(self) -> "UnitElement":
        return UnitElement(self.owner, self.a.adjoint(), self.mu.conj())

    def __eq__(self, other):
        if not isinstance(other, UnitElement):
            return NotImplemented
        return self.a == other.a and self.mu == other.mu

    def __hash__(self):
        return hash((self.a, self.mu))


@dataclass(frozen=True)
class Unitization:
    """The unitization ``A^u = A + C`` with its canonical character.

    For a nonzero finite-dimensional ``A`` (already unital) the map
    ``(a, mu) -> (a + mu 1_A, mu)`` is a *-isomorphism onto ``A + C`` as a
    multi-matrix algebra; :meth:`to_direct_sum` realizes it.
    """

    base: FdAlgebra

    def pair(self, a: Element, mu=0) -> UnitElement:
        if a.algebra != self.base:
            raise DimensionMismatch("element not in the base algebra")
        return UnitElement(self, a, as_gauss(mu))

    @property
    def one(self) -> UnitElement:
        return UnitElement(self, self.base.zero(), ONE)

    def embed(self, a: Element) -> UnitElement:
        return self.pair(a, 0)

    def epsilon(self, x: UnitElement) -> GaussRational:
        return x.mu

    @property
    def direct_sum(self) -> FdAlgebra:
        return FdAlgebra(self.base.block_sizes + (1,))

    def to_direct_sum(self, x: UnitElement) -> Element:
        shifted = x.a + self.base.unit() * x.mu if not self.base.is_zero else x.a
        return Element(self.direct_sum, shifted.blocks + (RatMatrix([[x.mu]]),))

    def from_direct_sum(self, y: Element) -> UnitElement:
        if y.algebra != self.direct_sum:
            raise DimensionMismatch("element not in the direct-sum model")
        mu = y.blocks[-1][0, 0]
        x = Element(self.base, y.blocks[:-1])
        a = x - self.base.unit() * mu if not self.base.is_zero else x
        return UnitElement(self, a, mu)


def unitize(A: FdAlgebra) -> Unitization:
    return Unitization(A)


def unitize_inclusion(incl: Inclusion) -> Inclusion:
    """Lift ``incl: A -> B`` to ``A^u -> B^u`` in the direct-sum models.

    ``(a, mu) -> (incl(a), mu)``; the lift is unital even when ``incl`` is
    not, in particular for the zero algebra as source.
    """
    Au, Bu = unitize(incl.source), unitize(incl.target)
    src = Au.direct_sum
    images = []
    for (k, i, j) in src.matrix_units():
        pre = Au.from_direct_sum(src.matrix_unit(k, i, j))
        img = incl(pre.a) if not incl.source.is_zero else incl.target.zero()
        images.append(Bu.to_direct_sum(Bu.pair(img, pre.mu)))
    return Inclusion(src, Bu.direct_sum, tuple(images))


# -- traces ----------------------------------------------------------------

@dataclass(frozen=True)
class Trace:
    """Trace given by its values ``s`` on minimal projections of each block."""

    algebra: FdAlgebra
    s: tuple[Fraction, ...]

    @property
    def is_faithful(self) -> bool:
        return all(v > 0 for v in self.s)

    @property
    def is_normalized(self) -> bool:
        return sum((n * v for n, v in zip(self.algebra.block_sizes, self.s)), Fraction(0)) == 1

    def __call__(self, x: Element) -> GaussRational:
        return trace_apply(self, x)

    def to_json(self):
        return {"algebra": self.algebra.to_json(), "s": [format_rational(v) for v in self.s]}


def make_trace(A: FdAlgebra, s: Sequence) -> Trace:
    vals = tuple(parse_rational(v) if not isinstance(v, Fraction) else v for v in s)
    if len(vals) != A.n_blocks:
        raise LengthMismatch(f"trace vector has {len(vals)} entries, algebra has {A.n_blocks} blocks")
    return Trace(A, vals)


def trace_apply(tau: Trace, x: Element) -> GaussRational:
    if x.algebra != tau.algebra:
        raise DimensionMismatch("element and trace live on different algebras")
    acc = ZERO
    for s, b in zip(tau.s, x.blocks):
        if s:
            acc = acc + b.trace() * s
    return acc


def default_trace(A: FdAlgebra) -> Trace:
    """``s_i = n_i / sum n_j^2``: the restriction of the normalized trace on ``End(A)``."""
    total = sum(n * n for n in A.block_sizes)
    return Trace(A, tuple(Fraction(n, total) for n in A.block_sizes))


# -- conditional expectations ---------------------------------------------

@dataclass(frozen=True, eq=False)
class CondExp:
    """Linear map from ``ambient`` onto the image of ``sub``.

    ``matrix`` sends ambient coordinates to coordinates in ``sub.source``.
    Calling the object returns the element of ``sub.source``;
    :meth:`in_ambient` returns its image inside the ambient algebra.
    """

    ambient: FdAlgebra
    sub: Inclusion
    matrix: RatMatrix
    trace: Trace | None = field(default=None)

    def __post_init__(self):
        if self.sub.target != self.ambient:
            raise DimensionMismatch("subalgebra inclusion must land in the ambient algebra")
        if self.matrix.shape != (self.sub.source.dim, self.ambient.dim):
            raise DimensionMismatch("expectation matrix has the wrong shape")

    def __call__(self, x: Element) -> Element:
        if x.algebra != self.ambient:
            raise DimensionMismatch(f"{x.algebra} is not the ambient {self.ambient}")
        return self.sub.source.from_coords(self.matrix.apply(x.coords()))

    def in_ambient(self, x: Element) -> Element:
        return self.sub(self(x))

    @cached_property
    def float_matrix(self):
        return self.matrix.to_numpy()

    def to_json(self):
        return {"matrix": self.matrix.to_json()}


def condexp_trace_preserving(incl: Inclusion, tau: Trace | None = None) -> CondExp:
    """Orthogonal projection onto ``incl(D)`` for ``<x, y> = tau(x* y)``."""
    A = incl.target
    if tau is None:
        tau = default_trace(A)
    if tau.algebra != A:
        raise DimensionMismatch("trace is not on the ambient algebra")
    if not tau.is_faithful:
        raise NonFaithfulTrace("trace-preserving expectations need a faithful trace")
    f = list(incl.images)
    fstar = [x.adjoint() for x in f]
    gram = RatMatrix([[trace_apply(tau, fk * fl) for fl in f] for fk in fstar])
    rhs = RatMatrix([[trace_apply(tau, fk * e) for e in A.basis()] for fk in fstar])
    R, pivots = rref(gram.hstack(rhs))
    d = len(f)
    if pivots[:d] != list(range(d)) or (len(pivots) > d):
        raise NonFaithfulTrace("Gram matrix of the subalgebra is singular")
    coeffs = RatMatrix._raw(tuple(tuple(R.row(r)[d:]) for r in range(d)), d, A.dim)
    return CondExp(A, incl, coeffs, tau)


def validate_condexp(E: CondExp) -> ValidationReport:
    """Idempotence on the subalgebra and bimodularity, checked on matrix units."""
    D, A = E.sub.source, E.ambient
    failures = []
    for u, e in zip(D.matrix_units(), D.basis()):
        if E(E.sub(e)) != e:
            failures.append(f"idempotence fails at D unit {u}")
    sub_units = [(u, E.sub(e)) for u, e in zip(D.matrix_units(), D.basis())]
    for v, x in zip(A.matrix_units(), A.basis()):
        Ex = E.in_ambient(x)
        for u1, d1 in sub_units:
            if E.in_ambient(d1 * x) != d1 * Ex:
                failures.append(f"left bimodularity fails at D unit {u1}, ambient unit {v}")
            if E.in_ambient(x * d1) != Ex * d1:
                failures.append(f"right bimodularity fails at D unit {u1}, ambient unit {v}")
    return ValidationReport(not failures, tuple(failures))


# -- commuting diagrams ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class AmalgamSetup:
    """The lower row ``A <- D -> B`` and optionally the upper row over it.

    Algebras are read off the inclusions: ``incl_A: D -> A``,
    ``incl_B: D -> B``, ``lam_A: A -> At``, ``lam_B: B -> Bt``,
    ``lam_D: D -> Dt``, ``phi_At: Dt -> At``, ``phi_Bt: Dt -> Bt``.
    """

    incl_A: Inclusion
    incl_B: Inclusion
    lam_A: Inclusion | None = None
    lam_B: Inclusion | None = None
    lam_D: Inclusion | None = None
    phi_At: Inclusion | None = None
    phi_Bt: Inclusion | None = None

    def __post_init__(self):
        if self.incl_A.source != self.incl_B.source:
            raise DimensionMismatch("the two lower inclusions must share their source D")
        upper = (self.lam_A, self.lam_B, self.lam_D, self.phi_At, self.phi_Bt)
        if any(x is not None for x in upper):
            if any(x is None for x in upper):
                raise DimensionMismatch("upper row needs lam_A, lam_B, lam_D, phi_At and phi_Bt")
            checks = [
                (self.lam_A.source, self.A, "lam_A source"),
                (self.lam_B.source, self.B, "lam_B source"),
                (self.lam_D.source, self.D, "lam_D source"),
                (self.phi_At.source, self.lam_D.target, "phi_At source"),
                (self.phi_Bt.source, self.lam_D.target, "phi_Bt source"),
                (self.phi_At.target, self.lam_A.target, "phi_At target"),
                (self.phi_Bt.target, self.lam_B.target, "phi_Bt target"),
            ]
            for got, want, what in checks:
                if got != want:
                    raise DimensionMismatch(f"{what} is {got}, expected {want}")

    @property
    def D(self) -> FdAlgebra:
        return self.incl_A.source

    @property
    def A(self) -> FdAlgebra:
        return self.incl_A.target

    @property
    def B(self) -> FdAlgebra:
        return self.incl_B.target

    @property
    def has_upper_row(self) -> bool:
        return self.lam_A is not None

    @property
    def Dt(self) -> FdAlgebra | None:
        return self.lam_D.target if self.lam_D else None

    @property
    def At(self) -> FdAlgebra | None:
        return self.lam_A.target if self.lam_A else None

    @property
    def Bt(self) -> FdAlgebra | None:
        return self.lam_B.target if self.lam_B else None

    def swapped(self) -> "AmalgamSetup":
        return AmalgamSetup(self.incl_B, self.incl_A, self.lam_B, self.lam_A, self.lam_D, self.phi_Bt, self.phi_At)

    def lower(self) -> "AmalgamSetup":
        return AmalgamSetup(self.incl_A, self.incl_B)


def _preimage_coords(incl: Inclusion, x: Element):
    return solve(incl.matrix, x.coords())


def validate_diagram(setup: AmalgamSetup, E_A: CondExp | None = None, E_B: CondExp | None = None,
                     E_D: CondExp | None = None) -> ValidationReport:
    """Check the two commuting squares exactly, and the expectation squares if given.

    Expectations are ``E_A: At -> A``, ``E_B: Bt -> B`` and ``E_D: Dt -> D``;
    the required identities are ``E_A o phi_At = incl_A o E_D`` and the same
    with ``B``.
    """
    if not setup.has_upper_row:
        return ValidationReport(False, ("diagram has no upper row",))
    failures = []
    D, Dt = setup.D, setup.Dt
    for side, lam, incl, phi in (("A", setup.lam_A, setup.incl_A, setup.phi_At),
                                 ("B", setup.lam_B, setup.incl_B, setup.phi_Bt)):
        for u, d in zip(D.matrix_units(), D.basis()):
            if phi(setup.lam_D(d)) != lam(incl(d)):
                failures.append(f"square {side}: phi_{side}t o lam_D != lam_{side} o incl_{side} at D unit {u}")
    given = [E is not None for E in (E_A, E_B, E_D)]
    if any(given):
        if not all(given):
            failures.append("expectations must be given for A, B and D together")
        else:
            for name, E, amb, sub in (("E_A", E_A, setup.At, setup.lam_A), ("E_B", E_B, setup.Bt, setup.lam_B),
                                      ("E_D", E_D, setup.Dt, setup.lam_D)):
                if E.ambient != amb or not E.sub.same_map(sub):
                    failures.append(f"{name} is not an expectation onto the lower algebra through lam")
            if not failures:
                for u, dt in zip(Dt.matrix_units(), Dt.basis()):
                    ed = E_D(dt)
                    ea = E_A(setup.phi_At(dt))
                    eb = E_B(setup.phi_Bt(dt))
                    if ea != setup.incl_A(ed):
                        failures.append(f"expectation square A: E_A o phi_At != incl_A o E_D at Dt unit {u}")
                    if eb != setup.incl_B(ed):
                        failures.append(f"expectation square B: E_B o phi_Bt != incl_B o E_D at Dt unit {u}")
                    pa = _preimage_coords(setup.incl_A, ea)
                    pb = _preimage_coords(setup.incl_B, eb)
                    if pa is None or pb is None:
                        failures.append(f"expectations do not send Dt into D at Dt unit {u}")
                    elif pa != pb:
                        failures.append(f"E_A and E_B disagree on Dt unit {u}")
    return ValidationReport(not failures, tuple(failures))
