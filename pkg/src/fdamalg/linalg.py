"""Exact linear algebra over the Gaussian rationals Q(i).

Everything here is exact: scalars are pairs of :class:`fractions.Fraction`,
matrices are dense immutable grids of such scalars.  The module provides
reduced row-echelon form, null spaces, an exact positive-semidefiniteness
test and a phase-one simplex deciding whether a homogeneous rational system
has a strictly positive solution (returning a Stiemke certificate when it
does not).
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

__all__ = [
    "GaussRational",
    "RatMatrix",
    "StiemkeCertificate",
    "NotSelfAdjoint",
    "as_gauss",
    "parse_rational",
    "format_rational",
    "rref",
    "rank",
    "nullspace_basis",
    "solve",
    "strictly_positive_nullvector",
    "is_psd",
]


class NotSelfAdjoint(ValueError):
    pass


def parse_rational(text) -> Fraction:
    if isinstance(text, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if isinstance(text, str):
        return Fraction(text.strip())
    raise TypeError(f"cannot read an exact rational from {text!r}")


def format_rational(q: Fraction) -> str:
    # Fraction keeps q > 0 and lowest terms; integers print without "/1"
    return str(Fraction(q))


class GaussRational:
    """An exact complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, GaussRational):
            if im:
                raise TypeError("imaginary part given twice")
            re, im = re.re, re.im
        self.re = parse_rational(re) if not isinstance(re, Fraction) else re
        self.im = parse_rational(im) if not isinstance(im, Fraction) else im

    # -- construction -----------------------------------------------------
    @classmethod
    def from_json(cls, data) -> "GaussRational":
        if isinstance(data, dict):
            return cls(parse_rational(data.get("re", 0)), parse_rational(data.get("im", 0)))
        return cls(parse_rational(data))

    def to_json(self):
        if self.im == 0:
            return format_rational(self.re)
        return {"re": format_rational(self.re), "im": format_rational(self.im)}

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return GaussRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return GaussRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return GaussRational(o.re - self.re, o.im - self.im)

    def __mul__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return GaussRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        n = o.norm2()
        if n == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conj()
        return GaussRational(num.re / n, num.im / n)

    def __rtruediv__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def __neg__(self):
        return GaussRational(-self.re, -self.im)

    def __pos__(self):
        return self

    def conj(self) -> "GaussRational":
        return GaussRational(self.re, -self.im)

    def norm2(self) -> Fraction:
        """|z|^2, exactly."""
        return self.re * self.re + self.im * self.im

    @property
    def is_real(self) -> bool:
        return self.im == 0

    # -- comparisons ------------------------------------------------------
    def __eq__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussRational({self})"

    def __str__(self):
        if self.im == 0:
            return format_rational(self.re)
        if self.re == 0:
            return f"{format_rational(self.im)}i"
        sign = "+" if self.im > 0 else "-"
        return f"{format_rational(self.re)}{sign}{format_rational(abs(self.im))}i"


ScalarLike = Union[GaussRational, int, Fraction, str]

ZERO = GaussRational(0)
ONE = GaussRational(1)


def _coerce(x):
    if isinstance(x, GaussRational):
        return x
    if isinstance(x, bool):
        return NotImplemented
    if isinstance(x, (int, Fraction)):
        return GaussRational(x)
    if isinstance(x, numbers.Rational):
        return GaussRational(Fraction(x.numerator, x.denominator))
    return NotImplemented


def as_gauss(x) -> GaussRational:
    """Coerce ints, Fractions, rational strings and ``{"re","im"}`` dicts.

    Floats are rejected on purpose: nothing inexact may leak into this module.
    """
    if isinstance(x, (str, dict)):
        return GaussRational.from_json(x)
    out = _coerce(x)
    if out is NotImplemented:
        raise TypeError(f"not an exact scalar: {x!r}")
    return out


class RatMatrix:
    """Dense immutable matrix of Gaussian rationals."""

    __slots__ = ("rows", "cols", "_e")

    def __init__(self, entries: Iterable[Iterable[ScalarLike]], rows: int | None = None,
                 cols: int | None = None):
        grid = tuple(tuple(as_gauss(v) for v in row) for row in entries)
        if rows is None:
            rows = len(grid)
        if cols is None:
            cols = len(grid[0]) if grid else 0
        if len(grid) != rows or any(len(r) != cols for r in grid):
            raise ValueError(f"entry grid does not match declared shape {rows}x{cols}")
        self.rows = rows
        self.cols = cols
        self._e = grid

    @classmethod
    def _raw(cls, grid, rows, cols) -> "RatMatrix":
        # trusted constructor; grid is a tuple of tuples of GaussRational
        m = object.__new__(cls)
        m.rows, m.cols, m._e = rows, cols, grid
        return m

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "RatMatrix":
        return cls._raw(tuple((ZERO,) * cols for _ in range(rows)), rows, cols)

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls._raw(tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n)), n, n)

    @classmethod
    def from_json(cls, data) -> "RatMatrix":
        rows = [[GaussRational.from_json(v) for v in row] for row in data]
        return cls(rows)

    @classmethod
    def column(cls, values: Sequence[ScalarLike]) -> "RatMatrix":
        return cls([[v] for v in values], rows=len(values), cols=1)

    def to_json(self):
        return [[v.to_json() for v in row] for row in self._e]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def __getitem__(self, idx):
        i, j = idx
        return self._e[i][j]

    def row(self, i: int) -> tuple[GaussRational, ...]:
        return self._e[i]

    def col(self, j: int) -> tuple[GaussRational, ...]:
        return tuple(r[j] for r in self._e)

    def to_lists(self) -> list[list[GaussRational]]:
        return [list(r) for r in self._e]

    def __iter__(self):
        return iter(self._e)

    # -- algebra ----------------------------------------------------------
    def _check_same(self, other: "RatMatrix"):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "RatMatrix") -> "RatMatrix":
        self._check_same(other)
        return RatMatrix._raw(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self._e, other._e)),
                              self.rows, self.cols)

    def __sub__(self, other: "RatMatrix") -> "RatMatrix":
        self._check_same(other)
        return RatMatrix._raw(tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self._e, other._e)),
                              self.rows, self.cols)

    def __neg__(self) -> "RatMatrix":
        return RatMatrix._raw(tuple(tuple(-a for a in r) for r in self._e), self.rows, self.cols)

    def scale(self, c: ScalarLike) -> "RatMatrix":
        c = as_gauss(c)
        return RatMatrix._raw(tuple(tuple(c * a for a in r) for r in self._e), self.rows, self.cols)

    def __mul__(self, c):
        if isinstance(c, RatMatrix):
            return NotImplemented
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other: "RatMatrix") -> "RatMatrix":
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        ocols = other.col_tuples()
        out = []
        for r in self._e:
            nz = [(k, a) for k, a in enumerate(r) if a]
            row = []
            for c in ocols:
                acc = ZERO
                for k, a in nz:
                    b = c[k]
                    if b:
                        acc = acc + a * b
                row.append(acc)
            out.append(tuple(row))
        return RatMatrix._raw(tuple(out), self.rows, other.cols)

    def col_tuples(self) -> tuple[tuple[GaussRational, ...], ...]:
        return tuple(zip(*self._e)) if self.rows else tuple(() for _ in range(self.cols))

    def adjoint(self) -> "RatMatrix":
        return RatMatrix._raw(tuple(tuple(v.conj() for v in c) for c in self.col_tuples()), self.cols, self.rows)

    def transpose(self) -> "RatMatrix":
        return RatMatrix._raw(self.col_tuples(), self.cols, self.rows)

    def trace(self) -> GaussRational:
        if self.rows != self.cols:
            raise ValueError("trace of a non-square matrix")
        acc = ZERO
        for i in range(self.rows):
            acc = acc + self._e[i][i]
        return acc

    def kron(self, other: "RatMatrix") -> "RatMatrix":
        out = []
        for r in self._e:
            for s in other._e:
                out.append(tuple(a * b for a in r for b in s))
        return RatMatrix._raw(tuple(out), self.rows * other.rows, self.cols * other.cols)

    def hstack(self, other: "RatMatrix") -> "RatMatrix":
        if self.rows != other.rows:
            raise ValueError("row count mismatch")
        return RatMatrix._raw(tuple(r + s for r, s in zip(self._e, other._e)), self.rows, self.cols + other.cols)

    def vstack(self, other: "RatMatrix") -> "RatMatrix":
        if self.cols != other.cols:
            raise ValueError("column count mismatch")
        return RatMatrix._raw(self._e + other._e, self.rows + other.rows, self.cols)

    def is_zero(self) -> bool:
        return not any(v for r in self._e for v in r)

    def is_real(self) -> bool:
        return all(v.im == 0 for r in self._e for v in r)

    def is_square(self) -> bool:
        return self.rows == self.cols

    def is_self_adjoint(self) -> bool:
        return self.is_square() and self == self.adjoint()

    def apply(self, vec: Sequence[ScalarLike]) -> tuple[GaussRational, ...]:
        """Matrix-vector product on a plain sequence."""
        if len(vec) != self.cols:
            raise ValueError("vector length mismatch")
        v = [as_gauss(x) for x in vec]
        out = []
        for r in self._e:
            acc = ZERO
            for a, b in zip(r, v):
                if a and b:
                    acc = acc + a * b
            out.append(acc)
        return tuple(out)

    def to_numpy(self):
        import numpy as np
        return np.array([[complex(v) for v in r] for r in self._e], dtype=complex).reshape(self.rows, self.cols)

    def __eq__(self, other):
        if not isinstance(other, RatMatrix):
            return NotImplemented
        return self.shape == other.shape and self._e == other._e

    def __hash__(self):
        return hash((self.rows, self.cols, self._e))

    def __repr__(self):
        body = "; ".join(" ".join(str(v) for v in r) for r in self._e)
        return f"RatMatrix({self.rows}x{self.cols}: [{body}])"


def _as_matrix(M) -> RatMatrix:
    return M if isinstance(M, RatMatrix) else RatMatrix(M)


def rref(M) -> tuple[RatMatrix, list[int]]:
    """Reduced row-echelon form and the list of pivot columns."""
    M = _as_matrix(M)
    a = M.to_lists()
    nrows, ncols = M.rows, M.cols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = ONE / a[r][c]
        a[r] = [v * inv if v else ZERO for v in a[r]]
        for i in range(nrows):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [x - f * y if y else x for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return RatMatrix._raw(tuple(tuple(row) for row in a), nrows, ncols), pivots


def rank(M) -> int:
    return len(rref(M)[1])


def nullspace_basis(M) -> list[tuple[GaussRational, ...]]:
    """An exact basis of ``{x : M x = 0}``, one vector per free column."""
    M = _as_matrix(M)
    R, pivots = rref(M)
    pivset = set(pivots)
    basis = []
    for f in range(M.cols):
        if f in pivset:
            continue
        x = [ZERO] * M.cols
        x[f] = ONE
        for r, p in enumerate(pivots):
            x[p] = -R[r, f]
        basis.append(tuple(x))
    return basis


def solve(M, rhs: Sequence[ScalarLike]) -> tuple[GaussRational, ...] | None:
    """One exact solution of ``M x = rhs`` (free variables set to zero), or None."""
    M = _as_matrix(M)
    if len(rhs) != M.rows:
        raise ValueError("right-hand side length mismatch")
    aug = M.hstack(RatMatrix.column(rhs))
    R, pivots = rref(aug)
    if pivots and pivots[-1] == M.cols:
        return None
    x = [ZERO] * M.cols
    for r, p in enumerate(pivots):
        x[p] = R[r, M.cols]
    return tuple(x)


@dataclass(frozen=True)
class StiemkeCertificate:
    """Dual witness ``y`` with ``M^T y >= 0`` and ``M^T y != 0``.

    By Stiemke's lemma such a ``y`` exists exactly when ``M x = 0`` has no
    strictly positive solution.
    """

    y: tuple[Fraction, ...]

    def verify(self, M) -> bool:
        M = _as_matrix(M)
        if len(self.y) != M.rows or not M.is_real():
            return False
        t = M.transpose().apply(self.y)
        return all(v.re >= 0 for v in t) and any(v.re > 0 for v in t)

    def to_json(self):
        return {"y": [format_rational(v) for v in self.y]}

    @classmethod
    def from_json(cls, data) -> "StiemkeCertificate":
        return cls(tuple(parse_rational(v) for v in data["y"]))


def _real_rows(M: RatMatrix) -> list[list[Fraction]]:
    if not M.is_real():
        raise ValueError("system must have real rational entries")
    return [[v.re for v in r] for r in M]


def _phase_one(A: list[list[Fraction]], b: list[Fraction]):
    """Phase-one simplex for ``A z = b, z >= 0`` with Bland's rule.

    Returns ``(z, None)`` when feasible, else ``(None, w)`` where ``w`` are the
    optimal duals of the sign-normalised rows together with the row signs.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    sign = [1 if bi >= 0 else -1 for bi in b]
    # tableau columns: n structural, m artificial, then rhs
    T = []
    for i in range(m):
        row = [sign[i] * v for v in A[i]] + [Fraction(int(i == k)) for k in range(m)] + [sign[i] * b[i]]
        T.append(row)
    basis = [n + i for i in range(m)]
    width = n + m
    # reduced costs c_j - c_B B^-1 A_j for the objective sum(artificials)
    cost = [-sum((T[i][j] for i in range(m)), Fraction(0)) for j in range(n)] + [Fraction(0)] * m
    while True:
        enter = next((j for j in range(width) if cost[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            if T[i][enter] > 0:
                ratio = T[i][width] / T[i][enter]
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            # unbounded below cannot happen: objective is bounded by 0
            raise AssertionError("phase-one objective unbounded")
        leave = best[1]
        piv = T[leave][enter]
        T[leave] = [v / piv for v in T[leave]]
        for i in range(m):
            if i != leave and T[i][enter]:
                f = T[i][enter]
                T[i] = [x - f * y for x, y in zip(T[i], T[leave])]
        f = cost[enter]
        cost = [c - f * y for c, y in zip(cost, T[leave][:width])]
        basis[leave] = enter
    if all(T[i][width] == 0 for i, j in enumerate(basis) if j >= n):
        z = [Fraction(0)] * n
        for i, j in enumerate(basis):
            if j < n:
                z[j] = T[i][width]
        return z, None
    duals = [1 - cost[n + i] for i in range(m)]
    return None, [-sign[i] * duals[i] for i in range(m)]


def strictly_positive_nullvector(M) -> tuple[Fraction, ...] | StiemkeCertificate:
    """Find ``x > 0`` with ``M x = 0`` or prove none exists.

    Decided by phase-one simplex on ``M x = 0, x >= 1`` (substituting
    ``x = 1 + z``).  The returned witness is checked before it leaves.
    """
    M = _as_matrix(M)
    A = _real_rows(M)
    n = M.cols
    if M.rows == 0 or M.is_zero():
        return tuple(Fraction(1) for _ in range(n))
    b = [-sum(r, Fraction(0)) for r in A]
    z, y = _phase_one(A, b)
    if z is not None:
        x = tuple(1 + v for v in z)
        assert all(v == 0 for v in M.apply(x)), "simplex returned a non-solution"
        return x
    cert = StiemkeCertificate(tuple(y))
    assert cert.verify(M), "simplex returned an invalid Stiemke certificate"
    return cert


def is_psd(H) -> bool:
    """Exact positive-semidefiniteness by pivoted LDL* elimination."""
    H = _as_matrix(H)
    if not H.is_self_adjoint():
        raise NotSelfAdjoint("is_psd needs a self-adjoint matrix")
    a = H.to_lists()
    while a:
        n = len(a)
        diag = [a[i][i].re for i in range(n)]
        if any(d < 0 for d in diag):
            return False
        for i in range(n):
            if diag[i] == 0 and any(a[i][j] for j in range(n)):
                return False
        p = next((i for i in range(n) if diag[i] > 0), None)
        if p is None:
            return True  # all-zero matrix
        hp = a[p][p]
        rest = [i for i in range(n) if i != p]
        a = [[a[i][j] - a[i][p] * a[p][j] / hp for j in rest] for i in rest]
    return True
