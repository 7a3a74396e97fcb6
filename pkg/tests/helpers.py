"""Random generators and independent oracles shared by the test modules.

The oracles deliberately avoid the package's own linear algebra: they use
sympy for exact work and numpy for floating-point spectra.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np
import sympy

from fdamalg.algebra import (
    AmalgamSetup,
    FdAlgebra,
    canonical_inclusion,
    condexp_trace_preserving,
    identity_inclusion,
    make_algebra,
)
from fdamalg.linalg import GaussRational, RatMatrix
from fdamalg.noninj import CertInput

FIXTURES = __import__("pathlib").Path(__file__).resolve().parents[1] / "src" / "fdamalg" / "fixtures"


def gauss(rng: random.Random, bound: int = 2, complex_: bool = True) -> GaussRational:
    im = rng.randint(-bound, bound) if complex_ else 0
    return GaussRational(Fraction(rng.randint(-bound, bound)), Fraction(im))


def random_element(rng: random.Random, A: FdAlgebra, bound: int = 2, complex_: bool = True):
    return A.element([RatMatrix([[gauss(rng, bound, complex_) for _ in range(n)] for _ in range(n)])
                      for n in A.block_sizes])


def random_multiplicities(rng: random.Random, source: FdAlgebra, n_target: int, max_size: int):
    """Rows of a unital injective multiplicity matrix with every target block of size <= max_size.

    Every source block is placed once (opening a new target block when none
    has room), then random extra copies are added where they fit.
    """
    sizes = source.block_sizes
    rows = [[0] * len(sizes) for _ in range(n_target)]

    def room(r):
        return max_size - sum(v * n for v, n in zip(r, sizes))

    for j in rng.sample(range(len(sizes)), len(sizes)):
        fits = [r for r in rows if room(r) >= sizes[j]]
        if not fits:
            rows.append([0] * len(sizes))
            fits = [rows[-1]]
        rng.choice(fits)[j] += 1
    for r in rows:
        for j in range(len(sizes)):
            while room(r) >= sizes[j] and rng.random() < 0.4:
                r[j] += 1
    return [r for r in rows if any(r)]


def random_over(rng: random.Random, source: FdAlgebra, max_blocks: int, max_size: int):
    rows = random_multiplicities(rng, source, rng.randint(1, max_blocks), max_size)
    target = make_algebra([sum(v * n for v, n in zip(r, source.block_sizes)) for r in rows])
    return canonical_inclusion(rows, source, target), rows


def random_cert_input(rng: random.Random, dt_in_D: bool = False):
    """A = At and B = Bt over D < Dt, with trace-preserving expectations onto D."""
    D = make_algebra([rng.randint(1, 2) for _ in range(rng.randint(1, 2))])
    lam_D, _ = random_over(rng, D, 2, 2)
    Dt = lam_D.target
    phi_A, _ = random_over(rng, Dt, 2, 4)
    phi_B, _ = random_over(rng, Dt, 2, 4)
    A, B = phi_A.target, phi_B.target
    incl_A, incl_B = phi_A.compose(lam_D), phi_B.compose(lam_D)
    setup = AmalgamSetup(incl_A, incl_B, identity_inclusion(A), identity_inclusion(B), lam_D, phi_A, phi_B)
    a, b = random_element(rng, A), random_element(rng, B)
    dt = lam_D(random_element(rng, D)) if dt_in_D else random_element(rng, Dt)
    return CertInput(setup, a, b, dt, condexp_trace_preserving(incl_A), condexp_trace_preserving(incl_B))


# -- oracles -----------------------------------------------------------------

def to_sympy(M: RatMatrix) -> sympy.Matrix:
    return sympy.Matrix(M.rows, M.cols, lambda i, j: sympy.Rational(M[i, j].re.numerator, M[i, j].re.denominator)
                        + sympy.I * sympy.Rational(M[i, j].im.numerator, M[i, j].im.denominator))


def positive_nullvector_exists(M: list[list[int]]) -> bool:
    """Vertex enumeration of ``{x >= 0, M x = 0, sum x = 1}``.

    A strictly positive point exists iff the supports of the vertices cover
    every coordinate (the barycenter of covering vertices is positive).
    """
    n = len(M[0])
    N = sympy.Matrix([list(r) for r in M] + [[1] * n])
    rhs = sympy.Matrix([0] * len(M) + [1])
    covered = set()
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            NS = N[:, list(S)]
            if NS.rank() != size:
                continue
            sol = (NS.T * NS).inv() * NS.T * rhs
            if NS * sol != rhs:
                continue
            if all(v >= 0 for v in sol):
                covered |= {S[i] for i, v in enumerate(sol) if v > 0}
    return covered == set(range(n))


def left_regular(A: FdAlgebra, x: np.ndarray) -> np.ndarray:
    """Matrix of ``y -> x y`` on the coordinates of ``A`` (``x`` given by its blocks)."""
    return np.kron(x, np.eye(x.shape[0]))
