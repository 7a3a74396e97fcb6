"""Finite-depth dilation towers realizing the embedding constructions.

Given representations of ``A`` and ``B`` on a common space ``H`` that agree on
the amalgamated subalgebra, the towers below build representations of the
larger algebras ``At`` and ``Bt`` on ``H + K`` that still agree on the
amalgamated subalgebra and restrict to the given ones on ``H``.  Each layer
extends a representation by GNS-constructing the state ``phi o E`` of a
cyclic vector state ``phi``, with ``E`` the trace-preserving expectation.

The infinite towers are cut at depth ``N``; the final ``K`` block of each side
has no partner, so agreement is verified on every summand except those two.
Everything here is floating point; operators are stored as CSR matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, null_space
from scipy.sparse.csgraph import connected_components

from .algebra import (
    AmalgamSetup,
    CondExp,
    DimensionMismatch,
    Element,
    FdAlgebra,
    Inclusion,
    Trace,
    condexp_trace_preserving,
    validate_diagram,
)
from .rfd import RfdDecision

__all__ = [
    "NotAState",
    "NotUnitalRep",
    "DAgreementFailure",
    "DiagramFailure",
    "Representation",
    "Extension",
    "ModuleTensor",
    "TowerReport",
    "Tower",
    "gns",
    "state_from_trace",
    "vector_state",
    "cyclic_decomposition",
    "extend_representation",
    "module_tensor",
    "build_tower_equal_D",
    "build_tower_condexp",
    "common_representation",
]

CONSTRUCTION_TOL = 1e-9
KERNEL_CUTOFF = 1e-10


class NotAState(ValueError):
    pass


class NotUnitalRep(ValueError):
    pass


class DAgreementFailure(ValueError):
    pass


class DiagramFailure(ValueError):
    pass


def _fro(X) -> float:
    if sp.issparse(X):
        return float(np.sqrt(np.sum(np.abs(X.data) ** 2))) if X.nnz else 0.0
    return float(np.linalg.norm(X))


@lru_cache(maxsize=None)
def _left_mult(A: FdAlgebra) -> tuple[np.ndarray, ...]:
    """Matrices of left multiplication by each matrix unit, in coordinates."""
    out = []
    for (k, i, j) in A.matrix_units():
        L = np.zeros((A.dim, A.dim))
        n, off = A.block_sizes[k], A.block_offsets[k]
        # e_ij e_jl = e_il
        for l in range(n):
            L[off + i * n + l, off + j * n + l] = 1.0
        out.append(L)
    return tuple(out)


@lru_cache(maxsize=None)
def _unit_coords(A: FdAlgebra) -> np.ndarray:
    return A.unit().to_numpy_coords()


@dataclass(frozen=True, eq=False)
class Representation:
    """A *-representation given by the operators of the matrix units."""

    algebra: FdAlgebra
    dim: int
    images: tuple

    def __post_init__(self):
        if len(self.images) != self.algebra.dim:
            raise DimensionMismatch("one operator per matrix unit is required")
        imgs = tuple(sp.csr_matrix(X, dtype=complex) for X in self.images)
        for X in imgs:
            if X.shape != (self.dim, self.dim):
                raise DimensionMismatch(f"operator of shape {X.shape} on a {self.dim}-dimensional space")
        object.__setattr__(self, "images", imgs)

    @classmethod
    def from_inclusion(cls, incl: Inclusion) -> "Representation":
        """``incl: C -> M_L`` read as a representation of ``C`` on ``C^L``."""
        if incl.target.n_blocks != 1:
            raise DimensionMismatch("target must be a single matrix block")
        L = incl.target.block_sizes[0]
        return cls(incl.source, L, tuple(img.blocks[0].to_numpy() for img in incl.images))

    def image(self, k: int, i: int, j: int):
        return self.images[self.algebra.unit_index((k, i, j))]

    def of_coords(self, coords):
        out = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for c, X in zip(coords, self.images):
            if c != 0:
                out = out + c * X
        return out

    def __call__(self, x: Element):
        if x.algebra != self.algebra:
            raise DimensionMismatch("element of the wrong algebra")
        return self.of_coords(x.to_numpy_coords())

    def restrict(self, incl: Inclusion) -> "Representation":
        """The representation ``self o incl`` of ``incl.source``."""
        if incl.target != self.algebra:
            raise DimensionMismatch("inclusion does not land in the represented algebra")
        M = incl.float_matrix
        return Representation(incl.source, self.dim, tuple(self.of_coords(M[:, q]) for q in range(M.shape[1])))

    def compress(self, start: int, stop: int) -> "Representation":
        return Representation(self.algebra, stop - start, tuple(X[start:stop, start:stop] for X in self.images))

    def unit_residual(self) -> float:
        total = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for (k, i, j), X in zip(self.algebra.matrix_units(), self.images):
            if i == j:
                total = total + X
        return _fro(total - sp.identity(self.dim, dtype=complex, format="csr"))

    def residuals(self) -> dict[str, float]:
        """Multiplicativity, adjoint and unit residuals on all matrix-unit pairs."""
        units = self.algebra.matrix_units()
        mult = adj = 0.0
        for p, (k, i, j) in enumerate(units):
            X = self.images[p]
            adj = max(adj, _fro(X.getH() - self.image(k, j, i)))
            for q, (k2, i2, j2) in enumerate(units):
                prod = X @ self.images[q]
                if k == k2 and j == i2:
                    prod = prod - self.image(k, i, j2)
                mult = max(mult, _fro(prod))
        return {"multiplicativity": mult, "adjoint": adj, "unit": self.unit_residual()}

    def dense(self, p: int) -> np.ndarray:
        return self.images[p].toarray()


def state_from_trace(tau: Trace) -> np.ndarray:
    """Values of a trace on the matrix units, as a state vector."""
    A = tau.algebra
    return np.array([float(tau.s[k]) if i == j else 0.0 for (k, i, j) in A.matrix_units()], dtype=complex)


def vector_state(rep: Representation, xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=complex)
    return np.array([np.vdot(xi, X @ xi) for X in rep.images])


@dataclass(frozen=True, eq=False)
class _GNS:
    rep: list  # dense operators in the GNS basis
    omega: np.ndarray
    to_vector: np.ndarray  # coordinates in A -> GNS vector


def _gram_from_state(A: FdAlgebra, phi: np.ndarray) -> np.ndarray:
    # phi(e_p* e_q) = delta_kk' delta_ii' phi(e_(k, j, j'))
    G = np.zeros((A.dim, A.dim), dtype=complex)
    for k, n in enumerate(A.block_sizes):
        off = A.block_offsets[k]
        Phi = phi[off: off + n * n].reshape(n, n)
        G[off: off + n * n, off: off + n * n] = np.kron(np.eye(n), Phi)
    return G


def _orthonormal_quotient(G: np.ndarray, what: str) -> np.ndarray:
    """``W`` with ``W* G W = 1`` spanning the quotient by the kernel of ``G``."""
    G = (G + G.conj().T) / 2
    w, V = eigh(G)
    top = max(float(w.max()), 0.0) if w.size else 0.0
    if w.size and w.min() < -1e-8 * max(top, 1.0):
        raise NotAState(f"{what} is not positive semidefinite (eigenvalue {w.min():.3g})")
    keep = w > KERNEL_CUTOFF * top
    return V[:, keep] / np.sqrt(w[keep])


def _gns(A: FdAlgebra, phi) -> _GNS:
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (A.dim,):
        raise NotAState(f"state must have {A.dim} values, one per matrix unit")
    if abs(np.dot(phi, _unit_coords(A)) - 1) > 1e-9:
        raise NotAState("state is not normalized")
    G = _gram_from_state(A, phi)
    W = _orthonormal_quotient(G, "state Gram matrix")
    vec = W.conj().T @ G
    rep = [vec @ L @ W for L in _left_mult(A)]
    return _GNS(rep, vec @ _unit_coords(A), vec)


def gns(A: FdAlgebra, phi) -> tuple[Representation, np.ndarray]:
    """GNS representation of the state ``phi`` and its cyclic vector.

    ``phi`` lists the values of the state on the matrix units of ``A``.
    """
    g = _gns(A, phi)
    dim = g.omega.shape[0]
    return Representation(A, dim, tuple(g.rep)), g.omega


@dataclass(frozen=True, eq=False)
class _Piece:
    idx: np.ndarray      # coordinates of the reducing block that holds the piece
    xi: np.ndarray       # cyclic vector, local coordinates
    basis: np.ndarray    # orthonormal basis of the cyclic subspace, local coordinates
    mats: list           # dense local operators of the block
    first: int


def _blocks(rep: Representation) -> list[np.ndarray]:
    pattern = sp.identity(rep.dim, format="csr")
    for X in rep.images:
        pattern = pattern + abs(X)
    _, labels = connected_components(pattern, directed=False)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    return [np.array(g) for g in sorted(groups.values(), key=lambda g: g[0])]


def cyclic_decomposition(rep: Representation, tol: float = CONSTRUCTION_TOL) -> list[_Piece]:
    """Greedy cyclic pieces generated by standard basis vectors in order.

    Coordinates are first split into blocks no operator connects; every
    cyclic subspace stays inside one block, so the result coincides with the
    global greedy procedure.
    """
    pieces = []
    for idx in _blocks(rep):
        mats = [X[idx][:, idx].toarray() for X in rep.images]
        Q = np.zeros((len(idx), 0), dtype=complex)
        for t in range(len(idx)):
            r = -Q @ Q[t].conj()
            r[t] += 1.0
            nr = np.linalg.norm(r)
            if nr <= tol:
                continue
            xi = r / nr
            span = np.column_stack([M @ xi for M in mats])
            span = span - Q @ (Q.conj().T @ span)
            U, s, _ = np.linalg.svd(span, full_matrices=False)
            basis = U[:, s > tol * max(s.max(), 1.0)]
            Q = np.hstack([Q, basis])
            pieces.append(_Piece(idx, xi, basis, mats, int(idx[t])))
    pieces.sort(key=lambda p: p.first)
    return pieces


class _Triplets:
    """COO accumulator for one sparse operator per matrix unit."""

    def __init__(self, count: int):
        self.rows = [[] for _ in range(count)]
        self.cols = [[] for _ in range(count)]
        self.vals = [[] for _ in range(count)]

    def add(self, p: int, rows, cols, block):
        block = np.asarray(block)
        if block.size == 0:
            return
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        self.rows[p].append(rr.ravel())
        self.cols[p].append(cc.ravel())
        self.vals[p].append(block.ravel())

    def build(self, dim: int) -> list:
        out = []
        for r, c, v in zip(self.rows, self.cols, self.vals):
            if r:
                M = sp.coo_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(dim, dim))
                out.append(M.tocsr())
            else:
                out.append(sp.csr_matrix((dim, dim), dtype=complex))
        return out


@dataclass(frozen=True, eq=False)
class Extension:
    """A representation on ``H + K`` whose first ``dim_H`` coordinates carry ``H``."""

    rep: Representation
    dim_H: int
    dim_K: int
    residual: float
    isometry_residual: float


def _check_unital(rep: Representation, tol: float):
    if rep.unit_residual() > max(tol, 1e-12) * max(1.0, math.sqrt(rep.dim)):
        raise NotUnitalRep("representation does not send the unit to the identity")


def extend_representation(pi: Representation, incl: Inclusion, expectation: CondExp | None = None,
                          tol: float = CONSTRUCTION_TOL) -> Extension:
    """Extend ``pi`` of ``C`` to ``Ct`` on ``H + K`` with ``H`` reducing for ``C``.

    Each greedy cyclic piece with vector state ``phi`` is replaced by the GNS
    space of ``phi o E`` (``E`` the trace-preserving expectation ``Ct -> C``
    unless one is supplied); the piece embeds isometrically through
    ``pi(c) xi -> [incl(c)]``.
    """
    C, Ct = incl.source, incl.target
    if pi.algebra != C:
        raise DimensionMismatch("representation is not of the inclusion's source")
    _check_unital(pi, tol)
    E = expectation if expectation is not None else condexp_trace_preserving(incl)
    Ef = E.float_matrix          # dim C x dim Ct
    Mf = incl.float_matrix       # dim Ct x dim C
    H = pi.dim
    acc = _Triplets(Ct.dim)
    offK = H
    iso = 0.0
    for piece in cyclic_decomposition(pi, tol):
        phi = np.array([np.vdot(piece.xi, M @ piece.xi) for M in piece.mats])
        g = _gns(Ct, Ef.T @ phi)
        V = np.column_stack([M @ piece.xi for M in piece.mats])
        Wimg = g.to_vector @ Mf
        T = Wimg @ np.linalg.pinv(V, rcond=1e-12)
        Vp = T @ piece.basis
        s = Vp.shape[1]
        iso = max(iso, float(np.linalg.norm(Vp.conj().T @ Vp - np.eye(s))))
        Np = null_space(Vp.conj().T) if Vp.shape[0] > s else np.zeros((Vp.shape[0], 0))
        Q = np.hstack([Vp, Np])
        kr = np.arange(offK, offK + Np.shape[1])
        B = piece.basis
        for p, R in enumerate(g.rep):
            M = Q.conj().T @ R @ Q
            acc.add(p, piece.idx, piece.idx, B @ M[:s, :s] @ B.conj().T)
            acc.add(p, piece.idx, kr, B @ M[:s, s:])
            acc.add(p, kr, piece.idx, M[s:, :s] @ B.conj().T)
            acc.add(p, kr, kr, M[s:, s:])
        offK += Np.shape[1]
    rep = Representation(Ct, offK, tuple(acc.build(offK)))
    residual = 0.0
    for q in range(C.dim):
        col = rep.of_coords(Mf[:, q])[:, :H]
        target = sp.vstack([pi.images[q], sp.csr_matrix((offK - H, H))])
        residual = max(residual, _fro(col - target))
    return Extension(rep, H, offK - H, residual, iso)


@dataclass(frozen=True, eq=False)
class ModuleTensor:
    """``L^2(X, E) (x)_Y H = H + K`` with the left action of ``X``.

    ``span_to_basis`` sends spanning-set coordinates (``x_m (x) e_h`` in
    order ``m * dim_H + h``) to the orthonormal basis whose first ``dim_H``
    vectors are ``1 (x) h``.
    """

    rep: Representation
    dim_H: int
    dim_K: int
    span_to_basis: np.ndarray
    basis_in_span: np.ndarray
    isometry_residual: float


def module_tensor(E: CondExp, pi: Representation) -> ModuleTensor:
    """Interior tensor product of the Hilbert module ``L^2(X, E)`` with ``H``."""
    Y, X = E.sub.source, E.ambient
    if pi.algebra != Y:
        raise DimensionMismatch("representation is not of the expectation's range algebra")
    _check_unital(pi, CONSTRUCTION_TOL)
    H = pi.dim
    Ef = E.float_matrix
    dense = [pi.dense(p) for p in range(Y.dim)]
    # <x_m (x) h, x_m' (x) h'> = <h, pi(E(x_m* x_m')) h'>; x_m* x_m' is a matrix unit or 0
    G = np.zeros((X.dim * H, X.dim * H), dtype=complex)
    for m, (k, i, j) in enumerate(X.matrix_units()):
        n, off = X.block_sizes[k], X.block_offsets[k]
        for jp in range(n):
            mp = off + i * n + jp
            q = off + j * n + jp  # index of e_(k, j, jp)
            op = sum(Ef[c, q] * dense[c] for c in range(Y.dim) if Ef[c, q] != 0)
            if isinstance(op, np.ndarray):
                G[m * H:(m + 1) * H, mp * H:(mp + 1) * H] = op
    W = _orthonormal_quotient(G, "module Gram matrix")
    vec = W.conj().T @ G
    one = np.kron(_unit_coords(X).reshape(-1, 1), np.eye(H))
    J = vec @ one
    iso = float(np.linalg.norm(J.conj().T @ J - np.eye(H)))
    N = null_space(J.conj().T) if J.shape[0] > H else np.zeros((J.shape[0], 0))
    Q = np.hstack([J, N])
    ops = [Q.conj().T @ (vec @ np.kron(L, np.eye(H)) @ W) @ Q for L in _left_mult(X)]
    rep = Representation(X, Q.shape[1], tuple(ops))
    return ModuleTensor(rep, H, Q.shape[1] - H, Q.conj().T @ vec, W @ Q, iso)


# -- towers ----------------------------------------------------------------

@dataclass
class TowerReport:
    mode: str
    depth: int
    tolerance: float
    summand_dims: list[tuple[str, int]]
    residuals: dict[str, float]
    verified_subspace: str
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v >= 0 and v <= self.tolerance for v in self.residuals.values())

    @property
    def total_dim(self) -> int:
        return sum(d for _, d in self.summand_dims)

    def to_json(self):
        return {
            "mode": self.mode,
            "depth": self.depth,
            "tolerance": self.tolerance,
            "summand_dims": [[n, d] for n, d in self.summand_dims],
            "residuals": {k: float(f"{v:.3e}") for k, v in sorted(self.residuals.items())},
            "verified_subspace": self.verified_subspace,
            "notes": list(self.notes),
            "pass": self.passed,
        }


@dataclass(frozen=True, eq=False)
class Tower:
    pi_At: Representation
    pi_Bt: Representation
    U: sp.csr_matrix
    report: TowerReport


def _block_diag_rep(algebra: FdAlgebra, reps: list[Representation], pad: int) -> Representation:
    imgs = []
    for p in range(algebra.dim):
        blocks = [r.images[p] for r in reps]
        if pad:
            blocks.append(sp.csr_matrix((pad, pad), dtype=complex))
        imgs.append(sp.block_diag(blocks, format="csr"))
    return Representation(algebra, sum(r.dim for r in reps) + pad, tuple(imgs))


def _permutation(x_names: list[tuple[str, int]], y_names: list[tuple[str, int]]) -> sp.csr_matrix:
    """Unitary sending each named summand of X identically onto the same summand of Y."""
    def offsets(names):
        out, acc = {}, 0
        for n, d in names:
            out[n] = (acc, d)
            acc += d
        return out, acc
    ox, dim = offsets(x_names)
    oy, dim_y = offsets(y_names)
    assert dim == dim_y and set(ox) == set(oy)
    rows, cols = [], []
    for n, (sx, d) in ox.items():
        sy = oy[n][0]
        rows.extend(range(sy, sy + d))
        cols.extend(range(sx, sx + d))
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(dim, dim), dtype=complex)


def _grow(layer0_A: Representation, layer0_B: Representation, kA0: int, kB0: int,
          into_At: Inclusion, into_Bt: Inclusion, depth: int, tol: float):
    """Alternating extensions of the compressed actions of the common subalgebra."""
    sig_A, sig_B = [layer0_A], [layer0_B]
    kA, kB = [kA0], [kB0]
    rep_res = iso = 0.0
    for n in range(1, depth + 1):
        prevA, prevB = sig_A[-1], sig_B[-1]
        onA = prevA.restrict(into_At).compress(prevA.dim - kA[-1], prevA.dim)
        onB = prevB.restrict(into_Bt).compress(prevB.dim - kB[-1], prevB.dim)
        extB = extend_representation(onA, into_Bt, tol=tol)
        extA = extend_representation(onB, into_At, tol=tol)
        rep_res = max(rep_res, extA.residual, extB.residual)
        iso = max(iso, extA.isometry_residual, extB.isometry_residual)
        sig_B.append(extB.rep)
        sig_A.append(extA.rep)
        kB.append(extB.dim_K)
        kA.append(extA.dim_K)
    return sig_A, sig_B, kA, kB, rep_res, iso


def _assemble(mode: str, base: list[tuple[str, int]], sig_A, sig_B, kA, kB, At: FdAlgebra, Bt: FdAlgebra,
              depth: int, tol: float):
    N = depth
    x_names = list(base)
    for n in range(N + 1):
        x_names += [(f"K_A,{n}", kA[n]), (f"K_B,{n}", kB[n])]
    y_names = list(base) + [("K_B,0", kB[0])]
    for n in range(1, N + 1):
        y_names += [(f"K_A,{n - 1}", kA[n - 1]), (f"K_B,{n}", kB[n])]
    y_names.append((f"K_A,{N}", kA[N]))
    sigma_At = _block_diag_rep(At, sig_A, kB[N])
    sigma_Bt = _block_diag_rep(Bt, sig_B, kA[N])
    U = _permutation(x_names, y_names)
    Ut = U.getH().tocsr()
    pi_At = sigma_At
    pi_Bt = Representation(Bt, sigma_Bt.dim, tuple(Ut @ X @ U for X in sigma_Bt.images))
    return x_names, U, pi_At, pi_Bt


def _common_checks(report_res: dict, x_names, U, pi_At, pi_Bt, sig_A, sig_B, pi_A, pi_B, setup_lam_A,
                   setup_lam_B, into_At, into_Bt, common: FdAlgebra):
    dim = pi_At.dim
    I = sp.identity(dim, format="csr", dtype=complex)
    report_res["unitary_U"] = max(_fro(U.getH() @ U - I), _fro(U @ U.getH() - I))
    H = pi_A.dim
    inv = comp = 0.0
    for lam, rep, pi in ((setup_lam_A, pi_At, pi_A), (setup_lam_B, pi_Bt, pi_B)):
        for q in range(pi.algebra.dim):
            X = rep.of_coords(lam.float_matrix[:, q])
            inv = max(inv, _fro(X[H:, :H]))
            comp = max(comp, _fro(X[:H, :H] - pi.images[q]))
    report_res["H_invariance"] = inv
    report_res["H_compressed_action"] = comp
    interior = dim - x_names[-1][1] - x_names[-2][1]
    agree = 0.0
    for q in range(common.dim):
        Xa = pi_At.of_coords(into_At.float_matrix[:, q])
        Xb = pi_Bt.of_coords(into_Bt.float_matrix[:, q])
        agree = max(agree, _fro((Xa - Xb)[:interior, :interior]))
    report_res["agreement_interior"] = agree
    star = 0.0
    for r in list(sig_A) + list(sig_B):
        star = max(star, max(r.residuals().values()))
    report_res["star_hom"] = star
    return interior


def _agree_on(pi_A: Representation, pi_B: Representation, incl_A: Inclusion, incl_B: Inclusion, tol: float):
    ra, rb = pi_A.restrict(incl_A), pi_B.restrict(incl_B)
    if ra.dim != rb.dim:
        raise DAgreementFailure("representations act on spaces of different dimension")
    worst = max((_fro(x - y) for x, y in zip(ra.images, rb.images)), default=0.0)
    if worst > tol:
        raise DAgreementFailure(f"representations differ on the common subalgebra by {worst:.3g}")


_STATE_NOTE = "state extension: phi o E with E the trace-preserving conditional expectation"


def build_tower_equal_D(setup: AmalgamSetup, pi_A: Representation, pi_B: Representation, depth: int,
                        tol: float = CONSTRUCTION_TOL) -> Tower:
    """Tower for ``At > A > D < B < Bt`` (the amalgamated algebra is not enlarged).

    ``setup`` must carry ``lam_A`` and ``lam_B``; if ``lam_D`` is present it
    must be onto.
    """
    if setup.lam_A is None or setup.lam_B is None:
        raise DimensionMismatch("equal-D towers need lam_A and lam_B")
    if setup.lam_D is not None and setup.Dt.dim != setup.D.dim:
        raise DimensionMismatch("equal-D towers need Dt = D")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    _agree_on(pi_A, pi_B, setup.incl_A, setup.incl_B, tol)
    into_At = setup.lam_A.compose(setup.incl_A)
    into_Bt = setup.lam_B.compose(setup.incl_B)
    ext_A = extend_representation(pi_A, setup.lam_A, tol=tol)
    ext_B = extend_representation(pi_B, setup.lam_B, tol=tol)
    sig_A, sig_B, kA, kB, rep_res, iso = _grow(ext_A.rep, ext_B.rep, ext_A.dim_K, ext_B.dim_K,
                                               into_At, into_Bt, depth, tol)
    base = [("H", pi_A.dim)]
    x_names, U, pi_At, pi_Bt = _assemble("equalD", base, sig_A, sig_B, kA, kB, setup.At, setup.Bt, depth, tol)
    res = {"repextend": max(rep_res, ext_A.residual, ext_B.residual),
           "piece_isometry": max(iso, ext_A.isometry_residual, ext_B.isometry_residual)}
    _common_checks(res, x_names, U, pi_At, pi_Bt, sig_A, sig_B, pi_A, pi_B, setup.lam_A, setup.lam_B,
                   into_At, into_Bt, setup.D)
    report = TowerReport("equalD", depth, tol, x_names, res,
                         f"agreement on D checked on all summands except K_A,{depth} and K_B,{depth}",
                         [_STATE_NOTE, "the final K blocks carry the zero representation of the other side"])
    return Tower(pi_At, pi_Bt, U, report)


def _embed_module(MD: ModuleTensor, MX: ModuleTensor, phi: Inclusion):
    """Canonical isometry ``L^2(Dt, E_D) (x) H -> L^2(X, E_X) (x) H`` induced by ``phi: Dt -> X``."""
    H = MD.dim_H
    lift = np.kron(phi.float_matrix, np.eye(H))
    J = MX.span_to_basis @ lift @ MD.basis_in_span
    iso = float(np.linalg.norm(J.conj().T @ J - np.eye(J.shape[1])))
    N = null_space(J.conj().T) if J.shape[0] > J.shape[1] else np.zeros((J.shape[0], 0))
    Q = np.hstack([J, N])
    ops = tuple(Q.conj().T @ X.toarray() @ Q for X in MX.rep.images)
    return Representation(MX.rep.algebra, Q.shape[1], ops), N.shape[1], iso


def build_tower_condexp(setup: AmalgamSetup, pi_A: Representation, pi_B: Representation, depth: int,
                        E_A: CondExp | None = None, E_B: CondExp | None = None, E_D: CondExp | None = None,
                        tol: float = CONSTRUCTION_TOL) -> Tower:
    """Tower for a full commuting diagram with compatible conditional expectations.

    Expectations default to the trace-preserving ones for the default traces
    of ``At``, ``Bt`` and ``Dt``.  The diagram, including the expectation
    squares, is validated first; failure raises :class:`DiagramFailure`.
    """
    if not setup.has_upper_row:
        raise DiagramFailure("conditional-expectation towers need both rows of the diagram")
    E_A = E_A or condexp_trace_preserving(setup.lam_A)
    E_B = E_B or condexp_trace_preserving(setup.lam_B)
    E_D = E_D or condexp_trace_preserving(setup.lam_D)
    report = validate_diagram(setup, E_A, E_B, E_D)
    if not report.ok:
        raise DiagramFailure("; ".join(report.failures))
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    _agree_on(pi_A, pi_B, setup.incl_A, setup.incl_B, tol)
    pi_D = pi_A.restrict(setup.incl_A)
    MD = module_tensor(E_D, pi_D)
    MA = module_tensor(E_A, pi_A)
    MB = module_tensor(E_B, pi_B)
    sig_A0, kA0, isoA = _embed_module(MD, MA, setup.phi_At)
    sig_B0, kB0, isoB = _embed_module(MD, MB, setup.phi_Bt)
    nD = MD.rep.dim
    res = {"module_isometry": max(isoA, isoB, MD.isometry_residual, MA.isometry_residual, MB.isometry_residual)}
    # sigma_A0 and sigma_B0 restricted to Dt must reduce H + K_D and act there as sigma_D
    layer0 = 0.0
    for q in range(setup.Dt.dim):
        sd = MD.rep.images[q]
        for sig, phi in ((sig_A0, setup.phi_At), (sig_B0, setup.phi_Bt)):
            X = sig.of_coords(phi.float_matrix[:, q])
            layer0 = max(layer0, _fro(X[:nD, :nD] - sd), _fro(X[nD:, :nD]))
    res["layer0_Dt_agreement"] = layer0
    sig_A, sig_B, kA, kB, rep_res, iso = _grow(sig_A0, sig_B0, kA0, kB0, setup.phi_At, setup.phi_Bt, depth, tol)
    res["repextend"] = rep_res
    res["piece_isometry"] = iso
    base = [("H", pi_A.dim), ("K_D", nD - pi_A.dim)]
    x_names, U, pi_At, pi_Bt = _assemble("condexp", base, sig_A, sig_B, kA, kB, setup.At, setup.Bt, depth, tol)
    _common_checks(res, x_names, U, pi_At, pi_Bt, sig_A, sig_B, pi_A, pi_B, setup.lam_A, setup.lam_B,
                   setup.phi_At, setup.phi_Bt, setup.Dt)
    rep = TowerReport("condexp", depth, tol, x_names, res,
                      f"agreement on Dt checked on all summands except K_A,{depth} and K_B,{depth}",
                      [_STATE_NOTE, "layer 0 built from interior tensor products with E_D, E_A, E_B",
                       "the final K blocks carry the zero representation of the other side"])
    return Tower(pi_At, pi_Bt, U, rep)


# -- bridging the RFD witness ------------------------------------------------

def _range_basis(P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the range of a projection, Gram-Schmidt over its columns in order."""
    vecs = []
    for c in range(P.shape[1]):
        v = P[:, c].astype(complex)
        for u in vecs:
            v = v - u * np.vdot(u, v)
        nv = np.linalg.norm(v)
        if nv > tol:
            vecs.append(v / nv)
    return np.column_stack(vecs) if vecs else np.zeros((P.shape[0], 0), dtype=complex)


def _path_basis(rho: Representation) -> tuple[np.ndarray, list[int]]:
    """Unitary whose columns are ordered by (D-block, copy, position)."""
    D = rho.algebra
    cols, mults = [], []
    for j, n in enumerate(D.block_sizes):
        V = _range_basis(rho.image(j, 0, 0).toarray())
        mults.append(V.shape[1])
        for r in range(V.shape[1]):
            for a in range(n):
                cols.append(rho.image(j, a, 0) @ V[:, r])
    return np.column_stack(cols), mults


def _amplify(incl: Inclusion, copies: int) -> Representation:
    base = Representation.from_inclusion(incl)
    return Representation(base.algebra, base.dim * copies,
                          tuple(sp.kron(sp.identity(copies), X, format="csr") for X in base.images))


def common_representation(setup: AmalgamSetup, decision: RfdDecision) -> tuple[int, Representation, Representation]:
    """Representations of ``A`` and ``B`` on ``C^L`` agreeing exactly on ``D``.

    Both witness embeddings are amplified to ``L = lcm(k, l)`` and rewritten
    in a basis adapted to ``D`` (block, copy, position); equal trace vectors
    on ``D`` force equal multiplicities, so the two ``D``-actions coincide.
    """
    w = decision.witness
    if w is None:
        raise ValueError("no witness: the amalgamated free product is not RFD")
    L = math.lcm(w.k, w.l)
    out = []
    mults = []
    for emb, k, incl in ((w.embed_A, w.k, setup.incl_A), (w.embed_B, w.l, setup.incl_B)):
        rep = _amplify(emb, L // k)
        P, m = _path_basis(rep.restrict(incl))
        Pc = sp.csr_matrix(P)
        Ph = Pc.getH().tocsr()
        out.append(Representation(rep.algebra, L, tuple(Ph @ X @ Pc for X in rep.images)))
        mults.append(m)
    if mults[0] != mults[1]:
        raise DAgreementFailure(f"D multiplicities differ: {mults[0]} vs {mults[1]}")
    return L, out[0], out[1]
