"""When is a free product of matrix algebras over a common subalgebra RFD?

Run:  python demos/rfd_decision.py

Two matrix algebras glued along a common unital subalgebra D have an RFD
amalgamated free product exactly when faithful traces on both sides agree on
D.  That is a small exact linear program, so the decision comes with proof
either way: a trace witness, or a dual certificate that no witness exists.
"""

from fdamalg import AmalgamSetup, canonical_inclusion, make_algebra, matrix_algebra, rfd_decide

C, C2 = make_algebra([1]), make_algebra([1, 1])

# 1. Scalars sit inside everything.  M2 and M3 are glued along their units.
dec = rfd_decide(AmalgamSetup(canonical_inclusion([[2]], C, matrix_algebra(2)),
                              canonical_inclusion([[3]], C, matrix_algebra(3))))
w = dec.witness
print("M2 *_C M3")
print(f"  RFD: {dec.verdict}")
print(f"  traces on minimal projections: s_A = {w.tau_A.s[0]}, s_B = {w.tau_B.s[0]}")
print(f"  both sides fit in M_{w.k} and M_{w.l}; a common representation lives on C^{w.k * w.l}")

# 2. A diagonal pair of projections.  In M2 both have rank 1, in M3 the ranks
#    are 1 and 2.  A trace on M3 cannot give them equal weight, so the traces
#    never match.
dec = rfd_decide(AmalgamSetup(canonical_inclusion([[1, 1]], C2, matrix_algebra(2)),
                              canonical_inclusion([[1, 2]], C2, matrix_algebra(3))))
print("\nM2 *_{C^2} M3 with multiplicities [1,1] and [1,2]")
print(f"  RFD: {dec.verdict}")
print(f"  trace-matching system rows: {[[str(v) for v in r] for r in dec.system]}")
print(f"  certificate y = {[str(v) for v in dec.certificate.y]}")
M, y = [list(r) for r in dec.system], dec.certificate.y
print(f"  M^T y = {[str(sum(M[i][j] * y[i] for i in range(len(y)))) for j in range(len(M[0]))]}"
      "  (nonnegative and nonzero, so no positive solution)")
print(f"  verified exactly: {dec.certificate.verify(dec.system)}")

# 3. When every block of B holds each projection once, equal weights work.
dec = rfd_decide(AmalgamSetup(canonical_inclusion([[1, 1]], C2, matrix_algebra(2)),
                              canonical_inclusion([[1, 1], [1, 1]], C2, make_algebra([2, 2]))))
print("\nM2 *_{C^2} (M2 + M2)")
print(f"  RFD: {dec.verdict}, s_B = {[str(v) for v in dec.witness.tau_B.s]}")
