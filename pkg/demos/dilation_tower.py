"""Building a finite dilation tower and checking it numerically.

Run:  python demos/dilation_tower.py [depth]

Start from a common finite-dimensional representation of A and B that agrees
on D (obtained from the RFD witness).  Each step extends the current
representation of A to the larger At by GNS on a state extension, then the
summand-permuting unitary U hands the new space to the B side, and so on.
Every identity the construction promises is re-measured at the end.
"""

import sys
import time
from pathlib import Path

from fdamalg.dilation import build_tower_condexp, build_tower_equal_D, common_representation
from fdamalg.document import Document
from fdamalg.rfd import rfd_decide

FIX = Path(__file__).resolve().parents[1] / "src" / "fdamalg" / "fixtures"
depth = int(sys.argv[1]) if len(sys.argv) > 1 else 3

doc = Document.loads((FIX / "tower_witness.json").read_text())
setup = doc.setup(upper=True, equal_D=True)
print(f"A = {setup.A}, At = {setup.At}; B = {setup.B}, Bt = {setup.Bt}; D = {setup.D}")

L, pi_A, pi_B = common_representation(setup, rfd_decide(setup.lower()))
print(f"common representation of A and B on C^{L}")

t0 = time.perf_counter()
tower = build_tower_equal_D(setup, pi_A, pi_B, depth)
print(f"tower of depth {depth} built in {time.perf_counter() - t0:.2f}s, total dimension {tower.report.total_dim}")
print("summands:", ", ".join(f"{n}:{d}" for n, d in tower.report.summand_dims))
for name, r in sorted(tower.report.residuals.items()):
    print(f"  {name:<22} {r:.2e}")
print(f"all residuals within {tower.report.tolerance:g}: {tower.report.passed}")

# The conditional-expectation variant needs a commuting square of expectations.
# The shipped refusal example breaks it, and the builder says where.
bad = Document.loads((FIX / "tower_condexp_refused.json").read_text())
try:
    pi_A, pi_B = bad.representations()
    build_tower_condexp(bad.setup(upper=True), pi_A, pi_B, 1, bad.expectation("E_A"), bad.expectation("E_B"),
                        bad.expectation("E_D"))
except Exception as exc:  # DiagramFailure
    print(f"\nrefused: {exc}")
