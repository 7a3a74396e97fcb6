"""A finite certificate that an amalgamated free product map is not injective.

Run:  python demos/noninjectivity.py

Enlarge D = C to Dt = C^2 inside At = Bt = M2 (the diagonal).  Take a = e11,
dt = diag(1, -1), b = e21.  The vector (a dt) (x) b - a (x) (dt b) is zero in
the free product over Dt, yet its D-valued norm in the reduced product over D
is E(b* [...] b) = 1.  A nonzero value means the induced map cannot be
injective.
"""

from pathlib import Path

from fdamalg.document import Document
from fdamalg.noninj import CertInput, check_prop_noninj, econd_value, membership, pair_two_tensor

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "fdamalg" / "fixtures" / "cert_noninj.json"
doc = Document.loads(FIXTURE.read_text())
inp = CertInput(doc.setup(upper=True), doc.element("a"), doc.element("b"), doc.element("dt"),
                doc.expectation("E_A_D"), doc.expectation("E_B_D"))

verdict = econd_value(inp)
print(f"econd value: {verdict.value.blocks[0][0, 0]}  ->  {verdict.conclusion}")

# The same number as the squared norm of a two-tensor, term by term.
s = inp.setup
ad = membership(s.lam_A(inp.a) * s.phi_At(inp.dt), s.lam_A)
db = membership(s.phi_Bt(inp.dt) * s.lam_B(inp.b), s.lam_B)
terms = {
    "<ad(x)b, ad(x)b>": (ad, inp.b, ad, inp.b),
    "<ad(x)b, a(x)db>": (ad, inp.b, inp.a, db),
    "<a(x)db, ad(x)b>": (inp.a, db, ad, inp.b),
    "<a(x)db, a(x)db>": (inp.a, db, inp.a, db),
}
total = None
for sign, (name, args) in zip((1, -1, -1, 1), terms.items()):
    val = pair_two_tensor(*args, inp.E_A_D, inp.E_B_D)
    print(f"  {'+' if sign > 0 else '-'} {name} = {val.blocks[0][0, 0]}")
    total = val * sign if total is None else total + val * sign
print(f"  sum = {total.blocks[0][0, 0]}")

# The structural criterion needs D(dt b) and Db to meet trivially.  Here
# dt b = -b, so it stays inconclusive and only the direct value decides.
prop = check_prop_noninj(inp)
print("\nstructural hypotheses:")
for k, v in prop.hypotheses.items():
    print(f"  {k}: {v}")
print(f"conclusion: {prop.conclusion}")
