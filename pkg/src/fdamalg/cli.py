"""Command-line front end.

Exit codes:
    0  result computed (for ``tower``: every residual within tolerance)
    2  invalid input: malformed JSON, unknown names, bad shapes, missing expectation
    3  validation failure: a map is not a *-homomorphism, the diagram does not
       commute, a membership condition fails, or the input representations disagree
    4  tower built but some residual exceeds the tolerance
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

from . import __version__
from .algebra import validate_condexp, validate_diagram
from .dilation import (
    CONSTRUCTION_TOL,
    DAgreementFailure,
    DiagramFailure,
    NotAState,
    NotUnitalRep,
    build_tower_condexp,
    build_tower_equal_D,
    common_representation,
)
from .document import Document, InvalidDocument, ValidationFailure
from .noninj import (
    CertInput,
    MembershipFailure,
    MissingExpectation,
    WrongDShape,
    check_commutant_variant,
    check_cor_scalarD,
    check_prop_noninj,
    econd_value,
)
from .rfd import InvalidInclusion, rfd_decide

EXIT_OK, EXIT_INVALID, EXIT_VALIDATION, EXIT_RESIDUAL = 0, 2, 3, 4

VARIANTS = {
    "econd": econd_value,
    "prop": check_prop_noninj,
    "cor": check_cor_scalarD,
    "commutant": check_commutant_variant,
}


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _param(args, doc: Document, name: str, default):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return doc.parameters.get(name, default)


def cmd_rfd(doc: Document, args) -> tuple[dict, int]:
    try:
        decision = rfd_decide(doc.setup())
    except InvalidInclusion as exc:
        raise CommandError(EXIT_VALIDATION, str(exc)) from exc
    return decision.to_json(), EXIT_OK


def cmd_cert(doc: Document, args) -> tuple[dict, int]:
    variant = _param(args, doc, "variant", "econd")
    if variant not in VARIANTS:
        raise InvalidDocument(f"unknown certificate variant {variant!r}")
    setup = doc.setup(upper=True)
    for name in ("a", "b", "dt"):
        if doc.element(name) is None:
            raise InvalidDocument(f"missing element {name}")
    inp = CertInput(setup, doc.element("a"), doc.element("b"), doc.element("dt"),
                    doc.expectation("E_A_D"), doc.expectation("E_B_D"), doc.element("a1"), doc.element("a2"))
    try:
        verdict = VARIANTS[variant](inp)
    except (MissingExpectation, WrongDShape) as exc:
        raise CommandError(EXIT_INVALID, str(exc)) from exc
    except MembershipFailure as exc:
        raise CommandError(EXIT_VALIDATION, str(exc)) from exc
    return {"variant": variant, **verdict.to_json()}, EXIT_OK


def cmd_tower(doc: Document, args) -> tuple[dict, int]:
    mode = _param(args, doc, "mode", "equalD")
    depth = _param(args, doc, "depth", 2)
    tol = float(_param(args, doc, "tol", CONSTRUCTION_TOL))
    if mode not in ("equalD", "condexp"):
        raise InvalidDocument(f"unknown tower mode {mode!r}")
    if not isinstance(depth, int) or isinstance(depth, bool) or depth < 0:
        raise InvalidDocument("depth must be a nonnegative integer")
    setup = doc.setup(upper=True, equal_D=(mode == "equalD"))
    extra = {}
    reps = doc.representations()
    try:
        if reps == "witness":
            decision = rfd_decide(setup.lower())
            if not decision.verdict:
                raise CommandError(EXIT_VALIDATION, "no common finite-dimensional representation: not RFD")
            L, pi_A, pi_B = common_representation(setup, decision)
            extra["witness"] = {**decision.witness.to_json(), "L": L}
        else:
            pi_A, pi_B = reps
        if mode == "equalD":
            tower = build_tower_equal_D(setup, pi_A, pi_B, depth, tol=tol)
        else:
            tower = build_tower_condexp(setup, pi_A, pi_B, depth, doc.expectation("E_A"), doc.expectation("E_B"),
                                        doc.expectation("E_D"), tol=tol)
    except (DiagramFailure, DAgreementFailure) as exc:
        raise CommandError(EXIT_VALIDATION, str(exc)) from exc
    except (NotAState, NotUnitalRep) as exc:
        raise CommandError(EXIT_INVALID, str(exc)) from exc
    report = {**tower.report.to_json(), **extra}
    return report, EXIT_OK if tower.report.passed else EXIT_RESIDUAL


def cmd_validate(doc: Document, args) -> tuple[dict, int]:
    out = {"inclusions": doc.validate_inclusions()}
    ok = not any(out["inclusions"].values())
    if ok and {"incl_A", "incl_B", "lam_A", "lam_B", "lam_D", "phi_At", "phi_Bt"} <= set(doc.inclusions):
        setup = doc.setup(upper=True)
        E = {n: doc.expectation(n) for n in ("E_A", "E_B", "E_D")}
        given = {n: e for n, e in E.items() if e is not None}
        out["expectations"] = {n: list(validate_condexp(e).failures) for n, e in sorted(given.items())}
        out["diagram"] = diag_failures = list(validate_diagram(setup, E["E_A"], E["E_B"], E["E_D"]).failures)
        ok = not diag_failures and not any(out["expectations"].values())
    out["ok"] = ok
    return out, EXIT_OK if ok else EXIT_VALIDATION


COMMANDS = {"rfd": cmd_rfd, "cert": cmd_cert, "tower": cmd_tower, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdamalg", description="Finite-dimensional amalgamated free product toolkit.",
                                epilog="Exit codes: 0 ok, 2 invalid input, 3 validation failure, 4 tower residual failure.")
    p.add_argument("--version", action="version", version=f"fdamalg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", help="input document (default: stdin)")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    sub.add_parser("rfd", parents=[common], help="decide residual finite dimensionality of A *_D B")
    c = sub.add_parser("cert", parents=[common], help="non-injectivity certificates")
    c.add_argument("--variant", choices=sorted(VARIANTS))
    t = sub.add_parser("tower", parents=[common], help="build and verify a finite dilation tower")
    t.add_argument("--depth", type=int)
    t.add_argument("--tol", type=float)
    t.add_argument("--mode", choices=["equalD", "condexp"])
    sub.add_parser("validate", parents=[common], help="check inclusions, the diagram and expectations")
    return p


def _read_input(path: str | None) -> bytes:
    if path is None:
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def run(argv: list[str] | None = None) -> tuple[dict, int, str | None]:
    """Parse arguments and execute; returns ``(report, exit code, output path)``."""
    args = build_parser().parse_args(argv)
    try:
        data = _read_input(args.input)
    except OSError as exc:
        return _envelope(args.command, b"", {"error": str(exc)}), EXIT_INVALID, args.output
    try:
        doc = Document.loads(data.decode("utf-8"))
        result, code = COMMANDS[args.command](doc, args)
    except CommandError as exc:
        result, code = {"error": str(exc)}, exc.code
    except (InvalidDocument, UnicodeDecodeError) as exc:
        result, code = {"error": str(exc)}, EXIT_INVALID
    except ValidationFailure as exc:
        result, code = {"error": str(exc)}, EXIT_VALIDATION
    except ValueError as exc:
        # remaining library errors are shape or content problems of the input
        result, code = {"error": f"{type(exc).__name__}: {exc}"}, EXIT_INVALID
    return _envelope(args.command, data, result), code, args.output


def _envelope(command: str, data: bytes, result: dict) -> dict:
    return {
        "command": command,
        "tool": {"name": "fdamalg", "version": __version__},
        "input_sha256": hashlib.sha256(data).hexdigest(),
        "result": result,
    }


def main(argv: list[str] | None = None) -> int:
    try:
        report, code, output = run(argv)
    except SystemExit as exc:
        # usage errors count as invalid input
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
