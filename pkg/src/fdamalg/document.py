"""One JSON document format for every command.

Layout (every section optional; commands pick what they need)::

    {
      "algebras":    {"D": [1], "A": [2], "B": [3], "Dt": [...], "At": [...], "Bt": [...]},
      "inclusions":  {"incl_A": {"multiplicities": [[2]]},
                      "lam_A":  {"images": {"0:0:0": {"blocks": [...]}, ...}}, ...},
      "elements":    {"a": ..., "b": ..., "dt": ..., "a1": ..., "a2": ...},
      "expectations": {"E_A_D": "trace_preserving" | {"trace": ["1/2", ...]} | {"matrix": [[...]]}, ...},
      "representations": "witness" | {"pi_A": {"dim": 2, "images": {"0:0:0": [[1, 0], [0, 0]], ...}}, "pi_B": ...},
      "parameters":  {"depth": 3, "tol": 1e-8, "mode": "equalD", "variant": "econd"}
    }

Elements are ``{"blocks": [...]}`` or the sparse ``{"units": {"k:i:j": value}}``.
Exact scalars are integers, rational strings or ``{"re", "im"}`` pairs.
"""

from __future__ import annotations

import json
from fractions import Fraction
from dataclasses import dataclass
from typing import Any

import numpy as np

from .algebra import (
    AmalgamSetup,
    CondExp,
    Element,
    FdAlgebra,
    Inclusion,
    canonical_inclusion,
    condexp_trace_preserving,
    identity_inclusion,
    make_algebra,
    make_trace,
    validate_star_hom,
)
from .dilation import Representation
from .linalg import RatMatrix, as_gauss

ROLES = ("D", "A", "B", "Dt", "At", "Bt")
# inclusion name -> (source role, target role)
INCLUSIONS = {
    "incl_A": ("D", "A"),
    "incl_B": ("D", "B"),
    "lam_A": ("A", "At"),
    "lam_B": ("B", "Bt"),
    "lam_D": ("D", "Dt"),
    "phi_At": ("Dt", "At"),
    "phi_Bt": ("Dt", "Bt"),
}
ELEMENTS = {"a": "A", "b": "B", "dt": "Dt", "a1": "A", "a2": "A"}
# expectation name -> inclusion it projects through
EXPECTATIONS = {"E_A_D": "incl_A", "E_B_D": "incl_B", "E_A": "lam_A", "E_B": "lam_B", "E_D": "lam_D"}


class InvalidDocument(ValueError):
    """Malformed or incomplete input (exit code 2)."""


class ValidationFailure(ValueError):
    """Well-formed input whose maps fail the required identities (exit code 3)."""


def _algebra(name: str, data) -> FdAlgebra:
    if isinstance(data, dict):
        data = data.get("blocks")
    if not isinstance(data, list):
        raise InvalidDocument(f"algebra {name}: expected a list of block sizes")
    try:
        return make_algebra(data)
    except (ValueError, TypeError) as exc:
        raise InvalidDocument(f"algebra {name}: {exc}") from exc


def parse_element(alg: FdAlgebra, data, what: str = "element") -> Element:
    try:
        if isinstance(data, dict) and "units" in data:
            x = alg.zero()
            for key, val in data["units"].items():
                k, i, j = (int(p) for p in key.split(":"))
                x = x + alg.matrix_unit(k, i, j) * as_gauss(val)
            return x
        if isinstance(data, dict) and "blocks" in data:
            return Element.from_json(alg, data)
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        raise InvalidDocument(f"{what}: {exc}") from exc
    raise InvalidDocument(f"{what}: expected {{'blocks': ...}} or {{'units': ...}}")


@dataclass
class Document:
    raw: dict
    algebras: dict[str, FdAlgebra]
    inclusions: dict[str, Inclusion]
    elements: dict[str, Element]

    # -- construction ------------------------------------------------------
    @classmethod
    def loads(cls, text: str) -> "Document":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidDocument(f"not JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: Any) -> "Document":
        if not isinstance(raw, dict):
            raise InvalidDocument("document must be a JSON object")
        algs = {}
        for name, data in (raw.get("algebras") or {}).items():
            if name not in ROLES:
                raise InvalidDocument(f"unknown algebra role {name!r}")
            algs[name] = _algebra(name, data)
        incs = {}
        for name, data in (raw.get("inclusions") or {}).items():
            if name not in INCLUSIONS:
                raise InvalidDocument(f"unknown inclusion {name!r}")
            src, tgt = INCLUSIONS[name]
            if src not in algs or tgt not in algs:
                raise InvalidDocument(f"inclusion {name} needs algebras {src} and {tgt}")
            incs[name] = cls._inclusion(name, data, algs[src], algs[tgt])
        elts = {}
        for name, data in (raw.get("elements") or {}).items():
            if name not in ELEMENTS:
                raise InvalidDocument(f"unknown element {name!r}")
            role = ELEMENTS[name]
            if role not in algs:
                raise InvalidDocument(f"element {name} needs algebra {role}")
            elts[name] = parse_element(algs[role], data, f"element {name}")
        return cls(raw, algs, incs, elts)

    @staticmethod
    def _inclusion(name: str, data, src: FdAlgebra, tgt: FdAlgebra) -> Inclusion:
        if not isinstance(data, dict):
            raise InvalidDocument(f"inclusion {name}: expected an object")
        try:
            if "multiplicities" in data:
                return canonical_inclusion(data["multiplicities"], src, tgt)
            if "images" in data:
                imgs = {k: parse_element(tgt, v, f"inclusion {name} image {k}") for k, v in data["images"].items()}
                return Inclusion.from_images(src, tgt, imgs)
            if data.get("identity") is True and src == tgt:
                return identity_inclusion(src)
        except InvalidDocument:
            raise
        except (ValueError, TypeError) as exc:
            raise InvalidDocument(f"inclusion {name}: {exc}") from exc
        raise InvalidDocument(f"inclusion {name}: give 'multiplicities' or 'images'")

    # -- access ------------------------------------------------------------
    @property
    def parameters(self) -> dict:
        return dict(self.raw.get("parameters") or {})

    def inclusion(self, name: str) -> Inclusion:
        if name not in self.inclusions:
            raise InvalidDocument(f"missing inclusion {name}")
        return self.inclusions[name]

    def validate_inclusions(self) -> dict[str, list[str]]:
        # maps out of the zero algebra cannot be unital
        return {name: list(validate_star_hom(incl, unital=not incl.source.is_zero).failures)
                for name, incl in sorted(self.inclusions.items())}

    def require_valid(self):
        bad = {k: v for k, v in self.validate_inclusions().items() if v}
        if bad:
            first = next(iter(bad))
            raise ValidationFailure(f"inclusion {first} is not a unital injective *-homomorphism: {bad[first][0]}")

    def setup(self, *, upper: bool = False, equal_D: bool = False) -> AmalgamSetup:
        """Diagram from the document; ``equal_D`` fills ``Dt = D`` when the upper row is partial."""
        self.require_valid()
        incl_A, incl_B = self.inclusion("incl_A"), self.inclusion("incl_B")
        if not upper:
            return AmalgamSetup(incl_A, incl_B)
        lam_A, lam_B = self.inclusion("lam_A"), self.inclusion("lam_B")
        if equal_D and "lam_D" not in self.inclusions:
            lam_D = identity_inclusion(incl_A.source)
            phi_At, phi_Bt = lam_A.compose(incl_A), lam_B.compose(incl_B)
        else:
            lam_D = self.inclusion("lam_D")
            phi_At, phi_Bt = self.inclusion("phi_At"), self.inclusion("phi_Bt")
        try:
            return AmalgamSetup(incl_A, incl_B, lam_A, lam_B, lam_D, phi_At, phi_Bt)
        except ValueError as exc:
            raise InvalidDocument(str(exc)) from exc

    def element(self, name: str) -> Element | None:
        return self.elements.get(name)

    def expectation(self, name: str) -> CondExp | None:
        spec = (self.raw.get("expectations") or {}).get(name)
        if spec is None:
            return None
        incl = self.inclusion(EXPECTATIONS[name])
        try:
            if spec == "trace_preserving":
                return condexp_trace_preserving(incl)
            if isinstance(spec, dict) and "trace" in spec:
                return condexp_trace_preserving(incl, make_trace(incl.target, spec["trace"]))
            if isinstance(spec, dict) and "matrix" in spec:
                return CondExp(incl.target, incl, RatMatrix.from_json(spec["matrix"]))
        except (ValueError, TypeError) as exc:
            raise InvalidDocument(f"expectation {name}: {exc}") from exc
        raise InvalidDocument(f"expectation {name}: expected 'trace_preserving', a trace or a matrix")

    def representations(self) -> str | tuple[Representation, Representation]:
        """``"witness"`` (the default) or explicit ``(pi_A, pi_B)``."""
        spec = self.raw.get("representations", "witness")
        if spec == "witness":
            return "witness"
        if not isinstance(spec, dict) or "pi_A" not in spec or "pi_B" not in spec:
            raise InvalidDocument("representations: expected 'witness' or pi_A and pi_B")
        return (_representation(self.algebras["A"], spec["pi_A"], "pi_A"),
                _representation(self.algebras["B"], spec["pi_B"], "pi_B"))


def _real(v) -> float:
    return float(Fraction(v)) if isinstance(v, str) else float(v)


def _scalar(v) -> complex:
    if isinstance(v, dict):
        return complex(_real(v.get("re", 0)), _real(v.get("im", 0)))
    return complex(_real(v))


def _representation(alg: FdAlgebra, data, what: str) -> Representation:
    try:
        dim = int(data["dim"])
        imgs = data["images"]
        mats = []
        for (k, i, j) in alg.matrix_units():
            m = imgs[f"{k}:{i}:{j}"]
            mats.append(np.array([[_scalar(v) for v in row] for row in m], dtype=complex))
        return Representation(alg, dim, tuple(mats))
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidDocument(f"representation {what}: {exc}") from exc
