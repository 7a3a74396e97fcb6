import copy
import hashlib
import json
import subprocess
import sys

import pytest

from fdamalg import __version__
from fdamalg.cli import main
from helpers import FIXTURES


def invoke(doc, *args, tmp_path, capsys):
    path = tmp_path / "in.json"
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    code = main([args[0], "--input", str(path), *args[1:]])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


@pytest.fixture
def run(tmp_path, capsys):
    return lambda doc, *args: invoke(doc, *args, tmp_path=tmp_path, capsys=capsys)


def test_rfd_positive(run, fixture_doc):
    code, rep = run(fixture_doc("rfd_m2_m3"), "rfd")
    assert code == 0
    w = rep["result"]["witness"]
    assert rep["result"]["rfd"] is True and (w["s_A"], w["s_B"], w["k"], w["l"]) == (["1/2"], ["1/3"], 2, 3)


def test_rfd_negative(run, fixture_doc):
    code, rep = run(fixture_doc("rfd_infeasible"), "rfd")
    assert code == 0 and rep["result"]["rfd"] is False
    assert rep["result"]["certificate"]["y"]


def test_envelope(run, fixture_doc):
    doc = fixture_doc("rfd_m2_m3")
    text = json.dumps(doc)
    code, rep = run(text, "rfd")
    assert rep["tool"] == {"name": "fdamalg", "version": __version__}
    assert rep["input_sha256"] == hashlib.sha256(text.encode()).hexdigest()
    assert rep["command"] == "rfd"


@pytest.mark.parametrize("name,cmd,args", [
    ("rfd_m2_m3", "rfd", ()),
    ("cert_noninj", "cert", ()),
    ("tower_collapse", "tower", ()),
])
def test_deterministic(tmp_path, name, cmd, args):
    outs = []
    for n in range(2):
        out = tmp_path / f"out{n}.json"
        assert main([cmd, "-i", str(FIXTURES / f"{name}.json"), "-o", str(out), *args]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("variant", ["econd", "prop"])
def test_cert_noninj(run, fixture_doc, variant):
    code, rep = run(fixture_doc("cert_noninj"), "cert", "--variant", variant)
    assert code == 0 and rep["result"]["variant"] == variant


def test_cert_econd_value(run, fixture_doc):
    code, rep = run(fixture_doc("cert_noninj"), "cert")
    assert code == 0 and rep["result"]["value"] == "1"
    assert rep["result"]["conclusion"] == "non-injective"


@pytest.mark.parametrize("name", ["cert_cor", "cert_commutant"])
def test_cert_fixtures(run, fixture_doc, name):
    assert run(fixture_doc(name), "cert")[0] == 0


def test_cert_dt_in_D_is_zero(run, fixture_doc):
    doc = fixture_doc("cert_noninj")
    doc["elements"]["dt"] = {"units": {"0:0:0": 1, "1:0:0": 1}}
    code, rep = run(doc, "cert")
    assert code == 0 and rep["result"]["value"] == "0" and rep["result"]["conclusion"] == "inconclusive"


def test_missing_expectation_is_invalid(run, fixture_doc):
    doc = fixture_doc("cert_noninj")
    del doc["expectations"]
    code, rep = run(doc, "cert")
    assert code == 2 and "error" in rep["result"]


def test_membership_failure(run, fixture_doc):
    doc = fixture_doc("cert_noninj")
    # shrink A to the scalars in At = M2, so a dt = diag(1, -1) leaves A
    doc["algebras"]["A"] = [1]
    doc["inclusions"]["incl_A"] = {"multiplicities": [[1]]}
    doc["inclusions"]["lam_A"] = {"multiplicities": [[2]]}
    doc["elements"]["a"] = {"units": {"0:0:0": 1}}
    code, rep = run(doc, "cert")
    assert code == 3 and "A" in rep["result"]["error"]


@pytest.mark.parametrize("mutate", [
    lambda d: d["inclusions"]["incl_A"].update(multiplicities=[[3]]),
    lambda d: d["inclusions"]["incl_A"].update(multiplicities="two"),
    lambda d: d["algebras"].update(A="M2"),
    lambda d: d["algebras"].update(Q=[1]),
    lambda d: d["inclusions"].pop("incl_B"),
])
def test_malformed_is_invalid(run, fixture_doc, mutate):
    doc = fixture_doc("rfd_m2_m3")
    mutate(doc)
    assert run(doc, "rfd")[0] == 2


def test_not_json(run):
    assert run("{nope", "rfd")[0] == 2


def test_non_injective_map_is_validation_failure(run):
    doc = {"algebras": {"D": [1, 1], "A": [2], "B": [2]},
           "inclusions": {"incl_A": {"images": {"0:0:0": {"units": {"0:0:0": 1}}, "1:0:0": {"units": {}}}},
                          "incl_B": {"multiplicities": [[1, 1]]}}}
    code, rep = run(doc, "rfd")
    assert code == 3


def test_tower_witness(run, fixture_doc):
    code, rep = run(fixture_doc("tower_witness"), "tower")
    assert code == 0
    res = rep["result"]
    assert res["pass"] is True and res["depth"] == 3
    assert all(float(v) <= 1e-8 for v in res["residuals"].values())
    assert "L" in res["witness"]


def test_tower_flags_override(run, fixture_doc):
    code, rep = run(fixture_doc("tower_witness"), "tower", "--depth", "1")
    assert code == 0 and rep["result"]["depth"] == 1


def test_tower_condexp(run, fixture_doc):
    assert run(fixture_doc("tower_condexp"), "tower")[0] == 0


def test_tower_refusal(run, fixture_doc):
    code, rep = run(fixture_doc("tower_condexp_refused"), "tower")
    assert code == 3 and "error" in rep["result"]


def test_tower_residual_failure(run, fixture_doc):
    # an impossible tolerance forces the residual gate to fail
    code, rep = run(fixture_doc("tower_witness"), "tower", "--depth", "1", "--tol", "0")
    if any(float(v) > 0 for v in rep["result"]["residuals"].values()):
        assert code == 4 and rep["result"]["pass"] is False
    else:
        assert code == 0


def test_tower_bad_depth(run, fixture_doc):
    doc = fixture_doc("tower_collapse")
    doc.setdefault("parameters", {})["depth"] = -1
    assert run(doc, "tower")[0] == 2


def test_validate(run, fixture_doc):
    code, rep = run(fixture_doc("tower_condexp"), "validate")
    assert code == 0 and rep["result"]["ok"] is True
    code, rep = run(fixture_doc("tower_condexp_refused"), "validate")
    assert code == 3 and rep["result"]["diagram"]


def test_usage_error():
    assert main(["frobnicate"]) == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "fdamalg", "rfd", "-i", str(FIXTURES / "rfd_m2_m3.json"),
                           "-o", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == ""
    assert json.loads(out.read_text())["result"]["rfd"] is True


def test_stdin(tmp_path):
    data = (FIXTURES / "rfd_infeasible.json").read_bytes()
    proc = subprocess.run([sys.executable, "-m", "fdamalg", "rfd"], input=data, capture_output=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["input_sha256"] == hashlib.sha256(data).hexdigest()
