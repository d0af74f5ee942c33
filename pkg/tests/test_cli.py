import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import model_path
from prcause.cli import run

SMT = Path(__file__).parent / "smt"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([*argv, "--no-timing"], out, err)
    return code, (json.loads(out.getvalue()) if out.getvalue() else None), err.getvalue()


def test_check_gpr_two_causes():
    code, doc, _ = call("check-gpr", model_path("two_causes"), "--cause", "c1,c2")
    assert code == 0
    assert doc["verdict"] == "Cause" and doc["certification"] == "ExactMC"
    assert doc["details"]["conditional"] == "5/8"


def test_quality_canonical_suboptimal():
    code, doc, _ = call("quality", model_path("canonical_suboptimal"), "--cause", "s1")
    assert code == 0
    assert doc["precision"] == "3/4" and doc["recall"] == "3/5"
    assert "witness" not in doc


def test_threshold_canonical_suboptimal():
    code, doc, _ = call("threshold", model_path("canonical_suboptimal"), "--measure", "fscore", "--theta", "7/10")
    assert code == 0 and doc == {"verdict": "Exists", "cause": ["s2"]}


def test_check_spr_witness_flag():
    code, doc, _ = call("check-spr", model_path("mixed_witness"), "--cause", "c", "--emit-witness")
    assert code == 0 and doc["verdict"] == "NotCause"
    assert doc["witness"]["decisions"]["before"]["init"] == {"alpha": "1/2", "beta": "1/2"}
    assert doc["margins"] == ["1/2", "5/8"]


def test_other_subcommands():
    assert call("validate", model_path("strict_gap"))[1]["markov_chain"] is False
    assert call("exists-cause", model_path("canonical_suboptimal"))[1]["cause"] == ["s2"]
    assert call("canonical", model_path("canonical_suboptimal"))[1]["cause"] == ["s1"]
    assert call("canonical", model_path("certain_effect"))[1]["verdict"] == "NotExists"
    doc = call("optimize", model_path("two_causes"), "--kind", "gpr", "--measure", "recall")[1]
    assert doc["cause"] == ["c1", "c2"] and doc["value"] == "5/6"
    doc = call("optimize", model_path("canonical_suboptimal"), "--measure", "fscore")[1]
    assert doc["cause"] == ["s2"] and doc["value"] == "3/4"
    doc = call("optimize", model_path("two_causes"), "--measure", "covratio")[1]
    assert doc["cause"] == ["c1"] and doc["value"] == "2"
    doc = call("oracle-compare", model_path("two_causes"), "--cause", "c1,c2")[1]
    assert doc["verdict"] == "Agree"


def test_quality_infinite_ratio_serialised(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"states": [{"id": "init"}, {"id": "c"}, {"id": "eff", "labels": ["effect"]}, {"id": "z"}],
                             "init": "init",
                             "transitions": [{"from": "init", "action": "a", "to": {"c": "1/2", "z": "1/2"}},
                                             {"from": "c", "action": "a", "to": {"eff": "1/2", "z": "1/2"}}]}))
    assert call("quality", str(p), "--cause", "c")[1]["covratio"] == "inf"


def test_smt_backend(tmp_path):
    code, doc, _ = call("check-gpr", model_path("mixed_witness"), "--cause", "c", "--backend", "smt",
                        "--smt-output", str(SMT / "mixed_witness.out"), "--smt-problem", str(tmp_path / "p.smt2"))
    assert code == 0 and doc["certification"] == "ExactSMT" and doc["verdict"] == "NotCause"
    assert (tmp_path / "p.smt2").read_text() == (SMT / "mixed_witness.smt2").read_text()


def test_unknown_exit_code(monkeypatch):
    monkeypatch.delenv("CAUSAL_MDP_SMT_SOLVER", raising=False)
    code, doc, _ = call("check-gpr", model_path("mixed_witness"), "--cause", "c", "--backend", "smt")
    assert code == 2 and doc["verdict"] == "Unknown"


@pytest.mark.parametrize("argv", [
    ["check-spr", model_path("two_causes")],
    ["check-spr", model_path("two_causes"), "--cause", "nope"],
    ["check-spr", model_path("two_causes"), "--cause", "init"],
    ["validate", "/nonexistent.json"],
    ["frobnicate"],
    ["quality", model_path("two_causes"), "--cause", "c2"],
])
def test_input_errors_exit_3(argv):
    code, doc, err = call(*argv)
    assert code == 3 and doc is None and err.startswith("prcause:")


def test_deterministic_output():
    a = call("check-gpr", model_path("strict_gap"), "--cause", "c", "--emit-witness")
    b = call("check-gpr", model_path("strict_gap"), "--cause", "c", "--emit-witness")
    assert a == b


def test_timing_field_and_console_entry():
    out = io.StringIO()
    assert run(["validate", model_path("two_causes")], out, io.StringIO()) == 0
    assert "timing" in json.loads(out.getvalue())
    proc = subprocess.run([sys.executable, "-m", "prcause", "validate", model_path("two_causes"), "--no-timing"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["verdict"] == "Valid"
