import io
import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema

from qccs.cli import run

CORPUS = resources.files("qccs") / "corpus"
BELL = str(CORPUS / "bell.qccs")
LAWS = str(CORPUS / "laws.qccs")


def schema(name):
    return json.loads((resources.files("qccs") / "schemas" / name).read_text())


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def test_parse_empty_file(tmp_path):
    f = tmp_path / "empty.qccs"
    f.write_text("")
    assert call("parse", str(f)) == (0, "ok\n", "")


def test_parse_verbose_lists_processes():
    code, out, _ = call("parse", BELL, "-v")
    assert code == 0
    assert out.splitlines()[0] == "ok"
    assert "proc R = (c?y.CNOT[y, z].nil || c!x.nil)\\{c}" in out


def test_parse_error_has_position(tmp_path):
    f = tmp_path / "bad.qccs"
    f.write_text("chan c;\nproc P = c!x.nil;\n")
    code, out, err = call("parse", str(f))
    assert code == 1 and out == ""
    assert err.startswith(f"{f}:2:")


def test_missing_file():
    code, _, err = call("parse", "/nonexistent/file.qccs")
    assert code == 66 and "nonexistent" in err


def test_unknown_flag():
    code, _, err = call("parse", BELL, "--frobnicate")
    assert code == 64 and "unrecognized" in err


def test_no_subcommand():
    assert call()[0] == 64


def test_unknown_process_is_usage_error():
    code, _, err = call("nf", LAWS, "--proc", "Nope")
    assert code == 64 and "unknown process" in err


def test_steps_bell_pair():
    code, out, _ = call("steps", BELL, "--proc", "R", "--state", "sigma")
    assert code == 0
    lines = out.splitlines()
    assert [ln.split(" :: ")[0] for ln in lines] == ["tau", "CNOT[x,z]"]
    assert lines[1].split(" :: ")[1] == "(nil || nil)\\{c}"
    assert all(len(ln.split(" :: ")[2]) == 12 for ln in lines)


def test_steps_final_state_is_bell():
    code, out, _ = call("steps", BELL, "--proc", "R", "--state", "sigma", "--show-states")
    assert code == 0
    names, matrix = out.splitlines()[-1].strip().split(" = ")
    assert names.split() == ["#qubit_0", "x", "z"]
    # |0> on the fresh qubit, beta00 on (x, z)
    m = json.loads(matrix)
    want = [[0.0] * 8 for _ in range(8)]
    for i in (0, 3):
        for j in (0, 3):
            want[i][j] = 0.5
    assert m == want


def test_steps_truncation_note():
    code, out, _ = call("steps", BELL, "--proc", "R", "--state", "sigma", "--depth", "1")
    assert code == 0
    assert out.splitlines()[-1].startswith("# truncated")


def test_lts_json_validates(tmp_path):
    f = tmp_path / "r.json"
    code, out, _ = call("lts", BELL, "--proc", "S", "--state", "sigma", "--format", "json", "-o", str(f))
    assert code == 0 and out == ""
    d = json.loads(f.read_text())
    jsonschema.validate(d, schema("lts.schema.json"))
    assert [e["action"] for e in d["edges"]] == ["tau", "CNOT[x,z]", "M[z]"]


def test_lts_dot_to_stdout():
    code, out, _ = call("lts", BELL, "--proc", "R", "--state", "sigma")
    assert code == 0
    assert out.startswith("digraph") and out.rstrip().endswith("}")


def test_lts_unwritable_output():
    code, _, _ = call("lts", BELL, "--proc", "R", "--format", "json", "-o", "/nonexistent/dir/out.json")
    assert code == 66


def test_nf():
    code, out, _ = call("nf", LAWS, "--proc", "TT")
    assert code == 0
    assert out.count("[x]") == 1 and out.strip().endswith(".nil")


def test_bisim_plus_nil():
    code, out, _ = call("bisim", LAWS, "--p", "PplusNil", "--q", "P", "--states", "s0")
    assert code == 0
    d = json.loads(out)
    jsonschema.validate(d, schema("verdict.schema.json"))
    assert d["result"] == "bisimilar" and d["suite_size"] == 36


def test_bisim_refuted():
    code, out, _ = call("bisim", LAWS, "--p", "Cx", "--q", "Dx", "--states", "s0")
    assert code == 2
    d = json.loads(out)
    jsonschema.validate(d, schema("verdict.schema.json"))
    assert d["witness"] == [{"side": "left", "action": "c!x"}] and d["state"] == "s0"


def test_bisim_unknown(tmp_path):
    f = tmp_path / "loop.qccs"
    f.write_text("chan c; var x : qubit;\nA() = tau.A();\nB() = tau.tau.B();\nproc PA = A(); proc PB = B();\n")
    code, out, _ = call("bisim", str(f), "--p", "PA", "--q", "PB", "--depth", "1", "--random", "1")
    assert code == 3
    d = json.loads(out)
    jsonschema.validate(d, schema("verdict.schema.json"))
    assert d["result"] == "unknown" and d["bounds_hit"]


def test_rbisim():
    code, out, _ = call("rbisim", LAWS, "--p", "TT", "--q", "S1", "--states", "s0,s1", "--random", "2")
    assert code == 0 and json.loads(out)["suite_size"] == 5
    assert call("bisim", LAWS, "--p", "TT", "--q", "S1", "--random", "2")[0] == 2


def test_unknown_state():
    code, _, err = call("bisim", LAWS, "--p", "P", "--q", "P", "--states", "nope")
    assert code == 64 and "unknown state" in err


def test_distance_diamond():
    code, out, _ = call("distance", LAWS, "--kind", "diamond", "--e", "S", "--f", "I1")
    assert code == 0
    d = json.loads(out)
    jsonschema.validate(d, schema("diamond.schema.json"))
    assert abs(d["lower_bound"] - 1 / math.sqrt(2)) < 1e-3


def test_distance_diamond_needs_operations():
    assert call("distance", LAWS, "--kind", "diamond", "--e", "S")[0] == 64
    assert call("distance", LAWS, "--kind", "diamond", "--e", "S", "--f", "Nope")[0] == 64


def test_distance_sb_and_srb():
    code, out, _ = call("distance", LAWS, "--kind", "sb", "--p", "Cx", "--q", "Dx", "--random", "1")
    assert code == 0
    d = json.loads(out)
    jsonschema.validate(d, schema("interval.schema.json"))
    assert d["interval"] == [1.0, "inf"] and d["kind"] == "sb"
    code, out, _ = call("distance", LAWS, "--kind", "srb", "--p", "HH", "--q", "Id", "--random", "1")
    d = json.loads(out)
    jsonschema.validate(d, schema("interval.schema.json"))
    assert d["interval"] == [0.0, 0.0] and d["upper_bound"] and d["kind"] == "srb"


def test_semantics_error_exit(tmp_path):
    f = tmp_path / "unguarded.qccs"
    f.write_text("chan c; var x : qubit;\nA() = A() + tau.nil;\nproc P = A();\n")
    code, _, err = call("steps", str(f), "--proc", "P")
    assert code == 70 and "unguarded recursion" in err


def test_seed_determinism(monkeypatch):
    args = ("distance", LAWS, "--kind", "sb", "--p", "HH", "--q", "Id", "--random", "2")
    a = call(*args, "--seed", "5")
    b = call(*args, "--seed", "5")
    assert a == b
    monkeypatch.setenv("QCCS_SEED", "5")
    assert call(*args) == a


def test_bad_seed_env(monkeypatch):
    monkeypatch.setenv("QCCS_SEED", "abc")
    assert call("bisim", LAWS, "--p", "P", "--q", "P")[0] == 64


def test_selftest_quick():
    code, out, _ = call("selftest", "--quick")
    assert code == 0
    lines = out.splitlines()
    assert lines and all(ln.startswith("PASS ") for ln in lines)
    assert "PASS bell pair" in lines


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "qccs.cli", "parse", BELL], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout == "ok\n"
