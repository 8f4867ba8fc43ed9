import copy
import json
import re
import shlex
from pathlib import Path

import pytest

from cics.cli import CSV_COLUMNS, run
from cics.instances import cics_from_json

ROOT = Path(__file__).resolve().parents[1]
README = (ROOT / "README.md").read_text()


def readme_commands():
    cmds = []
    for block in re.findall(r"```bash\n(.*?)```", README, re.S):
        for line in block.splitlines():
            line = line.split("#")[0].strip()
            if line.startswith("cics "):
                cmds.append(line)
    return cmds


@pytest.fixture(autouse=True)
def at_root(monkeypatch):
    monkeypatch.chdir(ROOT)


def test_readme_has_commands():
    assert len(readme_commands()) >= 10


@pytest.mark.parametrize("cmd", readme_commands())
def test_readme_command_runs(cmd):
    code, out, err = run(shlex.split(cmd)[1:])
    assert code == 0, err
    if "--format csv" in cmd:
        assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
    else:
        json.loads(out)


def test_readme_instance_block_parses():
    block = re.findall(r"```json\n(.*?)```", README, re.S)[0]
    inst = cics_from_json(json.loads(block))
    assert inst.name == "weitzman" and inst.constraint.n == 1


def test_gap_example():
    code, out, _ = run(["gap", "examples/appendix_c_N3.json"])
    assert code == 0
    assert json.loads(out)["com_gap"] == pytest.approx(2.0, abs=1e-9)


def test_bcs_expost_example():
    code, out, _ = run(["bcs", "expost", "examples/bernoulli_n3.json"])
    assert json.loads(out)["value"] == pytest.approx(19 / 27, abs=1e-12)


def test_reproductions_all_ok():
    for argv in (["min-example", "--N", "3"], ["min-example", "--N", "10"],
                 ["bernoulli", "--n", "5"], ["weitzman"], ["md-roundtrip", "--k", "4"]):
        code, out, _ = run(["reproduce", *argv])
        assert code == 0 and json.loads(out)["all_ok"], out


def test_bernoulli_reproduction_values():
    rows = {r["quantity"]: r for r in json.loads(run(["reproduce", "bernoulli", "--n", "5"])[1])["rows"]}
    assert rows["ex_post"]["computed"] == pytest.approx(0.67232, abs=1e-12)
    assert rows["ratio"]["computed"] == pytest.approx(1.48739, abs=1e-5)


def test_malformed_probability_points_at_action(tmp_path):
    doc = {"constraint": {"kind": "single"}, "mdps": [{"root": "s0", "states": {
        "s0": {"actions": [{"cost": 1.0, "transitions": [{"to": "t", "p": 0.7}]}]},
        "t": {"terminal": True, "value": 1.0}}}]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, out, err = run(["validate", str(path)])
    assert code == 2 and out == ""
    assert json.loads(err)["pointer"] == "/mdps/0/states/s0/actions/0"


def test_input_errors_exit_2(tmp_path):
    good = json.loads((ROOT / "examples/weitzman.json").read_text())
    cases = {"missing.json": None, "notjson.json": "{oops"}
    bad_constraint = copy.deepcopy(good)
    bad_constraint["constraint"] = {"kind": "nope"}
    cases["constraint.json"] = json.dumps(bad_constraint)
    for name, text in cases.items():
        path = tmp_path / name
        if text is not None:
            path.write_text(text)
        code, _, err = run(["optimal", str(path)])
        assert code == 2, name
        assert "error" in json.loads(err)
    code, _, _ = run(["pipeline", "examples/weitzman.json", "--trials", "0"])
    assert code == 2


def test_guard_exit_1(tmp_path):
    states = {"r": {"actions": [{"cost": 0.0, "transitions": [
        {"to": f"t{v}", "p": 0.1} for v in range(10)]}]}}
    states.update({f"t{v}": {"terminal": True, "value": float(v)} for v in range(10)})
    doc = {"constraint": {"kind": "uniform_matroid", "k": 7},
           "mdps": [{"root": "r", "states": states}] * 7}
    path = tmp_path / "big.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(["pipeline", str(path)])
    assert code == 1 and "exceed" in json.loads(err)["error"]


@pytest.mark.parametrize("argv", [
    ["gap", "examples/appendix_c_N3.json", "--format", "csv"],
    ["pipeline", "examples/weitzman.json", "--monte-carlo", "--trials", "500", "--seed", "3"],
    ["reproduce", "md-roundtrip", "--k", "4", "--seed", "5"],
])
def test_output_is_byte_identical(argv):
    assert run(argv) == run(argv)


def test_out_flag_writes_file(tmp_path):
    target = tmp_path / "o.json"
    code, out, _ = run(["bcs", "exante", "examples/bernoulli_n3.json", "--out", str(target)])
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["value"] == pytest.approx(1.0)


def test_timing_fills_runtime_column():
    out = run(["bcs", "expost", "examples/bernoulli_n3.json", "--format", "csv", "--timing"])[1]
    row = out.splitlines()[1].split(",")
    assert float(row[CSV_COLUMNS.index("runtime_ms")]) >= 0
