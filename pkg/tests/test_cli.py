import json
import os
import re
import subprocess
import sys

import pytest

from aidl.cli import main

CORPUS = os.path.join(os.path.dirname(__file__), os.pardir, "corpus")


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def records(out):
    return [json.loads(line) for line in out.splitlines() if line.strip()]


SQUARE_MINUS_CIRCLE = """structure plate : Solid {
    rect sq = Rectangle(origin=(0, 0), width=10, height=10)
    structure bore : Hole { circle c = Circle((5, 5), 2) }
}
"""


def test_check_valid_exits_zero(tmp_path, capsys):
    f = write(tmp_path, "ok.aidl", SQUARE_MINUS_CIRCLE)
    assert main(["check", "--json", f]) == 0
    recs = records(capsys.readouterr().out)
    assert [r["kind"] for r in recs] == ["summary"]
    assert recs[0]["exit_code"] == 0


def test_check_rotate_has_suggestion(tmp_path, capsys):
    f = write(tmp_path, "r.aidl", "structure r : Drawing {\n line l = Line((0,0),(1,0))\n constrain Rotate(l, 30deg)\n}\n")
    assert main(["check", "--json", f]) == 1
    diags = [r for r in records(capsys.readouterr().out) if r["kind"] == "diagnostic"]
    assert len(diags) == 1
    d = diags[0]
    assert d["code"] == "E006" and d["rule"] == "UnknownConstraint" and d["suggestion"] == "Angle"
    for key in ("severity", "message", "file", "line", "col", "end_line", "end_col", "path"):
        assert key in d
    assert d["line"] == 3


def test_unreadable_path_exits_two(tmp_path, capsys):
    assert main(["check", "--json", str(tmp_path / "missing.aidl")]) == 2
    recs = records(capsys.readouterr().out)
    assert recs[0]["code"] == "E020"


def test_inconsistent_exits_three(tmp_path, capsys):
    f = write(tmp_path, "bad.aidl", "structure s : Drawing {\n param x = 0.5\n constrain x == 0\n constrain x == 1\n}\n")
    assert main(["solve", "--json", f]) == 3
    recs = records(capsys.readouterr().out)
    summary = recs[-1]
    assert summary["status"] == "Inconsistent"
    fail = [r for r in recs if r["kind"] == "diagnostic"][0]
    assert fail["code"] == "E030" and fail["path"] == "s" and fail["stage"] == "local:0"
    assert not os.path.exists(str(tmp_path / "bad.solved.json"))


def test_zero_constraints_keeps_init(tmp_path, capsys):
    f = write(tmp_path, "free.aidl", "structure s : Drawing {\n point p = Point(1.25, -3)\n}\n")
    assert main(["solve", f]) == 0
    rec = json.loads((tmp_path / "free.solved.json").read_text())
    assert rec["outcome"]["status"] == "Solved"
    assert rec["model"]["geometry"][0] == {"kind": "point", "name": "p", "x": 1.25, "y": -3.0}


def test_batch_takes_worst_code_and_processes_all(tmp_path, capsys):
    good = write(tmp_path, "good.aidl", SQUARE_MINUS_CIRCLE)
    bad = write(tmp_path, "bad.aidl", "structure s : Drawing {\n constrain Nope()\n}\n")
    missing = str(tmp_path / "nothing.aidl")
    assert main(["solve", "--json", bad, missing, good]) == 2
    summaries = [r for r in records(capsys.readouterr().out) if r["kind"] == "summary"]
    assert [s["exit_code"] for s in summaries] == [1, 2, 0]
    assert (tmp_path / "good.solved.json").exists()


def test_human_mode_matches_json_messages(tmp_path, capsys):
    f = write(tmp_path, "r.aidl", "structure r : Drawing {\n constrain Rotate(r, 1)\n}\n")
    main(["check", f])
    human = capsys.readouterr()
    main(["check", "--json", f])
    recs = records(capsys.readouterr().out)
    for r in recs:
        if r["kind"] == "diagnostic":
            assert r["message"] in human.err


@pytest.mark.parametrize("flag,value", [("--tol-residual", "0"), ("--max-newton", "-2"), ("--chord-tol", "x")])
def test_overrides_must_be_positive(tmp_path, flag, value, capsys):
    f = write(tmp_path, "ok.aidl", SQUARE_MINUS_CIRCLE)
    with pytest.raises(SystemExit) as info:
        main(["solve", flag, value, f])
    assert info.value.code == 2
    assert not (tmp_path / "ok.solved.json").exists()


def test_square_minus_circle_svg_has_one_path_two_subpaths(tmp_path, capsys):
    f = write(tmp_path, "w.aidl", SQUARE_MINUS_CIRCLE)
    assert main(["render", f]) == 0
    svg = (tmp_path / "w.svg").read_text()
    paths = re.findall(r'<path [^>]*d="([^"]*)"', svg)
    assert len(paths) == 1
    assert paths[0].count("M ") == 2 and paths[0].count(" Z") == 2
    assert 'fill-rule="evenodd"' in svg


def test_empty_drawing_svg(tmp_path, capsys):
    f = write(tmp_path, "e.aidl", "structure e : Drawing { }\n")
    assert main(["render", f]) == 0
    svg = (tmp_path / "e.svg").read_text()
    assert "<path" not in svg
    vb = re.search(r'viewBox="([^"]+)"', svg).group(1).split()
    assert all(float(v) == float(v) for v in vb) and float(vb[2]) > 0 and float(vb[3]) > 0


def test_render_from_solved_json_is_identical(tmp_path, capsys):
    f = write(tmp_path, "w.aidl", SQUARE_MINUS_CIRCLE)
    assert main(["render", f, "--out", str(tmp_path / "direct.svg")]) == 0
    assert main(["solve", f]) == 0
    assert main(["render", str(tmp_path / "w.solved.json"), "--out", str(tmp_path / "via.svg")]) == 0
    assert (tmp_path / "direct.svg").read_bytes() == (tmp_path / "via.svg").read_bytes()


def test_repeat_runs_are_byte_identical(tmp_path, capsys):
    f = write(tmp_path, "w.aidl", SQUARE_MINUS_CIRCLE)
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["solve", f, "--out", str(d)]) == 0
        assert main(["render", f, "--out", str(d)]) == 0
        outs.append(((d / "w.solved.json").read_bytes(), (d / "w.svg").read_bytes()))
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    f = write(tmp_path, "ok.aidl", SQUARE_MINUS_CIRCLE)
    proc = subprocess.run([sys.executable, "-m", "aidl", "check", f], capture_output=True, text=True)
    assert proc.returncode == 0 and "check ok" in proc.stdout
