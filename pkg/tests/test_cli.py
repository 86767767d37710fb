import os

import pytest

from divstab.cli import EXIT_HOLDS, EXIT_INPUT, EXIT_REFUTED, EXIT_UNDETERMINED, main
from divstab.report import parse_report

from conftest import SYSTEMS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def sysf(name):
    return SYSTEMS / f"{name}.sys"


def test_analyze_spiral(capsys):
    code, out, _ = run(capsys, "analyze", sysf("spiral"), "--alpha", "3", "--samples", "2000")
    assert code == EXIT_HOLDS
    rep = parse_report(out)
    assert rep["case 4 alpha=3"]["overall"] == "Holds"
    assert rep["baseline alpha=3"]["overall"] == "Holds"


def test_analyze_quadratic_undetermined(capsys):
    code, out, _ = run(capsys, "analyze", sysf("quadratic"), "--alpha", "3", "--samples", "2000")
    assert code == EXIT_UNDETERMINED
    assert parse_report(out)["summary"]["holds"] == "none"


def test_instability_file(capsys):
    code, out, _ = run(capsys, "analyze", sysf("saddle"), "--samples", "2000")
    assert code == EXIT_HOLDS


def test_bad_input_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.sys"
    bad.write_text("vars: x1\nf1: 2x1\n")
    code, _, err = run(capsys, "analyze", bad)
    assert code == EXIT_INPUT and "line 2" in err
    with pytest.raises(SystemExit) as e:
        main(["analyze"])
    assert e.value.code == EXIT_INPUT


def test_linear(tmp_path, capsys):
    A = tmp_path / "A.txt"
    A.write_text("-1 0\n0 -1\n")
    I = tmp_path / "I.txt"
    I.write_text("1 0\n0 1\n")
    code, _, _ = run(capsys, "linear", A, "--P", I, "--case", "1")
    assert code == EXIT_HOLDS
    code, out, _ = run(capsys, "linear", A, "--P", I, "--case", "2", "--alpha", "1")
    assert code == EXIT_REFUTED


def test_bendixson(capsys):
    code, out, _ = run(capsys, "bendixson", sysf("spiral"))
    assert code == 0 and "Excluded(Negative)" in out


def test_control_verify(capsys):
    code, out, _ = run(capsys, "control", sysf("plant_d1"), "verify", "--alpha", "1")
    assert code == EXIT_HOLDS and "alpha > 2/3" in out


def test_simulate_and_plot(tmp_path, capsys):
    csv = tmp_path / "p.csv"
    code, out, _ = run(capsys, "simulate", sysf("spiral"), "--x0", "1,0,0", "--T", "20", "--csv", csv)
    assert code == 0 and "Periodic" in out
    svgs = []
    for k in range(2):
        svg = tmp_path / f"p{k}.svg"
        assert run(capsys, "plot", csv, "--out", svg)[0] == 0
        svgs.append(svg.read_bytes())
    assert svgs[0] == svgs[1]


def test_seed_precedence(capsys, monkeypatch):
    monkeypatch.setenv("SEED", "7")
    _, out, _ = run(capsys, "analyze", sysf("spiral"), "--alpha", "3", "--samples", "100")
    assert parse_report(out)["settings"]["seed"] == "7"
    _, out, _ = run(capsys, "analyze", sysf("spiral"), "--alpha", "3", "--samples", "100", "--seed", "3")
    assert parse_report(out)["settings"]["seed"] == "3"


def test_output_file(tmp_path, capsys):
    dest = tmp_path / "r.txt"
    run(capsys, "-o", dest, "analyze", sysf("spiral"), "--alpha", "3", "--samples", "100")
    assert dest.read_text().startswith("[divstab]")
