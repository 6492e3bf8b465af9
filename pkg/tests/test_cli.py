import math
import os
from pathlib import Path

import pytest

from jetvar.cli import EXIT_INPUT, EXIT_OK, EXIT_VERDICT, main, run_tasks

ROOT = Path(__file__).resolve().parent.parent
PROBLEMS = sorted((ROOT / "problems").glob("*.jv"))
GOLDEN = ROOT / "tests" / "golden"


def pairs(text):
    out = []
    for line in text.strip().splitlines():
        key, _, value = line.partition("=")
        out.append((key, value))
    return out


def close(a, b):
    """Exact for symbolic values; floats agree to round-off."""
    if a == b:
        return True
    try:
        x, y = float(a), float(b)
    except ValueError:
        return False
    return math.isclose(x, y, rel_tol=1e-6, abs_tol=1e-8)


def run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


@pytest.fixture(autouse=True)
def _in_root(monkeypatch):
    monkeypatch.chdir(ROOT)


@pytest.mark.parametrize("path", PROBLEMS, ids=lambda p: p.stem)
def test_task_lists_match_golden(path):
    code, text = run_tasks(path.relative_to(ROOT), machine=True)
    assert code == EXIT_OK, text
    want = pairs((GOLDEN / f"{path.stem}.txt").read_text())
    got = pairs(text)
    assert [k for k, _ in got] == [k for k, _ in want]
    bad = [(k, g, w) for (k, g), (_, w) in zip(got, want) if not close(g, w)]
    assert not bad


def test_machine_output_is_deterministic():
    first = run_tasks("problems/monopole_free.jv", machine=True)
    again = run_tasks("problems/monopole_free.jv", machine=True)
    assert first == again


class TestExitCodes:
    def test_success(self, capsys):
        code, out, _ = run(["el", "problems/oscillator.jv"], capsys)
        assert code == EXIT_OK and out.strip() == "eta[y] = -y - y_tt"

    def test_negative_verdict_only_with_strict(self, capsys):
        argv = ["helmholtz", "problems/damped.jv", "--source", "damping"]
        assert run(argv, capsys)[0] == EXIT_OK
        code, out, _ = run(argv + ["--strict"], capsys)
        assert code == EXIT_VERDICT and "NOT locally variational" in out

    def test_strict_positive(self, capsys):
        argv = ["cech", "class", "problems/patched.jv", "--strict"]
        assert run(argv, capsys)[0] == EXIT_OK

    def test_strict_nontrivial_class(self, capsys):
        code, out, _ = run(["cech", "classify", "problems/monopole.jv", "--strict"], capsys)
        assert code == EXIT_VERDICT and "NON_GLOBAL; delta-class NONTRIVIAL" in out
        assert "2*pi = 1 x (4*pi*g)" in out

    def test_missing_file(self, capsys):
        code, _, err = run(["el", "problems/nothing.jv"], capsys)
        assert code == EXIT_INPUT and err.startswith("error: cannot read")

    def test_unknown_block_id(self, capsys):
        code, _, err = run(["noether", "problems/galilei.jv", "--field", "spin"], capsys)
        assert code == EXIT_INPUT and "no field named 'spin'" in err

    def test_bad_arguments(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate", "problems/oscillator.jv"])
        assert info.value.code == EXIT_INPUT

    def test_parse_error_location(self, tmp_path, capsys):
        bad = tmp_path / "bad.jv"
        bad.write_text("[context]\nbase t\nfiber y\norder 1\n[lagrangian L]\nL = y_t^\n")
        code, _, err = run(["el", str(bad)], capsys)
        assert code == EXIT_INPUT and f"{bad}:6:" in err

    def test_bad_task_line(self, tmp_path):
        f = tmp_path / "t.jv"
        f.write_text("[context]\nbase t\nfiber y\norder 1\n[tasks]\nfly --higher\n")
        code, text = run_tasks(f)
        assert code == EXIT_INPUT and f"{f}:6:" in text


class TestCommands:
    def test_tonti_round_trip(self, capsys):
        code, out, _ = run(["tonti", "problems/damped.jv", "--source", "oscillator", "--machine"], capsys)
        got = dict(pairs(out))
        assert code == EXIT_OK and got["roundtrip"] == "true"

    def test_tonti_center(self, capsys):
        argv = ["tonti", "problems/damped.jv", "--source", "oscillator", "--machine"]
        code, out, _ = run(argv + ["--center", "1"], capsys)
        assert code == EXIT_OK and dict(pairs(out))["roundtrip"] == "true"
        code, _, err = run(argv + ["--center", "1,2"], capsys)
        assert code == EXIT_INPUT and "--center" in err

    def test_cohomology_degree(self, capsys):
        code, out, _ = run(["cech", "cohomology", "problems/circle.jv", "--degree", "1", "--machine"], capsys)
        assert code == EXIT_OK and dict(pairs(out))["H1"] == "1"

    def test_conserve_on_a_non_critical_section(self, capsys):
        argv = ["conserve", "problems/oscillator.jv", "--section", "straight", "--strict", "--machine"]
        code, out, _ = run(argv, capsys)
        got = dict(pairs(out))
        assert code == EXIT_VERDICT and got["critical"] == "false"

    def test_tasks_command(self, capsys):
        code, out, _ = run(["tasks", "problems/damped.jv"], capsys)
        assert code == EXIT_OK and out.count("== ") == 4

    def test_zero_test_options(self, capsys):
        argv = ["el", "problems/oscillator.jv", "--zero-points", "3", "--zero-tol", "1e-8"]
        assert run(argv, capsys)[0] == EXIT_OK


def test_console_script_is_installed():
    from shutil import which

    exe = which("jetvar")
    if exe is None:
        pytest.skip("console script not on PATH")
    assert os.access(exe, os.X_OK)
