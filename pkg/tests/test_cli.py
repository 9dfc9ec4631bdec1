import subprocess
import sys

import pytest

from blindgrover.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def records(text):
    return dict(line.split(" ", 1) for line in text.splitlines() if line and " " in line)


class TestDemo:
    def test_result_and_exit(self, capsys):
        code, out, _ = run(capsys, "demo", "--seed", "7")
        assert code == 0
        assert "RESULT bits=01" in out.splitlines()

    def test_deterministic(self, capsys):
        _, a, _ = run(capsys, "demo", "--seed", "7")
        _, b, _ = run(capsys, "demo", "--seed", "7")
        assert a == b

    def test_eve_detected(self, capsys):
        _, out, _ = run(capsys, "demo", "--seed", "0", "--eve", "intercept", "--decoys", "8")
        assert "DETECTED true" in out.splitlines()

    def test_seed_from_env(self, capsys, monkeypatch):
        monkeypatch.setenv("BLINDGROVER_SEED", "7")
        _, a, _ = run(capsys, "demo")
        monkeypatch.delenv("BLINDGROVER_SEED")
        _, b, _ = run(capsys, "demo", "--seed", "7")
        assert a == b

    def test_text_mode(self, capsys):
        code, out, _ = run(capsys, "demo", "--format", "text")
        assert code == 0 and "decrypted result: 01" in out


class TestGateCheck:
    def test_all_pass(self, capsys):
        code, out, _ = run(capsys, "gate-check", "--trials", "3")
        lines = out.splitlines()
        assert code == 0 and len(lines) == 8 and all(l.startswith("PASS") for l in lines)

    def test_mutate(self, capsys):
        code, out, _ = run(capsys, "gate-check", "--mutate", "--trials", "1")
        assert code == 1 and any(l.startswith("FAIL") for l in out.splitlines())

    def test_filter(self, capsys):
        code, out, _ = run(capsys, "gate-check", "--gate", "T")
        assert code == 0 and out.splitlines() == ["PASS T identity=ok blind=ok"]


class TestGrover:
    def test_n2(self, capsys):
        code, out, _ = run(capsys, "grover", "--n", "2", "--target", "01")
        r = records(out)
        assert code == 0 and r["ORACLE_CALLS"] == "1" and r["P_SUCCESS"] == "1.000000000"

    def test_n3(self, capsys):
        _, out, _ = run(capsys, "grover", "--n", "3", "--target", "101")
        r = records(out)
        assert r["ORACLE_CALLS"] == "2" and r["P_SUCCESS"] == "0.945312500"

    def test_blind_same_probability(self, capsys):
        _, plain, _ = run(capsys, "grover", "--n", "2", "--target", "01")
        code, blind, _ = run(capsys, "grover", "--n", "2", "--target", "01", "--blind", "--seed", "3")
        assert code == 0
        assert records(blind)["P_SUCCESS"] == records(plain)["P_SUCCESS"]
        assert "DK" in records(blind) and int(records(blind)["TRANSCRIPT_EVENTS"]) > 0

    @pytest.mark.parametrize(
        "argv",
        [
            ["grover", "--n", "3", "--target", "10"],
            ["grover", "--target", "1x"],
            ["grover", "--target", "10101", "--blind"],
            ["grover", "--target", "101010101"],
            ["demo", "--bogus"],
            ["eavesdrop", "--trials", "0"],
        ],
    )
    def test_usage_errors(self, capsys, argv):
        code, _, _ = run(capsys, *argv)
        assert code == 2


class TestEavesdrop:
    def test_m4(self, capsys):
        code, out, _ = run(capsys, "eavesdrop", "--m", "4", "--trials", "10000")
        r = records(out)
        assert code == 0 and abs(float(r["EMPIRICAL"]) - 0.6836) <= 0.02
        assert r["ANALYTIC"] == "0.683594"

    def test_m0(self, capsys):
        _, out, _ = run(capsys, "eavesdrop", "--m", "0", "--trials", "200")
        assert records(out)["EMPIRICAL"] == "0.000000"


class TestFiles:
    def test_circuit_then_run(self, capsys, tmp_path):
        code, text, _ = run(capsys, "circuit", "--target", "01")
        assert code == 0 and text.startswith("# grover n=2")
        path = tmp_path / "g.txt"
        path.write_text(text)
        # same stored circuit, plain and blind, on one basis input
        code, plain, _ = run(capsys, "run", str(path), "--input", "001")
        code_b, blind, _ = run(capsys, "run", str(path), "--input", "001", "--blind")
        assert code == code_b == 0
        outcomes = lambda s: sorted(l for l in s.splitlines() if l.startswith("OUTCOME"))
        assert outcomes(plain) == outcomes(blind)

    def test_run_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "run", str(tmp_path / "nope.txt"))
        assert code == 2 and "error" in err

    def test_transcript(self, capsys):
        code, out, _ = run(capsys, "transcript", "--target", "01", "--seed", "1")
        assert code == 0
        tags = {line.split()[0] for line in out.splitlines()}
        assert tags <= {"ROT", "XFER", "MEAS", "CBIT"} and "ROT" in tags


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "blindgrover", "gate-check", "--gate", "H"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("PASS H")
