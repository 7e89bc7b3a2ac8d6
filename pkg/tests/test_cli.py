import csv
import io
import json
import subprocess
import sys

import pytest

from cbbre.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        elif line:
            body.append(line)
    return meta, list(csv.DictReader(io.StringIO("\n".join(body))))


class TestClassify:
    @pytest.mark.parametrize("alpha,regime", [(0.0, "weak"), (-0.5, "intermediate"), (-1.5, "strong"),
                                              (1.0, "supercritical"), (0.5, "critical")])
    def test_regimes(self, capsys, alpha, regime):
        code, out, _ = run(capsys, "classify", "--alpha", str(alpha))
        assert code == 0
        meta, rows = parse_csv(out)
        assert rows[0]["regime"] == regime
        assert meta["alpha"] == alpha

    def test_json(self, capsys):
        code, out, _ = run(capsys, "classify", "--alpha", "-1.5", "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["meta"]["command"] == "classify"
        assert doc["rows"][0]["eta"] == pytest.approx(4.0)

    def test_invalid_parameters_exit_2(self, capsys):
        code, _, err = run(capsys, "classify", "--sigma", "0")
        assert code == 2
        assert "error" in err

    def test_unknown_flag_exit_2(self, capsys):
        assert run(capsys, "classify", "--bogus")[0] == 2


class TestYaglomCurve:
    def test_intermediate_value(self, capsys):
        code, out, _ = run(capsys, "yaglom-curve", "--alpha", "-0.5", "--lambda", "0.5", "--check")
        assert code == 0
        _, rows = parse_csv(out)
        assert float(rows[0]["L"]) == pytest.approx(0.403653, abs=1e-6)
        assert float(rows[0]["abs_dev"]) < 1e-9

    def test_no_environment(self, capsys):
        code, out, _ = run(capsys, "yaglom-curve", "--no-env", "--alpha", "-1", "--sigma", "0", "--lambda", "1")
        assert code == 0
        assert float(parse_csv(out)[1][0]["L"]) == pytest.approx(0.5, abs=1e-12)

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "curve.json"
        code, out, _ = run(capsys, "yaglom-curve", "--format", "json", "--out", str(path))
        assert code == 0
        assert out == ""
        rows = json.loads(path.read_text())["rows"]
        assert all(0 < r["L"] < 1 for r in rows)


class TestMC:
    def test_seed_required(self, capsys):
        assert run(capsys, "mc", "--kind", "duality")[0] == 2

    def test_duality_and_replay(self, capsys):
        argv = ["mc", "--kind", "duality", "--paths", "5000", "--seed", "3"]
        _, first, _ = run(capsys, *argv, "--threads", "1")
        _, second, _ = run(capsys, *argv, "--threads", "3")
        assert first == second
        _, rows = parse_csv(first)
        assert 0 < float(rows[0]["mean"]) < 1

    def test_args_from_file(self, capsys, tmp_path):
        path = tmp_path / "run.args"
        path.write_text("# replay\nkind=duality\npaths=5000\nseed=3\n")
        _, from_file, _ = run(capsys, "mc", "--args-from", str(path))
        _, direct, _ = run(capsys, "mc", "--kind", "duality", "--paths", "5000", "--seed", "3")
        assert from_file == direct

    def test_threads_from_environment(self, capsys, monkeypatch):
        argv = ["mc", "--kind", "survival", "--paths", "5000", "--seed", "4"]
        _, plain, _ = run(capsys, *argv)
        monkeypatch.setenv("CBBRE_THREADS", "2")
        _, env, _ = run(capsys, *argv)
        assert plain == env
        monkeypatch.setenv("CBBRE_THREADS", "two")
        assert run(capsys, *argv)[0] == 2

    def test_dufresne_json(self, capsys):
        code, out, _ = run(capsys, "mc", "--kind", "dufresne", "--b", "2", "--paths", "20000", "--seed", "1",
                           "--format", "json")
        assert code == 0
        row = json.loads(out)["rows"][0]
        assert row["mean_z"] < 4

    def test_sde(self, capsys):
        code, out, _ = run(capsys, "mc", "--kind", "sde", "--paths", "2000", "--seed", "2", "--dt", "1e-3")
        assert code == 0
        assert 0 < float(parse_csv(out)[1][0]["mean"]) < 1

    def test_numerical_failure_exit_3(self, capsys, monkeypatch):
        import cbbre.montecarlo as mc

        def fail(*args, **kwargs):
            raise mc.MonteCarloError("overflow")

        monkeypatch.setattr(mc, "duality_lt", fail)
        code, _, err = run(capsys, "mc", "--kind", "duality", "--paths", "100", "--seed", "1")
        assert code == 3
        assert "overflow" in err

    def test_supercritical_rejected(self, capsys):
        assert run(capsys, "mc", "--kind", "duality", "--alpha", "1", "--seed", "1", "--paths", "100")[0] == 2


class TestVerify:
    def test_specialfn_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "specialfn", "--fast")
        assert code == 0
        meta, rows = parse_csv(out)
        assert meta["n_failed"] == 0
        assert rows and all(r["verdict"] == "pass" for r in rows)

    def test_identities_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "identities", "--fast", "--format", "json")
        assert code == 0
        assert json.loads(out)["meta"]["n_failed"] == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cbbre", "classify", "--alpha", "-1.5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "strong" in proc.stdout
