import json
import sys

from properloss.cli import main, parse_machine, render_machine


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestMachineFormat:
    def test_round_trip_is_byte_identical(self):
        pairs = [("command", "demo"), ("value", "1.25"), ("note", "a b c")]
        text = render_machine(pairs)
        parsed_pairs, record = parse_machine(text)
        assert parsed_pairs == pairs
        assert record == dict(pairs)
        assert render_machine(parsed_pairs) == text

    def test_final_line_is_json(self):
        text = render_machine([("k", "v")])
        assert json.loads(text.strip().split("\n")[-1]) == {"k": "v"}


class TestCompileInfo:
    def test_l2_degrees(self, capsys):
        code, out, _ = run(capsys, "compile-info", "--divergence", "l2", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert record["deg_model"] == "2"
        assert record["deg_target"] == "2"

    def test_brier_minimal_sizes(self, capsys):
        code, out, _ = run(capsys, "compile-info", "--divergence", "brier", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert record["minimal_sizes"] == "n>=2, m>=1"

    def test_series_divergence_reports_no_fixed_sizes(self, capsys):
        code, out, _ = run(capsys, "compile-info", "--divergence", "cross-entropy", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert record["family"] == "power-series"

    def test_gate_failure_exits_with_config_error(self, capsys):
        code, _, err = run(capsys, "compile-info", "--divergence", "l2", "--n", "1", "--m", "2")
        assert code == 2
        assert ">= 2" in err

    def test_unknown_divergence(self, capsys):
        code, _, err = run(capsys, "compile-info", "--divergence", "nonsense")
        assert code == 2
        assert "unknown divergence" in err

    def test_spec_file_divergence(self, capsys, tmp_path):
        spec = {
            "monomials": [
                {"coeff": 1, "p_exps": [2, 0], "q_exps": [0, 0]},
                {"coeff": "-1/2", "p_exps": [1, 0], "q_exps": [0, 1]},
            ]
        }
        path = tmp_path / "div.json"
        path.write_text(json.dumps(spec), encoding="utf-8")
        code, out, _ = run(capsys, "compile-info", "--divergence", str(path), "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert record["deg_model"] == "2"
        assert record["deg_target"] == "1"


class TestEval:
    def test_known_vectors(self, capsys):
        code, out, _ = run(
            capsys,
            "eval",
            "--divergence", "l2",
            "--n", "2", "--m", "2",
            "--model-probs", "0.25,0.75",
            "--target-probs", "0.5,0.5",
            "--replicates", "20000",
            "--seed", "7",
            "--format", "machine",
        )
        assert code == 0
        _, record = parse_machine(out)
        mean = float(record["mean"])
        se = float(record["std_error"])
        assert abs(mean - 0.125) <= 4 * se
        assert record["seed"] == "7"

    def test_degree_gate_exit_code_and_message(self, capsys):
        code, _, err = run(
            capsys,
            "eval",
            "--divergence", "l2",
            "--n", "1", "--m", "2",
            "--model-probs", "0.5,0.5",
            "--target-probs", "0.5,0.5",
        )
        assert code == 2
        assert ">= 2" in err

    def test_file_sources(self, capsys, tmp_path):
        # alternating tokens: every draw of 2 gives the histogram (1, 1) on
        # both sides, so the loss is exactly -1 in every replicate
        model = tmp_path / "model.txt"
        target = tmp_path / "target.txt"
        model.write_text("a\nb\n" * 50, encoding="utf-8")
        target.write_text("b\na\n" * 50, encoding="utf-8")
        code, out, _ = run(
            capsys,
            "eval",
            "--divergence", "l2",
            "--n", "2", "--m", "2",
            "--labels", "a,b",
            "--model-file", str(model),
            "--target-file", str(target),
            "--replicates", "50",
            "--format", "machine",
        )
        assert code == 0
        _, record = parse_machine(out)
        assert float(record["mean"]) == -1.0
        assert float(record["std_error"]) == 0.0

    def test_file_source_exhaustion_is_a_source_error(self, capsys, tmp_path):
        model = tmp_path / "model.txt"
        target = tmp_path / "target.txt"
        model.write_text("a\nb\n", encoding="utf-8")
        target.write_text("a\nb\n" * 50, encoding="utf-8")
        code, _, err = run(
            capsys,
            "eval",
            "--divergence", "l2",
            "--n", "2", "--m", "2",
            "--labels", "a,b",
            "--model-file", str(model),
            "--target-file", str(target),
            "--replicates", "50",
        )
        assert code == 4
        assert "ran out" in err

    def test_unknown_token_is_a_source_error(self, capsys, tmp_path):
        model = tmp_path / "model.txt"
        target = tmp_path / "target.txt"
        model.write_text("z\nz\n" * 50, encoding="utf-8")
        target.write_text("a\nb\n" * 50, encoding="utf-8")
        code, _, err = run(
            capsys,
            "eval",
            "--divergence", "l2",
            "--n", "2", "--m", "2",
            "--labels", "a,b",
            "--model-file", str(model),
            "--target-file", str(target),
            "--replicates", "10",
        )
        assert code == 4

    def test_subprocess_source(self, capsys):
        child = (
            "import sys\n"
            "for line in sys.stdin:\n"
            "    n = int(line.strip())\n"
            "    if n == 0:\n"
            "        break\n"
            "    for i in range(n):\n"
            "        sys.stdout.write('a\\n' if i % 2 == 0 else 'b\\n')\n"
            "    sys.stdout.flush()\n"
        )
        code, out, _ = run(
            capsys,
            "eval",
            "--divergence", "l2",
            "--n", "2", "--m", "2",
            "--labels", "a,b",
            "--model-cmd", f'{sys.executable} -c "{child}"',
            "--target-probs", "0.5,0.5",
            "--replicates", "20",
            "--seed", "3",
            "--format", "machine",
        )
        assert code == 0

    def test_cross_entropy_eval(self, capsys):
        code, out, _ = run(
            capsys,
            "eval",
            "--divergence", "cross-entropy",
            "--alpha", "8", "--beta", "8",
            "--model-probs", "0.5,0.5",
            "--target-probs", "0.5,0.5",
            "--replicates", "5000",
            "--seed", "1",
            "--format", "machine",
        )
        assert code == 0
        _, record = parse_machine(out)
        mean, se = float(record["mean"]), float(record["std_error"])
        assert abs(mean - 0.6931471805599453) <= 5 * se

    def test_entropy_eval_needs_no_model(self, capsys):
        code, out, _ = run(
            capsys,
            "eval",
            "--divergence", "entropy",
            "--beta", "8",
            "--target-probs", "0.5,0.5",
            "--replicates", "5000",
            "--seed", "1",
            "--format", "machine",
        )
        assert code == 0
        _, record = parse_machine(out)
        mean, se = float(record["mean"]), float(record["std_error"])
        assert abs(mean - 0.6931471805599453) <= 5 * se


class TestVerify:
    def test_failure_exit_code(self, capsys, monkeypatch):
        import properloss.cli as cli_mod

        def failing(seed):
            return cli_mod.CheckResult("doomed", False, "exact", "1", "synthetic failure")

        monkeypatch.setattr(cli_mod, "CHECKS", [("doomed", failing, True)])
        code, out, _ = run(capsys, "verify")
        assert code == 3
        assert "FAIL" in out

    def test_seed_env_var_is_the_default(self, capsys, monkeypatch):
        monkeypatch.setenv("PROPERLOSS_SEED", "123")
        code, out, _ = run(capsys, "verify", "--only", "mc-sanity", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert record["seed"] == "123"

    def test_single_check_passes(self, capsys):
        code, out, _ = run(capsys, "verify", "--only", "plugin-bias", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert record["check.plugin-bias"].startswith("PASS")
        assert record["failures"] == "0"

    def test_cramer_energy_check(self, capsys):
        code, out, _ = run(capsys, "verify", "--only", "cramer-energy")
        assert code == 0
        assert "PASS" in out

    def test_float_mode_refuses_exact_checks(self, capsys):
        code, _, err = run(capsys, "verify", "--mode", "float", "--only", "squared-two-sample")
        assert code == 2
        assert "exact" in err

    def test_float_mode_allows_truncated_checks(self, capsys):
        code, out, _ = run(capsys, "verify", "--mode", "float", "--only", "mc-sanity")
        assert code == 0

    def test_unknown_check_name(self, capsys):
        code, _, err = run(capsys, "verify", "--only", "bogus")
        assert code == 2
        assert "known checks" in err

    def test_full_suite_passes(self, capsys):
        code, out, _ = run(capsys, "verify", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert record["failures"] == "0"
        checks = [k for k in record if k.startswith("check.")]
        assert len(checks) == 13
        assert all(record[k].startswith("PASS") for k in checks)


class TestDemoBias:
    def test_skewed_default(self, capsys):
        code, out, _ = run(capsys, "demo-bias", "--format", "machine")
        assert code == 0
        pairs, record = parse_machine(out)
        closed = []
        for n in range(2, 21):
            row = record[f"argmin.n{n}"]
            fields = dict(tok.split("=") for tok in row.split())
            closed.append(float(fields["closed"]))
            assert float(fields["gap"]) > 0  # strictly below q1 = 0.1
        assert closed == sorted(closed)  # monotone toward the target from below
        assert render_machine(pairs) == out  # machine output round-trips

    def test_symmetric_target_has_zero_gap(self, capsys):
        code, out, _ = run(capsys, "demo-bias", "--q1", "0.5", "--n-min", "2", "--n-max", "6", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        for n in range(2, 7):
            fields = dict(tok.split("=") for tok in record[f"argmin.n{n}"].split())
            assert float(fields["gap"]) == 0.0

    def test_single_draw_row_is_flagged(self, capsys):
        code, out, _ = run(capsys, "demo-bias", "--n-min", "1", "--n-max", "2", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert "flag=affine" in record["argmin.n1"]


class TestModuleEntryPoint:
    def test_python_dash_m_invocation(self):
        import subprocess

        out = subprocess.run(
            [sys.executable, "-m", "properloss", "compile-info", "--divergence", "l2", "--format", "machine"],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0
        _, record = parse_machine(out.stdout)
        assert record["deg_model"] == "2"


class TestCramerCommand:
    def test_cramer_and_energy(self, capsys, tmp_path):
        model = tmp_path / "model.txt"
        target = tmp_path / "target.txt"
        model.write_text("0\n1\n", encoding="utf-8")
        target.write_text("0\n1\n", encoding="utf-8")
        code, out, _ = run(
            capsys, "cramer", "--model-file", str(model), "--target-file", str(target), "--energy",
            "--format", "machine",
        )
        assert code == 0
        _, record = parse_machine(out)
        assert float(record["cramer"]) == -0.5
        assert float(record["energy"]) == -1.0

    def test_crps(self, capsys, tmp_path):
        model = tmp_path / "model.txt"
        model.write_text("0\n1\n", encoding="utf-8")
        code, out, _ = run(capsys, "cramer", "--model-file", str(model), "--crps", "0", "--format", "machine")
        assert code == 0
        _, record = parse_machine(out)
        assert float(record["crps"]) == 0.0

    def test_vectors(self, capsys, tmp_path):
        model = tmp_path / "model.txt"
        target = tmp_path / "target.txt"
        model.write_text("0,0\n1,2\n", encoding="utf-8")
        target.write_text("0,0\n1,2\n", encoding="utf-8")
        code, out, _ = run(
            capsys, "cramer", "--model-file", str(model), "--target-file", str(target),
            "--vectors", "--seed", "5", "--format", "machine",
        )
        assert code == 0
        _, record = parse_machine(out)
        assert "projected_cramer" in record

    def test_missing_target_without_crps(self, capsys, tmp_path):
        model = tmp_path / "model.txt"
        model.write_text("0\n1\n", encoding="utf-8")
        code, _, err = run(capsys, "cramer", "--model-file", str(model))
        assert code == 2
