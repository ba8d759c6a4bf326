"""
End-to-end runs of the ``sketchfl`` console entry point.
"""
import json
from pathlib import Path

import pytest

from cli.main import EXIT_CONFIG, EXIT_OK, main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

pytestmark = pytest.mark.integration


def summary(out: Path, command: str) -> dict:
    return json.loads((out / command / "summary.json").read_text())


def write(tmp_path: Path, name: str, text: str) -> str:
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestCommands:
    def test_gradient_descent_baseline(self, tmp_path):
        code = main(["run-fl", "--config", str(FIXTURES / "gd_equivalence.toml"),
                     "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        result = summary(tmp_path, "run-fl")
        assert result["passed"]
        assert result["assertions"]["gd_equivalence"]
        assert result["metrics"]["regime"] == "strongly_convex"
        assert (tmp_path / "run-fl" / "traces.csv").exists()

    def test_account_privacy(self, tmp_path):
        code = main(["account-privacy", "--config", str(FIXTURES / "privacy.toml"),
                     "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        budget = json.loads((tmp_path / "account-privacy" / "budget.json").read_text())
        assert abs(budget["budget"]["delta_dp"] - 4e-4) < 1e-15

    def test_verify_selected_kinds(self, tmp_path):
        config = write(tmp_path, "verify.toml",
                       "[verify]\nd = 16\nb_sketch = 8\ntrials = 2000\nmaster_seed = 5\n")
        code = main(["verify-sketch", "--config", config, "--kinds", "gaussian,identity",
                     "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        result = summary(tmp_path, "verify-sketch")
        assert set(result["assertions"]) == {"cwe_gaussian", "cwe_identity"}
        assert result["metrics"]["gaussian.alpha"] == 6.0

    def test_guard_violation_is_reported(self, tmp_path):
        config = write(tmp_path, "hot.toml", "\n".join([
            "[objective]", 'kind = "quadratic"', "N = 2", "d = 4", "n_per_client = 8",
            "spectrum = [0.5, 2.0]",
            "[run]", "T = 5", "K = 4", "eta_local = 0.05", "n_seeds = 2",
            "[run.sketch]", 'kind = "gaussian"', "d = 4", "b_sketch = 2", "",
        ]))
        code = main(["run-fl", "--config", config, "--out", str(tmp_path), "--no-assert", "--quiet"])
        assert code == EXIT_OK
        assert any("eta_local" in w for w in summary(tmp_path, "run-fl")["warnings"])

    def test_same_seed_same_bytes(self, tmp_path):
        args = ["run-fl", "--config", str(FIXTURES / "gd_equivalence.toml"), "--seed", "5", "--quiet"]
        assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        first = (tmp_path / "a" / "run-fl" / "traces.csv").read_bytes()
        assert first == (tmp_path / "b" / "run-fl" / "traces.csv").read_bytes()


class TestErrors:
    def test_unknown_command(self):
        assert main(["train"]) == EXIT_CONFIG

    def test_no_command(self, capsys):
        assert main([]) == EXIT_CONFIG
        assert main(["--help"]) == EXIT_OK
        assert "run-fl" in capsys.readouterr().out

    def test_missing_section(self, tmp_path):
        code = main(["run-fl", "--config", str(FIXTURES / "privacy.toml"),
                     "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_CONFIG

    def test_invalid_key(self, tmp_path):
        config = write(tmp_path, "bad.toml", "[privacy]\neps_hat = 0.1\ndelta_hat = 1e-5\nepsilon = 2\n")
        assert main(["account-privacy", "--config", config, "--quiet"]) == EXIT_CONFIG

    def test_every_command_has_a_summary_line(self, capsys):
        assert main(["--help"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        commands = lines[lines.index("commands:") + 1:]
        assert len(commands) == 6
        for line in commands:
            name, _, description = line.strip().partition(" ")
            assert description.strip().endswith("."), name


@pytest.mark.slow
class TestFixtures:
    def run(self, tmp_path, command: str, fixture: str, *extra: str) -> dict:
        code = main([command, "--config", str(FIXTURES / fixture), "--out", str(tmp_path),
                     "--quiet", *extra])
        result = summary(tmp_path, command)
        result["exit"] = code
        return result

    def test_verify_sketch(self, tmp_path):
        result = self.run(tmp_path, "verify-sketch", "verify_sketch.toml")
        assert result["exit"] == EXIT_OK
        assert result["assertions"]["cwe_sparse"]

    def test_convex_average_iterate(self, tmp_path):
        result = self.run(tmp_path, "run-fl", "convex.toml")
        assert result["exit"] == EXIT_OK
        assert result["metrics"]["regime"] == "convex"
        assert result["assertions"]["bound_convex"]

    def test_nonconvex_min_gradient(self, tmp_path):
        result = self.run(tmp_path, "run-fl", "nonconvex.toml")
        assert result["exit"] == EXIT_OK
        assert result["assertions"]["bound_nonconvex"]

    def test_sweep(self, tmp_path):
        result = self.run(tmp_path, "sweep", "sweep.toml")
        assert result["exit"] == EXIT_OK
        assert result["assertions"]["bits_within_band"]
        assert result["metrics"]["bits_band"] <= 4.0

    def test_attack_reconstructs_the_input(self, tmp_path):
        result = self.run(tmp_path, "attack", "attack.toml")
        assert result["exit"] == EXIT_OK
        assert result["assertions"]["rate_certificate"]
        assert result["assertions"]["reconstruction"]
        assert result["metrics"]["relative_error"] <= 1e-5

    def test_sketched_attack_reports_what_its_constants_certify(self, tmp_path):
        result = self.run(tmp_path, "attack", "attack_sketched.toml", "--no-assert")
        assert result["assertions"]["sketch_full_rank"]
        applies = result["metrics"]["sketched_certificate_applies"]
        if applies:
            assert "sketched_certificate" in result["assertions"]
        else:
            assert "sketched_certificate" not in result["assertions"]
            assert any(w.startswith("sketched lemma constants certify no rate")
                       for w in result["warnings"])
        if not result["metrics"]["hypotheses_hold"]:
            assert any("regularity hypotheses do not hold" in w for w in result["warnings"])

    def test_privacy_noise_defeats_the_attack(self, tmp_path):
        result = self.run(tmp_path, "attack", "attack_dp.toml")
        assert result["assertions"]["noise_defeats_attack"]
        metrics = result["metrics"]
        assert metrics["median_error_noised"] >= 10 * metrics["median_error_noiseless"]
