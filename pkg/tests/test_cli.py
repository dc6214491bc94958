"""Command-line behaviour: parsing, error reporting, outputs, exit codes."""

import json
import subprocess

from qramsim import cli, experiments
from qramsim.model import QramGeometry, ClassicalData, build_query_circuit, parse_circuit

EXPECTED_HEADER = (
    "param.layers,param.e_t,fidelity,fidelity_ci,infidelity,"
    "valid_fraction,valid_fraction_ci,n_samples,seed"
)


def run_cli(capsys, *args):
    code = cli.run(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParsing:
    def test_no_command_is_a_config_error(self, capsys):
        code, _, err = run_cli(capsys)
        assert code == 2
        assert "command is required" in err

    def test_help_exits_zero(self, capsys):
        code, out, _ = run_cli(capsys, "--help")
        assert code == 0
        assert "verify-gates" in out

    def test_unknown_flag_exits_two(self, capsys):
        code, _, _ = run_cli(capsys, "scaling", "--bogus", "1")
        assert code == 2

    def test_missing_required_flag(self, capsys):
        code, _, err = run_cli(capsys, "simulate")
        assert code == 2
        assert "--layers is required" in err

    def test_bad_float_names_the_option(self, capsys):
        code, _, err = run_cli(capsys, "simulate", "--layers", "2", "--e_t", "abc")
        assert code == 2
        assert "option --e_t" in err and "'abc'" in err

    def test_bad_integer_span(self, capsys):
        code, _, err = run_cli(capsys, "scaling", "--layers", "5..2")
        assert code == 2
        assert "option --layers" in err

    def test_bad_choice_lists_alternatives(self, capsys):
        code, _, err = run_cli(capsys, "scaling", "--layers", "2..3", "--format", "xml")
        assert code == 2
        assert "option --format" in err and "csv" in err

    def test_data_length_mismatch(self, capsys):
        code, _, err = run_cli(capsys, "simulate", "--layers", "2", "--data", "010")
        assert code == 2
        assert "option --data" in err

    def test_library_validation_maps_to_exit_two(self, capsys):
        code, _, err = run_cli(
            capsys, "scaling", "--layers", "2..3", "--samples", "10", "--e_t", "1e-4"
        )
        assert code == 2
        assert "samples" in err

    def test_contour_requires_a_grid(self, capsys):
        code, _, err = run_cli(capsys, "contour", "--layers", "2..3")
        assert code == 2
        assert "e_t_grid" in err or "grid" in err

    def test_contour_rejects_both_grid_forms(self, capsys):
        code, _, err = run_cli(
            capsys, "contour", "--layers", "2", "--e_t_grid", "1e-4,1e-3",
            "--grid", "2:1e-4,1e-3",
        )
        assert code == 2
        assert "not both" in err

    def test_contour_missing_depth_grid(self, capsys):
        code, _, err = run_cli(
            capsys, "contour", "--layers", "2..3", "--grid", "2:1e-4,1e-3"
        )
        assert code == 2
        assert "3" in err


class TestConfigFiles:
    def test_unknown_key_reports_file_and_line(self, capsys, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("command=scaling\nwat=1\n")
        code, _, err = run_cli(capsys, "--config", str(path))
        assert code == 2
        assert f"{path}:2" in err and "wat" in err

    def test_key_before_command(self, capsys, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("layers=2..3\ncommand=scaling\n")
        code, _, err = run_cli(capsys, "--config", str(path))
        assert code == 2
        assert f"{path}:1" in err

    def test_duplicate_key(self, capsys, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("command=scaling\nseed=1\nseed=2\n")
        code, _, err = run_cli(capsys, "--config", str(path))
        assert code == 2
        assert f"{path}:3" in err

    def test_bad_value_reports_file_and_line(self, capsys, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("command=simulate\nlayers=2\ne_t=oops\n")
        code, _, err = run_cli(capsys, "--config", str(path))
        assert code == 2
        assert f"{path}:3" in err and "field e_t" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "--config", str(tmp_path / "nope.cfg"))
        assert code == 2
        assert "nope.cfg" in err

    def test_config_takes_no_extra_arguments(self, capsys, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("command=verify-gates\n")
        code, _, err = run_cli(capsys, "--config", str(path), "--seed", "1")
        assert code == 2
        assert "exactly one path" in err


class TestAddressFiles:
    def test_component_file_is_normalized(self, capsys, tmp_path):
        path = tmp_path / "addr.txt"
        path.write_text("# two components\n00 0.6\n11 0.8\n")
        code, out, _ = run_cli(
            capsys, "simulate", "--layers", "2", "--data", "1111",
            "--address", f"file:{path}", "--e_t", "0",
        )
        assert code == 0
        assert "fidelity 1.000000" in out

    def test_bad_bits_report_line(self, capsys, tmp_path):
        path = tmp_path / "addr.txt"
        path.write_text("00 1.0\n0x 1.0\n")
        code, _, err = run_cli(
            capsys, "simulate", "--layers", "2", "--address", f"file:{path}"
        )
        assert code == 2
        assert f"{path}:2" in err

    def test_wrong_length_rejected(self, capsys, tmp_path):
        path = tmp_path / "addr.txt"
        path.write_text("000 1.0\n")
        code, _, err = run_cli(
            capsys, "simulate", "--layers", "2", "--address", f"file:{path}"
        )
        assert code == 2
        assert "does not match 2 layers" in err

    def test_empty_file_rejected(self, capsys, tmp_path):
        path = tmp_path / "addr.txt"
        path.write_text("# nothing here\n")
        code, _, err = run_cli(
            capsys, "simulate", "--layers", "2", "--address", f"file:{path}"
        )
        assert code == 2
        assert "no address components" in err


class TestBuildAndStats:
    def test_build_output_parses_back(self, capsys):
        code, out, _ = run_cli(capsys, "build", "--layers", "2", "--data", "0110")
        assert code == 0
        geometry = QramGeometry(2)
        reference = build_query_circuit(
            geometry, ClassicalData.from_spec("0110", 4)
        )
        assert parse_circuit(out, geometry).gates == reference.gates

    def test_stats_reports_both_schemes(self, capsys):
        code, out, _ = run_cli(capsys, "stats", "--layers", "2")
        assert code == 0
        assert "cz count: optimized 111  baseline 159" in out
        assert "depth reduction" in out


class TestVerifyGates:
    def test_reports_pass_and_exit_zero(self, capsys):
        code, out, _ = run_cli(capsys, "verify-gates")
        assert code == 0
        assert "scenario UpwardConstraints: PASS" in out
        assert "scenario DownwardConstraints: PASS" in out
        assert "UPrime involution: PASS" in out

    def test_console_script_is_installed(self):
        proc = subprocess.run(
            ["qramsim", "verify-gates"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "scenario UpwardConstraints: PASS" in proc.stdout


class TestSimulate:
    def test_noiseless_entangled_query(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--layers", "2", "--data", "0101",
            "--address", "bell:00,11", "--e_t", "0",
        )
        assert code == 0
        assert "fidelity 1.000000" in out

    def test_noiseless_postselection_keeps_everything(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--layers", "2", "--data", "1111", "--k", "2"
        )
        assert code == 0
        assert "valid_fraction 1.000000" in out

    def test_noisy_run_is_deterministic(self, capsys):
        args = (
            "simulate", "--layers", "2", "--data", "0101", "--e_t", "1e-3",
            "--samples", "400", "--seed", "9",
        )
        code_a, out_a, _ = run_cli(capsys, *args)
        code_b, out_b, _ = run_cli(capsys, *args)
        assert code_a == code_b == 0
        assert out_a == out_b

    def test_selected_branch_mode_runs(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--layers", "2", "--data", "0101",
            "--address", "bell:00,01", "--e_t", "1e-3", "--k", "1",
            "--mode", "QueriedBranchesOnly", "--samples", "300", "--seed", "3",
        )
        assert code == 0
        assert "fidelity" in out

    def test_injection_flag_runs(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--layers", "2", "--data", "0101",
            "--inject", "C2:DataLoading:0.2", "--e_t", "1e-3",
            "--samples", "300", "--seed", "4",
        )
        assert code == 0
        assert "fidelity" in out

    def test_wide_interval_flags_exit_three(self, capsys):
        # 120 samples at e_t = 2e-5 leave the interval wider than the
        # tiny infidelity for this seed
        code, out, err = run_cli(
            capsys, "simulate", "--layers", "2", "--e_t", "2e-5",
            "--samples", "120", "--seed", "1",
        )
        assert code == 3
        assert "fidelity" in out
        assert "interval wider" in err

    def test_bad_injection_spec(self, capsys):
        code, _, err = run_cli(
            capsys, "simulate", "--layers", "2", "--inject", "C2:NoSuchPhase:0.1"
        )
        assert code == 2
        assert "NoSuchPhase" in err


class TestScalingCommand:
    def test_csv_schema_and_fit_footer(self, capsys, tmp_path):
        stem = tmp_path / "sc"
        code, out, _ = run_cli(
            capsys, "scaling", "--layers", "2..3", "--e_t", "1e-3",
            "--samples", "1000", "--seed", "3", "--out", str(stem),
            "--format", "csv",
        )
        assert code == 0
        lines = (tmp_path / "sc.csv").read_text().splitlines()
        assert lines[0] == EXPECTED_HEADER
        data_lines = [l for l in lines[1:] if not l.startswith("#")]
        assert len(data_lines) == 2
        assert any(l.startswith("# fit slope=") for l in lines)
        assert not (tmp_path / "sc.json").exists()

    def test_dumped_config_replays_byte_identical(self, capsys, tmp_path):
        stem = tmp_path / "sc"
        config = tmp_path / "run.cfg"
        args = (
            "scaling", "--layers", "2..3", "--e_t", "1e-3", "--samples", "1000",
            "--seed", "3", "--out", str(stem), "--format", "csv",
        )
        code, _, _ = run_cli(capsys, *args, "--dump-config", str(config))
        assert code == 0
        first = (tmp_path / "sc.csv").read_bytes()
        (tmp_path / "sc.csv").unlink()
        code, _, _ = run_cli(capsys, "--config", str(config))
        assert code == 0
        assert (tmp_path / "sc.csv").read_bytes() == first

    def test_thread_count_does_not_change_output(self, capsys, tmp_path):
        baseline = None
        for threads in ("1", "4"):
            stem = tmp_path / f"sc{threads}"
            code, _, _ = run_cli(
                capsys, "scaling", "--layers", "2..3", "--e_t", "1e-3",
                "--samples", "1000", "--seed", "3", "--out", str(stem),
                "--format", "csv", "--threads", threads,
            )
            assert code == 0
            content = (tmp_path / f"sc{threads}.csv").read_bytes()
            if baseline is None:
                baseline = content
            else:
                assert content == baseline

    def test_zero_noise_rows_are_unflagged(self, capsys, tmp_path):
        stem = tmp_path / "clean"
        code, _, err = run_cli(
            capsys, "scaling", "--layers", "2..3", "--e_t", "0",
            "--samples", "1000", "--seed", "0", "--out", str(stem),
            "--format", "csv",
        )
        assert code == 0
        assert "flagged" not in err


class TestOtherExperimentCommands:
    def test_mitigate_writes_json(self, capsys, tmp_path):
        stem = tmp_path / "mit"
        code, out, _ = run_cli(
            capsys, "mitigate", "--layers", "2", "--e_t", "1e-3",
            "--samples", "300", "--seed", "5", "--out", str(stem),
            "--format", "json",
        )
        assert code == 0
        payload = json.loads((tmp_path / "mit.json").read_text())
        assert payload["experiment"] == "mitigation"
        assert len(payload["rows"]) == 3

    def test_inject_rows_cover_the_grid(self, capsys, tmp_path):
        stem = tmp_path / "inj"
        code, out, _ = run_cli(
            capsys, "inject", "--nodes", "4", "--p_grid", "0,0.45",
            "--samples", "400", "--seed", "1", "--out", str(stem),
            "--format", "csv",
        )
        assert code == 0
        lines = (tmp_path / "inj.csv").read_text().splitlines()
        data_lines = [l for l in lines[1:] if not l.startswith("#")]
        assert len(data_lines) == 2

    def test_entropy_uses_env_output_directory(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path))
        code, out, _ = run_cli(capsys, "entropy")
        assert code == 0
        lines = (tmp_path / "entropy_seed0.csv").read_text().splitlines()
        data_lines = [l for l in lines[1:] if not l.startswith("#")]
        assert len(data_lines) == 7
        assert "S = 0.954434 bits" in out

    def test_entropy_depth_capped(self, capsys):
        code, _, err = run_cli(capsys, "entropy", "--layers", "4")
        assert code == 2
        assert "option --layers" in err

    def test_contour_thresholds_in_json(self, capsys, tmp_path):
        stem = tmp_path / "ct"
        code, out, _ = run_cli(
            capsys, "contour", "--layers", "2..3",
            "--grid", "2:5e-4,1e-3,2e-3", "--grid", "3:2e-4,5e-4,1e-3",
            "--targets", "0.95", "--samples", "800", "--seed", "19",
            "--out", str(stem),
        )
        assert code == 0
        payload = json.loads((tmp_path / "ct.json").read_text())
        thresholds = payload["thresholds"]
        assert [t["layers"] for t in thresholds] == [2, 3]
        assert thresholds[0]["epsilon_star"] > thresholds[1]["epsilon_star"] > 0.0
        assert "threshold layers=2" in out


class TestTeleportCommand:
    def test_postselect_all_cardinal_states(self, capsys):
        code, out, _ = run_cli(capsys, "teleport", "--mode", "PostSelect")
        assert code == 0
        lines = [l for l in out.splitlines() if l.startswith("state")]
        assert len(lines) == 6
        for line in lines:
            assert "fidelity 1.000000" in line
            assert "keep 0.250000" in line

    def test_feedforward_keeps_every_shot(self, capsys):
        code, out, _ = run_cli(
            capsys, "teleport", "--state", "plus-i", "--mode", "Feedforward",
            "--samples", "50", "--seed", "2",
        )
        assert code == 0
        assert "fidelity 1.000000" in out
        assert "keep 1.000000" in out


class TestReadoutCorrectCommand:
    def test_round_trip_recovers_histogram(self, capsys):
        code, out, _ = run_cli(capsys, "readout-correct")
        assert code == 0
        assert "recovered 0.500000 0.100000 0.100000 0.300000" in out

    def test_singular_response_rejected(self, capsys):
        code, _, err = run_cli(
            capsys, "readout-correct", "--flip0", "0.5", "--flip1", "0.5"
        )
        assert code == 2
        assert "singular" in err

    def test_non_power_of_two_histogram(self, capsys):
        code, _, err = run_cli(capsys, "readout-correct", "--probs", "0.5,0.2,0.3")
        assert code == 2
        assert "power of two" in err

    def test_bad_sum_rejected(self, capsys):
        code, _, err = run_cli(capsys, "readout-correct", "--probs", "0.5,0.1")
        assert code == 2
        assert "sum to" in err


class TestFlagExit:
    def test_flagged_rows_exit_three(self, capsys, tmp_path):
        row = experiments.ResultRow(
            params=(("layers", 2.0),), fidelity=0.999, fidelity_ci=0.01,
            valid_fraction=1.0, valid_fraction_ci=0.0, n_samples=100, seed=0,
            flagged=True,
        )
        result = experiments.ExperimentResult("scaling", (row,))
        assert cli._flag_exit(result) == 3
        capsys.readouterr()

    def test_unflagged_rows_exit_zero(self):
        row = experiments.ResultRow(
            params=(("layers", 2.0),), fidelity=0.9, fidelity_ci=0.01,
            valid_fraction=1.0, valid_fraction_ci=0.0, n_samples=100, seed=0,
        )
        result = experiments.ExperimentResult("scaling", (row,))
        assert cli._flag_exit(result) == 0
