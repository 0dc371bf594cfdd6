import json
import threading
import time

import pytest
import uvicorn

from wicksde import cli
from wicksde.service.app import create_app


def run_cli(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParseArgs:
    def test_defaults_materialized(self):
        cfg = cli.parse_args(["converge", "--model", "linear:alpha=1", "--scheme", "wick"])
        assert cfg.command == "converge"
        assert cfg.schemes == ["wick"]
        assert cfg.resolutions == [8, 16, 32, 64, 128]
        assert cfg.n_ref == 1024
        assert cfg.n_paths == 20000
        assert cfg.seed == 42
        assert cfg.horizon == 1.0
        assert cfg.output_format == "text"

    def test_gap_round_trip(self):
        cfg = cli.parse_args(["gap", "--model", "pythagoras", "--n-paths", "20000"])
        assert cfg.command == "gap"
        assert cfg.model == "pythagoras"
        assert cfg.n_paths == 20000

    def test_non_divisor_resolution_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.parse_args(["converge", "--model", "pythagoras",
                            "--resolutions", "8,16,33", "--n-ref", "1024"])
        assert exc.value.code == 2

    def test_unknown_model_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.parse_args(["converge", "--model", "heston"])
        assert exc.value.code == 2

    def test_malformed_model_parameter(self):
        with pytest.raises(SystemExit) as exc:
            cli.parse_args(["converge", "--model", "linear:alpha=two"])
        assert exc.value.code == 2

    def test_bad_scheme(self):
        with pytest.raises(SystemExit) as exc:
            cli.parse_args(["converge", "--model", "sine", "--scheme", "heun"])
        assert exc.value.code == 2

    def test_decreasing_resolutions(self):
        with pytest.raises(SystemExit) as exc:
            cli.parse_args(["gap", "--model", "sine", "--resolutions", "32,16,8"])
        assert exc.value.code == 2

    def test_csv_with_two_schemes_rejected(self):
        with pytest.raises(SystemExit) as exc:
            cli.parse_args(["converge", "--model", "sine", "--scheme", "euler",
                            "--scheme", "wick", "--format", "csv"])
        assert exc.value.code == 2

    def test_csv_not_supported_for_validate(self):
        with pytest.raises(SystemExit) as exc:
            cli.parse_args(["validate", "--model", "sine", "--format", "csv"])
        assert exc.value.code == 2


class TestExactnessCommand:
    def test_passes_and_prints_residual(self, capsys):
        code, out, err = run_cli(capsys, [
            "exactness", "--model", "linear:alpha=2", "--n", "64", "--n-paths", "100",
        ])
        assert code == 0
        assert "max_relative_deviation" in out
        assert "PASS" in out

    def test_impossible_tolerance_fails_with_exit_3(self, capsys):
        code, out, err = run_cli(capsys, [
            "exactness", "--model", "linear:alpha=2", "--n", "64", "--n-paths", "100",
            "--tolerance", "1e-18",
        ])
        assert code == 3
        assert "exceeds tolerance" in err


class TestConvergeCommand:
    ARGS = ["converge", "--model", "pythagoras", "--scheme", "euler",
            "--resolutions", "8,16,32", "--n-ref", "256", "--n-paths", "300"]

    def test_text_output(self, capsys):
        code, out, err = run_cli(capsys, self.ARGS)
        assert code == 0
        assert "fitted_order=" in out

    def test_csv_schema_and_reproducibility(self, capsys):
        code1, out1, _ = run_cli(capsys, self.ARGS + ["--format", "csv"])
        code2, out2, _ = run_cli(capsys, self.ARGS + ["--format", "csv"])
        assert code1 == code2 == 0
        assert out1 == out2
        lines = out1.strip().split("\n")
        assert lines[0] == "n,mean_abs_error,std_error"
        assert len(lines) == 4
        n, err_, se = lines[1].split(",")
        assert int(n) == 8
        assert float(err_) > 0 and float(se) > 0

    def test_json_output_schema(self, capsys):
        code, out, _ = run_cli(capsys, self.ARGS + ["--format", "json"])
        assert code == 0
        payload = json.loads(out)
        report = payload["reports"][0]
        for key in ("model", "scheme", "horizon", "seed", "n_paths", "points",
                    "fitted_order", "fit_intercept", "fit_r2"):
            assert key in report

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "report.csv"
        code, out, _ = run_cli(capsys, self.ARGS + ["--format", "csv", "-o", str(target)])
        assert code == 0
        assert out == ""
        assert target.read_text().startswith("n,mean_abs_error,std_error")

    def test_unwritable_output_path(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, self.ARGS + ["-o", str(tmp_path)])
        assert code == 4
        assert "cannot write" in err


class TestOtherCommands:
    def test_lemma1_frozen_model(self, capsys):
        code, out, _ = run_cli(capsys, [
            "lemma1", "--model", "constant:c=0", "--n", "8", "--n-paths", "50",
        ])
        assert code == 0
        assert "PASS" in out

    def test_gap_constant_exact_agreement(self, capsys):
        code, out, _ = run_cli(capsys, [
            "gap", "--model", "constant", "--resolutions", "8,16,32",
            "--n-paths", "100",
        ])
        assert code == 0
        assert "exact agreement" in out

    def test_validate(self, capsys):
        code, out, _ = run_cli(capsys, ["validate", "--model", "pythagoras"])
        assert code == 0
        assert "PASS" in out

    def test_gap_csv(self, capsys):
        code, out, _ = run_cli(capsys, [
            "gap", "--model", "sine", "--resolutions", "8,16,32",
            "--n-paths", "400", "--format", "csv",
        ])
        assert code == 0
        assert out.startswith("n,gap,std_error,bound")


@pytest.fixture(scope="module")
def live_server():
    config = uvicorn.Config(create_app(), host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    for _ in range(200):
        if server.started:
            break
        time.sleep(0.05)
    assert server.started, "service did not start"
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestRemoteServer:
    def test_cli_against_live_server(self, capsys, live_server):
        code, out, _ = run_cli(capsys, [
            "exactness", "--model", "linear:alpha=1", "--n", "16",
            "--n-paths", "50", "--server", live_server,
        ])
        assert code == 0
        assert "PASS" in out

    def test_remote_matches_in_process(self, capsys, live_server):
        args = ["validate", "--model", "sine", "--format", "json"]
        code_r, out_remote, _ = run_cli(capsys, args + ["--server", live_server])
        code_l, out_local, _ = run_cli(capsys, args)
        assert code_r == code_l == 0
        assert out_remote == out_local

    def test_unreachable_server_is_runtime_error(self, capsys):
        code, _, err = run_cli(capsys, [
            "validate", "--model", "sine", "--server", "http://127.0.0.1:9",
        ])
        assert code == 4
        assert "transport error" in err


class TestWorkerEnvironment:
    def test_output_independent_of_worker_count(self, capsys, monkeypatch):
        outputs = []
        for workers in ("1", "4"):
            monkeypatch.setenv("WICKSDE_WORKERS", workers)
            code, out, _ = run_cli(capsys, [
                "converge", "--model", "sine", "--scheme", "milstein",
                "--resolutions", "8,16,32", "--n-ref", "256",
                "--n-paths", "9000", "--format", "csv",
            ])
            assert code == 0
            outputs.append(out)
        assert outputs[0] == outputs[1]
