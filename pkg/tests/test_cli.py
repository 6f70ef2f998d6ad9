"""CLI tests: config validation, exit codes, file determinism, merging."""

from unlearn_arena import cli
from unlearn_arena.numerics import jeffreys_interval

TINY_GAME = """
[scheme]
scheme = mlp
hidden = 8
epochs = 4

[unlearner]
method = amnesiac

[distinguisher]
kind = kld

[game]
trials = 4
num_classes = 2
dims = 4
train_size = 120
test_size = 60
population_size = 0
forget_size = 8

[output]
directory = {out}
master_seed = 3
"""

TINY_KNN = """
[scheme]
scheme = knn
knn_k = 1

[unlearner]
method = knn-delete

[distinguisher]
kind = kld

[game]
trials = 6
num_classes = 2
dims = 4
train_size = 100
test_size = 40
population_size = 0
forget_size = 10

[output]
directory = {out}
master_seed = 5
"""


def write_config(tmp_path, text, name="cfg.ini", **fmt):
    path = tmp_path / name
    path.write_text(text.format(**fmt))
    return str(path)


def run_cli(*argv):
    return cli.main(list(argv))


class TestConfigParsing:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path, TINY_KNN + "\nbogus_key = 1\n",
                           out=tmp_path / "o")
        assert run_cli("game", cfg) == 1

    def test_unknown_section_rejected(self, tmp_path):
        cfg = write_config(tmp_path, TINY_KNN + "\n[mystery]\nx = 1\n",
                           out=tmp_path / "o")
        assert run_cli("game", cfg) == 1

    def test_negative_trials_names_field(self, tmp_path, capsys):
        bad = TINY_KNN.replace("trials = 6", "trials = -2")
        cfg = write_config(tmp_path, bad, out=tmp_path / "o")
        assert run_cli("game", cfg) == 1
        assert "trials" in capsys.readouterr().err

    def test_bad_type_names_field(self, tmp_path, capsys):
        bad = TINY_KNN.replace("forget_size = 10", "forget_size = ten")
        cfg = write_config(tmp_path, bad, out=tmp_path / "o")
        assert run_cli("game", cfg) == 1
        assert "forget_size" in capsys.readouterr().err

    def test_missing_file(self):
        assert run_cli("game", "/nonexistent/cfg.ini") == 1

    def test_env_seed_override(self, tmp_path, monkeypatch):
        doc = cli.load_config(write_config(tmp_path, TINY_KNN, out=tmp_path / "o"))
        assert cli.build_game_config(doc).master_seed == 5
        monkeypatch.setenv(cli.SEED_ENV_VAR, "99")
        assert cli.build_game_config(doc).master_seed == 99

    def test_trials_override(self, tmp_path):
        doc = cli.load_config(write_config(tmp_path, TINY_KNN, out=tmp_path / "o"))
        assert cli.build_game_config(doc, 17).trials == 17


class TestGameCommand:
    def test_runs_and_writes_files(self, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(tmp_path, TINY_GAME, out=out)
        assert run_cli("game", cfg) == 0
        assert (out / "results.csv").exists()
        assert (out / "trials.jsonl").exists()
        assert (out / "summary.txt").exists()
        lines = (out / "results.csv").read_text().splitlines()
        assert lines[0] == cli.RESULT_HEADER
        assert len(lines) == 2
        assert len((out / "trials.jsonl").read_text().splitlines()) == 4

    def test_byte_identical_reruns_and_parallelism(self, tmp_path):
        cfg = write_config(tmp_path, TINY_GAME, out=tmp_path / "a")
        assert run_cli("game", cfg, "--output", str(tmp_path / "a")) == 0
        assert run_cli("game", cfg, "--output", str(tmp_path / "b")) == 0
        assert run_cli("game", cfg, "--output", str(tmp_path / "c"),
                       "--workers", "2") == 0
        for name in ("results.csv", "trials.jsonl", "summary.txt"):
            a = (tmp_path / "a" / name).read_bytes()
            assert a == (tmp_path / "b" / name).read_bytes()
            assert a == (tmp_path / "c" / name).read_bytes()

    def test_invalid_game_exit_code(self, tmp_path):
        text = TINY_GAME.replace("method = amnesiac", "method = retrain")
        cfg = write_config(tmp_path, text, out=tmp_path / "o")
        assert run_cli("game", cfg) == 2


class TestSweepCommands:
    def test_forget_sweep_files(self, tmp_path):
        text = TINY_GAME + "\n[sweep]\nforget_sizes = 4,12\nmethods = amnesiac\n"
        out = tmp_path / "sweep"
        cfg = write_config(tmp_path, text, out=out)
        assert run_cli("sweep-forget", cfg, "--trials", "4") == 0
        rows = (out / "results.csv").read_text().splitlines()
        assert len(rows) == 3  # header + 2 sizes
        plot = (out / "plot_forget_sweep.csv").read_text().splitlines()
        assert plot[0] == "method,distinguisher,forget_size,success_rate"
        assert len(plot) == 3

    def test_forget_size_zero_rejected(self, tmp_path):
        text = TINY_GAME + "\n[sweep]\nforget_sizes = 0,4\n"
        cfg = write_config(tmp_path, text, out=tmp_path / "o")
        assert run_cli("sweep-forget", cfg) == 1

    def test_sigma_sweep_requires_newton(self, tmp_path):
        text = TINY_GAME + "\n[sweep]\nsigma_grid = 1e-3\n"
        cfg = write_config(tmp_path, text, out=tmp_path / "o")
        assert run_cli("sweep-sigma", cfg) == 1


class TestVerifyAndDemo:
    def test_verify_perfect_passes(self, capsys):
        assert run_cli("verify-perfect") == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 3

    def test_verify_detects_injected_fault(self, capsys):
        assert run_cli("verify-perfect", "--inject-fault", "skip-xty") == 2
        out = capsys.readouterr().out
        assert "[FAIL]" in out and "relative error" in out

    def test_verify_with_ridge_passes_singular_fixture(self, capsys):
        assert run_cli("verify-perfect", "--ridge", "0.5") == 0
        assert "regularized singular fixture" in capsys.readouterr().out


class TestReportCommand:
    def _result_file(self, tmp_path, name, wins, trials, seed):
        d = tmp_path / name
        d.mkdir(parents=True)
        row = ",".join([
            cli.RESULT_SCHEMA, f"exp{seed}", "amnesiac", "kld", "white-box",
            "30", "0", str(trials), str(wins), cli.f17(wins / trials),
            "0", "1", "false", "nan", "nan", "0.9", "0.9", "0.5",
            "100", "900", str(seed)])
        (d / "results.csv").write_text(cli.RESULT_HEADER + "\n" + row + "\n")
        return d

    def test_merge_equals_pooled_interval(self, tmp_path, capsys):
        # Sufficiency of (wins, trials): merging two 64-trial runs gives
        # the same interval as one 128-trial run.
        self._result_file(tmp_path, "a", 50, 64, 1)
        self._result_file(tmp_path, "b", 46, 64, 2)
        assert run_cli("report", str(tmp_path), "--output",
                       str(tmp_path / "agg")) == 0
        lines = (tmp_path / "agg" / "aggregate.csv").read_text().splitlines()
        assert len(lines) == 2
        cols = lines[1].split(",")
        assert cols[5] == "128" and cols[6] == "96"
        ci = jeffreys_interval(96, 128, 0.95)
        assert cols[8] == cli.f17(ci.lo)
        assert cols[9] == cli.f17(ci.hi)

    def test_empty_dir_errors(self, tmp_path):
        assert run_cli("report", str(tmp_path / "nothing")) == 1

    def test_mixed_schema_rejected(self, tmp_path):
        d = self._result_file(tmp_path, "a", 5, 8, 1)
        bad = (d / "results.csv").read_text().replace("\n1,", "\n2,")
        other = tmp_path / "b"
        other.mkdir()
        (other / "results.csv").write_text(bad)
        assert run_cli("report", str(tmp_path)) == 1

    def test_header_bytes_are_versioned(self):
        assert cli.RESULT_HEADER.startswith("schema,")
        assert cli.RESULT_SCHEMA == "1"


class TestMalformedIni:
    def test_parser_errors_become_config_errors(self, tmp_path):
        path = tmp_path / "broken.ini"
        path.write_text("[scheme]\nepochs = 4\nepochs = 5\n")  # duplicate key
        assert cli.main(["game", str(path)]) == 1

    def test_missing_section_header(self, tmp_path):
        path = tmp_path / "broken.ini"
        path.write_text("epochs = 4\n")
        assert cli.main(["game", str(path)]) == 1
