import subprocess
import sys

import pytest

from smadp import filters
from smadp.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

SMALL = """
runs: 3
schedule:
  - {system: sparse, iterations: 60}
  - {system: dense, iterations: 40}
algorithms: [nlms, sm_nlms, eza_sm_nlms_adp]
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL)
    return path


class TestRun:
    def test_writes_outputs(self, small_config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", str(small_config), "--out", str(out), "--svg"]) == EXIT_OK
        for name in ("curves.csv", "curves_summary.csv", "mse.svg", "msd.svg"):
            assert (out / name).stat().st_size > 0
        lines = (out / "curves.csv").read_text().splitlines()
        assert len(lines) == 1 + 3 * 100
        assert "EZA-SM-NLMS-ADP" in capsys.readouterr().out

    def test_no_svg_by_default(self, small_config, tmp_path):
        assert main(["run", str(small_config), "--out", str(tmp_path)]) == EXIT_OK
        assert not (tmp_path / "mse.svg").exists()

    def test_runs_and_seed_flags(self, small_config, tmp_path):
        main(["run", str(small_config), "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["run", str(small_config), "--out", str(tmp_path / "b"), "--seed", "2"])
        main(["run", str(small_config), "--out", str(tmp_path / "c"), "--seed", "1"])
        a, b, c = ((tmp_path / k / "curves.csv").read_bytes() for k in "abc")
        assert a == c and a != b

    def test_preset_by_name(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["run", "figure2", "--runs", "1", "--out", "o"]) == EXIT_OK
        assert (tmp_path / "o" / "curves.csv").exists()


class TestExitCodes:
    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("runs: 2\ngamma: -1\n")
        assert main(["run", str(path)]) == EXIT_CONFIG
        assert "bad.yaml:2" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG

    def test_bad_runs_flag(self, small_config, tmp_path):
        assert main(["run", str(small_config), "--runs", "0", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_all_trials_diverge(self, small_config, tmp_path, monkeypatch, capsys):
        inner = filters.nlms_kernel

        def broken(*args):
            r = inner(*args)
            return r._replace(weights=r.weights * float("nan"))

        monkeypatch.setattr(filters, "nlms_kernel", broken)
        assert main(["run", str(small_config), "--out", str(tmp_path)]) == EXIT_RUNTIME
        assert "diverged" in capsys.readouterr().err

    def test_unwritable_output(self, small_config, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["run", str(small_config), "--out", str(blocker / "sub")]) == EXIT_RUNTIME


class TestInfo:
    def test_presets(self, capsys):
        assert main(["presets"]) == EXIT_OK
        out = capsys.readouterr().out
        for name in ("figure1", "figure2", "figure3", "figure4"):
            assert name in out

    def test_describe(self, capsys):
        assert main(["describe", "figure4"]) == EXIT_OK
        assert "ar4" in capsys.readouterr().out

    def test_describe_unknown(self):
        assert main(["describe", "nope"]) == EXIT_CONFIG

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "smadp", "presets"], capture_output=True, text=True)
        assert res.returncode == 0 and "figure1" in res.stdout
