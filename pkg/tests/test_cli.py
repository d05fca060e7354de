"""
Tests for the command-line interface
"""

import pytest

from pcopo import __version__
from pcopo.core import PcopoCLI
from pcopo.utils.file_manager import FileManager


def run(argv, capsys):
    code = PcopoCLI().run(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.mark.integration
class TestAnalyticCommands:
    def test_intensity(self, isolated, capsys):
        code, out, _ = run(["intensity", "--E", "0.92"], capsys)
        assert code == 0
        assert out.strip() == "5.51042"

    def test_threshold(self, isolated, capsys):
        code, out, _ = run(["threshold", "--M1", "0.5"], capsys)
        assert code == 0
        assert out.strip() == "1.030776"

    def test_relative_pump_flag(self, isolated, capsys):
        code, out, _ = run(["intensity", "--E-relative", "0.5", "--digits", "8"], capsys)
        assert code == 0
        assert float(out.strip()) == pytest.approx(0.25 / 0.75, rel=1e-7)

    def test_matrix_check(self, isolated, capsys):
        code, out, _ = run(["matrix-check", "--draws", "50"], capsys)
        assert code == 0
        assert float(out.splitlines()[0]) < 1e-10

    @pytest.mark.parametrize("argv", [
        ["steady", "--E", "0.5", "--M0", "0.5", "--harmonics", "3"],
        ["squeeze", "--E", "0.9", "--points", "31"],
        ["squeeze", "--E", "0.9", "--theta", "0.1", "--phi", "1.0"],
        ["duan", "--E", "0.9", "--points", "31", "--convention", "standard"],
        ["reid", "--E", "0.9", "--theta", "0.2", "--phi", "0.4"],
        ["twin", "--E", "0.7", "--M1", "0.5"],
    ])
    def test_reports(self, isolated, capsys, argv):
        code, out, _ = run(argv, capsys)
        assert code == 0
        assert out.strip()

    def test_spectrum_output(self, isolated, capsys):
        code, _, _ = run(["spectrum", "--E", "0.9", "--points", "11", "--output", "spectrum.json"], capsys)
        assert code == 0
        metadata, records = FileManager(str(isolated)).read_results("spectrum.json")
        assert len(records) == 11
        assert records[0]["observable"] == "spectrum"


@pytest.mark.integration
class TestExitCodes:
    def test_version(self, isolated, capsys):
        code, out, _ = run(["--version"], capsys)
        assert code == 0
        assert __version__ in out

    def test_no_command_shows_overview(self, isolated, capsys):
        code, out, _ = run([], capsys)
        assert code == 0
        assert "matrix-check" in out

    def test_unknown_command(self, isolated, capsys):
        code, _, _ = run(["frobnicate"], capsys)
        assert code == 2

    def test_bad_config(self, isolated, capsys):
        (isolated / "bad.yaml").write_text("model:\n  gain: 1\n")
        code, _, err = run(["--config", "bad.yaml", "intensity"], capsys)
        assert code == 3
        assert "line 2" in err

    def test_invalid_parameter(self, isolated, capsys):
        code, _, err = run(["intensity", "--M0", "-0.5"], capsys)
        assert code == 3
        assert "model.M0" in err

    def test_above_threshold(self, isolated, capsys):
        code, _, err = run(["intensity", "--E", "1.2"], capsys)
        assert code == 4
        assert "ThresholdError" in err

    def test_config_file_is_used(self, isolated, capsys):
        (isolated / "run.yaml").write_text("model:\n  E: 0.5\nlogging:\n  level: WARNING\n")
        code, out, _ = run(["--config", "run.yaml", "intensity"], capsys)
        assert code == 0
        assert float(out.strip()) == pytest.approx(1 / 3, rel=1e-5)


@pytest.mark.integration
class TestSweepCommands:
    def test_sweep_writes_csv(self, isolated, capsys):
        code, _, _ = run(["sweep", "--E", "0.8", "--axis", "M1=1.0:1.4:0.2", "--observable", "twin_beams",
                          "--output", "twin.csv"], capsys)
        assert code == 0
        metadata, rows = FileManager(str(isolated)).read_results("twin.csv")
        assert metadata["observable"] == "twin_beams"
        assert [row["M1"] for row in rows] == pytest.approx([1.0, 1.2, 1.4])
        assert rows[0]["normalized"] < 0 < rows[2]["normalized"]

    def test_malformed_axis(self, isolated, capsys):
        code, _, err = run(["sweep", "--axis", "M1", "--output", "x.csv"], capsys)
        assert code == 3
        assert "axis" in err

    def test_engine_mismatch(self, isolated, capsys):
        code, _, _ = run(["sweep", "--observable", "simulate", "--engine", "analytic", "--output", "x.csv"], capsys)
        assert code == 3

    def test_reproduce_figure(self, isolated, capsys):
        code, out, _ = run(["reproduce-figure", "fig3a", "--output-dir", "figs", "--no-plot"], capsys)
        assert code == 0
        assert sorted(p.name for p in (isolated / "figs").iterdir()) == ["fig3a.csv", "fig3a.json"]
