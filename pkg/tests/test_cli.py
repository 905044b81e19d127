import argparse
import json

import pytest

import config
from biot_runner import build_parser, main, parse_levels


def write_config(path, **values):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(values, f)
    return path


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "LOG_DIR", str(tmp_path / "logs"))
    return tmp_path / "logs"


class TestArguments:

    def test_levels(self):
        assert parse_levels("8,16,32") == [8, 16, 32]

    @pytest.mark.parametrize("text", ["", "8,x", "0,4"])
    def test_bad_levels(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_levels(text)

    def test_converge_defaults(self):
        args = build_parser().parse_args(["converge"])
        assert args.levels == [8, 16, 32]
        assert args.jobs == 1

    def test_missing_command(self):
        assert main([]) == 2


@pytest.mark.harness
class TestMain:

    def test_bad_config_fails(self, tmp_path, log_dir):
        path = write_config(tmp_path / "run.json", kappa=0.0)
        assert main(["solve", "--quiet", "--config", str(path)]) == 1
        assert (log_dir / config.LOG_FILE).exists()

    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--quiet", "--config", str(tmp_path / "absent.json")]) == 1

    def test_undecodable_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_bytes(b"{\"kappa\": \xff}")
        assert main(["solve", "--quiet", "--config", str(path)]) == 1

    def test_invalid_override(self):
        assert main(["solve", "--quiet", "--tau", "0.3"]) == 1

    def test_solve_and_export(self, tmp_path, capsys):
        path = write_config(tmp_path / "run.json", mesh_size=2, tau=0.1, T=0.2)
        out = tmp_path / "fields.vtk"
        assert main(["solve", "--quiet", "--config", str(path), "--export", str(out)]) == 0
        assert out.exists()
        assert "t=0.200" in capsys.readouterr().out

    def test_converge_writes_report(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        code = main(["converge", "--quiet", "--levels", "2,3", "--T", "0.1", "--report", str(report)])
        assert code == 0
        with open(report, "r", encoding="utf-8") as f:
            assert [lv["n"] for lv in json.load(f)["levels"]] == [2, 3]
        assert "Rate" in capsys.readouterr().out

    @pytest.mark.oracle
    def test_verify_quick(self, capsys):
        assert main(["verify", "--quick"]) == 0
        assert "FAIL" not in capsys.readouterr().out
