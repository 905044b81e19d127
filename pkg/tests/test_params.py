import json

import pytest
from pydantic import ValidationError

from core.errors import ConfigError
from core.params import MaterialParams, RunConfig, SolverConfig, load_run_config


def write_config(path, **values):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(values, f)
    return path


class TestConfigLoading:

    def test_missing_keys_take_defaults(self, tmp_path):
        run = load_run_config(write_config(tmp_path / "run.json", tau=0.05))
        assert run.kappa == pytest.approx(1.57e-2)
        assert run.material().M == pytest.approx(3.9e7)
        assert run.solver().n_steps == 20

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(write_config(tmp_path / "run.json", permeability=1.0))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{tau: ", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_invalid_utf8(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_bytes(b'{"tau": 0.1, "output": "\xff\xfe"}')
        with pytest.raises(ConfigError) as err:
            load_run_config(path)
        assert "Malformed config" in str(err.value)

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(path)

    @pytest.mark.parametrize("values", [
        {"kappa": -1.0},
        {"nu": 0.5},
        {"tau": 0.3, "T": 1.0},
        {"segment_a": [0.5, 0.5, 0.5], "segment_b": [0.5, 0.5, 0.5]},
        {"mesh_size": 0},
    ])
    def test_invalid_values(self, tmp_path, values):
        with pytest.raises(ConfigError):
            load_run_config(write_config(tmp_path / "run.json", **values))


class TestMaterialParams:

    def test_lame_parameters(self):
        params = RunConfig().material()
        assert params.mu == pytest.approx(6.25e5)
        assert params.lam == pytest.approx(4.1666666666e5)
        assert params.beta_FS == pytest.approx(1.0 / (1.5 * (6.25e5 + 4.1666666666e5)))

    def test_frozen(self):
        params = MaterialParams()
        with pytest.raises(ValidationError):
            params.kappa = 1.0

    def test_step_count(self):
        assert SolverConfig(tau=0.25, T=1.0).n_steps == 4
