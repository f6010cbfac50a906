import json
import os

import pytest

from bangbang_ipeps.errors import ConfigError
from bangbang_ipeps.settings import BaseSettings, BoundaryOptions, RunConfig, SettingsConfigDict


@pytest.fixture(autouse=True)
def isolated(clean_env):
    return clean_env


def test_defaults():
    config = RunConfig()
    assert (config.g, config.J, config.D_max, config.chi) == (3.1, 1.0, 8, 40)
    assert config.variant == "para_target"
    assert config.field == 3.1
    assert config.boundary == BoundaryOptions()


def test_critical_field_for_the_ferro_variant():
    assert RunConfig(variant="para_to_ferro").field == pytest.approx(3.04438)


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("BANGBANG_CHI", "16")
    monkeypatch.setenv("BANGBANG_THREADS", "4")
    monkeypatch.setenv("BANGBANG_BOUNDARY__TOL", "1e-8")
    config = RunConfig()
    assert config.chi == 16
    assert config.threads == 4
    assert config.boundary.tol == 1e-8
    assert config.boundary.max_iter == BoundaryOptions().max_iter


def test_explicit_values_win(monkeypatch):
    monkeypatch.setenv("BANGBANG_CHI", "16")
    assert RunConfig(chi=24).chi == 24


def test_dotenv_file(isolated):
    (isolated / ".env").write_text("BANGBANG_SEED=7\n")
    try:
        assert RunConfig().seed == 7
    finally:
        os.environ.pop("BANGBANG_SEED", None)


@pytest.mark.parametrize("values,field", [
    ({"J": 2.0}, "J"),
    ({"chi": "abc"}, "chi"),
    ({"N": 0}, "N"),
    ({"variant": "ferro_to_para"}, "variant"),
    ({"boundary": {"tol": "x"}}, "boundary"),
])
def test_validation_names_the_field(values, field):
    with pytest.raises(ConfigError, match=field):
        RunConfig(**values)


def test_unknown_fields_rejected():
    with pytest.raises(ConfigError, match="chii"):
        RunConfig(chii=3)


def test_nested_groups_reject_unknown_keys():
    with pytest.raises(ConfigError, match="ntu"):
        RunConfig(ntu={"sweep": 3})


def test_bad_environment_value(monkeypatch):
    monkeypatch.setenv("BANGBANG_OPTIMIZER", "{broken")
    with pytest.raises(ConfigError, match="BANGBANG_OPTIMIZER"):
        RunConfig()


def test_from_file(isolated):
    path = isolated / "run.json"
    path.write_text(json.dumps({"g": 2.0, "N": 3, "optimizer": {"max_evals": 50}}))
    config = RunConfig.from_file(str(path), N=4, chi=None)
    assert config.g == 2.0
    assert config.N == 4
    assert config.chi == 40
    assert config.optimizer.max_evals == 50


def test_from_file_errors(isolated):
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(isolated / "missing.json"))
    (isolated / "list.json").write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        RunConfig.from_file(str(isolated / "list.json"))


def test_dump_and_schema():
    config = RunConfig(seed=5)
    dumped = json.loads(config.model_dump_json())
    assert dumped["seed"] == 5
    assert dumped["boundary"]["eig_tol"] == 1e-12
    assert "chi" in config.schema()["properties"]


def test_custom_settings_class(monkeypatch):
    class Worker(BaseSettings):
        model_config = SettingsConfigDict(env_prefix="WORKER_")

        name: str
        retries: int = 3

    monkeypatch.setenv("WORKER_NAME", "alpha")
    worker = Worker()
    assert worker.name == "alpha" and worker.retries == 3
    monkeypatch.delenv("WORKER_NAME")
    with pytest.raises(ConfigError, match="name"):
        Worker()
