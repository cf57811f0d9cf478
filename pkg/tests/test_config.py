import pytest

from semlp.config import RunConfig, dump_run_config, load_run_config
from semlp.errors import ConfigError


def test_defaults_without_file():
    cfg = load_run_config(None)
    assert cfg == RunConfig()
    assert cfg.train.batch_size == 32 and cfg.train.plateau_patience == 15
    assert cfg.model.reduction_ratio == 2


def test_dump_load_round_trip(tmp_path):
    cfg = RunConfig()
    cfg.apply_seed(7)
    cfg.variant = "mlp-se"
    cfg.train.max_epochs = 5
    cfg.model.hidden_dims = (16, 16, 16)
    cfg.generator.noise_enabled = False
    path = tmp_path / "run.cfg"
    path.write_text(dump_run_config(cfg))
    back = load_run_config(path)
    assert back == cfg
    assert dump_run_config(back) == path.read_text()


def test_every_config_field_is_written():
    text = dump_run_config(RunConfig())
    for key in ("C_p", "noise_sigma_width", "v_min", "lr_floor", "betas", "reduction_ratio", "velocity_step"):
        assert f"\n{key} = " in text


def test_seed_drives_every_stream():
    cfg = RunConfig().apply_seed(11)
    assert cfg.generator.seed == cfg.train.seed == 11


@pytest.mark.parametrize(
    "text, match",
    [
        ("[train]\nbogus = 1\n", "unknown key"),
        ("[nope]\nx = 1\n", "unknown section"),
        ("[train]\nmax_epochs = many\n", "max_epochs"),
        ("[generator]\nnoise_enabled = perhaps\n", "boolean"),
        ("not an ini file", "bad.cfg"),
    ],
)
def test_malformed_files(tmp_path, text, match):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_run_config(path)


@pytest.mark.parametrize(
    "text",
    [
        "[grid]\nvelocity_max = 2000\n",
        "[train]\nloss_weights = 0.6, 0.6\n",
        "[model]\nhidden_dims = 64, 63, 64\n",
        "[run]\nvariant = resnet\n",
    ],
)
def test_invalid_values_fail_validation(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_run_config(path).validate()


def test_missing_file():
    with pytest.raises(ConfigError):
        load_run_config("/nonexistent/run.cfg")
