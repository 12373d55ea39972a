import pytest

from wingfuse.config import RunConfig, load_config
from wingfuse.errors import ConfigError


def test_defaults_build_module_configs():
    cfg = RunConfig()
    assert cfg.chain().segment_len == 8192
    assert cfg.trigger().flash_duration_s == 500e-6
    assert cfg.svm_config().batch_size is None
    assert cfg.fusion_config().hidden == 16
    assert cfg.feature_config().wingbeat_dim == 36


def test_load_flat_toml(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('seed = 4\nsegment_len = 4096\nwindow = "rect"\nsvm_lambda = 1e-2\nfusion_lr = 1\n')
    cfg = load_config(p)
    assert cfg.seed == 4 and cfg.chain().window == "rect"
    assert cfg.svm_config().seed == 4 and cfg.fusion_config().seed == 4
    assert isinstance(cfg.fusion_lr, float)
    assert load_config(None) == RunConfig()


@pytest.mark.parametrize(
    "text",
    [
        "colour = 1\n",
        "[svm]\nlam = 1\n",
        "segment_len = 4.5\n",
        "segment_len = 8\n",
        "overlap_fraction = 0.95\n",
        "overlap_fraction = 1.0\n",
        "window = 'kaiser'\n",
        "search_band_low_hz = 900.0\nsearch_band_high_hz = 100.0\n",
        "beam_threshold = 1.5\n",
        "svm_lambda = 0\n",
        "fusion_momentum = 1.0\n",
        "seed = true\n",
        "seed = = 1\n",
    ],
)
def test_invalid_configs(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.toml")


def test_overrides_ignore_none():
    assert RunConfig().with_overrides(seed=None) == RunConfig()
    assert RunConfig().with_overrides(seed=3).seed == 3
