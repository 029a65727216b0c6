import pytest

from sgm_schedules import config
from sgm_schedules.errors import ConfigError
from sgm_schedules.models import ExperimentConfig, load_config, parse_config_text, serialize_config

SAMPLE = """\
# iso sweep
schedule.beta1 = 15
target.kind = corr
target.dim = 3
target.mu = 1, 2, 3
experiment.bound = w2
experiment.eps = estimate
experiment.metrics = gauss-kl, sliced-w2
output.log-scale = true
"""


def test_parse_values():
    cfg = parse_config_text(SAMPLE)
    assert cfg.schedule.beta1 == 15.0
    assert cfg.target.kind == "corr"
    assert cfg.target.mu == [1.0, 2.0, 3.0]
    assert cfg.experiment.metrics == ["gauss-kl", "sliced-w2"]
    assert cfg.output.log_scale is True
    assert cfg.grid.steps == 500


def test_serialize_round_trip():
    cfg = parse_config_text(SAMPLE)
    assert parse_config_text(serialize_config(cfg)) == cfg
    assert parse_config_text(serialize_config(ExperimentConfig())) == ExperimentConfig()


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("target.dim = 3\nschedule.foo = 1\n", 2, "schedule.foo"),
        ("target.dim = 3\n\ntarget.dim = 4\n", 3, "target.dim"),
        ("target.dim = 0\n", 1, "target.dim"),
        ("grid.steps = 10\nexperiment.metrics = gauss-kl, energy\n", 2, "experiment.metrics"),
        ("experiment.eps = -1\n", 1, "experiment.eps"),
    ],
)
def test_errors_name_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert exc.value.line == line
    assert exc.value.key == key


def test_malformed_line():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("target.dim = 3\njust words\n")
    assert exc.value.line == 2


def test_section_validator_reports_section_line():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("target.dim = 3\nsweep.a-min = 2\nsweep.a-max = 1\n")
    assert exc.value.line == 2


def test_missing_sigma_file(tmp_path):
    path = tmp_path / "custom.cfg"
    path.write_text("target.kind = custom-gaussian\ntarget.dim = 2\ntarget.sigma-file = nope.bin\n")
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert exc.value.line == 3
    assert exc.value.key == "target.sigma-file"


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


@pytest.mark.parametrize("path", sorted(config.CONFIG_DIR.glob("*.cfg")), ids=lambda p: p.name)
def test_bundled_configs_load(path):
    cfg = load_config(path)
    assert cfg.output.dir.startswith("outputs/")
