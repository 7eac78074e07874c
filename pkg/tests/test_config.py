import pytest
from hypothesis import given, strategies as st

from springbike.config import DEFAULT_CONFIG_PATH, DEFAULTS, Config, load_config
from springbike.errors import ConfigError


def test_shipped_file_matches_builtin_defaults():
    assert Config.from_file(DEFAULT_CONFIG_PATH) == Config()


def test_serialisation_is_idempotent():
    cfg = Config.from_file(DEFAULT_CONFIG_PATH)
    text = cfg.to_ini()
    again = Config.from_string(text)
    assert again == cfg
    assert again.to_ini() == text


@given(st.floats(10, 60), st.floats(3.0, 6.0), st.integers(0, 10_000))
def test_round_trip_with_edits(mass, rate, seed):
    cfg = Config().with_overrides({"bike.mass": repr(mass), "spring.rate_per_degree": repr(rate),
                                   "mission.seed": str(seed)})
    assert Config.from_string(cfg.to_ini()) == cfg
    assert cfg.bike.mass == mass and cfg.mission.seed == seed


def test_every_key_is_in_the_shipped_file():
    text = DEFAULT_CONFIG_PATH.read_text()
    for section, items in DEFAULTS.items():
        assert f"[{section}]" in text
        for key in items:
            assert f"\n{key} =" in text, f"{section}.{key}"


def test_unknown_key_reports_line_and_field():
    with pytest.raises(ConfigError) as info:
        Config.from_string("[bike]\nmass = 25\nfoo = 1\n")
    assert info.value.line == 3 and info.value.field == "bike.foo"


def test_unknown_section_rejected():
    with pytest.raises(ConfigError) as info:
        Config.from_string("[engine]\nhp = 3\n")
    assert info.value.field == "engine" and info.value.line == 1


def test_bad_value_reports_key():
    with pytest.raises(ConfigError) as info:
        Config.from_string("[plant]\n\ndamping = soft\n")
    assert info.value.line == 3 and info.value.field == "plant.damping"


def test_invariant_violation_names_section():
    with pytest.raises(ConfigError) as info:
        Config.from_string("[bike]\nmass = -3\n")
    assert info.value.field == "bike"


def test_missing_header_is_a_config_error():
    with pytest.raises(ConfigError):
        Config.from_string("mass = 3\n")


def test_overrides():
    cfg = load_config(None, {"spring.rate_per_degree": "2.45"})
    assert cfg.spring.rate_per_degree == pytest.approx(2.45)
    with pytest.raises(ConfigError):
        Config().with_overrides({"spring.colour": "red"})
    with pytest.raises(ConfigError):
        Config().with_overrides({"mission.noise": "maybe"})


def test_missing_file():
    with pytest.raises(ConfigError):
        Config.from_file("/nonexistent/springbike.ini")


def test_thresholds_must_be_ordered():
    with pytest.raises(ConfigError):
        Config().with_overrides({"avoidance.stop_threshold": "4.0"})
