import math

import pytest
from hypothesis import given, strategies as st

from exitflow.config import ConfigError, load_config, parse_floats


def test_named_domains_and_stages():
    cfg = load_config(
        "[plan]\nstages = solve, verify\n"
        "[domain:a]\nkind = ellipse\na = 3\nb = 1\nn = 64\n"
        "[domain:b]\nkind = square\nlx = 2\nn = 32\n"
    )
    assert cfg.stages() == ["solve", "verify"]
    a, b = cfg.domains["domain:a"], cfg.domains["domain:b"]
    assert a.kind == "ellipse" and a.params["a"] == 3.0 and a.nx == 64
    assert b.kind == "rectangle" and b.params["ly"] == 2.0


def test_config_from_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[domain]\nkind = disc\nr = 2\n")
    cfg = load_config(str(p))
    assert cfg.domain.params["r"] == 2.0
    assert cfg.stages() == []


@pytest.mark.parametrize(
    "text",
    [
        "[plan]\nstages = solve, solve\n",
        "[plan]\nstages = bake\n",
    ],
)
def test_bad_plans(text):
    with pytest.raises(ConfigError):
        load_config(text).stages()


def test_bad_domains():
    with pytest.raises(ConfigError):
        load_config("[domain]\nkind = torus\n")
    with pytest.raises(ConfigError):
        load_config("[domain]\nkind = implicit\nexpr = x - 1\n")
    with pytest.raises(ConfigError):
        load_config("[domain]\nkind = implicit\nexpr = x - 1\nbbox = 0, 1\n")
    with pytest.raises(ConfigError):
        load_config("[solve]\namplitude = 1\n").domain
    with pytest.raises(ConfigError):
        load_config("/nonexistent/file.ini")


def test_parse_floats_accepts_inf():
    assert parse_floats("1, 2; inf") == [1.0, 2.0, math.inf]
    with pytest.raises(ValueError):
        parse_floats("inf", allow_inf=False)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), max_size=8))
def test_parse_floats_round_trip(xs):
    assert parse_floats(", ".join(repr(x) for x in xs)) == xs
