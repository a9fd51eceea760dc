import pytest

from nehari_linking.config import DEFAULT_TEXT, SCHEMA, load_config, parse_config
from nehari_linking.errors import ConfigError


def test_default_text_parses():
    cfg = parse_config(DEFAULT_TEXT).validate()
    assert cfg.problem["rho"] == 1.0 and cfg.linking["R_list"] == [8.0, 12.0, 16.0]
    assert cfg.output["formats"] == ["json", "csv"]
    assert set(cfg.values) == set(SCHEMA)


def test_hash_is_stable_and_sensitive():
    a = parse_config(DEFAULT_TEXT)
    b = parse_config("# reordered\n" + "\n".join(reversed(DEFAULT_TEXT.splitlines())))
    assert a.hash() == b.hash() and len(a.hash()) == 16
    assert a.with_overrides(solver__seed=5).hash() != a.hash()
    assert a.with_overrides(**{"solver.seed": 5})["solver.seed"] == 5


def test_missing_required_field():
    text = DEFAULT_TEXT.replace("problem.h = 0.1\n", "")
    with pytest.raises(ConfigError, match="missing required field problem.h"):
        parse_config(text)


@pytest.mark.parametrize("line,match", [
    ("problem.colour = red", "unknown key"),
    ("solver.band = wide", "bad value"),
    ("just text", "expected"),
    ("problem.N = 2", "duplicate"),
])
def test_errors_carry_line_numbers(line, match):
    text = DEFAULT_TEXT + line + "\n"
    n = len(text.splitlines())
    with pytest.raises(ConfigError, match=match) as err:
        parse_config(text, "desk.conf")
    assert f"desk.conf:{n}:" in str(err.value)


@pytest.mark.parametrize("key,value,match", [
    ("problem.s", "2.0", "s\\*lambda"),
    ("problem.h", "0.3", "problem.h"),
    ("problem.rho", "12", "problem.rho"),
    ("linking.t_samples", "20", "odd"),
    ("linking.y_samples", "5", "even"),
    ("linking.x0", "1, 1", "unit vector"),
    ("linking.R_list", "2, 8", "R_list"),
    ("solver.seed", "-1", "unsigned"),
])
def test_validation(key, value, match):
    lines = [ln for ln in DEFAULT_TEXT.splitlines() if not ln.startswith(key + " ")]
    lines.append(f"{key} = {value}")
    with pytest.raises(ConfigError, match=match) as err:
        parse_config("\n".join(lines), "c.conf").validate()
    assert f"line {len(lines)}" in str(err.value)


def test_audit_may_load_inadmissible(tmp_path):
    p = tmp_path / "bad.conf"
    p.write_text(DEFAULT_TEXT.replace("problem.s = 0.5", "problem.s = 2.0"))
    with pytest.raises(ConfigError):
        load_config(p)
    assert load_config(p, check_admissible=False).problem["s"] == 2.0
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.conf")
