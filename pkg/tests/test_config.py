import pytest

from winoc_dtm.config import derive_seed, parse_config
from winoc_dtm.errors import ConfigurationError


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("")
    st = parse_config(p)
    cfg = st.experiment()
    assert (cfg.grid_w, cfg.grid_h) == (8, 8)
    assert cfg.dtm.t_th == 68.0 and cfg.dtm.window == 100_000
    assert cfg.duration == 2_000_000


def test_override_shows_in_echo():
    st = parse_config(None, ["t_th=64"])
    assert st.experiment().dtm.t_th == 64.0
    assert "t_th = 64.0" in st.to_ini()


def test_file_then_overrides(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[dtm]\nt_th = 66\nvariant = reroute_only\n")
    st = parse_config(p, ["dtm.t_th=65"])
    assert st["dtm"]["t_th"] == 65.0 and st["dtm"]["variant"] == "reroute_only"


def test_echo_reproduces_settings(tmp_path):
    st = parse_config(None, ["grid_w=6", "topology.wi_positions=3 9", "experiment.seed=7"])
    p = tmp_path / "echo.ini"
    p.write_text(st.to_ini())
    again = parse_config(p)
    assert again.values == st.values
    assert again.experiment().digest() == st.experiment().digest()


@pytest.mark.parametrize("ov, needle", [
    (["grid_w=1"], "grid_w >= 2"),
    (["bogus=1"], "bogus"),
    (["dtm.nope=1"], "dtm.nope"),
    (["grid_w=abc"], "grid_w"),
    (["injection_rate=2"], "injection_rate"),
    (["seed=1"], "ambiguous"),
    (["t_th"], "key=value"),
])
def test_errors_name_the_key(ov, needle):
    with pytest.raises(ConfigurationError, match=needle):
        parse_config(None, ov).experiment()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        parse_config(tmp_path / "nope.ini")


def test_unknown_section(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[nosuch]\na = 1\n")
    with pytest.raises(ConfigurationError, match="nosuch"):
        parse_config(p)


def test_seeds_split_by_label():
    st = parse_config(None, ["experiment.seed=3"])
    assert st.seed("traffic") == derive_seed(3, "traffic")
    assert st.seed("traffic") != st.seed("dataset")
    assert parse_config(None, ["traffic.seed=11"]).seed("traffic") == 11
    assert derive_seed(3, "x") == derive_seed(3, "x")
