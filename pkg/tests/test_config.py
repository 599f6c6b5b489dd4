import pytest

from stosir.config import ConfigError, apply_overrides, load_config, parse_config

GOOD = """\
[model]
a1 = 3.0
b1 = 1.0
b2 = 1.0
sigma1 = 1.0
sigma2 = 1.0

[incidence]
kind = ratio_example
c = 1.0
m = 1.0

[run]
mode = classify
master_seed = 42
dt = 0.001
horizon = 200.0
n_paths = 16
burn_in = 50.0
output_dir = results
initial_s = 2.0
initial_i = 1.0
"""


class TestParse:
    def test_full_config(self):
        cfg = parse_config(GOOD)
        assert cfg.params.a1 == 3.0
        assert cfg.incidence_kind == "ratio_example"
        assert cfg.incidence.bound_k == 1.0
        assert cfg.mode == "classify"
        assert cfg.master_seed == 42
        assert cfg.horizon == 200.0
        assert cfg.n_paths == 16
        assert cfg.output_dir == "results"
        assert cfg.initial.s == 2.0

    def test_defaults(self):
        text = ("[model]\na1=3\nb1=1\nb2=1\nsigma1=1\nsigma2=1\n"
                "[incidence]\nkind = bilinear\nbeta = 2.0\n"
                "[run]\nmaster_seed = 7\n")
        cfg = parse_config(text)
        assert cfg.dt == 1e-3
        assert cfg.horizon is None
        assert cfg.n_paths == 200
        assert cfg.burn_in == 100.0
        assert cfg.output_dir == "out"
        assert cfg.mode is None

    def test_missing_master_seed_names_field(self):
        text = GOOD.replace("master_seed = 42\n", "")
        with pytest.raises(ConfigError, match=r"master_seed: required"):
            parse_config(text)

    def test_unknown_run_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(GOOD + "speed = 11\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match=r"unknown section"):
            parse_config(GOOD + "[plots]\nx = 1\n")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match=r"\[model\] a1"):
            parse_config(GOOD.replace("a1 = 3.0", "a1 = three"))

    def test_invalid_model_value(self):
        with pytest.raises(ConfigError, match=r"\[model\]"):
            parse_config(GOOD.replace("sigma1 = 1.0", "sigma1 = 0.0"))

    def test_invalid_incidence(self):
        with pytest.raises(ConfigError, match=r"\[incidence\]"):
            parse_config(GOOD.replace("kind = ratio_example", "kind = mystery"))

    def test_bad_mode(self):
        with pytest.raises(ConfigError, match="mode"):
            parse_config(GOOD.replace("mode = classify", "mode = warp"))

    def test_burn_in_must_precede_horizon(self):
        with pytest.raises(ConfigError, match="burn_in"):
            parse_config(GOOD.replace("burn_in = 50.0", "burn_in = 300.0"))

    def test_comments_allowed(self):
        cfg = parse_config(GOOD.replace("dt = 0.001", "dt = 0.001  # step"))
        assert cfg.dt == 1e-3

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.cfg")

    def test_load_roundtrip(self, tmp_path):
        f = tmp_path / "exp.cfg"
        f.write_text(GOOD)
        assert load_config(f).master_seed == 42


class TestOverrides:
    def test_apply(self):
        cfg = parse_config(GOOD)
        new = apply_overrides(cfg, seed=9, dt=0.01, horizon=50.0,
                              n_paths=3, output_dir="elsewhere")
        assert (new.master_seed, new.dt, new.horizon, new.n_paths,
                new.output_dir) == (9, 0.01, 50.0, 3, "elsewhere")
        # original untouched
        assert cfg.master_seed == 42

    def test_noop(self):
        cfg = parse_config(GOOD)
        assert apply_overrides(cfg) is cfg

    def test_invalid_override(self):
        cfg = parse_config(GOOD)
        with pytest.raises(ConfigError):
            apply_overrides(cfg, dt=-1.0)
        with pytest.raises(ConfigError):
            apply_overrides(cfg, seed=-2)
