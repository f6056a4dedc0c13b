import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgn import config


def test_defaults_validate_once_data_given():
    cfg = config.from_dict({"data": {"train": "x"}})
    cfg.validate()
    assert cfg.layer_dims(784) == [100, 300, 784]
    assert cfg.train_config().seeds.shuffle == 2


def test_missing_train_path_is_an_error():
    with pytest.raises(config.ConfigError, match="data.train"):
        config.from_dict({}).validate()


@pytest.mark.parametrize("raw, msg", [
    ({"nope": 1}, "unknown key"),
    ({"train": {"grad_nrom": "none"}}, "unknown key"),
    ({"train": {"B": 1.5}}, "train.B"),
    ({"train": "fast"}, "must be a mapping"),
])
def test_bad_documents(raw, msg):
    with pytest.raises(config.ConfigError, match=msg):
        config.from_dict(raw)


@pytest.mark.parametrize("key, value", [
    ("train.grad_norm", "sideways"), ("latent.kind", "beta"), ("train.latent_refresh", "never"),
    ("network.output_bias", "random"), ("train.eta", "0"),
])
def test_bad_values_fail_validation(key, value):
    cfg = config.apply_overrides({"data": {"train": "x"}}, [f"{key}={value}"])
    with pytest.raises(config.ConfigError):
        cfg.validate()


def test_override_syntax():
    with pytest.raises(config.ConfigError, match="section.key=value"):
        config.apply_overrides({}, ["eta=0.1"])
    cfg = config.apply_overrides({"network": {"hidden": [300]}}, ["network.hidden=[20, 10]"])
    assert cfg.network.hidden == [20, 10]


@given(st.integers(1, 10**6), st.integers(1, 10**6), st.floats(1e-4, 10.0),
       st.sampled_from(["uniform", "gm"]), st.booleans())
def test_dump_load_round_trip(n, b, eta, kind, at_end):
    cfg = config.from_dict({"train": {"N": n, "B": b, "eta": eta}, "latent": {"kind": kind},
                            "eval": {"at_end": at_end}, "data": {"train": "d"}})
    import yaml
    again = config.from_dict(yaml.safe_load(cfg.dump()))
    assert again == cfg
