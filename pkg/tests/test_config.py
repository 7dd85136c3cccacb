"""Run-configuration parsing, canonical form, and derived builders."""

import dataclasses

import pytest

from evifuse.config import ConfigError, RunConfig


def test_defaults_are_valid():
    cfg = RunConfig()
    assert cfg.data == "synthetic"
    assert cfg.views == 3 and cfg.classes == 4
    assert cfg.dim == (10,) and cfg.hidden == (64,)
    assert cfg.normalize_inputs is True


def test_from_text_parses_comments_and_overrides():
    cfg = RunConfig.from_text(
        """
        # experiment geometry
        views = 2
        classes = 3
        dim = 5, 7
        hidden = 32, 16
        noise_fraction = 0.5    # half the test set
        normalize_inputs = false
        """,
        source="inline",
    )
    assert cfg.views == 2
    assert cfg.dim == (5, 7)
    assert cfg.hidden == (32, 16)
    assert cfg.noise_fraction == 0.5
    assert cfg.normalize_inputs is False


def test_from_text_unknown_key_names_source_and_line():
    with pytest.raises(ConfigError, match=r"inline:3: unknown key"):
        RunConfig.from_text("\nviews = 2\nbogus = 1\n", source="inline")


def test_from_text_repeated_key():
    with pytest.raises(ConfigError, match=r"inline:3: repeated key"):
        RunConfig.from_text("\nviews = 2\nviews = 3\n", source="inline")


def test_from_text_bad_value():
    with pytest.raises(ConfigError, match=r"inline:2"):
        RunConfig.from_text("\nepochs = many\n", source="inline")


def test_from_text_missing_equals():
    with pytest.raises(ConfigError, match=r"inline:2"):
        RunConfig.from_text("\nviews 2\n", source="inline")


def test_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 11\nepochs = 3\n")
    cfg = RunConfig.from_file(path)
    assert cfg.seed == 11 and cfg.epochs == 3


def test_csv_data_requires_directory():
    with pytest.raises(ConfigError, match="data_dir"):
        RunConfig(data="csv")
    cfg = RunConfig(data="csv", data_dir="somewhere")
    assert cfg.data_dir == "somewhere"


def test_validation_rejects_bad_numbers():
    for kwargs in (
        {"views": 0},
        {"classes": 1},
        {"instances": 0},
        {"separation": -1.0},
        {"train_fraction": 1.0},
        {"learning_rate": 0.0},
        {"epochs": 0},
        {"batch_size": 0},
        {"anneal_epochs": -1},
        {"beta": -0.5},
        {"gamma": -0.5},
        {"noise_fraction": 1.5},
        {"noise_sigma": -1.0},
        {"unaligned_fraction": -0.1},
        {"runs": 0},
        {"head": "sigmoid"},
        {"optimizer": "lbfgs"},
        {"data": "parquet"},
        {"dim": (3, 3)},    # 2 entries for 3 views
    ):
        with pytest.raises(ConfigError):
            RunConfig(**kwargs)


def test_canonical_round_trips():
    cfg = RunConfig(views=2, dim=(4, 6), hidden=(8,), noise_fraction=0.25, seed=7)
    text = cfg.canonical()
    again = RunConfig.from_text(text, source="canon")
    assert again == cfg
    assert again.canonical() == text
    lines = text.strip().splitlines()
    assert lines == sorted(lines)


def test_config_hash_stable_and_ignores_output_dir():
    a = RunConfig(seed=5)
    b = RunConfig(seed=5, output_dir="elsewhere")
    c = RunConfig(seed=6)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 12


def test_with_overrides():
    cfg = RunConfig().with_overrides(seed=9, epochs=2)
    assert cfg.seed == 9 and cfg.epochs == 2
    assert dataclasses.replace(cfg) == cfg
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(epochs=0)


def test_builders_wire_through():
    cfg = RunConfig(
        views=2, classes=3, dim=(4, 6), hidden=(8, 5),
        head="relu", optimizer="sgd", learning_rate=0.01,
        epochs=7, batch_size=16, seed=13, anneal_epochs=4,
        beta=0.5, gamma=2.0, train_fraction=0.7,
    )
    assert cfg.view_dims() == (4, 6)
    lc = cfg.loss_config()
    assert (lc.T, lc.beta, lc.gamma) == (4, 0.5, 2.0)
    sp = cfg.split_spec()
    assert (sp.train_fraction, sp.seed) == (0.7, 13)
    nc = cfg.net_config(cfg.view_dims(), cfg.classes)
    assert nc.layer_sizes == ((4, 8, 5, 3), (6, 8, 5, 3))
    assert nc.head == "relu" and nc.optimizer == "sgd"
    assert nc.seed == 13 and nc.epochs == 7


def test_single_dim_broadcasts_to_all_views():
    cfg = RunConfig(views=3, dim=(5,))
    assert cfg.view_dims() == (5, 5, 5)
