"""Benchmark configuration: defaults, merging, overrides, validation."""

from __future__ import annotations

import datetime as dt
import json

import pytest

from floecast import BenchConfig, ConfigError, load_config
from floecast.config import DEFAULTS


def test_defaults_build_a_complete_config():
    cfg = BenchConfig.from_dict({})
    assert cfg.synth.shape == (56, 38)
    assert cfg.synth.n_days == 7305
    assert cfg.synth.start == dt.date(2000, 1, 1)
    assert cfg.rollout.n == cfg.rollout.p == 15
    assert cfg.rollout.n_rolls == 12
    assert cfg.rollout.horizon == 180
    assert cfg.backbones == [
        "persistence",
        "climatology",
        "sdap",
        "dlinear",
        "nlinear",
        "cyclenet",
        "scinet",
    ]
    assert cfg.evaluation.leads == (7, 15, 30, 180)
    assert cfg.evaluation.sio_leads == (30, 60, 90, 120)
    assert cfg.train.epochs == 10
    assert cfg.train.seed == 0
    assert cfg.splits is None
    assert cfg.compressor["kind"] == "eof"


def test_nested_overrides_merge_without_clobbering_siblings():
    cfg = BenchConfig.from_dict(
        {"synth": {"n_days": 400}, "train": {"lr": 5e-4}}
    )
    assert cfg.synth.n_days == 400
    assert cfg.synth.shape == (56, 38)  # sibling default survives
    assert cfg.train.lr == 5e-4
    assert cfg.train.epochs == 10
    # the source dict of DEFAULTS is never mutated
    assert DEFAULTS["synth"]["n_days"] == 7305


def test_command_line_sets_parse_json_then_fall_back_to_strings(tmp_path):
    path = tmp_path / "bench.json"
    path.write_text(json.dumps({"seed": 3}))
    cfg = load_config(
        path,
        overrides=[
            "train.epochs=2",
            "synth.shape=[20, 14]",
            "compressor.kind=eof",
            "rollout.decay=linear",
            "evaluation.leads=[7, 15]",
        ],
    )
    assert cfg.seed == 3
    assert cfg.train.seed == 3  # training seed follows the global seed
    assert cfg.train.epochs == 2
    assert cfg.synth.shape == (20, 14)
    assert cfg.compressor["kind"] == "eof"  # bare string value
    assert cfg.evaluation.leads == (7, 15)


def test_override_expression_validation():
    with pytest.raises(ConfigError):
        load_config(None, overrides=["train.epochs"])  # no '='
    with pytest.raises(ConfigError):
        load_config(None, overrides=["=5"])  # empty key
    cfg = load_config(None, overrides=["note=hello world"])  # new key is kept raw
    assert cfg.raw["note"] == "hello world"


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(arr)


def test_unknown_and_duplicate_backbones_are_rejected():
    with pytest.raises(ConfigError, match="unknown backbones"):
        BenchConfig.from_dict({"backbones": ["persistence", "prophet"]})
    with pytest.raises(ConfigError, match="duplicate"):
        BenchConfig.from_dict({"backbones": ["dlinear", "dlinear"]})


def test_compressor_kind_is_validated():
    with pytest.raises(ConfigError):
        BenchConfig.from_dict({"compressor": {"kind": "pca"}})
    cfg = BenchConfig.from_dict({"compressor": {"kind": "autoencoder"}})
    ae = cfg.autoencoder_config()
    assert ae.latent_dim == 32
    assert ae.seed == cfg.seed


def test_splits_parse_and_validate():
    cfg = BenchConfig.from_dict(
        {
            "splits": {
                "train": ["2000-01-01", "2011-12-31"],
                "val": ["2012-01-01", "2015-12-31"],
                "test": ["2016-01-01", "2019-12-31"],
            }
        }
    )
    assert cfg.splits.train.start == dt.date(2000, 1, 1)
    assert cfg.splits.test.end == dt.date(2019, 12, 31)
    with pytest.raises(ConfigError):
        BenchConfig.from_dict({"splits": {"train": ["2000-01-01", "2001-01-01"]}})
    with pytest.raises(ConfigError):
        BenchConfig.from_dict(
            {
                "splits": {
                    "train": ["2001-13-01", "2002-01-01"],
                    "val": ["2003-01-01", "2004-01-01"],
                    "test": ["2005-01-01", "2006-01-01"],
                }
            }
        )
    with pytest.raises(ConfigError):
        BenchConfig.from_dict(
            {
                "splits": {
                    "train": ["2002-01-01", "2001-01-01"],  # reversed
                    "val": ["2003-01-01", "2004-01-01"],
                    "test": ["2005-01-01", "2006-01-01"],
                }
            }
        )


def test_evaluation_leads_must_fit_the_horizon():
    with pytest.raises(ConfigError, match="exceed rollout horizon"):
        BenchConfig.from_dict(
            {
                "rollout": {"n": 15, "p": 15, "n_rolls": 2, "horizon": 30},
                "evaluation": {"leads": [7, 60]},
            }
        )
    cfg = BenchConfig.from_dict(
        {
            "rollout": {"n": 15, "p": 15, "n_rolls": 2, "horizon": 30},
            "evaluation": {"leads": [7, 30], "sio_leads": [15]},
        }
    )
    assert cfg.rollout.horizon == 30
    with pytest.raises(ConfigError):
        BenchConfig.from_dict({"evaluation": {"leads": [0]}})
    with pytest.raises(ConfigError):
        BenchConfig.from_dict({"evaluation": {"init_stride": 0}})


def test_bad_rollout_geometry_is_a_config_error():
    with pytest.raises(ConfigError, match="rollout"):
        BenchConfig.from_dict({"rollout": {"n_rolls": 11}})  # 165 < 180


def test_per_backbone_rollout_overlay():
    cfg = BenchConfig.from_dict({})
    shared = cfg.rollout_for("dlinear")
    assert shared == cfg.rollout  # no overlay: the shared geometry

    scinet = cfg.rollout_for("scinet")
    assert (scinet.n, scinet.p) == (12, 12)
    assert scinet.n_rolls == 15  # minimal covering of the shared horizon
    assert scinet.horizon == 180
    assert scinet.start_ratio == cfg.rollout.start_ratio


def test_backbone_overlay_respects_an_explicit_stage_count():
    cfg = BenchConfig.from_dict(
        {
            "rollout": {"n": 10, "p": 10, "n_rolls": 2, "horizon": 20},
            "evaluation": {"leads": [7, 15], "sio_leads": [10]},
            "backbone_configs": {
                "dlinear": {"rollout": {"n": 5, "p": 5, "n_rolls": 4}}
            },
        }
    )
    overlay = cfg.rollout_for("dlinear")
    assert (overlay.n, overlay.p, overlay.n_rolls) == (5, 5, 4)
    assert overlay.horizon == 20


def test_backbone_overlay_cannot_change_the_shared_horizon():
    with pytest.raises(ConfigError, match="horizon is shared"):
        BenchConfig.from_dict(
            {"backbone_configs": {"scinet": {"rollout": {"horizon": 90}}}}
        )


def test_backbone_overlay_for_unknown_backbone_is_rejected():
    with pytest.raises(ConfigError, match="unknown backbones"):
        BenchConfig.from_dict(
            {"backbone_configs": {"prophet": {"rollout": {"n": 4}}}}
        )


def test_backbone_overlay_geometry_is_validated_eagerly():
    # five 15-step stages cannot cover the 180-day horizon; the bad overlay
    # is caught when the config loads, not when the backbone finally runs
    with pytest.raises(ConfigError, match="backbone_configs.scinet.rollout"):
        BenchConfig.from_dict(
            {
                "backbone_configs": {
                    "scinet": {"rollout": {"n": 15, "p": 15, "n_rolls": 5}}
                }
            }
        )


def test_synth_validation_is_wrapped_as_config_errors():
    with pytest.raises(ConfigError, match="synth"):
        BenchConfig.from_dict({"synth": {"start": "not-a-date"}})
    with pytest.raises(ConfigError, match="synth"):
        BenchConfig.from_dict({"synth": {"n_days": 0}})
    with pytest.raises(ConfigError, match="train"):
        BenchConfig.from_dict({"train": {"epochs": 0}})
