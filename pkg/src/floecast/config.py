"""Benchmark configuration: one JSON file, any key overridable from the
command line with `--set dotted.key=value`."""

from __future__ import annotations

import copy
import dataclasses
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .backbones import GRID_BACKBONES, LATENT_BACKBONES, TrainConfig
from .grids import DateRange, Splits, SynthConfig
from .latent import AutoencoderConfig
from .rollout import RolloutConfig


class ConfigError(ValueError):
    """Malformed or inconsistent benchmark configuration."""


DEFAULTS: dict[str, Any] = {
    "archive": "archive",
    "out_dir": "out",
    "seed": 0,
    "splits": None,
    "synth": {
        "shape": [56, 38],
        "n_days": 7305,
        "start": "2000-01-01",
        "seasonal_amp": 0.2,
        "trend_per_year": 0.0,
        "ar1_rho": 0.8,
        "noise_sd": 0.02,
        "noise_spatial_scale": 0.0,
        "pole_hole_size": 0,
        "seed": 0,
    },
    "compressor": {
        "kind": "eof",
        "latent_dim": 32,
        # autoencoder-only knobs below
        "n_stages": 2,
        "base_channels": 8,
        "mlp_ratio": 2.0,
        "epochs": 30,
        "batch_size": 16,
        "lr": 2e-3,
        "val_fraction": 0.1,
    },
    "backbones": [
        "persistence",
        "climatology",
        "sdap",
        "dlinear",
        "nlinear",
        "cyclenet",
        "scinet",
    ],
    # scinet halves its window recursively, so its geometry must be even;
    # 12-step stages cover the shared horizon (15 of them for 180 days).
    "backbone_configs": {"scinet": {"rollout": {"n": 12, "p": 12}}},
    "rollout": {
        "n": 15,
        "p": 15,
        "n_rolls": 12,
        "horizon": 180,
        "start_ratio": 1.0,
        "end_ratio": 0.0,
        "decay": "linear",
    },
    "train": {
        "epochs": 10,
        "batch_size": 32,
        "lr": 1e-3,
        "patience": 5,
        "max_val_starts": 48,
    },
    "sdap": {"max_lead": 180, "min_pairs": 100},
    "evaluation": {
        "leads": [7, 15, 30, 180],
        "monthly_blocks": 6,
        "block_days": 30,
        "sio_leads": [30, 60, 90, 120],
        "init_stride": 15,
        "extremes_init_offset": 31,
        "sio_reference": None,
    },
    "windows": {"windows": [7, 15], "backbone": "dlinear"},
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_override(expr: str) -> tuple[list[str], Any]:
    if "=" not in expr:
        raise ConfigError(f"--set needs key=value, got {expr!r}")
    key, raw = expr.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"--set needs a nonempty key, got {expr!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def _apply_override(data: dict, path: list[str], value: Any) -> None:
    node = data
    for part in path[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[path[-1]] = value


def _date(value: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad date {value!r}") from exc


def _date_range(pair, where: str) -> DateRange:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ConfigError(f"{where}: expected [start, end], got {pair!r}")
    try:
        return DateRange(_date(pair[0], where), _date(pair[1], where))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class EvalConfig:
    leads: tuple[int, ...] = (7, 15, 30, 180)
    monthly_blocks: int = 6
    block_days: int = 30
    sio_leads: tuple[int, ...] = (30, 60, 90, 120)
    init_stride: int = 15
    extremes_init_offset: int = 31
    sio_reference: str | None = None

    def __post_init__(self) -> None:
        if any(not 1 <= lead <= 180 for lead in self.leads):
            raise ConfigError(f"evaluation leads must be within 1..180: {self.leads}")
        if self.init_stride < 1:
            raise ConfigError(f"init_stride must be >= 1, got {self.init_stride}")
        if self.monthly_blocks < 1 or self.block_days < 1:
            raise ConfigError(
                f"monthly_blocks/block_days must be >= 1, got "
                f"{self.monthly_blocks}/{self.block_days}"
            )


@dataclass
class BenchConfig:
    """Typed view over the merged JSON configuration."""

    raw: dict
    archive_path: Path
    out_dir: Path
    seed: int
    splits: Splits | None
    synth: SynthConfig
    compressor: dict
    backbones: list[str]
    backbone_configs: dict
    rollout: RolloutConfig
    train: TrainConfig
    max_val_starts: int
    sdap: dict
    evaluation: EvalConfig

    @staticmethod
    def from_dict(data: dict) -> "BenchConfig":
        merged = _deep_merge(DEFAULTS, data)
        try:
            synth_raw = dict(merged["synth"])
            synth_raw["shape"] = tuple(synth_raw["shape"])
            synth_raw["start"] = _date(synth_raw["start"], "synth.start")
            synth = SynthConfig(**synth_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"synth: {exc}") from exc

        splits = None
        if merged["splits"] is not None:
            s = merged["splits"]
            for name in ("train", "val", "test"):
                if name not in s:
                    raise ConfigError(f"splits must define {name!r}")
            try:
                splits = Splits(
                    train=_date_range(s["train"], "splits.train"),
                    val=_date_range(s["val"], "splits.val"),
                    test=_date_range(s["test"], "splits.test"),
                )
            except ValueError as exc:
                raise ConfigError(f"splits: {exc}") from exc

        comp = dict(merged["compressor"])
        if comp.get("kind") not in ("eof", "autoencoder"):
            raise ConfigError(
                f"compressor.kind must be 'eof' or 'autoencoder', got "
                f"{comp.get('kind')!r}"
            )

        backbones = list(merged["backbones"])
        known = set(GRID_BACKBONES) | set(LATENT_BACKBONES)
        unknown = [b for b in backbones if b not in known]
        if unknown:
            raise ConfigError(
                f"unknown backbones {unknown}; known: {sorted(known)}"
            )
        if len(set(backbones)) != len(backbones):
            raise ConfigError(f"duplicate backbones in {backbones}")

        try:
            rollout = RolloutConfig(**merged["rollout"])
        except ValueError as exc:
            raise ConfigError(f"rollout: {exc}") from exc

        train_raw = dict(merged["train"])
        max_val_starts = int(train_raw.pop("max_val_starts", 48))
        try:
            train = TrainConfig(seed=int(merged["seed"]), **train_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"train: {exc}") from exc

        eval_raw = dict(merged["evaluation"])
        eval_raw["leads"] = tuple(eval_raw.get("leads", ()))
        eval_raw["sio_leads"] = tuple(eval_raw.get("sio_leads", ()))
        try:
            evaluation = EvalConfig(**eval_raw)
        except TypeError as exc:
            raise ConfigError(f"evaluation: {exc}") from exc
        if max(evaluation.leads, default=1) > rollout.horizon:
            raise ConfigError(
                f"evaluation leads {evaluation.leads} exceed rollout horizon "
                f"{rollout.horizon}"
            )

        cfg = BenchConfig(
            raw=merged,
            archive_path=Path(merged["archive"]),
            out_dir=Path(merged["out_dir"]),
            seed=int(merged["seed"]),
            splits=splits,
            synth=synth,
            compressor=comp,
            backbones=backbones,
            backbone_configs=dict(merged["backbone_configs"]),
            rollout=rollout,
            train=train,
            max_val_starts=max_val_starts,
            sdap=dict(merged["sdap"]),
            evaluation=evaluation,
        )
        stray = [k for k in cfg.backbone_configs if k not in known]
        if stray:
            raise ConfigError(
                f"backbone_configs for unknown backbones {stray}; "
                f"known: {sorted(known)}"
            )
        for kind in cfg.backbone_configs:
            cfg.rollout_for(kind)  # validate per-backbone geometry eagerly
        return cfg

    def rollout_for(self, kind: str) -> RolloutConfig:
        """Rollout geometry for one backbone: the shared config overlaid
        with the backbone's own `rollout` block (the horizon stays shared)."""
        overrides = dict(self.backbone_configs.get(kind, {}).get("rollout", {}))
        if not overrides:
            return self.rollout
        if "horizon" in overrides:
            raise ConfigError(
                f"backbone_configs.{kind}.rollout: the horizon is shared by "
                "all backbones; set rollout.horizon instead"
            )
        if "n_rolls" not in overrides and "p" in overrides:
            # Keep the stage count at the minimal covering of the horizon.
            overrides["n_rolls"] = math.ceil(self.rollout.horizon / int(overrides["p"]))
        try:
            return dataclasses.replace(self.rollout, **overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"backbone_configs.{kind}.rollout: {exc}") from exc

    def autoencoder_config(self) -> AutoencoderConfig:
        comp = self.compressor
        try:
            return AutoencoderConfig(
                latent_dim=int(comp["latent_dim"]),
                n_stages=int(comp["n_stages"]),
                base_channels=int(comp["base_channels"]),
                mlp_ratio=float(comp["mlp_ratio"]),
                epochs=int(comp["epochs"]),
                batch_size=int(comp["batch_size"]),
                lr=float(comp["lr"]),
                seed=self.seed,
                val_fraction=float(comp["val_fraction"]),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"compressor: {exc}") from exc


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> BenchConfig:
    """Read the JSON config (or start from defaults) and apply overrides."""
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {p} must hold a JSON object")
    for expr in overrides or []:
        key_path, value = _parse_override(expr)
        _apply_override(data, key_path, value)
    return BenchConfig.from_dict(data)
