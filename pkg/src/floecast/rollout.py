"""Autoregressive rollout to long-horizon forecasts, plus the teacher-forced
training loop that prepares backbones for it.

A rollout chains a window forecaster `n_rolls` times, feeding each p-step
output back in as input, and keeps the first `horizon` steps. Training
unrolls the same recurrence over truth windows: at every stage boundary a
Bernoulli draw (dedicated RNG stream, ratio decaying per epoch) decides
whether the next input comes from ground truth or from the model's own
(stop-gradient) output.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .backbones import LatentForecaster, SdapModel, TrainConfig, BackboneError
from .backbones import climatology_forecast, persistence_forecast
from .checkpoint import load_tensors, save_tensors
from .grids import Climatology, DateRange, GridArchive, read_archive, write_archive
from .latent import Compressor, LatentSeries
from .metrics import MetricAccumulator, MetricReport
from .optim import Adam

DEFAULT_HORIZON = 180


class RolloutError(ValueError):
    """Invalid rollout configuration or missing history."""


class TrainingError(RuntimeError):
    """Training diverged (non-finite losses)."""


@dataclass(frozen=True)
class RolloutConfig:
    """Window/stage geometry and the teacher-forcing schedule."""

    n: int = 15
    p: int = 15
    n_rolls: int = 12
    horizon: int = DEFAULT_HORIZON
    start_ratio: float = 1.0
    end_ratio: float = 0.0
    decay: str = "linear"

    def __post_init__(self) -> None:
        if min(self.n, self.p, self.n_rolls, self.horizon) < 1:
            raise RolloutError(f"rollout sizes must be >= 1: {self}")
        if self.p * self.n_rolls < self.horizon:
            raise RolloutError(
                f"{self.n_rolls} stages of {self.p} steps cannot cover "
                f"horizon {self.horizon}"
            )
        if self.p * (self.n_rolls - 1) >= self.horizon:
            raise RolloutError(
                f"{self.n_rolls} stages of {self.p} steps overshoot horizon "
                f"{self.horizon}; drop a stage"
            )
        if not (0.0 <= self.end_ratio <= self.start_ratio <= 1.0):
            raise RolloutError(
                f"forcing ratios must satisfy 0 <= end <= start <= 1, got "
                f"start={self.start_ratio} end={self.end_ratio}"
            )
        if self.decay not in ("linear", "exponential"):
            raise RolloutError(f"unknown decay schedule {self.decay!r}")

    @classmethod
    def for_window(cls, window: int, horizon: int = DEFAULT_HORIZON, **kwargs):
        """Minimal stage count covering the horizon (e.g. 7 -> 26 stages)."""
        return cls(
            n=window,
            p=window,
            n_rolls=math.ceil(horizon / window),
            horizon=horizon,
            **kwargs,
        )

    @property
    def total_steps(self) -> int:
        return self.p * self.n_rolls

    def config_hash(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def forcing_ratio(config: RolloutConfig, epoch: int, total_epochs: int) -> float:
    """Forcing ratio for `epoch` (0-based) of a `total_epochs` run."""
    if total_epochs < 1:
        raise RolloutError(f"total_epochs must be >= 1, got {total_epochs}")
    frac = epoch / total_epochs
    start, end = config.start_ratio, config.end_ratio
    if config.decay == "linear":
        return start + (end - start) * frac
    if start <= 0.0:
        return 0.0
    return start * (max(end, 1e-12) / start) ** frac


@dataclass
class UnrollResult:
    """One unrolled recurrence: differentiable loss plus inspection hooks."""

    loss: Tensor
    stage_inputs: list[np.ndarray]
    stage_outputs: list[np.ndarray]

    @property
    def predictions(self) -> np.ndarray:
        return np.concatenate(self.stage_outputs, axis=1)


def unroll(
    model: LatentForecaster,
    z: np.ndarray,
    starts: np.ndarray,
    config: RolloutConfig,
    forced: np.ndarray | None,
) -> UnrollResult:
    """Unroll `n_rolls` stages from each start index (the init-day position).

    `forced[b, k]` chooses ground truth (True) or the model's stage-(k-1)
    output (False) as the input to stage k; stage 0 always reads observed
    history. `forced=None` means never force (pure autoregression). Gradients
    do not flow across stage boundaries.
    """
    n, p, n_rolls = model.n, model.p, config.n_rolls
    starts = np.asarray(starts, dtype=np.int64)
    bsz = starts.size
    if starts.min() < n - 1 or starts.max() + config.total_steps >= z.shape[0]:
        raise RolloutError(
            "unroll start indices leave the series: need n-1 days of history "
            f"and {config.total_steps} days of targets inside 0..{z.shape[0] - 1}"
        )
    if forced is not None and forced.shape != (bsz, n_rolls):
        raise RolloutError(
            f"forced mask shape {forced.shape} != ({bsz}, {n_rolls})"
        )
    window = np.stack([z[s - n + 1 : s + 1] for s in starts]).astype(np.float32)
    stage_inputs: list[np.ndarray] = []
    stage_outputs: list[np.ndarray] = []
    losses: list[Tensor] = []
    for k in range(n_rolls):
        stage_inputs.append(window.copy())
        ends = starts + k * p
        truth = np.stack([z[e + 1 : e + p + 1] for e in ends]).astype(np.float32)
        out = model._forward(Tensor(window), ends)
        losses.append(ad.mse_loss(out, Tensor(truth)))
        out_np = out.data  # stop-gradient: stages couple through data only
        stage_outputs.append(out_np)
        if k + 1 < n_rolls:
            if forced is None:
                feed = out_np
            else:
                pick = forced[:, k + 1][:, None, None]
                feed = np.where(pick, truth, out_np)
            tail = np.concatenate([window, feed], axis=1)[:, -n:]
            window = np.ascontiguousarray(tail)
    total = losses[0]
    for extra in losses[1:]:
        total = ad.add(total, extra)
    total = ad.mul(total, 1.0 / n_rolls)
    return UnrollResult(loss=total, stage_inputs=stage_inputs, stage_outputs=stage_outputs)


def rollout_starts(t_lo: int, t_hi: int, config: RolloutConfig) -> np.ndarray:
    """Start indices whose history and full unroll fit inside [t_lo, t_hi)."""
    lo = t_lo + config.n - 1
    hi = t_hi - config.total_steps
    return np.arange(lo, hi, dtype=np.int64)


def _subsample(ends: np.ndarray, limit: int) -> np.ndarray:
    if ends.size <= limit:
        return ends
    idx = np.linspace(0, ends.size - 1, limit).round().astype(np.int64)
    return ends[np.unique(idx)]


def fit_autoregressive(
    model: LatentForecaster,
    z: np.ndarray,
    train_starts: np.ndarray,
    val_starts: np.ndarray,
    config: RolloutConfig,
    train: TrainConfig,
    max_val_starts: int = 64,
) -> LatentForecaster:
    """Teacher-forced unrolled training; returns the best-validation snapshot.

    Validation score is pure-autoregressive MSE over the first `horizon`
    steps. Forcing draws use their own RNG stream, so batching order and
    validation never perturb them.
    """
    if train_starts.size == 0 or val_starts.size == 0:
        raise RolloutError(
            f"not enough days to unroll even once (train {train_starts.size}, "
            f"val {val_starts.size} starts)"
        )
    z = np.asarray(z, dtype=np.float32)
    ss = np.random.SeedSequence(train.seed)
    shuffle_rng, force_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    opt = Adam(model.params.tensors(), lr=train.lr)
    val_sel = _subsample(val_starts, max_val_starts)

    def val_mse() -> float:
        se = 0.0
        count = 0
        with no_grad():
            for lo in range(0, val_sel.size, 64):
                batch = val_sel[lo : lo + 64]
                res = unroll(model, z, batch, config, forced=None)
                preds = res.predictions[:, : config.horizon]
                truth = np.stack(
                    [z[s + 1 : s + config.horizon + 1] for s in batch]
                )
                se += float(
                    np.sum((preds.astype(np.float64) - truth) ** 2)
                )
                count += preds.size
        return se / count

    best_val = np.inf
    best_state = model.params.state_dict()
    best_epoch = -1
    bad_epochs = 0
    ratios: list[float] = []
    train_hist: list[float] = []
    val_hist: list[float] = []
    for epoch in range(train.epochs):
        ratio = forcing_ratio(config, epoch, train.epochs)
        ratios.append(ratio)
        perm = shuffle_rng.permutation(train_starts.size)
        losses: list[float] = []
        for lo in range(0, train_starts.size, train.batch_size):
            batch = train_starts[perm[lo : lo + train.batch_size]]
            forced = force_rng.random((batch.size, config.n_rolls)) < ratio
            forced[:, 0] = True
            res = unroll(model, z, batch, config, forced)
            ad.backward(res.loss)
            opt.step()
            losses.append(float(res.loss.data))
        v = val_mse()
        train_hist.append(float(np.mean(losses)))
        val_hist.append(v)
        if not np.isfinite(v) or not np.isfinite(train_hist[-1]):
            raise TrainingError(
                f"training diverged at epoch {epoch} (val mse {v})"
            )
        if v < best_val:
            best_val = v
            best_state = model.params.state_dict()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if train.patience is not None and bad_epochs > train.patience:
                break
    model.params.load_state(best_state)
    model.fitted = True
    model.history = {
        "mode": "autoregressive",
        "train_mse": train_hist,
        "val_mse": val_hist,
        "forcing_ratios": ratios,
        "best_epoch": best_epoch,
        "best_val_mse": best_val,
    }
    return model


# -- forecast runs ----------------------------------------------------------------


@dataclass
class ForecastRun:
    """A finished daily forecast: grids (and latents, for learned models)."""

    backbone_id: str
    init_date: dt.date
    values: np.ndarray  # (horizon, rows, cols) float32, canonical
    mask: np.ndarray
    cell_area_km2: float
    latents: np.ndarray | None = None
    config_hash: str = ""

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise RolloutError(f"run values must be 3-D, got {self.values.shape}")

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def dates(self) -> list[dt.date]:
        one = dt.timedelta(days=1)
        return [self.init_date + one * (i + 1) for i in range(self.horizon)]

    def values_on(self, date: dt.date) -> np.ndarray:
        lead = (date - self.init_date).days
        if not 1 <= lead <= self.horizon:
            raise KeyError(f"{date.isoformat()} outside forecast horizon")
        return self.values[lead - 1]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        grids = GridArchive(
            self.values,
            self.mask,
            self.init_date + dt.timedelta(days=1),
            self.cell_area_km2,
        )
        write_archive(grids, path / "grids")
        meta = {
            "backbone_id": self.backbone_id,
            "init_date": self.init_date.isoformat(),
            "horizon": self.horizon,
            "config_hash": self.config_hash,
        }
        (path / "run.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
        if self.latents is not None:
            save_tensors(path / "latents.bin", {"latents": self.latents})

    @staticmethod
    def load(path: str | Path) -> "ForecastRun":
        path = Path(path)
        meta = json.loads((path / "run.json").read_text())
        grids = read_archive(path / "grids")
        latents = None
        if (path / "latents.bin").exists():
            latents = load_tensors(path / "latents.bin")["latents"]
        return ForecastRun(
            backbone_id=meta["backbone_id"],
            init_date=dt.date.fromisoformat(meta["init_date"]),
            values=grids.values.copy(),
            mask=np.asarray(grids.mask),
            cell_area_km2=grids.cell_area_km2,
            latents=latents,
            config_hash=meta.get("config_hash", ""),
        )


def rollout_latent(
    model: LatentForecaster,
    compressor: Compressor,
    series: LatentSeries,
    init_date: dt.date,
    config: RolloutConfig,
    cell_area_km2: float = 0.0,
    run_id: str | None = None,
) -> ForecastRun:
    """Encode n days of history ending at init_date, chain the forecaster,
    decode the first `horizon` latents back to grids."""
    if model.n != config.n or model.p != config.p:
        raise RolloutError(
            f"model window ({model.n}->{model.p}) != config ({config.n}->{config.p})"
        )
    i0 = series.index_of(init_date)
    if i0 < config.n - 1:
        raise RolloutError(
            f"init date {init_date.isoformat()} has only {i0 + 1} days of "
            f"history; {config.n} needed"
        )
    z = series.normalized()
    window = z[i0 - config.n + 1 : i0 + 1].copy()
    chunks: list[np.ndarray] = []
    for k in range(config.n_rolls):
        out = model.forecast(window, end_index=i0 + k * config.p)
        chunks.append(out)
        tail = np.concatenate([window, out], axis=0)[-config.n :]
        window = np.ascontiguousarray(tail.astype(np.float32))
    latents_norm = np.concatenate(chunks, axis=0)[: config.horizon]
    latents = series.denormalize(latents_norm)
    values = compressor.decode_values(latents)
    return ForecastRun(
        backbone_id=run_id if run_id is not None else model.kind,
        init_date=init_date,
        values=values,
        mask=compressor.mask,
        cell_area_km2=cell_area_km2,
        latents=latents.astype(np.float32),
        config_hash=config.config_hash(),
    )


def rollout_baseline(
    kind: str,
    archive: GridArchive,
    clim: Climatology,
    init_date: dt.date,
    config: RolloutConfig,
    sdap: SdapModel | None = None,
) -> ForecastRun:
    """Grid-space baselines roll by their own definitions (no latent path)."""
    init_values = archive.grid(init_date).values
    one = dt.timedelta(days=1)
    fields = []
    if kind == "persistence":
        fields = [persistence_forecast(init_values, lead) for lead in range(1, config.horizon + 1)]
    elif kind == "climatology":
        fields = [
            climatology_forecast(clim, init_date + one * lead)
            for lead in range(1, config.horizon + 1)
        ]
    elif kind == "sdap":
        if sdap is None:
            raise BackboneError("sdap rollout needs a fitted SdapModel")
        fields = [
            sdap.forecast(init_values, init_date, lead)
            for lead in range(1, config.horizon + 1)
        ]
    else:
        raise BackboneError(f"unknown grid baseline {kind!r}")
    return ForecastRun(
        backbone_id=kind,
        init_date=init_date,
        values=np.stack(fields),
        mask=np.asarray(archive.mask),
        cell_area_km2=archive.cell_area_km2,
        config_hash=config.config_hash(),
    )


def evaluate_run(
    run: ForecastRun, archive: GridArchive, clim: Climatology | None
) -> MetricReport:
    """Score a run against observed days (forecast days beyond the archive
    are skipped)."""
    acc = MetricAccumulator(np.asarray(run.mask), clim)
    for lead, date in enumerate(run.dates, start=1):
        if date in archive:
            acc.add(run.values[lead - 1], archive.grid(date).values, date, lead)
    return acc.report()


def compare_rolling_windows(
    build_model,
    z: np.ndarray,
    train_lo_hi: tuple[int, int],
    val_lo_hi: tuple[int, int],
    train: TrainConfig,
    windows: tuple[int, ...] = (7, 15),
    horizon: int = DEFAULT_HORIZON,
) -> dict[int, dict]:
    """Train one backbone family at several rolling-window lengths and
    evaluate each autoregressively on the validation block.

    `build_model(n, p)` constructs an untrained forecaster. Returns, per
    window: the trained model, per-lead MSE curve, and pure-autoregressive
    validation MSE.
    """
    out: dict[int, dict] = {}
    for window in windows:
        config = RolloutConfig.for_window(window, horizon)
        model = build_model(config.n, config.p)
        train_starts = rollout_starts(*train_lo_hi, config)
        val_starts = rollout_starts(*val_lo_hi, config)
        fit_autoregressive(model, z, train_starts, val_starts, config, train)
        val_sel = _subsample(val_starts, 64)
        with no_grad():
            res = unroll(model, z, val_sel, config, forced=None)
        preds = res.predictions[:, :horizon].astype(np.float64)
        truth = np.stack([z[s + 1 : s + horizon + 1] for s in val_sel])
        per_lead = np.mean((preds - truth) ** 2, axis=(0, 2))
        out[window] = {
            "model": model,
            "config": config,
            "val_mse": float(np.mean((preds - truth) ** 2)),
            "per_lead_mse": per_lead,
        }
    return out
