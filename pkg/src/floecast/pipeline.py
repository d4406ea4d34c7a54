"""End-to-end benchmark pipeline behind the CLI subcommands.

Artifacts live under the configured output directory:

    out/
      compressor/           fitted compressor (weights + metadata)
      latents/              encoded daily latent series
      backbones/<kind>/     trained forecaster checkpoints
      runs/                 rollouts saved by the `rollout` subcommand
      ensemble/             member ranking and fitted weight vectors
      reports/
        reconstruction/     compressor round-trip scores
        s2s/                pooled forecast tables, per-lead/month curves
        sio/                September-mean extent skill tables
        extremes/           September-minimum timing/value errors
        windows/            rolling-window comparison curves
        summary.md          human-readable digest (written by `report`)

Every command is deterministic for a fixed config and seed: workers only
parallelize independent rollouts, and aggregation always happens in init-date
order, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import json
import math
import os
import shutil
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .backbones import (
    GRID_BACKBONES,
    LATENT_BACKBONES,
    LatentForecaster,
    SdapModel,
    build_forecaster,
    fit_sdap,
    load_forecaster,
    save_forecaster,
)
from .config import BenchConfig, ConfigError
from .ensembles import (
    RANK_TIERS,
    EnsembleSpec,
    GramAccumulator,
    apply_ensemble,
    fit_weights_from_gram,
    rank_members,
    tier_members,
)
from .grids import (
    Climatology,
    DateRange,
    GridArchive,
    SicGrid,
    Splits,
    compute_climatology,
    read_archive,
    sea_ice_extent,
    synth_archive,
    write_archive,
)
from .latent import (
    Compressor,
    LatentSeries,
    encode_series,
    evaluate_reconstruction,
    fit_autoencoder,
    fit_eof,
    load_compressor,
    save_compressor,
)
from .metrics import METRIC_NAMES, MetricAccumulator, acc_field, detrended_metrics
from .rollout import (
    ForecastRun,
    RolloutConfig,
    evaluate_run,
    fit_autoregressive,
    rollout_baseline,
    rollout_latent,
    rollout_starts,
)

WORKERS_ENV = "FLOECAST_WORKERS"
TABLE3_METRICS = ("mae", "r2", "nse", "mse", "rmse", "acc")
SEPTEMBER_DAYS = 30


class DataError(RuntimeError):
    """Missing or inconsistent data artifacts (archive, checkpoints, latents)."""


# -- output layout ------------------------------------------------------------


@dataclass(frozen=True)
class Workspace:
    """Fixed directory layout under the configured output directory."""

    root: Path

    @property
    def compressor(self) -> Path:
        return self.root / "compressor"

    @property
    def latents(self) -> Path:
        return self.root / "latents"

    def backbone(self, kind: str) -> Path:
        return self.root / "backbones" / kind

    @property
    def runs(self) -> Path:
        return self.root / "runs"

    @property
    def ensemble(self) -> Path:
        return self.root / "ensemble"

    @property
    def reports(self) -> Path:
        return self.root / "reports"

    def report_dir(self, name: str) -> Path:
        path = self.reports / name
        path.mkdir(parents=True, exist_ok=True)
        return path


def workspace(cfg: BenchConfig) -> Workspace:
    return Workspace(root=cfg.out_dir)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or not raw.strip():
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def _pmap(fn: Callable, items: Sequence) -> list:
    """Map preserving input order; uses threads when workers > 1."""
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _chunks(seq: Sequence, size: int) -> Iterable[Sequence]:
    for lo in range(0, len(seq), size):
        yield seq[lo : lo + size]


# -- serialization helpers -----------------------------------------------------


def fmt_cell(value) -> str:
    """CSV cell for a metric value: full-precision repr, 'undefined' for
    None, 'exact' for an infinite PSNR."""
    if value is None:
        return "undefined"
    if isinstance(value, float) and math.isinf(value):
        return "exact"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value)}")


def write_json(path: Path, payload: dict) -> None:
    def enc(obj):
        if isinstance(obj, dict):
            return {k: enc(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [enc(v) for v in obj]
        if isinstance(obj, float) and math.isinf(obj):
            return "exact"
        return obj

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(enc(payload), sort_keys=True, indent=2, default=_json_default)
        + "\n"
    )


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([fmt_cell(v) for v in row])


# -- archive / splits ----------------------------------------------------------


def default_splits(archive: GridArchive) -> Splits:
    """60/20/20 chronological day split when the config does not pin one."""
    n = archive.n_days
    if n < 5:
        raise DataError(f"archive too short to split: {n} days")
    t_hi = archive.start + dt.timedelta(days=int(n * 0.6) - 1)
    v_hi = archive.start + dt.timedelta(days=int(n * 0.8) - 1)
    return Splits(
        train=DateRange(archive.start, t_hi),
        val=DateRange(t_hi + dt.timedelta(days=1), v_hi),
        test=DateRange(v_hi + dt.timedelta(days=1), archive.end),
    )


def load_archive(cfg: BenchConfig) -> tuple[GridArchive, Splits]:
    path = cfg.archive_path
    if not (path / "manifest.tsv").exists():
        raise DataError(
            f"no archive at {path} (run `synth` or point `archive` at one)"
        )
    archive = read_archive(path)
    splits = cfg.splits if cfg.splits is not None else default_splits(archive)
    for name, rng in (("train", splits.train), ("val", splits.val), ("test", splits.test)):
        if rng.start < archive.start or rng.end > archive.end:
            raise DataError(
                f"{name} split {rng.start.isoformat()}..{rng.end.isoformat()} "
                f"falls outside the archive "
                f"({archive.start.isoformat()}..{archive.end.isoformat()})"
            )
    return archive, splits


def _series_span(series: LatentSeries, rng: DateRange) -> tuple[int, int]:
    """Clamp a date range to the series and return [lo, hi) indices."""
    lo_date = max(rng.start, series.start)
    hi_date = min(rng.end, series.end)
    if lo_date > hi_date:
        raise DataError(
            f"range {rng.start.isoformat()}..{rng.end.isoformat()} does not "
            f"overlap the latent series"
        )
    return series.index_of(lo_date), series.index_of(hi_date) + 1


# -- model bank ----------------------------------------------------------------


@dataclass
class SkipRecord:
    model: str
    reason: str

    def as_dict(self) -> dict:
        return {"model": self.model, "reason": self.reason}


class ModelBank:
    """Loads every artifact a benchmark command needs and dispatches rollouts.

    Baselines (persistence / climatology / sdap) run straight from the
    archive; latent backbones additionally need the fitted compressor, the
    encoded series, and their own checkpoint. Models whose artifacts are
    missing are skipped with a recorded reason rather than failing the
    whole evaluation.
    """

    def __init__(self, cfg: BenchConfig, archive: GridArchive, splits: Splits):
        self.cfg = cfg
        self.archive = archive
        self.splits = splits
        self.ws = workspace(cfg)
        self.clim = compute_climatology(archive, splits.train)
        self.sdap: SdapModel | None = None
        self.compressor: Compressor | None = None
        self.series: LatentSeries | None = None
        self.models: dict[str, LatentForecaster] = {}
        self.skipped: list[SkipRecord] = []
        self._kinds: list[str] | None = None

    def available(self) -> list[str]:
        """Resolve which configured backbones can run, loading artifacts.

        Must be called before any parallel rollouts so lazy loads never race.
        """
        if self._kinds is not None:
            return self._kinds
        kinds: list[str] = []
        wanted_latent = [k for k in self.cfg.backbones if k in LATENT_BACKBONES]
        if wanted_latent:
            self._load_latent_stack(wanted_latent)
        for kind in self.cfg.backbones:
            if kind in GRID_BACKBONES:
                if kind == "sdap" and self.sdap is None:
                    self.sdap = fit_sdap(
                        self.archive,
                        self.clim,
                        train_range=self.splits.train,
                        max_lead=max(
                            self.cfg.rollout.horizon,
                            int(self.cfg.sdap.get("max_lead", 180)),
                        ),
                        min_pairs=int(self.cfg.sdap.get("min_pairs", 100)),
                    )
                kinds.append(kind)
            elif kind in self.models:
                kinds.append(kind)
        self._kinds = kinds
        return kinds

    def _load_latent_stack(self, wanted: list[str]) -> None:
        comp_dir = self.ws.compressor
        if not (comp_dir / "compressor.json").exists():
            for kind in wanted:
                self.skipped.append(
                    SkipRecord(kind, f"no fitted compressor at {comp_dir}")
                )
            return
        self.compressor = load_compressor(comp_dir)
        series_dir = self.ws.latents
        if not (series_dir / "series.json").exists():
            for kind in wanted:
                self.skipped.append(
                    SkipRecord(kind, f"no encoded latent series at {series_dir}")
                )
            return
        series = LatentSeries.load(series_dir)
        if series.compressor_id != self.compressor.compressor_id:
            raise DataError(
                f"latent series was encoded with {series.compressor_id!r} but "
                f"the saved compressor is {self.compressor.compressor_id!r}; "
                f"re-run `encode`"
            )
        self.series = series
        for kind in wanted:
            ckpt = self.ws.backbone(kind)
            if not (ckpt / "forecaster.json").exists():
                self.skipped.append(
                    SkipRecord(kind, f"no checkpoint at {ckpt} (run `train`)")
                )
                continue
            model = load_forecaster(ckpt)
            if model.dim != series.latent_dim:
                self.skipped.append(
                    SkipRecord(
                        kind,
                        f"checkpoint latent dim {model.dim} != series "
                        f"{series.latent_dim}",
                    )
                )
                continue
            rollout_cfg = self.cfg.rollout_for(kind)
            if (model.n, model.p) != (rollout_cfg.n, rollout_cfg.p):
                self.skipped.append(
                    SkipRecord(
                        kind,
                        f"checkpoint window {model.n}->{model.p} != configured "
                        f"{rollout_cfg.n}->{rollout_cfg.p}",
                    )
                )
                continue
            self.models[kind] = model

    def run(self, kind: str, init_date: dt.date) -> ForecastRun:
        if kind in GRID_BACKBONES:
            return rollout_baseline(
                kind,
                self.archive,
                self.clim,
                init_date,
                self.cfg.rollout,
                sdap=self.sdap,
            )
        if kind not in self.models:
            raise DataError(f"backbone {kind!r} is not loaded")
        assert self.compressor is not None and self.series is not None
        return rollout_latent(
            self.models[kind],
            self.compressor,
            self.series,
            init_date,
            self.cfg.rollout_for(kind),
            cell_area_km2=self.archive.cell_area_km2,
        )

    def runs_for(self, kinds: list[str], inits: list[dt.date]) -> Iterable[dict]:
        """Yield {kind: run} per init date, in init order, computing chunks
        of init dates across the worker pool."""

        def one(init: dt.date) -> dict[str, ForecastRun]:
            return {kind: self.run(kind, init) for kind in kinds}

        for chunk in _chunks(inits, max(worker_count(), 1)):
            yield from _pmap(one, chunk)

    def min_init(self) -> dt.date:
        """Earliest init date with a full history window for every backbone."""
        n = max(
            [self.cfg.rollout.n]
            + [self.cfg.rollout_for(k).n for k in self.cfg.backbones],
        )
        return self.archive.start + dt.timedelta(days=n - 1)


def eval_init_dates(
    bank: ModelBank,
    within: DateRange,
    *,
    truth_end: dt.date | None = None,
    stride: int | None = None,
) -> list[dt.date]:
    """Init dates inside `within`, strided, with full history before and a
    fully observable horizon after (bounded by `truth_end`)."""
    cfg = bank.cfg
    stride = cfg.evaluation.init_stride if stride is None else stride
    truth_end = bank.archive.end if truth_end is None else truth_end
    first = max(within.start, bank.min_init())
    last = min(within.end, truth_end - dt.timedelta(days=cfg.rollout.horizon))
    dates = []
    init = first
    while init <= last:
        dates.append(init)
        init += dt.timedelta(days=stride)
    return dates


def _load_ensemble_specs(ws: Workspace) -> dict[str, EnsembleSpec]:
    specs: dict[str, EnsembleSpec] = {}
    for tier in sorted(RANK_TIERS):
        path = ws.ensemble / f"{tier}.json"
        if path.exists():
            specs[tier] = EnsembleSpec.load(path)
    return specs


def _usable_specs(
    specs: dict[str, EnsembleSpec], kinds: list[str], skipped: list[SkipRecord]
) -> dict[str, EnsembleSpec]:
    usable: dict[str, EnsembleSpec] = {}
    for tier, spec in specs.items():
        missing = [m for m in spec.member_ids if m not in kinds]
        if missing:
            skipped.append(
                SkipRecord(
                    f"ensemble-{tier}",
                    f"members not evaluated in this run: {missing}",
                )
            )
        else:
            usable[tier] = spec
    return usable


# -- commands ------------------------------------------------------------------


def cmd_synth(cfg: BenchConfig) -> int:
    """Generate the synthetic archive configured under `synth`."""
    path = cfg.archive_path
    if path.exists():
        if (path / "manifest.tsv").exists():
            shutil.rmtree(path)
        elif any(path.iterdir()):
            raise DataError(
                f"refusing to overwrite {path}: directory is not a grid archive"
            )
    archive = synth_archive(cfg.synth)
    write_archive(archive, path)
    print(
        f"synth: wrote {archive.n_days} days "
        f"({archive.start.isoformat()}..{archive.end.isoformat()}), "
        f"grid {archive.shape[0]}x{archive.shape[1]} -> {path}"
    )
    return 0


def _reconstruction_report(
    comp: Compressor, archive: GridArchive, splits: Splits, ws: Workspace
) -> float | None:
    report = evaluate_reconstruction(comp, archive, splits.test)
    rec_dir = ws.report_dir("reconstruction")
    (rec_dir / f"{comp.compressor_id}.json").write_text(report.to_json() + "\n")
    report.write_csv(rec_dir / f"{comp.compressor_id}.csv")
    return report.per_metric["nse"]


def cmd_fit_eof(cfg: BenchConfig) -> int:
    """Fit the linear orthonormal-basis compressor on the training split."""
    archive, splits = load_archive(cfg)
    ws = workspace(cfg)
    k = int(cfg.compressor["latent_dim"])
    comp = fit_eof(archive, k, train_range=splits.train)
    save_compressor(comp, ws.compressor)
    nse = _reconstruction_report(comp, archive, splits, ws)
    for warning in comp.warnings:
        print(f"fit-eof: warning: {warning}")
    print(
        f"fit-eof: {comp.compressor_id} explains "
        f"{comp.explained_variance_fraction:.4f} of training variance; "
        f"test reconstruction NSE {fmt_cell(nse)} -> {ws.compressor}"
    )
    return 0


def cmd_train_ae(cfg: BenchConfig) -> int:
    """Train the convolutional autoencoder compressor on the training split."""
    archive, splits = load_archive(cfg)
    ws = workspace(cfg)
    ae_cfg = cfg.autoencoder_config()
    comp = fit_autoencoder(archive, ae_cfg, train_range=splits.train)
    save_compressor(comp, ws.compressor)
    nse = _reconstruction_report(comp, archive, splits, ws)
    best = comp.history.get("best_val_mse")
    print(
        f"train-ae: {comp.compressor_id} best val mse "
        f"{best if best is None else f'{best:.3e}'} "
        f"(epoch {comp.history.get('best_epoch')}); "
        f"test reconstruction NSE {fmt_cell(nse)} -> {ws.compressor}"
    )
    return 0


def cmd_encode(cfg: BenchConfig) -> int:
    """Encode the full archive into the daily latent series."""
    archive, _ = load_archive(cfg)
    ws = workspace(cfg)
    if not (ws.compressor / "compressor.json").exists():
        raise DataError(
            f"no fitted compressor at {ws.compressor} (run `fit-eof` or `train-ae`)"
        )
    comp = load_compressor(ws.compressor)
    if comp.grid_shape != archive.shape:
        raise DataError(
            f"compressor grid {comp.grid_shape} != archive grid {archive.shape}"
        )
    series = encode_series(comp, archive)
    series.save(ws.latents)
    print(
        f"encode: {series.n_days} days x {series.latent_dim} latents "
        f"({comp.compressor_id}) -> {ws.latents}"
    )
    return 0


def cmd_train(cfg: BenchConfig) -> int:
    """Train every configured latent backbone with unrolled teacher forcing."""
    archive, splits = load_archive(cfg)
    ws = workspace(cfg)
    if not (ws.latents / "series.json").exists():
        raise DataError(f"no latent series at {ws.latents} (run `encode`)")
    series = LatentSeries.load(ws.latents)
    z = series.normalized()
    t_lo, t_hi = _series_span(series, splits.train)
    v_lo, v_hi = _series_span(series, splits.val)
    kinds = [k for k in cfg.backbones if k in LATENT_BACKBONES]
    if not kinds:
        print("train: no latent backbones configured; nothing to do")
        return 0
    for kind in kinds:
        overrides = dict(cfg.backbone_configs.get(kind, {}))
        overrides.pop("rollout", None)
        train_cfg = dataclasses.replace(cfg.train, **overrides.pop("train", {}))
        rollout_cfg = cfg.rollout_for(kind)
        train_starts = rollout_starts(t_lo, t_hi, rollout_cfg)
        val_starts = rollout_starts(v_lo, v_hi, rollout_cfg)
        if train_starts.size == 0 or val_starts.size == 0:
            raise DataError(
                f"splits too short to unroll {rollout_cfg.total_steps} steps "
                f"for {kind}: {train_starts.size} train / {val_starts.size} "
                f"val start days"
            )
        model = build_forecaster(
            kind,
            rollout_cfg.n,
            rollout_cfg.p,
            series.latent_dim,
            seed=train_cfg.seed,
            train_z=z[t_lo:t_hi],
            train_offset=t_lo,
            **overrides,
        )
        fit_autoregressive(
            model,
            z,
            train_starts,
            val_starts,
            rollout_cfg,
            train_cfg,
            max_val_starts=cfg.max_val_starts,
        )
        save_forecaster(model, ws.backbone(kind))
        hist = model.history
        print(
            f"train: {kind}: best val mse {hist['best_val_mse']:.4e} "
            f"(epoch {hist['best_epoch']}/{train_cfg.epochs}) "
            f"-> {ws.backbone(kind)}"
        )
    return 0


def cmd_rollout(cfg: BenchConfig, backbone: str, init: str | None = None) -> int:
    """Roll one backbone out from one init date and save the decoded run."""
    known = set(GRID_BACKBONES) | set(LATENT_BACKBONES)
    if backbone not in known:
        raise ConfigError(f"unknown backbone {backbone!r}; known: {sorted(known)}")
    archive, splits = load_archive(cfg)
    bank = ModelBank(cfg, archive, splits)
    kinds = bank.available()
    if backbone not in kinds:
        reasons = [r.reason for r in bank.skipped if r.model == backbone]
        raise DataError(
            f"backbone {backbone!r} unavailable: "
            + (reasons[0] if reasons else "not in configured backbones")
        )
    if init is not None:
        try:
            init_date = dt.date.fromisoformat(init)
        except ValueError as exc:
            raise ConfigError(f"bad init date {init!r}: {exc}") from exc
    else:
        candidates = eval_init_dates(bank, splits.test)
        if not candidates:
            raise DataError("no init date in the test split has full coverage")
        init_date = candidates[0]
    if init_date < bank.min_init() or init_date > archive.end:
        raise DataError(
            f"init {init_date.isoformat()} needs {cfg.rollout.n} days of history "
            f"inside the archive"
        )
    run = bank.run(backbone, init_date)
    out = workspace(cfg).runs / f"{backbone}-{init_date.isoformat()}"
    run.save(out)
    scored = [d for d in run.dates if d in archive]
    line = f"rollout: {backbone} @ {init_date.isoformat()}: {run.horizon} steps"
    if scored:
        report = evaluate_run(run, archive, bank.clim)
        line += (
            f", {len(scored)} observed days, "
            f"rmse {fmt_cell(report.per_metric['rmse'])}, "
            f"acc {fmt_cell(report.per_metric['acc'])}"
        )
    print(line + f" -> {out}")
    return 0


# -- subseasonal-to-seasonal evaluation -----------------------------------------


class _S2sScorer:
    """Per-model accumulators for the three pooled report blocks."""

    def __init__(self, mask: np.ndarray, clim: Climatology, eval_cfg, horizon: int):
        self.full = MetricAccumulator(mask, clim)
        self.head = MetricAccumulator(mask, clim)
        self.blocks = MetricAccumulator(mask, clim)
        self.clim = clim
        self.n_blocks = eval_cfg.monthly_blocks
        self.block_days = eval_cfg.block_days
        self.horizon = horizon

    def add_run(self, run: ForecastRun, archive: GridArchive) -> None:
        for lead, date in enumerate(run.dates, start=1):
            truth = archive.grid(date).values
            self.full.add(run.values[lead - 1], truth, date, lead)
            if lead <= 7:
                self.head.add(run.values[lead - 1], truth, date, lead)
        for b in range(self.n_blocks):
            lo, hi = b * self.block_days, (b + 1) * self.block_days
            dates = run.dates[lo:hi]
            pred = run.values[lo:hi].astype(np.float64).mean(axis=0)
            truth = np.stack(
                [archive.grid(d).values.astype(np.float64) for d in dates]
            ).mean(axis=0)
            clim_mean = np.stack(
                [self.clim.field_for(d) for d in dates]
            ).mean(axis=0)
            mid = dates[len(dates) // 2]
            self.blocks.add(pred, truth, mid, lead=b + 1, clim_field=clim_mean)

    def table_rows(self, model: str) -> list[list]:
        rows = []
        for label, acc in (
            ("7-day", self.head),
            (f"{self.block_days}d-block-means", self.blocks),
            (f"{self.horizon}-day", self.full),
        ):
            per = acc.report().per_metric
            rows.append([model, label] + [per[m] for m in TABLE3_METRICS])
        return rows


def cmd_eval_s2s(cfg: BenchConfig, compare_windows: bool = False) -> int:
    """Score every available model over strided test-split init dates.

    Emits the pooled three-block table, per-lead and per-calendar-month
    curves, one full JSON report per model, and a machine-readable summary.
    """
    if cfg.evaluation.monthly_blocks * cfg.evaluation.block_days > cfg.rollout.horizon:
        raise ConfigError(
            f"{cfg.evaluation.monthly_blocks} blocks x "
            f"{cfg.evaluation.block_days} days exceed the "
            f"{cfg.rollout.horizon}-day horizon"
        )
    archive, splits = load_archive(cfg)
    bank = ModelBank(cfg, archive, splits)
    kinds = bank.available()
    inits = eval_init_dates(bank, splits.test)
    if not inits:
        raise DataError(
            f"test split {splits.test.start.isoformat()}.."
            f"{splits.test.end.isoformat()} has no init date with "
            f"{cfg.rollout.n} days of history and {cfg.rollout.horizon} "
            f"observed forecast days"
        )
    ws = workspace(cfg)
    specs = _usable_specs(_load_ensemble_specs(ws), kinds, bank.skipped)
    scorers = {
        kind: _S2sScorer(archive.mask, bank.clim, cfg.evaluation, cfg.rollout.horizon)
        for kind in kinds
    }
    for tier in specs:
        scorers[f"ensemble-{tier}"] = _S2sScorer(
            archive.mask, bank.clim, cfg.evaluation, cfg.rollout.horizon
        )

    for runs in bank.runs_for(kinds, inits):
        for kind in kinds:
            scorers[kind].add_run(runs[kind], archive)
        for tier, spec in specs.items():
            members = [runs[m] for m in spec.member_ids]
            scorers[f"ensemble-{tier}"].add_run(apply_ensemble(spec, members), archive)

    out = ws.report_dir("s2s")
    model_order = kinds + [f"ensemble-{tier}" for tier in sorted(specs)]
    table_rows: list[list] = []
    lead_rows: list[list] = []
    month_rows: list[list] = []
    summary_models: dict[str, Any] = {}
    for model in model_order:
        scorer = scorers[model]
        table_rows.extend(scorer.table_rows(model))
        report = scorer.full.report()
        (out / f"{model}.report.json").write_text(report.to_json() + "\n")
        for lead in sorted(report.per_lead):
            lead_rows.append(
                [model, lead] + [report.per_lead[lead][m] for m in METRIC_NAMES]
            )
        for month in sorted(report.per_month):
            month_rows.append(
                [model, month] + [report.per_month[month][m] for m in METRIC_NAMES]
            )
        summary_models[model] = {
            "acc_full": report.per_metric["acc"],
            "rmse_full": report.per_metric["rmse"],
            "nse_full": report.per_metric["nse"],
            "acc_at_lead": {
                str(lead): report.per_lead.get(lead, {}).get("acc")
                for lead in cfg.evaluation.leads
            },
        }
    write_csv(
        out / "table3.csv",
        ["model", "block"] + list(TABLE3_METRICS),
        table_rows,
    )
    write_csv(
        out / "per_lead.csv", ["model", "lead"] + list(METRIC_NAMES), lead_rows
    )
    write_csv(
        out / "per_month.csv", ["model", "month"] + list(METRIC_NAMES), month_rows
    )
    write_json(
        out / "summary.json",
        {
            "init_dates": [d.isoformat() for d in inits],
            "init_stride": cfg.evaluation.init_stride,
            "horizon": cfg.rollout.horizon,
            "models": summary_models,
            "skipped": [r.as_dict() for r in bank.skipped],
        },
    )
    for model in model_order:
        info = summary_models[model]
        print(
            f"eval-s2s: {model}: {cfg.rollout.horizon}-day ACC "
            f"{fmt_cell(info['acc_full'])}, RMSE {fmt_cell(info['rmse_full'])}"
        )
    for record in bank.skipped:
        print(f"eval-s2s: skipped {record.model}: {record.reason}")
    print(f"eval-s2s: {len(inits)} init dates -> {out}")
    if compare_windows:
        run_window_comparison(cfg)
    return 0


# -- September-outlook evaluation ------------------------------------------------


def _september_years(
    bank: ModelBank, offsets: Sequence[int]
) -> tuple[list[int], list[str]]:
    """Test-split years whose September is fully observed and whose init
    dates (Sep 1 minus every offset) all have a full history window."""
    archive, splits = bank.archive, bank.splits
    years, notes = [], []
    for year in range(splits.test.start.year, splits.test.end.year + 1):
        sep1 = dt.date(year, 9, 1)
        sep30 = dt.date(year, 9, SEPTEMBER_DAYS)
        if not (splits.test.start <= sep1 and sep30 <= splits.test.end):
            notes.append(f"{year}: September not inside the test split")
            continue
        if sep30 > archive.end:
            notes.append(f"{year}: September not fully observed")
            continue
        inits = [sep1 - dt.timedelta(days=off) for off in offsets]
        if min(inits) < bank.min_init():
            notes.append(f"{year}: init would predate the archive history")
            continue
        horizon_needed = max((sep30 - i).days for i in inits)
        if horizon_needed > bank.cfg.rollout.horizon:
            notes.append(
                f"{year}: needs {horizon_needed}-day rollout > horizon "
                f"{bank.cfg.rollout.horizon}"
            )
            continue
        years.append(year)
    return years, notes


def _september_sie_curve(
    values_by_date: Callable[[dt.date], np.ndarray],
    year: int,
    mask: np.ndarray,
    cell_area_km2: float,
) -> np.ndarray:
    out = np.empty(SEPTEMBER_DAYS, dtype=np.float64)
    for i in range(SEPTEMBER_DAYS):
        date = dt.date(year, 9, 1) + dt.timedelta(days=i)
        grid = SicGrid(values_by_date(date), mask, date)
        out[i] = sea_ice_extent(grid, cell_area_km2=cell_area_km2)
    return out


def _september_mean_field(
    values_by_date: Callable[[dt.date], np.ndarray], year: int
) -> np.ndarray:
    fields = [
        np.asarray(
            values_by_date(dt.date(year, 9, 1) + dt.timedelta(days=i)),
            dtype=np.float64,
        )
        for i in range(SEPTEMBER_DAYS)
    ]
    return np.stack(fields).mean(axis=0)


def _aggregate_rows(rows: list[list], n_fixed: int) -> list[list]:
    """Best/median rows across models for a homogeneous numeric table.

    `rows` are [model, *fixed keys, *values]; best favors small values for
    columns whose header implies an error (handled by caller passing
    already-signed orientation): here column semantics are fixed — index 0
    after the fixed keys is an error (smaller better), the rest are
    correlations (larger better).
    """
    if not rows:
        return []
    n_values = len(rows[0]) - 1 - n_fixed
    best = ["best-of-models"] + list(rows[0][1 : 1 + n_fixed])
    med = ["median-of-models"] + list(rows[0][1 : 1 + n_fixed])
    for j in range(n_values):
        col = [r[1 + n_fixed + j] for r in rows]
        defined = [v for v in col if isinstance(v, (int, float))]
        if not defined:
            best.append(None)
            med.append(None)
            continue
        best.append(min(defined) if j == 0 else max(defined))
        med.append(float(statistics.median(defined)))
    return [best, med]


def _read_sio_reference(path: Path) -> dict[tuple[str, int], dict[int, float]]:
    """Optional side-by-side reference predictions: CSV with header
    model,lead,year,pred_sie_km2."""
    if not path.exists():
        raise DataError(f"sio_reference file not found: {path}")
    table: dict[tuple[str, int], dict[int, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"model", "lead", "year", "pred_sie_km2"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise DataError(
                f"sio_reference must have columns {sorted(needed)}, got "
                f"{reader.fieldnames}"
            )
        for row in reader:
            key = (row["model"], int(row["lead"]))
            table.setdefault(key, {})[int(row["year"])] = float(row["pred_sie_km2"])
    return table


def cmd_eval_sio(cfg: BenchConfig) -> int:
    """September-mean extent skill at fixed pre-September init dates.

    One yearly series per (model, lead); detrended RMSE/correlations over
    the test years, plus the September-mean-field anomaly correlation.
    """
    archive, splits = load_archive(cfg)
    bank = ModelBank(cfg, archive, splits)
    kinds = bank.available()
    leads = list(cfg.evaluation.sio_leads)
    years, notes = _september_years(bank, leads)
    if not years:
        raise DataError(
            "no test year has a fully observed September with valid init dates: "
            + "; ".join(notes)
        )
    ws = workspace(cfg)
    specs = _usable_specs(_load_ensemble_specs(ws), kinds, bank.skipped)
    model_order = kinds + [f"ensemble-{tier}" for tier in sorted(specs)]
    mask = np.asarray(archive.mask)
    area = archive.cell_area_km2

    inits = sorted({dt.date(y, 9, 1) - dt.timedelta(days=L) for y in years for L in leads})
    runs_by_init: dict[dt.date, dict[str, ForecastRun]] = {}
    for init, runs in zip(inits, bank.runs_for(kinds, inits)):
        for tier, spec in specs.items():
            runs[f"ensemble-{tier}"] = apply_ensemble(
                spec, [runs[m] for m in spec.member_ids]
            )
        runs_by_init[init] = runs

    obs_sie = {
        y: _september_sie_curve(lambda d: archive.grid(d).values, y, mask, area)
        for y in years
    }
    obs_field = {y: _september_mean_field(lambda d: archive.grid(d).values, y) for y in years}
    clim_field = {
        y: _september_mean_field(bank.clim.field_for, y) for y in years
    }

    table_rows: list[list] = []
    series_rows: list[list] = []
    for model in model_order:
        for lead in leads:
            pred_series, truth_series, field_accs = [], [], []
            for year in years:
                init = dt.date(year, 9, 1) - dt.timedelta(days=lead)
                run = runs_by_init[init][model]
                pred_sie = _september_sie_curve(run.values_on, year, mask, area)
                pred_series.append(float(pred_sie.mean()))
                truth_series.append(float(obs_sie[year].mean()))
                a = acc_field(
                    _september_mean_field(run.values_on, year),
                    obs_field[year],
                    clim_field[year],
                    mask,
                )
                if a is not None:
                    field_accs.append(a)
                series_rows.append(
                    [model, lead, year, pred_series[-1], truth_series[-1]]
                )
            scores = detrended_metrics(pred_series, truth_series)
            table_rows.append(
                [
                    model,
                    lead,
                    scores.n_years,
                    scores.rmse_detrend,
                    scores.acc_detrend,
                    scores.acc,
                    float(np.mean(field_accs)) if field_accs else None,
                ]
            )

    if cfg.evaluation.sio_reference:
        reference = _read_sio_reference(Path(cfg.evaluation.sio_reference))
        for (model, lead), by_year in sorted(reference.items()):
            missing = [y for y in years if y not in by_year]
            if missing:
                bank.skipped.append(
                    SkipRecord(
                        f"reference:{model}@{lead}",
                        f"reference series missing years {missing}",
                    )
                )
                continue
            pred_series = [by_year[y] for y in years]
            truth_series = [float(obs_sie[y].mean()) for y in years]
            scores = detrended_metrics(pred_series, truth_series)
            table_rows.append(
                [
                    f"reference:{model}",
                    lead,
                    scores.n_years,
                    scores.rmse_detrend,
                    scores.acc_detrend,
                    scores.acc,
                    None,
                ]
            )
            for year, pred in zip(years, pred_series):
                series_rows.append(
                    [f"reference:{model}", lead, year, pred, float(obs_sie[year].mean())]
                )

    agg_rows: list[list] = []
    for lead in leads:
        lead_rows = [
            r for r in table_rows if r[1] == lead and not str(r[0]).startswith("reference:")
        ]
        placed = [[r[0], r[1], *r[3:]] for r in lead_rows]  # drop n_years for aggregation
        for agg in _aggregate_rows(placed, n_fixed=1):
            agg_rows.append([agg[0], agg[1], len(years), *agg[2:]])

    header = [
        "model",
        "lead_days",
        "n_years",
        "sie_rmse_detrend_km2",
        "sie_acc_detrend",
        "sie_acc",
        "september_field_acc",
    ]
    out = ws.report_dir("sio")
    write_csv(out / "table4.csv", header, table_rows + agg_rows)
    write_csv(
        out / "series.csv",
        ["model", "lead_days", "year", "pred_sie_km2", "obs_sie_km2"],
        series_rows,
    )
    write_json(
        out / "summary.json",
        {
            "years": years,
            "leads": leads,
            "excluded_years": notes,
            "models": model_order,
            "skipped": [r.as_dict() for r in bank.skipped],
        },
    )
    for model in model_order:
        row = next(r for r in table_rows if r[0] == model and r[1] == leads[0])
        print(
            f"eval-sio: {model} @ {leads[0]}d: detrended RMSE "
            f"{fmt_cell(row[3])} km^2, detrended ACC {fmt_cell(row[4])} "
            f"({row[2]} years)"
        )
    for record in bank.skipped:
        print(f"eval-sio: skipped {record.model}: {record.reason}")
    print(f"eval-sio: years {years} -> {out}")
    return 0


# -- September extremes -----------------------------------------------------------


def cmd_extremes(cfg: BenchConfig) -> int:
    """Predicted vs observed September-minimum extent: value, date, timing
    error, and the residual field on the observed minimum day."""
    archive, splits = load_archive(cfg)
    bank = ModelBank(cfg, archive, splits)
    kinds = bank.available()
    offset = cfg.evaluation.extremes_init_offset
    years, notes = _september_years(bank, [offset])
    ws = workspace(cfg)
    out = ws.report_dir("extremes")
    if not years:
        raise DataError(
            "no test year has a fully observed September reachable from "
            f"init offset {offset}: " + "; ".join(notes)
        )
    specs = _usable_specs(_load_ensemble_specs(ws), kinds, bank.skipped)
    model_order = kinds + [f"ensemble-{tier}" for tier in sorted(specs)]
    mask = np.asarray(archive.mask)
    area = archive.cell_area_km2

    inits = [dt.date(y, 9, 1) - dt.timedelta(days=offset) for y in years]
    rows: list[list] = []
    residual_dirs: dict[str, str] = {}
    for year, runs in zip(years, bank.runs_for(kinds, inits)):
        for tier, spec in specs.items():
            runs[f"ensemble-{tier}"] = apply_ensemble(
                spec, [runs[m] for m in spec.member_ids]
            )
        obs_curve = _september_sie_curve(
            lambda d: archive.grid(d).values, year, mask, area
        )
        obs_idx = int(np.argmin(obs_curve))  # earliest day on ties
        obs_date = dt.date(year, 9, 1) + dt.timedelta(days=obs_idx)
        obs_min = float(obs_curve[obs_idx])
        for model in model_order:
            run = runs[model]
            pred_curve = _september_sie_curve(run.values_on, year, mask, area)
            pred_idx = int(np.argmin(pred_curve))
            pred_date = dt.date(year, 9, 1) + dt.timedelta(days=pred_idx)
            pred_min = float(pred_curve[pred_idx])
            residual = (
                run.values_on(obs_date).astype(np.float64)
                - archive.grid(obs_date).values.astype(np.float64)
            )
            encoded = np.clip((residual + 1.0) / 2.0, 0.0, 1.0)[None].astype(
                np.float32
            )
            res_dir = out / f"residual-{model}-{year}"
            write_archive(
                GridArchive(encoded, mask, obs_date, cell_area_km2=area), res_dir
            )
            residual_dirs[f"{model}-{year}"] = res_dir.name
            rows.append(
                [
                    model,
                    year,
                    obs_min,
                    obs_date.isoformat(),
                    pred_min,
                    pred_date.isoformat(),
                    (pred_date - obs_date).days,
                    pred_min - obs_min,
                ]
            )
    write_csv(
        out / "extremes.csv",
        [
            "model",
            "year",
            "obs_min_sie_km2",
            "obs_min_date",
            "pred_min_sie_km2",
            "pred_min_date",
            "timing_error_days",
            "value_error_km2",
        ],
        rows,
    )
    write_json(
        out / "summary.json",
        {
            "years": years,
            "init_offset_days": offset,
            "excluded_years": notes,
            "models": model_order,
            "residual_encoding": "stored = (pred - obs + 1) / 2, clipped to [0, 1]",
            "residual_dirs": residual_dirs,
            "skipped": [r.as_dict() for r in bank.skipped],
        },
    )
    for row in rows:
        print(
            f"extremes: {row[0]} {row[1]}: predicted min {fmt_cell(row[4])} km^2 "
            f"on {row[5]} vs observed {fmt_cell(row[2])} on {row[3]} "
            f"(timing {row[6]:+d} d)"
        )
    for record in bank.skipped:
        print(f"extremes: skipped {record.model}: {record.reason}")
    print(f"extremes: years {years} -> {out}")
    return 0


# -- ensembling -------------------------------------------------------------------


def cmd_ensemble(cfg: BenchConfig) -> int:
    """Rank trained latent backbones on the validation split and fit simplex
    weights for each rank tier (fitting never touches the test split)."""
    archive, splits = load_archive(cfg)
    bank = ModelBank(cfg, archive, splits)
    kinds = bank.available()
    pool = [k for k in kinds if k in LATENT_BACKBONES]
    if not pool:
        raise DataError(
            "ensembling needs at least one trained latent backbone; skipped: "
            + "; ".join(f"{r.model} ({r.reason})" for r in bank.skipped)
        )
    inits = eval_init_dates(bank, splits.val, truth_end=splits.val.end)
    if not inits:
        raise DataError(
            f"validation split {splits.val.start.isoformat()}.."
            f"{splits.val.end.isoformat()} cannot hold a full "
            f"{cfg.rollout.horizon}-day rollout"
        )
    ocean = archive.ocean
    scorers = {k: MetricAccumulator(archive.mask, bank.clim) for k in pool}
    gram = GramAccumulator(len(pool))
    for runs in bank.runs_for(pool, inits):
        for lead_idx in range(cfg.rollout.horizon):
            date = next(iter(runs.values())).dates[lead_idx]
            truth_field = archive.grid(date).values
            truth = truth_field.astype(np.float64)[ocean]
            preds = np.stack(
                [runs[k].values[lead_idx].astype(np.float64)[ocean] for k in pool]
            )
            gram.update(preds, truth)
            for k in pool:
                scorers[k].add(
                    runs[k].values[lead_idx], truth_field, date, lead_idx + 1
                )

    scores = []
    for kind in pool:
        per = scorers[kind].report().per_metric
        scores.append((kind, per["acc"], per["rmse"]))
    ranked = rank_members(scores)
    by_kind = {s[0]: s for s in scores}

    ws = workspace(cfg)
    ws.ensemble.mkdir(parents=True, exist_ok=True)
    tier_info: dict[str, Any] = {}
    for tier in sorted(RANK_TIERS):
        members = tier_members(ranked, tier)
        idx = [pool.index(m) for m in members]
        spec = fit_weights_from_gram(members, *gram.submatrices(idx), tier)
        spec.save(ws.ensemble / f"{tier}.json")
        tier_info[tier] = {
            "members": list(spec.member_ids),
            "weights": [float(w) for w in spec.weights],
            "fit_rmse": math.sqrt(max(spec.objective, 0.0)),
            "converged": spec.converged,
            "degenerate": spec.degenerate,
        }
    write_csv(
        ws.ensemble / "ranking.csv",
        ["rank", "member", "val_acc", "val_rmse"],
        [
            [i + 1, kind, by_kind[kind][1], by_kind[kind][2]]
            for i, kind in enumerate(ranked)
        ],
    )
    write_json(
        ws.ensemble / "summary.json",
        {
            "pool": pool,
            "ranked": ranked,
            "init_dates": [d.isoformat() for d in inits],
            "scores": {k: {"acc": v[1], "rmse": v[2]} for k, v in by_kind.items()},
            "tiers": tier_info,
            "skipped": [r.as_dict() for r in bank.skipped],
        },
    )
    for i, kind in enumerate(ranked):
        print(
            f"ensemble: rank {i + 1}: {kind} "
            f"(val ACC {fmt_cell(by_kind[kind][1])}, "
            f"RMSE {fmt_cell(by_kind[kind][2])})"
        )
    for tier in sorted(RANK_TIERS):
        info = tier_info[tier]
        weights = ", ".join(
            f"{m}={w:.3f}" for m, w in zip(info["members"], info["weights"])
        )
        flags = "".join(
            [
                "" if info["converged"] else " [not converged]",
                " [degenerate]" if info["degenerate"] else "",
            ]
        )
        print(
            f"ensemble: {tier}: fit RMSE {info['fit_rmse']:.6g} ({weights}){flags}"
        )
    print(f"ensemble: fitted on {len(inits)} validation inits -> {ws.ensemble}")
    return 0


# -- rolling-window comparison -----------------------------------------------------


def run_window_comparison(
    cfg: BenchConfig,
    windows: Sequence[int] | None = None,
    backbone: str | None = None,
) -> dict[int, dict]:
    """Train one backbone family at several window lengths, roll each out
    over the test inits, and contrast ACC-vs-lead plus its month-to-month
    stability."""
    wconf = cfg.raw.get("windows", {})
    windows = tuple(windows if windows is not None else wconf.get("windows", (7, 15)))
    backbone = backbone if backbone is not None else wconf.get("backbone", "dlinear")
    if backbone not in LATENT_BACKBONES:
        raise ConfigError(
            f"window comparison backbone {backbone!r} must be one of "
            f"{LATENT_BACKBONES}"
        )
    if any(w < 1 for w in windows) or len(set(windows)) != len(windows):
        raise ConfigError(f"window lengths must be unique and >= 1: {windows}")
    archive, splits = load_archive(cfg)
    ws = workspace(cfg)
    if not (ws.compressor / "compressor.json").exists():
        raise DataError(f"no fitted compressor at {ws.compressor}")
    if not (ws.latents / "series.json").exists():
        raise DataError(f"no latent series at {ws.latents}")
    comp = load_compressor(ws.compressor)
    series = LatentSeries.load(ws.latents)
    if series.compressor_id != comp.compressor_id:
        raise DataError(
            f"latent series {series.compressor_id!r} does not match compressor "
            f"{comp.compressor_id!r}; re-run `encode`"
        )
    clim = compute_climatology(archive, splits.train)
    z = series.normalized()
    t_lo, t_hi = _series_span(series, splits.train)
    v_lo, v_hi = _series_span(series, splits.val)

    out: dict[int, dict] = {}
    lead_rows: list[list] = []
    month_rows: list[list] = []
    summary: dict[str, Any] = {"backbone": backbone, "windows": {}}
    for window in windows:
        config = RolloutConfig.for_window(
            window,
            cfg.rollout.horizon,
            start_ratio=cfg.rollout.start_ratio,
            end_ratio=cfg.rollout.end_ratio,
            decay=cfg.rollout.decay,
        )
        overrides = dict(cfg.backbone_configs.get(backbone, {}))
        overrides.pop("train", None)
        overrides.pop("rollout", None)  # geometry comes from the window sweep
        if backbone == "dlinear":
            # Reflect padding caps the smoothing kernel at 2n-1 for an
            # n-day window; shrink it for the short-window arm.
            kernel = int(overrides.get("ma_kernel", 25))
            overrides["ma_kernel"] = min(kernel, 2 * config.n - 1)
        model = build_forecaster(
            backbone,
            config.n,
            config.p,
            series.latent_dim,
            seed=cfg.train.seed,
            train_z=z[t_lo:t_hi],
            train_offset=t_lo,
            **overrides,
        )
        train_starts = rollout_starts(t_lo, t_hi, config)
        val_starts = rollout_starts(v_lo, v_hi, config)
        if train_starts.size == 0 or val_starts.size == 0:
            raise DataError(
                f"splits too short for a {window}-day window "
                f"({config.total_steps} unrolled steps)"
            )
        fit_autoregressive(
            model,
            z,
            train_starts,
            val_starts,
            config,
            cfg.train,
            max_val_starts=cfg.max_val_starts,
        )

        first = max(
            splits.test.start, archive.start + dt.timedelta(days=config.n - 1)
        )
        last = min(
            splits.test.end, archive.end - dt.timedelta(days=config.horizon)
        )
        inits = []
        cursor = first
        while cursor <= last:
            inits.append(cursor)
            cursor += dt.timedelta(days=cfg.evaluation.init_stride)
        if not inits:
            raise DataError(f"no test init date fits a {window}-day window rollout")

        acc = MetricAccumulator(archive.mask, clim)

        def one(init: dt.date) -> ForecastRun:
            return rollout_latent(
                model,
                comp,
                series,
                init,
                config,
                cell_area_km2=archive.cell_area_km2,
                run_id=f"{backbone}-w{window}",
            )

        for chunk in _chunks(inits, max(worker_count(), 1)):
            for run in _pmap(one, chunk):
                for lead, date in enumerate(run.dates, start=1):
                    acc.add(
                        run.values[lead - 1], archive.grid(date).values, date, lead
                    )
        report = acc.report()
        monthly_acc = {
            m: report.per_month[m]["acc"] for m in sorted(report.per_month)
        }
        defined = [v for v in monthly_acc.values() if v is not None]
        variance = float(np.var(defined)) if len(defined) >= 2 else None
        for lead in sorted(report.per_lead):
            lead_rows.append([window, lead, report.per_lead[lead]["acc"]])
        for month, value in monthly_acc.items():
            month_rows.append([window, month, value])
        out[window] = {
            "config": config,
            "report": report,
            "monthly_acc": monthly_acc,
            "monthly_acc_variance": variance,
            "overall_acc": report.per_metric["acc"],
            "best_val_mse": model.history.get("best_val_mse"),
            "horizon": config.horizon,
        }
        summary["windows"][str(window)] = {
            "overall_acc": report.per_metric["acc"],
            "monthly_acc_variance": variance,
            "monthly_acc": {str(m): v for m, v in monthly_acc.items()},
            "best_val_mse": model.history.get("best_val_mse"),
            "n_inits": len(inits),
        }

    report_dir = ws.report_dir("windows")
    write_csv(report_dir / "acc_by_lead.csv", ["window", "lead", "acc"], lead_rows)
    write_csv(
        report_dir / "acc_by_month.csv", ["window", "month", "acc"], month_rows
    )
    write_json(report_dir / "summary.json", summary)
    for window in windows:
        info = out[window]
        print(
            f"windows: {backbone} w={window}: {info['horizon']}-day ACC "
            f"{fmt_cell(info['overall_acc'])}, monthly ACC variance "
            f"{fmt_cell(info['monthly_acc_variance'])}"
        )
    print(f"windows: -> {report_dir}")
    return out


def cmd_report(cfg: BenchConfig) -> int:
    from .report import render_summary

    ws = workspace(cfg)
    if not ws.reports.exists() or not any(ws.reports.iterdir()):
        raise DataError(
            f"no evaluation outputs under {ws.reports}; run the eval commands first"
        )
    path = render_summary(ws)
    print(f"report: -> {path}")
    return 0
