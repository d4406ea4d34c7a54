"""Latent compression of daily concentration grids.

Two interchangeable compressors map grids to k-dimensional vectors and
back:

* `EofCompressor` — truncated SVD of the (days x ocean-cells) anomaly
  matrix; linear, float64, exact orthonormal basis.
* `AutoencoderCompressor` — hierarchical patch autoencoder: a 2x2 patch
  embedding followed by stages that halve resolution (space-to-depth +
  linear merge, channels doubling) with per-position residual MLP
  mixing, then flatten + linear to the latent vector; the decoder
  mirrors the encoder. Trained on reconstruction MSE over ocean cells;
  the best-validation checkpoint is returned.

Both carry latent normalization statistics computed on their training
range, so downstream forecasters can work in z-scored latent space.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .checkpoint import load_tensors, save_tensors
from .grids import OCEAN, DateRange, GridArchive, SicGrid, _canonicalize
from .metrics import MetricAccumulator, MetricReport
from .nn import ParamStore, linear, residual_mlp
from .optim import Adam

_ENCODE_CHUNK = 128


class CompressionError(ValueError):
    """Invalid compressor configuration or input."""


class Compressor:
    """Common plumbing: normalization stats, grid wrappers, persistence."""

    kind: str = "?"

    def __init__(self, mask: np.ndarray, latent_dim: int, train_range: DateRange):
        self.mask = np.asarray(mask, dtype=np.uint8)
        self.ocean = self.mask == OCEAN
        self.latent_dim = int(latent_dim)
        self.train_range = train_range
        self.norm_mean = np.zeros(self.latent_dim, dtype=np.float64)
        self.norm_std = np.ones(self.latent_dim, dtype=np.float64)
        self.warnings: list[str] = []

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def compressor_id(self) -> str:
        return f"{self.kind}-k{self.latent_dim}"

    # subclasses implement encode_values / decode_values
    def encode_values(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decode_values(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def encode_grid(self, grid: SicGrid) -> np.ndarray:
        return self.encode_values(grid.values)

    def decode_grid(self, z: np.ndarray, date: dt.date) -> SicGrid:
        return SicGrid(self.decode_values(z), self.mask, date)

    def normalize(self, z: np.ndarray) -> np.ndarray:
        return (np.asarray(z, dtype=np.float64) - self.norm_mean) / self.norm_std

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.norm_std + self.norm_mean

    def _fit_norm_stats(self, latents: np.ndarray) -> None:
        z = np.asarray(latents, dtype=np.float64)
        self.norm_mean = z.mean(axis=0)
        self.norm_std = np.maximum(z.std(axis=0), 1e-8)

    def _expand(self, flat: np.ndarray) -> np.ndarray:
        """Scatter (n, ocean-cells) rows into full canonical grids."""
        n = flat.shape[0]
        out = np.zeros((n,) + self.grid_shape, dtype=np.float32)
        out[:, self.ocean] = np.clip(flat, 0.0, 1.0)
        return _canonicalize(out, self.mask)


# -- EOF ----------------------------------------------------------------------


class EofCompressor(Compressor):
    """Orthonormal truncated basis of ocean-cell anomalies (float64)."""

    kind = "eof"

    def __init__(
        self,
        mask: np.ndarray,
        train_range: DateRange,
        mean: np.ndarray,
        basis: np.ndarray,
        singular_values: np.ndarray,
        total_variance: float,
    ):
        super().__init__(mask, basis.shape[1], train_range)
        self.mean = np.asarray(mean, dtype=np.float64)
        self.basis = np.asarray(basis, dtype=np.float64)
        self.singular_values = np.asarray(singular_values, dtype=np.float64)
        self.total_variance = float(total_variance)

    @property
    def explained_variance_fraction(self) -> float:
        if self.total_variance <= 0:
            return 1.0
        return float(np.sum(self.singular_values**2) / self.total_variance)

    def _gather(self, values: np.ndarray) -> tuple[np.ndarray, bool]:
        v = np.asarray(values)
        single = v.ndim == 2
        if single:
            v = v[None]
        if v.shape[1:] != self.grid_shape:
            raise CompressionError(
                f"grid shape {v.shape[1:]} != compressor shape {self.grid_shape}"
            )
        return v[:, self.ocean].astype(np.float64), single

    def encode_values(self, values: np.ndarray) -> np.ndarray:
        flat, single = self._gather(values)
        z = (flat - self.mean) @ self.basis
        return z[0] if single else z

    def decode_values(self, z: np.ndarray) -> np.ndarray:
        zz = np.asarray(z, dtype=np.float64)
        single = zz.ndim == 1
        if single:
            zz = zz[None]
        if zz.shape[1] != self.latent_dim:
            raise CompressionError(f"latent dim {zz.shape[1]} != {self.latent_dim}")
        recon = zz @ self.basis.T + self.mean
        out = self._expand(recon)
        return out[0] if single else out


def fit_eof(
    archive: GridArchive, k: int, train_range: DateRange | None = None
) -> EofCompressor:
    """Truncated SVD of the anomaly matrix over the training range.

    `k` is clamped to the number of available modes; a note is recorded on
    the returned compressor when that happens or when `k` exceeds the
    numerical rank.
    """
    if k < 1:
        raise CompressionError(f"latent dim must be >= 1, got {k}")
    rng = _resolve_train_range(archive, train_range)
    x = archive.values_for(rng)[:, archive.ocean].astype(np.float64)
    mean = x.mean(axis=0)
    anom = x - mean
    _, s, vt = np.linalg.svd(anom, full_matrices=False)
    warnings = []
    k_eff = min(k, s.size)
    if k_eff < k:
        warnings.append(
            f"latent dim reduced from {k} to {k_eff} (only {s.size} modes available)"
        )
    tol = s[0] * max(anom.shape) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if k_eff > rank:
        warnings.append(f"latent dim {k_eff} exceeds numerical rank {rank}")
    comp = EofCompressor(
        archive.mask,
        rng,
        mean,
        vt[:k_eff].T,
        s[:k_eff],
        float(np.sum(s**2)),
    )
    comp.warnings.extend(warnings)
    comp._fit_norm_stats(comp.encode_values(archive.values_for(rng)))
    return comp


# -- hierarchical patch autoencoder --------------------------------------------


@dataclass(frozen=True)
class AutoencoderConfig:
    latent_dim: int = 32
    n_stages: int = 2
    base_channels: int = 8
    mlp_ratio: float = 2.0
    epochs: int = 30
    batch_size: int = 16
    lr: float = 2e-3
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.latent_dim < 1:
            raise CompressionError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.n_stages < 1:
            raise CompressionError(f"n_stages must be >= 1, got {self.n_stages}")
        if self.epochs < 0:
            # epochs=0 is legal: training is skipped and the freshly
            # initialized model is returned.
            raise CompressionError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 < self.val_fraction < 0.5:
            raise CompressionError(
                f"val_fraction must be in (0, 0.5), got {self.val_fraction}"
            )

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _space_to_depth(t: Tensor) -> Tensor:
    b, h, w, c = t.shape
    t = ad.reshape(t, (b, h // 2, 2, w // 2, 2, c))
    t = ad.transpose(t, (0, 1, 3, 2, 4, 5))
    return ad.reshape(t, (b, h // 2, w // 2, 4 * c))


def _depth_to_space(t: Tensor) -> Tensor:
    b, h, w, c4 = t.shape
    c = c4 // 4
    t = ad.reshape(t, (b, h, w, 2, 2, c))
    t = ad.transpose(t, (0, 1, 3, 2, 4, 5))
    return ad.reshape(t, (b, 2 * h, 2 * w, c))


class AutoencoderCompressor(Compressor):
    kind = "autoencoder"

    def __init__(
        self,
        mask: np.ndarray,
        train_range: DateRange,
        config: AutoencoderConfig,
        params: ParamStore | None = None,
    ):
        super().__init__(mask, config.latent_dim, train_range)
        self.config = config
        rows, cols = self.grid_shape
        factor = 2 ** (1 + config.n_stages)
        self.padded_shape = (
            -(-rows // factor) * factor,
            -(-cols // factor) * factor,
        )
        if max(self.padded_shape[0] - rows, self.padded_shape[1] - cols) >= min(
            rows, cols
        ):
            raise CompressionError(
                f"grid {rows}x{cols} too small for {config.n_stages} stages"
            )
        self.final_shape = (
            self.padded_shape[0] // factor,
            self.padded_shape[1] // factor,
            config.base_channels * 2**config.n_stages,
        )
        self.history: dict[str, list | int] = {}
        self.params = params if params is not None else self._init_params()

    def _init_params(self) -> ParamStore:
        cfg = self.config
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
        store = ParamStore()
        store.add_linear("embed", 4, cfg.base_channels, rng)
        for i in range(cfg.n_stages):
            ch_in = cfg.base_channels * 2**i
            ch = 2 * ch_in
            hidden = max(1, int(round(cfg.mlp_ratio * ch)))
            store.add_linear(f"enc{i}.merge", 4 * ch_in, ch, rng)
            store.add_linear(f"enc{i}.mix.fc1", ch, hidden, rng)
            store.add_linear(f"enc{i}.mix.fc2", hidden, ch, rng)
        flat = int(np.prod(self.final_shape))
        store.add_linear("to_latent", flat, cfg.latent_dim, rng)
        store.add_linear("from_latent", cfg.latent_dim, flat, rng)
        for i in reversed(range(cfg.n_stages)):
            ch = cfg.base_channels * 2 ** (i + 1)
            hidden = max(1, int(round(cfg.mlp_ratio * ch)))
            store.add_linear(f"dec{i}.mix.fc1", ch, hidden, rng)
            store.add_linear(f"dec{i}.mix.fc2", hidden, ch, rng)
            store.add_linear(f"dec{i}.expand", ch, 2 * ch, rng)
        store.add_linear("unembed", cfg.base_channels, 4, rng)
        return store

    # -- forward passes --------------------------------------------------

    def _prepare(self, values: np.ndarray) -> np.ndarray:
        """Fill non-ocean cells with 0 and reflect-pad to the padded shape."""
        v = np.asarray(values, dtype=np.float32)
        if v.shape[1:] != self.grid_shape:
            raise CompressionError(
                f"grid shape {v.shape[1:]} != compressor shape {self.grid_shape}"
            )
        filled = np.where(self.ocean, v, np.float32(0.0))
        pad_r = self.padded_shape[0] - self.grid_shape[0]
        pad_c = self.padded_shape[1] - self.grid_shape[1]
        if pad_r or pad_c:
            filled = np.pad(filled, ((0, 0), (0, pad_r), (0, pad_c)), mode="reflect")
        return filled

    def _encode_tensor(self, x: Tensor) -> Tensor:
        b = x.shape[0]
        t = ad.reshape(x, x.shape + (1,))
        t = _space_to_depth(t)
        t = linear(self.params, "embed", t)
        for i in range(self.config.n_stages):
            t = _space_to_depth(t)
            t = linear(self.params, f"enc{i}.merge", t)
            t = residual_mlp(self.params, f"enc{i}.mix", t)
        t = ad.reshape(t, (b, int(np.prod(self.final_shape))))
        return linear(self.params, "to_latent", t)

    def _decode_tensor(self, z: Tensor) -> Tensor:
        b = z.shape[0]
        t = linear(self.params, "from_latent", z)
        t = ad.reshape(t, (b,) + self.final_shape)
        for i in reversed(range(self.config.n_stages)):
            t = residual_mlp(self.params, f"dec{i}.mix", t)
            t = linear(self.params, f"dec{i}.expand", t)
            t = _depth_to_space(t)
        t = linear(self.params, "unembed", t)
        t = _depth_to_space(t)
        t = ad.reshape(t, (b,) + self.padded_shape)
        rows, cols = self.grid_shape
        if self.padded_shape[0] > rows:
            t = ad.slice_axis(t, 1, 0, rows)
        if self.padded_shape[1] > cols:
            t = ad.slice_axis(t, 2, 0, cols)
        return t

    # -- public encode/decode ---------------------------------------------

    def encode_values(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values)
        single = v.ndim == 2
        if single:
            v = v[None]
        prepared = self._prepare(v)
        out = np.empty((v.shape[0], self.latent_dim), dtype=np.float32)
        with no_grad():
            for lo in range(0, v.shape[0], _ENCODE_CHUNK):
                chunk = prepared[lo : lo + _ENCODE_CHUNK]
                out[lo : lo + chunk.shape[0]] = self._encode_tensor(Tensor(chunk)).data
        return out[0] if single else out

    def decode_values(self, z: np.ndarray) -> np.ndarray:
        zz = np.asarray(z, dtype=np.float32)
        single = zz.ndim == 1
        if single:
            zz = zz[None]
        if zz.shape[1] != self.latent_dim:
            raise CompressionError(f"latent dim {zz.shape[1]} != {self.latent_dim}")
        n = zz.shape[0]
        out = np.full((n,) + self.grid_shape, np.nan, dtype=np.float32)
        with no_grad():
            for lo in range(0, n, _ENCODE_CHUNK):
                raw = self._decode_tensor(Tensor(zz[lo : lo + _ENCODE_CHUNK])).data
                out[lo : lo + raw.shape[0]] = _canonicalize(
                    np.clip(raw, 0.0, 1.0), self.mask
                )
        return out[0] if single else out


def _resolve_train_range(archive: GridArchive, asked: DateRange | None) -> DateRange:
    if asked is not None:
        return asked
    if archive.splits is not None:
        return archive.splits.train
    return archive.range()


def fit_autoencoder(
    archive: GridArchive,
    config: AutoencoderConfig,
    train_range: DateRange | None = None,
    val_range: DateRange | None = None,
) -> AutoencoderCompressor:
    """Train the patch autoencoder; returns the best-validation snapshot.

    Validation days come from `val_range`, the archive's validation split,
    or (failing both) the tail `val_fraction` of the training range.
    """
    train_rng = _resolve_train_range(archive, train_range)
    if val_range is None and archive.splits is not None and train_range is None:
        val_range = archive.splits.val
    if val_range is None:
        n_val = max(1, int(round(train_rng.n_days * config.val_fraction)))
        if train_rng.n_days - n_val < 1:
            raise CompressionError(
                f"training range of {train_rng.n_days} days too short to "
                "carve out validation days"
            )
        cut = train_rng.start + dt.timedelta(days=train_rng.n_days - n_val - 1)
        val_range = DateRange(cut + dt.timedelta(days=1), train_rng.end)
        train_rng = DateRange(train_rng.start, cut)

    comp = AutoencoderCompressor(archive.mask, train_rng, config)
    train_vals = archive.values_for(train_rng)
    val_vals = archive.values_for(val_range)
    x_train = comp._prepare(train_vals)
    x_val = comp._prepare(val_vals)
    rows, cols = comp.grid_shape
    target_train = x_train[:, :rows, :cols]
    target_val = x_val[:, :rows, :cols]
    weights = comp.ocean.astype(np.float32)

    ss = np.random.SeedSequence(config.seed)
    batch_rng = np.random.default_rng(ss.spawn(2)[1])
    opt = Adam(comp.params.tensors(), lr=config.lr)

    def val_mse() -> float:
        se = 0.0
        n_vals = 0
        with no_grad():
            for lo in range(0, x_val.shape[0], _ENCODE_CHUNK):
                xb = x_val[lo : lo + _ENCODE_CHUNK]
                recon = comp._decode_tensor(
                    comp._encode_tensor(Tensor(xb))
                ).data.astype(np.float64)
                diff = recon - target_val[lo : lo + xb.shape[0]]
                se += float(np.sum(weights * diff**2))
                n_vals += xb.shape[0]
        return se / (n_vals * float(weights.sum()))

    n = x_train.shape[0]
    best_val = np.inf
    best_state = comp.params.state_dict()
    best_epoch = -1
    train_hist: list[float] = []
    val_hist: list[float] = []
    for epoch in range(config.epochs):
        perm = batch_rng.permutation(n)
        losses: list[float] = []
        for lo in range(0, n, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            xb = Tensor(x_train[idx])
            recon = comp._decode_tensor(comp._encode_tensor(xb))
            w = np.broadcast_to(weights, recon.shape)
            loss = ad.mse_loss(recon, Tensor(target_train[idx]), weights=w)
            ad.backward(loss)
            opt.step()
            losses.append(float(loss.data))
        v = val_mse()
        train_hist.append(float(np.mean(losses)))
        val_hist.append(v)
        if v < best_val:
            best_val = v
            best_state = comp.params.state_dict()
            best_epoch = epoch
    comp.params.load_state(best_state)
    if not val_hist:  # epochs=0: report the initialized model's score
        best_val = val_mse()
    comp.history = {
        "train_mse": train_hist,
        "val_mse": val_hist,
        "best_epoch": best_epoch,
        "best_val_mse": best_val,
    }
    comp._fit_norm_stats(comp.encode_values(train_vals))
    return comp


# -- latent series -------------------------------------------------------------


@dataclass
class LatentSeries:
    """Consecutive daily latent vectors plus the train-range z-scoring stats."""

    vectors: np.ndarray
    start: dt.date
    compressor_id: str
    norm_mean: np.ndarray
    norm_std: np.ndarray

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors)
        if self.vectors.ndim != 2:
            raise CompressionError(
                f"latent series must be 2-D, got shape {self.vectors.shape}"
            )

    @property
    def n_days(self) -> int:
        return self.vectors.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=self.n_days - 1)

    def index_of(self, date: dt.date) -> int:
        i = (date - self.start).days
        if not 0 <= i < self.n_days:
            raise KeyError(f"{date.isoformat()} outside latent series "
                           f"{self.start.isoformat()}..{self.end.isoformat()}")
        return i

    def normalized(self) -> np.ndarray:
        return (
            (self.vectors.astype(np.float64) - self.norm_mean) / self.norm_std
        ).astype(np.float32)

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.norm_std + self.norm_mean

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        save_tensors(
            path / "series.bin",
            {
                "vectors": self.vectors,
                "norm_mean": self.norm_mean,
                "norm_std": self.norm_std,
            },
        )
        meta = {"start": self.start.isoformat(), "compressor_id": self.compressor_id}
        (path / "series.json").write_text(json.dumps(meta, sort_keys=True, indent=2))

    @staticmethod
    def load(path: str | Path) -> "LatentSeries":
        path = Path(path)
        meta = json.loads((path / "series.json").read_text())
        tensors = load_tensors(path / "series.bin")
        return LatentSeries(
            vectors=tensors["vectors"],
            start=dt.date.fromisoformat(meta["start"]),
            compressor_id=meta["compressor_id"],
            norm_mean=tensors["norm_mean"],
            norm_std=tensors["norm_std"],
        )


def encode_series(
    compressor: Compressor, archive: GridArchive, rng: DateRange | None = None
) -> LatentSeries:
    rng = rng if rng is not None else archive.range()
    vectors = compressor.encode_values(archive.values_for(rng))
    return LatentSeries(
        vectors=np.asarray(vectors, dtype=np.float32),
        start=rng.start,
        compressor_id=compressor.compressor_id,
        norm_mean=compressor.norm_mean.copy(),
        norm_std=compressor.norm_std.copy(),
    )


def evaluate_reconstruction(
    compressor: Compressor, archive: GridArchive, rng: DateRange | None = None
) -> MetricReport:
    """Round-trip decode(encode(x)) scored against the archive."""
    rng = rng if rng is not None else archive.range()
    acc = MetricAccumulator(archive.mask)
    dates = list(rng.days())
    values = archive.values_for(rng)
    recon = compressor.decode_values(compressor.encode_values(values))
    for i, date in enumerate(dates):
        acc.add(recon[i], values[i], date)
    return acc.report()


# -- persistence ---------------------------------------------------------------


def save_compressor(comp: Compressor, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "kind": comp.kind,
        "latent_dim": comp.latent_dim,
        "grid_shape": list(comp.grid_shape),
        "train_range": comp.train_range.to_json(),
        "warnings": comp.warnings,
    }
    tensors: dict[str, np.ndarray] = {
        "mask": comp.mask,
        "norm_mean": comp.norm_mean,
        "norm_std": comp.norm_std,
    }
    if isinstance(comp, EofCompressor):
        tensors["mean"] = comp.mean
        tensors["basis"] = comp.basis
        tensors["singular_values"] = comp.singular_values
        meta["total_variance"] = comp.total_variance
    elif isinstance(comp, AutoencoderCompressor):
        meta["config"] = comp.config.to_json()
        meta["history"] = comp.history
        for name in comp.params.names():
            tensors["param." + name] = comp.params[name].data
    else:  # pragma: no cover - future kinds
        raise CompressionError(f"cannot save compressor kind {comp.kind!r}")
    save_tensors(path / "tensors.bin", tensors)
    (path / "compressor.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n"
    )


def load_compressor(path: str | Path) -> Compressor:
    path = Path(path)
    meta = json.loads((path / "compressor.json").read_text())
    tensors = load_tensors(path / "tensors.bin")
    train_range = DateRange.from_json(meta["train_range"])
    mask = tensors["mask"]
    kind = meta["kind"]
    if kind == "eof":
        comp: Compressor = EofCompressor(
            mask,
            train_range,
            tensors["mean"],
            tensors["basis"],
            tensors["singular_values"],
            meta["total_variance"],
        )
    elif kind == "autoencoder":
        config = AutoencoderConfig(**meta["config"])
        comp = AutoencoderCompressor(mask, train_range, config)
        comp.params.load_state(
            {
                name[len("param.") :]: arr
                for name, arr in tensors.items()
                if name.startswith("param.")
            }
        )
        comp.history = meta.get("history", {})
    else:
        raise CompressionError(f"unknown compressor kind {kind!r}")
    comp.norm_mean = tensors["norm_mean"].astype(np.float64)
    comp.norm_std = tensors["norm_std"].astype(np.float64)
    comp.warnings = list(meta.get("warnings", []))
    return comp
