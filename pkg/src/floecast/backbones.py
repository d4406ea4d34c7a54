"""Forecast backbones.

Statistical baselines (persistence, daily climatology, damped anomaly
persistence) work directly in grid space. Learned backbones are light
linear/MLP sequence models over latent vectors: they map an n-day history
window to a p-day prediction and are trained supervised here (autoregressive
fine-tuning lives in the rollout module).

All learned models share the `_forward(x, end_idx)` contract where `x` is
a (batch, n, dim) tensor and `end_idx` gives each window's end position on
the latent-series timeline (only phase-aware models use it).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .grids import (
    OCEAN,
    Climatology,
    DateRange,
    GridArchive,
    _canonicalize,
    clim_doy,
)
from .nn import ParamStore, glorot
from .optim import Adam

GRID_BACKBONES = ("persistence", "climatology", "sdap")
LATENT_BACKBONES = ("dlinear", "nlinear", "cyclenet", "scinet")


class BackboneError(ValueError):
    """Invalid backbone configuration or input."""


# -- grid-space baselines -------------------------------------------------------


def persistence_forecast(init_values: np.ndarray, lead: int) -> np.ndarray:
    """The initial field, unchanged, at any lead."""
    if lead < 1:
        raise BackboneError(f"lead must be >= 1, got {lead}")
    return np.asarray(init_values, dtype=np.float32).copy()

def climatology_forecast(clim: Climatology, target_date: dt.date) -> np.ndarray:
    """The day-of-year mean field for the target date."""
    return clim.field_for(target_date)


@dataclass
class SdapModel:
    """Damped anomaly persistence: per-pixel lag-correlation damping factors.

    alpha[tau-1, i, j] multiplies the initial anomaly at lead tau; the
    forecast is climatology plus the damped anomaly, clipped to [0, 1].
    """

    clim: Climatology
    alphas: np.ndarray  # (max_lead, rows, cols) float32, 0 at non-ocean
    pair_counts: np.ndarray  # (max_lead,) int64
    min_pairs: int

    @property
    def max_lead(self) -> int:
        return self.alphas.shape[0]

    def forecast(
        self, init_values: np.ndarray, init_date: dt.date, lead: int
    ) -> np.ndarray:
        if not 1 <= lead <= self.max_lead:
            raise BackboneError(
                f"lead {lead} outside fitted range 1..{self.max_lead}"
            )
        anomaly = np.asarray(init_values, dtype=np.float64) - self.clim.field_for(
            init_date
        )
        target = init_date + dt.timedelta(days=lead)
        pred = self.clim.field_for(target) + self.alphas[lead - 1] * anomaly
        return _canonicalize(np.clip(pred, 0.0, 1.0), self.clim.mask)


def fit_sdap(
    archive: GridArchive,
    clim: Climatology,
    train_range: DateRange | None = None,
    max_lead: int = 180,
    min_pairs: int = 100,
) -> SdapModel:
    """Estimate per-pixel anomaly damping alpha(x, tau) on the training range.

    alpha = sum_t a_t a_{t+tau} / sum_t a_t^2 over the overlapping part of
    the range, clipped to [0, 1]; lags with fewer than `min_pairs` pairs get
    alpha = 0 (pure climatology).
    """
    rng = train_range or (archive.splits.train if archive.splits else archive.range())
    ocean = archive.ocean
    values = archive.values_for(rng)[:, ocean].astype(np.float64)
    clim_rows = np.stack(
        [clim.field_for(d)[ocean] for d in rng.days()]
    ).astype(np.float64)
    anom = values - clim_rows
    n = anom.shape[0]
    alphas = np.zeros((max_lead,) + archive.shape, dtype=np.float32)
    pair_counts = np.zeros(max_lead, dtype=np.int64)
    for tau in range(1, max_lead + 1):
        pairs = n - tau
        pair_counts[tau - 1] = max(pairs, 0)
        if pairs < min_pairs:
            continue
        head = anom[:pairs]
        num = np.sum(head * anom[tau:], axis=0)
        den = np.sum(head * head, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(den > 0.0, num / den, 0.0)
        alphas[tau - 1][ocean] = np.clip(a, 0.0, 1.0)
    return SdapModel(clim=clim, alphas=alphas, pair_counts=pair_counts,
                     min_pairs=min_pairs)


# -- shared pieces for learned backbones ---------------------------------------


def _time_linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Apply an (n -> p) linear map along the time axis of (B, n, d)."""
    bsz, n, d = x.shape
    t = ad.transpose(x, (0, 2, 1))
    t = ad.reshape(t, (bsz * d, n))
    t = ad.affine(t, w, b)
    t = ad.reshape(t, (bsz, d, w.shape[1]))
    return ad.transpose(t, (0, 2, 1))


def dominant_period(series: np.ndarray, cap: int = 366, fallback: int = 365) -> int:
    """Dominant cycle length of a multichannel series via the channel-mean
    magnitude spectrum; returns `fallback` when the spectrum is flat."""
    z = np.asarray(series, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2:
        raise BackboneError(f"period detection needs a (T, d) series, got {z.shape}")
    xm = z.mean(axis=1)
    xm = xm - xm.mean()
    mag = np.abs(np.fft.rfft(xm))
    if mag.size < 2 or float(mag[1:].max()) <= 1e-12:
        return fallback
    k = int(np.argmax(mag[1:])) + 1
    period = int(round(z.shape[0] / k))
    return max(1, min(period, cap))


class LatentForecaster:
    """Base: n-day window in, p-day prediction out, trainable parameters."""

    kind: str = "?"

    def __init__(self, n: int, p: int, dim: int):
        if n < 1 or p < 1 or dim < 1:
            raise BackboneError(f"invalid window sizes n={n} p={p} dim={dim}")
        self.n = n
        self.p = p
        self.dim = dim
        self.params = ParamStore()
        self.fitted = False
        self.history: dict = {}

    @property
    def forecaster_id(self) -> str:
        return f"{self.kind}-n{self.n}-p{self.p}"

    def _forward(self, x: Tensor, end_idx: np.ndarray | None) -> Tensor:
        raise NotImplementedError

    def forecast(self, window: np.ndarray, end_index: int | None = None) -> np.ndarray:
        """Predict the next p latent vectors from an (n, dim) window."""
        if not self.fitted:
            raise BackboneError(
                f"{self.forecaster_id} is not fitted; train or load it first"
            )
        w = np.asarray(window, dtype=np.float32)
        if w.shape != (self.n, self.dim):
            raise BackboneError(
                f"window shape {w.shape} != ({self.n}, {self.dim})"
            )
        idx = None if end_index is None else np.asarray([end_index], dtype=np.int64)
        with no_grad():
            out = self._forward(Tensor(w[None]), idx)
        return out.data[0]


class DLinear(LatentForecaster):
    """Trend/remainder split (moving-average kernel) with one linear map each."""

    kind = "dlinear"

    def __init__(self, n: int, p: int, dim: int, ma_kernel: int = 25):
        super().__init__(n, p, dim)
        self.ma_kernel = int(ma_kernel)
        init = np.full((n, p), 1.0 / n, dtype=np.float32)
        self.params.add("trend.w", init.copy())
        self.params.add("trend.b", np.zeros(p, np.float32))
        self.params.add("seasonal.w", init.copy())
        self.params.add("seasonal.b", np.zeros(p, np.float32))

    def _forward(self, x: Tensor, end_idx: np.ndarray | None) -> Tensor:
        trend = ad.moving_average_1d(x, self.ma_kernel, axis=1)
        seasonal = ad.sub(x, trend)
        out_t = _time_linear(trend, self.params["trend.w"], self.params["trend.b"])
        out_s = _time_linear(
            seasonal, self.params["seasonal.w"], self.params["seasonal.b"]
        )
        return ad.add(out_t, out_s)


class NLinear(LatentForecaster):
    """Last-value-anchored linear map; zero-initialized, so the untrained
    model is exactly persistence, and it is shift-equivariant by design."""

    kind = "nlinear"

    def __init__(self, n: int, p: int, dim: int):
        super().__init__(n, p, dim)
        self.params.add("linear.w", np.zeros((n, p), np.float32))
        self.params.add("linear.b", np.zeros(p, np.float32))

    def _forward(self, x: Tensor, end_idx: np.ndarray | None) -> Tensor:
        last = ad.slice_axis(x, 1, self.n - 1, self.n)
        centered = ad.sub(x, last)
        out = _time_linear(centered, self.params["linear.w"], self.params["linear.b"])
        return ad.add(out, last)


class CycleNet(LatentForecaster):
    """Learnable periodic table plus a zero-initialized residual linear head.

    The cycle table Q has one row per phase of the dominant period; window
    positions are mapped to phases by their index on the series timeline,
    so forecasts need the window-end index.
    """

    kind = "cyclenet"

    def __init__(
        self,
        n: int,
        p: int,
        dim: int,
        train_z: np.ndarray,
        train_offset: int = 0,
        period: int | None = None,
    ):
        super().__init__(n, p, dim)
        z = np.asarray(train_z, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != dim:
            raise BackboneError(f"train series shape {z.shape} != (T, {dim})")
        self.period = int(period) if period else dominant_period(z)
        q = np.zeros((self.period, dim), dtype=np.float64)
        phases = (train_offset + np.arange(z.shape[0])) % self.period
        for phi in range(self.period):
            rows = z[phases == phi]
            if rows.size:
                q[phi] = rows.mean(axis=0)
        self.params.add("cycle.q", q.astype(np.float32))
        self.params.add("head.w", np.zeros((n, p), np.float32))
        self.params.add("head.b", np.zeros(p, np.float32))

    def _phase_rows(self, phases: np.ndarray) -> Tensor:
        onehot = np.zeros((phases.size, self.period), dtype=np.float32)
        onehot[np.arange(phases.size), phases.ravel()] = 1.0
        return ad.matmul(Tensor(onehot), self.params["cycle.q"])

    def _forward(self, x: Tensor, end_idx: np.ndarray | None) -> Tensor:
        if end_idx is None:
            raise BackboneError("cyclenet needs window end indices for phase lookup")
        bsz = x.shape[0]
        ends = np.asarray(end_idx, dtype=np.int64)
        in_idx = ends[:, None] + np.arange(-self.n + 1, 1)
        out_idx = ends[:, None] + np.arange(1, self.p + 1)
        cyc_in = ad.reshape(
            self._phase_rows(in_idx % self.period), (bsz, self.n, self.dim)
        )
        cyc_out = ad.reshape(
            self._phase_rows(out_idx % self.period), (bsz, self.p, self.dim)
        )
        resid = ad.sub(x, cyc_in)
        head = _time_linear(resid, self.params["head.w"], self.params["head.b"])
        return ad.add(head, cyc_out)


class SCINetLite(LatentForecaster):
    """Recursive even/odd split with interactive modulation.

    At each tree node the two halves modulate each other:

        odd'  = odd  * exp(tanh(phi(even))) + psi(even)
        even' = even * exp(tanh(rho(odd)))  + eta(odd)

    The tanh bounds each multiplicative gate to [1/e, e]; without it the
    exponential gates compound across levels and rollout steps and training
    diverges on inputs more than a few standard deviations wide.

    The last layer of every node MLP and the output head start at zero, so
    the untrained network is the identity plus a zero head over the input
    window (requires n == p and n divisible by 2**levels).
    """

    kind = "scinet"

    def __init__(
        self,
        n: int,
        p: int,
        dim: int,
        levels: int = 2,
        hidden_ratio: float = 2.0,
        seed: int = 0,
    ):
        super().__init__(n, p, dim)
        if n != p:
            raise BackboneError(f"scinet needs n == p, got n={n} p={p}")
        if levels < 1 or n % (2**levels):
            raise BackboneError(
                f"scinet needs window length divisible by 2**levels "
                f"(n={n}, levels={levels})"
            )
        self.levels = levels
        self.hidden_ratio = float(hidden_ratio)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        for depth in range(levels):
            half = n // 2 ** (depth + 1)
            hidden = max(4, int(round(hidden_ratio * half)))
            for node in range(2**depth):
                for name in ("phi", "psi", "rho", "eta"):
                    prefix = f"lvl{depth}.node{node}.{name}"
                    self.params.add(prefix + ".fc1.w", glorot(rng, half, hidden))
                    self.params.add(prefix + ".fc1.b", np.zeros(hidden, np.float32))
                    self.params.add(prefix + ".fc2.w", np.zeros((hidden, half), np.float32))
                    self.params.add(prefix + ".fc2.b", np.zeros(half, np.float32))
        self.params.add("head.w", np.zeros((n, p), np.float32))
        self.params.add("head.b", np.zeros(p, np.float32))

    def _mlp(self, prefix: str, x: Tensor) -> Tensor:
        h = _time_linear(x, self.params[prefix + ".fc1.w"], self.params[prefix + ".fc1.b"])
        h = ad.gelu(h)
        return _time_linear(h, self.params[prefix + ".fc2.w"], self.params[prefix + ".fc2.b"])

    def _node(self, x: Tensor, depth: int, node: int) -> Tensor:
        if depth == self.levels:
            return x
        bsz, m, d = x.shape
        half = m // 2
        pairs = ad.reshape(x, (bsz, half, 2, d))
        even = ad.reshape(ad.slice_axis(pairs, 2, 0, 1), (bsz, half, d))
        odd = ad.reshape(ad.slice_axis(pairs, 2, 1, 2), (bsz, half, d))
        prefix = f"lvl{depth}.node{node}"
        odd2 = ad.add(
            ad.mul(odd, ad.exp(ad.tanh(self._mlp(prefix + ".phi", even)))),
            self._mlp(prefix + ".psi", even),
        )
        even2 = ad.add(
            ad.mul(even, ad.exp(ad.tanh(self._mlp(prefix + ".rho", odd)))),
            self._mlp(prefix + ".eta", odd),
        )
        even3 = self._node(even2, depth + 1, 2 * node)
        odd3 = self._node(odd2, depth + 1, 2 * node + 1)
        ev = ad.reshape(even3, (bsz, half, 1, d))
        od = ad.reshape(odd3, (bsz, half, 1, d))
        return ad.reshape(ad.concat([ev, od], axis=2), (bsz, m, d))

    def _forward(self, x: Tensor, end_idx: np.ndarray | None) -> Tensor:
        tree = self._node(x, 0, 0)
        head = _time_linear(tree, self.params["head.w"], self.params["head.b"])
        return ad.add(head, x)


def build_forecaster(
    kind: str,
    n: int,
    p: int,
    dim: int,
    seed: int = 0,
    train_z: np.ndarray | None = None,
    train_offset: int = 0,
    **kwargs,
) -> LatentForecaster:
    kind = kind.lower()
    if kind == "dlinear":
        return DLinear(n, p, dim, **kwargs)
    if kind == "nlinear":
        return NLinear(n, p, dim, **kwargs)
    if kind == "cyclenet":
        if train_z is None:
            raise BackboneError("cyclenet needs the training series at build time")
        return CycleNet(n, p, dim, train_z, train_offset, **kwargs)
    if kind == "scinet":
        return SCINetLite(n, p, dim, seed=seed, **kwargs)
    raise BackboneError(
        f"unknown backbone {kind!r}; latent kinds: {', '.join(LATENT_BACKBONES)}"
    )


# -- supervised window training -------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    patience: int | None = 5

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise BackboneError(
                f"epochs and batch_size must be >= 1, got {self.epochs}, "
                f"{self.batch_size}"
            )


def window_ends(t_lo: int, t_hi: int, n: int, p: int) -> np.ndarray:
    """Window-end indices e with history [e-n+1, e] and target [e+1, e+p]
    fully inside [t_lo, t_hi)."""
    lo = t_lo + n - 1
    hi = t_hi - p
    return np.arange(lo, hi, dtype=np.int64)


def _gather_windows(
    z: np.ndarray, ends: np.ndarray, n: int, p: int
) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([z[e - n + 1 : e + 1] for e in ends])
    y = np.stack([z[e + 1 : e + p + 1] for e in ends])
    return x, y


def fit_supervised(
    model: LatentForecaster,
    z: np.ndarray,
    train_ends: np.ndarray,
    val_ends: np.ndarray,
    config: TrainConfig,
) -> LatentForecaster:
    """Train on (window -> next p days) pairs; restores the best-validation
    snapshot before returning."""
    if train_ends.size == 0 or val_ends.size == 0:
        raise BackboneError(
            f"not enough days for any training/validation window "
            f"(train {train_ends.size}, val {val_ends.size})"
        )
    z = np.asarray(z, dtype=np.float32)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    opt = Adam(model.params.tensors(), lr=config.lr)
    x_val, y_val = _gather_windows(z, val_ends, model.n, model.p)

    def val_mse() -> float:
        se = 0.0
        with no_grad():
            for lo in range(0, val_ends.size, 256):
                xb = x_val[lo : lo + 256]
                out = model._forward(Tensor(xb), val_ends[lo : lo + 256])
                diff = out.data.astype(np.float64) - y_val[lo : lo + 256]
                se += float(np.sum(diff**2))
        return se / y_val.size

    best_val = np.inf
    best_state = model.params.state_dict()
    best_epoch = -1
    bad_epochs = 0
    train_hist: list[float] = []
    val_hist: list[float] = []
    for epoch in range(config.epochs):
        perm = rng.permutation(train_ends.size)
        losses = []
        for lo in range(0, train_ends.size, config.batch_size):
            ends = train_ends[perm[lo : lo + config.batch_size]]
            xb, yb = _gather_windows(z, ends, model.n, model.p)
            out = model._forward(Tensor(xb), ends)
            loss = ad.mse_loss(out, Tensor(yb))
            ad.backward(loss)
            opt.step()
            losses.append(float(loss.data))
        v = val_mse()
        train_hist.append(float(np.mean(losses)))
        val_hist.append(v)
        if v < best_val:
            best_val = v
            best_state = model.params.state_dict()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if config.patience is not None and bad_epochs > config.patience:
                break
    model.params.load_state(best_state)
    model.fitted = True
    model.history = {
        "mode": "supervised",
        "train_mse": train_hist,
        "val_mse": val_hist,
        "best_epoch": best_epoch,
        "best_val_mse": best_val,
    }
    return model


# -- persistence of learned backbones --------------------------------------------


def save_forecaster(model: LatentForecaster, path) -> None:
    """Checkpoint = tensor container + JSON sidecar (kind, sizes, history)."""
    import json
    from pathlib import Path

    from .checkpoint import save_tensors

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta: dict = {
        "kind": model.kind,
        "id": model.forecaster_id,
        "space": "latent",
        "n": model.n,
        "p": model.p,
        "dim": model.dim,
        "fitted": model.fitted,
        "history": model.history,
    }
    if isinstance(model, DLinear):
        meta["ma_kernel"] = model.ma_kernel
    elif isinstance(model, CycleNet):
        meta["period"] = model.period
    elif isinstance(model, SCINetLite):
        meta["levels"] = model.levels
        meta["hidden_ratio"] = model.hidden_ratio
    save_tensors(
        path / "tensors.bin",
        {name: model.params[name].data for name in model.params.names()},
    )
    (path / "forecaster.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n"
    )


def load_forecaster(path) -> LatentForecaster:
    import json
    from pathlib import Path

    from .checkpoint import load_tensors

    path = Path(path)
    meta = json.loads((path / "forecaster.json").read_text())
    n, p, dim, kind = meta["n"], meta["p"], meta["dim"], meta["kind"]
    if kind == "dlinear":
        model: LatentForecaster = DLinear(n, p, dim, ma_kernel=meta["ma_kernel"])
    elif kind == "nlinear":
        model = NLinear(n, p, dim)
    elif kind == "cyclenet":
        model = CycleNet(
            n, p, dim,
            train_z=np.zeros((1, dim), np.float32),
            period=meta["period"],
        )
    elif kind == "scinet":
        model = SCINetLite(
            n, p, dim, levels=meta["levels"],
            hidden_ratio=meta.get("hidden_ratio", 2.0),
        )
    else:
        raise BackboneError(f"unknown backbone kind {kind!r} in checkpoint")
    model.params.load_state(load_tensors(path / "tensors.bin"))
    model.fitted = bool(meta.get("fitted", True))
    model.history = meta.get("history", {})
    return model
