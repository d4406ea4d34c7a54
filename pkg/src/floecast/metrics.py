"""Forecast and reconstruction quality metrics over masked grids.

Every statistic runs over ocean cells only, accumulates in float64, and
reports `None` for undefined results instead of letting NaN propagate.
PSNR returns +inf ("exact") when the error is identically zero.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .grids import OCEAN, Climatology

EPS = 1e-12

SSIM_WINDOW = 7
SSIM_C1 = (0.01 * 1.0) ** 2
SSIM_C2 = (0.03 * 1.0) ** 2

METRIC_NAMES = ("mse", "rmse", "mae", "nse", "r2", "acc", "psnr", "ssim")


def _as_stack(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        return a[None]
    if a.ndim != 3:
        raise ValueError(f"expected 2-D grid or 3-D series, got shape {a.shape}")
    return a


def _ocean_pair(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray):
    p, t = _as_stack(pred), _as_stack(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs truth {t.shape}")
    if p.shape[1:] != mask.shape:
        raise ValueError(f"grid shape {p.shape[1:]} does not match mask {mask.shape}")
    ocean = mask == OCEAN
    if not ocean.any():
        raise ValueError("mask has no ocean cells")
    return p[:, ocean], t[:, ocean]  # (samples, cells)


def mse(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    p, t = _ocean_pair(pred, truth, mask)
    return float(np.mean((p - t) ** 2))


def rmse(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    return math.sqrt(mse(pred, truth, mask))


def mae(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    p, t = _ocean_pair(pred, truth, mask)
    return float(np.mean(np.abs(p - t)))


def nse(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float | None:
    """Nash-Sutcliffe efficiency against each sample's spatial mean.

    Multi-sample input pools numerator and denominator before the ratio.
    Returns None when the truth is spatially constant (denominator ~ 0).
    """
    p, t = _ocean_pair(pred, truth, mask)
    num = float(np.sum((t - p) ** 2))
    den = float(np.sum((t - t.mean(axis=1, keepdims=True)) ** 2))
    if den < EPS:
        return None
    return 1.0 - num / den


def r2(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float | None:
    """Coefficient of determination against the per-pixel temporal mean.

    The baseline is each pixel's mean truth over the evaluation window, so a
    single-sample window is always undefined.
    """
    p, t = _ocean_pair(pred, truth, mask)
    num = float(np.sum((t - p) ** 2))
    den = float(np.sum((t - t.mean(axis=0, keepdims=True)) ** 2))
    if den < EPS:
        return None
    return 1.0 - num / den


def acc(
    pred: np.ndarray,
    truth: np.ndarray,
    clim: Climatology,
    date: dt.date,
    mask: np.ndarray | None = None,
) -> float | None:
    """Anomaly correlation coefficient against the day-of-year climatology."""
    if mask is None:
        mask = clim.mask
    return acc_field(pred, truth, clim.field_for(date), mask)


def acc_field(
    pred: np.ndarray, truth: np.ndarray, clim_field: np.ndarray, mask: np.ndarray
) -> float | None:
    """ACC with an explicit climatology field; anomaly means are not re-subtracted."""
    p, t = _ocean_pair(pred, truth, mask)
    c = np.asarray(clim_field, dtype=np.float64)[mask == OCEAN][None]
    ap = p - c
    at = t - c
    norm = math.sqrt(float(np.sum(ap**2))) * math.sqrt(float(np.sum(at**2)))
    if norm < EPS:
        return None
    return float(np.sum(ap * at)) / norm


def psnr(
    pred: np.ndarray, truth: np.ndarray, mask: np.ndarray, max_val: float = 1.0
) -> float:
    m = mse(pred, truth, mask)
    if m == 0.0:
        return math.inf  # reported as "exact"
    return 10.0 * math.log10(max_val**2 / m)


def _box_sums(a: np.ndarray, w: int) -> np.ndarray:
    """Sliding w-by-w window sums via an integral image, 'valid' placement."""
    rows, cols = a.shape
    s = np.zeros((rows + 1, cols + 1), dtype=np.float64)
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=s[1:, 1:])
    return s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]


def ssim(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float | None:
    """Mean local SSIM over 7x7 uniform windows fully inside ocean.

    Returns None when no window is free of land/pole-hole cells.
    """
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs truth {t.shape}")
    if p.shape != mask.shape:
        raise ValueError(f"grid shape {p.shape} does not match mask {mask.shape}")
    w = SSIM_WINDOW
    if p.shape[0] < w or p.shape[1] < w:
        return None
    ocean = (mask == OCEAN).astype(np.float64)
    valid = _box_sums(ocean, w) > (w * w - 0.5)
    if not valid.any():
        return None
    x = np.where(mask == OCEAN, p, 0.0)
    y = np.where(mask == OCEAN, t, 0.0)
    n = float(w * w)
    mu_x = _box_sums(x, w) / n
    mu_y = _box_sums(y, w) / n
    var_x = _box_sums(x * x, w) / n - mu_x**2
    var_y = _box_sums(y * y, w) / n - mu_y**2
    cov = _box_sums(x * y, w) / n - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_x**2 + mu_y**2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean((num / den)[valid]))


# -- detrended yearly-series statistics --------------------------------------


@dataclass(frozen=True)
class DetrendedScores:
    """Skill of a yearly scalar series after removing each side's linear trend."""

    rmse_detrend: float | None
    acc_detrend: float | None
    acc: float | None
    n_years: int


def _residuals(series: np.ndarray) -> np.ndarray:
    x = np.arange(series.size, dtype=np.float64)
    design = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(design, series, rcond=None)
    return series - design @ coef


def _uncentered_corr(a: np.ndarray, b: np.ndarray) -> float | None:
    norm = math.sqrt(float(np.sum(a**2))) * math.sqrt(float(np.sum(b**2)))
    if norm < EPS:
        return None
    return float(np.sum(a * b)) / norm


def detrended_metrics(
    pred_series: Iterable[float], truth_series: Iterable[float]
) -> DetrendedScores:
    """RMSE and correlation of OLS-detrended residuals, plus plain anomaly ACC.

    Plain ACC correlates anomalies about the truth's climatological mean.
    Fewer than 3 samples leaves the detrended statistics undefined.
    """
    p = np.asarray(list(pred_series), dtype=np.float64)
    t = np.asarray(list(truth_series), dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"series length mismatch: {p.shape} vs {t.shape}")
    n = p.size
    clim_mean = float(t.mean()) if n else 0.0
    acc_plain = _uncentered_corr(p - clim_mean, t - clim_mean) if n >= 2 else None
    if n < 3:
        return DetrendedScores(None, None, acc_plain, n)
    rp = _residuals(p)
    rt = _residuals(t)
    return DetrendedScores(
        rmse_detrend=float(np.sqrt(np.mean((rp - rt) ** 2))),
        acc_detrend=_uncentered_corr(rp, rt),
        acc=acc_plain,
        n_years=n,
    )


# -- pooled reports ----------------------------------------------------------


class _GroupStats:
    """Pooled sufficient statistics for one report group."""

    __slots__ = (
        "n",
        "cells",
        "se",
        "ae",
        "nse_den",
        "sum_t",
        "sum_t2",
        "acc_sum",
        "acc_n",
        "acc_skipped",
        "ssim_sum",
        "ssim_n",
        "ssim_skipped",
    )

    def __init__(self, n_cells: int):
        self.n = 0
        self.cells = n_cells
        self.se = 0.0
        self.ae = 0.0
        self.nse_den = 0.0
        self.sum_t = np.zeros(n_cells, dtype=np.float64)
        self.sum_t2 = np.zeros(n_cells, dtype=np.float64)
        self.acc_sum = 0.0
        self.acc_n = 0
        self.acc_skipped = 0
        self.ssim_sum = 0.0
        self.ssim_n = 0
        self.ssim_skipped = 0

    def add(self, p: np.ndarray, t: np.ndarray, acc_val, ssim_val) -> None:
        self.n += 1
        self.se += float(np.sum((p - t) ** 2))
        self.ae += float(np.sum(np.abs(p - t)))
        self.nse_den += float(np.sum((t - t.mean()) ** 2))
        self.sum_t += t
        self.sum_t2 += t * t
        if acc_val is None:
            self.acc_skipped += 1
        else:
            self.acc_sum += acc_val
            self.acc_n += 1
        if ssim_val is None:
            self.ssim_skipped += 1
        else:
            self.ssim_sum += ssim_val
            self.ssim_n += 1

    def finalize(self) -> dict[str, float | None]:
        total = self.n * self.cells
        if total == 0:
            return {name: None for name in METRIC_NAMES}
        mse_val = self.se / total
        r2_den = float(np.sum(self.sum_t2 - self.sum_t**2 / self.n))
        return {
            "mse": mse_val,
            "rmse": math.sqrt(mse_val),
            "mae": self.ae / total,
            "nse": 1.0 - self.se / self.nse_den if self.nse_den >= EPS else None,
            "r2": 1.0 - self.se / r2_den if r2_den >= EPS else None,
            "acc": self.acc_sum / self.acc_n if self.acc_n else None,
            "psnr": (
                math.inf if mse_val == 0.0 else 10.0 * math.log10(1.0 / mse_val)
            ),
            "ssim": self.ssim_sum / self.ssim_n if self.ssim_n else None,
        }


@dataclass
class MetricReport:
    """Pooled metrics plus per-lead curves and per-calendar-month tables."""

    per_metric: dict[str, float | None]
    per_lead: dict[int, dict[str, float | None]]
    per_month: dict[int, dict[str, float | None]]
    n_samples: int
    acc_skipped: int = 0
    ssim_skipped: int = 0

    def to_json(self) -> str:
        def enc(v):
            if v is None:
                return None
            if isinstance(v, float) and math.isinf(v):
                return "exact"
            return v

        payload = {
            "n_samples": self.n_samples,
            "acc_skipped": self.acc_skipped,
            "ssim_skipped": self.ssim_skipped,
            "per_metric": {k: enc(v) for k, v in self.per_metric.items()},
            "per_lead": {
                str(lead): {k: enc(v) for k, v in row.items()}
                for lead, row in sorted(self.per_lead.items())
            },
            "per_month": {
                str(m): {k: enc(v) for k, v in row.items()}
                for m, row in sorted(self.per_month.items())
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def write_csv(self, path: str | Path) -> None:
        """Flat CSV: one row per (lead, metric) and per (month, metric)."""

        def fmt(v):
            if v is None:
                return "undefined"
            if isinstance(v, float) and math.isinf(v):
                return "exact"
            return repr(float(v))

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["group", "key", "metric", "value"])
            for name in METRIC_NAMES:
                writer.writerow(["overall", "", name, fmt(self.per_metric[name])])
            for lead in sorted(self.per_lead):
                for name in METRIC_NAMES:
                    writer.writerow(["lead", lead, name, fmt(self.per_lead[lead][name])])
            for month in sorted(self.per_month):
                for name in METRIC_NAMES:
                    writer.writerow(
                        ["month", month, name, fmt(self.per_month[month][name])]
                    )


class MetricAccumulator:
    """Streams (pred, truth) grid pairs into a MetricReport.

    Grouping is by lead day and by the *target* date's calendar month.
    Accumulation order is fixed by the caller, so reports are run-to-run
    identical.
    """

    def __init__(self, mask: np.ndarray, clim: Climatology | None = None):
        self.mask = mask
        self.ocean = mask == OCEAN
        self.n_cells = int(self.ocean.sum())
        if self.n_cells == 0:
            raise ValueError("mask has no ocean cells")
        self.clim = clim
        self.overall = _GroupStats(self.n_cells)
        self.by_lead: dict[int, _GroupStats] = {}
        self.by_month: dict[int, _GroupStats] = {}

    def add(
        self,
        pred: np.ndarray,
        truth: np.ndarray,
        target_date: dt.date,
        lead: int | None = None,
        clim_field: np.ndarray | None = None,
    ) -> None:
        """Score one grid pair; `clim_field` overrides the anomaly baseline
        (used when pred/truth are time averages rather than daily fields)."""
        p = np.asarray(pred, dtype=np.float64)[self.ocean]
        t = np.asarray(truth, dtype=np.float64)[self.ocean]
        if clim_field is None and self.clim is not None:
            clim_field = self.clim.field_for(target_date)
        acc_val = (
            acc_field(pred, truth, clim_field, self.mask)
            if clim_field is not None
            else None
        )
        ssim_val = ssim(pred, truth, self.mask)
        groups = [
            self.overall,
            self.by_month.setdefault(target_date.month, _GroupStats(self.n_cells)),
        ]
        if lead is not None:
            groups.append(self.by_lead.setdefault(lead, _GroupStats(self.n_cells)))
        for group in groups:
            group.add(p, t, acc_val, ssim_val)

    def report(self) -> MetricReport:
        return MetricReport(
            per_metric=self.overall.finalize(),
            per_lead={lead: g.finalize() for lead, g in self.by_lead.items()},
            per_month={m: g.finalize() for m, g in self.by_month.items()},
            n_samples=self.overall.n,
            acc_skipped=self.overall.acc_skipped,
            ssim_skipped=self.overall.ssim_skipped,
        )
