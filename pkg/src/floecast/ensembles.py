"""Weighted ensembling of forecast runs.

Members are ranked by 180-day validation anomaly correlation (ties: RMSE,
then id); rank tiers take the top-4 ("rank1"), top-7 ("rank2"), or all
members ("rank3"). Weights live on the probability simplex and are fitted
by projected gradient descent on validation MSE of the weighted grid mean —
a convex quadratic, so the fit is effectively exact at desk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import _canonicalize
from .rollout import ForecastRun

RANK_TIERS: dict[str, int | None] = {"rank1": 4, "rank2": 7, "rank3": None}


class EnsembleError(ValueError):
    """Invalid ensemble specification or mismatched member runs."""


def rank_members(scores: list[tuple[str, float | None, float | None]]) -> list[str]:
    """Order member ids by validation ACC descending; ties by RMSE
    ascending, then id lexicographic. Undefined metrics sort last/worst."""
    if not scores:
        raise EnsembleError("no members to rank")

    def key(row: tuple[str, float | None, float | None]):
        member, acc, rmse = row
        return (
            -(acc if acc is not None else -np.inf),
            rmse if rmse is not None else np.inf,
            member,
        )

    return [row[0] for row in sorted(scores, key=key)]


def tier_members(ranked: list[str], tier: str) -> list[str]:
    if tier not in RANK_TIERS:
        raise EnsembleError(f"unknown tier {tier!r}; expected {sorted(RANK_TIERS)}")
    top = RANK_TIERS[tier]
    return list(ranked) if top is None else list(ranked[:top])


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise EnsembleError(f"projection needs a nonempty vector, got shape {v.shape}")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u * idx > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


@dataclass
class EnsembleSpec:
    """Fitted member weights plus fit diagnostics."""

    member_ids: tuple[str, ...]
    weights: np.ndarray
    tier: str
    selection_metric: str = "validation ACC at 180 days"
    objective: float = float("nan")
    converged: bool = True
    degenerate: bool = False
    iterations: int = 0

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.member_ids) != self.weights.size:
            raise EnsembleError(
                f"{len(self.member_ids)} members but {self.weights.size} weights"
            )
        if len(set(self.member_ids)) != len(self.member_ids):
            raise EnsembleError(f"duplicate member ids: {self.member_ids}")
        if self.weights.min() < -1e-9 or abs(self.weights.sum() - 1.0) > 1e-9:
            raise EnsembleError(
                f"weights must lie on the simplex, got sum {self.weights.sum()!r}"
            )

    def to_json(self) -> str:
        body = {
            "member_ids": list(self.member_ids),
            "weights": [repr(float(w)) for w in self.weights],
            "tier": self.tier,
            "selection_metric": self.selection_metric,
            "objective": repr(self.objective),
            "converged": self.converged,
            "degenerate": self.degenerate,
            "iterations": self.iterations,
        }
        return json.dumps(body, sort_keys=True, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def from_json(text: str) -> "EnsembleSpec":
        body = json.loads(text)
        return EnsembleSpec(
            member_ids=tuple(body["member_ids"]),
            weights=np.array([float(w) for w in body["weights"]]),
            tier=body["tier"],
            selection_metric=body["selection_metric"],
            objective=float(body["objective"]),
            converged=body["converged"],
            degenerate=body["degenerate"],
            iterations=body["iterations"],
        )

    @staticmethod
    def load(path: str | Path) -> "EnsembleSpec":
        return EnsembleSpec.from_json(Path(path).read_text())


class GramAccumulator:
    """Streaming sufficient statistics of the weight-fitting quadratic.

    The fitting objective mean((w . preds - truth)^2) depends on the data
    only through preds*preds^T, preds*truth, and truth*truth sums, so
    member predictions never need to be held in memory at once.
    """

    def __init__(self, n_members: int):
        if n_members < 1:
            raise EnsembleError("need at least one member")
        self.n_members = n_members
        self.gram = np.zeros((n_members, n_members), dtype=np.float64)
        self.cross = np.zeros(n_members, dtype=np.float64)
        self.const = 0.0
        self.n_samples = 0

    def update(self, preds: np.ndarray, truth: np.ndarray) -> None:
        """`preds` is (members, samples) for a chunk; `truth` is (samples,)."""
        preds = np.asarray(preds, dtype=np.float64)
        truth = np.asarray(truth, dtype=np.float64)
        if preds.shape != (self.n_members, truth.size):
            raise EnsembleError(
                f"chunk shape {preds.shape} != ({self.n_members}, {truth.size})"
            )
        self.gram += preds @ preds.T
        self.cross += preds @ truth
        self.const += float(truth @ truth)
        self.n_samples += truth.size

    def normalized(self) -> tuple[np.ndarray, np.ndarray, float]:
        if self.n_samples == 0:
            raise EnsembleError("no samples accumulated")
        n = float(self.n_samples)
        return self.gram / n, self.cross / n, self.const / n

    def submatrices(self, idx: list[int]) -> tuple[np.ndarray, np.ndarray, float]:
        gram, cross, const = self.normalized()
        ix = np.asarray(idx, dtype=np.int64)
        return gram[np.ix_(ix, ix)], cross[ix], const


def fit_weights_from_gram(
    member_ids: list[str],
    gram: np.ndarray,
    cross: np.ndarray,
    const: float,
    tier: str,
    max_iters: int = 20000,
    tol: float = 1e-14,
) -> EnsembleSpec:
    """Projected gradient descent on the normalized quadratic objective
    w'Gw - 2b'w + c over the probability simplex; uniform init, Lipschitz
    step. One-hot corners are checked afterwards, so the fitted objective
    never exceeds the best single member's."""
    m = len(member_ids)
    gram = np.asarray(gram, dtype=np.float64)
    cross = np.asarray(cross, dtype=np.float64)
    if gram.shape != (m, m) or cross.shape != (m,):
        raise EnsembleError(
            f"gram {gram.shape} / cross {cross.shape} inconsistent with {m} members"
        )

    def objective(w: np.ndarray) -> float:
        return float(w @ gram @ w - 2.0 * w @ cross + const)

    if m == 1:
        w = np.ones(1)
        return EnsembleSpec(
            member_ids=tuple(member_ids),
            weights=w,
            tier=tier,
            objective=objective(w),
            converged=True,
            degenerate=False,
            iterations=0,
        )

    eigs = np.linalg.eigvalsh(gram)
    degenerate = bool(eigs[0] < 1e-12 * max(eigs[-1], 1e-30))
    step = 1.0 / (2.0 * eigs[-1]) if eigs[-1] > 0 else 1.0

    w = np.full(m, 1.0 / m)
    best_w, best_obj = w.copy(), objective(w)
    converged = False
    iters = 0
    for iters in range(1, max_iters + 1):
        w_next = project_simplex(w - step * 2.0 * (gram @ w - cross))
        delta = float(np.max(np.abs(w_next - w)))
        w = w_next
        obj = objective(w)
        if obj < best_obj:
            best_obj, best_w = obj, w.copy()
        if delta < tol:
            converged = True
            break
    for j in range(m):  # simplex corners: never lose to a single member
        corner = np.zeros(m)
        corner[j] = 1.0
        obj = objective(corner)
        if obj < best_obj:
            best_obj, best_w = obj, corner
    return EnsembleSpec(
        member_ids=tuple(member_ids),
        weights=best_w,
        tier=tier,
        objective=best_obj,
        converged=converged,
        degenerate=degenerate,
        iterations=iters,
    )


def fit_weights(
    member_ids: list[str],
    preds: np.ndarray,
    truth: np.ndarray,
    tier: str,
    max_iters: int = 20000,
    tol: float = 1e-14,
) -> EnsembleSpec:
    """Minimize mean squared error of the weighted mean over the simplex.

    `preds` is (members, samples); `truth` is (samples,). Convenience
    wrapper over the streaming Gram path for data that fits in memory.
    """
    preds = np.asarray(preds, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if preds.ndim != 2 or truth.ndim != 1 or preds.shape[1] != truth.size:
        raise EnsembleError(
            f"preds {preds.shape} and truth {truth.shape} are inconsistent"
        )
    if len(member_ids) != preds.shape[0]:
        raise EnsembleError(f"{len(member_ids)} ids but {preds.shape[0]} rows")
    if preds.shape[0] < 2:
        raise EnsembleError("weight fitting needs at least 2 members")
    acc = GramAccumulator(preds.shape[0])
    acc.update(preds, truth)
    gram, cross, const = acc.normalized()
    return fit_weights_from_gram(
        member_ids, gram, cross, const, tier, max_iters=max_iters, tol=tol
    )


def apply_ensemble(spec: EnsembleSpec, runs: list[ForecastRun]) -> ForecastRun:
    """Per-day, per-pixel weighted mean of member grids, clipped to [0, 1]."""
    by_id = {run.backbone_id: run for run in runs}
    missing = [m for m in spec.member_ids if m not in by_id]
    if missing:
        raise EnsembleError(f"missing member runs: {missing}")
    members = [by_id[m] for m in spec.member_ids]
    first = members[0]
    for run in members[1:]:
        if (
            run.init_date != first.init_date
            or run.horizon != first.horizon
            or run.values.shape != first.values.shape
            or not np.array_equal(run.mask, first.mask)
        ):
            raise EnsembleError(
                f"member {run.backbone_id!r} does not align with "
                f"{first.backbone_id!r} (init/horizon/grid mismatch)"
            )
    acc = np.zeros(first.values.shape, dtype=np.float64)
    for weight, run in zip(spec.weights, members):
        acc += weight * np.nan_to_num(run.values, nan=0.0)
    values = _canonicalize(np.clip(acc, 0.0, 1.0), first.mask)
    return ForecastRun(
        backbone_id=f"ensemble-{spec.tier}",
        init_date=first.init_date,
        values=values,
        mask=first.mask,
        cell_area_km2=first.cell_area_km2,
        config_hash=first.config_hash,
    )
