"""Markdown digest of the benchmark outputs.

Reads the files the evaluation commands wrote (never recomputes anything)
and renders one `summary.md`. Sections whose inputs are missing are marked
"not run"; models skipped during evaluation are listed with their reasons.
Output is a pure function of the input files, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .pipeline import Workspace


def _read_json(path: Path) -> dict | None:
    if not path.exists():
        return None
    return json.loads(path.read_text())


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]] | None:
    if not path.exists():
        return None
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return None
    return rows[0], rows[1:]


def _display(cell: str) -> str:
    """Round numeric cells for reading; the CSVs keep full precision."""
    try:
        value = float(cell)
    except ValueError:
        return cell
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.4g}"


def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(_display(c) for c in row) + " |")
    lines.append("")
    return lines


def _section(title: str) -> list[str]:
    return [f"## {title}", ""]


def _skipped_lines(summary: dict | None) -> list[str]:
    if not summary or not summary.get("skipped"):
        return []
    lines = []
    for record in summary["skipped"]:
        lines.append(f"- skipped `{record['model']}`: {record['reason']}")
    lines.append("")
    return lines


def render_summary(ws: "Workspace") -> Path:
    reports = ws.reports
    lines: list[str] = ["# Benchmark summary", ""]

    recon_dir = reports / "reconstruction"
    lines += _section("Compressor reconstruction (test split)")
    recon_files = sorted(recon_dir.glob("*.json")) if recon_dir.exists() else []
    if recon_files:
        header = ["compressor", "nse", "rmse", "ssim", "psnr"]
        rows = []
        for path in recon_files:
            per = json.loads(path.read_text())["per_metric"]

            def cell(name: str) -> str:
                v = per[name]
                return "undefined" if v is None else str(v)

            rows.append(
                [path.stem, cell("nse"), cell("rmse"), cell("ssim"), cell("psnr")]
            )
        lines += _md_table(header, rows)
    else:
        lines += ["_not run_", ""]

    s2s_summary = _read_json(reports / "s2s" / "summary.json")
    lines += _section("Subseasonal-to-seasonal forecasts")
    if s2s_summary:
        inits = s2s_summary.get("init_dates", [])
        lines.append(
            f"{len(inits)} init dates at stride "
            f"{s2s_summary.get('init_stride')} days, horizon "
            f"{s2s_summary.get('horizon')} days."
        )
        lines.append("")
        models = s2s_summary.get("models", {})
        if models:
            rows = []
            for model in models:
                info = models[model]

                def val(v) -> str:
                    return "undefined" if v is None else _display(str(v))

                rows.append(
                    [
                        model,
                        val(info.get("acc_full")),
                        val(info.get("rmse_full")),
                        val(info.get("nse_full")),
                    ]
                )
            lines += _md_table(
                ["model", "ACC (full horizon)", "RMSE", "NSE"], rows
            )
        table3 = _read_csv(reports / "s2s" / "table3.csv")
        if table3:
            lines.append("Pooled blocks (first week / six 30-day block means / full horizon):")
            lines.append("")
            lines += _md_table(*table3)
        lines += _skipped_lines(s2s_summary)
    else:
        lines += ["_not run_", ""]

    sio_summary = _read_json(reports / "sio" / "summary.json")
    lines += _section("September outlook")
    if sio_summary:
        years = sio_summary.get("years", [])
        lines.append(
            f"Test years {', '.join(str(y) for y in years)}; init dates "
            f"{', '.join(str(d) for d in sio_summary.get('leads', []))} days "
            f"before September 1."
        )
        lines.append("")
        table4 = _read_csv(reports / "sio" / "table4.csv")
        if table4:
            lines += _md_table(*table4)
        if len(years) < 3:
            lines.append(
                "Fewer than 3 test years: detrended columns are undefined."
            )
            lines.append("")
        lines += _skipped_lines(sio_summary)
    else:
        lines += ["_not run_", ""]

    ext_summary = _read_json(reports / "extremes" / "summary.json")
    lines += _section("September minimum extent")
    if ext_summary:
        lines.append(
            f"Init {ext_summary.get('init_offset_days')} days before "
            f"September 1; residual grids stored with "
            f"{ext_summary.get('residual_encoding')}."
        )
        lines.append("")
        extremes = _read_csv(reports / "extremes" / "extremes.csv")
        if extremes:
            lines += _md_table(*extremes)
        lines += _skipped_lines(ext_summary)
    else:
        lines += ["_not run_", ""]

    win_summary = _read_json(reports / "windows" / "summary.json")
    lines += _section("Rolling-window comparison")
    if win_summary:
        lines.append(f"Backbone: `{win_summary.get('backbone')}`.")
        lines.append("")
        rows = []
        for window in sorted(win_summary.get("windows", {}), key=int):
            info = win_summary["windows"][window]

            def val(v) -> str:
                return "undefined" if v is None else _display(str(v))

            rows.append(
                [
                    window,
                    val(info.get("overall_acc")),
                    val(info.get("monthly_acc_variance")),
                    str(info.get("n_inits")),
                ]
            )
        lines += _md_table(
            ["window (days)", "ACC (full horizon)", "monthly ACC variance", "init dates"],
            rows,
        )
        lines.append("Per-lead and per-month ACC curves: `windows/acc_by_lead.csv`, `windows/acc_by_month.csv`.")
        lines.append("")
    else:
        lines += ["_not run_", ""]

    ens_summary = _read_json(ws.ensemble / "summary.json")
    lines += _section("Ensemble weights")
    if ens_summary:
        lines.append(
            "Members ranked by validation ACC: "
            + ", ".join(f"`{m}`" for m in ens_summary.get("ranked", []))
            + "."
        )
        lines.append("")
        rows = []
        for tier in sorted(ens_summary.get("tiers", {})):
            info = ens_summary["tiers"][tier]
            weights = ", ".join(
                f"{m}={w:.3f}"
                for m, w in zip(info["members"], info["weights"])
            )
            flags = []
            if not info.get("converged", True):
                flags.append("not converged")
            if info.get("degenerate"):
                flags.append("degenerate")
            rows.append(
                [
                    tier,
                    weights,
                    _display(str(info.get("fit_rmse"))),
                    ", ".join(flags) if flags else "-",
                ]
            )
        lines += _md_table(["tier", "weights", "fit RMSE", "flags"], rows)
    else:
        lines += ["_not run_", ""]

    lines.append(
        "`undefined` marks metrics with no defined value; `exact` marks an "
        "error-free prediction (infinite peak signal-to-noise ratio)."
    )
    lines.append("")

    path = reports / "summary.md"
    path.write_text("\n".join(lines))
    return path
