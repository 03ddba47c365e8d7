"""Plot-ready CSVs and SVG line charts from sweep summaries."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sweep import write_csv  # noqa: E402

log = logging.getLogger(__name__)

PLOT_FIELDS = ["series", "x", "y", "ci_lo", "ci_hi"]
SUMMARY_REQUIRED = ["policy", "rho", "mean_flow", "ci_lo", "ci_hi"]
RATIO_REQUIRED = ["rho", "ratio", "ratio_lo", "ratio_hi", "gap", "gap_lo", "gap_hi"]

FIGURES = {
    "ratio_vs_rho": ("rho", "E[F] M-SRPT / E[F] SRPT_1N", False),
    "mean_flow_vs_inv_load": ("1/(1-rho)", "mean flow time", True),
    "gap_vs_log_load": ("ln(1/(1-rho))", "E[F] M-SRPT - E[F] SRPT_1N", False),
}


class SchemaError(ValueError):
    pass


def _read(path: Path, required: list[str]) -> list[dict]:
    text = path.read_text() if path.exists() else ""
    if not text.strip():
        return []
    rows = list(csv.DictReader(text.splitlines()))
    header = text.splitlines()[0].split(",")
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    return rows


def _f(x: str) -> float:
    return float(x) if x not in ("", None) else math.nan


def _svg(path: Path, title: str, xlabel: str, ylabel: str, series: dict, log_axes: bool) -> None:
    plt.rcParams["svg.hashsalt"] = "msrpt"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, pts in series.items():
        pts = sorted(pts)
        xs = [p[0] for p in pts]
        ax.plot(xs, [p[1] for p in pts], marker="o", label=name)
        ax.fill_between(xs, [p[2] for p in pts], [p[3] for p in pts], alpha=0.2)
    if log_axes and series:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if series:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plot_data(summary_csv, out_dir, ratio_csv=None) -> dict[str, Path]:
    """Write one CSV (series, x, y, ci_lo, ci_hi) and one SVG per figure.

    Figures: ratio against rho, mean flow against 1/(1-rho) (log axes) and
    the additive gap against ln(1/(1-rho)). Ratio and gap come from the
    ratio CSV written next to the summary unless ``ratio_csv`` is given.
    An empty summary yields empty files and a warning.
    """
    summary_csv = Path(summary_csv)
    if not summary_csv.exists():
        raise FileNotFoundError(f"summary file {summary_csv} does not exist")
    ratio_csv = summary_csv.with_name("ratio.csv") if ratio_csv is None else Path(ratio_csv)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary = _read(summary_csv, SUMMARY_REQUIRED)
    ratio = _read(ratio_csv, RATIO_REQUIRED) if summary else []
    if not summary:
        log.warning("summary %s has no rows; writing empty plot files", summary_csv)

    data: dict[str, dict[str, list]] = {k: defaultdict(list) for k in FIGURES}
    for r in summary:
        rho = _f(r["rho"])
        data["mean_flow_vs_inv_load"][r["policy"]].append(
            (1.0 / (1.0 - rho), _f(r["mean_flow"]), _f(r["ci_lo"]), _f(r["ci_hi"]))
        )
    for r in ratio:
        rho = _f(r["rho"])
        data["ratio_vs_rho"]["m-srpt/srpt1n"].append((rho, _f(r["ratio"]), _f(r["ratio_lo"]), _f(r["ratio_hi"])))
        data["gap_vs_log_load"]["m-srpt-srpt1n"].append(
            (math.log(1.0 / (1.0 - rho)), _f(r["gap"]), _f(r["gap_lo"]), _f(r["gap_hi"]))
        )

    paths = {}
    for name, (xlabel, ylabel, log_axes) in FIGURES.items():
        series = data[name]
        rows = [
            dict(series=s, x=x, y=y, ci_lo=lo, ci_hi=hi)
            for s in series
            for (x, y, lo, hi) in sorted(series[s])
        ]
        csv_path = out / f"{name}.csv"
        svg_path = out / f"{name}.svg"
        if summary:
            write_csv(csv_path, PLOT_FIELDS, rows)
            _svg(svg_path, name.replace("_", " "), xlabel, ylabel, series, log_axes)
        else:
            csv_path.write_text("")
            svg_path.write_text("")
        paths[name] = csv_path
        paths[name + "_svg"] = svg_path
    return paths
