"""Render sweep figures from harness CSV output.

The input contract is the harness CSV schema (one row per sweep value
and algorithm); everything here filters, groups and draws. No numerical
processing happens on this side, so a figure is a pure function of the
CSV content and the figure spec.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

REQUIRED_COLUMNS = ("sweep_name", "sweep_value", "algorithm",
                    "delta_h_db", "ser")

Y_FIELDS = ("delta_h_db", "ser")

DISPLAY_NAMES = {
    "kf_m": "KF-M",
    "ks_m": "KS-M",
    "ep": "EP",
    "kf_tm": "KF-TM",
    "ks_tm": "KS-TM",
    "pcsi": "PCSI",
}

_MARKERS = ("o", "s", "^", "v", "D", "x")


class FigureSpecError(ValueError):
    """Invalid figure specification or CSV not matching it."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: the swept field on x, one metric on y, one curve
    per algorithm."""

    x_field: str
    y_field: str
    algorithms: tuple
    y_scale: str = "linear"
    title: str = ""
    x_label: str = ""
    y_label: str = ""

    def __post_init__(self):
        if self.y_field not in Y_FIELDS:
            raise FigureSpecError(f"y_field must be one of {Y_FIELDS}")
        if self.y_scale not in ("linear", "log"):
            raise FigureSpecError("y_scale must be linear or log")
        if self.y_scale == "log" and self.y_field != "ser":
            raise FigureSpecError("log scale is reserved for ser")
        if not self.algorithms:
            raise FigureSpecError("at least one algorithm is required")
        object.__setattr__(self, "algorithms", tuple(self.algorithms))

    @classmethod
    def from_json(cls, path) -> "FigureSpec":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise FigureSpecError(f"cannot read spec {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise FigureSpecError("spec file must hold a JSON object")
        known = {"x_field", "y_field", "algorithms", "y_scale", "title",
                 "x_label", "y_label"}
        bad = set(raw) - known
        if bad:
            raise FigureSpecError(f"unknown spec keys {sorted(bad)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise FigureSpecError(str(exc)) from exc


def load_rows(csv_path) -> list:
    """Read a harness CSV into dictionaries, checking the columns."""
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise FigureSpecError(f"CSV is missing columns {missing}")
        return list(reader)


def extract_series(rows, spec: FigureSpec) -> dict:
    """Group the CSV rows into per-algorithm (x, y) series, sorted by x.

    Rows from other sweeps and non-finite values are dropped; an empty
    result means the CSV does not cover the requested sweep.
    """
    series = {}
    for alg in spec.algorithms:
        pts = []
        for row in rows:
            if row["sweep_name"] != spec.x_field or row["algorithm"] != alg:
                continue
            x = float(row["sweep_value"])
            y = float(row[spec.y_field])
            if math.isfinite(y):
                pts.append((x, y))
        pts.sort()
        if pts:
            series[alg] = ([p[0] for p in pts], [p[1] for p in pts])
    if not series:
        raise FigureSpecError(
            f"CSV holds no '{spec.x_field}' sweep rows for the requested "
            "algorithms")
    return series


def build_figure(csv_path, spec: FigureSpec):
    """Assemble the figure without writing it.

    Returns ``(figure, series)``; the caller owns closing the figure.
    """
    rows = load_rows(csv_path)
    series = extract_series(rows, spec)

    fig, ax = plt.subplots(figsize=(6.4, 4.8), dpi=100)
    for i, alg in enumerate(spec.algorithms):
        if alg not in series:
            continue
        x, y = series[alg]
        ax.plot(x, y, marker=_MARKERS[i % len(_MARKERS)],
                label=DISPLAY_NAMES.get(alg, alg))
    if spec.y_scale == "log":
        ax.set_yscale("log")
    ax.set_xlabel(spec.x_label or spec.x_field)
    ax.set_ylabel(spec.y_label or spec.y_field)
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return fig, series


def render(csv_path, spec: FigureSpec, out_path) -> dict:
    """Draw one figure and write it to ``out_path``.

    Returns the plotted series so callers can verify the drawn data.
    Styling is fixed and the output carries no timestamps, so rendering
    is deterministic in the inputs.
    """
    fig, series = build_figure(csv_path, spec)
    fig.savefig(out_path, metadata={"Software": "mmep-plot"})
    plt.close(fig)
    return series
