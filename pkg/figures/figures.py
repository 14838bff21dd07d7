#!/usr/bin/env python3
"""Line plots of mean energy efficiency per method from sweep CSV files.

Reads the simulator's results CSV (schema: sweep, sweep_value, method,
trial, seed, final_ee_mbits_per_joule, converged, wall_time_s), averages the
efficiency over trials for every (method, sweep value) cell, and draws one
line per method with distinct markers.

Usage:
    python figures.py --csv results.csv --sweep p_sum --out fig2.png
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

EXPECTED_COLUMNS = [
    "sweep",
    "sweep_value",
    "method",
    "trial",
    "seed",
    "final_ee_mbits_per_joule",
    "converged",
    "wall_time_s",
]

X_LABELS = {
    "p_sum": "Network transmit power budget [W]",
    "mission_time": "Operation time [s]",
    "rhs_elements": "Number of surface elements",
    "absorption": "Molecular absorption coefficient [1/m]",
}

METHOD_STYLE = {
    "proposed": ("Proposed", "o"),
    "a": ("Method A", "s"),
    "b": ("Method B", "^"),
    "c": ("Method C", "D"),
    "d": ("Method D", "v"),
    "e": ("Method E", "P"),
    "initial": ("Initial", "x"),
}
DEFAULT_ORDER = list(METHOD_STYLE)


class SchemaError(Exception):
    """CSV header or body does not match the expected results schema."""


@dataclass
class FigureSpec:
    csv_path: str
    sweep_name: str
    x_label: str = None
    y_label: str = "η_EE [Mbits/Joule]"
    methods: list = field(default_factory=lambda: list(DEFAULT_ORDER))
    output_path: str = "figure.png"

    def __post_init__(self):
        if self.x_label is None:
            self.x_label = X_LABELS.get(self.sweep_name, self.sweep_name)


def load_rows(csv_path, sweep_name):
    """Rows of the requested sweep, with numeric fields parsed."""
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != EXPECTED_COLUMNS:
            raise SchemaError(
                f"expected columns {EXPECTED_COLUMNS}, got {reader.fieldnames}"
            )
        rows = [r for r in reader if r["sweep"] == sweep_name]
    if not rows:
        raise SchemaError(f"no rows for sweep {sweep_name!r} in {csv_path}")
    return rows


def aggregate_means(rows, methods):
    """Mean efficiency over trials: {method: [(value, mean), ...]} sorted.

    Failed trials (non-finite efficiency) are excluded from the mean.
    """
    cells = {}
    for r in rows:
        method = r["method"]
        if method not in methods:
            continue
        value = float(r["sweep_value"])
        ee = float(r["final_ee_mbits_per_joule"])
        if math.isfinite(ee):
            cells.setdefault(method, {}).setdefault(value, []).append(ee)
    out = {}
    for method, by_value in cells.items():
        pairs = sorted(
            (value, sum(v) / len(v)) for value, v in by_value.items() if v
        )
        if pairs:
            out[method] = pairs
    return out


def render(spec: FigureSpec) -> dict:
    """Draw the figure and return the plotted {method: [(x, y), ...]} data."""
    rows = load_rows(spec.csv_path, spec.sweep_name)
    series = aggregate_means(rows, spec.methods)
    if not series:
        raise SchemaError("no plottable methods after aggregation")

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for method in spec.methods:
        if method not in series:
            continue
        label, marker = METHOD_STYLE.get(method, (method, "."))
        xs = [p[0] for p in series[method]]
        ys = [p[1] for p in series[method]]
        ax.plot(xs, ys, marker=marker, linewidth=1.2, markersize=5, label=label)
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    ax.grid(True, which="major", alpha=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=150)
    plt.close(fig)
    return series


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", required=True, help="results CSV from the simulator")
    parser.add_argument("--sweep", required=True, help="sweep name to plot")
    parser.add_argument("--out", default="figure.png", help="output image path")
    parser.add_argument(
        "--methods",
        default=",".join(DEFAULT_ORDER),
        help="comma-separated method order for the legend",
    )
    args = parser.parse_args(argv)
    spec = FigureSpec(
        csv_path=args.csv,
        sweep_name=args.sweep,
        methods=[m.strip() for m in args.methods.split(",") if m.strip()],
        output_path=args.out,
    )
    try:
        series = render(spec)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {spec.output_path} ({len(series)} methods)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
