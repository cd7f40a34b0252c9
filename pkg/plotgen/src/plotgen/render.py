"""Render comparison figures from privacy-accounting CSV output.

Reads the accountant's CSV schema (one row per (T, analysis)), draws one
line per series, and writes a PNG or SVG.  Values are plotted exactly as
read; nothing is recomputed.  Output is deterministic: embedded
timestamps are suppressed and series are drawn in sorted order.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_SPEC_FIELDS = {
    "csv",
    "x",
    "series",
    "y",
    "out",
    "xscale",
    "yscale",
    "saturation_marker",
    "exclude_series",
    "title",
}


class PlotSpecError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    """What to plot: columns, scales, and an optional saturation marker."""

    csv: Optional[str] = None
    x: str = "T"
    series: str = "analysis"
    y: str = "epsilon"
    out: Optional[str] = None
    xscale: str = "linear"
    yscale: str = "log"
    saturation_marker: Optional[float] = None
    exclude_series: tuple = ("min",)
    title: Optional[str] = None

    @classmethod
    def from_json(cls, path: str) -> "PlotSpec":
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise PlotSpecError("plot spec must be a JSON object")
        unknown = set(raw) - _SPEC_FIELDS
        if unknown:
            raise PlotSpecError(f"unknown plot spec field(s) {sorted(unknown)}")
        if "exclude_series" in raw:
            raw["exclude_series"] = tuple(raw["exclude_series"])
        if "saturation_marker" in raw and raw["saturation_marker"] is not None:
            raw["saturation_marker"] = float(raw["saturation_marker"])
        return cls(**raw)


def _read_series(spec: PlotSpec) -> Dict[str, List[tuple]]:
    with open(spec.csv, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (spec.x, spec.series, spec.y):
            if col not in header:
                raise PlotSpecError(f"column {col!r} not in CSV header {header}")
        groups: Dict[str, List[tuple]] = {}
        for row in reader:
            name = row[spec.series]
            if name in spec.exclude_series:
                continue
            y_raw = row[spec.y]
            if y_raw == "":
                continue
            groups.setdefault(name, []).append((float(row[spec.x]), float(y_raw)))
    if not groups:
        raise PlotSpecError("no data rows to plot")
    for pts in groups.values():
        pts.sort()
    return groups


def render(spec: PlotSpec) -> str:
    """Draw the figure described by spec; returns the output path."""
    if spec.csv is None or spec.out is None:
        raise PlotSpecError("spec needs both a csv path and an out path")
    groups = _read_series(spec)
    plt.rcParams["svg.hashsalt"] = "plotgen"
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name in sorted(groups):
        pts = groups[name]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        marker = "o" if len(pts) == 1 else None
        ax.plot(xs, ys, label=name, marker=marker)
    if spec.saturation_marker is not None:
        ax.axvline(spec.saturation_marker, color="gray", linestyle=":", linewidth=1)
    ax.set_xscale(spec.xscale)
    ax.set_yscale(spec.yscale)
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    if spec.out.endswith(".svg"):
        fig.savefig(spec.out, metadata={"Date": None})
    else:
        fig.savefig(spec.out, metadata={"Software": "plotgen"})
    plt.close(fig)
    return spec.out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotgen-render", description="Render figures from accounting CSVs."
    )
    parser.add_argument("--csv", required=True)
    parser.add_argument("--spec", required=True, help="JSON plot spec")
    parser.add_argument("--out", required=True, help="PNG or SVG path")
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec.from_json(args.spec)
        merged = PlotSpec(
            csv=args.csv,
            x=spec.x,
            series=spec.series,
            y=spec.y,
            out=args.out,
            xscale=spec.xscale,
            yscale=spec.yscale,
            saturation_marker=spec.saturation_marker,
            exclude_series=spec.exclude_series,
            title=spec.title,
        )
        render(merged)
        return 0
    except (PlotSpecError, OSError, json.JSONDecodeError) as exc:
        print(f"plotgen: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
