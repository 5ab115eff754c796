"""Chart rendering from result CSV files.

The input follows the benchmark CSV schema: configuration echo columns
first, a `rep` column distinguishing raw repetition rows from `mean`
and `stddev` summary rows, then measurements. Charts read the summary
rows only; error bars come from the stddev row of the same
configuration. Rendering is deterministic: fixed figure size, fixed
fonts, metadata stripped, so the same CSV and spec reproduce the same
bytes.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .figspec import FigureSpec, SchemaError

FIGSIZE = (6.4, 4.8)
DPI = 100

# configuration echo columns of the result schema, used to group rows
CONFIG_COLUMNS = (
    "experiment", "algo", "query", "build_mb", "probe_mb", "size_mb",
    "width", "steps", "scale_factor", "selectivity", "threads", "reps",
    "radix_bits1", "radix_bits2", "kernel", "queue", "materialize",
    "alloc", "placement", "seed",
)

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "figure.figsize": FIGSIZE,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _read_summaries(csv_path, spec):
    """Filtered (mean, stddev) row pairs keyed by configuration."""
    with open(csv_path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise SchemaError(f"{csv_path}: empty CSV, no header row")
        header = reader.fieldnames
        rows = list(reader)
    if "rep" not in header:
        raise SchemaError(f"{csv_path}: column 'rep' missing from CSV header")
    for col in spec.referenced_columns():
        if col not in header:
            raise SchemaError(f"{csv_path}: column {col!r} missing from CSV header")
    if not rows:
        raise SchemaError(f"{csv_path}: CSV has a header but no rows")

    group_cols = [c for c in CONFIG_COLUMNS if c in header]
    groups: dict[tuple, dict[str, dict]] = {}
    for row in rows:
        if row["rep"] not in ("mean", "stddev"):
            continue
        if any(row[col] != value for col, value in spec.where):
            continue
        key = tuple(row[c] for c in group_cols)
        slot = groups.setdefault(key, {})
        if row["rep"] in slot:
            raise SchemaError(
                f"{csv_path}: duplicate {row['rep']} row for one configuration"
            )
        slot[row["rep"]] = row
    pairs = [
        (slot["mean"], slot.get("stddev")) for slot in groups.values()
        if "mean" in slot
    ]
    if not pairs:
        raise SchemaError(f"{csv_path}: no summary rows match the figure filter")
    return pairs


def _ordered(labels):
    """Numeric order when every label parses as a number, else input order."""
    unique = list(dict.fromkeys(labels))
    try:
        return sorted(unique, key=float)
    except ValueError:
        return unique


def _value(row, column, scale):
    cell = row[column] if row else ""
    return float(cell) * scale if cell != "" else None


def _collect_points(pairs, spec):
    """(x, series) -> (y, err), with duplicates rejected."""
    points = {}
    for mean, stddev in pairs:
        x = mean[spec.x]
        series = mean[spec.series] if spec.series else ""
        if (x, series) in points:
            raise SchemaError(
                f"several configurations map to x={x!r}"
                + (f", series={series!r}" if series else "")
                + "; pin more columns in the figure filter"
            )
        y = _value(mean, spec.y, spec.y_scale)
        if y is None:
            continue
        err = _value(stddev, spec.error, spec.y_scale) if spec.error else None
        points[(x, series)] = (y, err)
    if not points:
        raise SchemaError(f"no values in column {spec.y!r} to plot")
    return points


def _draw_bars(ax, pairs, spec):
    points = _collect_points(pairs, spec)
    xcats = _ordered(x for x, _ in points)
    scats = _ordered(s for _, s in points)
    width = 0.8 / len(scats)
    for i, s in enumerate(scats):
        offsets = [j + i * width - 0.4 + width / 2 for j in range(len(xcats))]
        ys = [points.get((x, s), (0.0, None))[0] for x in xcats]
        errs = [points.get((x, s), (0.0, None))[1] for x in xcats]
        bars = [e if e is not None else 0.0 for e in errs]
        ax.bar(offsets, ys, width=width * 0.9, label=s or None,
               yerr=bars if any(e is not None for e in errs) else None,
               capsize=3)
    ax.set_xticks(range(len(xcats)), xcats)
    if any(scats):
        ax.legend(title=spec.series)


def _phase_label(column):
    if column.startswith("t_") and column.endswith("_ns"):
        return column[2:-3]
    return column


def _draw_stacked(ax, pairs, spec):
    rows = {}
    for mean, _ in pairs:
        x = mean[spec.x]
        if x in rows:
            raise SchemaError(
                f"several configurations map to x={x!r}; "
                "pin more columns in the figure filter"
            )
        rows[x] = mean
    xcats = _ordered(rows)
    lefts = [0.0] * len(xcats)
    for column in spec.stack:
        values = [
            _value(rows[x], column, spec.y_scale) or 0.0 for x in xcats
        ]
        if not any(values):
            continue
        ax.barh(range(len(xcats)), values, left=lefts,
                label=_phase_label(column))
        lefts = [a + b for a, b in zip(lefts, values)]
    if not any(lefts):
        raise SchemaError(f"stack columns hold no values: {spec.stack}")
    ax.set_yticks(range(len(xcats)), xcats)
    ax.invert_yaxis()
    ax.legend()


def _draw_lines(ax, pairs, spec):
    points = _collect_points(pairs, spec)
    xcats = _ordered(x for x, _ in points)
    positions = {x: i for i, x in enumerate(xcats)}
    for s in _ordered(s for _, s in points):
        got = [(x, points[(x, s)]) for x in xcats if (x, s) in points]
        xs = [positions[x] for x, _ in got]
        ys = [y for _, (y, _) in got]
        errs = [e for _, (_, e) in got]
        ax.errorbar(
            xs, ys, marker="o",
            yerr=errs if all(e is not None for e in errs) else None,
            capsize=3, label=s or None,
        )
    ax.set_xticks(range(len(xcats)), xcats)
    ax.set_ylim(bottom=0)
    if any(s for _, s in points):
        ax.legend(title=spec.series)


_DRAWERS = {
    "bars": _draw_bars,
    "stacked_bars": _draw_stacked,
    "lines": _draw_lines,
}


def render(csv_path: str, spec: FigureSpec, out_path: str) -> None:
    """Render one chart from `csv_path` to the image file `out_path`.

    Raises SchemaError before any file is written when the CSV lacks a
    referenced column, has no rows, or holds ambiguous data for the
    requested axes.
    """
    pairs = _read_summaries(csv_path, spec)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        try:
            _DRAWERS[spec.kind](ax, pairs, spec)
            ax.set_title(spec.title)
            ax.set_xlabel(spec.xlabel)
            ax.set_ylabel(spec.ylabel)
            fig.tight_layout()
            fig.savefig(out_path, dpi=DPI, metadata={"Software": None})
        finally:
            plt.close(fig)
