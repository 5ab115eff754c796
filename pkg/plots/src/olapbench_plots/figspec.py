"""Figure descriptions over benchmark result CSV files.

A FigureSpec names the columns a chart reads: the x axis, an optional
series column splitting the data into bar groups or lines, the value
column (or the stack of phase columns for stacked bars), an optional
error column read off the stddev summary rows, and row filters pinning
the remaining configuration dimensions. Everything is validated
against the CSV header at render time; a missing column is a
SchemaError naming it.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

KINDS = ("bars", "stacked_bars", "lines")


class SchemaError(ValueError):
    """The CSV does not carry what the figure needs."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    x: str
    y: str = ""
    series: str = ""
    error: str = ""
    stack: tuple[str, ...] = ()
    where: tuple[tuple[str, str], ...] = ()
    y_scale: float = 1.0
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.x:
            raise ValueError("x column is required")
        if self.kind == "stacked_bars":
            if not self.stack:
                raise ValueError("stacked_bars needs stack columns")
        elif not self.y:
            raise ValueError(f"{self.kind} needs a y column")

    @classmethod
    def from_dict(cls, data: dict) -> "FigureSpec":
        """Build from a parsed JSON object; rejects unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown figure keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "stack" in kwargs:
            kwargs["stack"] = tuple(kwargs["stack"])
        if "where" in kwargs:
            kwargs["where"] = tuple(sorted(dict(kwargs["where"]).items()))
        return cls(**kwargs)

    def referenced_columns(self) -> tuple[str, ...]:
        cols = [self.x]
        if self.y:
            cols.append(self.y)
        if self.series:
            cols.append(self.series)
        if self.error:
            cols.append(self.error)
        cols.extend(self.stack)
        cols.extend(col for col, _ in self.where)
        return tuple(cols)
