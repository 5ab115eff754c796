"""Offline chart generation from benchmark result CSV files."""

from .figspec import KINDS, FigureSpec, SchemaError
from .presets import PRESETS, get_preset
from .render import render

__all__ = [
    "KINDS",
    "FigureSpec",
    "SchemaError",
    "PRESETS",
    "get_preset",
    "render",
]
