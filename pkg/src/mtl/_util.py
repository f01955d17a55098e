"""Small shared helpers."""

from __future__ import annotations


def fmt9(x: float) -> str:
    """Format a float with 9 significant digits (stable across platforms)."""
    return format(float(x), ".9g")


def join_ids(ids) -> str:
    """Semicolon-joined id list for CSV cells, e.g. (0, 2) -> '0;2'."""
    return ";".join(str(i) for i in ids)
