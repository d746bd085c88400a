"""Small formatting helpers shared by the report builders.

All report values are fractions in [0, 1]; formatting converts them to
percentage strings at a per-table precision. Length statistics render
with up to two decimals, trailing zeros trimmed.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence


def format_percent(value: float | None, decimals: int) -> str:
    """Render a fraction as a percentage; None renders as a dash."""
    if value is None:
        return "-"
    return f"{value * 100:.{decimals}f}%"


def trim_float(value: float) -> str:
    """Two-decimal rendering with trailing zeros (and a bare point) removed."""
    text = f"{value:.2f}"
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def format_length(mean: float, std: float) -> str:
    return f"{trim_float(mean)}±{trim_float(std)}"


def markdown_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = [
        "| " + " | ".join(headers) + " |",
        "| " + " | ".join("---" for _ in headers) + " |",
    ]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def write_csv(path: str | Path, rows: Sequence[Sequence[str]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for row in rows:
            writer.writerow(row)
