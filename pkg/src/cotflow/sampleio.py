"""Sample-batch persistence: CSV with exact float64 round-trips.

Rows are written with 17 significant digits, enough for decimal text to
reproduce every bit of a float64. A small SVG scatter writer exists for
eyeballing 2-D batches; it carries no acceptance weight.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def write_samples(path, batch) -> None:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[:, None]
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise DataError("batch must be a nonempty 2-D array")
    d = batch.shape[1]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(f"x{i}" for i in range(d)) + "\n")
        for row in batch:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_samples(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh]
    lines = [line for line in lines if line != ""]
    if not lines:
        raise DataError(f"sample file {path} is empty")
    header = lines[0].split(",")
    d = len(header)
    if header != [f"x{i}" for i in range(d)]:
        raise DataError(f"sample file {path} has a malformed header: {lines[0]!r}")
    if len(lines) == 1:
        raise DataError(f"sample file {path} contains no samples")
    rows = np.empty((len(lines) - 1, d))
    for k, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != d:
            raise DataError(f"ragged row at line {k} in {path}: {len(cells)} cells, expected {d}")
        try:
            rows[k - 2] = [float(c) for c in cells]
        except ValueError as exc:
            raise DataError(f"non-numeric cell at line {k} in {path}: {exc}") from exc
    return rows


def write_scatter_svg(path, batch, size: int = 480) -> None:
    """Plain scatter plot of a 2-D batch; visual aid only."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != 2 or batch.shape[0] == 0:
        raise DataError("svg scatter needs a nonempty 2-D batch with d = 2")
    lo = batch.min(axis=0)
    hi = batch.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * span
    lo, hi = lo - pad, hi + pad
    span = hi - lo
    scale = (size - 1) / span
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for x, y in batch:
        px = (x - lo[0]) * scale[0]
        py = size - 1 - (y - lo[1]) * scale[1]
        parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="1.6" fill="#1f6feb" opacity="0.55"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(parts) + "\n")
