"""
Minimal SVG line plots of CSV columns (sweep curves, comparison tables).
"""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from .. import storage
from ..errors import ConfigError

logger = logging.getLogger(__name__)

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 150, 20, 50
N_TICKS = 5
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _series(frame, x_col: str, y_col: str, log_scale: bool) -> Tuple[np.ndarray, np.ndarray]:
    x = frame[x_col].to_numpy(dtype=np.float64)
    y = frame[y_col].to_numpy(dtype=np.float64)
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if log_scale:
        if np.any(y <= 0):
            raise ConfigError(f"column '{y_col}' has nonpositive values; cannot use a log scale")
        y = np.log10(y)
    order = np.argsort(x, kind="stable")
    return x[order], y[order]


def _span(values: np.ndarray) -> Tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _ticks(lo: float, hi: float) -> List[float]:
    return list(np.linspace(lo, hi, N_TICKS))


def emit_plot(
    csv_path: Path,
    x_col: str,
    y_cols: Sequence[str],
    out_path: Path,
    log_scale: bool = False,
) -> Path:
    """
    One polyline per y column against x_col, with axes, ticks and a legend.

    Rows where either value is missing are skipped. With log_scale the y
    axis shows log10 values.
    """
    frame = storage.read_table(csv_path)
    if not y_cols:
        raise ConfigError("no y columns to plot")
    for col in [x_col, *y_cols]:
        if col not in frame.columns:
            raise ConfigError(f"column '{col}' not in {csv_path}")

    series = [(col, *_series(frame, x_col, col, log_scale)) for col in y_cols]
    series = [s for s in series if s[1].size]
    if not series:
        raise ConfigError(f"no finite values to plot in {csv_path}")

    x_lo, x_hi = _span(np.concatenate([s[1] for s in series]))
    y_lo, y_hi = _span(np.concatenate([s[2] for s in series]))
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]

    # Axes
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for tx in _ticks(x_lo, x_hi):
        X = px(tx)
        parts.append(f'<line x1="{X:.2f}" y1="{y0}" x2="{X:.2f}" y2="{y0 + 4}" stroke="black"/>')
        parts.append(f'<text x="{X:.2f}" y="{y0 + 16}" text-anchor="middle">{tx:.3g}</text>')
    for ty in _ticks(y_lo, y_hi):
        Y = py(ty)
        label = f"1e{ty:.2g}" if log_scale else f"{ty:.3g}"
        parts.append(f'<line x1="{x0 - 4}" y1="{Y:.2f}" x2="{x0}" y2="{Y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 6}" y="{Y + 4:.2f}" text-anchor="end">{label}</text>')
    parts.append(
        f'<text x="{x0 + plot_w / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(x_col)}</text>'
    )

    # Curves and legend
    for i, (col, xs, ys) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        ly = MARGIN_TOP + 14 + 18 * i
        lx = WIDTH - MARGIN_RIGHT + 12
        parts.append(f'<rect x="{lx}" y="{ly - 8}" width="12" height="3" fill="{color}"/>')
        parts.append(f'<text x="{lx + 18}" y="{ly - 3}">{escape(col)}</text>')

    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    logger.info("wrote plot %s", out_path)
    return out_path
