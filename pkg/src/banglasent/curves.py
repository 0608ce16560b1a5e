"""Training-curve artifacts: hand-rolled SVG plots plus the history CSV.

SVG keeps the outputs dependency-free and diffable: each chart is valid XML
with exactly one polyline per series, circle markers at every epoch (so a
single-epoch history is still visible), and a small legend.
"""

from __future__ import annotations

import os
from xml.sax.saxutils import escape

from .training import TrainingHistory, write_history_csv

__all__ = ["emit_curves", "render_curve_svg"]

_WIDTH, _HEIGHT = 640, 400
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 60, 24, 36, 48
_COLORS = ("#1f77b4", "#d62728")


def _scale(values_min: float, values_max: float) -> tuple[float, float]:
    if values_max - values_min < 1e-12:
        pad = max(abs(values_min) * 0.1, 0.5)
        return values_min - pad, values_max + pad
    pad = (values_max - values_min) * 0.08
    return values_min - pad, values_max + pad


def render_curve_svg(
    title: str, series: list[tuple[str, list[float]]]
) -> str:
    """Render named series against epoch number as an SVG document."""
    if not series or not series[0][1]:
        raise ValueError("nothing to plot: empty history")
    epochs = len(series[0][1])
    lo, hi = _scale(
        min(min(vals) for _, vals in series),
        max(max(vals) for _, vals in series),
    )
    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def x_pos(epoch_idx: int) -> float:
        if epochs == 1:
            return _MARGIN_L + plot_w / 2.0
        return _MARGIN_L + plot_w * epoch_idx / (epochs - 1)

    def y_pos(value: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - (value - lo) / (hi - lo))

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{escape(title)}</text>',
    ]
    # axes
    x0, y0 = _MARGIN_L, _MARGIN_T + plot_h
    parts.append(
        f'<line x1="{x0}" y1="{_MARGIN_T}" x2="{x0}" y2="{y0}" stroke="#333"/>'
    )
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="#333"/>'
    )
    for k in range(5):
        value = lo + (hi - lo) * k / 4.0
        y = y_pos(value)
        parts.append(
            f'<line x1="{x0 - 4}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{value:.4g}</text>'
        )
    tick_step = max(1, (epochs - 1) // 8 or 1)
    for epoch_idx in range(0, epochs, tick_step):
        x = x_pos(epoch_idx)
        parts.append(
            f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 4}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{y0 + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{epoch_idx + 1}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2}" y="{_HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">epoch</text>'
    )
    # one polyline per series, markers at every epoch
    for (name, values), color in zip(series, _COLORS):
        points = " ".join(
            f"{x_pos(i):.2f},{y_pos(v):.2f}" for i, v in enumerate(values)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.8" '
            f'points="{points}"/>'
        )
        for i, v in enumerate(values):
            parts.append(
                f'<circle cx="{x_pos(i):.2f}" cy="{y_pos(v):.2f}" r="2.6" '
                f'fill="{color}"/>'
            )
    # legend
    for row, ((name, _), color) in enumerate(zip(series, _COLORS)):
        y = _MARGIN_T + 14 + row * 18
        x = _WIDTH - _MARGIN_R - 130
        parts.append(
            f'<line x1="{x}" y1="{y - 4}" x2="{x + 24}" y2="{y - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{x + 30}" y="{y}" font-family="sans-serif" '
            f'font-size="12">{escape(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def emit_curves(history: TrainingHistory, out_dir) -> dict[str, str]:
    """Write loss.svg, acc.svg and history.csv under ``out_dir``.

    Returns the mapping of artifact name to path.
    """
    if len(history) == 0:
        raise ValueError("cannot plot an empty history")
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "loss_svg": os.path.join(out_dir, "loss.svg"),
        "acc_svg": os.path.join(out_dir, "acc.svg"),
        "history_csv": os.path.join(out_dir, "history.csv"),
    }
    loss_svg = render_curve_svg(
        "training and validation loss",
        [("loss", history.loss), ("val_loss", history.val_loss)],
    )
    acc_svg = render_curve_svg(
        "training and validation accuracy",
        [("acc", history.acc), ("val_acc", history.val_acc)],
    )
    with open(paths["loss_svg"], "w", encoding="utf-8") as fh:
        fh.write(loss_svg)
    with open(paths["acc_svg"], "w", encoding="utf-8") as fh:
        fh.write(acc_svg)
    write_history_csv(history, paths["history_csv"])
    return paths
