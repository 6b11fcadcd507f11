"""
Minimal SVG line charts rendered straight from run outputs.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .reporting import RunData, accuracy_curve, cost_per_round, load_run

logger = logging.getLogger(__name__)

PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd', '#8c564b', '#e377c2', '#7f7f7f']
WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 150, 40, 50

Series = Dict[str, Sequence[Tuple[float, float]]]


def _escape(text: str) -> str:
    return text.replace('&', '&amp;').replace('<', '&lt;').replace('>', '&gt;')


def _bounds(values: List[float]) -> Tuple[float, float]:
    if not values:
        return 0.0, 1.0
    low, high = min(values), max(values)
    if high == low:
        pad = abs(low) * 0.05 or 0.5
        return low - pad, high + pad
    return low, high


def line_chart(series: Series, title: str = '', x_label: str = '', y_label: str = '') -> str:
    """One polyline per named series; empty input yields bare axes."""
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    points = [p for values in series.values() for p in values]
    x_min, x_max = _bounds([float(x) for x, _ in points])
    y_min, y_max = _bounds([float(y) for _, y in points])

    def sx(x):
        return MARGIN_LEFT + (float(x) - x_min) / (x_max - x_min) * plot_w

    def sy(y):
        return MARGIN_TOP + plot_h - (float(y) - y_min) / (y_max - y_min) * plot_h

    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="16">{_escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>',
    ]
    for i in range(5):
        fx = x_min + (x_max - x_min) * i / 4
        fy = y_min + (y_max - y_min) * i / 4
        parts.append(f'<text x="{sx(fx):.2f}" y="{y0 + 18}" text-anchor="middle" font-size="11">{fx:.4g}</text>')
        parts.append(f'<text x="{x0 - 6}" y="{sy(fy) + 4:.2f}" text-anchor="end" font-size="11">{fy:.4g}</text>')
    parts.append(
        f'<text x="{x0 + plot_w / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">'
        f'{_escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.2f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2:.2f})">{_escape(y_label)}</text>'
    )

    for index, (name, values) in enumerate(series.items()):
        color = PALETTE[index % len(PALETTE)]
        coords = ' '.join(f'{sx(x):.2f},{sy(y):.2f}' for x, y in values)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        legend_y = MARGIN_TOP + 16 * index + 8
        legend_x = MARGIN_LEFT + plot_w + 12
        parts.append(
            f'<line x1="{legend_x}" y1="{legend_y}" x2="{legend_x + 18}" y2="{legend_y}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{legend_x + 24}" y="{legend_y + 4}" font-size="11">{_escape(name)}</text>')
    parts.append('</svg>')
    return '\n'.join(parts) + '\n'


def _labels(runs: Sequence[RunData]) -> List[str]:
    names = [run.algorithm for run in runs]
    return [
        name if names.count(name) == 1 else f"{name} ({run.run_dir.name})"
        for name, run in zip(names, runs)
    ]


def accuracy_series(runs: Sequence[RunData]) -> Series:
    return {
        label: list(accuracy_curve(run).items())
        for label, run in zip(_labels(runs), runs)
    }


def cost_series(runs: Sequence[RunData]) -> Series:
    return {
        label: list(cost_per_round(run).items())
        for label, run in zip(_labels(runs), runs)
    }


def alpha_series(run: RunData, node: int) -> Series:
    """alpha_{node, j} per round for every neighbor j the node ever attended to."""
    if run.alphas is None:
        return {}
    rows = run.alphas[run.alphas['i'] == node]
    return {
        f"alpha {node},{j}": list(zip(group['round'], group['alpha']))
        for j, group in rows.groupby('j')
    }


def plot_runs(run_dirs: Sequence, out_dir, node: Optional[int] = None) -> List[Path]:
    """Write accuracy.svg, cost.svg and, for a chosen node with attention data, alphas.svg."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = [load_run(path) for path in run_dirs]

    charts = {
        'accuracy.svg': line_chart(accuracy_series(runs), 'Mean test accuracy', 'round', 'accuracy'),
        'cost.svg': line_chart(cost_series(runs), 'Scalars sent per round', 'round', 'scalars'),
    }
    if node is not None:
        alphas = {}
        for label, run in zip(_labels(runs), runs):
            for name, values in alpha_series(run, node).items():
                alphas[name if len(runs) == 1 else f"{label}: {name}"] = values
        if alphas:
            charts['alphas.svg'] = line_chart(alphas, f"Attention weights of node {node}", 'round', 'alpha')
        else:
            logger.warning(f"No attention weights recorded for node {node}")

    written = []
    for name, svg in charts.items():
        path = out_dir / name
        path.write_text(svg, encoding='utf-8')
        written.append(path)
    return written
