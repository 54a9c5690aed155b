"""Dependency-free SVG rendering of distance-matrix heatmaps.

Cells are colored on a dark-to-bright perceptual ramp scaled to the matrix
maximum (a collapsed, near-zero matrix therefore renders uniformly dark).
An optional alignment path is overlaid as a polyline through cell centers.
The output is plain XML, so tests can compare structure rather than bytes.
"""

from __future__ import annotations

import numpy as np

# Five-stop ramp from dark violet to bright yellow.
_RAMP = np.array(
    [
        (68, 1, 84),
        (59, 82, 139),
        (33, 145, 140),
        (94, 201, 98),
        (253, 231, 37),
    ],
    dtype=np.float64,
)


def _color(fraction: float) -> str:
    x = min(max(fraction, 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    t = x - i
    rgb = (1 - t) * _RAMP[i] + t * _RAMP[i + 1]
    return "#{:02x}{:02x}{:02x}".format(*(int(round(c)) for c in rgb))


def render_heatmap_svg(
    matrix: np.ndarray,
    path_steps: tuple[tuple[int, int], ...] | None = None,
    title: str = "",
    cell: int = 8,
) -> str:
    """Render an n x m matrix as an SVG heatmap with an optional path overlay.

    ``path_steps`` uses the 1-based (row, col) convention of
    :class:`tempalign.alignment.AlignmentPath`.
    """
    m = np.asarray(matrix, dtype=np.float64)
    n_rows, n_cols = m.shape
    vmax = float(m.max())
    scale = 1.0 / vmax if vmax > 0 else 0.0
    margin = 20
    width = n_cols * cell + 2 * margin
    height = n_rows * cell + 2 * margin

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{title}</title>' if title else "<title>distance matrix</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        '<g class="cells">',
    ]
    for i in range(n_rows):
        for j in range(n_cols):
            parts.append(
                f'<rect x="{margin + j * cell}" y="{margin + i * cell}" '
                f'width="{cell}" height="{cell}" fill="{_color(m[i, j] * scale)}"/>'
            )
    parts.append("</g>")
    if path_steps:
        points = " ".join(
            f"{margin + (j - 0.5) * cell:.1f},{margin + (i - 0.5) * cell:.1f}"
            for i, j in path_steps
        )
        parts.append(
            f'<polyline class="alignment-path" points="{points}" '
            'fill="none" stroke="#ff3333" stroke-width="1.5"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
