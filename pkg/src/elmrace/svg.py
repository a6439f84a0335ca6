"""Static SVG rendering: archive heatmaps and walker/terrain scenes.

Output is plain text assembled with fixed float formatting, so identical
inputs produce byte-identical files.
"""
from __future__ import annotations

from .engine import EngineError, MapState
from .physics import TerrainProfile, ground_height
from .walker import WalkerSpec

AXIS_NAMES = ("height", "width", "mass")

CELL = 24          # heatmap cell edge, px
MARGIN = 40
EMPTY_FILL = "#e8e8e8"


def _heat_color(frac: float) -> str:
    """Two-stop ramp, pale yellow -> deep red."""
    frac = min(max(frac, 0.0), 1.0)
    r = 255
    g = int(244 - 184 * frac)
    b = int(214 - 194 * frac)
    return f"#{r:02x}{g:02x}{b:02x}"


def render_map_slice(map_state: MapState, slice_dim: str = "mass", index: int = 0) -> str:
    """Champion-fitness heatmap of one 2D slice of the behavior grid.

    `slice_dim` names the axis held fixed at bin `index`; the remaining two
    axes span the image (first remaining axis -> columns, second -> rows,
    row 0 at the bottom).
    """
    if slice_dim not in AXIS_NAMES:
        raise EngineError(f"slice dimension must be one of {AXIS_NAMES}, got {slice_dim!r}")
    axis = AXIS_NAMES.index(slice_dim)
    if not 0 <= index < map_state.grid.dims[axis]:
        raise EngineError(
            f"slice index {index} outside 0..{map_state.grid.dims[axis] - 1}")
    keep = [d for d in range(3) if d != axis]
    n_cols, n_rows = map_state.grid.dims[keep[0]], map_state.grid.dims[keep[1]]

    cells = {}
    for coord in sorted(map_state.cells):
        if coord[axis] != index:
            continue
        cells[(coord[keep[0]], coord[keep[1]])] = map_state.cells[coord].fitness
    top = max(cells.values()) if cells else 0.0

    width = n_cols * CELL + 2 * MARGIN
    height = n_rows * CELL + 2 * MARGIN
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{MARGIN}" y="{MARGIN - 14}" font-family="monospace" font-size="12">'
        f"{AXIS_NAMES[keep[0]]} (cols) vs {AXIS_NAMES[keep[1]]} (rows), "
        f"{slice_dim} bin {index}</text>",
    ]
    for row in range(n_rows):
        for col in range(n_cols):
            x = MARGIN + col * CELL
            y = MARGIN + (n_rows - 1 - row) * CELL
            fitness = cells.get((col, row))
            if fitness is None:
                fill = EMPTY_FILL
                title = f"({col},{row}) empty"
            else:
                fill = _heat_color(fitness / top if top > 0 else 1.0)
                title = f"({col},{row}) fitness {fitness:.3f}"
            lines.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" '
                f'stroke="#999" stroke-width="0.5"><title>{title}</title></rect>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_scene(spec: WalkerSpec, terrain: TerrainProfile,
                 x=None, y=None, pad: float = 5.0, scale: float = 12.0) -> str:
    """Walker over its terrain; pass simulated x/y arrays for a mid-run frame."""
    xs = [float(v) for v in (x if x is not None else [j.x for j in spec.joints])]
    ys = [float(v) for v in (y if y is not None else [j.y for j in spec.joints])]
    lo_x, hi_x = min(xs) - pad, max(xs) + pad
    ground = [ground_height(terrain, gx) for gx in (lo_x, hi_x)]
    lo_y = min(min(ys), min(ground)) - pad
    hi_y = max(max(ys), max(ground)) + pad

    def sx(wx: float) -> float:
        return (wx - lo_x) * scale

    def sy(wy: float) -> float:
        return (hi_y - wy) * scale       # flip: SVG y grows downward

    width = (hi_x - lo_x) * scale
    height = (hi_y - lo_y) * scale
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" height="{height:.1f}" '
        f'viewBox="0 0 {width:.1f} {height:.1f}">',
        f'<rect width="{width:.1f}" height="{height:.1f}" fill="#f6fbff"/>',
    ]
    n_samples = 120
    pts = []
    for i in range(n_samples + 1):
        gx = lo_x + (hi_x - lo_x) * i / n_samples
        pts.append(f"{sx(gx):.2f},{sy(ground_height(terrain, gx)):.2f}")
    lines.append(
        f'<polyline points="{" ".join(pts)}" fill="none" stroke="#5a3921" stroke-width="2"/>')
    for wall_x, _side in terrain.walls:
        if lo_x <= wall_x <= hi_x:
            lines.append(
                f'<line x1="{sx(wall_x):.2f}" y1="0" x2="{sx(wall_x):.2f}" '
                f'y2="{height:.2f}" stroke="#444" stroke-width="3"/>')
    if terrain.ceiling_x is not None:
        cx0, cx1 = float(terrain.ceiling_x[0]), float(terrain.ceiling_x[-1])
        cy0, cy1 = float(terrain.ceiling_y[0]), float(terrain.ceiling_y[-1])
        lines.append(
            f'<line x1="{sx(cx0):.2f}" y1="{sy(cy0):.2f}" x2="{sx(cx1):.2f}" '
            f'y2="{sy(cy1):.2f}" stroke="#444" stroke-width="3"/>')
    for m in spec.muscles:
        color = "#d4483b" if m.oscillating else "#4a77c9"
        lines.append(
            f'<line x1="{sx(xs[m.a]):.2f}" y1="{sy(ys[m.a]):.2f}" '
            f'x2="{sx(xs[m.b]):.2f}" y2="{sy(ys[m.b]):.2f}" '
            f'stroke="{color}" stroke-width="1.5"/>')
    for jx, jy in zip(xs, ys):
        lines.append(f'<circle cx="{sx(jx):.2f}" cy="{sy(jy):.2f}" r="3" fill="#222"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
