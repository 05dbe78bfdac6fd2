"""SVG export of a combined scene.

Works from the scene's JSON record so that rendering a live model and
rendering a previously written solved-model file give identical bytes.
"""

from __future__ import annotations

from .geobool import CHORD_TOL, Segment, tessellate

FILL = {"solid": "#9ab8d8", "hole": "#f2d0c4"}
STROKE = "#1f2d3d"


def fmt(v: float) -> str:
    """Fixed 6-decimal formatting with trailing zeros and negative zero removed."""
    s = f"{v:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _segment(rec: dict) -> Segment:
    kind = rec["kind"]
    if kind == "line":
        return Segment("line", tuple(rec["start"]), tuple(rec["end"]))
    return Segment(kind, tuple(rec["start"]), tuple(rec["end"]), tuple(rec["center"]), rec["radius"],
                   rec.get("start_angle", 0.0), rec.get("sweep", 0.0))


def _ring(points) -> str:
    head, *rest = points
    d = f"M {fmt(head[0])} {fmt(-head[1])}"
    for x, y in rest:
        d += f" L {fmt(x)} {fmt(-y)}"
    return d + " Z"


def _polyline(points) -> str:
    head, *rest = points
    return f"M {fmt(head[0])} {fmt(-head[1])}" + "".join(f" L {fmt(x)} {fmt(-y)}" for x, y in rest)


def render_svg(scene: dict, chord_tol: float = CHORD_TOL) -> str:
    """SVG text for a scene record: faces filled even-odd (one path per face,
    holes as extra subpaths), Drawing edges stroked; y points up."""
    faces = scene.get("faces", [])
    edges = [tessellate(_segment(e), chord_tol) for e in scene.get("drawing_edges", [])]
    xs, ys = [], []
    for f in faces:
        for x, y in f["outer"]:
            xs.append(x)
            ys.append(-y)
    for pts in edges:
        for x, y in pts:
            xs.append(x)
            ys.append(-y)
    if xs:
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    else:
        x0 = x1 = y0 = y1 = 0.0
    span = max(x1 - x0, y1 - y0)
    pad = 0.05 * span if span > 0 else 1.0
    vb = (x0 - pad, y0 - pad, (x1 - x0) + 2 * pad, (y1 - y0) + 2 * pad)
    width = max(vb[2], 1e-9)
    stroke_w = fmt(width / 400.0)
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{" ".join(fmt(v) for v in vb)}">',
    ]
    for f in faces:
        d = " ".join([_ring(f["outer"])] + [_ring(h) for h in f["holes"]])
        out.append(f'<path fill="{FILL.get(f.get("kind"), FILL["solid"])}" fill-rule="evenodd" '
                   f'stroke="{STROKE}" stroke-width="{stroke_w}" data-path="{f["path"]}" d="{d}"/>')
    for pts in edges:
        out.append(f'<path fill="none" stroke="{STROKE}" stroke-width="{stroke_w}" d="{_polyline(pts)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
