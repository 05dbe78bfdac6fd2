"""Boolean post-processing of a solved model.

Solved curves are turned into closed faces (endpoint matching plus a
leftmost-turn walk at junctions), tessellated, and combined per structure:
a node's own loops are combined even-odd, unioned with its Solid children,
and its Hole children are subtracted.  Assembly children are passed through
without interacting, and Drawing geometry comes out as plain edges.
Polygon clipping is delegated to shapely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import shapely
from shapely.geometry import MultiPolygon, Polygon
from shapely.geometry.polygon import orient

from .diagnostics import AidlError, Code, Diagnostic
from .model import Arc, Circle, Line, Structure, arc_angles, world_xy

CHORD_TOL = 1e-3
TOL_JOIN = 1e-6


class BooleanDegeneracy(AidlError):
    code = Code.BOOLEAN_DEGENERACY


@dataclass(frozen=True)
class Segment:
    """A world-frame curve piece.  Arcs run counter-clockwise from ``start``
    (angle ``a0``) through ``sweep`` radians; circles have start == end."""

    kind: str                       # line | arc | circle
    start: tuple
    end: tuple
    center: Optional[tuple] = None
    radius: float = 0.0
    a0: float = 0.0
    sweep: float = 0.0
    path: str = ""

    def reversed(self) -> "Segment":
        if self.kind == "circle":
            return self
        return _Reversed(self)

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "start": list(self.start), "end": list(self.end)}
        if self.kind != "line":
            rec["center"] = list(self.center)
            rec["radius"] = self.radius
        if self.kind == "arc":
            rec["start_angle"] = self.a0
            rec["sweep"] = self.sweep
        if self.path:
            rec["path"] = self.path
        return rec


class _Reversed:
    """A segment walked end-to-start (tessellation order only)."""

    def __init__(self, seg: Segment):
        self.seg = seg
        self.kind = seg.kind
        self.start, self.end = seg.end, seg.start

    def reversed(self):
        return self.seg


def segment_of(prim, structure: Structure) -> Segment:
    path = f"{structure.path}.{prim.name}"
    if isinstance(prim, Line):
        return Segment("line", world_xy(prim.start), world_xy(prim.end), path=path)
    if isinstance(prim, Circle):
        c = world_xy(prim.center)
        r = abs(prim.radius.value)
        p = (c[0] + r, c[1])
        return Segment("circle", p, p, c, r, 0.0, 2 * math.pi, path)
    if isinstance(prim, Arc):
        c = world_xy(prim.center)
        s, e = world_xy(prim.start), world_xy(prim.end)
        a0, sweep = arc_angles(prim)
        return Segment("arc", s, e, c, math.hypot(s[0] - c[0], s[1] - c[1]), a0, sweep, path)
    raise TypeError(f"not a curve: {prim!r}")


def structure_segments(structure: Structure) -> list[Segment]:
    return [segment_of(p, structure) for p in structure.primitives]


def segments_per_chord(radius: float, sweep: float, chord_tol: float = CHORD_TOL) -> int:
    """Fewest equal chords keeping the sagitta within ``chord_tol``."""
    if radius <= 0.0:
        return 1
    ratio = min(chord_tol / radius, 2.0)
    half = math.acos(1.0 - ratio)
    return max(1, math.ceil(sweep / (2.0 * half) - 1e-12))


def tessellate(seg, chord_tol: float = CHORD_TOL) -> list[tuple]:
    """Polyline for a segment with endpoints reproduced exactly.  Circles
    come back closed (first vertex repeated at the end)."""
    if isinstance(seg, _Reversed):
        return tessellate(seg.seg, chord_tol)[::-1]
    if seg.kind == "line":
        return [seg.start, seg.end]
    n = segments_per_chord(seg.radius, seg.sweep, chord_tol)
    if seg.kind == "circle":
        n = max(n, 3)
    cx, cy = seg.center
    pts = [seg.start]
    for i in range(1, n):
        a = seg.a0 + seg.sweep * i / n
        pts.append((cx + seg.radius * math.cos(a), cy + seg.radius * math.sin(a)))
    pts.append(seg.end)
    return pts


def signed_area(ring) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:] + ring[:1]):
        s += x0 * y1 - x1 * y0
    return 0.5 * s


# --- face discovery -------------------------------------------------------------

@dataclass
class Loop:
    segments: list           # Segment or reversed Segment, head to tail
    ring: list               # tessellated vertices, not closed
    area: float


def _cluster(points, tol):
    """Node index per point; points within ``tol`` of a node's first point join it."""
    reps, ids = [], []
    for p in points:
        for k, r in enumerate(reps):
            if abs(p[0] - r[0]) <= tol and abs(p[1] - r[1]) <= tol:
                ids.append(k)
                break
        else:
            reps.append(p)
            ids.append(len(reps) - 1)
    return reps, ids


def _ring_of(segs, chord_tol):
    ring = []
    for s in segs:
        ring.extend(tessellate(s, chord_tol)[:-1])
    return ring


def discover_faces(segments, tol_join: float = TOL_JOIN, chord_tol: float = CHORD_TOL):
    """Closed loops (positive area, counter-clockwise) and left-over open chains.

    Endpoints within ``tol_join`` are merged.  Dangling edges are peeled off
    into open chains; what remains is walked face by face, always taking the
    leftmost continuation at a junction, and the walks that enclose area on
    their left are returned as loops.
    """
    loops: list[Loop] = []
    edges = []
    for seg in segments:
        if seg.kind == "circle":
            ring = tessellate(seg, chord_tol)[:-1]
            loops.append(Loop([seg], ring, signed_area(ring)))
        else:
            edges.append(seg)
    ends = [p for e in edges for p in (e.start, e.end)]
    reps, ids = _cluster(ends, tol_join)
    uv = [(ids[2 * i], ids[2 * i + 1]) for i in range(len(edges))]

    alive = set()
    for i, (u, v) in enumerate(uv):
        e = edges[i]
        if u == v:
            if e.kind == "arc":      # arc closing on itself
                ring = tessellate(e, chord_tol)[:-1]
                loops.append(Loop([e], ring, signed_area(ring)))
            continue                 # zero-length line
        alive.add(i)

    # peel degree-1 edges into open chains
    degree = {}
    for i in alive:
        for n in uv[i]:
            degree[n] = degree.get(n, 0) + 1
    pruned = []
    stack = [n for n, d in degree.items() if d == 1]
    while stack:
        n = stack.pop()
        if degree.get(n) != 1:
            continue
        i = next(i for i in alive if n in uv[i])
        alive.discard(i)
        pruned.append(i)
        for m in uv[i]:
            degree[m] -= 1
            if degree[m] == 1:
                stack.append(m)
    open_chains = _chains([edges[i] for i in pruned], [uv[i] for i in pruned])

    # half-edge walk
    out: dict[int, list] = {}
    for i in sorted(alive):
        u, v = uv[i]
        out.setdefault(u, []).append((i, True))
        out.setdefault(v, []).append((i, False))

    tess = {}

    def heading(i, forward, at_start=True):
        if (i, forward) not in tess:
            tess[i, forward] = tessellate(edges[i] if forward else edges[i].reversed(), chord_tol)
        pts = tess[i, forward]
        a, b = (pts[0], pts[1]) if at_start else (pts[-2], pts[-1])
        return math.atan2(b[1] - a[1], b[0] - a[0])

    used = set()
    for i0 in sorted(alive):
        for f0 in (True, False):
            if (i0, f0) in used:
                continue
            walk, he = [], (i0, f0)
            while he not in used:
                used.add(he)
                walk.append(he)
                i, fwd = he
                v = uv[i][1] if fwd else uv[i][0]
                arrive = heading(i, fwd, at_start=False)
                best, best_turn = None, -math.inf
                for j, fj in out[v]:
                    if (j, fj) == (i, not fwd) and len(out[v]) > 1:
                        continue
                    turn = math.remainder(heading(j, fj) - arrive, 2 * math.pi)
                    if (j, fj) == (i, not fwd):
                        turn = -math.pi
                    if turn > best_turn + 1e-12:
                        best, best_turn = (j, fj), turn
                he = best
            if he != walk[0]:
                continue  # walk joined a cycle mid-way; that cycle is found from its own start
            segs = [edges[i] if f else edges[i].reversed() for i, f in walk]
            ring = _ring_of(segs, chord_tol)
            a = signed_area(ring)
            if a > 0.0:
                loops.append(Loop(segs, ring, a))
    return loops, open_chains


def _chains(segs, uvs):
    """Group pruned edges into connected chains."""
    chains, left = [], list(range(len(segs)))
    while left:
        chain = [left.pop(0)]
        nodes = set(uvs[chain[0]])
        grew = True
        while grew:
            grew = False
            for k in list(left):
                if nodes & set(uvs[k]):
                    chain.append(k)
                    nodes |= set(uvs[k])
                    left.remove(k)
                    grew = True
        chains.append([segs[k] for k in chain])
    return chains


# --- combination -----------------------------------------------------------------

@dataclass
class Face:
    polygon: Polygon
    path: str
    kind: str = "solid"

    @property
    def exterior(self) -> list:
        return [tuple(c) for c in self.polygon.exterior.coords[:-1]]

    @property
    def holes(self) -> list:
        return [[tuple(c) for c in r.coords[:-1]] for r in self.polygon.interiors]

    @property
    def area(self) -> float:
        return self.polygon.area

    def to_record(self) -> dict:
        return {"path": self.path, "kind": self.kind, "area": self.area,
                "outer": [list(p) for p in self.exterior],
                "holes": [[list(p) for p in h] for h in self.holes]}


@dataclass
class SceneOutput:
    faces: list = field(default_factory=list)
    drawing_edges: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    open_chains: list = field(default_factory=list)

    @property
    def area(self) -> float:
        return sum(f.area for f in self.faces)

    def extend(self, other: "SceneOutput"):
        self.faces += other.faces
        self.drawing_edges += other.drawing_edges
        self.warnings += other.warnings
        self.open_chains += other.open_chains

    def bounds(self) -> Optional[tuple]:
        xs, ys = [], []
        for f in self.faces:
            for x, y in f.exterior:
                xs.append(x)
                ys.append(y)
        for e in self.drawing_edges:
            for x, y in tessellate(e):
                xs.append(x)
                ys.append(y)
        if not xs:
            return None
        return (min(xs), min(ys), max(xs), max(ys))

    def to_record(self) -> dict:
        return {"faces": [f.to_record() for f in self.faces],
                "drawing_edges": [e.to_record() for e in self.drawing_edges],
                "warnings": [w.to_record() for w in self.warnings]}


def _polygon(ring, path, tol_join):
    poly = Polygon(ring)
    if poly.is_valid:
        return poly
    snapped = shapely.set_precision(poly, tol_join)
    if isinstance(snapped, Polygon) and snapped.is_valid and not snapped.is_empty:
        return snapped
    raise BooleanDegeneracy(f"face loop in {path} intersects itself", path=path)


def _polygons(geom) -> list[Polygon]:
    if geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, Polygon) and not g.is_empty]


def own_region(structure: Structure, tol_join=TOL_JOIN, chord_tol=CHORD_TOL):
    """Even-odd combination of the structure's own closed loops, plus the
    open chains found while building them."""
    loops, chains = discover_faces(structure_segments(structure), tol_join, chord_tol)
    region = Polygon()
    for lp in loops:
        region = region.symmetric_difference(_polygon(lp.ring, structure.path, tol_join))
    return region, chains


def _region(out: SceneOutput):
    polys = [f.polygon for f in out.faces]
    return shapely.union_all(polys) if polys else Polygon()


def boolean_combine(node: Structure, child_outputs: list, tol_join=TOL_JOIN,
                    chord_tol=CHORD_TOL) -> SceneOutput:
    """One node's output from its own sketch and its children's outputs
    (given in ``node.children`` order)."""
    out = SceneOutput()
    if node.type == "Drawing":
        out.drawing_edges += structure_segments(node)
        for child, co in zip(node.children, child_outputs):
            out.extend(co)
        return out
    region, chains = own_region(node, tol_join, chord_tol)
    if node.type in ("Solid", "Hole"):
        for ch in chains:
            out.open_chains.append(ch)
            out.warnings.append(Diagnostic(
                Code.OPEN_CHAIN, f"{len(ch)} curve(s) in {node.path} do not close into a face",
                severity="warning", path=node.path))
    if node.type == "Assembly":
        passthrough = list(child_outputs)
        own = _polygons(region)
        out.faces += [Face(orient(p, 1.0), node.path) for p in own]
        for co in passthrough:
            out.extend(co)
        return out
    holes = []
    for child, co in zip(node.children, child_outputs):
        if child.type == "Solid":
            region = region.union(_region(co))
            out.drawing_edges += co.drawing_edges
            out.warnings += co.warnings
            out.open_chains += co.open_chains
        elif child.type == "Hole":
            holes.append(_region(co))
            out.drawing_edges += co.drawing_edges
            out.warnings += co.warnings
            out.open_chains += co.open_chains
        else:
            out.extend(co)
    for h in holes:
        region = region.difference(h)
    kind = "hole" if node.type == "Hole" else "solid"
    out.faces = [Face(orient(p, 1.0), node.path, kind) for p in _polygons(region)] + out.faces
    return out


def combine_scene(root: Structure, tol_join: float = TOL_JOIN, chord_tol: float = CHORD_TOL) -> SceneOutput:
    """Post-order boolean combination of the whole tree."""
    def visit(s):
        return boolean_combine(s, [visit(c) for c in s.children], tol_join, chord_tol)

    return visit(root)
