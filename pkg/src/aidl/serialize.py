"""Solved-model JSON."""

from __future__ import annotations

import json

from .expr import Parameter, evaluate, to_sexpr
from .geobool import SceneOutput
from .model import Arc, BBox, Circle, Compound, Geometry, Line, Point, Structure, bounding_box, path_of
from .solver import SolveOutcome

FORMAT = "aidl-solved-model"
VERSION = 1


def _pt(p: Point) -> list:
    return [p.x.value, p.y.value]


def geometry_record(g) -> dict:
    rec = {"kind": g.kind, "name": g.name}
    if isinstance(g, Point):
        rec["x"], rec["y"] = g.x.value, g.y.value
    elif isinstance(g, Line):
        rec["start"], rec["end"] = _pt(g.start), _pt(g.end)
    elif isinstance(g, Arc):
        rec["center"], rec["start"], rec["end"] = _pt(g.center), _pt(g.start), _pt(g.end)
        rec["radius"] = evaluate(g.radius())
    elif isinstance(g, Circle):
        rec["center"], rec["radius"] = _pt(g.center), g.radius.value
    elif isinstance(g, Compound):
        rec["kind"] = g.ctor.lower()
        rec["members"] = sorted(g.members)
    return rec


def _param(p: Parameter) -> dict:
    return {"name": p.name, "value": p.value, "mutable": p.mutable, "role": p.role}


def _arg(a) -> str:
    if isinstance(a, (Structure, Geometry)):
        return path_of(a)
    if isinstance(a, Parameter):
        return a.name
    if isinstance(a, str):
        return a
    return to_sexpr(a)


def structure_record(s: Structure) -> dict:
    lowered = {id(lc.spec): lc for lc in s.lowered if lc.spec is not None}
    cons = []
    for spec in s.constraints:
        lc = lowered.get(id(spec))
        rec = {"name": spec.name, "implicit": spec.implicit, "args": [_arg(a) for a in spec.args]}
        if lc is not None:
            rec["residuals"] = [to_sexpr(r.expr) for r in lc.residuals]
            if lc.choice is not None:
                rec["choice"] = lc.choice
        cons.append(rec)
    geometry = [geometry_record(d) for d in s.decls if isinstance(d, (Point, Compound))]
    geometry += [geometry_record(g) for g in s.primitives]
    box: BBox = bounding_box(s, frame=s.parent or s)
    params = [_param(p) for p in s.parameters + s.slacks + s.adopted]
    if s.virtual_bbox:
        params += [_param(p) for p in s.virtual_bbox.values()]
    return {
        "name": s.name,
        "type": s.type,
        "orientation": s.orientation,
        "frame": {"tx": s.tx.value, "ty": s.ty.value},
        "parameters": params,
        "geometry": geometry,
        "constraints": cons,
        "noninversion": [to_sexpr(r.expr) for lc in s.lowered if lc.spec is None for r in lc.residuals],
        "children": [structure_record(c) for c in s.children],
        "bbox": box.values(),
    }


def solved_record(root: Structure, outcome: SolveOutcome = None, scene: SceneOutput = None,
                  file: str = "") -> dict:
    rec = {"format": FORMAT, "version": VERSION, "file": file, "model": structure_record(root)}
    if outcome is not None:
        rec["outcome"] = outcome.to_record()
    if scene is not None:
        rec["scene"] = scene.to_record()
    return rec


def dumps(rec: dict) -> str:
    return json.dumps(rec, indent=1, allow_nan=False) + "\n"
