import random

import pytest
from hypothesis import given, settings, strategies as st

from aidl.constraints import finalize_deferred
from aidl.diagnostics import Code
from aidl.expr import Parameter, evaluate
from aidl.model import (
    DuplicateName,
    IllegalReference,
    Point,
    Structure,
    bounding_box,
    path_of,
    solver_parameters,
    validate,
)
from models import bb


def test_duplicate_point_name():
    s = Structure("s", "Drawing")
    s.add_point("p", 0, 0)
    with pytest.raises(DuplicateName):
        s.add_point("p", 1, 1)


def test_line_between_own_points():
    s = Structure("s", "Drawing")
    p1, p2 = s.add_point("p1", 0, 0), s.add_point("p2", 1, 0)
    line = s.add_line("l", p1, p2)
    assert line.start is p1 and line.end is p2
    assert validate(s) == []


def test_line_to_sibling_point_is_illegal():
    root = Structure("root")
    s, t = root.add_structure("s", "Drawing"), root.add_structure("t", "Drawing")
    p1 = s.add_point("p1", 0, 0)
    p3 = t.add_point("p3", 1, 1)
    with pytest.raises(IllegalReference):
        s.add_line("l", p1, p3)


def test_rectangle_decomposition_shares_corners():
    s = Structure("s", "Solid")
    rect = s.add_rectangle("rect", origin=(0, 0), width=4, height=2)
    corners = [m for m in rect.members.values() if isinstance(m, Point)]
    assert len(corners) == 4 and len(s.primitives) == 4
    tl = s.attribute("rect").attribute("top_left")
    incident = [ln for ln in s.primitives if ln.start is tl or ln.end is tl]
    assert len(incident) == 2
    assert tl.xy() == (0.0, 2.0)
    assert evaluate(rect.attribute("width")) == 4.0


def test_triangle_from_points():
    s = Structure("s", "Solid")
    tri = s.add_triangle("t", pt_a=(0, 0), pt_b=(4, 0), pt_c=(1, 3))
    assert len(s.primitives) == 3
    assert tri.members["side_ab"].start is tri.members["pt_a"]


def test_triangle_center_form():
    s = Structure("s", "Solid")
    tri = s.add_triangle("t", center=(0, 0), base=2, height=4)
    assert tri.members["pt_c"].xy() == (0.0, 2.0)
    assert tri.members["pt_a"].xy() == (-1.0, -2.0)


def _pair():
    root = Structure("root")
    a, b = root.add_structure("child_a", "Drawing"), root.add_structure("child_b", "Drawing")
    line = a.add_line("line", (0, 0), (1, 0))
    point = b.add_point("point", 2, 2)
    return root, a, b, line, point


def test_root_constraint_over_subtree_is_valid():
    root, a, b, line, point = _pair()
    root.add_constraint("Coincident", point, line)
    assert validate(root) == []


def test_child_constraint_reaching_sibling():
    root, a, b, line, point = _pair()
    a.add_constraint("Coincident", point, line)
    diags = validate(root)
    assert [d.code for d in diags] == [Code.SUBTREE_VIOLATION]
    assert diags[0].path == "root.child_a"


def test_arity_or_type():
    s = Structure("s", "Drawing")
    line = s.add_line("l", (0, 0), (1, 0))
    c = s.add_circle("c", (0, 3), 1.0)
    s.add_constraint("Coincident", line, c.attribute("radius"))
    assert [d.code for d in validate(s)] == [Code.ARITY_OR_TYPE]


def test_self_reference_rejected():
    root = Structure("root")
    child = root.add_structure("a", "Solid")
    child.add_circle("c", (0, 0), 1)
    root.add_constraint("Above", child, root)
    assert [d.code for d in validate(root)] == [Code.SELF_REFERENCE]


def test_bbox_of_two_points():
    s = Structure("s", "Drawing")
    s.add_point("a", 0, 0)
    s.add_point("b", 3, 1)
    assert bounding_box(s).values() == {"left": 0, "right": 3, "top": 1, "bottom": 0}


def test_bbox_child_offset_by_frame():
    root = Structure("root")
    child = root.add_structure("c", "Drawing", tx=2, ty=3)
    child.add_point("p", 1, 1)
    box = bounding_box(root, frame=root)
    assert box.values() == {"left": 3, "right": 3, "top": 4, "bottom": 4}


def test_bbox_excludes_co_occurring_descendant():
    s = Structure("s", "Solid")
    s.add_point("p", 0, 5)
    child = s.add_structure("child", "Drawing")
    child.add_point("q", 0, 9)
    s.add_equation(bb(s, "top"), "==", bb(child, "top"))
    finalize_deferred(s)
    lc = s.lowered[0]
    # S.top is the max over S's own sketch only: 5 - 9
    assert lc.residuals[0].value() == -4.0
    assert bounding_box(s, exclusion=[child], frame=s).values()["top"] == 5


def test_circle_and_arc_extents():
    s = Structure("s", "Solid")
    s.add_circle("c", (0, 0), 2)
    s.add_arc("a", center=(10, 0), start=(11, 0), end=(10, 1))  # first quadrant only
    box = bounding_box(s, frame=s).values()
    assert box == {"left": -2, "right": 11, "top": 2, "bottom": -2}


def test_virtual_bbox_for_empty_structure():
    root = Structure("root")
    empty = root.add_structure("e", "Assembly")
    box = bounding_box(empty)
    assert box.virtual
    finalize_deferred(root)
    assert len(empty.lowered) == 2  # width >= 0 and height >= 0
    assert set(empty.virtual_bbox) == {"left", "right", "top", "bottom"}


def test_unreferenced_entities_do_not_add_unknowns():
    s = Structure("s", "Drawing")
    s.add_point("p", 0, 0)
    finalize_deferred(s)
    before = len(solver_parameters(s))
    Parameter("stray", 1.0)
    Point(4, 4)
    finalize_deferred(s)
    assert len(solver_parameters(s)) == before


def test_free_parameter_in_constraint_is_adopted():
    s = Structure("s", "Drawing")
    p = s.add_point("p", 0, 0)
    k = Parameter("k", 2.0)
    s.add_equation(p.attribute("x"), "==", k.ref())
    finalize_deferred(s)
    assert k in solver_parameters(s) and k.owner is s


def test_paths():
    root = Structure("handset", "Solid")
    root.add_rectangle("base", center=(0, 0), width=2, height=1)
    tl = root.attribute("base").attribute("top_left")
    assert path_of(tl) == "handset.base.top_left"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bbox_bounds_every_member_point(seed):
    rng = random.Random(seed)
    root = Structure("root", "Assembly")
    pts = []
    for i in range(rng.randint(1, 3)):
        c = root.add_structure(f"c{i}", "Drawing", tx=rng.uniform(-5, 5), ty=rng.uniform(-5, 5))
        for j in range(rng.randint(1, 4)):
            p = c.add_point(f"p{j}", rng.uniform(-5, 5), rng.uniform(-5, 5))
            pts.append((p.x.value + c.tx.value, p.y.value + c.ty.value))
    box = bounding_box(root, frame=root).values()
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    assert all(box["left"] <= x <= box["right"] for x in xs)
    assert all(box["bottom"] <= y <= box["top"] for y in ys)
    # each side is attained by a member point
    assert box["left"] == min(xs) and box["right"] == max(xs)
    assert box["bottom"] == min(ys) and box["top"] == max(ys)
