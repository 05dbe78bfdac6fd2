import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from aidl.diagnostics import Code
from aidl.geobool import (
    Segment,
    combine_scene,
    discover_faces,
    segments_per_chord,
    signed_area,
    structure_segments,
    tessellate,
)
from aidl.model import Structure
from models import boolean_scene, monte_carlo_area


def L(a, b):
    return Segment("line", a, b)


def square_lines(x0=0.0, y0=0.0, size=1.0):
    c = [(x0, y0), (x0 + size, y0), (x0 + size, y0 + size), (x0, y0 + size)]
    return [L(c[i], c[(i + 1) % 4]) for i in range(4)]


def test_unit_square_is_one_loop():
    loops, chains = discover_faces(square_lines())
    assert len(loops) == 1 and chains == []
    assert len(loops[0].segments) == 4
    assert loops[0].area == pytest.approx(1.0)


def test_square_from_shuffled_reversed_lines():
    segs = square_lines()
    segs = [segs[2], Segment("line", segs[0].end, segs[0].start), segs[3], segs[1]]
    loops, chains = discover_faces(segs)
    assert len(loops) == 1 and not chains and loops[0].area == pytest.approx(1.0)


def test_u_shape_is_an_open_chain():
    segs = square_lines()[:3]
    loops, chains = discover_faces(segs)
    assert loops == [] and len(chains) == 1 and len(chains[0]) == 3


def test_u_shape_in_solid_warns():
    s = Structure("u", "Solid")
    a, b, c, d = (s.add_point(n, x, y) for n, x, y in (("a", 0, 1), ("b", 0, 0), ("c", 1, 0), ("d", 1, 1)))
    s.add_line("l1", a, b)
    s.add_line("l2", b, c)
    s.add_line("l3", c, d)
    out = combine_scene(s)
    assert out.faces == []
    assert [w.code for w in out.warnings] == [Code.OPEN_CHAIN]


def test_square_with_circle_gives_two_loops():
    circle = Segment("circle", (6, 5), (6, 5), (5, 5), 1.0, 0.0, 2 * math.pi)
    loops, chains = discover_faces(square_lines(0, 0, 10) + [circle])
    assert len(loops) == 2 and not chains
    areas = sorted(lp.area for lp in loops)
    assert areas[1] == pytest.approx(100.0)
    # inscribed regular polygon: n/2 * sin(2 pi / n)
    n = segments_per_chord(1.0, 2 * math.pi)
    assert areas[0] == pytest.approx(n / 2 * math.sin(2 * math.pi / n), rel=1e-12)
    assert 0 < math.pi - areas[0] < 2 * math.pi * 1e-3


def test_endpoints_within_join_tolerance_are_merged():
    segs = square_lines()
    segs[1] = L((1.0 + 5e-7, 0.0), (1.0, 1.0))
    loops, chains = discover_faces(segs)
    assert len(loops) == 1 and not chains


def test_square_minus_circle():
    root = Structure("plate", "Solid")
    root.add_rectangle("sq", origin=(0, 0), width=10, height=10)
    hole = root.add_structure("bore", "Hole", tx=5, ty=5)
    hole.add_circle("c", (0, 0), 2)
    out = combine_scene(root)
    assert len(out.faces) == 1
    face = out.faces[0]
    assert len(face.holes) == 1
    assert face.area == pytest.approx(100 - 4 * math.pi, rel=1e-4)


def test_solid_without_holes_keeps_its_faces():
    s = Structure("s", "Solid")
    s.add_rectangle("r", origin=(0, 0), width=3, height=2)
    out = combine_scene(s)
    assert len(out.faces) == 1 and out.faces[0].area == pytest.approx(6.0)


def test_assembly_children_do_not_interact():
    root = Structure("set", "Assembly")
    a = root.add_structure("a", "Solid")
    a.add_rectangle("r", origin=(0, 0), width=2, height=2)
    b = root.add_structure("b", "Hole")
    b.add_rectangle("r", origin=(1, 1), width=2, height=2)  # overlaps a, but is not subtracted
    c = root.add_structure("c", "Solid", tx=10)
    c.add_circle("k", (0, 0), 1)
    out = combine_scene(root)
    assert [f.path for f in out.faces] == ["set.a", "set.b", "set.c"]
    assert out.faces[0].area == pytest.approx(4.0)
    assert out.faces[1].kind == "hole"


def test_solid_child_unions_before_holes_subtract():
    root = Structure("p", "Solid")
    root.add_rectangle("r", origin=(0, 0), width=4, height=2)
    ext = root.add_structure("ext", "Solid", tx=4)
    ext.add_rectangle("r", origin=(0, 0), width=2, height=2)
    cut = root.add_structure("cut", "Hole", tx=3)
    cut.add_rectangle("r", origin=(0, 0.5), width=2, height=1)
    out = combine_scene(root)
    assert len(out.faces) == 1
    assert out.faces[0].area == pytest.approx(12 - 2)


def test_drawing_edges_pass_through_bit_identical():
    root = Structure("root", "Assembly")
    d = root.add_structure("d", "Drawing", tx=0.1, ty=0.7)
    p, q = d.add_point("p", 1 / 3, 2 / 7), d.add_point("q", math.pi, math.e)
    d.add_line("l", p, q)
    d.add_arc("a", center=(0, 0), start=(1, 0), end=(0, 1))
    out = combine_scene(root)
    assert out.faces == []
    want = structure_segments(d)
    assert out.drawing_edges == want
    assert out.drawing_edges[0].start == (1 / 3 + 0.1, 2 / 7 + 0.7)


def test_line_tessellates_to_itself():
    seg = L((0.5, 1.5), (2.0, -1.0))
    assert tessellate(seg) == [(0.5, 1.5), (2.0, -1.0)]


def test_full_circle_vertex_count_and_deviation():
    tol = 1e-3
    seg = Segment("circle", (1, 0), (1, 0), (0, 0), 1.0, 0.0, 2 * math.pi)
    pts = tessellate(seg, tol)
    n = len(pts) - 1
    assert n >= math.ceil(math.pi / math.acos(1 - tol))
    # sagitta of each chord: r - distance from centre to the chord's midpoint
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        mid = math.hypot((x0 + x1) / 2, (y0 + y1) / 2)
        assert 1.0 - mid <= tol + 1e-15
    assert pts[0] == pts[-1]


def test_quarter_arc_keeps_exact_endpoints():
    s = Structure("s", "Drawing")
    s.add_arc("a", center=(0, 0), start=(2, 0), end=(0, 2))
    seg = structure_segments(s)[0]
    pts = tessellate(seg)
    assert pts[0] == (2.0, 0.0) and pts[-1] == (0.0, 2.0)
    assert segments_per_chord(2.0, math.pi / 2) == len(pts) - 1


def test_outer_ccw_holes_cw():
    root, _, _ = boolean_scene(random.Random(3), n_children=4)
    for f in combine_scene(root).faces:
        assert signed_area(f.exterior) > 0
        for h in f.holes:
            assert signed_area(h) < 0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_area_matches_membership_oracle(seed):
    root, inside, box = boolean_scene(random.Random(seed))
    out = combine_scene(root)
    mc = monte_carlo_area(inside, box, n=200_000, seed=seed % 1000)
    # 2e5 samples: a few standard errors stay well under 2%
    assert abs(out.area - mc) <= 0.02 * mc


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_orientation_property(seed):
    root, _, _ = boolean_scene(random.Random(seed))
    for f in combine_scene(root).faces:
        assert signed_area(f.exterior) > 0
        assert all(signed_area(h) < 0 for h in f.holes)
