import json
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from aidl.constraints import (
    REGISTRY,
    NotFound,
    add_noninversion,
    all_inequalities,
    angle_between,
    finalize_deferred,
    load_registry,
    lower,
    resolve_synonym,
    rewrite_inequality,
    suggest,
)
from aidl.expr import evaluate, structurally_equal, to_sexpr
from aidl.model import BBox, Structure, bounding_box, solver_parameters, virtual_bbox
from aidl.solver import solve_model
from models import inequality_model, wrap


@pytest.mark.parametrize("surface,canonical", [
    ("Orthogonal", "Perpendicular"), ("Perpendicular", "Perpendicular"), ("OnTopOf", "Above"),
    ("Underneath", "Below"), ("Same", "Equal"), ("Touching", "Coincident"),
    ("ToTheLeftOf", "LeftOf"), ("tangent_to", "Tangent"),
])
def test_synonyms(surface, canonical):
    assert resolve_synonym(surface) == canonical


def test_unknown_constraint_suggests_angle_for_rotate():
    with pytest.raises(NotFound) as info:
        resolve_synonym("Rotate")
    assert info.value.suggestion == "Angle"


def test_suggestion_for_typo():
    assert suggest("Paralel") == "Parallel"


def test_registry_file_is_well_formed():
    version, registry, surface = load_registry()
    assert version >= 1
    assert set(registry) == set(REGISTRY)
    for entry in registry.values():
        assert entry.kind in ("geometric", "structural") and entry.signatures
    # every synonym points at a canonical entry
    assert all(canon in registry for _, canon in surface.values())


def test_registry_rejects_dangling_synonym():
    bad = {"format": "aidl-constraint-registry", "version": 1,
           "constraints": [{"canonical": "Equal", "kind": "geometric",
                            "signatures": [{"args": ["expr", "expr"], "lowering": "equal_expr"}]}],
           "synonyms": [{"name": "Same", "canonical": "Nope"}]}
    with pytest.raises(ValueError):
        load_registry(json.dumps(bad))


def test_coincident_already_satisfied():
    s = Structure("s", "Drawing")
    p, q = s.add_point("p", 1, 2), s.add_point("q", 1, 2)
    lc = lower(s.add_constraint("Coincident", p, q))
    assert [r.value() for r in lc.residuals] == [0.0, 0.0]


def test_equal_diameters_of_arcs():
    s = Structure("s", "Solid")
    left = s.add_arc("left_fillet", center=(0, 0), start=(1, 0), end=(0, 1))
    right = s.add_arc("right_fillet", center=(5, 0), start=(7, 0), end=(5, 2))
    lc = lower(s.add_constraint("Equal", left.diameter(), right.diameter()))
    assert lc.residuals[0].value() == pytest.approx(2 * 1 - 2 * 2)


def test_inequality_rewrite_shape():
    s = Structure("s", "Drawing")
    h = s.add_parameter("height", 2.0)
    lc = rewrite_inequality(h.ref(), 0.0, s, ">=")
    slack = lc.slacks[0]
    assert slack.role == "slack" and slack in s.slacks
    assert to_sexpr(lc.residuals[0].expr) == f'(add (sub 0 (param "s.height")) (param "{slack.name}"))'
    assert to_sexpr(lc.residuals[1].expr) == f'(sub (param "{slack.name}") (abs (param "{slack.name}")))'
    assert slack.value == 2.0


def test_inequality_satisfied_at_init():
    s = Structure("s", "Drawing")
    x = s.add_parameter("x", 3.0)
    lc = rewrite_inequality(x.ref(), 5.0, s)
    assert lc.slacks[0].value == 2.0
    assert [r.value() for r in lc.residuals] == [0.0, 0.0]


def test_inequality_violated_at_init_then_solved():
    s = Structure("s", "Drawing")
    x = s.add_parameter("x", 9.0)
    s.add_equation(x.ref(), "<=", 5.0)
    finalize_deferred(s)
    lc = s.lowered[0]
    assert lc.slacks[0].value == 0.0
    assert [r.value() for r in lc.residuals] == [4.0, 0.0]
    assert solve_model(s).solved
    assert x.value == pytest.approx(5.0 - lc.slacks[0].value)
    assert lc.slacks[0].value >= 0.0


def test_noninversion_on_rectangle_is_satisfied():
    s = Structure("s", "Solid")
    s.add_rectangle("r", center=(0, 0), width=3, height=1)
    for lc in add_noninversion(bounding_box(s, frame=s), s):
        assert [r.value() for r in lc.residuals] == [0.0, 0.0]


def test_noninversion_on_inverted_virtual_box():
    s = Structure("s", "Assembly")
    vb = virtual_bbox(s)
    vb["left"].value, vb["right"].value = 4.0, 1.0
    box = bounding_box(s, frame=s)
    width_lc, _ = add_noninversion(box, s)
    assert width_lc.slacks[0].value == 0.0
    assert width_lc.residuals[0].value() == 3.0  # 0 - (1 - 4) + 0


def test_noninversion_on_single_point():
    s = Structure("s", "Drawing")
    s.add_point("p", 2, 2)
    for lc in add_noninversion(bounding_box(s, frame=s), s):
        assert lc.slacks[0].value == 0.0
        assert [r.value() for r in lc.residuals] == [0.0, 0.0]


def _angle_model(init_deg, target_deg=30.0):
    s = Structure("s", "Drawing")
    a = s.add_line("a", (0, 0), (1, 0))
    t = math.radians(init_deg)
    b = s.add_line("b", (0, 0), (math.cos(t), math.sin(t)))
    spec = s.add_constraint("Angle", a, b, math.radians(target_deg))
    return s, a, b, spec


def test_angle_convention_nearest_at_init():
    # init ccw angle 28 degrees: |28 - 30| beats |332 - 30|
    s, a, b, spec = _angle_model(28.0)
    assert lower(spec).choice == "ccw"


def test_angle_convention_flips_when_mirrored():
    s, a, b, spec = _angle_model(-28.0)
    assert lower(spec).choice == "cw"


def test_finalize_without_constraints_only_adds_noninversion():
    s = Structure("s", "Drawing")
    s.add_point("p", 0, 0)
    assert finalize_deferred(s) == []
    assert all(lc.spec is None for lc in s.lowered)


def test_above_lowered_over_final_geometry():
    root = Structure("root")
    a = root.add_structure("a", "Solid")
    b = root.add_structure("b", "Solid")
    a.add_rectangle("r", center=(0, 0), width=1, height=1)
    root.add_constraint("Above", a, b)
    b.add_circle("c", (0, 3), 1)  # geometry added after the constraint was stated
    finalize_deferred(root)
    ineq = all_inequalities(root)[0]
    assert evaluate(ineq.lhs) == 4.0   # b.top
    assert evaluate(ineq.rhs) == -0.5  # a.bottom


def test_tangent_circles_picks_nearest_branch():
    s = Structure("s", "Drawing")
    c1 = s.add_circle("c1", (0, 0), 3)
    c2 = s.add_circle("c2", (1.1, 0), 1)   # nearly internally tangent
    lc = lower(s.add_constraint("Tangent", c1, c2))
    assert lc.choice == "internal"
    c2.center.x.value = 4.1                # nearly externally tangent
    assert lower(s.add_constraint("Tangent", c1, c2)).choice == "external"


def test_lowering_locality():
    root = Structure("root")
    a = root.add_structure("a", "Solid")
    b = root.add_structure("b", "Solid")
    a.add_rectangle("r", center=(0, 0), width=1, height=1)
    b.add_rectangle("r", center=(3, 0), width=1, height=1)
    root.add_constraint("LeftOf", a, b)
    finalize_deferred(root)
    params = set(p.id for p in solver_parameters(root))
    for s in root.walk():
        for lc in s.lowered:
            for sl in lc.slacks:
                assert sl.owner is s and sl.id in params


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_slack_soundness(seed):
    root = inequality_model(random.Random(seed))
    outcome = solve_model(root)
    assert outcome.solved
    for q in all_inequalities(root):
        assert evaluate(q.lhs) <= evaluate(q.rhs) + 1e-9
        assert q.slack.value >= -1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(5, 175), st.floats(-170, 170), st.booleans())
def test_angle_convention_is_a_fixed_point(target, init, mirror):
    s, a, b, spec = _angle_model(-init if mirror else init, target)
    finalize_deferred(s)
    first = s.lowered[0].choice
    if not solve_model(s).solved:
        return
    finalize_deferred(s)
    assert s.lowered[0].choice == first
    sign = 1 if first == "ccw" else -1
    assert abs(wrap(angle_between(a, b) - sign * math.radians(target))) <= 1e-6


def test_synonym_programs_lower_identically():
    def build(names):
        s = Structure("s", "Drawing")
        l1 = s.add_line("l1", (0, 0), (2, 0.1))
        l2 = s.add_line("l2", (0, 1), (2.1, 1.3))
        s.add_constraint(names[0], l1)
        s.add_constraint(names[1], l1, l2)
        finalize_deferred(s)
        return [r.expr for lc in s.lowered for r in lc.residuals]

    canon = build(["Horizontal", "Parallel"])
    syn = build(["Level", "ParallelTo"])
    assert len(canon) == len(syn)
    assert [to_sexpr(x) for x in canon] == [to_sexpr(y) for y in syn]
