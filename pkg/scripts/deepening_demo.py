#!/usr/bin/env python3
"""Show the staged schedule: which stage each structure needed to solve.

Two small models: one whose parent constraint a translation of the children
can satisfy, and one that forces the solver to edit child geometry.
"""

import sys

from aidl.constraints import finalize_deferred
from aidl.model import Structure
from aidl.solver import solve_model


def two_bars(parent_constraint: str) -> Structure:
    root = Structure("rack", "Assembly")
    for name, (tx, length) in (("a", (0.0, 2.0)), ("b", (5.0, 3.0))):
        child = root.add_structure(name, "Drawing", tx=tx)
        bar = child.add_line("bar", (0.0, 0.0), (length, 0.0))
        child.add_constraint("Horizontal", bar)
    a, b = root.children
    if parent_constraint == "translation":
        root.add_constraint("LeftOf", b, a)
    else:
        root.add_constraint("Equal", a.namespace["bar"], b.namespace["bar"])
    finalize_deferred(root)
    return root


def main():
    for kind in ("translation", "geometric"):
        root = two_bars(kind)
        outcome = solve_model(root)
        print(f"{kind} model: {outcome.status}, residual_max {outcome.residual_max:.2e}")
        for rec in outcome.stage_report:
            print(f"  {rec.path:8s} {rec.stage}:{rec.level} {rec.status} "
                  f"({rec.iterations} Newton, {rec.outer_iterations} outer)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
