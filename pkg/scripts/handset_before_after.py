#!/usr/bin/env python3
"""Render the handset twice: with its stated constraints stripped, and as written.

Without constraints the hand-placed pieces on the right do not meet, leaving
open chains beside the body; with them the outline closes into one solid.
"""

import argparse
import sys
from pathlib import Path

from aidl.constraints import explicit_residuals, strip_explicit
from aidl.geobool import combine_scene
from aidl.lang import compile_file
from aidl.render import render_svg
from aidl.serialize import solved_record
from aidl.solver import solve_model

HANDSET = Path(__file__).resolve().parent.parent / "corpus" / "handset.aidl"


def build(strip: bool):
    compiled = compile_file(str(HANDSET))
    if not compiled.ok:
        raise SystemExit("\n".join(d.human() for d in compiled.diagnostics))
    root = compiled.root
    if strip:
        strip_explicit(root)
    outcome = solve_model(root)
    scene = combine_scene(root)
    return root, outcome, scene


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=".", help="directory for the two SVG files")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for label, strip in (("before", True), ("after", False)):
        root, outcome, scene = build(strip)
        rec = solved_record(root, outcome, scene, file=HANDSET.name)
        path = out / f"handset_{label}.svg"
        path.write_text(render_svg(rec["scene"]), encoding="utf-8")
        print(f"{label}: {outcome.status}, faces={len(scene.faces)} area={scene.area:.4f} "
              f"open_chains={len(scene.open_chains)} -> {path}")
        if not strip:
            worst = explicit_residuals(root, {"Coincident", "Tangent", "Equal"})
            print(f"  {len(worst)} Coincident/Tangent/Equal constraints, worst residual {max(worst.values()):.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
