#!/usr/bin/env python3
"""Run the CLI over the shipped corpus and check every fixture's expectation.

Valid programs must solve; files under invalid/ must report the codes named in
their ``# expect:`` header; files under unsolvable/ must exit with code 3.
"""

import argparse
import io
import json
import re
import sys
import tempfile
from pathlib import Path

from aidl.cli import RunConfig, run

ROOT = Path(__file__).resolve().parent.parent / "corpus"


def expectation(path: Path):
    m = re.match(r"#\s*expect:\s*(.*)", path.read_text(encoding="utf-8").splitlines()[0])
    return m.group(1).split() if m else []


def check(path: Path, outdir: str):
    buf = io.StringIO()
    code = run(RunConfig("solve", [str(path)], out=outdir, json=True), stdout=buf)
    records = [json.loads(line) for line in buf.getvalue().splitlines()]
    codes = {r["code"] for r in records if r["kind"] == "diagnostic"}
    want = expectation(path)
    if path.parent.name == "invalid":
        ok = code == 1 and all(w in codes for w in want if w.startswith("E"))
        for w in want:
            if w.startswith("suggest="):
                sugg = {r.get("suggestion") for r in records if r["kind"] == "diagnostic"}
                ok = ok and w.split("=", 1)[1] in sugg
    elif path.parent.name == "unsolvable":
        ok = code == 3
    else:
        ok = code == 0
    return ok, code, sorted(codes)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", default=str(ROOT))
    args = ap.parse_args(argv)
    files = sorted(p for p in Path(args.corpus).rglob("*.aidl") if p.parent.name != "golden")
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        for f in files:
            ok, code, codes = check(f, tmp)
            failures += not ok
            print(f"{'ok  ' if ok else 'FAIL'} exit={code} {f.relative_to(args.corpus)} {' '.join(codes)}")
    print(f"{len(files) - failures}/{len(files)} fixtures behave as expected")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
