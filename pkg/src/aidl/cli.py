"""Command line: ``aidl check|solve|render``.

Exit codes are a fixed contract for external repair loops: 0 success,
1 validation error, 2 I/O error, 3 solve failure.  In batch mode every file
is processed and the process exits with the largest per-file code.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .diagnostics import Code, Diagnostic
from .geobool import CHORD_TOL, TOL_JOIN, BooleanDegeneracy, combine_scene
from .lang import compile_source
from .render import render_svg
from .serialize import dumps, solved_record
from .solver import NewtonConfig, solve_model

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_SOLVE = 0, 1, 2, 3
log = logging.getLogger("aidl")


@dataclass
class RunConfig:
    command: str
    paths: list
    out: Optional[str] = None
    json: bool = False
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    chord_tol: float = CHORD_TOL
    tol_join: float = TOL_JOIN

    def __post_init__(self):
        if not self.chord_tol > 0 or not self.tol_join > 0:
            raise ValueError("chord and join tolerances must be positive")


@dataclass
class FileReport:
    file: str
    diagnostics: list = field(default_factory=list)
    status: Optional[str] = None
    outcome: Optional[dict] = None
    outputs: list = field(default_factory=list)
    exit_code: int = EXIT_OK

    def summary(self, command: str) -> str:
        state = self.status or ("ok" if self.exit_code == EXIT_OK else "failed")
        msg = f"{self.file}: {command} {state}"
        if self.outcome is not None:
            msg += f" (residual_max {self.outcome['residual_max']:.3g})"
        if self.outputs:
            msg += " -> " + ", ".join(self.outputs)
        return msg


def _output_path(cfg: RunConfig, src: str, suffix: str) -> str:
    stem = Path(src).name
    for ext in (".aidl", ".solved.json", ".json"):
        if stem.endswith(ext):
            stem = stem[: -len(ext)]
            break
    if cfg.out is None:
        return str(Path(src).with_name(stem + suffix))
    out = Path(cfg.out)
    if len(cfg.paths) == 1 and out.suffix in (".json", ".svg"):
        return str(out)
    out.mkdir(parents=True, exist_ok=True)
    return str(out / (stem + suffix))


def _write(path: str, text: str, rep: FileReport) -> bool:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        rep.diagnostics.append(Diagnostic(Code.IO, f"cannot write {path}: {e.strerror}", file=rep.file))
        rep.exit_code = EXIT_IO
        return False
    rep.outputs.append(path)
    return True


def _render_json_input(path: str, text: str, cfg: RunConfig, rep: FileReport):
    try:
        rec = json.loads(text)
        scene = rec["scene"]
    except (ValueError, KeyError, TypeError):
        rep.diagnostics.append(Diagnostic(Code.IO, "not a solved-model JSON file with a scene", file=path))
        rep.exit_code = EXIT_IO
        return rep
    status = rec.get("outcome", {}).get("status", "Solved")
    rep.status = status
    if status != "Solved":
        rep.exit_code = EXIT_SOLVE
        return rep
    _write(_output_path(cfg, path, ".svg"), render_svg(scene, cfg.chord_tol), rep)
    return rep


def process(path: str, cfg: RunConfig) -> FileReport:
    rep = FileReport(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as e:
        msg = getattr(e, "strerror", None) or str(e)
        rep.diagnostics.append(Diagnostic(Code.IO, f"cannot read {path}: {msg}", file=path))
        rep.exit_code = EXIT_IO
        return rep
    if cfg.command == "render" and path.endswith(".json"):
        return _render_json_input(path, text, cfg, rep)
    compiled = compile_source(text, path)
    rep.diagnostics += compiled.diagnostics
    if not compiled.ok:
        rep.exit_code = EXIT_INVALID
        return rep
    if cfg.command == "check":
        return rep
    root = compiled.root
    outcome = solve_model(root, cfg.newton)
    rep.status = outcome.status
    rep.outcome = outcome.to_record()
    if not outcome.solved:
        rep.diagnostics.append(Diagnostic(
            Code.SOLVE_FAILED, f"{outcome.status} while solving {outcome.failed_path} "
            f"(deepest stage {outcome.failed_stage})", path=outcome.failed_path or "", file=path,
            extra={"status": outcome.status, "stage": outcome.failed_stage}))
        rep.exit_code = EXIT_SOLVE
        return rep
    try:
        scene = combine_scene(root, cfg.tol_join, cfg.chord_tol)
    except BooleanDegeneracy as e:
        rep.diagnostics.append(e.to_diagnostic(file=path))
        rep.exit_code = EXIT_SOLVE
        return rep
    for w in scene.warnings:
        w.file = path
    rep.diagnostics += scene.warnings
    rec = solved_record(root, outcome, scene, file=Path(path).name)
    if cfg.command == "solve":
        _write(_output_path(cfg, path, ".solved.json"), dumps(rec), rep)
    else:
        _write(_output_path(cfg, path, ".svg"), render_svg(rec["scene"], cfg.chord_tol), rep)
    return rep


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    code = EXIT_OK
    for path in cfg.paths:
        rep = process(path, cfg)
        code = max(code, rep.exit_code)
        if cfg.json:
            for d in rep.diagnostics:
                stdout.write(json.dumps({"kind": "diagnostic", **d.to_record()}) + "\n")
            summary = {"kind": "summary", "command": cfg.command, "file": path, "exit_code": rep.exit_code,
                       "status": rep.status, "outputs": rep.outputs, "message": rep.summary(cfg.command)}
            if rep.outcome is not None:
                summary["outcome"] = rep.outcome
            stdout.write(json.dumps(summary) + "\n")
        else:
            for d in rep.diagnostics:
                stderr.write(d.human() + "\n")
            stdout.write(rep.summary(cfg.command) + "\n")
    return code


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aidl", description="Check, solve and render .aidl programs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (("check", "parse, elaborate and validate; no solving"),
                            ("solve", "solve and write solved-model JSON"),
                            ("render", "solve (or read solved JSON) and write SVG")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("files", nargs="+", metavar="FILE")
        sp.add_argument("--json", action="store_true", help="line-delimited JSON records on stdout")
        sp.add_argument("--out", metavar="PATH", help="output file (single input) or directory")
        sp.add_argument("--tol-residual", type=_positive(float), default=1e-9)
        sp.add_argument("--max-newton", type=_positive(int), default=50)
        sp.add_argument("--max-outer", type=_positive(int), default=10)
        sp.add_argument("--chord-tol", type=_positive(float), default=CHORD_TOL)
        sp.add_argument("--join-tol", type=_positive(float), default=TOL_JOIN)
    return p


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("AIDL_LOG", "WARNING").upper(), None)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command, paths=list(args.files), out=args.out, json=args.json,
        newton=NewtonConfig(tol_residual=args.tol_residual, max_newton_iters=args.max_newton,
                            max_outer_iters=args.max_outer),
        chord_tol=args.chord_tol, tol_join=args.join_tol)
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
