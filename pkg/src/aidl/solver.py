"""Iterated Newton and the hierarchical post-order solve.

``newton_solve`` handles one smooth (branch-pinned) system.  ``iterated_solve``
wraps it in the re-pin loop that handles min/max/abs: pin at the current
values, solve, and check the original residuals, re-pinning whenever a
different operand has become active.  ``solve_model`` walks the structure tree
bottom-up and, when a node's own problem has no solution with its children
held rigid, widens the free set: first children's translations, level by
level, then all of their parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .expr import (
    DomainError,
    Expr,
    Parameter,
    Residual,
    _eval,
    differentiate,
    params_of,
    pin_with_pattern,
)
from .model import Structure, owned_parameters

log = logging.getLogger(__name__)

SOLVED = "Solved"
INCONSISTENT = "Inconsistent"
DID_NOT_CONVERGE = "DidNotConverge"


@dataclass(frozen=True)
class NewtonConfig:
    tol_residual: float = 1e-9
    max_newton_iters: int = 50
    max_outer_iters: int = 10
    max_halvings: int = 16
    rank_tol: float = 1e-10
    slack_weight: float = 1e-3

    def __post_init__(self):
        for name in ("tol_residual", "max_newton_iters", "max_outer_iters", "max_halvings", "rank_tol",
                     "slack_weight"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")


@dataclass
class ConstraintSystem:
    """Residuals over an ordered free set; every other parameter is held at
    its current value."""

    free: list
    residuals: list
    inequalities: list = field(default_factory=list)   # those whose slack is free

    @classmethod
    def of(cls, free: Sequence[Parameter], residuals: Sequence, inequalities=()) -> "ConstraintSystem":
        res = [r if isinstance(r, Residual) else Residual(r) for r in residuals]
        seen, uniq = set(), []
        for p in free:
            if p.mutable and p.id not in seen:
                seen.add(p.id)
                uniq.append(p)
        return cls(uniq, res, [q for q in inequalities if q.slack.id in seen])

    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.free], dtype=float)

    def max_residual(self) -> float:
        return max((abs(r.value()) for r in self.residuals), default=0.0)


@dataclass
class NewtonResult:
    status: str            # converged | stalled | failed | exhausted
    iterations: int
    residual_max: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _set(params, x):
    for p, v in zip(params, x):
        p.value = v


class _Compiled:
    """Residual and Jacobian evaluation for a fixed pinned system."""

    def __init__(self, free, exprs):
        self.free = free
        self.exprs = exprs
        col = {p.id: j for j, p in enumerate(free)}
        self.entries = []
        for i, e in enumerate(exprs):
            for pid in sorted(params_of(e) & col.keys(), key=col.get):
                d = differentiate(e, pid)
                self.entries.append((i, col[pid], d))

    def residuals(self, cache) -> np.ndarray:
        return np.array([_eval(e, None, cache) for e in self.exprs], dtype=float)

    def jacobian(self, cache) -> np.ndarray:
        J = np.zeros((len(self.exprs), len(self.free)))
        for i, j, d in self.entries:
            J[i, j] = _eval(d, None, cache)
        return J


def newton_solve(system: ConstraintSystem, config: NewtonConfig = NewtonConfig()) -> NewtonResult:
    """Damped Gauss-Newton on a branch-free system, in place.

    Steps are minimum-norm least-squares solutions of ``J dx = -F`` (singular
    values below ``rank_tol`` relative to the largest are dropped), with slack
    columns scaled by ``slack_weight`` so that underdetermined corrections go
    to geometry before slacks.  Slack parameters are kept non-negative: a slack
    at zero whose step points down is held for that step, and trial points are
    projected back onto ``s >= 0``.  Steps are halved until the residual norm
    decreases.  A step that leaves an operator's domain counts as a failed
    trial.  ``stalled`` means the projected gradient of the least-squares
    objective vanishes, which the caller reads as an inconsistent system.
    """
    free = system.free
    exprs = [r.expr for r in system.residuals]
    if not exprs:
        return NewtonResult("converged", 0, 0.0)
    comp = _Compiled(free, exprs)
    slack = np.array([p.role == "slack" for p in free], dtype=bool)
    w = np.where(slack, config.slack_weight, 1.0)
    x = np.where(slack, np.maximum(system.values(), 0.0), system.values())
    _set(free, x)
    try:
        F = comp.residuals({})
    except DomainError:
        return NewtonResult("failed", 0, float("inf"))
    tol = config.tol_residual
    for it in range(1, config.max_newton_iters + 1):
        fmax = float(np.max(np.abs(F)))
        if fmax <= tol:
            return NewtonResult("converged", it - 1, fmax)
        if not free:
            return NewtonResult("stalled", it - 1, fmax)
        try:
            J = comp.jacobian({})
        except DomainError:
            return NewtonResult("failed", it - 1, fmax)
        at_bound = slack & (x <= 0.0)
        g = J.T @ F
        g[at_bound & (g > 0.0)] = 0.0
        fnorm = float(np.linalg.norm(F))
        if float(np.linalg.norm(g)) <= 1e-10 * max(1.0, float(np.linalg.norm(J)) * fnorm):
            return NewtonResult("stalled", it - 1, fmax)
        dx = _step(J, F, w, at_bound, config.rank_tol)
        t, accepted = 1.0, False
        for _ in range(config.max_halvings + 1):
            trial = x + t * dx
            trial[slack] = np.maximum(trial[slack], 0.0)
            try:
                _set(free, trial)
                Fn = comp.residuals({})
            except (DomainError, ValueError):
                Fn = None
            if Fn is not None and float(np.linalg.norm(Fn)) < fnorm:
                x, F, accepted = trial, Fn, True
                break
            t *= 0.5
        if not accepted:
            _set(free, x)
            return NewtonResult("stalled" if _near_stationary(J, F, dx) else "failed", it, fmax)
    fmax = float(np.max(np.abs(F)))
    return NewtonResult("converged" if fmax <= tol else "exhausted", config.max_newton_iters, fmax)


def _step(J, F, w, at_bound, rank_tol):
    # drop bound slacks whose step points further down, then re-solve
    held = np.zeros_like(at_bound)
    while True:
        cols = w * ~held
        dx = cols * np.linalg.lstsq(J * cols, -F, rcond=rank_tol)[0]
        more = at_bound & ~held & (dx < 0.0)
        if not more.any():
            return dx
        held |= more


def _near_stationary(J, F, dx) -> bool:
    # the full Gauss-Newton step predicts no decrease in |F|
    pred = F + J @ dx
    return float(np.linalg.norm(pred)) >= float(np.linalg.norm(F)) * (1.0 - 1e-9)


@dataclass
class IteratedResult:
    status: str
    outer_iterations: int
    newton_iterations: int
    residual_max: float
    patterns: list = field(default_factory=list)


def _original_max(residuals) -> float:
    cache = {}
    try:
        return max((abs(_eval(r.expr, None, cache)) for r in residuals), default=0.0)
    except DomainError:
        return float("inf")


def _reseed(inequalities) -> bool:
    """Reset each slack to the current gap of its inequality."""
    changed = False
    for q in inequalities:
        s = q.slack
        try:
            v = max(0.0, q.gap())
        except DomainError:
            continue
        if v != s.value:
            s.value = v
            changed = True
    return changed


def iterated_solve(system: ConstraintSystem, config: NewtonConfig = NewtonConfig()) -> IteratedResult:
    """Pin, solve, re-check the unpinned residuals, re-pin; in place.

    Before each pinning, slacks of the system's inequalities are re-seeded
    from the current gap so that a stale slack does not hold an inequality
    at a boundary it has left.  Terminates Solved when the original residuals pass, Inconsistent when
    Newton stalls and re-pinning selects the same branches again, and
    DidNotConverge when the outer budget runs out or a branch pattern comes
    back without the original residual having improved.
    """
    tol = config.tol_residual
    best: dict[tuple, float] = {}
    newton_total = 0
    patterns = []
    current = _original_max(system.residuals)
    for outer in range(1, config.max_outer_iters + 1):
        if _reseed(system.inequalities):
            current = _original_max(system.residuals)
        try:
            pinned = [pin_with_pattern(r.expr) for r in system.residuals]
        except DomainError:
            return IteratedResult(DID_NOT_CONVERGE, outer - 1, newton_total, current, patterns)
        pattern = tuple(p for _, p in pinned)
        if pattern in best and current >= best[pattern] and outer > 1:
            log.debug("branch pattern repeated without improvement")
            return IteratedResult(DID_NOT_CONVERGE, outer - 1, newton_total, current, patterns)
        best[pattern] = min(best.get(pattern, float("inf")), current)
        patterns.append(pattern)
        sub = ConstraintSystem(system.free, [Residual(e) for e, _ in pinned])
        nr = newton_solve(sub, config)
        newton_total += nr.iterations
        current = _original_max(system.residuals)
        if current <= tol:
            return IteratedResult(SOLVED, outer, newton_total, current, patterns)
        try:
            again = tuple(pin_with_pattern(r.expr)[1] for r in system.residuals)
        except DomainError:
            again = None
        if again == pattern:
            if nr.status == "stalled":
                return IteratedResult(INCONSISTENT, outer, newton_total, current, patterns)
            if nr.status == "failed":
                return IteratedResult(DID_NOT_CONVERGE, outer, newton_total, current, patterns)
    return IteratedResult(DID_NOT_CONVERGE, config.max_outer_iters, newton_total, current, patterns)


# --- hierarchical solve -----------------------------------------------------------------

@dataclass
class StageRecord:
    path: str
    stage: str          # local | translation | geometric
    level: int
    status: str
    iterations: int
    outer_iterations: int = 0

    def to_record(self) -> dict:
        return {"path": self.path, "stage": self.stage, "level": self.level, "status": self.status,
                "iterations": self.iterations, "outer_iterations": self.outer_iterations}


@dataclass
class SolveOutcome:
    status: str
    stage_report: list = field(default_factory=list)   # StageRecord per solved node
    attempts: list = field(default_factory=list)       # every attempt, in order
    residual_max: float = 0.0
    iterations: dict = field(default_factory=dict)
    failed_path: Optional[str] = None
    failed_stage: Optional[str] = None

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    def stage_of(self, path: str) -> Optional[StageRecord]:
        for rec in self.stage_report:
            if rec.path == path:
                return rec
        return None

    def to_record(self) -> dict:
        out = {
            "status": self.status,
            "residual_max": self.residual_max,
            "iterations": dict(self.iterations),
            "stage_report": [r.to_record() for r in self.stage_report],
        }
        if self.failed_path is not None:
            out["failed_path"] = self.failed_path
            out["failed_stage"] = self.failed_stage
        return out


def _by_depth(node: Structure) -> dict[int, list[Structure]]:
    levels: dict[int, list[Structure]] = {}

    def visit(s, d):
        levels.setdefault(d, []).append(s)
        for c in s.children:
            visit(c, d + 1)

    visit(node, 0)
    return levels


def _residuals(structs) -> list[Residual]:
    return [r for s in structs for lc in s.lowered for r in lc.residuals]


def _attempts(node: Structure):
    """(stage, level, free parameters, active residuals) in escalation order."""
    levels = _by_depth(node)
    depth = max(levels)
    own = owned_parameters(node)
    yield "local", 0, own, _residuals(levels[0])
    for k in range(1, depth + 1):
        free = list(own)
        for j in range(1, k + 1):
            for s in levels[j]:
                free += [s.tx, s.ty]
        # slacks of re-activated constraint sets are auxiliary, not geometry
        for j in range(1, k):
            for s in levels[j]:
                free += s.slacks
        yield "translation", k, free, _residuals(s for j in range(k) for s in levels[j])
    for k in range(1, depth + 1):
        free = list(own)
        for j in range(1, k + 1):
            for s in levels[j]:
                free += [s.tx, s.ty] + owned_parameters(s)
        yield "geometric", k, free, _residuals(s for j in range(k + 1) for s in levels[j])


def _subtree_parameters(node: Structure) -> list[Parameter]:
    out = []
    for s in node.walk():
        if s is not node:
            out += [s.tx, s.ty]
        out += owned_parameters(s)
    return out


def solve_node(node: Structure, config: NewtonConfig, outcome: SolveOutcome) -> bool:
    """Solve one node's problem with its children already solved."""
    snapshot = [(p, p.value) for p in _subtree_parameters(node)]
    inequalities = [q for s in node.walk() for lc in s.lowered for q in lc.inequalities]
    last = None
    for stage, level, free, residuals in _attempts(node):
        system = ConstraintSystem.of(free, residuals, inequalities)
        res = iterated_solve(system, config)
        rec = StageRecord(node.path, stage, level, res.status, res.newton_iterations, res.outer_iterations)
        outcome.attempts.append(rec)
        outcome.iterations["newton"] = outcome.iterations.get("newton", 0) + res.newton_iterations
        outcome.iterations["outer"] = outcome.iterations.get("outer", 0) + res.outer_iterations
        outcome.iterations.setdefault(stage, 0)
        outcome.iterations[stage] += 1
        log.debug("%s %s level %d: %s", node.path, stage, level, res.status)
        if res.status == SOLVED:
            outcome.stage_report.append(rec)
            return True
        for p, v in snapshot:
            p.value = v
        last = rec
    outcome.failed_path = node.path
    outcome.failed_stage = f"{last.stage}:{last.level}"
    outcome.status = last.status
    return False


def solve_model(root: Structure, config: NewtonConfig = NewtonConfig()) -> SolveOutcome:
    """Post-order solve with translation-then-geometric deepening.

    Expects ``finalize_deferred`` to have run.  Children are visited in
    declaration order; the first node that cannot be solved stops the run.
    """
    outcome = SolveOutcome(SOLVED, iterations={"newton": 0, "outer": 0})
    for node in root.post_order():
        if not solve_node(node, config, outcome):
            break
    outcome.residual_max = _original_max(_residuals(root.walk()))
    if outcome.status == SOLVED and outcome.residual_max > config.tol_residual:
        # a later node disturbed an earlier one; should not happen with the staged schedule
        outcome.status = DID_NOT_CONVERGE
        outcome.failed_path = root.path
        outcome.failed_stage = "final-check"
    return outcome
