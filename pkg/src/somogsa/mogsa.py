"""Multi-objective gradient sliding on a multiobjectivized problem.

Phase 1 slides down the MO gradient until an efficient set is reached or
crossed (crossings are resolved by a weighted bisection).  Phase 2 walks the
set along the gradient of ``f1`` and then, from the first set point, along the
gradient of the sphere.  A ridge crossing during Phase 2 hands the new point
back to Phase 1; a set whose explorations meet no ridge ends the run.

Step accounting: one Phase-1 invocation is one step, every Phase-2 move is one
step.  Evaluations count calls of the ``f1`` evaluator only.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple, Optional

import numpy as np

from . import neldermead, problems
from .biobj import BiObjectiveProblem, GradientPair, angle_deg, combine_gradients
from .exceptions import PreconditionError, ValidationError
from .neldermead import NmConfig
from .problems import DEFAULT_FD_STEP


class Phase(str, enum.Enum):
    DESCENT = "Descent"
    EXPLORE_F1 = "ExploreF1"
    EXPLORE_F2 = "ExploreF2"
    BISECTION = "Bisection"
    LOCAL_REFINE = "LocalRefine"
    RESTART = "Restart"
    BOUNDARY_CLAMP = "BoundaryClamp"


class Note(str, enum.Enum):
    NONE = ""
    START = "start"
    EFFICIENT = "efficient"
    CROSSED = "crossed"
    ABORTED = "aborted"
    FOUND_OPTIMUM = "found_optimum"
    PASSED_OPTIMUM = "passed_optimum"
    RIDGE_CROSSED = "ridge_crossed"
    BOUNDARY_HIT = "boundary_hit"
    DUPLICATE = "duplicate"
    REFINED = "refined"
    UNCONVERGED = "unconverged"
    BOUNDARY_RESTART = "boundary_restart"


class Classification(str, enum.Enum):
    CANDIDATE_OPTIMUM = "CandidateOptimum"
    SPHERE_OPTIMUM = "SphereOptimum"


class Termination(str, enum.Enum):
    RIDGE_FREE_SET_FOUND = "RidgeFreeSetFound"
    STEP_BUDGET = "StepBudget"
    EVAL_BUDGET = "EvalBudget"


class OutcomeKind(str, enum.Enum):
    FOUND_OPTIMUM = "FoundOptimum"
    PASSED_OPTIMUM = "PassedOptimum"
    RIDGE_CROSSED = "RidgeCrossed"
    BOUNDARY_HIT = "BoundaryHit"


@dataclass(frozen=True)
class MogsaConfig:
    """Solver parameters.

    ``min_step`` is a fraction of the widest coordinate range.  ``grad_mode``
    selects how ``grad f1`` is obtained (``"central_fd"`` charges ``2 d``
    evaluations per gradient, ``"analytic"`` charges none).
    """

    sigma1: float = 0.1
    sigma2: float = 0.1
    eps_mo: float = 1e-4
    zero_grad_tol: float = 1e-8
    crossing_angle_deg: float = 90.0
    ridge_angle_deg: float = 90.0
    passed_optimum_angle_deg: float = 90.0
    bisection_tol: float = 1e-6
    bisection_max_iter: int = 100
    min_step: float = 1e-8
    max_phase1_points: int = 1000
    max_steps: int = 1000
    dedup_radius: float = 1e-4
    rng_seed: int = 0
    grad_mode: str = "central_fd"
    fd_step: float = DEFAULT_FD_STEP
    refine: NmConfig = field(default_factory=NmConfig)
    refine_max_evals: int = 2000
    polish_tol: float = 1e-9
    polish_max_iter: int = 8

    def __post_init__(self):
        positive = {
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "eps_mo": self.eps_mo,
            "zero_grad_tol": self.zero_grad_tol,
            "bisection_tol": self.bisection_tol,
            "min_step": self.min_step,
            "dedup_radius": self.dedup_radius,
            "fd_step": self.fd_step,
            "polish_tol": self.polish_tol,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValidationError(f"{name} must be strictly positive, got {value}")
        for name in ("crossing_angle_deg", "ridge_angle_deg", "passed_optimum_angle_deg"):
            value = getattr(self, name)
            if not 0 < value < 180:
                raise ValidationError(f"{name} must lie in (0, 180), got {value}")
        if self.max_phase1_points < 1 or self.max_steps < 1 or self.refine_max_evals < 1:
            raise ValidationError("point, step and refine budgets must be >= 1")
        if self.grad_mode not in ("analytic", "central_fd"):
            raise ValidationError(f"unknown grad_mode {self.grad_mode!r}")

    def replace(self, **changes) -> "MogsaConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TraceEvent:
    step_index: int
    phase: Phase
    x: tuple
    f1: float
    f2: float
    mo_norm: float
    note: Note = Note.NONE

    def to_dict(self) -> dict:
        return {
            "step": self.step_index,
            "phase": self.phase.value,
            "x": list(self.x),
            "f1": self.f1,
            "f2": self.f2,
            "mo_norm": self.mo_norm,
            "note": self.note.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        return cls(int(d["step"]), Phase(d["phase"]), tuple(d["x"]), d["f1"], d["f2"], d["mo_norm"], Note(d["note"]))


@dataclass(frozen=True)
class ArchiveEntry:
    x: np.ndarray
    f1: float
    classification: Classification


@dataclass
class RunResult:
    archive: list[ArchiveEntry]
    best_x: Optional[np.ndarray]
    best_f1: float
    terminated_by: Termination
    evals_f1: int
    steps: int
    trace: list[TraceEvent]

    @property
    def best(self) -> tuple[Optional[np.ndarray], float]:
        return self.best_x, self.best_f1

    def candidates(self) -> list[ArchiveEntry]:
        return [a for a in self.archive if a.classification is Classification.CANDIDATE_OPTIMUM]


class Outcome(NamedTuple):
    kind: OutcomeKind
    x: np.ndarray
    x_prev: Optional[np.ndarray] = None


class Descent(NamedTuple):
    x: np.ndarray
    trace: list[TraceEvent]
    status: Note  # EFFICIENT, CROSSED or ABORTED


class Refined(NamedTuple):
    x: np.ndarray
    f1: float
    converged: bool


class _EvalBudget(Exception):
    pass


class _StepBudget(Exception):
    pass


class _Probe(NamedTuple):
    x: np.ndarray
    f1: float
    pair: GradientPair


class _Context:
    """Mutable per-run state: counters, RNG and trace."""

    def __init__(self, p: BiObjectiveProblem, cfg: MogsaConfig, eval_budget: float = np.inf):
        self.p = p
        self.cfg = cfg
        self.eval_budget = eval_budget
        self.evals = 0
        self.steps = 0
        self.rng = np.random.default_rng(cfg.rng_seed)
        self.trace: list[TraceEvent] = []
        self.min_step = cfg.min_step * float(np.max(p.f1.upper - p.f1.lower))

    # evaluation accounting -------------------------------------------------
    def f1(self, x) -> float:
        if self.evals + 1 > self.eval_budget:
            raise _EvalBudget
        self.evals += 1
        return problems.evaluate(self.p.f1, x)

    def grad1(self, x) -> np.ndarray:
        cfg = self.cfg
        if cfg.grad_mode == "central_fd" and self.evals + 2 * self.p.dim > self.eval_budget:
            raise _EvalBudget
        return problems.gradient(self.p.f1, x, cfg.grad_mode, cfg.fd_step, self.f1).grad

    def grad1_fine(self, x) -> np.ndarray:
        """Fourth-order FD gradient (analytic when configured), for certifying optima."""
        cfg = self.cfg
        if cfg.grad_mode == "analytic":
            return self.grad1(x)
        if self.evals + 4 * self.p.dim > self.eval_budget:
            raise _EvalBudget
        return problems.gradient(self.p.f1, x, "central_fd4", cfg.fd_step, self.f1).grad

    def probe(self, x, phase: Phase, note: Note = Note.NONE) -> _Probe:
        x = np.asarray(x, dtype=float)
        g1 = self.grad1(x)
        value = self.f1(x)
        pair = combine_gradients(g1, self.p.grad_f2(x), self.cfg.zero_grad_tol)
        self.log(phase, x, value, pair.mo_norm, note)
        return _Probe(x, value, pair)

    def log(self, phase: Phase, x, f1: float, mo_norm: float, note: Note = Note.NONE):
        self.trace.append(TraceEvent(len(self.trace), phase, tuple(float(v) for v in x), float(f1), self.p.f2(x), float(mo_norm), note))

    def annotate(self, note: Note):
        last = self.trace[-1]
        self.trace[-1] = dataclasses.replace(last, note=note)

    def step(self):
        if self.steps >= self.cfg.max_steps:
            raise _StepBudget
        self.steps += 1

    def uniform_point(self) -> np.ndarray:
        return self.rng.uniform(self.p.f1.lower, self.p.f1.upper)

    def efficient(self, pair: GradientPair) -> bool:
        return pair.is_efficient(self.cfg.eps_mo)


def _context(p, cfg, ctx) -> _Context:
    return ctx if ctx is not None else _Context(p, cfg)


def _angle_or_none(u, v) -> Optional[float]:
    if not np.any(u) or not np.any(v):
        return None
    return angle_deg(u, v)


# ---------------------------------------------------------------------------
# Phase 1


def descend_to_set(
    p: BiObjectiveProblem,
    x0,
    cfg: MogsaConfig = MogsaConfig(),
    ctx: Optional[_Context] = None,
    start_phase: Phase = Phase.DESCENT,
) -> Descent:
    """Slide from ``x0`` along ``-mo`` to an efficient set.

    Out-of-bounds steps are clamped; a second consecutive clamp onto the same
    boundary point restarts uniformly in the box.  If consecutive MO gradients
    form an angle above ``cfg.crossing_angle_deg`` the set was crossed and the
    last two points are passed to :func:`weighted_bisection`.
    """
    ctx = _context(p, cfg, ctx)
    x0 = np.asarray(x0, dtype=float)
    if not p.f1.contains(x0):
        raise PreconditionError("x0 must lie within bounds")
    start = len(ctx.trace)
    cur = ctx.probe(x0, start_phase, Note.START)
    if ctx.efficient(cur.pair):
        ctx.annotate(Note.EFFICIENT)
        return Descent(cur.x, ctx.trace[start:], Note.EFFICIENT)

    last_clamp = None
    for _ in range(cfg.max_phase1_points):
        proposal = cur.x - cfg.sigma1 * cur.pair.mo
        x_new = p.f1.clip(proposal)
        restarted = False
        if not np.array_equal(x_new, proposal):
            if last_clamp is not None and np.array_equal(x_new, last_clamp):
                x_new = ctx.uniform_point()
                restarted = True
                last_clamp = None
            else:
                last_clamp = x_new
        else:
            last_clamp = None

        if restarted:
            nxt = ctx.probe(x_new, Phase.RESTART, Note.BOUNDARY_RESTART)
        elif last_clamp is not None:
            nxt = ctx.probe(x_new, Phase.BOUNDARY_CLAMP)
        else:
            nxt = ctx.probe(x_new, Phase.DESCENT)
        if ctx.efficient(nxt.pair):
            ctx.annotate(Note.EFFICIENT)
            return Descent(nxt.x, ctx.trace[start:], Note.EFFICIENT)
        if not restarted:
            angle = _angle_or_none(cur.pair.mo, nxt.pair.mo)
            if angle is not None and angle > cfg.crossing_angle_deg:
                ctx.annotate(Note.CROSSED)
                x_set = weighted_bisection(cur.x, nxt.x, p, cfg, ctx)
                return Descent(x_set, ctx.trace[start:], Note.CROSSED)
        cur = nxt
    ctx.annotate(Note.ABORTED)
    return Descent(cur.x, ctx.trace[start:], Note.ABORTED)


def weighted_bisection(x_a, x_b, p: BiObjectiveProblem, cfg: MogsaConfig = MogsaConfig(), ctx: Optional[_Context] = None) -> np.ndarray:
    """Locate the efficient set between two points whose MO gradients oppose.

    Each probe splits ``[x_a, x_b]`` in the ratio ``||mo_a|| : ||mo_b||`` so it
    lands nearer the endpoint with the shorter MO gradient, then replaces the
    endpoint whose MO gradient forms an acute angle with the probe's.  If the
    same endpoint survives three probes in a row the next probe is the plain
    midpoint, which keeps the interval shrinking.
    """
    ctx = _context(p, cfg, ctx)
    x_a = np.asarray(x_a, dtype=float)
    x_b = np.asarray(x_b, dtype=float)
    if np.linalg.norm(x_a - x_b) < cfg.bisection_tol:
        return 0.5 * (x_a + x_b)
    pa = combine_gradients(ctx.grad1(x_a), p.grad_f2(x_a), cfg.zero_grad_tol)
    pb = combine_gradients(ctx.grad1(x_b), p.grad_f2(x_b), cfg.zero_grad_tol)
    angle = _angle_or_none(pa.mo, pb.mo)
    if angle is None or angle <= cfg.crossing_angle_deg:
        raise PreconditionError("endpoints do not bracket an efficient set")
    mo_a, na = pa.mo, pa.mo_norm
    mo_b, nb = pb.mo, pb.mo_norm
    kept_a = kept_b = 0
    for _ in range(cfg.bisection_max_iter):
        if kept_a >= 3 or kept_b >= 3:
            w = 0.5
            kept_a = kept_b = 0
        else:
            w = na / (na + nb)
        probe = ctx.probe(x_a + w * (x_b - x_a), Phase.BISECTION)
        if ctx.efficient(probe.pair):
            return probe.x
        mo = probe.pair.mo
        if float(np.dot(mo, mo_a)) > 0.0:
            x_a, mo_a, na = probe.x, mo, probe.pair.mo_norm
            kept_b += 1
            kept_a = 0
        else:
            x_b, mo_b, nb = probe.x, mo, probe.pair.mo_norm
            kept_a += 1
            kept_b = 0
        if np.linalg.norm(x_a - x_b) < cfg.bisection_tol:
            break
    return 0.5 * (x_a + x_b)


# ---------------------------------------------------------------------------
# Phase 2


def explore_set(p: BiObjectiveProblem, x_eff, objective: str, cfg: MogsaConfig = MogsaConfig(), ctx: Optional[_Context] = None) -> Outcome:
    """Walk from ``x_eff`` along the unit gradient of ``objective`` (``"f1"`` or ``"f2"``).

    Every move is classified, in this order: vanishing gradient (found),
    gradient turned by more than ``passed_optimum_angle_deg`` (passed), the two
    gradients at the new point closer than ``ridge_angle_deg`` (ridge),
    clamped to the bounds (boundary).
    """
    if objective not in ("f1", "f2"):
        raise ValueError("objective must be 'f1' or 'f2'")
    ctx = _context(p, cfg, ctx)
    phase = Phase.EXPLORE_F1 if objective == "f1" else Phase.EXPLORE_F2
    use_f1 = objective == "f1"

    def grad_of(pr: _Probe):
        return (pr.pair.g1, pr.pair.g1_norm, pr.pair.g1_zero) if use_f1 else (pr.pair.g2, pr.pair.g2_norm, pr.pair.g2_zero)

    cur = ctx.probe(x_eff, phase, Note.START)
    _, unit, zero = grad_of(cur)
    if zero:
        ctx.annotate(Note.FOUND_OPTIMUM)
        return Outcome(OutcomeKind.FOUND_OPTIMUM, cur.x)

    while True:
        ctx.step()
        proposal = cur.x - cfg.sigma2 * unit
        x_new = p.f1.clip(proposal)
        clamped = not np.array_equal(x_new, proposal)
        if np.linalg.norm(x_new - cur.x) < ctx.min_step:
            return Outcome(OutcomeKind.BOUNDARY_HIT, cur.x)
        nxt = ctx.probe(x_new, phase)
        _, unit_new, zero_new = grad_of(nxt)
        if zero_new:
            ctx.annotate(Note.FOUND_OPTIMUM)
            return Outcome(OutcomeKind.FOUND_OPTIMUM, nxt.x)
        if angle_deg(unit, unit_new) > cfg.passed_optimum_angle_deg:
            ctx.annotate(Note.PASSED_OPTIMUM)
            return Outcome(OutcomeKind.PASSED_OPTIMUM, nxt.x, cur.x)
        between = nxt.pair.angle
        if between is not None and between < cfg.ridge_angle_deg:
            ctx.annotate(Note.RIDGE_CROSSED)
            return Outcome(OutcomeKind.RIDGE_CROSSED, nxt.x, cur.x)
        if clamped:
            ctx.annotate(Note.BOUNDARY_HIT)
            return Outcome(OutcomeKind.BOUNDARY_HIT, nxt.x, cur.x)
        cur, unit = nxt, unit_new


def _polish(ctx: _Context, x: np.ndarray) -> np.ndarray:
    """Newton steps on ``grad f1`` with a finite-difference Hessian.

    Only steps that shrink the gradient norm are kept; stops at
    ``polish_tol`` or when the Hessian is not positive definite.
    """
    cfg = ctx.cfg
    p = ctx.p
    d = p.dim
    g = ctx.grad1_fine(x)
    hh = 1e-4
    for _ in range(cfg.polish_max_iter):
        gn = np.linalg.norm(g)
        if gn < cfg.polish_tol:
            break
        H = np.empty((d, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = hh
            H[:, i] = (ctx.grad1(x + e) - ctx.grad1(x - e)) / (2 * hh)
        H = 0.5 * (H + H.T)
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            break
        x_new = p.f1.clip(x - np.linalg.solve(H, g))
        g_new = ctx.grad1_fine(x_new)
        if not np.linalg.norm(g_new) < gn:
            break
        x, g = x_new, g_new
    return x


def local_refine(p: BiObjectiveProblem, x_t, x_t1, cfg: MogsaConfig = MogsaConfig(), ctx: Optional[_Context] = None) -> Refined:
    """Nelder-Mead on ``f1`` from the midpoint of ``x_t`` and ``x_t1``, then a Newton polish.

    ``converged`` is true when the final ``||grad f1||`` is below
    ``10 * zero_grad_tol``.  All evaluations are charged to the run.
    """
    ctx = _context(p, cfg, ctx)
    start = 0.5 * (np.asarray(x_t, dtype=float) + np.asarray(x_t1, dtype=float))
    remaining = ctx.eval_budget - ctx.evals
    if remaining < p.dim + 1:
        raise _EvalBudget
    budget = int(min(cfg.refine_max_evals, remaining))
    counted = p.f1.with_evaluator(lambda z: _count_and_eval(ctx, z))
    x = neldermead.minimize(counted, start, cfg.refine, budget).x
    return _certify(ctx, x)


def _certify(ctx: _Context, x) -> Refined:
    """Polish ``x`` and log it as a refinement; converged when ``||grad f1|| < 10 zero_grad_tol``."""
    cfg = ctx.cfg
    x = _polish(ctx, np.asarray(x, dtype=float))
    g = ctx.grad1_fine(x)
    converged = bool(np.linalg.norm(g) < 10 * cfg.zero_grad_tol)
    value = ctx.f1(x)
    pair = combine_gradients(g, ctx.p.grad_f2(x), cfg.zero_grad_tol)
    ctx.log(Phase.LOCAL_REFINE, x, value, pair.mo_norm, Note.REFINED if converged else Note.UNCONVERGED)
    return Refined(x, value, converged)


def _count_and_eval(ctx: _Context, z):
    # NM calls problems.evaluate on the wrapped problem, which calls this.
    if ctx.evals + 1 > ctx.eval_budget:
        raise _EvalBudget
    ctx.evals += 1
    return ctx.p.f1.evaluator(z)


# ---------------------------------------------------------------------------
# Driver


def _closest_to_center(p: BiObjectiveProblem, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimiser of the sphere on the segment ``[a, b]`` (closed form, free)."""
    d = b - a
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return a.copy()
    t = float(np.clip(np.dot(p.center - a, d) / dd, 0.0, 1.0))
    return a + t * d


def run(p: BiObjectiveProblem, x0, cfg: MogsaConfig = MogsaConfig(), eval_budget: float = 100_000) -> RunResult:
    """Run MOGSA from ``x0`` until a ridge-free set is found or a budget runs out."""
    x0 = np.asarray(x0, dtype=float)
    if not p.f1.contains(x0):
        raise PreconditionError("x0 must lie within bounds")
    ctx = _Context(p, cfg, eval_budget)
    archive: list[ArchiveEntry] = []

    def add(x, value, cls) -> bool:
        """Archive ``x``; returns True if it duplicates an earlier entry."""
        for entry in archive:
            if np.linalg.norm(entry.x - x) <= cfg.dedup_radius:
                return True
        archive.append(ArchiveEntry(np.array(x, dtype=float), float(value), cls))
        return False

    if eval_budget <= 0:
        return _finish(archive, ctx, Termination.EVAL_BUDGET)

    x = x0
    start_phase = Phase.DESCENT
    try:
        while True:
            ctx.step()
            x_eff = descend_to_set(p, x, cfg, ctx, start_phase).x
            start_phase = Phase.DESCENT

            out1 = explore_set(p, x_eff, "f1", cfg, ctx)
            if out1.kind is OutcomeKind.RIDGE_CROSSED:
                x = out1.x
                continue
            duplicate = False
            ref = None
            if out1.kind is OutcomeKind.FOUND_OPTIMUM:
                ref = _certify(ctx, out1.x)
            elif out1.kind is OutcomeKind.PASSED_OPTIMUM:
                ref = local_refine(p, out1.x_prev, out1.x, cfg, ctx)
            if ref is not None and ref.converged:
                duplicate = add(ref.x, ref.f1, Classification.CANDIDATE_OPTIMUM)
            if duplicate:
                ctx.annotate(Note.DUPLICATE)
                x = ctx.uniform_point()
                start_phase = Phase.RESTART
                continue

            out2 = explore_set(p, x_eff, "f2", cfg, ctx)
            if out2.kind is OutcomeKind.RIDGE_CROSSED:
                x = out2.x
                continue
            if out2.kind is OutcomeKind.FOUND_OPTIMUM:
                add(out2.x, ctx.trace[-1].f1, Classification.SPHERE_OPTIMUM)
            elif out2.kind is OutcomeKind.PASSED_OPTIMUM:
                xs = _closest_to_center(p, out2.x_prev, out2.x)
                add(xs, ctx.f1(xs), Classification.SPHERE_OPTIMUM)
            return _finish(archive, ctx, Termination.RIDGE_FREE_SET_FOUND)
    except _StepBudget:
        return _finish(archive, ctx, Termination.STEP_BUDGET)
    except _EvalBudget:
        return _finish(archive, ctx, Termination.EVAL_BUDGET)


def _finish(archive, ctx: _Context, why: Termination) -> RunResult:
    best_x, best_f = None, np.inf
    for entry in archive:
        if entry.f1 < best_f:
            best_x, best_f = entry.x, entry.f1
    for ev in ctx.trace:
        if ev.f1 < best_f:
            best_x, best_f = np.array(ev.x), ev.f1
    return RunResult(archive, best_x, float(best_f), why, ctx.evals, ctx.steps, list(ctx.trace))


# ---------------------------------------------------------------------------
# Trace I/O


def write_trace(trace: Iterable[TraceEvent], fh: IO[str]):
    """One JSON object per line: step, phase, x, f1, f2, mo_norm, note."""
    for ev in trace:
        fh.write(json.dumps(ev.to_dict(), allow_nan=True) + "\n")


def read_trace(fh: IO[str]) -> list[TraceEvent]:
    return [TraceEvent.from_dict(json.loads(line)) for line in fh if line.strip()]
