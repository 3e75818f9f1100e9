"""Nelder-Mead simplex search on a box.

Classical coefficients (reflection 1, expansion 2, contraction 0.5, shrink
0.5).  Candidate vertices are clamped to the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import problems
from .exceptions import PreconditionError, ValidationError
from .problems import ScalarProblem


@dataclass(frozen=True)
class NmConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    init_scale: float = 0.05
    f_tol: float = 1e-14
    x_tol: float = 1e-12
    max_evals: int = 10_000

    def __post_init__(self):
        if not self.reflection > 0:
            raise ValidationError("reflection must be > 0")
        if not self.expansion > self.reflection:
            raise ValidationError("expansion must exceed reflection")
        if not 0 < self.contraction < 1:
            raise ValidationError("contraction must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValidationError("shrink must lie in (0, 1)")
        if self.init_scale <= 0 or self.f_tol < 0 or self.x_tol < 0 or self.max_evals < 1:
            raise ValidationError("init_scale must be positive, tolerances non-negative, max_evals >= 1")


class NmResult(NamedTuple):
    x: np.ndarray
    fun: float
    evals: int
    reason: str  # "f_tol", "x_tol" or "budget"


class _Budget(Exception):
    pass


def minimize(f: ScalarProblem, x0, cfg: NmConfig = NmConfig(), budget: Optional[int] = None) -> NmResult:
    """Minimise ``f`` from ``x0`` with at most ``budget`` evaluations.

    The initial simplex adds ``init_scale * (upper - lower)`` along each axis
    (towards the interior if the edge would leave the box).
    """
    d = f.dim
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (d,):
        raise PreconditionError(f"x0 must have length {d}")
    if not f.contains(x0):
        raise PreconditionError("x0 must lie within bounds")
    budget = cfg.max_evals if budget is None else min(int(budget), cfg.max_evals)
    if budget < d + 1:
        raise PreconditionError(f"budget {budget} < d + 1 = {d + 1}")

    lo, hi = f.lower, f.upper
    evals = 0

    def fx(x):
        nonlocal evals
        if evals >= budget:
            raise _Budget
        evals += 1
        return problems.evaluate(f, x)

    simplex = np.tile(x0, (d + 1, 1))
    step = cfg.init_scale * (hi - lo)
    for i in range(d):
        if x0[i] + step[i] <= hi[i]:
            simplex[i + 1, i] += step[i]
        else:
            simplex[i + 1, i] -= step[i]
    fvals = np.array([fx(v) for v in simplex])

    a, g, c, s = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink
    reason = "budget"
    try:
        while True:
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            if fvals[-1] - fvals[0] <= cfg.f_tol:
                reason = "f_tol"
                break
            if np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)) <= cfg.x_tol:
                reason = "x_tol"
                break
            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            xr = np.clip(centroid + a * (centroid - worst), lo, hi)
            fr = fx(xr)
            if fr < fvals[0]:
                xe = np.clip(centroid + g * (xr - centroid), lo, hi)
                fe = fx(xe)
                if fe < fr:
                    simplex[-1], fvals[-1] = xe, fe
                else:
                    simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-1]:
                xc = np.clip(centroid + c * (xr - centroid), lo, hi)
                fc = fx(xc)
                accept = fc <= fr
            else:
                xc = np.clip(centroid + c * (worst - centroid), lo, hi)
                fc = fx(xc)
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
                continue
            for i in range(1, d + 1):
                v = simplex[0] + s * (simplex[i] - simplex[0])
                fvals[i] = fx(v)
                simplex[i] = v
    except _Budget:
        reason = "budget"

    best = int(np.argmin(fvals))
    return NmResult(simplex[best].copy(), float(fvals[best]), evals, reason)
