"""Multiobjectivization: a problem paired with a sphere helper objective.

The helper ``f2(x) = sum((x - s)**2)`` and its gradient are closed form and
never charged to the evaluation budget of ``f1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import problems
from .exceptions import DimensionError, UndefinedAngleError, ValidationError
from .problems import DEFAULT_FD_STEP, DEFAULT_SPHERE_CENTER, ScalarProblem

ZERO_GRAD_TOL = 1e-8
EPS_MO = 1e-4


def sphere_value(s, x) -> float:
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if s.shape != x.shape:
        raise DimensionError(f"dimension mismatch: {s.shape} vs {x.shape}")
    return float(np.sum((x - s) ** 2))


def default_center(dim: int) -> np.ndarray:
    center = np.zeros(dim)
    k = min(dim, len(DEFAULT_SPHERE_CENTER))
    center[:k] = DEFAULT_SPHERE_CENTER[:k]
    return center


@dataclass(frozen=True, eq=False)
class BiObjectiveProblem:
    """``f1`` plus the sphere centered at ``center``; bounds are those of ``f1``."""

    f1: ScalarProblem
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        center = default_center(self.f1.dim) if self.center is None else np.array(self.center, dtype=float)
        if center.shape != (self.f1.dim,):
            raise DimensionError(f"sphere center must have length {self.f1.dim}")
        if not self.f1.contains(center):
            raise ValidationError(f"sphere center {center.tolist()} lies outside the bounds")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)

    @property
    def dim(self) -> int:
        return self.f1.dim

    @property
    def bounds(self) -> np.ndarray:
        return self.f1.bounds

    def f2(self, x) -> float:
        return sphere_value(self.center, x)

    def grad_f2(self, x) -> np.ndarray:
        return 2.0 * (np.asarray(x, dtype=float) - self.center)


@dataclass(frozen=True)
class GradientPair:
    """Raw and normalised gradients of both objectives at one point.

    ``mo`` is the sum of the unit gradients; a gradient whose raw norm is below
    the zero tolerance contributes the zero vector and sets its flag.
    """

    g1: np.ndarray
    g2: np.ndarray
    g1_norm: np.ndarray
    g2_norm: np.ndarray
    mo: np.ndarray
    g1_zero: bool
    g2_zero: bool
    evals_charged: int = 0
    one_sided: bool = False

    @property
    def mo_norm(self) -> float:
        return float(np.linalg.norm(self.mo))

    @property
    def angle(self) -> Optional[float]:
        """Angle between the two gradients, ``None`` when either vanishes."""
        if self.g1_zero or self.g2_zero:
            return None
        return angle_deg(self.g1_norm, self.g2_norm)

    def is_efficient(self, eps: float = EPS_MO) -> bool:
        return self.g1_zero or self.g2_zero or self.mo_norm < eps


def normalize(v, zero_tol: float = ZERO_GRAD_TOL) -> tuple[np.ndarray, bool]:
    """Unit vector along ``v``, or ``(zeros, True)`` if ``||v|| < zero_tol``."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < zero_tol:
        return np.zeros_like(v), True
    return v / n, False


def combine_gradients(g1, g2, zero_tol: float = ZERO_GRAD_TOL, evals: int = 0, one_sided: bool = False) -> GradientPair:
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    u1, z1 = normalize(g1, zero_tol)
    u2, z2 = normalize(g2, zero_tol)
    return GradientPair(g1, g2, u1, u2, u1 + u2, z1, z2, evals, one_sided)


def mo_gradient(
    p: BiObjectiveProblem,
    x,
    grad_mode: str = "analytic",
    fd_step: float = DEFAULT_FD_STEP,
    zero_tol: float = ZERO_GRAD_TOL,
    evaluator: Optional[Callable[[np.ndarray], float]] = None,
) -> GradientPair:
    """Multi-objective gradient at ``x``: ``g1/||g1|| + g2/||g2||``.

    Only ``g1`` can cost evaluations (``2 d`` in ``central_fd`` mode);
    ``evaluator`` lets the caller count them.
    """
    res = problems.gradient(p.f1, x, grad_mode, fd_step, evaluator)
    return combine_gradients(res.grad, p.grad_f2(x), zero_tol, res.evals, res.one_sided)


def angle_deg(u, v) -> float:
    """Angle between ``u`` and ``v`` in degrees, in ``[0, 180]``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise UndefinedAngleError("angle undefined for a zero-length vector")
    cos = float(np.dot(u, v) / (nu * nv))
    return float(np.degrees(np.arccos(min(1.0, max(-1.0, cos)))))


def is_locally_efficient(
    p: BiObjectiveProblem,
    x,
    eps: float = EPS_MO,
    grad_mode: str = "analytic",
    fd_step: float = DEFAULT_FD_STEP,
    zero_tol: float = ZERO_GRAD_TOL,
) -> bool:
    return mo_gradient(p, x, grad_mode, fd_step, zero_tol).is_efficient(eps)


def mo_field(p: BiObjectiveProblem, X: np.ndarray, grad_mode: str = "analytic", fd_step: float = DEFAULT_FD_STEP, zero_tol: float = ZERO_GRAD_TOL):
    """Vectorised MO gradient over a batch ``X`` of shape ``(..., d)``.

    Returns ``(mo, g1, g2, zero_mask)`` where ``zero_mask`` marks points where
    either raw gradient is below ``zero_tol``.
    """
    X = np.asarray(X, dtype=float)
    g1 = problems.gradient_many(p.f1, X, grad_mode, fd_step)
    g2 = 2.0 * (X - p.center)
    n1 = np.linalg.norm(g1, axis=-1, keepdims=True)
    n2 = np.linalg.norm(g2, axis=-1, keepdims=True)
    z1 = n1 < zero_tol
    z2 = n2 < zero_tol
    with np.errstate(invalid="ignore", divide="ignore"):
        u1 = np.where(z1, 0.0, g1 / np.where(z1, 1.0, n1))
        u2 = np.where(z2, 0.0, g2 / np.where(z2, 1.0, n2))
    return u1 + u2, g1, g2, (z1 | z2)[..., 0]
