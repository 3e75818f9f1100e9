"""Single-objective test problems, seeded instance transforms and gradients.

Every evaluator in this module works on the last axis, so ``f(x)`` accepts a
single point of shape ``(d,)`` or a batch of shape ``(..., d)``.  Solvers call
them point-wise through :func:`evaluate`; the landscape code calls them on
whole grids.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .exceptions import CapabilityError, DimensionError, NumericError, ValidationError

DEFAULT_BOUNDS = (-5.0, 5.0)
DEFAULT_SPHERE_CENTER = (-3.5, -2.5)
DEFAULT_FD_STEP = 1e-5

# Highest frequency index of the Weierstrass-type sum; see weierstrass().
WEIERSTRASS_KMAX = 2
GALLAGHER_PEAKS = 21

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ScalarProblem:
    """An evaluable single-objective function on a box.

    Parameters
    ----------
    id : str
        Suite identifier.
    dim : int
        Decision space dimension.
    bounds : ndarray of shape (dim, 2)
        Closed interval per coordinate.
    evaluator : callable
        ``x -> f(x)``, vectorised over leading axes.
    analytic_gradient : callable, optional
        ``x -> grad f(x)``, same vectorisation.
    known_optimum : (ndarray, float), optional
        Location and value of the global optimum.
    """

    id: str
    dim: int
    bounds: np.ndarray
    evaluator: Evaluator
    analytic_gradient: Optional[Evaluator] = None
    known_optimum: Optional[tuple[np.ndarray, float]] = None

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.shape == (2,):
            bounds = np.tile(bounds, (self.dim, 1))
        if bounds.shape != (self.dim, 2):
            raise ValidationError(f"bounds must have shape ({self.dim}, 2), got {bounds.shape}")
        if not np.all(bounds[:, 0] < bounds[:, 1]):
            raise ValidationError("bounds must form a nonempty box")
        bounds.setflags(write=False)
        object.__setattr__(self, "bounds", bounds)
        if self.known_optimum is not None:
            x_opt, f_opt = self.known_optimum
            x_opt = np.array(x_opt, dtype=float)
            x_opt.setflags(write=False)
            object.__setattr__(self, "known_optimum", (x_opt, float(f_opt)))

    @property
    def lower(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.bounds[:, 1]

    @property
    def f_opt(self) -> Optional[float]:
        return None if self.known_optimum is None else self.known_optimum[1]

    @property
    def has_analytic_gradient(self) -> bool:
        return self.analytic_gradient is not None

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def with_evaluator(self, evaluator: Evaluator) -> "ScalarProblem":
        """Copy of this problem with ``evaluator`` swapped (used for counting wrappers)."""
        return dataclasses.replace(self, evaluator=evaluator)

    def describe(self) -> dict:
        return {
            "id": self.id,
            "dim": self.dim,
            "bounds": self.bounds.tolist(),
            "has_analytic_gradient": self.has_analytic_gradient,
            "f_opt": self.f_opt,
        }


class GradientResult(NamedTuple):
    grad: np.ndarray
    evals: int
    one_sided: bool


def _as_point(problem: ScalarProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise DimensionError(f"{problem.id}: expected a point of length {problem.dim}, got shape {x.shape}")
    return x


def evaluate(problem: ScalarProblem, x) -> float:
    """Return ``f(x)`` for a single point."""
    x = _as_point(problem, x)
    value = float(problem.evaluator(x))
    if not np.isfinite(value):
        raise NumericError(f"{problem.id} returned {value} at {x.tolist()}", x=x)
    return value


def gradient(
    problem: ScalarProblem,
    x,
    mode: str = "analytic",
    h: float = DEFAULT_FD_STEP,
    evaluator: Optional[Callable[[np.ndarray], float]] = None,
) -> GradientResult:
    """Gradient of ``problem`` at ``x``.

    ``mode`` is ``"analytic"``, ``"central_fd"`` or ``"central_fd4"``.  Central
    differences cost ``2 * dim`` evaluations; the fourth-order five-point
    stencil costs ``4 * dim`` and drops to second order on axes where
    ``x +- 2h`` leaves the box.  Axes whose stencil would leave the box fall back
    to a one-sided difference (one extra evaluation at ``x`` in total) and the
    result is flagged.  ``evaluator`` overrides the point evaluator so callers
    can count calls.
    """
    x = _as_point(problem, x)
    if mode == "analytic":
        if problem.analytic_gradient is None:
            raise CapabilityError(f"{problem.id} has no analytic gradient")
        g = np.asarray(problem.analytic_gradient(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"{problem.id} gradient is not finite at {x.tolist()}", x=x)
        return GradientResult(g, 0, False)
    if mode not in ("central_fd", "central_fd4"):
        raise ValueError(f"unknown gradient mode {mode!r}")
    if h <= 0:
        raise ValueError("finite-difference step must be positive")

    f = evaluator if evaluator is not None else (lambda z: evaluate(problem, z))
    g = np.empty(problem.dim)
    evals = 0
    f_center = None
    one_sided = False
    for i in range(problem.dim):
        up = x.copy()
        down = x.copy()
        up[i] += h
        down[i] -= h
        up_ok = up[i] <= problem.upper[i]
        down_ok = down[i] >= problem.lower[i]
        if mode == "central_fd4" and x[i] + 2 * h <= problem.upper[i] and x[i] - 2 * h >= problem.lower[i]:
            up2 = x.copy()
            down2 = x.copy()
            up2[i] += 2 * h
            down2[i] -= 2 * h
            g[i] = (8.0 * (f(up) - f(down)) - (f(up2) - f(down2))) / (12.0 * h)
            evals += 4
            continue
        if up_ok and down_ok:
            g[i] = (f(up) - f(down)) / (2.0 * h)
            evals += 2
            continue
        one_sided = True
        if f_center is None:
            f_center = f(x)
            evals += 1
        if up_ok:
            g[i] = (f(up) - f_center) / h
        else:
            g[i] = (f_center - f(down)) / h
        evals += 1
    return GradientResult(g, evals, one_sided)


def gradient_many(problem: ScalarProblem, X: np.ndarray, mode: str = "analytic", h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Vectorised :func:`gradient` over a batch ``X`` of shape ``(..., dim)``."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != problem.dim:
        raise DimensionError(f"{problem.id}: last axis must have length {problem.dim}")
    if mode == "analytic":
        if problem.analytic_gradient is None:
            raise CapabilityError(f"{problem.id} has no analytic gradient")
        return np.asarray(problem.analytic_gradient(X), dtype=float)
    if mode != "central_fd":
        raise ValueError(f"unknown gradient mode {mode!r}")
    f = problem.evaluator
    G = np.empty(X.shape)
    f_center = None
    for i in range(problem.dim):
        up = X.copy()
        down = X.copy()
        up[..., i] += h
        down[..., i] -= h
        up_ok = up[..., i] <= problem.upper[i]
        down_ok = down[..., i] >= problem.lower[i]
        central = (f(up) - f(down)) / (2.0 * h)
        if np.all(up_ok & down_ok):
            G[..., i] = central
            continue
        if f_center is None:
            f_center = f(X)
        G[..., i] = np.where(
            up_ok & down_ok,
            central,
            np.where(up_ok, (f(up) - f_center) / h, (f_center - f(down)) / h),
        )
    return G


# ---------------------------------------------------------------------------
# Base functions


def sphere(center: Sequence[float] = DEFAULT_SPHERE_CENTER, bounds=DEFAULT_BOUNDS, id: str = "sphere") -> ScalarProblem:
    """``sum((x - c)**2)``; optimum 0 at ``c``."""
    c = np.array(center, dtype=float)
    c.setflags(write=False)

    def f(x):
        return np.sum((x - c) ** 2, axis=-1)

    def grad(x):
        return 2.0 * (x - c)

    return ScalarProblem(id, c.size, bounds, f, grad, (c, 0.0))


def _bimodal_x1_minimum() -> float:
    # global root of 4 x^3 - 10 x + 1 = 0 (the left one)
    roots = np.roots([4.0, 0.0, -10.0, 1.0]).real
    x = roots.min()
    for _ in range(5):
        x -= (4 * x**3 - 10 * x + 1) / (12 * x**2 - 10)
    return float(x)


def bimodal_example(dim: int = 2, bounds=DEFAULT_BOUNDS) -> ScalarProblem:
    """``x1**4 - 5 x1**2 + x1 + sum_{i>1} x_i**2 + 3``.

    Global minimum near (-1.629, 0) with value -4.855, a local one near
    (1.529, 0) with value -1.695.
    """
    if dim < 1:
        raise ValidationError("dim must be positive")

    def f(x):
        x1 = x[..., 0]
        return x1**4 - 5.0 * x1**2 + x1 + np.sum(x[..., 1:] ** 2, axis=-1) + 3.0

    def grad(x):
        g = 2.0 * np.asarray(x, dtype=float)
        x1 = x[..., 0]
        g[..., 0] = 4.0 * x1**3 - 10.0 * x1 + 1.0
        return g

    x_opt = np.zeros(dim)
    x_opt[0] = _bimodal_x1_minimum()
    return ScalarProblem("bimodal_example", dim, bounds, f, grad, (x_opt, float(f(x_opt))))


def bimodal_local_optimum() -> tuple[np.ndarray, float]:
    """Location and value of the right-hand (local) optimum of the 2-d bimodal example."""
    x = float(np.roots([4.0, 0.0, -10.0, 1.0]).real.max())
    for _ in range(5):
        x -= (4 * x**3 - 10 * x + 1) / (12 * x**2 - 10)
    return np.array([x, 0.0]), x**4 - 5 * x**2 + x + 3


def ellipsoid(dim: int = 2, condition: float = 1e6, bounds=DEFAULT_BOUNDS) -> ScalarProblem:
    """Separable ellipsoid ``sum(condition**((i-1)/(d-1)) x_i**2)``."""
    if dim == 1:
        w = np.ones(1)
    else:
        w = condition ** (np.arange(dim) / (dim - 1))

    def f(x):
        return np.sum(w * x**2, axis=-1)

    def grad(x):
        return 2.0 * w * x

    return ScalarProblem("ellipsoid", dim, bounds, f, grad, (np.zeros(dim), 0.0))


def rastrigin(dim: int = 2, bounds=DEFAULT_BOUNDS) -> ScalarProblem:
    """Canonical Rastrigin ``10 d + sum(x**2 - 10 cos(2 pi x))``; optimum 0 at the origin."""
    two_pi = 2.0 * np.pi

    def f(x):
        return 10.0 * dim + np.sum(x**2 - 10.0 * np.cos(two_pi * x), axis=-1)

    def grad(x):
        return 2.0 * x + 10.0 * two_pi * np.sin(two_pi * x)

    return ScalarProblem("rastrigin", dim, bounds, f, grad, (np.zeros(dim), 0.0))


def weierstrass(dim: int = 2, a: float = 0.5, b: float = 3.0, kmax: int = WEIERSTRASS_KMAX, bounds=DEFAULT_BOUNDS) -> ScalarProblem:
    """Finite Weierstrass sum ``sum_i sum_k a**k cos(2 pi b**k (x_i + 1/2)) - d sum_k a**k cos(pi b**k)``.

    With odd ``b`` every integer point is a global minimum with value 0.
    ``kmax`` bounds the frequency content; higher values are more rugged
    but make central differences at ``h=1e-5`` inaccurate.
    """
    ak = a ** np.arange(kmax + 1)
    wk = 2.0 * np.pi * b ** np.arange(kmax + 1)
    offset = dim * float(np.sum(ak * np.cos(np.pi * b ** np.arange(kmax + 1))))

    def f(x):
        phase = (x[..., None] + 0.5) * wk
        return np.sum(ak * np.cos(phase), axis=(-1, -2)) - offset

    def grad(x):
        phase = (x[..., None] + 0.5) * wk
        return -np.sum(ak * wk * np.sin(phase), axis=-1)

    return ScalarProblem("weierstrass", dim, bounds, f, grad, (np.zeros(dim), 0.0))


def gallagher(dim: int = 2, n_peaks: int = GALLAGHER_PEAKS, seed: int = 21, bounds=DEFAULT_BOUNDS) -> ScalarProblem:
    """Negated maximum of seeded anisotropic Gaussian peaks.

    The first peak has height 10 and is the global optimum (value -10 at its
    center); the others have heights spread over [1.1, 9.1].
    """
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-4.0, 4.0, size=(n_peaks, dim))
    centers[0] = rng.uniform(-3.0, 3.0, size=dim)
    heights = np.concatenate([[10.0], np.linspace(1.1, 9.1, n_peaks - 1)])
    radius = rng.uniform(0.8, 1.6, size=n_peaks)
    log_cond = rng.uniform(0.0, 1.0, size=n_peaks)
    # axis-wise spread: sqrt(condition) ratio between widest and narrowest axis
    if dim == 1:
        spread = np.zeros((n_peaks, 1))
    else:
        spread = np.linspace(-0.25, 0.25, dim)[None, :] * 2.0 * log_cond[:, None]
        for row in spread:
            rng.shuffle(row)
    radii = radius[:, None] * 10.0**spread
    prec = 1.0 / radii**2

    def _peaks(x):
        diff = x[..., None, :] - centers
        return heights * np.exp(-0.5 * np.sum(prec * diff**2, axis=-1)), diff

    def f(x):
        vals, _ = _peaks(x)
        return -np.max(vals, axis=-1)

    def grad(x):
        vals, diff = _peaks(x)
        k = np.argmax(vals, axis=-1)
        v = np.take_along_axis(vals, k[..., None], axis=-1)
        d = np.take_along_axis(diff, k[..., None, None], axis=-2)[..., 0, :]
        return v * prec[k] * d

    return ScalarProblem("gallagher", dim, bounds, f, grad, (centers[0].copy(), -10.0))


def bueche_rastrigin(dim: int = 2, bounds=DEFAULT_BOUNDS) -> ScalarProblem:
    """Rastrigin on a skewed, scaled input (odd coordinates stretched 10x when positive)."""
    if dim == 1:
        scale = np.ones(1)
    else:
        scale = 10.0 ** (0.5 * np.arange(dim) / (dim - 1))
    odd = (np.arange(dim) % 2) == 0
    two_pi = 2.0 * np.pi

    def _z(x):
        s = np.where(odd & (x > 0), 10.0 * scale, scale)
        return s * x, s

    def f(x):
        z, _ = _z(x)
        return 10.0 * (dim - np.sum(np.cos(two_pi * z), axis=-1)) + np.sum(z**2, axis=-1)

    def grad(x):
        z, s = _z(x)
        return s * (10.0 * two_pi * np.sin(two_pi * z) + 2.0 * z)

    return ScalarProblem("bueche_rastrigin", dim, bounds, f, grad, (np.zeros(dim), 0.0))


def step_ellipsoid(dim: int = 2, condition: float = 100.0, bounds=DEFAULT_BOUNDS) -> ScalarProblem:
    """Ellipsoid on rounded coordinates; piecewise constant, so no analytic gradient."""
    w = np.ones(1) if dim == 1 else condition ** (np.arange(dim) / (dim - 1))

    def f(x):
        return np.sum(w * np.round(x) ** 2, axis=-1)

    return ScalarProblem("step_ellipsoid", dim, bounds, f, None, (np.zeros(dim), 0.0))


def make_suite(dim: int = 2, include_plateau: bool = False) -> list[ScalarProblem]:
    """Default problem suite.

    ``include_plateau`` adds Bueche-Rastrigin and the step ellipsoid, whose flat
    regions defeat gradient guidance.
    """
    center = np.zeros(dim)
    center[: min(dim, 2)] = DEFAULT_SPHERE_CENTER[: min(dim, 2)]
    suite = [
        sphere(center),
        bimodal_example(dim),
        ellipsoid(dim),
        rastrigin(dim),
        weierstrass(dim),
        gallagher(dim),
    ]
    if include_plateau:
        suite += [bueche_rastrigin(dim), step_ellipsoid(dim)]
    return suite


def get_problem(problem_id: str, dim: int = 2, include_plateau: bool = True) -> ScalarProblem:
    for problem in make_suite(dim, include_plateau=include_plateau):
        if problem.id == problem_id:
            return problem
    raise KeyError(problem_id)


# ---------------------------------------------------------------------------
# Instances


@dataclass(frozen=True, eq=False)
class InstanceSpec:
    """Affine input transform plus output offset: ``f(R (x - shift)) + value_offset``."""

    seed: int
    shift: np.ndarray
    rotation: np.ndarray
    value_offset: float = 0.0

    def __post_init__(self):
        shift = np.array(self.shift, dtype=float)
        rotation = np.array(self.rotation, dtype=float)
        shift.setflags(write=False)
        rotation.setflags(write=False)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "rotation", rotation)

    @classmethod
    def identity(cls, dim: int) -> "InstanceSpec":
        return cls(0, np.zeros(dim), np.eye(dim), 0.0)

    def validate(self, tol: float = 1e-10):
        R = self.rotation
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValidationError(f"rotation must be square, got shape {R.shape}")
        if self.shift.shape != (R.shape[0],):
            raise ValidationError("shift and rotation dimensions differ")
        if np.max(np.abs(R.T @ R - np.eye(R.shape[0]))) > tol:
            raise ValidationError("rotation is not orthonormal")


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthonormal matrix (QR of a Gaussian matrix, sign-fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def make_instance(problem: ScalarProblem, seed: int) -> InstanceSpec:
    """Seeded instance that moves the optimum uniformly into ``[-4, 4]^d``.

    Seed 0 is the identity instance.
    """
    if seed == 0:
        return InstanceSpec.identity(problem.dim)
    rng = np.random.default_rng([seed, problem.dim])
    R = random_rotation(problem.dim, rng)
    target = rng.uniform(-4.0, 4.0, size=problem.dim)
    if problem.known_optimum is not None:
        shift = target - R.T @ problem.known_optimum[0]
    else:
        shift = target
    offset = round(float(rng.uniform(-100.0, 100.0)), 2)
    return InstanceSpec(seed, shift, R, offset)


def apply_instance(problem: ScalarProblem, spec: InstanceSpec) -> ScalarProblem:
    """New problem computing ``f(R (x - shift)) + value_offset``."""
    if spec.rotation.shape != (problem.dim, problem.dim):
        raise ValidationError(f"rotation shape {spec.rotation.shape} does not match dim {problem.dim}")
    spec.validate()
    R, shift, offset = spec.rotation, spec.shift, spec.value_offset
    base_f, base_g = problem.evaluator, problem.analytic_gradient

    def f(x):
        return base_f((np.asarray(x, dtype=float) - shift) @ R.T) + offset

    grad = None
    if base_g is not None:

        def grad(x):
            return base_g((np.asarray(x, dtype=float) - shift) @ R.T) @ R

    optimum = None
    if problem.known_optimum is not None:
        x_opt, f_opt = problem.known_optimum
        optimum = (R.T @ x_opt + shift, f_opt + offset)
    return ScalarProblem(f"{problem.id}_i{spec.seed}" if spec.seed else problem.id, problem.dim, problem.bounds, f, grad, optimum)


def instantiate(problem: ScalarProblem, seed: int) -> ScalarProblem:
    """Shorthand for ``apply_instance(problem, make_instance(problem, seed))``."""
    if seed == 0:
        return problem
    return apply_instance(problem, make_instance(problem, seed))
