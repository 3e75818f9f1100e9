"""Fixed-target runtime benchmarking: targets, per-trial first hits, ECDFs and campaigns."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

from . import mogsa, neldermead, problems
from .biobj import BiObjectiveProblem, default_center
from .exceptions import DimensionError, PreconditionError, SomogsaError, ValidationError

N_TARGETS = 51
ALGORITHMS = ("mogsa", "neldermead")

_START_POINTS = ((5, 5), (-5, 5), (5, -5), (-5, -5), (2, 4), (4, 2), (-2.5, 4), (1, -2), (0, 0), (-4.5, 0))


def start_points() -> list[tuple[float, float]]:
    return [(float(a), float(b)) for a, b in _START_POINTS]


@dataclass(frozen=True)
class TargetList:
    f_opt: float
    deltas: np.ndarray
    targets: np.ndarray


def make_targets(f_opt: float) -> TargetList:
    if not math.isfinite(f_opt):
        raise ValidationError(f"f_opt must be finite, got {f_opt}")
    k = np.arange(N_TARGETS)
    deltas = 10.0 ** ((10 - k) / 5)
    return TargetList(float(f_opt), deltas, f_opt + deltas)


# ---------------------------------------------------------------------------
# Trials


@dataclass
class RunLog:
    problem_id: str
    instance: int
    algorithm: str
    start: list[float]
    budget: int
    dim: int
    seed: int
    first_hit: list[Optional[int]]
    final_best: Optional[float]
    evals: int
    failed: bool = False
    error: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "RunLog":
        d = json.loads(line)
        return cls(**d)

    def solved(self) -> int:
        return sum(h is not None for h in self.first_hit)


def write_logs(logs: Iterable[RunLog], fh: IO[str]):
    for log in logs:
        fh.write(log.to_json() + "\n")


def read_logs(fh: IO[str]) -> list[RunLog]:
    return [RunLog.from_json(line) for line in fh if line.strip()]


def load_logs(paths: Sequence[Union[str, Path]]) -> list[RunLog]:
    logs = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            logs.extend(read_logs(fh))
    return logs


class Recorder:
    """Evaluator wrapper tracking the count, best-so-far and first target hits."""

    def __init__(self, evaluator, targets: np.ndarray):
        self._evaluator = evaluator
        self.targets = np.asarray(targets, dtype=float)
        self.count = 0
        self.best = math.inf
        self.first_hit: list[Optional[int]] = [None] * self.targets.size
        self._next = 0  # index of the loosest unreached target

    def __call__(self, x):
        value = self._evaluator(x)
        self.count += 1
        v = float(value)
        if v < self.best:
            self.best = v
            n = self.targets.size
            while self._next < n and v <= self.targets[self._next]:
                self.first_hit[self._next] = self.count
                self._next += 1
        return value


def run_trial(
    algorithm: str,
    problem: problems.ScalarProblem,
    start,
    budget: int,
    *,
    instance: int = 0,
    seed: int = 0,
    sphere_center=None,
    mogsa_config: Optional[mogsa.MogsaConfig] = None,
    nm_config: Optional[neldermead.NmConfig] = None,
) -> RunLog:
    """Run one algorithm once from ``start`` and record its runtime profile.

    ``problem`` must already be the instance to solve and carry a known
    optimum.  Any solver failure is caught and flagged in the log.
    """
    if algorithm not in ALGORITHMS:
        raise ValidationError(f"unknown algorithm {algorithm!r}")
    budget = int(budget)
    if budget < 1:
        raise ValidationError("budget must be at least 1")
    if problem.f_opt is None:
        raise ValidationError(f"{problem.id} has no known optimum")
    start = np.asarray(start, dtype=float)
    if start.shape != (problem.dim,):
        raise DimensionError(f"start must have length {problem.dim}")
    if not problem.contains(start):
        raise PreconditionError("start must lie within bounds")

    rec = Recorder(problem.evaluator, make_targets(problem.f_opt).targets)
    counted = problem.with_evaluator(rec)
    failed, error = False, None
    try:
        if algorithm == "mogsa":
            cfg = (mogsa_config or mogsa.MogsaConfig()).replace(rng_seed=seed)
            mogsa.run(BiObjectiveProblem(counted, sphere_center), start, cfg, eval_budget=budget)
        else:
            neldermead.minimize(counted, start, nm_config or neldermead.NmConfig(), budget=budget)
    except (SomogsaError, ArithmeticError, ValueError, FloatingPointError) as exc:
        failed, error = True, f"{type(exc).__name__}: {exc}"
    return RunLog(
        problem_id=problem.id,
        instance=int(instance),
        algorithm=algorithm,
        start=[float(v) for v in start],
        budget=budget,
        dim=problem.dim,
        seed=int(seed),
        first_hit=list(rec.first_hit),
        final_best=rec.best if math.isfinite(rec.best) else None,
        evals=rec.count,
        failed=failed,
        error=error,
    )


# ---------------------------------------------------------------------------
# ECDF


@dataclass
class ECDFTable:
    eval_per_dim: np.ndarray
    hits: np.ndarray  # solved (log, target) pairs per grid point
    pairs: int
    scope: dict = field(default_factory=dict)

    @property
    def proportion(self) -> np.ndarray:
        return self.hits / self.pairs

    def write_tsv(self, fh: IO[str]):
        fh.write("eval_per_dim\tproportion\n")
        for e, p in zip(self.eval_per_dim.tolist(), self.proportion.tolist()):
            fh.write(f"{e!r}\t{p!r}\n")


def default_eval_grid(budget_per_dim: float, n: int = 64) -> np.ndarray:
    return np.logspace(0.0, math.log10(max(budget_per_dim, 1.0)), n)


def ecdf(logs: Sequence[RunLog], eval_grid: Optional[Sequence[float]] = None) -> ECDFTable:
    """Proportion of (log, target) pairs solved within ``e * dim`` evaluations.

    ``eval_grid`` is in evaluations per dimension; by default 64 log-spaced
    points from 1 to the largest ``budget / dim`` among the logs.
    """
    if not logs:
        raise ValidationError("ecdf needs at least one log")
    dims = {log.dim for log in logs}
    if len(dims) != 1:
        raise DimensionError(f"logs mix dimensions {sorted(dims)}")
    dim = dims.pop()
    if eval_grid is None:
        eval_grid = default_eval_grid(max(log.budget for log in logs) / dim)
    grid = np.asarray(eval_grid, dtype=float)
    hit_times = np.sort(np.array([h for log in logs for h in log.first_hit if h is not None], dtype=np.int64))
    hits = np.searchsorted(hit_times, grid * dim, side="right")
    scope = {
        "dim": dim,
        "n_logs": len(logs),
        "problems": sorted({log.problem_id for log in logs}),
        "algorithms": sorted({log.algorithm for log in logs}),
    }
    return ECDFTable(grid, hits, len(logs) * N_TARGETS, scope)


def pool(tables: Sequence[ECDFTable]) -> ECDFTable:
    """Pool pair counts of tables computed on a common grid."""
    if not tables:
        raise ValidationError("nothing to pool")
    grid = tables[0].eval_per_dim
    if any(not np.array_equal(t.eval_per_dim, grid) for t in tables):
        raise ValidationError("tables use different evaluation grids")
    dims = {t.scope.get("dim") for t in tables}
    if len(dims) != 1:
        raise DimensionError(f"tables mix dimensions {sorted(dims)}")
    scope = {
        "dim": dims.pop(),
        "n_logs": sum(t.scope.get("n_logs", 0) for t in tables),
        "problems": sorted({p for t in tables for p in t.scope.get("problems", [])}),
        "algorithms": sorted({a for t in tables for a in t.scope.get("algorithms", [])}),
    }
    return ECDFTable(grid.copy(), sum(t.hits for t in tables), sum(t.pairs for t in tables), scope)


# ---------------------------------------------------------------------------
# Campaigns


@dataclass(frozen=True)
class CampaignConfig:
    problems: tuple[str, ...] = ("rastrigin", "weierstrass", "gallagher")
    instances: tuple[int, ...] = (1, 2, 3)
    algorithms: tuple[str, ...] = ALGORITHMS
    starts: tuple[tuple[float, ...], ...] = tuple(tuple(p) for p in _START_POINTS)
    budget: int = 400_000
    dim: int = 2
    sphere_center: Optional[tuple[float, ...]] = None
    seed: int = 0
    mogsa_overrides: tuple[tuple[str, object], ...] = ()
    output_dir: str = "."

    def __post_init__(self):
        known = {p.id for p in problems.make_suite(self.dim, include_plateau=True)}
        for pid in self.problems:
            if pid not in known:
                raise ValidationError(f"unknown problem {pid!r}")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ValidationError(f"unknown algorithm {algo!r}")
        for s in self.starts:
            if len(s) != self.dim:
                raise ValidationError(f"start {s} does not have dimension {self.dim}")
        if self.budget < 1:
            raise ValidationError("budget must be at least 1")
        center = self.sphere_center if self.sphere_center is not None else tuple(default_center(self.dim))
        if len(center) != self.dim or not all(-5.0 <= c <= 5.0 for c in center):
            raise ValidationError(f"sphere center {center} is not a point of the domain")
        self.mogsa_config()  # validates overrides

    def mogsa_config(self) -> mogsa.MogsaConfig:
        return mogsa.MogsaConfig().replace(**dict(self.mogsa_overrides))

    def trials(self) -> list["TrialSpec"]:
        """All trials in canonical (problem, instance, start, algorithm) order."""
        out = []
        for pid in self.problems:
            for inst in self.instances:
                for k, s in enumerate(self.starts):
                    for algo in self.algorithms:
                        out.append(TrialSpec(pid, inst, k, tuple(s), algo, self.budget, self.dim, trial_seed(self.seed, pid, inst, k), self.sphere_center, self.mogsa_overrides))
        return out


def trial_seed(base: int, problem_id: str, instance: int, start_index: int) -> int:
    """Deterministic per-trial seed; the same for both algorithms of a triple."""
    words = [int(base), int(instance), int(start_index)] + [ord(c) for c in problem_id]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


@dataclass(frozen=True)
class TrialSpec:
    problem_id: str
    instance: int
    start_index: int
    start: tuple[float, ...]
    algorithm: str
    budget: int
    dim: int
    seed: int
    sphere_center: Optional[tuple[float, ...]] = None
    mogsa_overrides: tuple = ()

    def run(self) -> RunLog:
        base = problems.get_problem(self.problem_id, self.dim)
        inst = problems.instantiate(base, self.instance)
        cfg = mogsa.MogsaConfig().replace(**dict(self.mogsa_overrides))
        return run_trial(self.algorithm, inst, self.start, self.budget, instance=self.instance, seed=self.seed, sphere_center=self.sphere_center, mogsa_config=cfg)


def _run_spec(spec: TrialSpec) -> RunLog:
    return spec.run()


def run_campaign(cfg: CampaignConfig, jobs: int = 1) -> list[RunLog]:
    specs = cfg.trials()
    if jobs <= 1:
        return [s.run() for s in specs]
    with ProcessPoolExecutor(max_workers=jobs) as pool_:
        return list(pool_.map(_run_spec, specs, chunksize=max(1, len(specs) // (4 * jobs))))


# config file ---------------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    """``"1,2,5"`` or ranges like ``"1-15"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _override_value(name: str, text: str):
    fields = {f.name: f.type for f in mogsa.MogsaConfig.__dataclass_fields__.values()}
    if name not in fields or name == "refine":
        raise ValidationError(f"unknown MOGSA option {name!r}")
    default = getattr(mogsa.MogsaConfig(), name)
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def parse_campaign(text: str, base_dir: Union[str, Path, None] = None) -> CampaignConfig:
    """Parse ``key = value`` lines (``#`` starts a comment).

    Keys: problems, instances, algorithms, starts (``x,y; x,y`` or
    ``default``), budget (a number, optionally ``<n>*d``), dim,
    sphere_center, seed, output_dir and ``mogsa.<option>`` overrides.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value

    kw: dict = {}
    overrides = []
    dim = int(raw.pop("dim", "2"))
    kw["dim"] = dim
    for key, value in raw.items():
        try:
            if key == "problems":
                kw["problems"] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key == "algorithms":
                kw["algorithms"] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key == "instances":
                kw["instances"] = _ints(value)
            elif key == "starts":
                if value != "default":
                    kw["starts"] = tuple(_floats(s) for s in value.split(";") if s.strip())
            elif key == "budget":
                per_dim = value.replace(" ", "").endswith("*d")
                n = float(value.replace(" ", "").removesuffix("*d"))
                kw["budget"] = int(round(n * dim if per_dim else n))
            elif key == "sphere_center":
                kw["sphere_center"] = _floats(value)
            elif key == "seed":
                kw["seed"] = int(value)
            elif key == "output_dir":
                out = Path(value)
                if base_dir is not None and not out.is_absolute():
                    out = Path(base_dir) / out
                kw["output_dir"] = str(out)
            elif key.startswith("mogsa."):
                name = key[len("mogsa.") :]
                overrides.append((name, _override_value(name, value)))
            else:
                raise ValidationError(f"unknown campaign key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad value for {key!r}: {value!r}") from exc
    if "starts" not in kw and dim != 2:
        raise ValidationError("default start points are two-dimensional; give starts explicitly")
    kw["mogsa_overrides"] = tuple(sorted(overrides))
    return CampaignConfig(**kw)


def load_campaign(path: Union[str, Path]) -> CampaignConfig:
    path = Path(path)
    return parse_campaign(path.read_text(encoding="utf-8"), base_dir=path.parent)
