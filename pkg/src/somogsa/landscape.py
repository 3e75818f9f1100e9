"""Gradient-field heatmaps of bi-objective problems in two dimensions.

The box is sampled at cell centers; each cell flows to the 8-neighbour that
best follows the negative MO gradient.  Sinks (efficient cells) are cells with
a vanishing MO gradient or gradient, cells whose flow reverses across one
step, cells with no downhill neighbour inside the box, and members of
successor cycles.  Adjacent sinks form one efficient set, and every cell
belongs to the basin of the set its flow reaches.  Heights accumulate
``||mo|| * step length`` along the flow, so they vanish on the sets.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import _kernels
from .biobj import EPS_MO, ZERO_GRAD_TOL, BiObjectiveProblem, mo_field
from .exceptions import CapabilityError, ValidationError
from .mogsa import TraceEvent


@dataclass(frozen=True)
class GridSpec:
    bounds: np.ndarray
    resolution: tuple[int, int] = (301, 301)

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.shape != (2, 2) or not np.all(bounds[:, 0] < bounds[:, 1]):
            raise ValidationError("bounds must be a nonempty 2-d box of shape (2, 2)")
        res = self.resolution
        res = (int(res), int(res)) if np.isscalar(res) else tuple(int(r) for r in res)
        if len(res) != 2 or min(res) < 3:
            raise ValidationError("resolution must be at least 3 cells per axis")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", res)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        (x0, x1), (y0, y1) = self.bounds
        return np.linspace(x0, x1, self.resolution[0]), np.linspace(y0, y1, self.resolution[1])


@dataclass
class GradientFieldGrid:
    xs: np.ndarray
    ys: np.ndarray
    mo: np.ndarray  # (nx, ny, 2)
    mo_norm: np.ndarray
    successor: np.ndarray  # (nx, ny) flat indices
    height: np.ndarray
    basin_id: np.ndarray
    efficient: np.ndarray
    ridge: np.ndarray
    n_basins: int
    backend: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.efficient.shape

    def cell_of(self, x) -> tuple[int, int]:
        """Index of the cell whose center is nearest to ``x``."""
        i = int(np.clip(np.rint((x[0] - self.xs[0]) / (self.xs[1] - self.xs[0])), 0, self.xs.size - 1))
        j = int(np.clip(np.rint((x[1] - self.ys[0]) / (self.ys[1] - self.ys[0])), 0, self.ys.size - 1))
        return i, j

    def basin_at(self, x) -> int:
        return int(self.basin_id[self.cell_of(x)])


@dataclass(frozen=True)
class SetReport:
    set_id: int
    cell_count: int
    ridge_free: bool
    endpoints: tuple[tuple[float, float], tuple[float, float]]

    def to_dict(self) -> dict:
        return {"set_id": self.set_id, "cell_count": self.cell_count, "ridge_free": self.ridge_free, "endpoints": [list(e) for e in self.endpoints]}


def compute_field(
    p: BiObjectiveProblem,
    grid: Optional[GridSpec] = None,
    grad_mode: Optional[str] = None,
    eps_mo: float = EPS_MO,
    zero_tol: float = ZERO_GRAD_TOL,
    backend: Optional[str] = None,
) -> GradientFieldGrid:
    if p.dim != 2:
        raise CapabilityError(f"landscape export needs d = 2, got d = {p.dim}")
    grid = grid or GridSpec(p.bounds)
    if grad_mode is None:
        grad_mode = "analytic" if p.f1.has_analytic_gradient else "central_fd"
    kern = _kernels.get_backend(backend)

    xs, ys = grid.axes()
    X = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    mo, _, _, zero = mo_field(p, X, grad_mode, zero_tol=zero_tol)
    mo = np.ascontiguousarray(mo)
    mo_norm = np.linalg.norm(mo, axis=-1)
    forced = zero | (mo_norm < eps_mo)

    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    succ = kern.successors(mo, forced, dx, dy)
    succ = kern.reversals(mo, succ)
    succ = kern.resolve_cycles(succ)

    nx, ny = grid.resolution
    own = np.arange(nx * ny)
    di = succ // ny - own // ny
    dj = succ % ny - own % ny
    weight = mo_norm.reshape(-1) * np.hypot(di * dx, dj * dy)
    height, root = kern.accumulate(succ, weight)

    sink = (succ == own).reshape(nx, ny)
    labels, n_sets = kern.label_sinks(sink)
    basin = labels.reshape(-1)[root].reshape(nx, ny)
    ridge = _ridge_cells(basin, sink)
    return GradientFieldGrid(
        xs, ys, mo, mo_norm, succ.reshape(nx, ny), height.reshape(nx, ny), basin, sink, ridge, int(n_sets), kern.NAME
    )


def _ridge_cells(basin: np.ndarray, sink: np.ndarray) -> np.ndarray:
    """Non-sink cells with a 4-neighbour in another basin."""
    ridge = np.zeros_like(sink)
    ridge[1:, :] |= basin[1:, :] != basin[:-1, :]
    ridge[:-1, :] |= basin[:-1, :] != basin[1:, :]
    ridge[:, 1:] |= basin[:, 1:] != basin[:, :-1]
    ridge[:, :-1] |= basin[:, :-1] != basin[:, 1:]
    return ridge & ~sink


def _shifted(a: np.ndarray, di: int, dj: int, fill) -> np.ndarray:
    """``out[i, j] = a[i + di, j + dj]`` with ``fill`` outside."""
    out = np.full_like(a, fill)
    nx, ny = a.shape
    src = a[max(di, 0) : nx + min(di, 0), max(dj, 0) : ny + min(dj, 0)]
    out[max(-di, 0) : nx + min(-di, 0), max(-dj, 0) : ny + min(-dj, 0)] = src
    return out


def ridge_report(grid: GradientFieldGrid) -> list[SetReport]:
    """Per efficient set: size, whether a ridge touches it, and its two extreme cells."""
    labels = np.where(grid.efficient, grid.basin_id, -1)
    cut = set()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            neigh = _shifted(labels, di, dj, -1)
            hit = grid.ridge & (neigh >= 0)
            cut.update(np.unique(neigh[hit]).tolist())
    reports = []
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    for set_id in range(grid.n_basins):
        mask = labels == set_id
        pts = np.column_stack([X[mask], Y[mask]])
        a = pts[np.argmax(np.linalg.norm(pts - pts.mean(axis=0), axis=1))]
        b = pts[np.argmax(np.linalg.norm(pts - a, axis=1))]
        reports.append(SetReport(set_id, int(mask.sum()), set_id not in cut, (tuple(a.tolist()), tuple(b.tolist()))))
    return reports


def set_containing(grid: GradientFieldGrid, reports: Sequence[SetReport], x) -> Optional[SetReport]:
    """Report of the efficient set nearest to ``x`` within the basin of ``x``."""
    bid = grid.basin_at(x)
    for r in reports:
        if r.set_id == bid:
            return r
    return None


# ---------------------------------------------------------------------------
# Export


def grid_filename(problem_id: str, resolution: int, fmt: str = "csv") -> str:
    return f"{problem_id}_{resolution}.{fmt}"


def _rows(grid: GradientFieldGrid):
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    log_h = np.log10(1.0 + grid.height)
    return (
        X.reshape(-1),
        Y.reshape(-1),
        grid.height.reshape(-1),
        log_h.reshape(-1),
        grid.basin_id.reshape(-1),
        grid.efficient.reshape(-1).astype(int),
        grid.ridge.reshape(-1).astype(int),
    )


GRID_COLUMNS = ("x", "y", "height", "log_height", "basin_id", "efficient", "ridge")
TRACE_COLUMNS = ("step", "phase", "x", "y", "f1", "f2", "mo_norm", "note", "basin_id")


def export_grid(
    grid: GradientFieldGrid,
    path: Union[str, Path],
    fmt: str = "csv",
    trace: Optional[Iterable[TraceEvent]] = None,
) -> list[Path]:
    """Write the grid (and optionally a trace overlay next to it); returns written paths.

    The overlay goes to ``<stem>_trace.<fmt>`` and carries the basin id of each
    trace point.
    """
    path = Path(path)
    written = [path]
    try:
        if fmt == "csv":
            cols = _rows(grid)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(GRID_COLUMNS)
                for x, y, h, lh, b, e, r in zip(*[c.tolist() for c in cols]):
                    w.writerow((repr(x), repr(y), repr(h), repr(lh), b, e, r))
        elif fmt == "json":
            cols = _rows(grid)
            doc = {name: col.tolist() for name, col in zip(GRID_COLUMNS, cols)}
            doc["shape"] = list(grid.shape)
            doc["n_basins"] = grid.n_basins
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh)
                fh.write("\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
        if trace is not None:
            tpath = path.with_name(f"{path.stem}_trace{path.suffix}")
            rows = [
                (ev.step_index, ev.phase.value, ev.x[0], ev.x[1], ev.f1, ev.f2, ev.mo_norm, ev.note.value, grid.basin_at(ev.x))
                for ev in trace
            ]
            with open(tpath, "w", newline="", encoding="utf-8") as fh:
                if fmt == "csv":
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(TRACE_COLUMNS)
                    w.writerows(rows)
                else:
                    json.dump([dict(zip(TRACE_COLUMNS, r)) for r in rows], fh)
                    fh.write("\n")
            written.append(tpath)
    except OSError as exc:
        raise OSError(f"cannot write landscape export to {path}: {exc}") from exc
    return written


def read_grid_csv(path: Union[str, Path]) -> dict[str, np.ndarray]:
    """Parse an exported CSV back into column arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = list(reader)
    cols = {}
    for k, name in enumerate(header):
        raw = [row[k] for row in data]
        if name in ("basin_id", "efficient", "ridge"):
            cols[name] = np.array(raw, dtype=np.int64)
        else:
            cols[name] = np.array(raw, dtype=float)
    return cols
