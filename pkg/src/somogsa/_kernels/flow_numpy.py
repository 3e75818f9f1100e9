"""Pure-numpy flow kernels.

Grid arrays are indexed ``[i, j]`` with ``i`` along x; flat cell index is
``i * ny + j``.  Successor arrays are flat; a sink points to itself.
"""

import numpy as np
from scipy import ndimage

NAME = "numpy"

_DI = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_DJ = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)


def successors(mo, forced, dx, dy):
    """Neighbour (of 8) whose direction best matches ``-mo``.

    Cells in ``forced`` and cells with no neighbour at a positive alignment
    become sinks.
    """
    nx, ny = forced.shape
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    scores = np.full((8, nx, ny), -np.inf)
    for k in range(8):
        ex = _DI[k] * dx
        ey = _DJ[k] * dy
        score = (-mo[..., 0] * ex + -mo[..., 1] * ey) / np.sqrt(ex * ex + ey * ey)
        valid = (ii + _DI[k] >= 0) & (ii + _DI[k] < nx) & (jj + _DJ[k] >= 0) & (jj + _DJ[k] < ny)
        scores[k] = np.where(valid, score, -np.inf)
    k_best = np.argmax(scores, axis=0)
    best = np.take_along_axis(scores, k_best[None], axis=0)[0]
    target = (ii + _DI[k_best]) * ny + (jj + _DJ[k_best])
    own = ii * ny + jj
    succ = np.where(forced | ~(best > 0.0), own, target)
    return succ.reshape(-1).astype(np.int64)


def reversals(mo, succ):
    """Make a cell a sink when its successor's MO gradient points against its own."""
    flat = mo.reshape(-1, 2)
    own = np.arange(succ.size)
    dots = np.einsum("ij,ij->i", flat, flat[succ])
    return np.where((succ != own) & (dots < 0.0), own, succ)


def _jump_all(succ):
    J = succ.copy()
    for _ in range(max(1, int(np.ceil(np.log2(max(succ.size, 2)))) + 1)):
        J = J[J]
    return J


def resolve_cycles(succ):
    """Turn every member of a successor cycle into a sink.

    After ``2**K >= n`` pointer doublings every node sits on its terminal
    cycle, and the image of that map is exactly the set of cycle nodes.
    """
    on_cycle = np.zeros(succ.size, dtype=bool)
    on_cycle[_jump_all(succ)] = True
    return np.where(on_cycle, np.arange(succ.size), succ)


def accumulate(succ, weight):
    """Path sums of ``weight`` to the sink (list ranking by pointer doubling)."""
    dist = np.where(succ == np.arange(succ.size), 0.0, weight.astype(float))
    ptr = succ.copy()
    for _ in range(max(1, int(np.ceil(np.log2(max(succ.size, 2)))) + 1)):
        dist = dist + dist[ptr]
        ptr = ptr[ptr]
    return dist, ptr


def label_sinks(mask):
    """8-connected components, numbered by first cell in raster order."""
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    labels = labels.astype(np.int64) - 1
    if n:
        flat = labels.reshape(-1)
        _, first = np.unique(flat, return_index=True)
        # np.unique sorts labels (-1 first); reorder by first occurrence
        present = flat[first]
        keep = present >= 0
        order = np.argsort(first[keep], kind="stable")
        remap = np.full(n, -1, dtype=np.int64)
        remap[present[keep][order]] = np.arange(n)
        labels = np.where(labels >= 0, remap[np.maximum(labels, 0)], -1)
    return labels, n
