"""Numba implementation of the flow kernels (see ``flow_numpy`` for the contract)."""

import numpy as np
from numba import njit

NAME = "numba"

_DI = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_DJ = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)


@njit(cache=True)
def _successors(mo, forced, dx, dy, di, dj):
    nx, ny = forced.shape
    succ = np.empty(nx * ny, dtype=np.int64)
    for i in range(nx):
        for j in range(ny):
            c = i * ny + j
            succ[c] = c
            if forced[i, j]:
                continue
            vx = -mo[i, j, 0]
            vy = -mo[i, j, 1]
            best = 0.0
            for k in range(8):
                ii = i + di[k]
                jj = j + dj[k]
                if ii < 0 or ii >= nx or jj < 0 or jj >= ny:
                    continue
                ex = di[k] * dx
                ey = dj[k] * dy
                score = (vx * ex + vy * ey) / np.sqrt(ex * ex + ey * ey)
                if score > best:
                    best = score
                    succ[c] = ii * ny + jj
    return succ


def successors(mo, forced, dx, dy):
    return _successors(np.ascontiguousarray(mo, dtype=np.float64), np.ascontiguousarray(forced), float(dx), float(dy), _DI, _DJ)


@njit(cache=True)
def _reversals(mo_flat, succ):
    out = succ.copy()
    for c in range(succ.size):
        s = succ[c]
        if s != c and mo_flat[c, 0] * mo_flat[s, 0] + mo_flat[c, 1] * mo_flat[s, 1] < 0.0:
            out[c] = c
    return out


def reversals(mo, succ):
    return _reversals(np.ascontiguousarray(mo.reshape(-1, 2), dtype=np.float64), succ)


@njit(cache=True)
def resolve_cycles(succ):
    n = succ.size
    out = succ.copy()
    state = np.zeros(n, dtype=np.int8)  # 0 new, 1 on current path, 2 done
    path = np.empty(n, dtype=np.int64)
    for start in range(n):
        if state[start] != 0:
            continue
        m = 0
        c = start
        while state[c] == 0:
            state[c] = 1
            path[m] = c
            m += 1
            c = succ[c]
        if state[c] == 1:
            # c is on the current path: everything from c onwards is a cycle
            k = m - 1
            while True:
                node = path[k]
                out[node] = node
                if node == c:
                    break
                k -= 1
        for k in range(m):
            state[path[k]] = 2
    return out


@njit(cache=True)
def accumulate(succ, weight):
    n = succ.size
    height = np.full(n, -1.0)
    root = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    for start in range(n):
        if root[start] >= 0:
            continue
        m = 0
        c = start
        while root[c] < 0 and succ[c] != c:
            stack[m] = c
            m += 1
            c = succ[c]
        if root[c] < 0:
            height[c] = 0.0
            root[c] = c
        while m > 0:
            m -= 1
            node = stack[m]
            nxt = succ[node]
            height[node] = weight[node] + height[nxt]
            root[node] = root[nxt]
    return height, root


@njit(cache=True)
def _label(mask, di, dj):
    nx, ny = mask.shape
    labels = np.full((nx, ny), -1, dtype=np.int64)
    queue = np.empty(nx * ny, dtype=np.int64)
    current = 0
    for i0 in range(nx):
        for j0 in range(ny):
            if not mask[i0, j0] or labels[i0, j0] >= 0:
                continue
            labels[i0, j0] = current
            head = 0
            tail = 0
            queue[tail] = i0 * ny + j0
            tail += 1
            while head < tail:
                c = queue[head]
                head += 1
                i = c // ny
                j = c % ny
                for k in range(8):
                    ii = i + di[k]
                    jj = j + dj[k]
                    if ii < 0 or ii >= nx or jj < 0 or jj >= ny:
                        continue
                    if mask[ii, jj] and labels[ii, jj] < 0:
                        labels[ii, jj] = current
                        queue[tail] = ii * ny + jj
                        tail += 1
            current += 1
    return labels, current


def label_sinks(mask):
    return _label(np.ascontiguousarray(mask), _DI, _DJ)
