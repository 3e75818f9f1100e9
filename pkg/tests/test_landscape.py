import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from somogsa import _kernels, landscape as L, problems as P
from somogsa.biobj import BiObjectiveProblem
from somogsa.exceptions import CapabilityError, ValidationError

BACKENDS = ["numpy"] + (["numba"] if _kernels.numba_available() else [])


@pytest.fixture(scope="module")
def bimodal_grid():
    p = BiObjectiveProblem(P.bimodal_example())
    return p, L.compute_field(p, L.GridSpec(p.bounds, 301))


def test_gridspec_validation():
    with pytest.raises(ValidationError):
        L.GridSpec([(-5, 5), (-5, 5)], 2)
    with pytest.raises(ValidationError):
        L.GridSpec([(-5, 5)], 10)
    assert L.GridSpec([(-5, 5), (-5, 5)]).resolution == (301, 301)


def test_capability_error_for_3d():
    with pytest.raises(CapabilityError):
        L.compute_field(BiObjectiveProblem(P.rastrigin(3)))


def flat(a):
    return a.reshape(-1)


def check_invariants(g):
    n = g.successor.size
    succ = flat(g.successor)
    own = np.arange(n)
    sink = succ == own
    assert np.array_equal(sink, flat(g.efficient))
    h = flat(g.height)
    assert np.all(h[sink] == 0.0)
    assert np.all(h[~sink] > h[succ[~sink]])
    # chains are finite: n applications of succ land on a sink for every cell
    j = succ.copy()
    for _ in range(int(np.ceil(np.log2(n))) + 1):
        j = j[j]
    assert np.all(sink[j])
    b = flat(g.basin_id)
    assert np.all(b >= 0) and np.all(b < g.n_basins)
    assert np.array_equal(b, b[j])


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("name", ["bimodal_example", "rastrigin", "gallagher"])
def test_field_invariants(name, backend):
    p = BiObjectiveProblem(P.get_problem(name))
    check_invariants(L.compute_field(p, L.GridSpec(p.bounds, 101), backend=backend))


@pytest.mark.skipif(len(BACKENDS) < 2, reason="numba not installed")
@pytest.mark.parametrize("name", ["bimodal_example", "weierstrass", "gallagher", "ellipsoid"])
def test_backends_agree(name):
    p = BiObjectiveProblem(P.get_problem(name))
    a = L.compute_field(p, L.GridSpec(p.bounds, 151), backend="numba")
    b = L.compute_field(p, L.GridSpec(p.bounds, 151), backend="numpy")
    for k in ("successor", "basin_id", "efficient", "ridge"):
        assert np.array_equal(getattr(a, k), getattr(b, k)), k
    assert a.n_basins == b.n_basins
    assert np.allclose(a.height, b.height, rtol=1e-12, atol=0)


def random_succ_oracle(n, rng):
    succ = rng.integers(0, n, size=n)
    return succ


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_cycle_and_accumulate_kernels_agree_with_walk(n, seed):
    rng = np.random.default_rng(seed)
    succ = rng.integers(0, n, size=n).astype(np.int64)
    w = rng.uniform(0.1, 1.0, size=n)
    # oracle: walk each chain, find the first repeated node
    expected = succ.copy()
    for c in range(n):
        seen = []
        x = c
        while x not in seen:
            seen.append(x)
            x = succ[x]
        for y in seen[seen.index(x) :]:
            expected[y] = y
    for name in BACKENDS:
        k = _kernels.get_backend(name)
        out = k.resolve_cycles(succ)
        assert np.array_equal(out, expected)
        h, root = k.accumulate(out, w)
        for c in range(n):
            total, x = 0.0, c
            while out[x] != x:
                total += w[x]
                x = out[x]
            assert root[c] == x
            assert h[c] == pytest.approx(total, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_label_kernels_8_connected(nx, ny, seed):
    from scipy import ndimage

    mask = np.random.default_rng(seed).random((nx, ny)) < 0.4
    ref, n = ndimage.label(mask, structure=np.ones((3, 3)))
    for name in BACKENDS:
        labels, m = _kernels.get_backend(name).label_sinks(mask)
        assert m == n
        assert np.array_equal(labels >= 0, mask)
        # same partition as the reference, numbered in raster order of first cell
        pairs = set(zip(flat(labels)[flat(mask)].tolist(), flat(ref)[flat(mask)].tolist()))
        assert len(pairs) == n
        firsts = [int(np.argmax(flat(labels) == i)) for i in range(m)]
        assert firsts == sorted(firsts)


def test_env_flag_forces_numpy(monkeypatch):
    monkeypatch.setenv(_kernels.ENV_FLAG, "1")
    assert _kernels.get_backend().NAME == "numpy"
    monkeypatch.delenv(_kernels.ENV_FLAG)
    expected = "numba" if _kernels.numba_available() else "numpy"
    assert _kernels.get_backend().NAME == expected
    with pytest.raises(ValueError):
        _kernels.get_backend("cuda")


# topology ------------------------------------------------------------------


@pytest.mark.parametrize("res", [151, 301, 601])
def test_bimodal_two_basins(res):
    p = BiObjectiveProblem(P.bimodal_example())
    g = L.compute_field(p, L.GridSpec(p.bounds, res))
    assert g.n_basins == 2
    reports = L.ridge_report(g)
    left = L.set_containing(g, reports, (-1.63, 0.0))
    right = L.set_containing(g, reports, (1.53, 0.0))
    assert left.set_id != right.set_id
    assert left.ridge_free and not right.ridge_free


def test_bimodal_s_cell_efficient(bimodal_grid):
    p, g = bimodal_grid
    assert g.efficient[g.cell_of(p.center)]


def test_two_spheres_single_basin():
    p = BiObjectiveProblem(P.sphere((2.0, 1.0)))
    g = L.compute_field(p, L.GridSpec(p.bounds, 151))
    assert g.n_basins == 1
    (rep,) = L.ridge_report(g)
    assert rep.ridge_free
    # sink cells lie along the segment joining the two centers
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    pts = np.column_stack([X[g.efficient], Y[g.efficient]])
    a, b = np.array([-3.5, -2.5]), np.array([2.0, 1.0])
    d = b - a
    t = np.clip((pts - a) @ d / (d @ d), 0, 1)
    dist = np.linalg.norm(pts - (a + t[:, None] * d), axis=1)
    assert np.max(dist) <= np.hypot(g.xs[1] - g.xs[0], g.ys[1] - g.ys[0])


def test_identical_spheres_single_sink_region():
    p = BiObjectiveProblem(P.sphere((-3.5, -2.5)))
    g = L.compute_field(p, L.GridSpec(p.bounds, 301))
    assert g.n_basins == 1
    assert g.efficient.sum() == 1 and g.efficient[g.cell_of((-3.5, -2.5))]


@pytest.mark.parametrize("res", [151, 301, 601])
def test_gallagher_one_ridge_free_set(res):
    p = BiObjectiveProblem(P.gallagher())
    g = L.compute_field(p, L.GridSpec(p.bounds, res))
    free = [r for r in L.ridge_report(g) if r.ridge_free]
    assert len(free) == 1
    assert free[0].set_id == g.basin_at(p.center)


@pytest.mark.parametrize("name", ["sphere", "bimodal_example", "ellipsoid", "rastrigin", "weierstrass", "gallagher"])
def test_s_cell_efficient_for_suite(name):
    # s = (-3.5, -2.5) is a cell center at 301^2 (spacing 1/30)
    p = BiObjectiveProblem(P.get_problem(name))
    g = L.compute_field(p, L.GridSpec(p.bounds, 301))
    i, j = g.cell_of(p.center)
    assert np.allclose((g.xs[i], g.ys[j]), p.center)
    assert g.efficient[i, j]


def test_ridge_definition(bimodal_grid):
    _, g = bimodal_grid
    b, sink = g.basin_id, g.efficient
    nx, ny = b.shape
    for i, j in zip(*np.nonzero(g.ridge)):
        assert not sink[i, j]
        neigh = [b[i + di, j + dj] for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)) if 0 <= i + di < nx and 0 <= j + dj < ny]
        assert any(v != b[i, j] for v in neigh)


# export --------------------------------------------------------------------


def test_csv_export_roundtrip(tmp_path, bimodal_grid):
    _, g = bimodal_grid
    path = tmp_path / L.grid_filename("bimodal_example", 301)
    assert path.name == "bimodal_example_301.csv"
    (written,) = L.export_grid(g, path)
    lines = written.read_text().splitlines()
    assert lines[0] == "x,y,height,log_height,basin_id,efficient,ridge"
    assert len(lines) == 90601 + 1
    cols = L.read_grid_csv(path)
    assert np.array_equal(cols["basin_id"], flat(g.basin_id))
    assert np.array_equal(cols["efficient"], flat(g.efficient).astype(int))
    assert np.array_equal(cols["ridge"], flat(g.ridge).astype(int))
    assert np.array_equal(cols["height"], flat(g.height))
    k = int(np.argmin(cols["height"]))
    assert cols["efficient"][k] == 1


def test_json_export_and_trace_overlay(tmp_path, bimodal_grid):
    from somogsa import mogsa

    p, g = bimodal_grid
    r = mogsa.run(p, (2.5, 2.0), eval_budget=20_000)
    out = L.export_grid(g, tmp_path / "g.json", "json", trace=r.trace)
    doc = json.loads(out[0].read_text())
    assert doc["shape"] == [301, 301] and doc["n_basins"] == 2
    assert len(doc["basin_id"]) == 90601
    overlay = json.loads(out[1].read_text())
    assert out[1].name == "g_trace.json"
    assert len(overlay) == len(r.trace)
    assert overlay[0]["basin_id"] == g.basin_at((2.5, 2.0))


def test_export_io_error_names_path(tmp_path, bimodal_grid):
    _, g = bimodal_grid
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        L.export_grid(g, blocker / "x.csv")


def test_kernel_benchmark_script_runs(capsys):
    import runpy
    from pathlib import Path

    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    runpy.run_path(str(script), run_name="bench")["main"](["--res", "31", "--repeat", "1"])
    rows = capsys.readouterr().out.splitlines()[1:]
    assert len(rows) == 2 * len(BACKENDS)
