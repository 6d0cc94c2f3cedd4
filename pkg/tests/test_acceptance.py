"""End-to-end acceptance checks, one marker per numbered criterion.

A summary line ``criterion N: PASS|FAIL`` is printed for each at the end of
the session (see conftest.py).
"""

import itertools
import os
import shutil
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest

from stencilforge import Grid, Operator, TimeFunction, solve
from stencilforge.bench import benchmark
from stencilforge.demos import (DEMOS, AcousticSetup, demo_convection,
                                demo_laplace, demo_operator,
                                jacobi_reference, make_model)
from stencilforge.finite_difference import DerivativeSpec, fd_weights
from stencilforge.sparse import SparsePointSet
from stencilforge.symbolic import Eq, x

from conftest import gcc_smoke_enabled
from test_backend import _demo_ops, _random_inputs
from test_demos import _run
from test_finite_difference import vandermonde_oracle

GOLDEN = Path(__file__).parent / "golden"


@pytest.mark.criterion(1)
def test_fd_weights_against_rational_oracle():
    start = time.perf_counter()
    for acc in range(2, 17, 2):
        spec = DerivativeSpec(x, 2, "centered", acc)
        got = np.array([float(c) for c in fd_weights(2, spec.offsets)
                        .coefficients])
        want = np.array([float(c) for c in vandermonde_oracle(2,
                                                              spec.offsets)])
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion(2)
def test_convection_update_form():
    u = TimeFunction("u", Grid((5, 5)), time_order=1)
    text = str(solve(Eq(u.dt + u.dxl + u.dyl), u.forward))
    assert "h*u(t, x, y)" in text and "- 2.0*s*u(t, x, y)" in text
    assert text == ("(h*u(t, x, y) + s*u(t, x - h, y) + s*u(t, x, y - h)"
                    " - 2.0*s*u(t, x, y))/h")


@pytest.mark.criterion(3)
def test_convection_demo():
    start = time.perf_counter()
    res = demo_convection(nx=81, ny=81, steps=100, c=1.0)
    elapsed = time.perf_counter() - start
    d = res.diagnostics
    dx = 0.025
    for got in d["displacement"]:
        assert abs(got - d["expected_displacement"]) <= dx
    assert d["final_peak"] <= d["initial_peak"]
    assert elapsed < 5.0


@pytest.mark.criterion(4)
def test_laplace_demo():
    start = time.perf_counter()
    res = demo_laplace(nx=31, ny=31, tol=1e-4)
    elapsed = time.perf_counter() - start
    want, count = jacobi_reference(31, 31, tol=1e-4)
    p = res.fields["final"]
    assert res.diagnostics["l1_change"] <= 1e-4
    assert res.steps == count
    assert np.abs(p - want).max() <= 1e-6
    bc = np.linspace(0, 1, 31)
    assert np.all(p[1:-1, 0] == 0.0)
    assert np.all(p[1:-1, -1] == bc[1:-1])
    assert np.all(p[0, :] == p[1, :])
    assert np.all(p[-1, :] == p[-2, :])
    assert elapsed < 10.0


@pytest.mark.criterion(5)
@pytest.mark.parametrize("order", [2, 4])
def test_adjoint_2d(order):
    start = time.perf_counter()
    model = make_model(shape=(61, 61), ntime=200)
    setup = AcousticSetup(model, order=order, dtype=np.float64)
    lhs, rhs, rel = setup.adjoint_test()
    assert rel <= 1e-10
    assert time.perf_counter() - start < 30.0


@pytest.mark.criterion(5)
@pytest.mark.slow
def test_adjoint_3d():
    model = make_model(shape=(41, 41, 41), nbl=8, ntime=100, nrec=21,
                       depth_index=12)
    setup = AcousticSetup(model, order=4)
    _, _, rel = setup.adjoint_test()
    assert rel <= 1e-10


@pytest.mark.criterion(6)
@pytest.mark.parametrize("demo", DEMOS)
def test_level_combinations_agree(demo):
    runs = {lv: _run(demo, *lv, seed=5) for lv in
            itertools.product(["basic", "advanced"], repeat=2)}
    ref = runs["basic", "basic"]
    for lv, got in runs.items():
        for name, arr in ref.items():
            scale = max(np.abs(arr).max(), 1e-300)
            assert np.abs(got[name] - arr).max() <= 1e-12 * scale, lv


@pytest.mark.criterion(6)
@pytest.mark.parametrize("demo", DEMOS)
def test_tape_equals_tree_walk(demo):
    for dse, dle in itertools.product(["basic", "advanced"], repeat=2):
        op, kw = _demo_ops(dse, dle)[demo]
        data = _random_inputs(op, 0)
        a = {k: v.copy() for k, v in data.items()}
        b = {k: v.copy() for k, v in data.items()}
        op.apply(threads=1, **a, **kw)
        op.reference(**b, **kw)
        for name in data:
            np.testing.assert_array_equal(a[name], b[name])


@pytest.mark.criterion(7)
def test_flop_and_oi_trend():
    model = make_model(shape=(64, 64, 64), nbl=10, ntime=2, nrec=5)
    for order in (2, 4, 8, 16):
        basic = AcousticSetup(model, order=order, dse="basic").forward_op
        adv = AcousticSetup(model, order=order, dse="advanced").forward_op
        fb, fa = basic.flop_report(), adv.flop_report()
        if order >= 4:
            assert fa.flops < fb.flops
        assert fa.oi <= fb.oi


@pytest.mark.criterion(7)
def test_bench_report_at_64():
    reports = benchmark(shape=(64, 64, 64), orders=(2, 4, 8, 16), steps=2,
                        repeats=3)
    assert len(reports) >= 8
    cells = {(r.space_order, r.dse, r.dle) for r in reports}
    assert cells == set(itertools.product((2, 4, 8, 16),
                                          ("basic", "advanced"),
                                          ("basic", "advanced")))
    for r in reports:
        assert r.shape == (64, 64, 64)
        assert r.runtime_s > 0 and np.isfinite(r.gflops) and r.oi > 0


@pytest.mark.criterion(8)
@pytest.mark.parametrize("demo", DEMOS)
@pytest.mark.parametrize("dle", ["basic", "advanced", "speculative"])
def test_codegen_golden(demo, dle):
    first = demo_operator(demo, dse="advanced", dle=dle).ccode()
    second = demo_operator(demo, dse="advanced", dle=dle).ccode()
    assert first == second
    golden = GOLDEN / f"kernel_{demo}_{dle}.c"
    assert golden.read_bytes() == first.encode("utf-8")


@pytest.mark.criterion(8)
@pytest.mark.skipif(not gcc_smoke_enabled() or shutil.which("gcc") is None,
                    reason="set STENCILFORGE_CC_SMOKE=1 with gcc on PATH")
def test_codegen_compiles(tmp_path):
    for demo in DEMOS:
        src = tmp_path / f"{demo}.c"
        src.write_text(demo_operator(demo).ccode())
        subprocess.run(["gcc", "-std=c99", "-O2", "-fopenmp", "-c",
                        str(src), "-o", str(tmp_path / f"{demo}.o")],
                       check=True, capture_output=True)


def _bruteforce_interp(field, coords, spacing):
    out = []
    for c in coords:
        r = np.asarray(c) / np.asarray(spacing)
        base = np.minimum(np.floor(r).astype(int),
                          np.array(field.shape) - 2)
        fr = r - base
        val = 0.0
        for corner in itertools.product((0, 1), repeat=len(c)):
            w = np.prod([f if k else 1 - f for k, f in zip(corner, fr)])
            val += w * field[tuple(base + corner)]
        out.append(val)
    return np.array(out)


@pytest.mark.criterion(9)
def test_sparse_adjointness():
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        ndim = 2 + seed % 2
        shape = tuple(rng.integers(5, 10, ndim))
        spacing = tuple(rng.uniform(0.2, 1.5, ndim))
        g = Grid(shape, spacing=spacing)
        npt = int(rng.integers(1, 8))
        coords = rng.uniform(0, 1, (npt, ndim)) * np.array(g.extent)
        u = TimeFunction("u", g, time_order=1)
        rec = SparsePointSet("rec", g, npt, 1, coords)
        interp = Operator(rec.interpolate(u))
        inject = Operator(rec.inject(u, rec))
        field = np.zeros_like(u.data)
        field[1] = rng.standard_normal(shape)
        got = np.zeros_like(rec.data)
        interp.apply(u=field, rec=got, time=1)
        np.testing.assert_allclose(
            got[0], _bruteforce_interp(field[1], coords, spacing),
            rtol=0, atol=1e-12)
        r = rng.standard_normal(rec.data.shape)
        back = np.zeros_like(u.data)
        inject.apply(u=back, rec=r, time=1)
        lhs = float(np.dot(got.ravel(), r.ravel()))
        rhs = float(np.dot(field[1].ravel(), back[1].ravel()))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
