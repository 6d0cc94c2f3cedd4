import itertools
import math
import re

import numpy as np
import pytest

from stencilforge import Function, Grid, Operator, TimeFunction, solve
from stencilforge.demos import (AcousticSetup, demo_convection, demo_laplace,
                                jacobi_reference, make_model, ricker)
from stencilforge.demos.acoustic import damping_profile
from stencilforge.demos.convection import bump, build_convection
from stencilforge.demos.laplace import build_laplace, l1_change
from stencilforge.errors import CflViolation, NonConvergence
from stencilforge.scheduler import Backward
from stencilforge.sparse import SparsePointSet
from stencilforge.symbolic import Eq, h, s

LEVELS = list(itertools.product(["basic", "advanced"], repeat=2))


def test_bump_profile():
    xi = np.array([0.0, 0.5, 0.75, 1.0, 1.5])
    np.testing.assert_allclose(bump(xi), [0.0, 0.0, 1.0, 0.0, 0.0],
                               atol=1e-15)


def test_convection_zero_steps():
    res = demo_convection(nx=21, ny=21, steps=0)
    np.testing.assert_array_equal(res.fields["final"], res.fields["initial"])
    assert res.diagnostics["displacement"] == (0.0, 0.0)


def test_convection_is_monotone():
    res = demo_convection(nx=41, ny=41, steps=40)
    u0, u1 = res.fields["initial"], res.fields["final"]
    # upwind with CFL <= 1 is a convex combination: no new extrema
    assert u1.max() <= u0.max() + 1e-12
    assert u1.min() >= u0.min() - 1e-12


def test_convection_cfl():
    with pytest.raises(CflViolation):
        build_convection(dx=0.01, dt=0.02)


def test_convection_dumps(tmp_path):
    res = demo_convection(nx=11, ny=11, steps=2, outdir=tmp_path)
    for label in ("initial", "final"):
        back = np.loadtxt(res.dumps[label], delimiter=",")
        np.testing.assert_array_equal(back, res.fields[label])


def test_l1_change_is_signed():
    old = np.ones(4)
    assert l1_change(2 * old, old) == 1.0
    assert l1_change(0.5 * old, old) == -0.5


def test_laplace_small_grid_matches_oracle():
    res = demo_laplace(nx=12, ny=9)
    want, count = jacobi_reference(nx=12, ny=9)
    assert res.steps == count
    np.testing.assert_allclose(res.fields["final"], want, rtol=0, atol=1e-12)


def test_laplace_nonconvergence():
    with pytest.raises(NonConvergence):
        demo_laplace(nx=31, ny=31, max_iter=5)
    with pytest.raises(ValueError):
        demo_laplace(tol=0.0)


def test_laplace_convergence_dump(tmp_path):
    res = demo_laplace(nx=10, ny=10, outdir=tmp_path)
    hist = np.loadtxt(res.dumps["convergence"], delimiter=",", skiprows=1)
    assert hist.shape == (res.steps, 2)
    assert hist[-1, 1] <= 1e-4


def test_ricker_peak():
    f0 = 0.01
    t = np.linspace(0, 300, 3001)
    w = ricker(f0, t)
    assert t[np.argmax(w)] == pytest.approx(100.0)
    assert w.max() == pytest.approx(1.0)


def test_damping_profile():
    eta = damping_profile((20, 20), 5, 2.0)
    assert eta[5:15, 5:15].max() == 0.0
    assert eta[0, 10] == pytest.approx(2.0)
    assert eta[0, 0] == pytest.approx(4.0)
    np.testing.assert_array_equal(eta, eta[::-1, :])


def test_model_invariants():
    model = make_model()
    assert model.dt <= model.critical_dt
    assert model.rec_coords.shape == (101, 2)
    ext = (np.array(model.shape) - 1) * model.spacing
    assert np.all(model.rec_coords >= 0) and np.all(model.rec_coords <= ext)
    assert np.all(model.src_coords[0] == [300.0, 150.0])
    model.dt *= 3
    with pytest.raises(CflViolation):
        model.validate()


def test_zero_source_stays_zero():
    model = make_model(shape=(21, 21), nbl=4, ntime=20, nrec=3,
                       depth_index=6)
    setup = AcousticSetup(model)
    rec, u, _ = setup.forward(np.zeros_like(setup.src.data))
    assert not rec.any() and not u.any()


def test_first_arrival_after_travel_time():
    model = make_model(shape=(61, 61), ntime=200, nrec=101)
    setup = AcousticSetup(model)
    rec, _, _ = setup.forward()
    far = 0  # receiver at the left edge of the interior
    dist = abs(model.rec_coords[far, 0] - model.src_coords[0, 0])
    t_travel = dist / 1.5
    # the wavelet ramps up from t=0, so allow one period of lead
    early = int((t_travel - 1.0 / model.f0) / model.dt)
    sig = np.abs(rec[:, far])
    assert sig[:max(early, 1)].max() < 1e-3 * sig.max()
    assert sig.max() > 0


@pytest.mark.parametrize("order", [2, 4])
def test_undamped_adjoint_is_time_reversed_forward(order):
    model = make_model(shape=(21, 21), nbl=4, ntime=30, nrec=4,
                       depth_index=6)
    setup = AcousticSetup(model, order=order, with_damping=False)
    # with eta = 0 the adjoint update is the forward update with t+1 and
    # t-1 exchanged
    mirrored = (str(setup.adjoint_stencil).replace("v(", "u(")
                .replace("t + s", "t - s"))
    fwd = str(setup.forward_stencil)
    assert sorted(re.findall(r"[^+-]+", mirrored)) == sorted(
        re.findall(r"[^+-]+", fwd))
    lhs, rhs, rel = setup.adjoint_test()
    assert rel <= 1e-12


@pytest.mark.parametrize("order", [2, 4])
def test_adjoint_small_2d(order):
    model = make_model(shape=(31, 31), nbl=6, ntime=80, nrec=11,
                       depth_index=9)
    setup = AcousticSetup(model, order=order)
    rng = np.random.default_rng(order)
    rec = rng.standard_normal(setup.rec.data.shape)
    _, _, rel = setup.adjoint_test(rec)
    assert rel <= 1e-12


def test_adjoint_float32():
    model = make_model(shape=(31, 31), nbl=6, ntime=80, nrec=11,
                       depth_index=9)
    setup = AcousticSetup(model, dtype=np.float32)
    _, _, rel = setup.adjoint_test()
    assert rel <= 1e-4


def test_right_sided_first_derivative_breaks_adjointness():
    # A one-sided forward difference for the first time derivative, used
    # in both operators, gives a pair that are not transposes.
    model = make_model(shape=(31, 31), nbl=6, ntime=80, nrec=11,
                       depth_index=9)
    g = Grid(model.shape, spacing=model.spacing)
    m = Function("m", g)
    m.data[:] = model.m
    eta = Function("eta", g)
    eta.data[:] = model.eta
    nt = model.ntime
    src = SparsePointSet("src", g, 1, nt, model.src_coords)
    src.data[:, 0] = ricker(model.f0, np.arange(nt) * model.dt)
    rec = SparsePointSet("rec", g, len(model.rec_coords), nt,
                         model.rec_coords)
    srca = SparsePointSet("srca", g, 1, nt, model.src_coords)
    u = TimeFunction("u", g, time_order=2)
    v = TimeFunction("v", g, time_order=2)
    subs = {h: model.spacing, s: model.dt}
    dt = model.dt
    ut = (u.forward - u.center) / s
    vt = (v.forward - v.center) / s
    fwd = Operator([Eq(u.forward, solve(m * u.dt2 - u.laplace + eta * ut,
                                        u.forward))]
                   + src.inject(u, src * dt ** 2 / m) + rec.interpolate(u),
                   subs=subs)
    adj = Operator([Eq(v.backward, solve(m * v.dt2 - v.laplace - eta * vt,
                                         v.backward))]
                   + rec.inject(v, rec * dt ** 2 / m) + srca.interpolate(v),
                   subs=subs, time_axis=Backward)
    d = np.zeros_like(rec.data)
    fwd.apply(u=np.zeros_like(u.data), rec=d, time=nt)
    back = np.zeros_like(srca.data)
    adj.apply(v=np.zeros_like(v.data), rec=d, srca=back, time=nt)
    lhs = float(np.dot(src.data.ravel(), back.ravel()))
    rhs = float(np.dot(d.ravel(), d.ravel()))
    rel = abs(lhs - rhs) / abs(rhs)
    assert rel > 1e-6


def _run(demo, dse, dle, seed):
    rng = np.random.default_rng(seed)
    if demo == "convection":
        op, u, _ = build_convection(nx=17, ny=17, dse=dse, dle=dle)
        arrays = {"u": rng.uniform(0.5, 1.5, u.data.shape)}
        kw = {"time": 5}
    elif demo == "laplace":
        op, p, pn, bc = build_laplace(nx=19, ny=17, dse=dse, dle=dle)
        arrays = {"p": np.zeros(p.data.shape),
                  "pn": rng.uniform(size=pn.data.shape),
                  "bc_right": rng.uniform(size=bc.data.shape)}
        kw = {}
    else:
        model = make_model(shape=(19, 19), nbl=3, nrec=5, ntime=12,
                           depth_index=5)
        setup = AcousticSetup(model, order=4, dse=dse, dle=dle)
        if demo == "acoustic":
            op = setup.forward_op
            arrays = {"u": np.zeros(setup.u.data.shape),
                      "rec": np.zeros(setup.rec.data.shape),
                      "src": rng.standard_normal(setup.src.data.shape)}
        else:
            op = setup.adjoint_op
            arrays = {"v": np.zeros(setup.v.data.shape),
                      "srca": np.zeros(setup.srca.data.shape),
                      "rec": rng.standard_normal(setup.rec.data.shape)}
        kw = {"time": 12}
    op.apply(**arrays, **kw)
    return arrays


@pytest.mark.parametrize("demo", ["convection", "laplace", "acoustic",
                                  "acoustic_adjoint"])
def test_levels_agree(demo):
    ref = _run(demo, "none", "basic", 11)
    for dse, dle in LEVELS:
        got = _run(demo, dse, dle, 11)
        for name, arr in ref.items():
            scale = max(np.abs(arr).max(), 1e-300)
            err = np.abs(got[name] - arr).max() / scale
            assert err <= 1e-12, (dse, dle, name, err)


@pytest.mark.slow
def test_adjoint_3d():
    model = make_model(shape=(41, 41, 41), nbl=6, ntime=60, nrec=9,
                       depth_index=12)
    setup = AcousticSetup(model, order=4)
    _, _, rel = setup.adjoint_test()
    assert rel <= 1e-10
    assert math.isfinite(rel)
