"""Acoustic wave propagation with absorbing layer, and its adjoint.

Forward:  m u_tt + eta u_t - laplace(u) = q
Adjoint:  m v_tt - eta v_t - laplace(v) = r, run backwards in time.

Units: metres, milliseconds, km/s (= m/ms); ``f0`` in kHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import CflViolation
from ..finite_difference import solve
from ..grid import Function, Grid, TimeFunction, dump_field
from ..operator import Operator
from ..scheduler import Backward, Forward
from ..sparse import SparsePointSet, save_points
from ..symbolic import Eq, h, s
from .common import DemoResult, out_path


def ricker(f0, times, t0=None):
    """Ricker wavelet with peak 1 at ``t0`` (default 1/f0)."""
    t0 = 1.0 / f0 if t0 is None else t0
    a = (np.pi * f0 * (np.asarray(times) - t0)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def damping_profile(shape, nbl, eta_max):
    """eta_max * sum over axes of (depth into the layer / nbl)**2."""
    eta = np.zeros(shape)
    for ax, n in enumerate(shape):
        i = np.arange(n, dtype=float)
        d = np.maximum.reduce([nbl - i, i - (n - 1 - nbl), np.zeros(n)])
        prof = (d / nbl) ** 2
        view = [None] * len(shape)
        view[ax] = slice(None)
        eta = eta + eta_max * prof[tuple(view)]
    return eta


@dataclass
class AcousticModel:
    shape: tuple
    spacing: float
    vp: np.ndarray
    eta: np.ndarray
    nbl: int
    f0: float
    dt: float
    ntime: int
    src_coords: np.ndarray
    rec_coords: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def m(self):
        return 1.0 / self.vp ** 2

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def critical_dt(self):
        return self.spacing * math.sqrt(self.m.min()) / math.sqrt(self.ndim)

    def validate(self):
        if np.any(self.m <= 0):
            raise ValueError("square slowness must be positive")
        if np.any(self.eta < 0):
            raise ValueError("damping must be non-negative")
        if self.dt > self.critical_dt:
            raise CflViolation(
                f"dt={self.dt} exceeds the stability limit "
                f"{self.critical_dt:.6g}")


def make_model(shape=(61, 61), spacing=10.0, nbl=10, f0=0.010, ntime=200,
               nrec=101, velocities=(1.5, 2.5), depth_index=15,
               dt_factor=0.5) -> AcousticModel:
    """Two-layer model; the last axis is depth.

    Source at the lateral centre; receivers on a lateral line at the same
    depth, spanning the undamped interior.
    """
    shape = tuple(shape)
    ndim = len(shape)
    nz = shape[-1]
    vp = np.full(shape, velocities[0])
    vp[..., nz // 2:] = velocities[1]
    vmax = max(velocities)
    eta_max = 3.0 * vmax * math.log(1000.0) / (2.0 * nbl * spacing)
    eta = damping_profile(shape, nbl, eta_max)
    centre = [(n - 1) / 2 * spacing for n in shape[:-1]]
    depth = depth_index * spacing
    src = np.array([centre + [depth]])
    xs = np.linspace(nbl * spacing, (shape[0] - 1 - nbl) * spacing, nrec)
    rec = np.zeros((nrec, ndim))
    rec[:, 0] = xs
    rec[:, 1:-1] = centre[1:]
    rec[:, -1] = depth
    crit = spacing * math.sqrt((1.0 / vp ** 2).min()) / math.sqrt(ndim)
    model = AcousticModel(shape, spacing, vp, eta, nbl, f0, dt_factor * crit,
                          ntime, src, rec)
    model.validate()
    return model


class AcousticSetup:
    """Forward and adjoint operators for one model and space order."""

    def __init__(self, model: AcousticModel, order=2, dse="advanced",
                 dle="advanced", dtype=np.float64, with_damping=True):
        model.validate()
        self.model = model
        self.order = order
        self.dtype = np.dtype(dtype)
        nt = model.ntime
        g = Grid(model.shape, spacing=model.spacing)
        self.grid = g
        self.m = Function("m", g, space_order=order, dtype=dtype)
        self.m.data[:] = model.m
        self.eta = Function("eta", g, space_order=order, dtype=dtype)
        self.eta.data[:] = model.eta if with_damping else 0.0
        self.src = SparsePointSet("src", g, len(model.src_coords), nt,
                                  model.src_coords, dtype=dtype)
        self.src.data[:, 0] = ricker(model.f0, np.arange(nt) * model.dt)
        self.rec = SparsePointSet("rec", g, len(model.rec_coords), nt,
                                  model.rec_coords, dtype=dtype)
        self.srca = SparsePointSet("srca", g, len(model.src_coords), nt,
                                   model.src_coords, dtype=dtype)
        self.u = TimeFunction("u", g, time_order=2, space_order=order,
                              dtype=dtype)
        self.v = TimeFunction("v", g, time_order=2, space_order=order,
                              dtype=dtype)
        dt = model.dt
        self.subs = {s: dt, h: model.spacing}
        m, eta, u, v = self.m, self.eta, self.u, self.v

        fwd = m * u.dt2 - u.laplace + eta * u.dt
        self.forward_stencil = solve(fwd, u.forward)
        self.forward_op = Operator(
            [Eq(u.forward, self.forward_stencil)]
            + self.src.inject(u, self.src * dt ** 2 / m)
            + self.rec.interpolate(u),
            subs=self.subs, time_axis=Forward, dse=dse, dle=dle,
            name="acoustic_forward")

        adj = m * v.dt2 - v.laplace - eta * v.dt
        self.adjoint_stencil = solve(adj, v.backward)
        self.adjoint_op = Operator(
            [Eq(v.backward, self.adjoint_stencil)]
            + self.rec.inject(v, self.rec * dt ** 2 / m)
            + self.srca.interpolate(v),
            subs=self.subs, time_axis=Backward, dse=dse, dle=dle,
            name="acoustic_adjoint")

    def forward(self, src=None, **kw):
        """Model receiver data from source data; returns (rec, summary)."""
        u = np.zeros_like(self.u.data)
        rec = np.zeros_like(self.rec.data)
        src = self.src.data if src is None else np.asarray(src, self.dtype)
        summary = self.forward_op.apply(u=u, src=src, rec=rec,
                                        time=self.model.ntime, **kw)
        return rec, u, summary

    def adjoint(self, rec, **kw):
        v = np.zeros_like(self.v.data)
        srca = np.zeros_like(self.srca.data)
        summary = self.adjoint_op.apply(v=v, rec=np.asarray(rec, self.dtype),
                                        srca=srca, time=self.model.ntime, **kw)
        return srca, v, summary

    def adjoint_test(self, rec=None):
        """Relative mismatch of <src, F* rec> against <F src, rec>.

        With ``rec`` omitted the modelled data F src is used.
        """
        src = self.src.data
        d, _, _ = self.forward(src)
        rec = d if rec is None else rec
        srca, _, _ = self.adjoint(rec)
        lhs = float(np.dot(src.ravel().astype(float),
                           srca.ravel().astype(float)))
        rhs = float(np.dot(d.ravel().astype(float), rec.ravel().astype(float)))
        return lhs, rhs, abs(lhs - rhs) / abs(rhs)


def demo_acoustic(shape=(61, 61), order=2, ntime=200, adjoint_test=False,
                  outdir=None, dse="advanced", dle="advanced",
                  dtype=np.float64, tol=None) -> DemoResult:
    model = make_model(shape=shape, ntime=ntime)
    setup = AcousticSetup(model, order=order, dse=dse, dle=dle, dtype=dtype)
    rec, u, summary = setup.forward()
    diag = {"dt": model.dt, "ntime": ntime, "order": order,
            "rec_max_abs": float(np.abs(rec).max()),
            "runtime_s": summary.elapsed}
    result = DemoResult("acoustic_adjoint" if adjoint_test else "acoustic",
                        summary.steps, diag)
    path = out_path(outdir, "acoustic_rec.csv")
    if path is not None:
        setup.rec.data[:] = rec
        result.dumps["rec"] = save_points(path, setup.rec)
        last = u[model.ntime % u.shape[0]]
        if last.ndim <= 2:
            result.dumps["u_final"] = dump_field(
                out_path(outdir, "acoustic_u_final.csv"), last)
        else:
            result.dumps["u_final"] = dump_field(
                out_path(outdir, "acoustic_u_final.bin"), last)
    if adjoint_test:
        lhs, rhs, rel = setup.adjoint_test(rec)
        if tol is None:
            tol = 1e-10 if np.dtype(dtype) == np.float64 else 1e-4
        diag.update({"src_dot_adjoint": lhs, "forward_dot_rec": rhs,
                     "relative_mismatch": rel, "tolerance": tol})
        result.ok = rel <= tol
    return result
