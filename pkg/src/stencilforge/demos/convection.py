"""Linear convection u_t + c u_x + c u_y = 0 with a one-sided scheme."""

from __future__ import annotations

import numpy as np

from ..errors import CflViolation
from ..finite_difference import solve
from ..grid import Grid, TimeFunction, dump_field
from ..operator import Operator
from ..symbolic import Eq, h, s
from .common import DemoResult, out_path


def bump(xi):
    """sin^2 hump on [0.5, 1], zero elsewhere."""
    xi = np.asarray(xi, dtype=float)
    inside = (xi >= 0.5) & (xi <= 1.0)
    return np.where(inside, np.sin(np.pi * (xi - 0.5) / 0.5) ** 2, 0.0)


def initial_condition(grid):
    xs, ys = grid.coords(0), grid.coords(1)
    return 1.0 + np.outer(bump(2.0 * xs / 3.0), bump(2.0 * ys / 3.0))


def build_convection(nx=81, ny=81, c=1.0, dx=0.025, dt=0.005,
                     dse="advanced", dle="advanced", dtype=np.float64):
    if c * dt / dx > 1.0:
        raise CflViolation(f"c*dt/dx = {c * dt / dx:.3g} > 1")
    grid = Grid((nx, ny), spacing=dx)
    u = TimeFunction("u", grid, time_order=1, space_order=2, dtype=dtype)
    eq = Eq(u.dt + c * u.dxl + c * u.dyl, 0)
    stencil = solve(eq, u.forward)
    op = Operator([Eq(u.forward, stencil)], subs={h: dx, s: dt}, dse=dse,
                  dle=dle, name="convection")
    return op, u, stencil


def _peak(field, grid):
    i, j = np.unravel_index(np.argmax(field), field.shape)
    return float(field[i, j]), (int(i), int(j)), (
        float(grid.coords(0)[i]), float(grid.coords(1)[j]))


def demo_convection(nx=81, ny=81, steps=100, c=1.0, dx=0.025, dt=0.005,
                    outdir=None, dse="advanced", dle="advanced",
                    dtype=np.float64) -> DemoResult:
    op, u, _ = build_convection(nx, ny, c, dx, dt, dse, dle, dtype)
    grid = u.grid
    u0 = initial_condition(grid)
    u.data[:] = u0
    summary = op.apply(u=u, time=steps)
    final = u.data[steps % u.nbuffers].copy()
    p0, i0, x0 = _peak(u0, grid)
    p1, i1, x1 = _peak(final, grid)
    diag = {"initial_peak": p0, "final_peak": p1,
            "initial_peak_index": i0, "final_peak_index": i1,
            "displacement": (x1[0] - x0[0], x1[1] - x0[1]),
            "expected_displacement": c * steps * dt,
            "runtime_s": summary.elapsed}
    result = DemoResult("convection", summary.steps, diag)
    result.fields["initial"] = u0
    result.fields["final"] = final
    for label, arr in (("initial", u0), ("final", final)):
        path = out_path(outdir, f"convection_{label}.csv")
        if path is not None:
            result.dumps[label] = dump_field(path, arr)
    return result
