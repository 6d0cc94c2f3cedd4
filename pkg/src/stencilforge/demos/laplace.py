"""Steady-state Laplace equation by Jacobi sweeps with buffer swapping."""

from __future__ import annotations

import numpy as np

from ..errors import NonConvergence
from ..finite_difference import solve
from ..grid import Function, Grid, dump_field
from ..operator import Operator
from ..symbolic import Eq, Symbol, h, x, y
from .common import DemoResult, out_path


def build_laplace(nx=31, ny=31, xmax=2.0, ymax=1.0, dse="advanced",
                  dle="advanced", dtype=np.float64):
    grid = Grid((nx, ny), extent=(xmax, ymax))
    dx = grid.spacing[0]
    p = Function("p", grid, space_order=2, dtype=dtype)
    pn = Function("pn", grid, space_order=2, dtype=dtype)
    bc_right = Function("bc_right", grid, dimensions=(x,), dtype=dtype)
    bc_right.data[:] = np.linspace(0, 1, nx)
    a = Symbol("a")
    stencil = solve(Eq(a * pn.dx2 + pn.dy2), pn)
    bc = [Eq(p.indexed[x, 0], 0.0),
          Eq(p.indexed[x, ny - 1], bc_right.indexed[x]),
          Eq(p.indexed[0, y], p.indexed[1, y]),
          Eq(p.indexed[nx - 1, y], p.indexed[nx - 2, y])]
    op = Operator([Eq(p, stencil)] + bc, subs={h: dx, a: 1.0}, dse=dse,
                  dle=dle, name="laplace")
    return op, p, pn, bc_right


def _initial(p, pn, bc_right):
    for f in (p, pn):
        f.data[:] = 0.0
        f.data[:, -1] = bc_right.data


def l1_change(new, old):
    """Signed relative change sum(|new| - |old|) / sum(|old|)."""
    return float(np.sum(np.abs(new) - np.abs(old)) / np.sum(np.abs(old)))


def demo_laplace(nx=31, ny=31, tol=1e-4, max_iter=100000, outdir=None,
                 dse="advanced", dle="advanced",
                 dtype=np.float64) -> DemoResult:
    if tol <= 0:
        raise ValueError("tol must be positive")
    op, p, pn, bc_right = build_laplace(nx, ny, dse=dse, dle=dle,
                                        dtype=dtype)
    _initial(p, pn, bc_right)
    l1 = 1.0
    count = 0
    history = []
    while l1 > tol:
        if count >= max_iter:
            raise NonConvergence(
                f"no convergence after {max_iter} iterations (l1={l1:.3g})")
        cur, old = (p, pn) if count % 2 == 0 else (pn, p)
        op.apply(p=cur, pn=old)
        l1 = l1_change(cur.data, old.data)
        history.append(l1)
        count += 1
    final = cur.data.copy()
    diag = {"iterations": count, "l1_change": l1, "converged": True}
    result = DemoResult("laplace", count, diag)
    result.fields["final"] = final
    result.fields["history"] = np.array(history)
    path = out_path(outdir, "laplace_final.csv")
    if path is not None:
        result.dumps["final"] = dump_field(path, final)
        hist = out_path(outdir, "laplace_convergence.csv")
        np.savetxt(hist, np.column_stack([np.arange(1, count + 1), history]),
                   delimiter=",", header="iteration,l1_change", comments="")
        result.dumps["convergence"] = hist
    return result


def jacobi_reference(nx=31, ny=31, tol=1e-4, max_iter=100000):
    """Plain numpy Jacobi iteration with the same boundary rules."""
    bc = np.linspace(0, 1, nx)
    a = np.zeros((nx, ny))
    b = np.zeros((nx, ny))
    a[:, -1] = bc
    b[:, -1] = bc
    l1, count = 1.0, 0
    while l1 > tol and count < max_iter:
        new, old = (a, b) if count % 2 == 0 else (b, a)
        new[1:-1, 1:-1] = 0.25 * (old[2:, 1:-1] + old[:-2, 1:-1]
                                  + old[1:-1, 2:] + old[1:-1, :-2])
        new[:, 0] = 0.0
        new[:, -1] = bc
        new[0, :] = new[1, :]
        new[-1, :] = new[-2, :]
        l1 = np.sum(np.abs(new) - np.abs(old)) / np.sum(np.abs(old))
        count += 1
    return new.copy(), count
