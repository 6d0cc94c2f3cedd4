"""Benchmark harness for the acoustic forward kernel."""

from __future__ import annotations

import itertools
import json
import statistics
from dataclasses import asdict, dataclass

import numpy as np

from .executor import thread_count

__all__ = ["BenchReport", "benchmark", "write_reports"]


@dataclass
class BenchReport:
    kernel: str
    shape: tuple
    space_order: int
    dse: str
    dle: str
    dtype: str
    runtime_s: float
    flops_per_point: int
    gflops: float
    oi: float
    block: str
    steps: int = 0
    threads: int = 1
    pinning: str = "os-default"

    def to_json(self) -> str:
        d = asdict(self)
        d["shape"] = list(self.shape)
        return json.dumps(d, sort_keys=True)


def _median_run(setup, repeats):
    u = np.zeros_like(setup.u.data)
    rec = np.zeros_like(setup.rec.data)
    times = []
    for k in range(repeats + 1):
        u[:] = 0
        rec[:] = 0
        got = setup.forward_op.apply(u=u, rec=rec, src=setup.src.data,
                                     time=setup.model.ntime)
        if k:
            times.append(got.elapsed)
    return statistics.median(times), got.steps


def benchmark(shape=(64, 64, 64), orders=(2, 4), dse_levels=("basic",
              "advanced"), dle_levels=("basic", "advanced"), steps=4,
              repeats=3, dtype=np.float64, autotune=False):
    """One report per (order, dse, dle); median of ``repeats`` runs after a
    warm-up. gflops counts interior points of the main stencil only."""
    from .demos.acoustic import AcousticSetup, make_model

    repeats = max(int(repeats), 3)
    nbl = max(2, min(10, min(shape) // 6))
    model = make_model(shape=shape, nbl=nbl, ntime=steps, nrec=5,
                       depth_index=min(15, shape[-1] // 3))
    reports = []
    for order, dse, dle in itertools.product(orders, dse_levels, dle_levels):
        setup = AcousticSetup(model, order=order, dse=dse, dle=dle,
                              dtype=dtype)
        op = setup.forward_op
        if autotune:
            op.autotune(time=1, u=np.zeros_like(setup.u.data),
                        rec=np.zeros_like(setup.rec.data))
        fr = op.flop_report()
        runtime, nsteps = _median_run(setup, repeats)
        main = op.nest.clusters[-1]
        npoints = int(np.prod([lp.stop - lp.start for lp in main.loops]))
        blocks = sorted({lp.block for lp in main.loops if lp.block})
        block = "x".join(str(b) for b in blocks) if blocks else "unblocked"
        gflops = fr.flops * npoints * nsteps / runtime / 1e9 if runtime else 0.0
        reports.append(BenchReport(
            "acoustic_forward", tuple(shape), order, dse, dle,
            np.dtype(dtype).name, runtime, fr.flops, gflops, fr.oi, block,
            nsteps, thread_count()))
    return reports


def write_reports(path, reports):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")
    return path
