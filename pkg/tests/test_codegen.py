import os
import re
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from stencilforge import Function, Grid, Operator, TimeFunction
from stencilforge.demos import DEMOS, demo_operator
from stencilforge.symbolic import Eq

from conftest import gcc_smoke_enabled

GOLDEN = Path(__file__).parent / "golden"
DLES = ["basic", "advanced", "speculative"]
CASES = [(d, l) for d in DEMOS for l in DLES]


def golden_path(demo, dle):
    return GOLDEN / f"kernel_{demo}_{dle}.c"


@pytest.mark.parametrize("demo,dle", CASES)
def test_matches_golden(demo, dle):
    src = demo_operator(demo, dse="advanced", dle=dle).ccode()
    path = golden_path(demo, dle)
    if os.environ.get("STENCILFORGE_REGEN_GOLDEN"):
        path.write_bytes(src.encode("utf-8"))
    assert path.read_bytes().decode("utf-8") == src


@pytest.mark.parametrize("demo", DEMOS)
def test_emission_is_deterministic(demo):
    a = demo_operator(demo).ccode()
    b = demo_operator(demo).ccode()
    assert a == b
    assert "\r" not in a and a.endswith("\n")


def test_blocked_laplace_has_remainder_loops():
    src = demo_operator("laplace", dle="advanced").ccode()
    assert "for (int x_blk = 1; x_blk < 30; x_blk += 16)" in src
    assert "x < MIN(x_blk + 16, 30)" in src
    basic = demo_operator("laplace", dle="basic").ccode()
    assert "_blk" not in basic


def test_structure_of_acoustic_kernel():
    src = demo_operator("acoustic", dle="advanced").ccode()
    assert "double *restrict u_vec" in src
    assert "#pragma omp parallel for" in src
    assert "#pragma omp simd" in src
    assert "time-invariant precomputation" in src
    assert src.index("time-invariant") < src.index("for (int time")
    assert "/* inject src */" in src and "/* interpolate rec */" in src
    assert src.index("/* inject src */") < src.index("/* interpolate rec */")
    assert "free(q0_vec);" in src


def test_backward_kernel_uses_nonnegative_modulo():
    src = demo_operator("acoustic_adjoint", dle="basic").ccode()
    assert "for (int time = time_M - 1; time >= time_m; time -= 1)" in src
    assert "((time - 1) % 3 + 3) % 3" in src


def test_speculative_differs_only_in_annotations():
    adv = demo_operator("convection", dle="advanced").ccode()
    spec = demo_operator("convection", dle="speculative").ccode()
    assert "speculative: request non-temporal stores" in spec

    def body(src):
        return [ln for ln in src.splitlines()
                if "speculative" not in ln and "dle=" not in ln]

    assert body(spec) == body(adv)


def test_float32_emission():
    g = Grid((6, 6))
    u = TimeFunction("u", g, time_order=1, dtype=np.float32)
    src = Operator([Eq(u.forward, u.center * 0.5)], name="half").ccode()
    assert "float *restrict u_vec" in src
    assert "0.5F" in src


def test_scalar_parameters():
    from stencilforge.symbolic import Symbol

    g = Grid((6, 6))
    f, r = Function("f", g), Function("r", g)
    src = Operator([Eq(r, Symbol("c") * f)], name="scale").ccode()
    assert re.search(r"int scale\(.*const double c\)", src)


@pytest.mark.skipif(not gcc_smoke_enabled() or shutil.which("gcc") is None,
                    reason="set STENCILFORGE_CC_SMOKE=1 with gcc on PATH")
@pytest.mark.parametrize("demo,dle", CASES)
def test_compiles_with_gcc(demo, dle, tmp_path):
    src = tmp_path / "k.c"
    src.write_text(demo_operator(demo, dle=dle).ccode())
    subprocess.run(["gcc", "-std=c99", "-O2", "-fopenmp", "-Wall", "-Werror",
                    "-c", str(src), "-o", str(tmp_path / "k.o")],
                   check=True, capture_output=True)
