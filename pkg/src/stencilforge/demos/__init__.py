"""Worked examples: linear convection, Laplace and acoustic waves."""

from .common import DemoResult
from .convection import build_convection, demo_convection
from .laplace import build_laplace, demo_laplace, jacobi_reference
from .acoustic import (AcousticModel, AcousticSetup, demo_acoustic,
                       make_model, ricker)

from ..errors import UnknownDemo

DEMOS = ("convection", "laplace", "acoustic", "acoustic_adjoint")


def demo_operator(demo, dse="advanced", dle="advanced", order=2):
    """The scheduled operator behind a demo id, at default sizes."""
    if demo == "convection":
        return build_convection(dse=dse, dle=dle)[0]
    if demo == "laplace":
        return build_laplace(dse=dse, dle=dle)[0]
    if demo in ("acoustic", "acoustic_adjoint"):
        setup = AcousticSetup(make_model(), order=order, dse=dse, dle=dle)
        return setup.forward_op if demo == "acoustic" else setup.adjoint_op
    raise UnknownDemo(f"unknown demo {demo!r}; choose from {DEMOS}")

__all__ = ["DemoResult", "demo_convection", "demo_laplace", "demo_acoustic",
           "build_convection", "build_laplace", "jacobi_reference",
           "AcousticModel", "AcousticSetup", "make_model", "ricker", "DEMOS",
           "demo_operator"]
