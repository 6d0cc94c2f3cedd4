"""Finite-difference stencil compiler: symbolic equations to loop kernels."""

from .errors import *  # noqa: F401,F403
from .symbolic import (Absolute, Access, Add, Const, Deriv, Dimension, Div,
                       Eq, Expr, Mul, Pow, Relative, Symbol, free_symbols,
                       h, s, simplify, solve_linear, substitute, t, x, y, z)
from .grid import (Function, Grid, GridFunction, TimeFunction, dump_field,
                   load_field, time_shift)
from .finite_difference import (DerivativeSpec, FdWeights, expand_derivatives,
                                fd_weights, solve)
from .sparse import (InterpStencil, SparsePointSet, interp_weights,
                     load_points, save_points)
from .dse import (FlopReport, OptimizedExprSet, eliminate_common_subexpressions,
                  factorize_weights, flop_count, hoist_time_invariants,
                  optimize)
from .scheduler import (Backward, BlockingSpec, Forward, LoopNest, TimeAxis,
                        apply_blocking, apply_dle, autotune_blocks,
                        format_nest, schedule)
from .tape import KernelTape, compile_nest
from .binding import DataBinding, bind
from .executor import RunSummary, run
from .operator import Operator

__version__ = "0.1.0"
