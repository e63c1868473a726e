"""Bessel heat semigroup on (0, inf)^n and its harmonic-analysis operators."""
from . import auxiliary_ops, bessel_kernel, estimates, measure_grid, operators, special_fn
from ._backend import NAME as BACKEND
from .bessel_kernel import (heat_kernel_1d, heat_kernel_dt, heat_kernel_dx, heat_kernel_nd, heat_kernel_nd_dt,
                            heat_kernel_nd_dx)
from .errors import ContractError, ConvergenceError, DomainError, SingularityError
from .estimates import ESTIMATE_IDS, verify_estimate, weak_type_experiment
from .measure_grid import GridFunction, make_grid
from .operators import (QuadratureSpec, SourceFunction, apply_semigroup, bump_source, g_function, maximal_op,
                        riesz_pv, riesz_transform, riesz_truncated)

__version__ = "0.1.0"
