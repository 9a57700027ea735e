"""Spectral-Galerkin solvers for damped quadratic acoustic wave equations.

The package solves the Westervelt equation (pressure and potential forms) and
the Kuznetsov equation on Dirichlet boxes in an exact sine eigenbasis, via
Picard iteration over frozen-coefficient linear solves, and ships a harness
that measures how the solutions approach the inviscid (b = 0) limit: at a
linear rate in the energy norm and at a square-root rate in a stronger norm.
"""

from .harness import (
    CauchyCheck,
    DataSpec,
    PotentialPressureReport,
    SweepResult,
    SweepSpec,
    cauchy_check,
    potential_pressure_check,
    run_sweep,
)
from .models import (
    CoefficientSnapshot,
    DegeneracyError,
    DegeneracyReport,
    EquationKind,
    ModelParams,
    alpha_of,
    check_nondegeneracy,
    initial_acceleration,
    physical_to_potential,
    physical_to_westervelt,
)
from .norms import (
    NormKind,
    RateTable,
    e_norm,
    fit_rate,
    sobolev_seminorm,
    traj_diff_norm,
    x_norm,
    xk_energy,
    xw_energy,
)
from .picard import (
    NoConvergenceError,
    PicardConfig,
    PicardReport,
    residual,
    solve_kuznetsov,
    solve_westervelt,
)
from .spectral import (
    Domain,
    GridField,
    SpectralField,
    eigenvalue,
    evaluate,
    from_grid,
    grad_dot,
    laplacian,
    multiply,
    to_grid,
)
from .timeloop import (
    CoefficientPath,
    InnerSolveError,
    TimeGrid,
    Trajectory,
    apply_linearized_operator,
    solve_linearized,
    step,
)

__version__ = "0.1.0"
