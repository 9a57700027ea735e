"""Picard iteration over the whole time slab for the nonlinear solves.

The nonlinear problems are solved as fixed points of the frozen-coefficient
linear map: an iterate supplies the coefficients (alpha and the frozen state
data), the linearized solve produces the next iterate.  The initial iterate is
the plain linear solve (nonlinearity off), which already satisfies the initial
conditions and sits O(data) from the fixed point.  Contraction is monitored in
the X norm for the pressure form and in the energy norm for the potential
forms; successive-difference quotients below one are the practical signature
of the underlying contraction argument.

Ball membership of the iterates (sup-norm threshold 1/(2|k|) plus a bounded
higher-order radius) is reported through the returned degeneracy report and
the observed radius, never enforced by projection: there is no canonical
projection and enforcing one would change the fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models, norms
from .models import DegeneracyError, DegeneracyReport, EquationKind, ModelParams
from .spectral import SpectralField, analyze, synthesize, synthesize_gradient
from .timeloop import CoefficientPath, TimeGrid, Trajectory, solve_linearized

__all__ = [
    "PicardConfig",
    "PicardReport",
    "NoConvergenceError",
    "solve_westervelt",
    "solve_kuznetsov",
    "residual",
    "laplacian_history_residual",
]


class NoConvergenceError(RuntimeError):
    """The fixed-point iteration exhausted max_iter without reaching tol."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class PicardConfig:
    """Fixed-point controls.

    contraction_norm is "X" or "E"; None picks the per-equation default
    (X for the pressure form, E for the potential forms).  When
    ball_radius_report is set, the report carries the higher-order energy
    radius of the final iterate.
    """

    tol: float = 1e-10
    max_iter: int = 50
    contraction_norm: str | None = None
    ball_radius_report: bool = True

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.contraction_norm not in (None, "X", "E"):
            raise ValueError(
                f"contraction norm must be 'X' or 'E', got {self.contraction_norm!r}"
            )


@dataclass
class PicardReport:
    """Contraction diagnostics of one fixed-point solve."""

    iterations: int
    diffs: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    degeneracy: DegeneracyReport | None = None
    observed_R: float | None = None
    converged: bool = False
    contraction_norm: str = "X"


def _alpha_path_of(traj: Trajectory, params: ModelParams) -> np.ndarray:
    """Grid values of alpha along a trajectory (from its own state)."""
    coef = params.alpha_coefficient
    if params.kind is EquationKind.WESTERVELT_PRESSURE:
        state = traj.u
    else:
        state = traj.ut
    return 1.0 - coef * synthesize(traj.domain, state)


def _fixed_point(u0, u1, params, grid, cfg, build_path, default_norm, radius, solver):
    if u0.domain != u1.domain:
        raise ValueError("initial data live on different domains")
    cfg = cfg or PicardConfig()
    norm_kind = cfg.contraction_norm or default_norm

    current = solve_linearized(
        u0, u1, CoefficientPath.constant_unit(u0.domain, grid), params, solver=solver
    )
    diffs: list[float] = []
    converged = False
    for _ in range(cfg.max_iter):
        path = build_path(current, params)
        candidate = solve_linearized(u0, u1, path, params, solver=solver)
        diffs.append(norms.traj_diff_norm(candidate, current, norm_kind))
        current = candidate
        scale = norms.trajectory_norm(current, norm_kind)
        if diffs[-1] <= cfg.tol * scale:
            converged = True
            break

    ratios = [
        diffs[i + 1] / diffs[i] if diffs[i] > 0.0 else 0.0
        for i in range(len(diffs) - 1)
    ]
    report = PicardReport(
        iterations=len(diffs),
        diffs=diffs,
        ratios=ratios,
        degeneracy=models.check_nondegeneracy(
            _alpha_path_of(current, params), params, times=grid.times()
        ),
        observed_R=math.sqrt(radius(current, params.b)["total"]) if (
            cfg.ball_radius_report
        ) else None,
        converged=converged,
        contraction_norm=norm_kind,
    )
    if not converged:
        raise NoConvergenceError(
            f"no fixed point after {cfg.max_iter} iterations "
            f"(last diff {diffs[-1]:.3e}, last ratio "
            f"{ratios[-1] if ratios else float('nan'):.3f})",
            report=report,
        )
    return current, report


def solve_westervelt(
    p0: SpectralField,
    p1: SpectralField,
    params: ModelParams,
    grid: TimeGrid,
    cfg: PicardConfig | None = None,
    *,
    solver="auto",
):
    """Fixed point of the pressure-form map: freeze q, solve for p.

    Returns (trajectory, report).  Raises DegeneracyError when an iterate's
    alpha = 1 - k q falls below the abort floor and NoConvergenceError when
    max_iter is exhausted; a mere band violation (threshold 1/(2|k|)) is
    reported, not raised.
    """
    if params.kind is not EquationKind.WESTERVELT_PRESSURE:
        raise ValueError(f"pressure-form solver got params of kind {params.kind}")
    return _fixed_point(
        p0,
        p1,
        params,
        grid,
        cfg,
        CoefficientPath.for_westervelt,
        "X",
        norms.xw_energy,
        solver,
    )


def solve_kuznetsov(
    psi0: SpectralField,
    psi1: SpectralField,
    params: ModelParams,
    grid: TimeGrid,
    cfg: PicardConfig | None = None,
    *,
    solver="auto",
):
    """Fixed point of the potential-form map: freeze phi, solve for psi.

    Handles both the Kuznetsov equation and the potential-form Westervelt
    equation (sigma = 0).  Returns (trajectory, report); error contract
    matches solve_westervelt with alpha = 1 - kappa phi_t.
    """
    if params.kind is EquationKind.WESTERVELT_PRESSURE:
        raise ValueError(f"potential-form solver got params of kind {params.kind}")
    return _fixed_point(
        psi0,
        psi1,
        params,
        grid,
        cfg,
        CoefficientPath.for_kuznetsov,
        "E",
        norms.xk_energy,
        solver,
    )


def residual(traj: Trajectory, params: ModelParams) -> float:
    """A posteriori L2(0,T;L2) residual of the discrete nonlinear equation.

    The quotient (1/alpha)(b Lap u_t + c^2 Lap u + nonlinear terms) is
    assembled pointwise on the interior grid with the trajectory's own state
    as the coefficient (no frozen data), projected onto the mode band, and
    subtracted from the stored u_tt; the node mismatches are integrated with
    the trapezoidal rule.  This is the residual of the projected (Galerkin)
    equations, the quantity the fixed point drives to zero; the unresolved
    pointwise tail of the quadratic terms is spatial truncation error and is
    measured by resolution studies instead.
    """
    dom = traj.domain
    lam = dom.eigenvalues
    u_vals = synthesize(dom, traj.u)
    ut_vals = synthesize(dom, traj.ut)
    bracket = synthesize(dom, -lam * (params.b * traj.ut + params.c2 * traj.u))
    if params.kind is EquationKind.WESTERVELT_PRESSURE:
        alpha = 1.0 - params.k * u_vals
        bracket = bracket + params.k * ut_vals**2
    else:
        alpha = 1.0 - params.kappa * ut_vals
        if params.sigma != 0.0:
            gu = synthesize_gradient(dom, traj.u)
            gut = synthesize_gradient(dom, traj.ut)
            dot = gu[0] * gut[0]
            for a in range(1, dom.dim):
                dot = dot + gu[a] * gut[a]
            bracket = bracket + params.sigma * dot
    res = traj.utt - analyze(dom, bracket / alpha)
    node_sq = np.square(res).reshape(res.shape[0], -1).sum(axis=1)
    dt = traj.timegrid.dt
    return float(np.sqrt(dt * (node_sq.sum() - 0.5 * (node_sq[0] + node_sq[-1]))))


def laplacian_history_residual(
    traj: Trajectory, path: CoefficientPath, params: ModelParams
) -> float:
    """Diagnostic: mismatch of Lap(psi) against its damped-history identity.

    The linearized potential-form equation gives (b d/dt + c^2) Lap psi = r
    with r = alpha psi_tt - sigma grad(phi).grad(psi_t).  For b > 0 this is a
    Volterra identity with exponential kernel, integrated here exactly against
    the piecewise-linear interpolant of r (robust for arbitrarily small b);
    for b = 0 it collapses to c^2 Lap psi = r.  Returns the largest L2
    mismatch over the stored nodes.
    """
    dom = traj.domain
    lam = dom.eigenvalues
    utt_vals = synthesize(dom, traj.utt)
    r_vals = path.alpha * utt_vals
    if path.gradphi_grid is not None and params.sigma != 0.0:
        gut = synthesize_gradient(dom, traj.ut)
        dot = path.gradphi_grid[0] * gut[0]
        for a in range(1, dom.dim):
            dot = dot + path.gradphi_grid[a] * gut[a]
        r_vals = r_vals - params.sigma * dot
    r = analyze(dom, r_vals).reshape(traj.u.shape[0], -1)
    lap = (-lam * traj.u).reshape(traj.u.shape[0], -1)

    b, c2 = params.b, params.c2
    if b == 0.0:
        mismatch = lap - r / c2
        return float(np.sqrt((mismatch**2).sum(axis=1)).max())

    dt = traj.timegrid.dt
    mu = c2 * dt / b
    decay = math.exp(-mu)
    w_right = -math.expm1(-mu) / c2                     # weight of r_{i+1}
    w_slope = (-math.expm1(-mu) - mu * decay) / (c2 * mu)  # weight of r_i - r_{i+1}
    worst = 0.0
    acc = lap[0].copy()
    for i in range(traj.timegrid.steps):
        acc = decay * acc + w_right * r[i + 1] + w_slope * (r[i] - r[i + 1])
        worst = max(worst, float(np.linalg.norm(lap[i + 1] - acc)))
    return worst
