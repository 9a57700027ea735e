"""Frozen-coefficient linearized solves as a Galerkin ODE system in time.

Projecting the linearized equation onto the sine basis (in which the mass
matrix is the identity) gives the first-order system

    u' = v,   v' = Op(t)(u, v),

where Op is the pointwise-assembled acceleration

    Op(u, v) = P_n[ (1/alpha) (b Lap v + c^2 Lap u + k q_t v) ]          (pressure)
    Op(u, v) = P_n[ (1/alpha) (b Lap v + c^2 Lap u + sigma grad(phi).grad v) ]
                                                                         (potential)

with P_n the interior-grid projection onto the sine band.  Time stepping is
the implicit trapezoidal rule with the coefficients frozen at the step
midpoint: A-stable, second order, free of b-dependent step restrictions, and
exactly energy-conserving for the undamped constant-coefficient case.  The
b Lap v term is always inside the implicit solve so stiffness from b*lam_max
never constrains dt across a diffusivity sweep.

The inner linear system is solved by dense LU for small mode counts and by
matrix-free preconditioned GMRES above the dense cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import models
from .models import CoefficientSnapshot, DegeneracyError, EquationKind, ModelParams
from .spectral import (
    Domain,
    GridField,
    SpectralField,
    analyze,
    synthesize,
    synthesize_gradient,
)

__all__ = [
    "TimeGrid",
    "CoefficientPath",
    "Trajectory",
    "InnerSolveError",
    "apply_linearized_operator",
    "step",
    "solve_linearized",
    "DENSE_MODE_LIMIT",
]

# Above this total mode count the per-step dense assembly dominates the LU
# solve itself, so the auto solver switches to matrix-free GMRES.
DENSE_MODE_LIMIT = 1024


class InnerSolveError(RuntimeError):
    """The inner implicit linear solve did not reach its residual tolerance."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, T] with S steps of size dt = T/S."""

    T: float
    steps: int

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError(f"final time must be positive, got {self.T}")
        if self.steps < 1:
            raise ValueError(f"need at least one step, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.T / self.steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.steps + 1)


class CoefficientPath:
    """Per-node grid samples of alpha and the frozen linearization data.

    Stores, for every time node, the grid values of alpha and either q_t
    (pressure form) or grad(phi) per axis (potential forms).  Values between
    nodes are linear interpolants, matching the second-order integrator.
    """

    def __init__(
        self,
        domain: Domain,
        timegrid: TimeGrid,
        alpha: np.ndarray,
        qt_grid: np.ndarray | None = None,
        gradphi_grid: tuple | None = None,
        qt_coeffs: np.ndarray | None = None,
        phi_coeffs: np.ndarray | None = None,
        constant: bool = False,
    ):
        S = timegrid.steps
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (S + 1, *domain.grid_points):
            raise ValueError(
                f"alpha path shape {alpha.shape} does not match "
                f"{(S + 1, *domain.grid_points)}"
            )
        self.domain = domain
        self.timegrid = timegrid
        self.alpha = alpha
        self.qt_grid = qt_grid
        self.gradphi_grid = gradphi_grid
        self.qt_coeffs = qt_coeffs
        self.phi_coeffs = phi_coeffs
        self.constant = constant

    @classmethod
    def constant_unit(cls, domain: Domain, timegrid: TimeGrid) -> "CoefficientPath":
        """alpha == 1 with no linearization terms: the plain damped wave."""
        alpha = np.ones((timegrid.steps + 1, *domain.grid_points))
        return cls(domain, timegrid, alpha, constant=True)

    @classmethod
    def for_westervelt(cls, traj: "Trajectory", params: ModelParams) -> "CoefficientPath":
        """Freeze a pressure-form iterate: alpha = 1 - k u, q_t from stored u_t."""
        dom = traj.domain
        alpha = 1.0 - params.k * synthesize(dom, traj.u)
        path = cls(
            dom,
            traj.timegrid,
            alpha,
            qt_grid=synthesize(dom, traj.ut),
            qt_coeffs=traj.ut,
        )
        path._require_above_floor(params)
        return path

    @classmethod
    def for_kuznetsov(cls, traj: "Trajectory", params: ModelParams) -> "CoefficientPath":
        """Freeze a potential-form iterate: alpha = 1 - kappa u_t, phi = u."""
        dom = traj.domain
        alpha = 1.0 - params.kappa * synthesize(dom, traj.ut)
        gradphi = tuple(synthesize_gradient(dom, traj.u))
        path = cls(
            dom,
            traj.timegrid,
            alpha,
            gradphi_grid=gradphi,
            phi_coeffs=traj.u,
        )
        path._require_above_floor(params)
        return path

    def _require_above_floor(self, params: ModelParams):
        amin = float(self.alpha.min())
        if amin < params.alpha_abort:
            report = models.check_nondegeneracy(
                self.alpha, params, times=self.timegrid.times()
            )
            raise DegeneracyError(
                f"alpha reaches {amin:.3g}, below the abort floor "
                f"{params.alpha_abort}",
                report=report,
            )

    def snapshot(self, i: int) -> CoefficientSnapshot:
        qt = None
        if self.qt_coeffs is not None:
            qt = SpectralField(self.domain, self.qt_coeffs[i])
        phi = None
        if self.phi_coeffs is not None:
            phi = SpectralField(self.domain, self.phi_coeffs[i])
        return CoefficientSnapshot(
            alpha=GridField(self.domain, self.alpha[i]), qt=qt, phi=phi
        )

    def interpolate(self, t: float):
        """(alpha, qt, gradphi) grid values at time t by linear interpolation."""
        tg = self.timegrid
        if t < -1e-12 * tg.T or t > tg.T * (1.0 + 1e-12):
            raise ValueError(f"time {t} outside [0, {tg.T}]")
        s = min(max(t, 0.0), tg.T) / tg.dt
        i = min(int(s), tg.steps - 1)
        theta = s - i

        def blend(arr):
            if arr is None:
                return None
            return (1.0 - theta) * arr[i] + theta * arr[i + 1]

        gphi = None
        if self.gradphi_grid is not None:
            gphi = tuple(blend(g) for g in self.gradphi_grid)
        return blend(self.alpha), blend(self.qt_grid), gphi


@dataclass
class Trajectory:
    """Time-indexed (u, u_t, u_tt) coefficient tensors on a uniform grid.

    The stored u_tt at every node is the linearized operator applied to the
    stored (u, u_t) there, and the node-0 entries equal the supplied data and
    the compatibility acceleration.
    """

    domain: Domain
    timegrid: TimeGrid
    u: np.ndarray    # (S+1, *modes)
    ut: np.ndarray
    utt: np.ndarray

    def __post_init__(self):
        shape = (self.timegrid.steps + 1, *self.domain.modes)
        for name in ("u", "ut", "utt"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)

    def times(self) -> np.ndarray:
        return self.timegrid.times()

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.domain, self.u[i])

    def field_t(self, i: int) -> SpectralField:
        return SpectralField(self.domain, self.ut[i])

    def field_tt(self, i: int) -> SpectralField:
        return SpectralField(self.domain, self.utt[i])


def _uses_grad_term(params: ModelParams) -> bool:
    return params.kind is not EquationKind.WESTERVELT_PRESSURE


def _bracket_values(domain, params, u_c, v_c, qt_vals, gphi_vals):
    """Grid values of b Lap v + c^2 Lap u (+ frozen-coefficient terms).

    u_c, v_c are coefficient tensors with optional leading batch axes;
    qt_vals/gphi_vals are matching grid-value arrays or None.
    """
    lam = domain.eigenvalues
    vals = synthesize(domain, -lam * (params.b * v_c + params.c2 * u_c))
    if qt_vals is not None and params.k != 0.0:
        vals = vals + params.k * qt_vals * synthesize(domain, v_c)
    if gphi_vals is not None and params.sigma != 0.0:
        gv = synthesize_gradient(domain, v_c)
        dot = gphi_vals[0] * gv[0]
        for a in range(1, domain.dim):
            dot = dot + gphi_vals[a] * gv[a]
        vals = vals + params.sigma * dot
    return vals


def apply_linearized_operator(
    u: SpectralField,
    u_t: SpectralField,
    t: float,
    path: CoefficientPath,
    params: ModelParams,
) -> SpectralField:
    """The acceleration implied by the linearized equation at time t."""
    dom = u.domain
    if dom != path.domain:
        raise ValueError("field and coefficient path live on different domains")
    alpha, qt_vals, gphi_vals = path.interpolate(t)
    if float(alpha.min()) < params.alpha_abort:
        raise DegeneracyError(
            f"alpha at t={t} reaches {alpha.min():.3g}, below the abort floor"
        )
    vals = _bracket_values(dom, params, u.coeffs, u_t.coeffs, qt_vals, gphi_vals)
    return SpectralField(dom, analyze(dom, vals / alpha))


class _DenseStepper:
    """Per-step assembly of the implicit midpoint/trapezoidal update."""

    def __init__(self, domain: Domain, params: ModelParams):
        self.domain = domain
        self.params = params
        self.N = domain.mode_count
        self.syn = reduce(np.kron, domain._syn)          # (Mg, N)
        self.ana = reduce(np.kron, domain._ana)          # (N, Mg)
        lam = domain.eigenvalues.ravel()
        self.syn_lam = self.syn * lam[None, :]
        self.deriv = None
        if _uses_grad_term(params) and params.sigma != 0.0:
            self.deriv = []
            for axis in range(domain.dim):
                mats = [
                    domain._dsyn[a] if a == axis else domain._syn[a]
                    for a in range(domain.dim)
                ]
                self.deriv.append(reduce(np.kron, mats))
        self.eye = np.eye(self.N)
        self._frozen = None

    def matrices(self, ia, qt, gphi):
        """A (from u) and B (from v) such that acceleration = A u + B v."""
        p = self.params
        colmat = ia[:, None] * self.syn_lam
        a_mat = -p.c2 * (self.ana @ colmat)
        w = -p.b * colmat
        if qt is not None and p.k != 0.0:
            w = w + (p.k * qt * ia)[:, None] * self.syn
        if gphi is not None and p.sigma != 0.0:
            for axis, dmat in enumerate(self.deriv):
                w = w + (p.sigma * gphi[axis] * ia)[:, None] * dmat
        b_mat = self.ana @ w
        return a_mat, b_mat

    def freeze(self, dt, ia, qt, gphi):
        """Pre-factor the step for a time-independent coefficient path."""
        a_mat, b_mat = self.matrices(ia, qt, gphi)
        ma = (0.25 * dt * dt) * a_mat
        mb = (0.5 * dt) * b_mat
        lu = scipy.linalg.lu_factor(self.eye - mb - ma)
        self._frozen = (lu, ma, mb, dt * a_mat)

    def advance_frozen(self, u, v):
        lu, ma, mb, dt_a = self._frozen
        rhs = v + mb @ v + ma @ v + dt_a @ u
        v_new = scipy.linalg.lu_solve(lu, rhs)
        return v_new

    def advance(self, u, v, dt, ia, qt, gphi):
        a_mat, b_mat = self.matrices(ia, qt, gphi)
        ma = (0.25 * dt * dt) * a_mat
        mb = (0.5 * dt) * b_mat
        rhs = v + mb @ v + ma @ v + dt * (a_mat @ u)
        return np.linalg.solve(self.eye - mb - ma, rhs)


class _KrylovStepper:
    """Matrix-free variant: GMRES with the constant-coefficient diagonal."""

    def __init__(self, domain: Domain, params: ModelParams, rtol=1e-12):
        self.domain = domain
        self.params = params
        self.N = domain.mode_count
        self.lam = domain.eigenvalues
        self.rtol = rtol

    def _apply_A(self, u_flat, ia):
        u_c = u_flat.reshape(self.domain.modes)
        vals = ia * synthesize(self.domain, -self.params.c2 * self.lam * u_c)
        return analyze(self.domain, vals).ravel()

    def _apply_B(self, v_flat, ia, qt, gphi):
        p = self.params
        v_c = v_flat.reshape(self.domain.modes)
        vals = synthesize(self.domain, -p.b * self.lam * v_c)
        if qt is not None and p.k != 0.0:
            vals = vals + p.k * qt * synthesize(self.domain, v_c)
        if gphi is not None and p.sigma != 0.0:
            gv = synthesize_gradient(self.domain, v_c)
            dot = gphi[0] * gv[0]
            for a in range(1, self.domain.dim):
                dot = dot + gphi[a] * gv[a]
            vals = vals + p.sigma * dot
        return analyze(self.domain, ia * vals).ravel()

    def advance(self, u, v, dt, ia, qt, gphi):
        p = self.params

        def matvec(x):
            return (
                x
                - (0.5 * dt) * self._apply_B(x, ia, qt, gphi)
                - (0.25 * dt * dt) * self._apply_A(x, ia)
            )

        op = scipy.sparse.linalg.LinearOperator((self.N, self.N), matvec=matvec)
        abar = 1.0 / float(np.mean(ia))
        diag = (
            1.0
            + (0.5 * dt) * p.b * self.lam.ravel() / abar
            + (0.25 * dt * dt) * p.c2 * self.lam.ravel() / abar
        )
        precond = scipy.sparse.linalg.LinearOperator(
            (self.N, self.N), matvec=lambda x: x / diag
        )
        rhs = (
            v
            + (0.5 * dt) * self._apply_B(v, ia, qt, gphi)
            + (0.25 * dt * dt) * self._apply_A(v, ia)
            + dt * self._apply_A(u, ia)
        )
        v_new, info = scipy.sparse.linalg.gmres(
            op, rhs, x0=v, rtol=self.rtol, atol=0.0, M=precond
        )
        if info != 0:
            raise InnerSolveError(f"GMRES stalled with info={info}")
        return v_new


def _make_stepper(domain, params, solver):
    if solver == "auto":
        solver = "dense" if domain.mode_count <= DENSE_MODE_LIMIT else "krylov"
    if solver == "dense":
        return _DenseStepper(domain, params)
    if solver == "krylov":
        return _KrylovStepper(domain, params)
    raise ValueError(f"unknown solver {solver!r}")


def _midpoint_data(path: CoefficientPath):
    """Flattened midpoint grid data for every step (linear interpolation)."""
    S = path.timegrid.steps
    alpha = path.alpha.reshape(S + 1, -1)
    ia_mid = 2.0 / (alpha[:-1] + alpha[1:])
    qt_mid = None
    if path.qt_grid is not None:
        qt = path.qt_grid.reshape(S + 1, -1)
        qt_mid = 0.5 * (qt[:-1] + qt[1:])
    gphi_mid = None
    if path.gradphi_grid is not None:
        gphi_mid = []
        for g in path.gradphi_grid:
            g = g.reshape(S + 1, -1)
            gphi_mid.append(0.5 * (g[:-1] + g[1:]))
    return ia_mid, qt_mid, gphi_mid


def step(state, t, dt, path: CoefficientPath, params: ModelParams, *, solver="dense"):
    """One implicit trapezoidal step from t to t+dt.

    state is the pair (u, u_t) of SpectralFields at time t; the return value
    is (u, u_t, u_tt) at t+dt, with coefficients frozen at the midpoint of the
    step.  When t and dt align with the path's nodes this reproduces exactly
    one step of solve_linearized.
    """
    u, v = state
    dom = u.domain
    alpha, qt, gphi = path.interpolate(t + 0.5 * dt)
    if float(alpha.min()) < params.alpha_abort:
        raise DegeneracyError(
            f"alpha at t={t + 0.5 * dt} reaches {alpha.min():.3g}, "
            "below the abort floor"
        )
    stepper = _make_stepper(dom, params, solver)
    ia = (1.0 / alpha).ravel()
    qt_flat = None if qt is None else qt.ravel()
    gphi_flat = None if gphi is None else [g.ravel() for g in gphi]
    v_new = stepper.advance(
        u.coeffs.ravel(), v.coeffs.ravel(), dt, ia, qt_flat, gphi_flat
    )
    u_new = u.coeffs.ravel() + 0.5 * dt * (v.coeffs.ravel() + v_new)
    u_f = SpectralField(dom, u_new.reshape(dom.modes))
    v_f = SpectralField(dom, v_new.reshape(dom.modes))
    a_f = apply_linearized_operator(u_f, v_f, t + dt, path, params)
    return u_f, v_f, a_f


def solve_linearized(
    u0: SpectralField,
    u1: SpectralField,
    path: CoefficientPath,
    params: ModelParams,
    grid: TimeGrid | None = None,
    *,
    solver="auto",
) -> Trajectory:
    """March the frozen-coefficient problem over the whole time slab.

    The trajectory starts from (u0, u1) and the compatibility acceleration at
    t=0; the energy bound of the discrete solution is uniform in b.
    """
    dom = u0.domain
    if dom != u1.domain or dom != path.domain:
        raise ValueError("data and coefficient path live on different domains")
    if grid is None:
        grid = path.timegrid
    elif grid != path.timegrid:
        raise ValueError("explicit time grid disagrees with the coefficient path")
    S = grid.steps
    dt = grid.dt

    amin = float(path.alpha.min())
    if amin < params.alpha_abort:
        raise DegeneracyError(
            f"alpha reaches {amin:.3g}, below the abort floor {params.alpha_abort}",
            report=models.check_nondegeneracy(path.alpha, params, times=grid.times()),
        )
    accel0 = models.initial_acceleration(u0, u1, params, path.snapshot(0))

    N = dom.mode_count
    u = np.empty((S + 1, N))
    v = np.empty((S + 1, N))
    u[0] = u0.coeffs.ravel()
    v[0] = u1.coeffs.ravel()

    stepper = _make_stepper(dom, params, solver)
    ia_mid, qt_mid, gphi_mid = _midpoint_data(path)

    if path.constant and isinstance(stepper, _DenseStepper):
        stepper.freeze(
            dt,
            ia_mid[0],
            None if qt_mid is None else qt_mid[0],
            None if gphi_mid is None else [g[0] for g in gphi_mid],
        )
        for i in range(S):
            v[i + 1] = stepper.advance_frozen(u[i], v[i])
            u[i + 1] = u[i] + 0.5 * dt * (v[i] + v[i + 1])
    else:
        for i in range(S):
            qt_i = None if qt_mid is None else qt_mid[i]
            gphi_i = None if gphi_mid is None else [g[i] for g in gphi_mid]
            v[i + 1] = stepper.advance(u[i], v[i], dt, ia_mid[i], qt_i, gphi_i)
            u[i + 1] = u[i] + 0.5 * dt * (v[i] + v[i + 1])

    # Node accelerations from the discrete equation itself (batched).
    u_t = u.reshape(S + 1, *dom.modes)
    v_t = v.reshape(S + 1, *dom.modes)
    vals = _bracket_values(dom, params, u_t, v_t, path.qt_grid, path.gradphi_grid)
    utt = analyze(dom, vals / path.alpha)
    utt[0] = accel0.coeffs

    return Trajectory(dom, grid, u_t, v_t, utt)
