"""Diffusivity sweeps, Cauchy checks, and the potential/pressure cross-check.

A sweep solves the inviscid reference (b = 0) once and every positive b member
once, all with identical mode cutoff, grid, and time step, so that
discretization error largely cancels in the differences and the measured
quantity isolates the b-perturbation.  Fitted log-log slopes of the E-norm and
X-norm differences are the observables: the energy-norm difference shrinks at
a linear rate while the stronger norm is only guaranteed a square-root rate.

The discretization floor is estimated by re-solving the reference with the
mode count doubled; a sweep whose smallest measured difference is within an
order of magnitude of that floor is flagged unreliable.  Per-b solver failures
are recorded on their rows and leave the rest of the sweep intact.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import norms, picard
from .models import (
    CoefficientSnapshot,
    DegeneracyError,
    EquationKind,
    ModelParams,
    alpha_of,
    initial_acceleration,
)
from .norms import RateTable
from .picard import NoConvergenceError, PicardConfig, PicardReport
from .spectral import Domain, SpectralField
from .timeloop import TimeGrid, Trajectory

__all__ = [
    "DataSpec",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "CauchyRow",
    "CauchyCheck",
    "PotentialPressureReport",
    "run_sweep",
    "cauchy_check",
    "potential_pressure_check",
    "embed_trajectory",
]


@dataclass(frozen=True)
class DataSpec:
    """Initial data as raw sine amplitudes keyed by 1-based multi-index."""

    u0_modes: dict
    u1_modes: dict = field(default_factory=dict)

    def fields(self, domain: Domain):
        return (
            SpectralField.from_sine_amplitudes(domain, self.u0_modes),
            SpectralField.from_sine_amplitudes(domain, self.u1_modes),
        )


@dataclass(frozen=True)
class SweepSpec:
    """One sweep experiment: model, data, resolution, and the b grid.

    params.b is ignored; the implicit b = 0 reference plus every entry of
    b_values (strictly positive, strictly decreasing) are each solved once on
    the shared grids.
    """

    params: ModelParams
    b_values: tuple
    data: DataSpec
    domain: Domain
    steps: int
    norms: tuple = ("E", "X")
    picard: PicardConfig = field(default_factory=PicardConfig)
    check_floor: bool = True
    keep_trajectories: bool = False
    solver: str = "auto"

    def __post_init__(self):
        bs = tuple(float(b) for b in self.b_values)
        object.__setattr__(self, "b_values", bs)
        if not bs:
            raise ValueError("b_values must be nonempty")
        if any(b <= 0.0 for b in bs):
            raise ValueError("b_values must be strictly positive")
        if any(lo >= hi for hi, lo in zip(bs, bs[1:])):
            raise ValueError("b_values must be strictly decreasing")

    def timegrid(self) -> TimeGrid:
        return TimeGrid(self.params.T, self.steps)


@dataclass
class SweepRow:
    """Measured differences against the inviscid reference for one b."""

    b: float
    values: dict
    iterations: int = 0
    degenerate: bool = False
    error: str | None = None


@dataclass
class SweepResult:
    rows: list
    rate_tables: dict
    reports: dict
    reference_report: PicardReport
    floor: dict
    unreliable: bool
    trajectories: dict | None = None
    reference: Trajectory | None = None


def _solve(params, u0, u1, grid, cfg, solver):
    if params.kind is EquationKind.WESTERVELT_PRESSURE:
        return picard.solve_westervelt(u0, u1, params, grid, cfg, solver=solver)
    return picard.solve_kuznetsov(u0, u1, params, grid, cfg, solver=solver)


def embed_trajectory(traj: Trajectory, domain: Domain) -> Trajectory:
    """Zero-pad a trajectory onto a domain with a larger mode cutoff."""
    if domain.lengths != traj.domain.lengths:
        raise ValueError("embedding requires identical box lengths")
    if any(m < n for m, n in zip(domain.modes, traj.domain.modes)):
        raise ValueError("target domain must not truncate modes")
    S = traj.timegrid.steps
    pad = [(0, 0)] + [
        (0, m - n) for m, n in zip(domain.modes, traj.domain.modes)
    ]

    def grow(arr):
        return np.pad(arr, pad)

    return Trajectory(domain, traj.timegrid, grow(traj.u), grow(traj.ut), grow(traj.utt))


def _doubled_domain(domain: Domain) -> Domain:
    return Domain(domain.lengths, tuple(2 * n for n in domain.modes))


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Solve the reference and every b member; fit the difference slopes."""
    grid = spec.timegrid()
    u0, u1 = spec.data.fields(spec.domain)
    ref_params = spec.params.with_b(0.0)
    reference, ref_report = _solve(ref_params, u0, u1, grid, spec.picard, spec.solver)

    rows: list[SweepRow] = []
    reports: dict[float, PicardReport] = {}
    trajectories: dict[float, Trajectory] | None = (
        {} if spec.keep_trajectories else None
    )
    for b in spec.b_values:
        params_b = spec.params.with_b(b)
        try:
            traj, report = _solve(params_b, u0, u1, grid, spec.picard, spec.solver)
        except (DegeneracyError, NoConvergenceError) as exc:
            rows.append(
                SweepRow(
                    b,
                    {norm: float("nan") for norm in spec.norms},
                    degenerate=isinstance(exc, DegeneracyError),
                    error=str(exc),
                )
            )
            continue
        reports[b] = report
        if trajectories is not None:
            trajectories[b] = traj
        values = {
            norm: norms.traj_diff_norm(traj, reference, norm) for norm in spec.norms
        }
        rows.append(
            SweepRow(
                b,
                values,
                iterations=report.iterations,
                degenerate=report.degeneracy.violated,
            )
        )

    rate_tables: dict[str, RateTable | None] = {}
    for norm in spec.norms:
        good = [(row.b, row.values[norm]) for row in rows if row.error is None]
        good = [(b, v) for b, v in good if v > 0.0]
        rate_tables[norm] = RateTable.fit(norm, good) if len(good) >= 3 else None

    floor: dict[str, float] = {}
    unreliable = False
    if spec.check_floor:
        fine_domain = _doubled_domain(spec.domain)
        fine_u0, fine_u1 = spec.data.fields(fine_domain)
        fine_ref, _ = _solve(
            ref_params, fine_u0, fine_u1, grid, spec.picard, spec.solver
        )
        embedded = embed_trajectory(reference, fine_domain)
        for norm in spec.norms:
            floor[norm] = norms.traj_diff_norm(embedded, fine_ref, norm)
            good = [
                row.values[norm]
                for row in rows
                if row.error is None and np.isfinite(row.values[norm])
            ]
            if not good or floor[norm] > min(good) / 10.0:
                unreliable = True

    return SweepResult(
        rows=rows,
        rate_tables=rate_tables,
        reports=reports,
        reference_report=ref_report,
        floor=floor,
        unreliable=unreliable,
        trajectories=trajectories,
        reference=reference if spec.keep_trajectories else None,
    )


@dataclass(frozen=True)
class CauchyRow:
    b_high: float
    b_low: float
    diff: float
    quotient: float


@dataclass
class CauchyCheck:
    rows: list
    max_quotient: float
    min_quotient: float


def cauchy_check(spec: SweepSpec, result: SweepResult | None = None) -> CauchyCheck:
    """Energy-norm differences of consecutive b pairs against |b - b'|.

    A bounded quotient column across pairs is the numerical signature of the
    uniform Cauchy-in-b estimate.  Trajectories retained in a prior
    SweepResult are reused; equal consecutive pairs are skipped.
    """
    grid = spec.timegrid()
    u0, u1 = spec.data.fields(spec.domain)
    solved: dict[float, Trajectory] = dict(result.trajectories or {}) if result else {}

    def trajectory(b):
        if b not in solved:
            traj, _ = _solve(spec.params.with_b(b), u0, u1, grid, spec.picard, spec.solver)
            solved[b] = traj
        return solved[b]

    rows: list[CauchyRow] = []
    for b_hi, b_lo in zip(spec.b_values, spec.b_values[1:]):
        if b_hi == b_lo:
            continue
        diff = norms.traj_diff_norm(trajectory(b_hi), trajectory(b_lo), "E")
        rows.append(CauchyRow(b_hi, b_lo, diff, diff / abs(b_hi - b_lo)))
    if not rows:
        raise ValueError("cauchy check needs at least two distinct b values")
    quotients = [row.quotient for row in rows]
    return CauchyCheck(rows=rows, max_quotient=max(quotients), min_quotient=min(quotients))


@dataclass
class PotentialPressureReport:
    """Energy-norm distance between d/dt(potential solve) and pressure solve."""

    distance: float
    refined_distance: float | None
    refinement_ratio: float | None
    potential_report: PicardReport
    pressure_report: PicardReport


def _time_derivative_trajectory(traj: Trajectory) -> Trajectory:
    """View (u_t, u_tt, d/dt u_tt) of a trajectory as a trajectory."""
    uttt = norms._third_derivative(traj)
    return Trajectory(traj.domain, traj.timegrid, traj.ut, traj.utt, uttt)


def potential_pressure_check(
    params: ModelParams,
    data: DataSpec,
    domain: Domain,
    steps: int,
    cfg: PicardConfig | None = None,
    *,
    refine: bool = False,
    solver: str = "auto",
) -> PotentialPressureReport:
    """Check that d/dt of the sigma = 0 potential solve matches the pressure solve.

    Differentiating the potential-form equation in time shows psi_t solves the
    pressure form with k = kappa and data (psi_1, psi_2), psi_2 being the
    compatibility acceleration.  The energy-norm distance between the two
    discrete solutions is reported, optionally together with its shrink factor
    under halving dt (second-order integrator: about 4x).
    """
    if params.kind is EquationKind.WESTERVELT_PRESSURE:
        raise ValueError("potential/pressure check starts from a potential form")
    if params.sigma != 0.0:
        raise ValueError(f"check requires sigma = 0, got {params.sigma}")

    pressure_params = dataclasses.replace(
        params, kind=EquationKind.WESTERVELT_PRESSURE, k=params.kappa, kappa=0.0
    )

    def distance_at(nsteps):
        grid = TimeGrid(params.T, nsteps)
        psi0, psi1 = data.fields(domain)
        pot_traj, pot_report = picard.solve_kuznetsov(
            psi0, psi1, params, grid, cfg, solver=solver
        )
        psi2 = initial_acceleration(
            psi0, psi1, params, CoefficientSnapshot(alpha_of(psi1, params), phi=psi0)
        )
        press_traj, press_report = picard.solve_westervelt(
            psi1, psi2, pressure_params, grid, cfg, solver=solver
        )
        dist = norms.traj_diff_norm(
            _time_derivative_trajectory(pot_traj), press_traj, "E"
        )
        return dist, pot_report, press_report

    distance, pot_report, press_report = distance_at(steps)
    refined = ratio = None
    if refine:
        refined, _, _ = distance_at(2 * steps)
        ratio = distance / refined if refined > 0.0 else float("inf")
    return PotentialPressureReport(
        distance=distance,
        refined_distance=refined,
        refinement_ratio=ratio,
        potential_report=pot_report,
        pressure_report=press_report,
    )
