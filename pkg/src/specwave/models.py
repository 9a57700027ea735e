"""Equation catalog, parameter mappings, and non-degeneracy monitoring.

Three quadratic acoustic models are supported, all damped by a -b*Laplace(u_t)
term with sound diffusivity b >= 0:

  pressure form      p_tt - c^2 Lap p - b Lap p_t = (k/2) (p^2)_tt
  potential form     psi_tt - c^2 Lap psi - b Lap psi_t = (kappa/2) (psi_t^2)_t
  Kuznetsov          psi_tt - c^2 Lap psi - b Lap psi_t
                         = (1/2) (kappa psi_t^2 + sigma |grad psi|^2)_t

Each solve linearizes around a frozen state, producing the variable coefficient
alpha = 1 - k*q (pressure) or alpha = 1 - kappa*phi_t (potential forms).  The
equations stay uniformly non-degenerate while alpha remains inside a band
[alpha_lower, alpha_upper] around 1; the default band [1/2, 3/2] corresponds to
the sup-norm threshold 1/(2|k|) on the frozen state.  Band violations are
reported, not fatal; only alpha falling below a hard abort floor raises.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    Domain,
    GridField,
    SpectralField,
    analyze,
    synthesize,
    synthesize_gradient,
)

__all__ = [
    "EquationKind",
    "ModelParams",
    "DegeneracyReport",
    "DegeneracyError",
    "CoefficientSnapshot",
    "physical_to_westervelt",
    "physical_to_potential",
    "alpha_of",
    "check_nondegeneracy",
    "initial_acceleration",
]


class EquationKind(enum.Enum):
    WESTERVELT_PRESSURE = "westervelt"
    WESTERVELT_POTENTIAL = "westervelt_potential"
    KUZNETSOV = "kuznetsov"


class DegeneracyError(RuntimeError):
    """The coefficient alpha left the hard abort floor (data too large)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ModelParams:
    """Physical and run parameters of one model instance.

    k is the pressure-form nonlinearity; kappa/sigma drive the potential
    forms.  alpha_lower/alpha_upper delimit the reported non-degeneracy band,
    alpha_abort is the hard floor below which solves abort.
    """

    kind: EquationKind
    b: float
    c2: float
    T: float
    k: float = 0.0
    kappa: float = 0.0
    sigma: float = 0.0
    alpha_lower: float = 0.5
    alpha_upper: float = 1.5
    alpha_abort: float = 0.05

    def __post_init__(self):
        if self.b < 0.0:
            raise ValueError(f"sound diffusivity b must be >= 0, got {self.b}")
        if self.c2 <= 0.0:
            raise ValueError(f"c2 must be positive, got {self.c2}")
        if self.T <= 0.0:
            raise ValueError(f"final time T must be positive, got {self.T}")
        if not 0.0 < self.alpha_lower < 1.0 < self.alpha_upper:
            raise ValueError(
                "need 0 < alpha_lower < 1 < alpha_upper, got "
                f"[{self.alpha_lower}, {self.alpha_upper}]"
            )
        if not 0.0 < self.alpha_abort <= self.alpha_lower:
            raise ValueError("alpha_abort must lie in (0, alpha_lower]")

    @property
    def alpha_coefficient(self) -> float:
        """Coefficient multiplying the frozen state inside alpha = 1 - coef*u."""
        if self.kind is EquationKind.WESTERVELT_PRESSURE:
            return self.k
        return self.kappa

    def with_b(self, b: float) -> "ModelParams":
        return ModelParams(
            kind=self.kind,
            b=b,
            c2=self.c2,
            T=self.T,
            k=self.k,
            kappa=self.kappa,
            sigma=self.sigma,
            alpha_lower=self.alpha_lower,
            alpha_upper=self.alpha_upper,
            alpha_abort=self.alpha_abort,
        )


@dataclass(frozen=True)
class DegeneracyReport:
    """Extrema of alpha over a coefficient path and the band verdict."""

    min_alpha: float
    max_alpha: float
    first_violation_time: float | None
    violated: bool


@dataclass(frozen=True)
class CoefficientSnapshot:
    """Frozen linearization data at a single time instant.

    qt is the time derivative of the frozen state (pressure form); phi is the
    frozen potential whose gradient multiplies grad(u_t) (potential forms).
    Either may be None when the corresponding term is absent.
    """

    alpha: GridField
    qt: SpectralField | None = None
    phi: SpectralField | None = None


def physical_to_westervelt(B_over_A: float, rho: float, c: float) -> float:
    """Pressure-form nonlinearity k from the B/A ratio, density and speed.

    Matches the right-hand side (1/(rho c^2))(B/2A + 1)(p^2)_tt against
    (k/2)(p^2)_tt, giving k = (2/(rho c^2))(B/2A + 1).
    """
    if rho <= 0.0:
        raise ValueError(f"density must be positive, got {rho}")
    if c <= 0.0:
        raise ValueError(f"speed of sound must be positive, got {c}")
    return (2.0 / (rho * c * c)) * (B_over_A / 2.0 + 1.0)


def physical_to_potential(B_over_A: float, c: float, kind: EquationKind):
    """(kappa, sigma) for the potential forms from the B/A ratio and speed.

    Potential-form Westervelt keeps only the psi_t^2 nonlinearity:
    kappa = (2/c^2)(B/2A + 1), sigma = 0.  Kuznetsov matches
    ((1/c^2)(B/2A) psi_t^2 + |grad psi|^2)_t, giving kappa = (B/A)/c^2 and
    sigma = 2.
    """
    if c <= 0.0:
        raise ValueError(f"speed of sound must be positive, got {c}")
    if kind is EquationKind.WESTERVELT_POTENTIAL:
        return (2.0 / (c * c)) * (B_over_A / 2.0 + 1.0), 0.0
    if kind is EquationKind.KUZNETSOV:
        return B_over_A / (c * c), 2.0
    raise ValueError(f"no potential mapping for {kind}")


def alpha_of(state_rate: SpectralField, params: ModelParams) -> GridField:
    """Grid samples of alpha = 1 - coef * u for the frozen state u."""
    coef = params.alpha_coefficient
    values = 1.0 - coef * synthesize(state_rate.domain, state_rate.coeffs)
    return GridField(state_rate.domain, values)


def check_nondegeneracy(alpha_path, params: ModelParams, times=None) -> DegeneracyReport:
    """Extrema of alpha over all times and grid nodes, with the band verdict.

    alpha_path is a sequence of GridFields or a stacked array with one leading
    time axis.  times, when given, labels the entries; otherwise the entry
    index is used for first_violation_time.
    """
    if isinstance(alpha_path, np.ndarray):
        stacked = alpha_path
    else:
        fields = list(alpha_path)
        if not fields:
            raise ValueError("alpha path must be nonempty")
        stacked = np.stack([g.values for g in fields])
    if stacked.size == 0:
        raise ValueError("alpha path must be nonempty")
    flat = stacked.reshape(stacked.shape[0], -1)
    lo = flat.min(axis=1)
    hi = flat.max(axis=1)
    bad = (lo < params.alpha_lower) | (hi > params.alpha_upper)
    violated = bool(bad.any())
    first = None
    if violated:
        idx = int(np.argmax(bad))
        first = float(times[idx]) if times is not None else float(idx)
    return DegeneracyReport(
        min_alpha=float(lo.min()),
        max_alpha=float(hi.max()),
        first_violation_time=first,
        violated=violated,
    )


def initial_acceleration(
    u0: SpectralField,
    u1: SpectralField,
    params: ModelParams,
    data: CoefficientSnapshot,
) -> SpectralField:
    """Initial second time derivative forced by the linearized equation at t=0.

    Pressure form: u_tt(0) = alpha(0)^{-1} (b Lap u1 + c^2 Lap u0 + k qt(0) u1).
    Potential forms: u_tt(0) = alpha(0)^{-1} (b Lap u1 + c^2 Lap u0
    + sigma grad(phi(0)) . grad(u1)).  The quotient is evaluated pointwise on
    the interior grid and projected back onto the sine band.
    """
    dom = u0.domain
    alpha = data.alpha.values
    if float(alpha.min()) < params.alpha_abort:
        raise DegeneracyError(
            f"alpha(0) reaches {alpha.min():.3g}, below the abort floor "
            f"{params.alpha_abort}"
        )
    lam = dom.eigenvalues
    bracket = synthesize(
        dom, -lam * (params.b * u1.coeffs + params.c2 * u0.coeffs)
    )
    if params.kind is EquationKind.WESTERVELT_PRESSURE:
        if params.k != 0.0 and data.qt is not None:
            bracket = bracket + params.k * synthesize(dom, data.qt.coeffs) * synthesize(
                dom, u1.coeffs
            )
    else:
        if params.sigma != 0.0 and data.phi is not None:
            gphi = synthesize_gradient(dom, data.phi.coeffs)
            gu1 = synthesize_gradient(dom, u1.coeffs)
            dot = gphi[0] * gu1[0]
            for a in range(1, dom.dim):
                dot = dot + gphi[a] * gu1[a]
            bracket = bracket + params.sigma * dot
    return SpectralField(dom, analyze(dom, bracket / alpha))
