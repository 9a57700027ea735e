"""Energy functionals, trajectory norms, and log-log rate fitting.

All spatial norms are computed spectrally: the order-s seminorm of a field is
the eigenvalue-weighted coefficient sum

    |f|_s^2 = sum_j lam_j^s xi_j^2  =  ||(-Lap)^{s/2} f||_{L2}^2 .

Time suprema are maxima over the stored nodes and time integrals use the
composite trapezoidal rule, so sup-type norms carry an O(dt) sampling bias and
integral-type norms an O(dt^2) one; acceptance tolerances account for both.

The two headline norms are the wave-equation energy norm

    ||u||_E^2 = sup_t ||u_t||^2 + sup_t ||grad u||^2

and the stronger norm

    ||u||_X^2 = ||u_tt||_{L2L2}^2 + ||grad u_t||_{LinfL2}^2 + ||Lap u||_{LinfL2}^2 ,

in which the convergence rate of the vanishing-diffusivity limit degrades from
O(b) to O(sqrt(b)).  The per-term breakdowns of the higher-order energy
functionals expose the b-weighted terms whose sqrt(b) scaling drives that
degradation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralField
from .timeloop import Trajectory

__all__ = [
    "NormKind",
    "RateTable",
    "OPERATOR_ORDERS",
    "sobolev_seminorm",
    "e_norm",
    "x_norm",
    "xw_energy",
    "xk_energy",
    "traj_diff_norm",
    "fit_rate",
]

# Spatial operators expressible as eigenvalue weights lam^order on squared
# coefficients.
OPERATOR_ORDERS = {
    "identity": 0,
    "grad": 1,
    "lap": 2,
    "gradlap": 3,
    "bilap": 4,
}


@dataclass(frozen=True)
class NormKind:
    """A trajectory norm selector.

    tag is one of "E", "X", "XW", "XK", "L2L2", "LinfL2"; the last two apply
    the named spatial operator to the trajectory's u component.
    """

    tag: str
    operator: str = "identity"

    def __post_init__(self):
        if self.tag not in ("E", "X", "XW", "XK", "L2L2", "LinfL2"):
            raise ValueError(f"unknown norm tag {self.tag!r}")
        if self.operator not in OPERATOR_ORDERS:
            raise ValueError(f"unknown operator {self.operator!r}")


def _coerce_kind(kind) -> NormKind:
    if isinstance(kind, NormKind):
        return kind
    return NormKind(str(kind))


def sobolev_seminorm(f: SpectralField, order: int) -> float:
    """sqrt(sum_j lam_j^order xi_j^2) for order in 0..4."""
    if order not in (0, 1, 2, 3, 4):
        raise ValueError(f"order must be in 0..4, got {order}")
    lam = f.domain.eigenvalues
    return float(np.sqrt(np.sum(lam**order * f.coeffs**2)))


def _series_sq(domain, arr, order):
    """Per-node squared seminorms of a stacked coefficient array."""
    lam = domain.eigenvalues
    weighted = arr * arr if order == 0 else (lam**order) * (arr * arr)
    return weighted.reshape(arr.shape[0], -1).sum(axis=1)


def _trapz(series, dt):
    return float(dt * (series.sum() - 0.5 * (series[0] + series[-1])))


def _third_derivative(traj: Trajectory) -> np.ndarray:
    """Second-order finite differences of the stored accelerations."""
    dt = traj.timegrid.dt
    utt = traj.utt
    out = np.empty_like(utt)
    out[1:-1] = (utt[2:] - utt[:-2]) / (2.0 * dt)
    if utt.shape[0] >= 3:
        out[0] = (-3.0 * utt[0] + 4.0 * utt[1] - utt[2]) / (2.0 * dt)
        out[-1] = (3.0 * utt[-1] - 4.0 * utt[-2] + utt[-3]) / (2.0 * dt)
    else:
        out[0] = out[-1] = (utt[-1] - utt[0]) / dt
    return out


def _e_sq(domain, timegrid, u, ut):
    return float(
        _series_sq(domain, ut, 0).max() + _series_sq(domain, u, 1).max()
    )


def _x_sq(domain, timegrid, u, ut, utt):
    dt = timegrid.dt
    return float(
        _trapz(_series_sq(domain, utt, 0), dt)
        + _series_sq(domain, ut, 1).max()
        + _series_sq(domain, u, 2).max()
    )


def e_norm(traj: Trajectory) -> float:
    """Wave-equation energy norm: discrete sup of ||u_t|| and ||grad u||."""
    return float(np.sqrt(_e_sq(traj.domain, traj.timegrid, traj.u, traj.ut)))


def x_norm(traj: Trajectory) -> float:
    """The stronger norm combining u_tt in L2L2 with grad u_t, Lap u in LinfL2."""
    return float(
        np.sqrt(_x_sq(traj.domain, traj.timegrid, traj.u, traj.ut, traj.utt))
    )


def xw_energy(traj: Trajectory, b: float) -> dict:
    """Squared per-term breakdown of the pressure-form energy functional.

    Terms: grad u_tt in L2L2, Lap u_t and grad Lap u in LinfL2, and the
    b-weighted grad Lap u_t in L2L2.  "total" is their sum; its square root is
    the ball-radius observable of the fixed-point construction.
    """
    dom, dt = traj.domain, traj.timegrid.dt
    terms = {
        "l2l2_grad_utt": _trapz(_series_sq(dom, traj.utt, 1), dt),
        "linf_lap_ut": float(_series_sq(dom, traj.ut, 2).max()),
        "linf_gradlap_u": float(_series_sq(dom, traj.u, 3).max()),
        "b_l2l2_gradlap_ut": b * _trapz(_series_sq(dom, traj.ut, 3), dt),
    }
    terms["total"] = sum(terms.values())
    return terms


def xk_energy(traj: Trajectory, b: float) -> dict:
    """Squared per-term breakdown of the potential-form energy functional.

    The third time derivative is reconstructed from the stored accelerations
    by centered differences.
    """
    dom, dt = traj.domain, traj.timegrid.dt
    uttt = _third_derivative(traj)
    terms = {
        "l2l2_grad_uttt": _trapz(_series_sq(dom, uttt, 1), dt),
        "linf_lap_utt": float(_series_sq(dom, traj.utt, 2).max()),
        "linf_gradlap_ut": float(_series_sq(dom, traj.ut, 3).max()),
        "linf_bilap_u": float(_series_sq(dom, traj.u, 4).max()),
        "b_l2l2_gradlap_utt": b * _trapz(_series_sq(dom, traj.utt, 3), dt),
        "b_l2l2_bilap_ut": b * _trapz(_series_sq(dom, traj.ut, 4), dt),
    }
    terms["total"] = sum(terms.values())
    return terms


def _eval_kind(kind: NormKind, domain, timegrid, u, ut, utt, b=0.0) -> float:
    if kind.tag == "E":
        return float(np.sqrt(_e_sq(domain, timegrid, u, ut)))
    if kind.tag == "X":
        return float(np.sqrt(_x_sq(domain, timegrid, u, ut, utt)))
    order = OPERATOR_ORDERS[kind.operator]
    series = _series_sq(domain, u, order)
    if kind.tag == "L2L2":
        return float(np.sqrt(_trapz(series, timegrid.dt)))
    if kind.tag == "LinfL2":
        return float(np.sqrt(series.max()))
    raise ValueError(f"norm {kind.tag!r} needs a full trajectory evaluator")


def trajectory_norm(traj: Trajectory, kind) -> float:
    """Evaluate a NormKind on a single trajectory."""
    kind = _coerce_kind(kind)
    if kind.tag == "XW":
        return float(np.sqrt(xw_energy(traj, 0.0)["total"]))
    if kind.tag == "XK":
        return float(np.sqrt(xk_energy(traj, 0.0)["total"]))
    return _eval_kind(kind, traj.domain, traj.timegrid, traj.u, traj.ut, traj.utt)


def traj_diff_norm(a: Trajectory, b: Trajectory, kind) -> float:
    """Norm of the stepwise difference of two trajectories."""
    kind = _coerce_kind(kind)
    if a.domain != b.domain:
        raise ValueError("trajectories live on different domains")
    if a.timegrid != b.timegrid:
        raise ValueError("trajectories use different time grids")
    du = a.u - b.u
    dut = a.ut - b.ut
    dutt = a.utt - b.utt
    if kind.tag in ("XW", "XK"):
        diff = Trajectory(a.domain, a.timegrid, du, dut, dutt)
        return trajectory_norm(diff, kind)
    return _eval_kind(kind, a.domain, a.timegrid, du, dut, dutt)


def fit_rate(points) -> tuple[float, float, float]:
    """Ordinary least squares of log(value) against log(b).

    Returns (slope, intercept, r_squared).  Needs at least three points with
    positive b and positive values.
    """
    pts = [(float(b), float(v)) for b, v in points]
    if len(pts) < 3:
        raise ValueError(f"rate fit needs at least 3 points, got {len(pts)}")
    if any(b <= 0.0 or v <= 0.0 for b, v in pts):
        raise ValueError("rate fit needs positive b values and positive norms")
    x = np.log([b for b, _ in pts])
    y = np.log([v for _, v in pts])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("rate fit needs distinct b values")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    residual = y - (slope * x + intercept)
    ss_res = float(np.sum(residual**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r_squared


@dataclass(frozen=True)
class RateTable:
    """Measured (b, value) rows for one norm and their fitted log-log line."""

    norm: str
    rows: tuple
    slope: float
    intercept: float
    r_squared: float

    @classmethod
    def fit(cls, norm: str, rows) -> "RateTable":
        rows = tuple((float(b), float(v)) for b, v in rows)
        bs = [b for b, _ in rows]
        if any(lo >= hi for hi, lo in zip(bs, bs[1:])):
            raise ValueError("rate rows must be sorted by b strictly descending")
        slope, intercept, r_squared = fit_rate(rows)
        return cls(norm, rows, slope, intercept, r_squared)
