"""Command-line front end: JSON configs in, CSV tables out.

One config file describes one experiment; the only flags are --config, --out
and --quiet.  All human-readable text goes to standard error, CSV files are
locale-independent with 17 significant digits, and exit codes are the machine
contract:

    0  success
    1  config error (message names the offending key)
    2  degeneracy (alpha left the non-degeneracy band or abort floor)
    3  fixed-point non-convergence
    4  sweep completed with flagged rows or an unreliable discretization floor
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import harness, models, norms, picard, spectral, timeloop
from .harness import DataSpec, SweepSpec, potential_pressure_check
from .models import DegeneracyError, EquationKind, ModelParams
from .picard import NoConvergenceError, PicardConfig
from .spectral import Domain, SpectralField
from .timeloop import TimeGrid

__all__ = ["main", "cmd_solve", "cmd_sweep", "cmd_verify", "ConfigError", "load_config"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DEGENERATE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_FLAGGED = 4


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _say(quiet, *parts):
    if not quiet:
        print(*parts, file=sys.stderr)


_TOP_KEYS = {
    "equation",
    "b",
    "b_values",
    "c2",
    "T",
    "k",
    "kappa",
    "sigma",
    "alpha_band",
    "alpha_abort",
    "domain",
    "initial",
    "time_steps",
    "picard",
    "norms",
    "check_floor",
}
_DOMAIN_KEYS = {"lengths", "modes", "grid_points"}
_INITIAL_KEYS = {"u0", "u1"}
_PICARD_KEYS = {"tol", "max_iter", "contraction_norm"}


def _reject_unknown(section, keys, allowed):
    for key in keys:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}'" + (f" in '{section}'" if section else ""))


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"missing required key '{key}'")
    return cfg[key]


def _number(cfg, key, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required key '{key}'")
        return default
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key '{key}' must be a number")
    return float(value)


def _mode_dict(raw, key):
    if not isinstance(raw, dict):
        raise ConfigError(f"key '{key}' must map mode indices to amplitudes")
    out = {}
    for mode, amp in raw.items():
        try:
            idx = tuple(int(part) for part in str(mode).split(","))
        except ValueError as exc:
            raise ConfigError(f"bad mode index '{mode}' in '{key}'") from exc
        if isinstance(amp, bool) or not isinstance(amp, (int, float)):
            raise ConfigError(f"amplitude for mode '{mode}' in '{key}' must be a number")
        out[idx] = float(amp)
    return out


def load_config(path, mode):
    """Parse and validate a run config; mode is 'solve' or 'sweep'."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown("", cfg, _TOP_KEYS)

    equation = _require(cfg, "equation")
    kinds = {kind.value: kind for kind in EquationKind}
    if equation not in kinds:
        raise ConfigError(
            f"key 'equation' must be one of {sorted(kinds)}, got '{equation}'"
        )
    kind = kinds[equation]

    c2 = _number(cfg, "c2", required=True)
    T = _number(cfg, "T", required=True)
    band = cfg.get("alpha_band", [0.5, 1.5])
    if not (isinstance(band, list) and len(band) == 2):
        raise ConfigError("key 'alpha_band' must be a [lower, upper] pair")
    alpha_abort = _number(cfg, "alpha_abort", default=0.05)

    if mode == "solve":
        b = _number(cfg, "b", required=True)
        b_values = None
    else:
        raw = _require(cfg, "b_values")
        if not isinstance(raw, list) or not raw:
            raise ConfigError("key 'b_values' must be a nonempty list of numbers")
        b_values = tuple(float(v) for v in raw)
        b = 0.0

    domain_cfg = _require(cfg, "domain")
    if not isinstance(domain_cfg, dict):
        raise ConfigError("key 'domain' must be an object")
    _reject_unknown("domain", domain_cfg, _DOMAIN_KEYS)
    lengths = _require(domain_cfg, "lengths")
    modes = _require(domain_cfg, "modes")
    try:
        domain = Domain(lengths, modes, domain_cfg.get("grid_points"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad 'domain': {exc}") from exc

    initial_cfg = _require(cfg, "initial")
    if not isinstance(initial_cfg, dict):
        raise ConfigError("key 'initial' must be an object")
    _reject_unknown("initial", initial_cfg, _INITIAL_KEYS)
    data = DataSpec(
        u0_modes=_mode_dict(initial_cfg.get("u0", {}), "u0"),
        u1_modes=_mode_dict(initial_cfg.get("u1", {}), "u1"),
    )
    try:
        data.fields(domain)
    except IndexError as exc:
        raise ConfigError(f"bad 'initial': {exc}") from exc

    steps = _require(cfg, "time_steps")
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        raise ConfigError("key 'time_steps' must be a positive integer")

    picard_cfg = cfg.get("picard", {})
    if not isinstance(picard_cfg, dict):
        raise ConfigError("key 'picard' must be an object")
    _reject_unknown("picard", picard_cfg, _PICARD_KEYS)
    try:
        pconf = PicardConfig(
            tol=float(picard_cfg.get("tol", 1e-10)),
            max_iter=int(picard_cfg.get("max_iter", 50)),
            contraction_norm=picard_cfg.get("contraction_norm"),
        )
    except ValueError as exc:
        raise ConfigError(f"bad 'picard': {exc}") from exc

    norm_list = cfg.get("norms", ["E", "X"])
    if not isinstance(norm_list, list) or not all(n in ("E", "X") for n in norm_list):
        raise ConfigError("key 'norms' must be a list drawn from ['E', 'X']")

    check_floor = cfg.get("check_floor", True)
    if not isinstance(check_floor, bool):
        raise ConfigError("key 'check_floor' must be a boolean")

    try:
        params = ModelParams(
            kind=kind,
            b=b,
            c2=c2,
            T=T,
            k=_number(cfg, "k", default=0.0),
            kappa=_number(cfg, "kappa", default=0.0),
            sigma=_number(cfg, "sigma", default=0.0),
            alpha_lower=float(band[0]),
            alpha_upper=float(band[1]),
            alpha_abort=alpha_abort,
        )
    except ValueError as exc:
        raise ConfigError(f"bad model parameters: {exc}") from exc

    return {
        "params": params,
        "b_values": b_values,
        "domain": domain,
        "data": data,
        "steps": steps,
        "picard": pconf,
        "norms": tuple(norm_list),
        "check_floor": check_floor,
    }


def _write_csv(path: Path, header: str, rows):
    lines = [header]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_trajectory_csv(path: Path, traj):
    lam = traj.domain.eigenvalues
    times = traj.times()
    rows = []
    for i, t in enumerate(times):
        u = traj.u[i]
        ut = traj.ut[i]
        l2 = math.sqrt(float(np.sum(u * u)))
        h1 = math.sqrt(float(np.sum(lam * u * u)))
        h2 = math.sqrt(float(np.sum(lam**2 * u * u)))
        e_partial = math.sqrt(float(np.sum(ut * ut)) + h1 * h1)
        rows.append([_fmt(t), _fmt(l2), _fmt(h1), _fmt(h2), _fmt(e_partial)])
    _write_csv(path, "t,l2,h1,h2,e_partial", rows)


def _write_picard_csv(path: Path, report):
    rows = []
    for i, diff in enumerate(report.diffs):
        ratio = _fmt(report.ratios[i - 1]) if i >= 1 else ""
        rows.append([str(i + 1), _fmt(diff), ratio])
    _write_csv(path, "iter,diff,ratio", rows)


def cmd_solve(config_path, out_dir=".", quiet=False) -> int:
    try:
        cfg = load_config(config_path, "solve")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    params = cfg["params"]
    grid = TimeGrid(params.T, cfg["steps"])
    u0, u1 = cfg["data"].fields(cfg["domain"])
    try:
        if params.kind is EquationKind.WESTERVELT_PRESSURE:
            traj, report = picard.solve_westervelt(u0, u1, params, grid, cfg["picard"])
        else:
            traj, report = picard.solve_kuznetsov(u0, u1, params, grid, cfg["picard"])
    except DegeneracyError as exc:
        print(f"degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NoConvergenceError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        if exc.report is not None:
            _write_picard_csv(out / "picard.csv", exc.report)
        return EXIT_NO_CONVERGENCE

    _write_trajectory_csv(out / "trajectory.csv", traj)
    _write_picard_csv(out / "picard.csv", report)
    _say(
        quiet,
        f"solved in {report.iterations} iteration(s); "
        f"alpha in [{report.degeneracy.min_alpha:.4g}, {report.degeneracy.max_alpha:.4g}]",
    )
    if report.degeneracy.violated:
        print(
            "degenerate: alpha left the band "
            f"[{params.alpha_lower}, {params.alpha_upper}] at "
            f"t={report.degeneracy.first_violation_time}",
            file=sys.stderr,
        )
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_sweep(config_path, out_dir=".", quiet=False) -> int:
    try:
        cfg = load_config(config_path, "sweep")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    try:
        spec = SweepSpec(
            params=cfg["params"],
            b_values=cfg["b_values"],
            data=cfg["data"],
            domain=cfg["domain"],
            steps=cfg["steps"],
            norms=cfg["norms"],
            picard=cfg["picard"],
            check_floor=cfg["check_floor"],
        )
    except ValueError as exc:
        print(f"config error: bad 'b_values': {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = harness.run_sweep(spec)
    except DegeneracyError as exc:
        print(f"degenerate reference solve: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NoConvergenceError as exc:
        print(f"reference solve did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    rows = []
    for row in result.rows:
        rows.append(
            [
                _fmt(row.b),
                _fmt(row.values.get("E", float("nan"))),
                _fmt(row.values.get("X", float("nan"))),
                str(row.iterations),
                "true" if (row.degenerate or row.error) else "false",
            ]
        )
    _write_csv(out / "sweep.csv", "b,e_diff,x_diff,iters,degenerate", rows)

    rate_rows = []
    for norm in spec.norms:
        table = result.rate_tables.get(norm)
        if table is None:
            rate_rows.append([norm, "nan", "nan", "nan"])
        else:
            rate_rows.append(
                [norm, _fmt(table.slope), _fmt(table.intercept), _fmt(table.r_squared)]
            )
    _write_csv(out / "rates.csv", "norm,slope,intercept,r2", rate_rows)

    for norm in spec.norms:
        table = result.rate_tables.get(norm)
        if table is not None:
            _say(
                quiet,
                f"{norm}-norm slope {table.slope:.4f} (r2={table.r_squared:.4f}), "
                f"floor {result.floor.get(norm, float('nan')):.3e}",
            )
    if result.unreliable:
        print(
            "warning: discretization floor within 10x of the smallest "
            "measured difference; absolute difference values may be "
            "resolution-limited (slopes are fitted on cancelling errors)",
            file=sys.stderr,
        )
    if any(row.error or row.degenerate for row in result.rows):
        print("sweep flagged: failed or degenerate rows", file=sys.stderr)
        return EXIT_FLAGGED
    return EXIT_OK


def _verify_checks():
    """The built-in oracle battery; yields (name, passed, detail)."""
    import scipy.linalg

    # Parseval on a fixed coefficient pattern.
    dom = Domain(np.pi, 16)
    coeffs = 1.0 / (1.0 + np.arange(16.0)) ** 2
    f = SpectralField(dom, coeffs)
    g = spectral.to_grid(f)
    quad = dom.quad_weight * float(np.sum(g.values**2))
    exact = float(np.sum(coeffs**2))
    err = abs(quad - exact) / exact
    yield "parseval", err <= 1e-12, f"relative error {err:.3e}"

    # Quadratic product projection against the closed form for sin^2:
    # (sin^2, w_j) = sqrt(2/pi) * (-4)/(j (j^2 - 4)) for odd j, else 0.
    f1 = SpectralField.from_sine_amplitudes(Domain(np.pi, 8), {1: 1.0})
    prod = spectral.multiply(f1, f1)
    j = np.arange(1, 9)
    odd = j % 2 == 1
    exact_coeffs = np.zeros(8)
    exact_coeffs[odd] = math.sqrt(2.0 / np.pi) * (-4.0) / (
        j[odd] * (j[odd] ** 2 - 4.0)
    )
    err = float(np.max(np.abs(prod.coeffs - exact_coeffs)))
    yield "product-projection", err <= 1e-12, f"max coefficient error {err:.3e}"

    # Standing wave: undamped linear solve vs cos(t) sin(x).
    dom = Domain(np.pi, 32)
    grid = TimeGrid(1.0, 1000)
    params = ModelParams(kind=EquationKind.WESTERVELT_PRESSURE, b=0.0, c2=1.0, T=1.0)
    u0 = SpectralField.from_sine_amplitudes(dom, {1: 1.0})
    u1 = SpectralField.zeros(dom)
    traj, _ = picard.solve_westervelt(u0, u1, params, grid)
    exact_u = np.cos(grid.times())[:, None] * u0.coeffs[None, :]
    exact_ut = -np.sin(grid.times())[:, None] * u0.coeffs[None, :]
    diff = timeloop.Trajectory(
        dom, grid, traj.u - exact_u, traj.ut - exact_ut, np.zeros_like(traj.u)
    )
    err = norms.e_norm(diff)
    yield "standing-wave", err <= 1e-5, f"energy-norm error {err:.3e}"

    # Damped single mode vs the closed-form 2x2 system exponential.
    dom = Domain(np.pi, 4)
    grid = TimeGrid(1.0, 2000)
    for b in (0.01, 0.1, 1.0):
        params = ModelParams(kind=EquationKind.WESTERVELT_PRESSURE, b=b, c2=1.0, T=1.0)
        u0 = SpectralField.from_sine_amplitudes(dom, {1: 1.0})
        u1 = SpectralField.zeros(dom)
        traj, _ = picard.solve_westervelt(u0, u1, params, grid)
        lam = spectral.eigenvalue(dom, 1)
        companion = np.array([[0.0, 1.0], [-params.c2 * lam, -b * lam]])
        state0 = np.array([u0.coeffs[0], 0.0])
        exact = scipy.linalg.expm(companion * grid.T) @ state0
        got = np.array([traj.u[-1, 0], traj.ut[-1, 0]])
        err = float(np.linalg.norm(got - exact) / np.linalg.norm(exact))
        yield f"damped-oscillator-b{b:g}", err <= 1e-6, f"relative error {err:.3e}"

    # Potential/pressure identity at reduced resolution.
    params = ModelParams(
        kind=EquationKind.WESTERVELT_POTENTIAL, b=0.01, c2=1.0, T=1.0, kappa=2.0
    )
    report = potential_pressure_check(
        params, DataSpec({1: 0.05}), Domain(np.pi, 8), 200
    )
    yield (
        "potential-pressure",
        report.distance <= 1e-4,
        f"energy-norm distance {report.distance:.3e}",
    )


def cmd_verify(quiet=False) -> int:
    ok = True
    for name, passed, detail in _verify_checks():
        ok = ok and passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="specwave",
        description=(
            "Spectral-Galerkin solves of damped quadratic acoustic wave "
            "equations and vanishing-diffusivity sweeps."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (("solve", True), ("sweep", True), ("verify", False)):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=".", help="output directory for CSV files")
        p.add_argument("--quiet", action="store_true", help="suppress progress text")
    args = parser.parse_args(argv)

    if args.command == "solve":
        return cmd_solve(args.config, args.out, args.quiet)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.out, args.quiet)
    return cmd_verify(args.quiet)


if __name__ == "__main__":
    sys.exit(main())
