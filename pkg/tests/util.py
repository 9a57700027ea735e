"""Shared oracles for the test suite, independent of the solver internals."""

import numpy as np
import scipy.linalg

from specwave import Domain, SpectralField, TimeGrid, Trajectory


def oscillator_exact(lam, b, c2, t, xi0, xi1):
    """Closed-form (xi, xi') of xi'' + b*lam*xi' + c2*lam*xi = 0 at time t.

    Uses the matrix exponential of the 2x2 companion system, an oracle fully
    independent of the time stepper.
    """
    companion = np.array([[0.0, 1.0], [-c2 * lam, -b * lam]])
    return scipy.linalg.expm(companion * t) @ np.array([xi0, xi1])


def oscillator_trajectory(domain, grid, mode, b, c2, xi0, xi1):
    """Exact single-mode Trajectory sampled at the grid nodes."""
    lam = float(domain.eigenvalues[tuple(int(m) - 1 for m in np.atleast_1d(mode))])
    idx = tuple(int(m) - 1 for m in np.atleast_1d(mode))
    S = grid.steps
    u = np.zeros((S + 1, *domain.modes))
    ut = np.zeros_like(u)
    utt = np.zeros_like(u)
    for i, t in enumerate(grid.times()):
        xi, xit = oscillator_exact(lam, b, c2, t, xi0, xi1)
        u[(i, *idx)] = xi
        ut[(i, *idx)] = xit
        utt[(i, *idx)] = -b * lam * xit - c2 * lam * xi
    return Trajectory(domain, grid, u, ut, utt)


def analytic_trajectory(domain, grid, coeff_fn, dcoeff_fn, d2coeff_fn):
    """Trajectory from callables t -> coefficient tensor (and derivatives)."""
    S = grid.steps
    u = np.stack([np.asarray(coeff_fn(t), dtype=float) for t in grid.times()])
    ut = np.stack([np.asarray(dcoeff_fn(t), dtype=float) for t in grid.times()])
    utt = np.stack([np.asarray(d2coeff_fn(t), dtype=float) for t in grid.times()])
    return Trajectory(domain, grid, u, ut, utt)


def gauss_points(L, n=400):
    """Gauss-Legendre nodes and weights mapped to (0, L)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) * L / 2.0, w * L / 2.0


def project_onto_basis_1d(domain, values_fn, n_quad=400):
    """Exact L2 projection of a 1D callable onto the sine band by quadrature."""
    (L,) = domain.lengths
    (n,) = domain.modes
    x, w = gauss_points(L, n_quad)
    vals = values_fn(x)
    j = np.arange(1, n + 1)
    basis = np.sqrt(2.0 / L) * np.sin(np.outer(j, x) * np.pi / L)
    return basis @ (w * vals)


def project_onto_basis_2d(domain, values_fn, n_quad=120):
    """Exact L2 projection of a 2D callable onto the sine band by quadrature."""
    L1, L2 = domain.lengths
    n1, n2 = domain.modes
    x1, w1 = gauss_points(L1, n_quad)
    x2, w2 = gauss_points(L2, n_quad)
    vals = values_fn(x1[:, None], x2[None, :])
    j1 = np.arange(1, n1 + 1)
    j2 = np.arange(1, n2 + 1)
    b1 = np.sqrt(2.0 / L1) * np.sin(np.outer(j1, x1) * np.pi / L1)
    b2 = np.sqrt(2.0 / L2) * np.sin(np.outer(j2, x2) * np.pi / L2)
    return np.einsum("ia,a,ab,b,jb->ij", b1, w1, vals, w2, b2)


def random_field(domain, rng, scale=1.0):
    return SpectralField(domain, scale * rng.standard_normal(domain.modes))
