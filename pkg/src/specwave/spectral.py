"""Sine eigenbasis of the Dirichlet Laplacian on a box, with exact quadratic products.

The basis on (0, L_1) x ... x (0, L_d) consists of tensor products of
L2-normalized sines,

    w_j(x) = prod_a sqrt(2/L_a) sin(j_a pi x_a / L_a),   1 <= j_a <= n_a,

which diagonalize -Laplace with eigenvalues lam_j = sum_a (j_a pi / L_a)^2 and
vanish together with their Laplacian on the boundary for every finite
expansion.  A field is stored by its coefficient tensor against this basis, so
Parseval holds exactly and Sobolev-type seminorms reduce to eigenvalue-weighted
coefficient sums.

Pointwise samples live on the interior grid x_i = i L/(m+1), i = 1..m, whose
discrete sine transform is exactly unitary for bands up to m (used for the
coefficient <-> grid round trip and for pointwise operations such as division
by a variable coefficient).

Quadratic products need more care: the product of two sine expansions is a
cosine polynomial of at most twice the band per axis, but its own sine series
has a slowly decaying tail, so sampling plus sine analysis is not an L2
projection.  multiply() and grad_dot() therefore sample on an internal
endpoint-including grid that resolves the doubled cosine band, take a discrete
cosine analysis (exact by discrete orthogonality) and apply the closed-form
cosine-to-sine projection

    (cos(l pi x/L), sin(j pi x/L))_{L2(0,L)} = (L/pi) * 2j/(j^2 - l^2)

for j + l odd (zero otherwise).  The result is the exact Galerkin projection of
the pointwise product, free of aliasing for any band-limited inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

__all__ = [
    "Domain",
    "SpectralField",
    "GridField",
    "eigenvalue",
    "to_grid",
    "from_grid",
    "laplacian",
    "multiply",
    "grad_dot",
    "evaluate",
    "synthesize",
    "analyze",
    "synthesize_gradient",
    "grid_norm",
]


def _as_tuple(value, dim=None):
    if np.isscalar(value):
        value = (value,)
    out = tuple(value)
    if dim is not None and len(out) != dim:
        raise ValueError(f"expected {dim} per-axis entries, got {len(out)}")
    return out


class Domain:
    """Tensor-product Dirichlet box with a fixed sine-mode cutoff per axis.

    Owns the eigenvalue table of -Laplace, the interior sampling grid used for
    pointwise operations (m_a >= ceil(3 n_a / 2) points per axis) and the
    internal transform matrices for exact quadratic products.
    """

    def __init__(self, lengths, modes, grid_points=None):
        lengths = tuple(float(L) for L in _as_tuple(lengths))
        modes = tuple(int(n) for n in _as_tuple(modes, len(lengths)))
        dim = len(lengths)
        if dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
        if any(L <= 0.0 for L in lengths):
            raise ValueError("axis lengths must be positive")
        if any(n < 1 for n in modes):
            raise ValueError("mode counts must be at least 1")
        minimal = tuple(math.ceil(3 * n / 2) for n in modes)
        if grid_points is None:
            grid_points = minimal
        grid_points = tuple(int(m) for m in _as_tuple(grid_points, dim))
        if any(m < mmin for m, mmin in zip(grid_points, minimal)):
            raise ValueError(
                f"grid_points {grid_points} below the dealiasing minimum {minimal}"
            )

        self.lengths = lengths
        self.modes = modes
        self.grid_points = grid_points
        self.dim = dim
        self.mode_count = int(np.prod(modes))

        # Eigenvalue tensor lam[j-1] = sum_a (j_a pi / L_a)^2, shape == modes.
        per_axis = [
            ((np.arange(1, n + 1) * np.pi / L) ** 2) for n, L in zip(modes, lengths)
        ]
        lam = np.zeros(modes)
        for axis, vals in enumerate(per_axis):
            shape = [1] * dim
            shape[axis] = modes[axis]
            lam = lam + vals.reshape(shape)
        lam.setflags(write=False)
        self.eigenvalues = lam

        # Interior grid x_i = i h, h = L/(m+1), and DST-based transforms.
        self.axis_points = []
        self._syn = []   # (m, n) sine synthesis at interior nodes
        self._ana = []   # (n, m) quadrature analysis, exact inverse on band <= m
        self._dsyn = []  # (m, n) synthesis of the axis derivative at interior nodes
        for L, n, m in zip(lengths, modes, grid_points):
            h = L / (m + 1)
            x = h * np.arange(1, m + 1)
            j = np.arange(1, n + 1)
            syn = math.sqrt(2.0 / L) * np.sin(np.outer(x, j) * np.pi / L)
            dsyn = (
                math.sqrt(2.0 / L)
                * (j * np.pi / L)[None, :]
                * np.cos(np.outer(x, j) * np.pi / L)
            )
            for arr in (x, syn, dsyn):
                arr.setflags(write=False)
            self.axis_points.append(x)
            self._syn.append(syn)
            ana = h * syn.T.copy()
            ana.setflags(write=False)
            self._ana.append(ana)
            self._dsyn.append(dsyn)

        # Quadrature weight of the interior grid (exact on bands <= m).
        self.quad_weight = float(
            np.prod([L / (m + 1) for L, m in zip(lengths, grid_points)])
        )

        # Internal product grid: M = 2n panels per axis resolve the doubled
        # cosine band of any quadratic product exactly.
        self._psyn = []    # (M+1, n) sine synthesis incl. endpoints
        self._pdsyn = []   # (M+1, n) derivative synthesis incl. endpoints
        self._pproj = []   # (n, M+1) exact pointwise-product -> sine projection
        for L, n in zip(lengths, modes):
            M = 2 * n
            y = (L / M) * np.arange(M + 1)
            j = np.arange(1, n + 1)
            psyn = math.sqrt(2.0 / L) * np.sin(np.outer(y, j) * np.pi / L)
            pdsyn = (
                math.sqrt(2.0 / L)
                * (j * np.pi / L)[None, :]
                * np.cos(np.outer(y, j) * np.pi / L)
            )
            # DCT-I analysis: trapezoid weights row-wise, mode normalization
            # gamma_l = L for l in {0, M} and L/2 otherwise.
            ll = np.arange(M + 1)
            cosmat = np.cos(np.outer(ll, y) * np.pi / L)  # (M+1 modes, M+1 nodes)
            w = np.full(M + 1, L / M)
            w[0] *= 0.5
            w[-1] *= 0.5
            gamma = np.full(M + 1, L / 2.0)
            gamma[0] = L
            gamma[-1] = L
            cana = (cosmat * w[None, :]) / gamma[:, None]
            # (cos(l.), w_j) = sqrt(2L)/pi * 2j/(j^2 - l^2) for j + l odd.
            jj = j[:, None].astype(float)
            lf = ll[None, :].astype(float)
            with np.errstate(divide="ignore", invalid="ignore"):
                proj = 2.0 * jj / (jj**2 - lf**2)
            proj[(j[:, None] + ll[None, :]) % 2 == 0] = 0.0
            proj *= math.sqrt(2.0 * L) / math.pi
            pproj = proj @ cana
            for arr in (psyn, pdsyn, pproj):
                arr.setflags(write=False)
            self._psyn.append(psyn)
            self._pdsyn.append(pdsyn)
            self._pproj.append(pproj)

    def _key(self):
        return (self.lengths, self.modes, self.grid_points)

    def __eq__(self, other):
        return isinstance(other, Domain) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return (
            f"Domain(lengths={self.lengths}, modes={self.modes}, "
            f"grid_points={self.grid_points})"
        )


def eigenvalue(domain: Domain, j) -> float:
    """Eigenvalue of -Laplace for the multi-index j (1-based per axis)."""
    j = _as_tuple(j, domain.dim)
    for axis, (ja, n) in enumerate(zip(j, domain.modes)):
        if not 1 <= int(ja) <= n:
            raise IndexError(
                f"mode index {ja} out of range [1, {n}] on axis {axis}"
            )
    return float(
        sum((int(ja) * np.pi / L) ** 2 for ja, L in zip(j, domain.lengths))
    )


def _tensor_apply(mats, arr, nbatch=0):
    """Apply one matrix per trailing axis: out = (x)_a mats[a] . arr."""
    for axis, mat in enumerate(mats):
        arr = np.moveaxis(np.moveaxis(arr, nbatch + axis, -1) @ mat.T, -1, nbatch + axis)
    return arr


def synthesize(domain: Domain, coeffs: Array) -> Array:
    """Point values on the interior grid; leading axes are batch axes."""
    nbatch = coeffs.ndim - domain.dim
    return _tensor_apply(domain._syn, np.asarray(coeffs, dtype=float), nbatch)


def analyze(domain: Domain, values: Array) -> Array:
    """L2 projection of interior-grid values onto the sine band (inverse of
    synthesize for bands <= m); leading axes are batch axes."""
    nbatch = values.ndim - domain.dim
    return _tensor_apply(domain._ana, np.asarray(values, dtype=float), nbatch)


def synthesize_gradient(domain: Domain, coeffs: Array) -> list[Array]:
    """Per-axis partial derivative values on the interior grid."""
    coeffs = np.asarray(coeffs, dtype=float)
    nbatch = coeffs.ndim - domain.dim
    out = []
    for axis in range(domain.dim):
        mats = [
            domain._dsyn[a] if a == axis else domain._syn[a]
            for a in range(domain.dim)
        ]
        out.append(_tensor_apply(mats, coeffs, nbatch))
    return out


def grid_norm(domain: Domain, values: Array) -> float:
    """Quadrature L2 norm of interior-grid values (exact on bands <= m)."""
    return math.sqrt(domain.quad_weight * float(np.sum(np.square(values))))


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of a function against the orthonormal sine basis.

    Immutable; all operations return new fields.  Parseval: the L2 norm is the
    plain 2-norm of the coefficient tensor.
    """

    domain: Domain
    coeffs: Array

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != self.domain.modes:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match modes "
                f"{self.domain.modes}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, domain: Domain) -> "SpectralField":
        return cls(domain, np.zeros(domain.modes))

    @classmethod
    def from_sine_amplitudes(cls, domain: Domain, amplitudes) -> "SpectralField":
        """Build from raw sine amplitudes: sum_j a_j prod_a sin(j_a pi x/L_a).

        Keys are 1-based multi-indices (ints in 1D); values are the physical
        amplitudes a_j, converted to orthonormal-basis coefficients via
        a * prod_a sqrt(L_a / 2).
        """
        scale = math.sqrt(float(np.prod(domain.lengths)) / 2.0**domain.dim)
        coeffs = np.zeros(domain.modes)
        for j, amp in amplitudes.items():
            j = _as_tuple(j, domain.dim)
            idx = tuple(int(ja) - 1 for ja in j)
            for axis, i in enumerate(idx):
                if not 0 <= i < domain.modes[axis]:
                    raise IndexError(f"mode {j} outside the cutoff {domain.modes}")
            coeffs[idx] = float(amp) * scale
        return cls(domain, coeffs)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_domain(self, other)
        return SpectralField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_domain(self, other)
        return SpectralField(self.domain, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.domain, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.domain, -self.coeffs)


@dataclass(frozen=True)
class GridField:
    """Point values on the interior tensor grid of the domain."""

    domain: Domain
    values: Array

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.domain.grid_points:
            raise ValueError(
                f"value shape {values.shape} does not match grid "
                f"{self.domain.grid_points}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def _check_same_domain(f, g):
    if f.domain != g.domain:
        raise ValueError("fields live on different domains")


def to_grid(f: SpectralField) -> GridField:
    """Synthesize the field on the interior grid."""
    return GridField(f.domain, synthesize(f.domain, f.coeffs))


def from_grid(g: GridField) -> SpectralField:
    """Project interior-grid values back onto the sine band."""
    return SpectralField(g.domain, analyze(g.domain, g.values))


def laplacian(f: SpectralField) -> SpectralField:
    """Spectral Laplacian: coefficient j maps to -lam_j xi_j."""
    return SpectralField(f.domain, -f.domain.eigenvalues * f.coeffs)


def multiply(f: SpectralField, g: SpectralField) -> SpectralField:
    """Exact Galerkin projection of the pointwise product f*g."""
    _check_same_domain(f, g)
    dom = f.domain
    vf = _tensor_apply(dom._psyn, f.coeffs)
    vg = _tensor_apply(dom._psyn, g.coeffs)
    return SpectralField(dom, _tensor_apply(dom._pproj, vf * vg))


def grad_dot(f: SpectralField, g: SpectralField) -> SpectralField:
    """Exact Galerkin projection of grad(f) . grad(g)."""
    _check_same_domain(f, g)
    dom = f.domain
    acc = None
    for axis in range(dom.dim):
        mats = [dom._pdsyn[a] if a == axis else dom._psyn[a] for a in range(dom.dim)]
        prod = _tensor_apply(mats, f.coeffs) * _tensor_apply(mats, g.coeffs)
        acc = prod if acc is None else acc + prod
    return SpectralField(dom, _tensor_apply(dom._pproj, acc))


def evaluate(f: SpectralField, axes_points) -> Array:
    """Synthesize the field at an arbitrary tensor grid (direct summation).

    axes_points is one 1-D coordinate array per axis; the result has shape
    (len(axes_points[0]), ..., len(axes_points[d-1])).
    """
    dom = f.domain
    axes_points = [np.atleast_1d(np.asarray(p, dtype=float)) for p in axes_points]
    if len(axes_points) != dom.dim:
        raise ValueError(f"expected {dom.dim} coordinate arrays")
    mats = []
    for x, L, n in zip(axes_points, dom.lengths, dom.modes):
        j = np.arange(1, n + 1)
        mats.append(math.sqrt(2.0 / L) * np.sin(np.outer(x, j) * np.pi / L))
    return _tensor_apply(mats, f.coeffs)
