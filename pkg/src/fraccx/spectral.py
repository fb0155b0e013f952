"""Dirichlet eigenbasis on intervals/rectangles and the diagonal calculus.

On a tensor-product domain the Dirichlet Laplacian has closed-form
eigenpairs (products of sines); the fractional power of order a acts
diagonally on that basis, multiplying the j-th coefficient by
``lambda_j^(a/2)``.  The basis is sampled on the interior equispaced
collocation grid of the type-I discrete sine transform, on which
analysis/synthesis round-trip exactly and the trapezoid weights integrate
products of basis functions exactly.

Mode ordering is lexicographic over axes (outer axis first) and stable
across runs, so coefficient files are reproducible.  Note that for
rectangles the lexicographic enumeration does not sort the eigenvalues.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dstn

from .errors import DomainError
from .special import FracParams

__all__ = [
    "DomainSpec",
    "Eigenbasis",
    "SpectralField",
    "GridField",
    "build_basis",
    "analyze",
    "synthesize",
    "apply_fractional",
    "solve_linear",
    "hs_norm",
    "lp_norm",
    "l2_inner",
    "synthesis_matrix",
    "evaluate_on",
    "multiplication_matrix",
    "save_coeffs_csv",
    "load_coeffs_csv",
    "save_grid_csv",
]


@dataclass(frozen=True)
class DomainSpec:
    """Interval (0, L) or rectangle (0, L1) x (0, L2).

    ``origin_offset`` shifts the coordinate origin used by star-shaped
    boundary integrals (the quadratic identity checks); it does not affect
    the eigenbasis.
    """

    kind: str
    lengths: tuple
    origin_offset: tuple = ()

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        lengths = tuple(float(x) for x in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        expected = 1 if self.kind == "interval" else 2
        if len(lengths) != expected:
            raise DomainError(
                f"{self.kind} needs {expected} length(s), got {len(lengths)}")
        if any(x <= 0 for x in lengths):
            raise DomainError(f"lengths must be positive, got {lengths}")
        off = tuple(float(x) for x in self.origin_offset) or (0.0,) * expected
        if len(off) != expected:
            raise DomainError("origin_offset arity must match the domain kind")
        object.__setattr__(self, "origin_offset", off)

    @property
    def ndim(self) -> int:
        return len(self.lengths)


@dataclass
class Eigenbasis:
    """Closed-form Dirichlet eigenpairs with their collocation grid.

    ``eigenvalues`` is flattened lexicographically over axes; ``axes``
    holds the interior collocation nodes per axis and ``steps`` the grid
    spacings, whose product is the (exact, for bilinear forms of modes)
    quadrature weight.
    """

    domain: DomainSpec
    modes_per_axis: tuple
    eigenvalues: np.ndarray = field(repr=False)
    axes: tuple = field(repr=False)
    steps: tuple = field(repr=False)

    @property
    def n_modes(self) -> int:
        return int(np.prod(self.modes_per_axis))

    @property
    def mode_shape(self) -> tuple:
        return tuple(self.modes_per_axis)

    def mode_indices(self):
        """Lexicographic (1-based) multi-indices matching the flattening."""
        grids = np.meshgrid(*[np.arange(1, m + 1) for m in self.modes_per_axis],
                            indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


@dataclass
class SpectralField:
    """Coefficients in the eigenbasis (flattened lexicographically)."""

    basis: Eigenbasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.basis.n_modes,):
            raise DomainError(
                f"coefficient array has shape {self.coeffs.shape}, "
                f"expected ({self.basis.n_modes},)")

    def copy(self) -> "SpectralField":
        return SpectralField(self.basis, self.coeffs.copy())


@dataclass
class GridField:
    """Pointwise values on an interior collocation grid of the domain."""

    domain: DomainSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.domain.ndim:
            raise DomainError(
                f"values must be {self.domain.ndim}-dimensional for {self.domain.kind}")

    @property
    def steps(self) -> tuple:
        return tuple(L / (n + 1) for L, n in zip(self.domain.lengths, self.values.shape))

    @property
    def axes(self) -> tuple:
        return tuple(
            (L / (n + 1)) * np.arange(1, n + 1)
            for L, n in zip(self.domain.lengths, self.values.shape)
        )


def build_basis(domain: DomainSpec, modes_per_axis: int) -> Eigenbasis:
    """Assemble the sine eigenbasis with ``modes_per_axis`` modes per axis."""
    if modes_per_axis < 1:
        raise DomainError("modes_per_axis must be >= 1")
    m = int(modes_per_axis)
    modes = (m,) * domain.ndim
    per_axis = [
        (np.arange(1, m + 1) * math.pi / L) ** 2 for L in domain.lengths
    ]
    if domain.ndim == 1:
        eigenvalues = per_axis[0]
    else:
        eigenvalues = (per_axis[0][:, None] + per_axis[1][None, :]).ravel()
    axes = tuple(
        (L / (m + 1)) * np.arange(1, m + 1) for L in domain.lengths
    )
    steps = tuple(L / (m + 1) for L in domain.lengths)
    return Eigenbasis(domain=domain, modes_per_axis=modes,
                      eigenvalues=eigenvalues, axes=axes, steps=steps)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def synthesize(u: SpectralField, grid_factor: int = 1) -> GridField:
    """Evaluate the expansion on the collocation grid.

    ``grid_factor`` > 1 zero-pads the coefficients and evaluates on the
    correspondingly refined grid (interior node count per axis becomes
    ``factor * (m + 1) - 1``), which is how nonlinear terms are dealiased.
    """
    basis = u.basis
    shape = tuple(grid_factor * (m + 1) - 1 for m in basis.modes_per_axis)
    a = u.coeffs.reshape(basis.mode_shape)
    padded = np.zeros(shape)
    padded[tuple(slice(0, m) for m in basis.mode_shape)] = a
    scale = math.prod(
        math.sqrt(2.0 / L) / 2.0 for L in basis.domain.lengths
    )
    values = scale * dstn(padded, type=1)
    return GridField(domain=basis.domain, values=values)


def analyze(g: GridField, basis: Eigenbasis) -> SpectralField:
    """Project grid values on the basis (exact for band-limited data).

    The grid may be any interior sine-collocation grid at least as fine as
    the mode count; coefficients beyond the basis resolution are discarded.
    """
    if g.domain != basis.domain:
        raise DomainError("grid and basis live on different domains")
    shape = g.values.shape
    for n, m in zip(shape, basis.modes_per_axis):
        if n < m:
            raise DomainError(
                f"grid with {n} nodes per axis cannot resolve {m} modes")
    scale = math.prod(
        (L / (n + 1)) * math.sqrt(2.0 / L) / 2.0
        for L, n in zip(basis.domain.lengths, shape)
    )
    full = scale * dstn(g.values, type=1)
    coeffs = full[tuple(slice(0, m) for m in basis.mode_shape)]
    return SpectralField(basis=basis, coeffs=coeffs.ravel())


# ---------------------------------------------------------------------------
# diagonal calculus
# ---------------------------------------------------------------------------

def _multiplier(basis: Eigenbasis, p: FracParams) -> np.ndarray:
    return basis.eigenvalues ** (p.alpha / 2.0)


def apply_fractional(u: SpectralField, p: FracParams) -> SpectralField:
    """Coefficient-wise action a_j -> lambda_j^(a/2) a_j."""
    return SpectralField(u.basis, _multiplier(u.basis, p) * u.coeffs)


def solve_linear(g: SpectralField, p: FracParams) -> SpectralField:
    """Invert the diagonal operator: a_j = g_j / lambda_j^(a/2)."""
    return SpectralField(g.basis, g.coeffs / _multiplier(g.basis, p))


def hs_norm(u: SpectralField, p: FracParams) -> float:
    """Spectral Sobolev norm (sum a_j^2 lambda_j^(a/2))^(1/2)."""
    return math.sqrt(float(np.sum(u.coeffs**2 * _multiplier(u.basis, p))))


def lp_norm(g: GridField, r: float) -> float:
    """Quadrature L^r norm on the collocation grid; r = inf gives sup."""
    if r == math.inf:
        return float(np.max(np.abs(g.values)))
    if r < 1:
        raise DomainError(f"lp_norm requires r >= 1, got {r}")
    w = math.prod(g.steps)
    return float((w * np.sum(np.abs(g.values) ** r)) ** (1.0 / r))


def l2_inner(g1: GridField, g2: GridField) -> float:
    """Quadrature L^2 inner product of two grid fields of equal shape."""
    if g1.values.shape != g2.values.shape:
        raise DomainError("grid fields have mismatched shapes")
    w = math.prod(g1.steps)
    return float(w * np.sum(g1.values * g2.values))


# ---------------------------------------------------------------------------
# off-grid evaluation and Galerkin projections
# ---------------------------------------------------------------------------

def synthesis_matrix(basis: Eigenbasis, axes_nodes) -> list:
    """Per-axis matrices Phi[i, j] = phi_(j+1)(x_i) for arbitrary nodes."""
    mats = []
    for L, m, nodes in zip(basis.domain.lengths, basis.modes_per_axis, axes_nodes):
        nodes = np.asarray(nodes, dtype=float)
        j = np.arange(1, m + 1)
        mats.append(math.sqrt(2.0 / L) * np.sin(np.outer(nodes, j) * math.pi / L))
    return mats


def evaluate_on(u: SpectralField, axes_nodes) -> np.ndarray:
    """Evaluate the expansion at arbitrary tensor-product nodes."""
    mats = synthesis_matrix(u.basis, axes_nodes)
    a = u.coeffs.reshape(u.basis.mode_shape)
    if len(mats) == 1:
        return mats[0] @ a
    return mats[0] @ a @ mats[1].T


def multiplication_matrix(potential: GridField, basis: Eigenbasis) -> np.ndarray:
    """Galerkin matrix P_jk = int V phi_j phi_k of multiplication by V.

    The potential is given on a (possibly refined) collocation grid; the
    quadrature uses that grid's trapezoid weights.
    """
    mats = synthesis_matrix(basis, potential.axes)
    if len(mats) == 1:
        phi = mats[0]
    else:
        phi = np.einsum("ij,kl->ikjl", mats[0], mats[1]).reshape(
            potential.values.size, basis.n_modes)
    w = math.prod(potential.steps)
    weighted = (w * potential.values.ravel())[:, None] * phi
    return phi.T @ weighted


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_coeffs_csv(u: SpectralField, path, comment: str | None = None):
    """Write ``mode_index, a_j`` rows (flattened lexicographic index)."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["mode_index", "a_j"])
        for idx, a in enumerate(u.coeffs):
            writer.writerow([idx, _fmt(a)])


def load_coeffs_csv(path, basis: Eigenbasis) -> SpectralField:
    coeffs = np.zeros(basis.n_modes)
    with open(path) as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].startswith("#") and r[0] != "mode_index"]
    for idx, a in rows:
        coeffs[int(idx)] = float(a)
    return SpectralField(basis=basis, coeffs=coeffs)


def save_grid_csv(g: GridField, path, comment: str | None = None):
    """Write ``x[, y], value`` rows over the collocation grid."""
    axes = g.axes
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        if g.domain.ndim == 1:
            writer.writerow(["x", "value"])
            for x, v in zip(axes[0], g.values):
                writer.writerow([_fmt(x), _fmt(v)])
        else:
            writer.writerow(["x", "y", "value"])
            for i, x in enumerate(axes[0]):
                for jj, y in enumerate(axes[1]):
                    writer.writerow([_fmt(x), _fmt(y), _fmt(g.values[i, jj])])
