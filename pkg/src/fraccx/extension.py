"""Half-cylinder realization of the fractional operator (the oracle).

A field u on the interval extends to w on the cylinder (0,L) x (0,Y)
solving ``div(y^(1-a) grad w) = 0`` with lateral Dirichlet walls, and its
weighted normal derivative at y=0 recovers the fractional Laplacian:

    (-Lap)^(a/2) u = -(1/kappa_a) lim_(y->0) y^(1-a) dw/dy.

Two independent constructions are provided:

* :func:`extend_spectral` assembles w mode by mode from the decaying
  profile (``w = sum a_j phi_j(x) psi(sqrt(lambda_j) y)``);
* :func:`extend_fd` solves the degenerate five-point scheme directly,
  with harmonic-mean face weights that keep the flux exact across the
  ``y^a`` boundary layer.

Agreement of ``neumann_trace(extend_fd(u))`` with the diagonal spectral
multiplier is the package's main operator cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import spsolve

from .errors import DomainError, IterationFailure
from .special import ExtensionProfile, FracParams, kappa_alpha, solve_profile
from .spectral import (
    DomainSpec,
    GridField,
    SpectralField,
    evaluate_on,
    synthesis_matrix,
)

__all__ = [
    "CylinderGrid",
    "ExtensionField",
    "make_cylinder_grid",
    "extend_spectral",
    "extend_fd",
    "extension_energy",
    "neumann_trace",
    "two_route_error",
    "crosscheck_report",
    "save_field_csv",
]


_PROFILE_CACHE: dict = {}


def cylinder_profile(alpha: float) -> ExtensionProfile:
    """Profile psi = phi_alpha, cached per order (pure, reusable)."""
    key = round(float(alpha), 12)
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = solve_profile(alpha)
    return _PROFILE_CACHE[key]


@dataclass
class CylinderGrid:
    """Tensor mesh on the truncated cylinder, graded toward the trace line.

    ``x_nodes`` includes both lateral walls; ``y_nodes[0] = 0`` is the
    trace line and ``y_nodes[-1]`` the truncation cap.  ``weight_exponent``
    is the power 1 - a of the degenerate weight.
    """

    base: DomainSpec
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    weight_exponent: float

    @property
    def alpha(self) -> float:
        return 1.0 - self.weight_exponent


@dataclass
class ExtensionField:
    grid: CylinderGrid
    values: np.ndarray  # shape (len(x_nodes), len(y_nodes))

    def trace(self) -> np.ndarray:
        """Values on the y=0 line, interior x nodes only."""
        return self.values[1:-1, 0]


def make_cylinder_grid(domain: DomainSpec, p: FracParams, nx: int, ny: int,
                       y_max: float | None = None,
                       grading: float | None = None) -> CylinderGrid:
    """Graded cylinder mesh with ``nx`` interior x nodes and ``ny`` y cells.

    The default height 8/sqrt(lambda_1) covers the decay length of the
    slowest mode (every mode decays like exp(-sqrt(lambda_j) y)); grading
    ``y_k = Y (k/ny)^g`` with g = max(2, 2/a) resolves the y^a layer.
    """
    if domain.kind != "interval":
        raise DomainError("cylinder grids are built over interval bases only")
    L = domain.lengths[0]
    lam1 = (math.pi / L) ** 2
    y_top = 8.0 / math.sqrt(lam1) if y_max is None else float(y_max)
    if y_top < 5.0 / math.sqrt(lam1):
        raise DomainError(
            f"y_max={y_top} is below the decay length 5/sqrt(lambda_1)"
            f"={5.0 / math.sqrt(lam1)}")
    g = max(2.0, 2.0 / p.alpha) if grading is None else float(grading)
    if g < 1.0:
        raise DomainError("grading exponent must be >= 1")
    x_nodes = np.linspace(0.0, L, nx + 2)
    y_nodes = y_top * (np.arange(ny + 1) / ny) ** g
    return CylinderGrid(base=domain, x_nodes=x_nodes, y_nodes=y_nodes,
                        weight_exponent=1.0 - p.alpha)


def extend_spectral(u: SpectralField, p: FracParams,
                    grid: CylinderGrid) -> ExtensionField:
    """Assemble the extension mode by mode from the decaying profile.

    Beyond the tabulated range the profile is continued by its exponential
    far field, so arbitrarily high modes are covered; the tabulation
    tail is below 1e-8 by construction.
    """
    if not math.isclose(grid.alpha, p.alpha, rel_tol=1e-12):
        raise DomainError("grid was built for a different fractional order")
    profile = cylinder_profile(p.alpha)
    lam_sqrt = np.sqrt(u.basis.eigenvalues)
    # psi(sqrt(lambda_j) y_k), evaluated in one flat batch
    s = np.outer(lam_sqrt, grid.y_nodes)
    psi = profile(s.ravel()).reshape(s.shape)
    phi_x = synthesis_matrix(u.basis, [grid.x_nodes])[0]
    values = phi_x @ (u.coeffs[:, None] * psi)
    values[0, :] = 0.0
    values[-1, :] = 0.0
    return ExtensionField(grid=grid, values=values)


def extend_fd(u: SpectralField, p: FracParams,
              grid: CylinderGrid) -> ExtensionField:
    """Solve the degenerate five-point scheme with the trace of u as datum.

    Finite-volume form: horizontal fluxes carry the exact cell integral of
    y^(1-a); vertical fluxes use the harmonic average of the weight over
    the face interval, 1 / int y^(a-1) dy, which is exact for the layer
    ``const + c y^a`` and well-defined on the face touching y = 0 for all
    a in (0, 2).  Homogeneous Dirichlet cap at the top (justified by the
    exponential decay), exact zeros on the lateral walls.
    """
    if not math.isclose(grid.alpha, p.alpha, rel_tol=1e-12):
        raise DomainError("grid was built for a different fractional order")
    a = p.alpha
    x = grid.x_nodes
    y = grid.y_nodes
    nx = x.size - 2
    ny = y.size - 1
    hx = x[1] - x[0]
    trace = evaluate_on(u, [x[1:-1]])

    # vertical transmissibilities on faces [y_k, y_(k+1)], k = 0..ny-1
    t_y = a / (y[1:] ** a - y[:-1] ** a)
    # cell integrals of y^(1-a) over control volumes around y_k, k = 1..ny-1
    ymid = 0.5 * (y[:-1] + y[1:])
    ex = 2.0 - a
    pow_mid = ymid**ex
    c_y = (pow_mid[1:] - pow_mid[:-1]) / ex

    n_unknown = nx * ny_int if (ny_int := ny - 1) else 0
    if n_unknown == 0:
        raise DomainError("cylinder grid needs at least 2 interior y layers")

    def idx(i, k):  # i = 0..nx-1 interior x, k = 0..ny_int-1 interior y
        return i * ny_int + k

    rows, cols, vals = [], [], []
    rhs = np.zeros(n_unknown)
    for k in range(ny_int):
        diag = -(c_y[k] * 2.0 / hx + hx * (t_y[k] + t_y[k + 1]))
        for i in range(nx):
            r = idx(i, k)
            rows.append(r); cols.append(r); vals.append(diag)
            if i > 0:
                rows.append(r); cols.append(idx(i - 1, k)); vals.append(c_y[k] / hx)
            if i < nx - 1:
                rows.append(r); cols.append(idx(i + 1, k)); vals.append(c_y[k] / hx)
            if k > 0:
                rows.append(r); cols.append(idx(i, k - 1)); vals.append(hx * t_y[k])
            else:
                rhs[r] -= hx * t_y[0] * trace[i]
            if k < ny_int - 1:
                rows.append(r); cols.append(idx(i, k + 1)); vals.append(hx * t_y[k + 1])
            # top cap contributes zero
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n_unknown, n_unknown))
    sol = spsolve(mat, rhs)
    resid = np.linalg.norm(mat @ sol - rhs)
    scale = np.linalg.norm(rhs)
    if scale > 0 and resid > 1e-8 * scale:
        raise IterationFailure("sparse solve of the extension scheme failed",
                               residual=resid / scale)

    values = np.zeros((nx + 2, ny + 1))
    values[1:-1, 0] = trace
    values[1:-1, 1:ny] = sol.reshape(nx, ny_int)
    return ExtensionField(grid=grid, values=values)


def extension_energy(w: ExtensionField, p: FracParams) -> float:
    """Quadrature of the weighted gradient energy int y^(1-a) |grad w|^2.

    Cell-centered difference quotients against the exact cell integral of
    the weight; the harmonic structure of the y^a boundary layer is then
    integrated with an O(1) per-cell constant only on the (tiny) first
    layer, which keeps the total error well below the identity tolerance.
    """
    a = p.alpha
    x, y = w.grid.x_nodes, w.grid.y_nodes
    hx = x[1] - x[0]
    dy = np.diff(y)
    v = w.values
    wx = (np.diff(v, axis=0)[:, :-1] + np.diff(v, axis=0)[:, 1:]) / (2.0 * hx)
    wy = (np.diff(v, axis=1)[:-1, :] + np.diff(v, axis=1)[1:, :]) / (2.0 * dy)
    ex = 2.0 - a
    w_cell = (y[1:] ** ex - y[:-1] ** ex) / ex
    return float(np.sum((wx**2 + wy**2) * (hx * w_cell)))


def neumann_trace(w: ExtensionField, p: FracParams,
                  layers: int = 3) -> GridField:
    """Weighted normal derivative at y=0, i.e. the operator applied to u.

    Fits ``w ~ w(x,0) + c(x) y^a + d(x) y^2`` on the first ``layers``
    off-boundary rows and returns ``-a c(x) / kappa_a`` on the interior x
    nodes: plain differencing would miss the fractional-order layer, while
    the fitted layer coefficient gives the exact weighted limit.  The y^2
    column captures the smooth correction that otherwise contaminates the
    fit when a is close to 2; it is dropped when nearly collinear with
    y^a on the fit rows.
    """
    y = w.grid.y_nodes
    if y.size < layers + 1:
        raise DomainError(f"need at least {layers} off-boundary layers")
    a = p.alpha
    yf = y[1:layers + 1]
    diffs = w.values[1:-1, 1:layers + 1] - w.values[1:-1, :1]

    col_a = yf**a
    col_2 = yf**2
    basis_cols = np.stack([col_a / np.linalg.norm(col_a),
                           col_2 / np.linalg.norm(col_2)], axis=1)
    if layers >= 2 and np.linalg.cond(basis_cols) < 1e6:
        coef, *_ = np.linalg.lstsq(basis_cols, diffs.T, rcond=None)
        c = coef[0] / np.linalg.norm(col_a)
        fitted = (basis_cols @ coef).T
    else:
        c = diffs @ col_a / float(np.sum(col_a**2))
        fitted = np.outer(c, col_a)
    fit_resid = np.linalg.norm(diffs - fitted)
    signal = np.linalg.norm(diffs)
    if signal > 0 and fit_resid > 0.2 * signal:
        raise IterationFailure(
            "near-boundary rows do not follow the y^a layer; grade the mesh "
            "harder or add y resolution", residual=fit_resid / signal)
    out = -a * c / kappa_alpha(p.alpha)
    return GridField(domain=w.grid.base, values=out)


def two_route_error(u: SpectralField, p: FracParams, grid: CylinderGrid) -> float:
    """Relative L2 gap between the FD-oracle route and the diagonal multiplier."""
    from .spectral import apply_fractional

    oracle = neumann_trace(extend_fd(u, p, grid), p).values
    direct = evaluate_on(apply_fractional(u, p), [grid.x_nodes[1:-1]])
    return float(np.linalg.norm(oracle - direct) / np.linalg.norm(direct))


def crosscheck_report(u: SpectralField, p: FracParams, levels) -> dict:
    """Two-route errors over (nx, ny) refinement levels with measured orders."""
    errors = []
    for nx, ny in levels:
        grid = make_cylinder_grid(u.basis.domain, p, nx, ny)
        errors.append(two_route_error(u, p, grid))
    orders = [
        math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)
    ]
    return {
        "levels": [list(Lv) for Lv in levels],
        "errors": errors,
        "orders": orders,
    }


def save_field_csv(w: ExtensionField, path, comment: str | None = None):
    """Write ``x, y, w`` rows over the cylinder mesh."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("x,y,w\n")
        for i, xv in enumerate(w.grid.x_nodes):
            for k, yv in enumerate(w.grid.y_nodes):
                fh.write(f"{xv:.17g},{yv:.17g},{w.values[i, k]:.17g}\n")
