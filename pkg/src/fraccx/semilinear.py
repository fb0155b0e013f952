"""Constructive solvers for the concave-convex problem.

The equation solved throughout is the spectral form

    (-Lap)^(a/2) u = f_lam(u),    f_lam(s) = lam s^q + s^p  (s > 0, else 0),

with 0 < q < 1 < p, on the Dirichlet eigenbasis of the domain (the
extension-side normalization constant is set to 1 by rescaling, so all
reported lam values are for this local form).  The workhorse routines:

* :func:`solve_concave` -- the unique positive solution of the pure
  sublinear problem by globally convergent fixed-point iteration; it
  scales exactly like lam^(1/(1-q)).
* :func:`minimal_solution` -- monotone iteration started from the concave
  subsolution (shifted inversion with sweep-adapted shift M), finished by
  damped Newton; divergence past ``sup_cap`` is the numerical
  nonexistence signal.
* :func:`second_solution` -- mountain-pass search (path maximizer descent
  in the fractional-Sobolev metric) followed by Newton, returning the
  higher-energy critical point distinct from the minimal one.
* :func:`linearized_eigen` / :func:`smallnorm_threshold` -- spectra of
  the linearization, and the small-norm uniqueness threshold built from
  the concave solution at lam = 1.

Nonlinear terms are always evaluated on a 2x oversampled grid to keep
aliasing out of the Galerkin right-hand sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, lu_factor, lu_solve

from .errors import (
    DomainError,
    InconsistencyError,
    IterationFailure,
    MountainPassError,
    SchemeError,
)
from .special import FracParams
from .spectral import (
    DomainSpec,
    Eigenbasis,
    GridField,
    SpectralField,
    analyze,
    build_basis,
    multiplication_matrix,
    synthesize,
)

__all__ = [
    "ProblemParams",
    "SolveReport",
    "nonlinearity",
    "primitive",
    "nonlinearity_prime",
    "residual_norm",
    "solve_concave",
    "newton_refine",
    "minimal_solution",
    "energy",
    "linearized_eigen",
    "smallnorm_threshold",
    "second_solution",
    "kappa_lambda_conversion",
]

# Potential clipping for the q-1 < 0 singularity where the solution
# touches zero (Dirichlet boundary): floor on s, ceiling on the potential.
POTENTIAL_FLOOR = 1e-8
POTENTIAL_CEILING = 1e8

DEALIAS_FACTOR = 2


@dataclass(frozen=True)
class ProblemParams:
    """Parameters (lam, q, p) of the concave-convex nonlinearity.

    ``allow_supercritical`` unlocks p at or above the trace-critical
    exponent (N+a)/(N-a) and lam = 0 (pure power); it exists only for the
    nonexistence experiments.
    """

    lam: float
    q_exp: float
    p_exp: float
    frac: FracParams
    domain: DomainSpec
    allow_supercritical: bool = False

    def __post_init__(self):
        if not (0.0 < self.q_exp < 1.0):
            raise DomainError(f"q must lie in (0, 1), got {self.q_exp}")
        if not (self.p_exp > 1.0):
            raise DomainError(f"p must exceed 1, got {self.p_exp}")
        if self.allow_supercritical:
            if self.lam < 0.0:
                raise DomainError(f"lambda must be nonnegative, got {self.lam}")
        elif not (self.lam > 0.0):
            raise DomainError(f"lambda must be positive, got {self.lam}")
        n, a = self.frac.n_dim, self.frac.alpha
        if n > a and not self.allow_supercritical:
            crit = (n + a) / (n - a)
            if self.p_exp >= crit:
                raise DomainError(
                    f"p={self.p_exp} is supercritical (critical exponent "
                    f"{crit}); set allow_supercritical for nonexistence runs")

    def with_lam(self, lam: float) -> "ProblemParams":
        return ProblemParams(lam, self.q_exp, self.p_exp, self.frac,
                             self.domain, self.allow_supercritical)


@dataclass
class SolveReport:
    solution: SpectralField
    residual_norm: float
    iterations: int
    converged: bool
    method_tag: str  # monotone | newton | mountain_pass
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# nonlinearity
# ---------------------------------------------------------------------------

def nonlinearity(s, pp: ProblemParams):
    """f_lam(s) = lam s^q + s^p for s > 0, and 0 for s <= 0."""
    s = np.asarray(s, dtype=float)
    pos = np.clip(s, 0.0, None)
    return pp.lam * pos**pp.q_exp + pos**pp.p_exp


def primitive(s, pp: ProblemParams):
    """F_lam(s) = lam/(q+1) s^(q+1) + 1/(p+1) s^(p+1) on the positive part."""
    s = np.asarray(s, dtype=float)
    pos = np.clip(s, 0.0, None)
    return (pp.lam / (pp.q_exp + 1.0) * pos ** (pp.q_exp + 1.0)
            + pos ** (pp.p_exp + 1.0) / (pp.p_exp + 1.0))


def nonlinearity_prime(s, pp: ProblemParams):
    """Clipped derivative of f_lam, finite at the boundary zeros.

    The q-term blows up like s^(q-1) where the solution vanishes; grid
    values are floored at POTENTIAL_FLOOR and the whole potential capped
    at POTENTIAL_CEILING, which keeps Galerkin matrices finite while the
    true singularity stays integrable.
    """
    s = np.asarray(s, dtype=float)
    pos = s > 0.0
    floored = np.maximum(s, POTENTIAL_FLOOR)
    vq = np.minimum(pp.lam * pp.q_exp * floored ** (pp.q_exp - 1.0),
                    POTENTIAL_CEILING)
    vp = pp.p_exp * np.clip(s, 0.0, None) ** (pp.p_exp - 1.0)
    return np.where(pos, vq + vp, 0.0)


def kappa_lambda_conversion(pp: ProblemParams) -> float:
    """Map the local-problem lam to the unnormalized extension problem.

    The stated conversion multiplies lam by kappa^(p(q-1)-1); its
    derivation is not reproduced here, so this is exposed as a labeled
    utility without any correctness claim, and nothing else depends on it.
    All values reported by this package are local-problem lam values.
    """
    from .special import kappa_alpha

    k = kappa_alpha(pp.frac.alpha)
    return pp.lam * k ** (pp.p_exp * (pp.q_exp - 1.0) - 1.0)


# ---------------------------------------------------------------------------
# residual plumbing
# ---------------------------------------------------------------------------

def _multiplier(basis: Eigenbasis, pp: ProblemParams) -> np.ndarray:
    return basis.eigenvalues ** (pp.frac.alpha / 2.0)


def _rhs_coeffs(coeffs: np.ndarray, basis: Eigenbasis, pp: ProblemParams,
                fn=nonlinearity) -> np.ndarray:
    fine = synthesize(SpectralField(basis, coeffs), DEALIAS_FACTOR)
    return analyze(GridField(basis.domain, fn(fine.values, pp)), basis).coeffs


def _residual(coeffs: np.ndarray, basis: Eigenbasis, pp: ProblemParams) -> np.ndarray:
    return _multiplier(basis, pp) * coeffs - _rhs_coeffs(coeffs, basis, pp)


def residual_norm(u: SpectralField, pp: ProblemParams) -> float:
    """L2 norm of (-Lap)^(a/2) u - f_lam(u) (coefficient-space residual)."""
    return float(np.linalg.norm(_residual(u.coeffs, u.basis, pp)))


def _fine_values(coeffs: np.ndarray, basis: Eigenbasis) -> np.ndarray:
    return synthesize(SpectralField(basis, coeffs), DEALIAS_FACTOR).values


def _fine_weight(basis: Eigenbasis) -> float:
    g = synthesize(SpectralField(basis, np.zeros(basis.n_modes)), DEALIAS_FACTOR)
    return math.prod(g.steps)


# ---------------------------------------------------------------------------
# the pure concave problem
# ---------------------------------------------------------------------------

def solve_concave(lam: float, pp: ProblemParams, tol: float = 1e-12,
                  basis: Eigenbasis | None = None, modes: int = 256,
                  max_iter: int = 5000) -> SolveReport:
    """Unique positive solution of ``(-Lap)^(a/2) v = lam v^q``.

    Fixed-point iteration v <- solve_linear(lam v^q) from v = 1; for a
    concave right-hand side the map is order preserving and a contraction
    toward the unique fixed point, so the start barely matters.  The
    converged solution obeys the exact scaling
    ``v_lam = lam^(1/(1-q)) v_1``.
    """
    if lam <= 0:
        raise DomainError(f"concave problem needs lam > 0, got {lam}")
    basis = basis or build_basis(pp.domain, modes)
    concave = pp.with_lam(lam) if lam != pp.lam else pp

    def f_conc(s, _pp):
        return lam * np.clip(s, 0.0, None) ** pp.q_exp

    mult = _multiplier(basis, pp)
    ones = GridField(basis.domain,
                     np.ones(_fine_values(np.zeros(basis.n_modes), basis).shape))
    a = analyze(ones, basis).coeffs
    res = math.inf
    for it in range(1, max_iter + 1):
        b = _rhs_coeffs(a, basis, concave, fn=f_conc)
        res = float(np.linalg.norm(mult * a - b))
        if res <= tol:
            break
        a = b / mult
    else:
        raise IterationFailure("concave fixed point did not converge",
                               residual=res, iterations=max_iter)
    u = SpectralField(basis, a)
    return SolveReport(solution=u, residual_norm=res, iterations=it,
                       converged=True, method_tag="monotone",
                       info={"sup_norm": float(np.max(np.abs(_fine_values(a, basis))))})


# ---------------------------------------------------------------------------
# Newton refinement
# ---------------------------------------------------------------------------

def newton_refine(u: SpectralField, pp: ProblemParams, tol: float = 1e-10,
                  max_iter: int = 60) -> SolveReport:
    """Damped Newton on the Galerkin system from the given start.

    The Jacobian is diag(lambda_j^(a/2)) minus the Galerkin projection of
    multiplication by the clipped f'.  Armijo backtracking guarantees the
    residual norm never increases between accepted steps.
    """
    basis = u.basis
    mult = _multiplier(basis, pp)
    a = u.coeffs.copy()
    history = []
    r = _residual(a, basis, pp)
    rn = float(np.linalg.norm(r))
    history.append(rn)
    for it in range(1, max_iter + 1):
        if rn <= tol:
            break
        fine = _fine_values(a, basis)
        pot = GridField(basis.domain, nonlinearity_prime(fine, pp))
        jac = np.diag(mult) - multiplication_matrix(pot, basis)
        try:
            delta = lu_solve(lu_factor(jac), -r)
        except Exception as exc:  # singular Jacobian near folds
            raise IterationFailure(f"Newton linear solve failed: {exc}",
                                   residual=rn, iterations=it)
        step = 1.0
        for _ in range(40):
            cand = a + step * delta
            r_new = _residual(cand, basis, pp)
            rn_new = float(np.linalg.norm(r_new))
            if rn_new < (1.0 - 1e-4 * step) * rn:
                break
            step *= 0.5
        else:
            raise IterationFailure("Newton line search stagnated",
                                   residual=rn, iterations=it)
        a, r, rn = cand, r_new, rn_new
        history.append(rn)
    converged = rn <= tol
    return SolveReport(solution=SpectralField(basis, a), residual_norm=rn,
                       iterations=len(history) - 1, converged=converged,
                       method_tag="newton",
                       info={"residual_history": history,
                             "sup_norm": float(np.max(np.abs(_fine_values(a, basis))))})


# ---------------------------------------------------------------------------
# minimal solution by monotone iteration
# ---------------------------------------------------------------------------

def minimal_solution(pp: ProblemParams, tol: float = 1e-10,
                     sup_cap: float = 1e3, basis: Eigenbasis | None = None,
                     modes: int = 256, max_sweeps: int = 500,
                     start: SpectralField | None = None) -> SolveReport:
    """Minimal positive solution, or a divergence report past ``sup_cap``.

    Monotone scheme u_(k+1) = ((-Lap)^(a/2) + M)^(-1) (f(u_k) + M u_k)
    started from the concave subsolution (or a supplied warm start, which
    must itself be a subsolution to preserve the increasing sweep).  The
    shift M = p sup^(p-1) + lam q max(sup, floor)^(q-1) is recomputed each
    sweep.  Once increments stall the iterate is handed to Newton; the
    result is the limit of the increasing scheme, i.e. the minimal
    solution.  Iterates escaping ``sup_cap`` yield ``converged=False``
    with ``info['tag'] = 'divergence'`` -- the numerical nonexistence
    signal used by the continuation layer.
    """
    basis = basis or build_basis(pp.domain, modes)
    mult = _multiplier(basis, pp)
    if start is None:
        # concave subsolution via the exact scaling law from lam = 1, so the
        # start keeps full relative accuracy even for tiny lam
        sub = solve_concave(1.0, pp, tol=min(tol, 1e-12), basis=basis)
        a = pp.lam ** (1.0 / (1.0 - pp.q_exp)) * sub.solution.coeffs
    else:
        if start.basis is not basis and start.basis.n_modes != basis.n_modes:
            raise DomainError("warm start lives on a different basis")
        a = start.coeffs.copy()

    fine = _fine_values(a, basis)
    min_increment = 0.0
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        sup = float(np.max(fine))
        if sup > sup_cap:
            return SolveReport(
                solution=SpectralField(basis, a),
                residual_norm=float(np.linalg.norm(_residual(a, basis, pp))),
                iterations=sweeps, converged=False, method_tag="monotone",
                info={"tag": "divergence", "sup_norm": sup,
                      "min_increment": min_increment})
        shift = (pp.p_exp * sup ** (pp.p_exp - 1.0)
                 + pp.lam * pp.q_exp * max(sup, POTENTIAL_FLOOR) ** (pp.q_exp - 1.0))
        rhs = analyze(GridField(basis.domain,
                                nonlinearity(fine, pp) + shift * fine), basis).coeffs
        a_new = rhs / (mult + shift)
        fine_new = _fine_values(a_new, basis)
        inc = fine_new - fine
        min_increment = min(min_increment, float(np.min(inc)))
        if min_increment < -1e-8 * max(1.0, sup):
            raise SchemeError(
                f"monotone sweep decreased pointwise by {min_increment:.2e}; "
                "shift M too small for this nonlinearity")
        a, fine = a_new, fine_new
        if float(np.max(np.abs(inc))) <= max(tol, 1e-13) * max(1.0, sup):
            break

    polish = newton_refine(SpectralField(basis, a), pp, tol=tol)
    fine = _fine_values(polish.solution.coeffs, basis)
    sup = float(np.max(fine))
    positive = float(np.min(fine)) >= -1e-10 * max(1.0, sup)
    ok = polish.converged and positive and sup <= sup_cap
    tag = "converged" if ok else (
        "divergence" if sup > sup_cap else
        "negative" if not positive else "stalled")
    return SolveReport(
        solution=polish.solution, residual_norm=polish.residual_norm,
        iterations=sweeps + polish.iterations, converged=ok,
        method_tag="monotone",
        info={"tag": tag, "sup_norm": sup, "min_increment": min_increment,
              "monotone_sweeps": sweeps, "newton_iterations": polish.iterations,
              "newton_history": polish.info.get("residual_history")})


# ---------------------------------------------------------------------------
# energy and linearization
# ---------------------------------------------------------------------------

def energy(u: SpectralField, pp: ProblemParams) -> float:
    """J(u) = 1/2 ||u||^2 - int F_lam(u) in the local normalization."""
    basis = u.basis
    quad = 0.5 * float(np.sum(u.coeffs**2 * _multiplier(basis, pp)))
    fine = synthesize(u, DEALIAS_FACTOR)
    w = math.prod(fine.steps)
    return quad - float(w * np.sum(primitive(fine.values, pp)))


def energy_gradient(u: SpectralField, pp: ProblemParams) -> SpectralField:
    """Residual as the L2 gradient of J (coefficients of Au - f(u))."""
    return SpectralField(u.basis, _residual(u.coeffs, u.basis, pp))


def linearized_eigen(w: SpectralField, pp: ProblemParams, k: int = 1) -> np.ndarray:
    """k smallest eigenvalues of (-Lap)^(a/2) - f'(w) (clipped potential)."""
    basis = w.basis
    if k < 1 or k > basis.n_modes:
        raise DomainError(f"k must lie in 1..{basis.n_modes}")
    fine = _fine_values(w.coeffs, basis)
    pot = GridField(basis.domain, nonlinearity_prime(fine, pp))
    h = np.diag(_multiplier(basis, pp)) - multiplication_matrix(pot, basis)
    vals = eigh(h, eigvals_only=True, subset_by_index=[0, k - 1])
    return np.asarray(vals)


def smallnorm_threshold(pp: ProblemParams, basis: Eigenbasis | None = None,
                        modes: int = 256, safety: float = 0.1) -> tuple[float, float]:
    """Coercivity constant of the concave linearization and sup-norm bound.

    beta is the smallest eigenvalue of the quadratic form
    ``||phi||^2 - q int z^(q-1) phi^2`` with z the concave solution at
    lam = 1; any two solutions with sup-norm below the returned threshold
    A = (beta/p)^(1/(p-1)) (1 - safety) must coincide.
    """
    basis = basis or build_basis(pp.domain, modes)
    z = solve_concave(1.0, pp, tol=1e-12, basis=basis).solution
    fine = _fine_values(z.coeffs, basis)
    floored = np.maximum(fine, POTENTIAL_FLOOR)
    pot = np.minimum(pp.q_exp * floored ** (pp.q_exp - 1.0), POTENTIAL_CEILING)
    pot = np.where(fine > 0.0, pot, 0.0)
    h = (np.diag(_multiplier(basis, pp))
         - multiplication_matrix(GridField(basis.domain, pot), basis))
    beta = float(eigh(h, eigvals_only=True, subset_by_index=[0, 0])[0])
    if beta <= 0.0:
        raise InconsistencyError(
            f"concave linearization has nonpositive bottom eigenvalue {beta}; "
            "contradicts its strict coercivity")
    a_threshold = (beta / pp.p_exp) ** (1.0 / (pp.p_exp - 1.0)) * (1.0 - safety)
    return beta, a_threshold


# ---------------------------------------------------------------------------
# mountain pass
# ---------------------------------------------------------------------------

def _x_gradient(coeffs, basis, pp):
    """Gradient of J in the fractional-Sobolev inner product."""
    mult = _multiplier(basis, pp)
    return coeffs - _rhs_coeffs(coeffs, basis, pp) / mult


def _x_norm(coeffs, basis, pp):
    return math.sqrt(float(np.sum(coeffs**2 * _multiplier(basis, pp))))


def second_solution(pp: ProblemParams, tol: float = 1e-10,
                    basis: Eigenbasis | None = None, modes: int = 256,
                    n_path: int = 33, separation: float = 1e-3,
                    max_deform: int = 400, retries: int = 3) -> SolveReport:
    """Mountain-pass solution above the minimal one.

    A piecewise-linear path from the minimal solution w to a high
    endpoint t phi_1 with J(endpoint) < J(w) is deformed by steepest
    descent (in the fractional-Sobolev metric, with Armijo steps) applied
    to its maximizer until the gradient there is small, then Newton
    polishes the critical point.  Collapse back onto w triggers a retry
    with a higher endpoint and ultimately :class:`MountainPassError`.
    """
    basis = basis or build_basis(pp.domain, modes)
    base = minimal_solution(pp, tol=tol, basis=basis)
    if not base.converged:
        raise IterationFailure("no minimal solution at this lambda; "
                               "second solution undefined",
                               residual=base.residual_norm,
                               iterations=base.iterations)
    w = base.solution.coeffs
    j_w = energy(base.solution, pp)

    def path_energy(coeffs):
        return energy(SpectralField(basis, coeffs), pp)

    e1 = np.zeros(basis.n_modes)
    e1[0] = 1.0
    t_end = 4.0 * max(1.0, float(np.linalg.norm(w)))
    last_error = "endpoint search failed"
    for attempt in range(retries + 1):
        while path_energy(t_end * e1) > j_w - 1.0:
            t_end *= 1.6
            if t_end > 1e6:
                raise MountainPassError("could not find a low-energy endpoint")
        ts = np.linspace(0.0, 1.0, n_path)
        path = [w + t * (t_end * e1 - w) for t in ts]
        u_star = None
        for _ in range(max_deform):
            js = [path_energy(c) for c in path]
            k_star = int(np.argmax(js))
            if k_star in (0, len(path) - 1):
                break  # endpoint became the max: restart higher
            u_star = path[k_star]
            g = _x_gradient(u_star, basis, pp)
            gn = _x_norm(g, basis, pp)
            if gn <= 1e-4:
                break
            j_star = js[k_star]
            step = 1.0
            for _ in range(50):
                cand = u_star - step * g
                if path_energy(cand) <= j_star - 1e-4 * step * gn * gn:
                    break
                step *= 0.5
            else:
                break  # descent exhausted; hand to Newton as-is
            path[k_star] = u_star - step * g
        if u_star is None:
            t_end *= 2.0
            last_error = "path maximum stuck at an endpoint"
            continue
        try:
            polish = newton_refine(SpectralField(basis, u_star), pp, tol=tol)
        except IterationFailure as exc:
            t_end *= 2.0
            last_error = str(exc)
            continue
        dist = float(np.linalg.norm(polish.solution.coeffs - w))
        j_2 = energy(polish.solution, pp)
        if polish.converged and dist > separation and j_2 > j_w:
            info = dict(polish.info)
            info.update({"energy": j_2, "energy_minimal": j_w,
                         "l2_distance": dist, "endpoint_scale": t_end,
                         "attempts": attempt + 1})
            return SolveReport(solution=polish.solution,
                               residual_norm=polish.residual_norm,
                               iterations=polish.iterations,
                               converged=True, method_tag="mountain_pass",
                               info=info)
        t_end *= 2.0
        last_error = (f"path collapsed onto the minimal solution "
                      f"(distance {dist:.2e}, energy gap {j_2 - j_w:.2e})")
    raise MountainPassError(last_error)
