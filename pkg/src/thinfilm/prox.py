'''Resolvent J_τ: one backward-Euler step as the minimizer of

    Φ(τ, u; v) = φ(v) + ψ(v) + ‖v − u‖²/(2τ)

over mean-zero fields. The minimization is a damped Newton iteration on the C¹ energy
prox_energy, whose Newton systems

    (I/τ + Δ_h diag(e^{−Δ_h v}[Δ_h v < N]) Δ_h) d = −grad

are solved matrix-free by Jacobi-preconditioned conjugate gradients. At the minimizer
(v − u)/τ = Δ_h e^{−min{Δ_h v, N}}, the discrete strong form of the equation.
'''
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from thinfilm.energy import (TruncationPolicy, curvature_values, potential_values, prox_density,
    psi)
from thinfilm.grid import Field, apply_laplacian, laplacian_matrix, norm_h, norm_values

logger = logging.getLogger(__name__)

# termination accepts ‖grad‖_h down to this multiple of its estimated rounding error
ROUNDING_FACTOR = 4.0


@dataclass(frozen=True)
class LineSearch:
    '''
    Backtracking parameters.
    Parameters:
        shrink - float, step reduction factor
        c_armijo - float, sufficient decrease constant
        max_backtrack - int, reductions tried before falling back to steepest descent
    '''
    shrink: float = 0.5
    c_armijo: float = 1e-4
    max_backtrack: int = 40

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0 < self.c_armijo < 1:
            raise ValueError("c_armijo must lie in (0, 1)")


@dataclass(frozen=True)
class ProxOptions:
    '''
    Options of one resolvent application.
    Parameters:
        tau - float, time step
        grad_tol - float or None, termination on ‖grad‖_h. None gives 1e-10·max(1, ‖u‖_h). The
            rounding floor of the gradient replaces it when larger
        max_newton - int, Newton iteration budget
        max_cg - int or None, CG budget per Newton system. None gives 10·n^dim
        policy - TruncationPolicy
        line_search - LineSearch
        c_star - float or None, radius of the measure ball; None skips ψ
    '''
    tau: float
    grad_tol: Optional[float] = None
    max_newton: int = 50
    max_cg: Optional[int] = None
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    line_search: LineSearch = field(default_factory=LineSearch)
    c_star: Optional[float] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive, got {}".format(self.tau))
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive, got {}".format(self.grad_tol))
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")
        if self.max_cg is not None and self.max_cg < 1:
            raise ValueError("max_cg must be at least 1")
        if self.c_star is not None and not self.c_star > 0:
            raise ValueError("c_star must be positive, got {}".format(self.c_star))

    def with_tau(self, tau):
        return replace(self, tau=tau)

    def tolerance_for(self, u):
        if self.grad_tol is not None:
            return self.grad_tol
        return 1e-10 * max(1.0, norm_h(u))

    def cg_budget(self, grid):
        return self.max_cg if self.max_cg is not None else 10 * grid.size


@dataclass
class ProxResult:
    '''
    Output of one resolvent application.
    Attributes:
        v - Field, the minimizer
        newton_iters, cg_iters_total - ints
        final_grad_norm - float, ‖(v − u)/τ − Δ_h g(Δ_h v)‖_h
        objective - float, Φ(τ, u; v)
        evi_gap - float, largest violation of the one-step EVI over a fixed battery
        displacement - float, ‖v − u‖_h
        converged - bool, final_grad_norm ≤ grad_tol
        clamp_events - int, exponent clamps seen while iterating
        grad_tol - float, tolerance used: max(requested tolerance, rounding_floor)
        rounding_floor - float, estimated rounding error of the gradient at v
    '''
    v: Field
    newton_iters: int
    cg_iters_total: int
    final_grad_norm: float
    objective: float
    evi_gap: float
    displacement: float
    converged: bool
    clamp_events: int
    grad_tol: float
    rounding_floor: float = 0.0

    @property
    def overflow_clamped(self):
        return self.clamp_events > 0


def _project(values):
    return values - np.mean(values)


def _stencil_spread(grid, values):
    '''Δ_h with absolute coefficients applied to |values|.'''
    magnitude = np.abs(values)
    return apply_laplacian(grid, magnitude) + 4.0 * grid.dim * magnitude / grid.h ** 2


@lru_cache(maxsize=16)
def _squared_stencil(grid):
    '''Entrywise square of the transposed Laplacian; maps Hessian weights to its diagonal.'''
    matrix = laplacian_matrix(grid)
    return matrix.multiply(matrix).T.tocsr()


class ResolventProblem:
    '''
    Objective, gradient and Hessian of Φ(τ, u; ·) on raw arrays.
    Parameters:
        u - Field, the previous state
        tau - float
        policy - TruncationPolicy
    '''
    def __init__(self, u, tau, policy):
        self.grid = u.grid
        self.u = u.values
        self.tau = tau
        self.policy = policy
        self.clamp_events = 0

    def value(self, v):
        lap = apply_laplacian(self.grid, v)
        density, clamps = prox_density(lap, self.policy)
        self.clamp_events += clamps
        cv = self.grid.cell_volume
        return float(cv * np.sum(density) + cv * np.sum((v - self.u) ** 2) / (2.0 * self.tau))

    def gradient(self, v):
        g, clamps = potential_values(apply_laplacian(self.grid, v), self.policy)
        self.clamp_events += clamps
        return (v - self.u) / self.tau - apply_laplacian(self.grid, g)

    def rounding_floor(self, v):
        '''
        Bound on the rounding error of gradient(v), which grows like h⁻⁴·max e^{−Δ_h v}:
        eps times the absolute-value bound of (v − u)/τ and of both stencil applications in
        Δ_h e^{−min{Δ_h v, N}}, scaled by ROUNDING_FACTOR.
        '''
        g, _ = potential_values(apply_laplacian(self.grid, v), self.policy)
        inner_error = g * (1.0 + _stencil_spread(self.grid, v))
        bound = (np.abs(v) + np.abs(self.u)) / self.tau + _stencil_spread(self.grid, inner_error)
        return ROUNDING_FACTOR * np.finfo(float).eps * norm_values(self.grid, bound)

    def hessian_vector(self, v, p):
        weight = curvature_values(apply_laplacian(self.grid, v), self.policy)
        return self._hessian_apply(weight, p)

    def _hessian_apply(self, weight, p):
        return p / self.tau + apply_laplacian(self.grid, weight * apply_laplacian(self.grid, p))

    def newton_direction(self, v, grad, rtol, maxiter):
        '''
        Solve the Newton system on the mean-zero subspace.
        Returns:
            direction, cg iteration count
        '''
        shape = self.grid.shape
        size = self.grid.size
        weight = curvature_values(apply_laplacian(self.grid, v), self.policy)
        diagonal = 1.0 / self.tau + _squared_stencil(self.grid) @ weight.ravel()

        def matvec(p):
            return _project(self._hessian_apply(weight, p.reshape(shape)).ravel())

        def precondition(r):
            return _project(r / diagonal)

        counter = {"iters": 0}

        def count(_):
            counter["iters"] += 1

        hessian = LinearOperator((size, size), matvec=matvec, dtype=float)
        jacobi = LinearOperator((size, size), matvec=precondition, dtype=float)
        direction, info = cg(hessian, -_project(grad.ravel()), rtol=rtol, atol=0.0,
            maxiter=maxiter, M=jacobi, callback=count)
        if info > 0:
            logger.debug("CG stopped after %d iterations without reaching rtol %.1e", info, rtol)
        return _project(direction).reshape(shape), counter["iters"]

    def steepest_direction(self, v, grad):
        weight = curvature_values(apply_laplacian(self.grid, v), self.policy)
        diagonal = 1.0 / self.tau + (_squared_stencil(self.grid) @ weight.ravel()).reshape(self.grid.shape)
        return -_project(grad / diagonal)


def objective(u, v, opts):
    '''
    Φ(τ, u; v) = (φ + ψ)(v) + ‖u − v‖²/(2τ), with φ the energy minimized by the resolvent.
    Returns:
        float, math.inf when ψ(v) = ∞
    '''
    if opts.c_star is not None and psi(v, opts.c_star) > 0:
        return math.inf
    return ResolventProblem(u, opts.tau, opts.policy).value(v.values)


def _energy(grid, values, policy):
    density, _ = prox_density(apply_laplacian(grid, values), policy)
    return float(grid.cell_volume * np.sum(density))


def evi_gap(u, v, tau, policy, tests):
    '''
    Largest violation over tests w of
        (‖v − w‖² − ‖u − w‖²)/(2τ) ≤ φ(w) − φ(v).
    '''
    cv = u.grid.cell_volume
    energy_v = _energy(u.grid, v.values, policy)
    gap = -math.inf
    for w in tests:
        energy_w = _energy(u.grid, w.values, policy)
        # ‖v − w‖² − ‖u − w‖² = ⟨v − u, v + u − 2w⟩
        lhs = cv * np.sum((v.values - u.values) * (v.values + u.values - 2.0 * w.values)) / (2.0 * tau)
        gap = max(gap, float(lhs - (energy_w - energy_v)))
    return gap


def _line_search(problem, v, direction, grad, gnorm, f0, ls):
    '''
    Backtracking on Φ along direction.
    Returns:
        (new iterate, its objective) or (None, None)
    '''
    cv = problem.grid.cell_volume
    slope = cv * float(np.sum(grad * direction))
    if slope >= 0:
        return None, None
    alpha = 1.0
    for attempt in range(ls.max_backtrack):
        trial = v + alpha * direction
        f = problem.value(trial)
        if f <= f0 + ls.c_armijo * alpha * slope:
            return trial, f
        # at the rounding floor of Φ accept a full step that reduces the gradient
        if attempt == 0 and norm_values(problem.grid, problem.gradient(trial)) < gnorm:
            return trial, f
        alpha *= ls.shrink
    return None, None


def prox_step(u, opts, initial_guess=None):
    '''
    Apply the resolvent J_τ to u.
    Parameters:
        u - Field, mean-zero state with ψ(u) = 0
        opts - ProxOptions
        initial_guess - Field or None, Newton starting point (default u)
    Returns:
        ProxResult; converged is False when the Newton budget ran out (best iterate returned)
    '''
    grid = u.grid
    if not u.mean_zero and abs(np.mean(u.values)) > 1e-12 * max(1.0, float(np.max(np.abs(u.values)))):
        raise ValueError("prox_step needs a mean-zero state")
    if opts.c_star is not None and psi(u, opts.c_star) > 0:
        raise ValueError("previous state lies outside the measure ball C* = {}".format(opts.c_star))
    tol = opts.tolerance_for(u)
    problem = ResolventProblem(u, opts.tau, opts.policy)
    v = (initial_guess if initial_guess is not None else u).values.copy()
    v = _project(v)
    f = problem.value(v)
    grad = problem.gradient(v)
    gnorm = norm_values(grid, grad)
    gnorm0 = max(gnorm, np.finfo(float).tiny)
    floor = problem.rounding_floor(v)
    newton_iters = cg_total = 0
    budget = opts.cg_budget(grid)

    while gnorm > max(tol, floor) and newton_iters < opts.max_newton:
        rtol = max(min(0.5, math.sqrt(gnorm / gnorm0)), 1e-14)
        direction, its = problem.newton_direction(v, grad, rtol, budget)
        cg_total += its
        trial, f_trial = _line_search(problem, v, direction, grad, gnorm, f, opts.line_search)
        if trial is None:
            logger.debug("Newton line search failed, falling back to steepest descent")
            direction = problem.steepest_direction(v, grad)
            trial, f_trial = _line_search(problem, v, direction, grad, gnorm, f, opts.line_search)
        newton_iters += 1
        if trial is None:
            logger.warning("line search failed at gradient norm %.3e", gnorm)
            break
        v = _project(trial)
        f = f_trial
        grad = problem.gradient(v)
        gnorm = norm_values(grid, grad)
        floor = problem.rounding_floor(v)
        logger.debug("newton %d: |grad| = %.3e, floor = %.3e, cg = %d", newton_iters, gnorm, floor, its)

    effective = max(tol, floor)
    converged = gnorm <= effective
    if not converged:
        logger.warning("resolvent did not converge: |grad| = %.3e > %.3e after %d Newton steps",
            gnorm, effective, newton_iters)
    elif floor > tol:
        logger.debug("resolvent stopped at the rounding floor %.3e above grad_tol %.3e", floor, tol)
    if problem.clamp_events:
        logger.warning("exponent clamped %d times during the resolvent", problem.clamp_events)
    v_field = Field(grid, v, mean_zero=True)
    midpoint = 0.5 * (u + v_field)
    gap = evi_gap(u, v_field, opts.tau, opts.policy, [grid.zeros(), u, midpoint])
    return ProxResult(
        v=v_field,
        newton_iters=newton_iters,
        cg_iters_total=cg_total,
        final_grad_norm=gnorm,
        objective=f,
        evi_gap=gap,
        displacement=norm_values(grid, v - u.values),
        converged=converged,
        clamp_events=problem.clamp_events,
        grad_tol=effective,
        rounding_floor=floor,
    )


def tau_convexity_probe(u, v0, v1, tau, t_samples, policy=TruncationPolicy()):
    '''
    Largest value over t of
        Φ(v(t)) − (1 − t)Φ(v0) − tΦ(v1) + t(1 − t)‖v0 − v1‖²/(2τ),
    v(t) = (1 − t)v0 + t·v1; the strengthened convexity of Φ makes it nonpositive.
    '''
    problem = ResolventProblem(u, tau, policy)
    f0 = problem.value(v0.values)
    f1 = problem.value(v1.values)
    gap2 = norm_values(u.grid, v0.values - v1.values) ** 2
    violation = -math.inf
    for t in t_samples:
        ft = problem.value((1.0 - t) * v0.values + t * v1.values)
        violation = max(violation, ft - (1.0 - t) * f0 - t * f1 + t * (1.0 - t) * gap2 / (2.0 * tau))
    return float(violation)
