'''Scalar functionals of a surface state.

phi      cell_volume · Σ e^{−min{Δ_h u, N}}, the energy with the singular excess removed
prox     the C¹ tangent continuation of phi above N, minimized by the resolvent
psi      indicator of the measure ball ‖Δ_h u‖ ≤ C*
E        ½‖Δ_h e^{−min{Δ_h u, N}}‖², the dissipation functional; slope = sqrt(2E)
dual     per-cell numerical evaluation of the conjugate representation of phi
'''
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from thinfilm.grid import Field, apply_laplacian, measure_norms, neumann_laplacian, norm_values

logger = logging.getLogger(__name__)

# exponents are clipped to ±EXPONENT_CLAMP; every clipped cell is counted
EXPONENT_CLAMP = 500.0
# lower end of log(−y) in the duality oracle; e^{−745} underflows to zero
_LOG_Y_FLOOR = -745.0


@dataclass(frozen=True)
class TruncationPolicy:
    '''
    Cap N applied to Δ_h u inside the energy; None means no cap.
    Parameters:
        level_N - positive float or None
    '''
    level_N: Optional[float] = None

    def __post_init__(self):
        if self.level_N is not None and not (self.level_N > 0 and np.isfinite(self.level_N)):
            raise ValueError("truncation level must be a positive finite number, got {}".format(self.level_N))

    @property
    def truncated(self):
        return self.level_N is not None

    @classmethod
    def auto(cls, u0, factor=10.0):
        '''N = factor · max(1, max Δ_h u0).'''
        lap = apply_laplacian(u0.grid, u0.values)
        return cls(factor * max(1.0, float(np.max(lap))))

    def cap(self, lap):
        if self.level_N is None:
            return lap
        return np.minimum(lap, self.level_N)

    def describe(self):
        return "none" if self.level_N is None else "{:.17g}".format(self.level_N)


def exp_neg(s):
    '''
    e^{−s} with the exponent clipped to ±EXPONENT_CLAMP.
    Returns:
        values, clamp_count
    '''
    clamps = int(np.count_nonzero(np.abs(s) > EXPONENT_CLAMP))
    return np.exp(-np.clip(s, -EXPONENT_CLAMP, EXPONENT_CLAMP)), clamps


def potential_values(lap, policy):
    '''g = e^{−min{lap, N}} and the number of clamped cells.'''
    return exp_neg(policy.cap(lap))


def curvature_values(lap, policy):
    '''−g′(lap) = e^{−lap}·[lap < N], the weight of the Newton Hessian.'''
    weight, _ = exp_neg(policy.cap(lap))
    if policy.truncated:
        weight = np.where(lap < policy.level_N, weight, 0.0)
    return weight


def prox_density(lap, policy):
    '''G_N(lap): e^{−s} below N, the tangent line e^{−N}(1 + N − s) above.'''
    g, clamps = potential_values(lap, policy)
    if policy.truncated:
        over = lap > policy.level_N
        g = np.where(over, g * (1.0 + policy.level_N - lap), g)
    return g, clamps


def _lap(u):
    return apply_laplacian(u.grid, u.values)


def phi(u, policy=TruncationPolicy()):
    '''
    Truncated energy cell_volume · Σ e^{−min{Δ_h u, N}}.
    Parameters:
        u - Field, mean-zero state
        policy - TruncationPolicy
    Returns:
        float
    '''
    g, clamps = potential_values(_lap(u), policy)
    if clamps:
        logger.warning("phi: exponent clamped in %d cells", clamps)
    return float(u.grid.cell_volume * np.sum(g))


def phi_raw(u):
    '''Untruncated free energy F(u) = cell_volume · Σ e^{−Δ_h u}.'''
    return phi(u, TruncationPolicy())


def prox_energy(u, policy=TruncationPolicy()):
    '''Energy minimized by the resolvent; equals phi whenever no cell exceeds N.'''
    g, _ = prox_density(_lap(u), policy)
    return float(u.grid.cell_volume * np.sum(g))


def psi(u, c_star):
    '''
    Indicator of the measure ball.
    Returns:
        0.0 when ‖Δ_h u‖ ≤ c_star, math.inf otherwise
    '''
    if not c_star > 0:
        raise ValueError("c_star must be positive, got {}".format(c_star))
    total, _, _ = measure_norms(neumann_laplacian(u.grid, u))
    return 0.0 if total <= c_star else math.inf


def energy_gradient_values(grid, values, policy):
    '''H-gradient of prox_energy: −Δ_h e^{−min{Δ_h u, N}}.'''
    g, _ = potential_values(apply_laplacian(grid, values), policy)
    return -apply_laplacian(grid, g)


def chemical_potential(u, policy=TruncationPolicy()):
    '''The field e^{−min{Δ_h u, N}} driving u_t = Δ_h e^{−min{Δ_h u, N}}.'''
    g, _ = potential_values(_lap(u), policy)
    return Field(u.grid, g)


def dissipation_E(u, policy=TruncationPolicy()):
    '''E(u) = ½‖Δ_h e^{−min{Δ_h u, N}}‖²_h.'''
    flux = energy_gradient_values(u.grid, u.values, policy)
    return 0.5 * norm_values(u.grid, flux) ** 2


def metric_slope(u, policy=TruncationPolicy()):
    '''|∂φ|(u) = ‖Δ_h e^{−min{Δ_h u, N}}‖_h.'''
    return norm_values(u.grid, energy_gradient_values(u.grid, u.values, policy))


def _dual_cell(mu):
    '''max over y in [−1, 0] of y·mu − y + y·ln(−y), searched in t = ln(−y).'''
    def neg_objective(t):
        y = -math.exp(t)
        return -(y * mu - y + y * t)

    res = minimize_scalar(neg_objective, bounds=(_LOG_Y_FLOOR, 0.0), method="bounded",
        options={"xatol": 1e-12, "maxiter": 500})
    # the interval ends: y = −1 gives 1 − mu, y → 0 gives 0
    return max(-res.fun, 1.0 - mu, 0.0)


def dual_phi(mu):
    '''
    Conjugate representation of the energy of a measure density, evaluated cell by cell
    by bounded scalar maximization (not by the closed-form maximizer).
    Parameters:
        mu - Field, discrete measure density
    Returns:
        float, cell_volume · Σ_i max_{−1≤y≤0} (y·mu_i − y + y·ln(−y))
    '''
    cache = {}
    total = 0.0
    for value in mu.values.ravel():
        key = float(value)
        if key not in cache:
            cache[key] = _dual_cell(key)
        total += cache[key]
    return float(mu.grid.cell_volume * total)


def truncation_l2_terms(mu, N, A):
    '''
    Both sides of ‖min{mu, N}‖² ≤ 4e^N·A + 2|Ω|N².
    Returns:
        (lhs, rhs, raw) with raw = cell_volume · Σ e^{−mu}, the quantity A must bound
    '''
    if not N > 0:
        raise ValueError("truncation level must be positive, got {}".format(N))
    grid = mu.grid
    raw = float(grid.cell_volume * np.sum(exp_neg(mu.values)[0]))
    lhs = norm_values(grid, np.minimum(mu.values, N)) ** 2
    rhs = 4.0 * math.exp(N) * A + 2.0 * grid.volume * N ** 2
    return lhs, rhs, raw


def truncation_l2_bound_check(mu, N, A):
    '''
    L² bound of the truncated measure: ‖min{mu, N}‖² ≤ 4e^N·A + 2|Ω|N².
    Parameters:
        mu - Field, measure density (a Laplacian image)
        N - float, truncation level
        A - float, bound on cell_volume · Σ e^{−mu}
    Returns:
        bool
    '''
    lhs, rhs, raw = truncation_l2_terms(mu, N, A)
    if raw > A * (1.0 + 1e-12):
        raise ValueError("precondition violated: energy {:.6g} exceeds A = {:.6g}".format(raw, A))
    return bool(lhs <= rhs)


@dataclass
class EnergyReport:
    '''All scalar functionals of one state.'''
    phi: float
    phi_raw: float
    phi_prox: float
    free_energy_F: float
    dissipation_E: float
    measure_total: float
    measure_pos: float
    measure_neg: float
    max_pos_laplacian: float
    min_laplacian: float
    excess_mass: float
    negative_excess: float
    slope: float
    clamp_events: int


def energy_report(u, policy=TruncationPolicy()):
    '''
    Evaluate every functional of u in one pass over its Laplacian.
    Parameters:
        u - Field
        policy - TruncationPolicy
    Returns:
        EnergyReport
    '''
    grid = u.grid
    cv = grid.cell_volume
    lap = _lap(u)
    g, clamps = potential_values(lap, policy)
    raw, raw_clamps = exp_neg(lap)
    prox, _ = prox_density(lap, policy)
    flux = -apply_laplacian(grid, g)
    slope = norm_values(grid, flux)
    total, pos, neg = measure_norms(neumann_laplacian(grid, u))
    if policy.truncated:
        excess = float(cv * np.sum(np.maximum(lap - policy.level_N, 0.0)))
        negative_excess = float(cv * np.sum(np.maximum(-policy.level_N - lap, 0.0)))
    else:
        excess = negative_excess = 0.0
    if negative_excess > 0:
        logger.debug("negative excess %.3e below −N (diagnostic only)", negative_excess)
    phi_raw_value = float(cv * np.sum(raw))
    return EnergyReport(
        phi=float(cv * np.sum(g)),
        phi_raw=phi_raw_value,
        phi_prox=float(cv * np.sum(prox)),
        free_energy_F=phi_raw_value,
        dissipation_E=0.5 * slope ** 2,
        measure_total=total,
        measure_pos=pos,
        measure_neg=neg,
        max_pos_laplacian=max(0.0, float(np.max(lap))),
        min_laplacian=float(np.min(lap)),
        excess_mass=excess,
        negative_excess=negative_excess,
        slope=slope,
        clamp_events=max(clamps, raw_clamps),
    )
