'''Minimizing-movement time loop u_n = (J_τ)^n u0 with trajectory diagnostics.'''
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Union

import numpy as np
from joblib import Parallel, delayed

from thinfilm.energy import EnergyReport, TruncationPolicy, energy_gradient_values, energy_report, metric_slope
from thinfilm.exceptions import ConstraintViolationError, NonConvergenceError
from thinfilm.grid import Field, norm_h, norm_values
from thinfilm.prox import ProxOptions, prox_step

logger = logging.getLogger(__name__)


@dataclass
class FlowConfig:
    '''
    Parameters of one evolution.
    Parameters:
        t_final - float, final time
        n_steps - int, number of resolvent applications, τ = t_final/n_steps
        prox - ProxOptions or None; its tau is replaced by t_final/n_steps
        snapshot_stride - int, keep a snapshot every stride steps (0 keeps none); the last
            step is always kept when stride > 0
        c_star - "auto" (2φ(u0) + 1) or a positive float
        keep_states - bool, keep every state (needed by the trace checks)
    '''
    t_final: float
    n_steps: int
    prox: Optional[ProxOptions] = None
    snapshot_stride: int = 0
    c_star: Union[str, float] = "auto"
    keep_states: bool = True

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError("t_final must be positive, got {}".format(self.t_final))
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer, got {}".format(self.n_steps))
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be nonnegative")
        if self.c_star != "auto" and not (isinstance(self.c_star, (int, float)) and self.c_star > 0):
            raise ValueError("c_star must be 'auto' or a positive number, got {}".format(self.c_star))
        self.n_steps = int(self.n_steps)
        prox = self.prox if self.prox is not None else ProxOptions(tau=self.tau)
        self.prox = prox.with_tau(self.tau)

    @property
    def tau(self):
        return self.t_final / self.n_steps

    @property
    def policy(self):
        return self.prox.policy


@dataclass
class FlowTrace:
    '''
    Time-indexed record of an evolution. Index 0 is the initial state (time 0, zero
    displacement); index k is the state after k resolvent steps. grad_tol is the largest
    termination tolerance of any step, its rounding floor included.
    '''
    grid: object
    policy: TruncationPolicy
    tau: float
    c_star: float
    grad_tol: float = 0.0
    rounding_floor: float = 0.0
    times: List[float] = field(default_factory=list)
    reports: List[EnergyReport] = field(default_factory=list)
    displacements: List[float] = field(default_factory=list)
    ut_norms: List[float] = field(default_factory=list)
    pde_residuals: List[float] = field(default_factory=list)
    newton_iters: List[int] = field(default_factory=list)
    cg_iters: List[int] = field(default_factory=list)
    evi_gaps: List[float] = field(default_factory=list)
    states: Optional[List[Field]] = None
    snapshots: Dict[int, Field] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)

    @property
    def n_steps(self):
        return len(self.times) - 1

    @property
    def initial(self):
        return self.reports[0]

    def require_states(self):
        if self.states is None:
            raise ValueError("trace was recorded without states; evolve with keep_states=True")
        return self.states

    def series(self, name):
        '''One EnergyReport attribute as an array over the steps.'''
        return np.array([getattr(r, name) for r in self.reports], dtype=float)

    def _append(self, time, report, displacement, residual, newton, cg, gap):
        self.times.append(time)
        self.reports.append(report)
        self.displacements.append(displacement)
        self.ut_norms.append(displacement / self.tau if self.times[-1] > 0 else 0.0)
        self.pde_residuals.append(residual)
        self.newton_iters.append(newton)
        self.cg_iters.append(cg)
        self.evi_gaps.append(gap)


def strong_residual(u_prev, u_next, tau, policy):
    '''‖(u_next − u_prev)/τ − Δ_h e^{−min{Δ_h u_next, N}}‖_h.'''
    grid = u_next.grid
    flux = -energy_gradient_values(grid, u_next.values, policy)
    return norm_values(grid, (u_next.values - u_prev.values) / tau - flux)


def _check_initial(u0):
    if not u0.mean_zero and abs(np.mean(u0.values)) > 1e-12 * max(1.0, float(np.max(np.abs(u0.values)))):
        raise ValueError("initial state must be mean-zero")


def evolve(u0, cfg):
    '''
    Iterate the resolvent n_steps times from u0.
    Parameters:
        u0 - Field, mean-zero initial state with finite energy
        cfg - FlowConfig
    Returns:
        FlowTrace
    Raises:
        NonConvergenceError - carrying the partial trace
        ConstraintViolationError - when ‖Δ_h u_k‖ exceeds C*
    '''
    _check_initial(u0)
    policy = cfg.policy
    report0 = energy_report(u0, policy)
    if not math.isfinite(report0.phi):
        raise ValueError("initial energy is not finite")
    c_star = 2.0 * report0.phi + 1.0 if cfg.c_star == "auto" else float(cfg.c_star)
    if report0.measure_total > c_star:
        raise ConstraintViolationError("initial state violates ‖Δu‖ ≤ C* = {:.6g}".format(c_star), trace=None)
    opts = replace(cfg.prox, c_star=None)
    trace = FlowTrace(grid=u0.grid, policy=policy, tau=cfg.tau, c_star=c_star,
        states=[u0] if cfg.keep_states else None)
    trace._append(0.0, report0, 0.0, 0.0, 0, 0, 0.0)
    if cfg.snapshot_stride > 0:
        trace.snapshots[0] = u0
    logger.info("evolve: %d steps of tau = %.3e, N = %s, C* = %.6g, phi(u0) = %.12g",
        cfg.n_steps, cfg.tau, policy.describe(), c_star, report0.phi)

    u = u0
    for k in range(1, cfg.n_steps + 1):
        result = prox_step(u, opts)
        trace.grad_tol = max(trace.grad_tol, result.grad_tol)
        trace.rounding_floor = max(trace.rounding_floor, result.rounding_floor)
        if result.overflow_clamped:
            trace.flags.append("clamp:{}:{}".format(k, result.clamp_events))
        if not result.converged:
            trace.flags.append("nonconvergence:{}".format(k))
            raise NonConvergenceError("resolvent failed at step {} (|grad| = {:.3e} > {:.3e})".format(
                k, result.final_grad_norm, result.grad_tol), trace=trace, result=result)
        v = result.v
        report = energy_report(v, policy)
        residual = strong_residual(u, v, cfg.tau, policy)
        trace._append(k * cfg.t_final / cfg.n_steps, report, result.displacement, residual,
            result.newton_iters, result.cg_iters_total, result.evi_gap)
        if trace.states is not None:
            trace.states.append(v)
        if cfg.snapshot_stride > 0 and (k % cfg.snapshot_stride == 0 or k == cfg.n_steps):
            trace.snapshots[k] = v
        if report.measure_total > c_star:
            raise ConstraintViolationError("step {}: ‖Δu‖ = {:.6g} exceeds C* = {:.6g}".format(
                k, report.measure_total, c_star), trace=trace)
        u = v

    logger.info("evolve: done, phi = %.12g, slope = %.3e, Newton = %d, CG = %d",
        trace.reports[-1].phi, trace.reports[-1].slope, sum(trace.newton_iters), sum(trace.cg_iters))
    return trace


def final_state(u0, cfg):
    '''Evolve without keeping states and return (u_n, trace).'''
    trace = evolve(u0, replace(cfg, keep_states=False, snapshot_stride=cfg.n_steps))
    return trace.snapshots[cfg.n_steps], trace


@dataclass
class ConvergenceRow:
    n_steps: int
    tau: float
    error: float
    bound_rhs: float
    order: Optional[float] = None

    @property
    def within_bound(self):
        return self.error <= self.bound_rhs


def convergence_study(u0, t_final, steps_list, prox, n_jobs=1, refinement=8):
    '''
    Temporal error of the scheme against a fine run of the same scheme.
    Parameters:
        u0 - Field, initial state
        t_final - float
        steps_list - increasing list of step counts
        prox - ProxOptions (tau ignored)
        n_jobs - int, parallel evolutions
        refinement - int, reference run uses refinement·max(steps_list) steps
    Returns:
        list of ConvergenceRow; order is log2(error(τ)/error(τ/2)) against the previous row
    '''
    steps_list = [int(s) for s in steps_list]
    if any(b <= a for a, b in zip(steps_list, steps_list[1:])):
        raise ValueError("steps_list must be increasing")
    reference_steps = refinement * steps_list[-1]
    all_steps = steps_list + [reference_steps]
    finals = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(final_state)(u0, FlowConfig(t_final, s, prox)) for s in all_steps)
    reference = finals[-1][0]
    slope0 = metric_slope(u0, prox.policy)
    rows = []
    for s, (u_n, _) in zip(steps_list, finals[:-1]):
        tau = t_final / s
        row = ConvergenceRow(n_steps=s, tau=tau, error=norm_h(u_n - reference),
            bound_rhs=tau / math.sqrt(2.0) * slope0)
        if rows and rows[-1].error > 0 and row.error > 0:
            row.order = math.log2(rows[-1].error / row.error) / math.log2(s / rows[-1].n_steps)
        rows.append(row)
        logger.info("convergence: n = %d, tau = %.3e, error = %.3e, bound = %.3e, order = %s",
            s, tau, row.error, row.bound_rhs, "-" if row.order is None else "{:.3f}".format(row.order))
    return rows


@dataclass
class PairedFlow:
    trace_u: FlowTrace
    trace_v: FlowTrace
    distances: List[float]


def two_flow_run(u0, v0, cfg, n_jobs=1):
    '''
    Evolve two initial states with the same configuration.
    Returns:
        PairedFlow with d_k = ‖u_k − v_k‖_h
    '''
    cfg = replace(cfg, keep_states=True)
    trace_u, trace_v = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(evolve)(w, cfg) for w in (u0, v0))
    distances = [norm_h(a - b) for a, b in zip(trace_u.states, trace_v.states)]
    return PairedFlow(trace_u, trace_v, distances)
