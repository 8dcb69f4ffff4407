'''Orchestration of the run, convergence, verify and sweep commands.

Every command writes into the configured output directory and returns an exit code:
0 success, 1 configuration error, 2 solver nonconvergence, 3 failed check or measure bound.
'''
import logging
import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from thinfilm import __version__
from thinfilm.energy import TruncationPolicy
from thinfilm.exceptions import ConfigError, ConfigIssue, ConstraintViolationError, NonConvergenceError
from thinfilm.flow import FlowConfig, convergence_study, evolve, two_flow_run
from thinfilm.grid import build_grid, mean_zero_project
from thinfilm.io import write_json, write_snapshots, write_table_csv, write_trace_csv
from thinfilm.presets import build_initial_condition
from thinfilm.prox import ProxOptions
from thinfilm.verify import check_error_estimate, corrupt_trace, run_battery, sample_fields, singularity_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGENCE = 2
EXIT_CHECK = 3

CONVERGENCE_COLUMNS = ("n_steps", "tau", "error", "bound_rhs", "order")
SWEEP_COLUMNS = ("value", "exit_code", "phi_final", "slope_final", "excess_final", "newton_total", "cg_total")


@dataclass
class Setup:
    '''Objects every command builds from a RunConfig.'''
    grid: object
    u0: object
    policy: TruncationPolicy
    prox: ProxOptions
    flow: FlowConfig


def prepare(cfg, keep_states=False):
    '''
    Build grid, initial state, truncation policy and solver options.
    Parameters:
        cfg - RunConfig
        keep_states - bool, keep every state of the evolution
    Returns:
        Setup
    '''
    grid = build_grid(cfg.grid.dim, cfg.grid.n, cfg.grid.length)
    u0 = build_initial_condition(grid, cfg.ic)
    truncation = cfg.flow.truncation
    if truncation == "none":
        policy = TruncationPolicy()
    elif truncation == "auto":
        policy = TruncationPolicy.auto(u0)
    else:
        policy = TruncationPolicy(float(truncation))
    tau = cfg.flow.t_final / cfg.flow.n_steps
    prox = ProxOptions(tau=tau, grad_tol=cfg.solver.grad_tol, max_newton=cfg.solver.max_newton,
        max_cg=cfg.solver.max_cg, policy=policy)
    flow = FlowConfig(cfg.flow.t_final, cfg.flow.n_steps, prox, cfg.flow.snapshot_stride,
        cfg.flow.c_star, keep_states)
    return Setup(grid, u0, policy, prox, flow)


def _out_dir(cfg):
    directory = cfg.output.directory
    os.makedirs(directory, exist_ok=True)
    return directory


def _final_result(trace, status):
    last = trace.reports[-1]
    return {"status": status, "steps": trace.n_steps, "phi_final": last.phi, "slope_final": last.slope,
        "excess_final": last.excess_mass, "newton_total": int(sum(trace.newton_iters)),
        "cg_total": int(sum(trace.cg_iters)), "flags": list(trace.flags),
        "grad_tol": trace.grad_tol, "rounding_floor": trace.rounding_floor}


def _write_outputs(cfg, command, started, checks=(), result=None, trace=None, tables=()):
    '''
    Write the trace CSV, snapshots and extra tables (csv format) and the summary (json format).
    Wall-clock time goes to timing.json so summary.json depends on the configuration only.
    '''
    directory = _out_dir(cfg)
    if "csv" in cfg.output.formats:
        if trace is not None:
            write_trace_csv(os.path.join(directory, "trace.csv"), trace)
            write_snapshots(directory, trace)
        for name, columns, rows in tables:
            write_table_csv(os.path.join(directory, name), columns, rows)
    if "json" in cfg.output.formats:
        summary = {"command": command, "version": __version__, "config": cfg,
            "checks": [{"name": c.name, "max_violation": c.max_violation, "tolerance": c.tolerance,
                "passed": c.passed, "context": c.context} for c in checks],
            "result": result or {}}
        write_json(os.path.join(directory, "summary.json"), summary)
        write_json(os.path.join(directory, "timing.json"),
            {"command": command, "wall_clock_seconds": time.perf_counter() - started})


def _verdict(checks):
    failed = [c.name for c in checks if not c.passed]
    if failed:
        logger.error("failed checks: %s", ", ".join(failed))
        return EXIT_CHECK
    return EXIT_OK


def execute_run(cfg, self_test=False):
    '''
    Evolve the configured initial state and write its trace.
    Returns:
        (exit code, FlowTrace or None)
    '''
    started = time.perf_counter()
    setup = prepare(cfg, keep_states=self_test)
    try:
        trace = evolve(setup.u0, setup.flow)
    except NonConvergenceError as exc:
        logger.error("run: %s", exc)
        _write_outputs(cfg, "run", started, result={"status": "nonconvergence", "message": str(exc)},
            trace=exc.trace)
        return EXIT_NONCONVERGENCE, exc.trace
    except ConstraintViolationError as exc:
        logger.error("run: %s", exc)
        _write_outputs(cfg, "run", started, result={"status": "measure_bound", "message": str(exc)},
            trace=exc.trace)
        return EXIT_CHECK, exc.trace

    checks = []
    if self_test:
        logger.info("run: self-test on a trace with a raised final energy")
        tests = sample_fields(setup.grid, cfg.verify.n_tests, cfg.verify.max_mode, cfg.verify.amplitude,
            cfg.verify.seed)
        checks = run_battery(corrupt_trace(trace, "energy"), tests)
    code = _verdict(checks)
    _write_outputs(cfg, "run", started, checks, _final_result(trace, "ok"), trace)
    return code, trace


def run(cfg, self_test=False):
    '''Exit code of execute_run.'''
    return execute_run(cfg, self_test)[0]


def convergence(cfg, n_jobs=1):
    '''τ-refinement study on the configured initial state; writes convergence.csv.'''
    started = time.perf_counter()
    setup = prepare(cfg)
    try:
        rows = convergence_study(setup.u0, cfg.flow.t_final, list(cfg.convergence.steps), setup.prox, n_jobs)
    except NonConvergenceError as exc:
        logger.error("convergence: %s", exc)
        _write_outputs(cfg, "convergence", started, result={"status": "nonconvergence", "message": str(exc)})
        return EXIT_NONCONVERGENCE
    except ConstraintViolationError as exc:
        logger.error("convergence: %s", exc)
        _write_outputs(cfg, "convergence", started, result={"status": "measure_bound", "message": str(exc)})
        return EXIT_CHECK
    table = [[r.n_steps, r.tau, r.error, r.bound_rhs, math.nan if r.order is None else r.order] for r in rows]
    checks = [check_error_estimate(rows, cfg.convergence.min_order)]
    # null order in JSON, NaN in the CSV
    records = [dict(zip(CONVERGENCE_COLUMNS, [r.n_steps, r.tau, r.error, r.bound_rhs, r.order])) for r in rows]
    result = {"status": "ok", "rows": records, "reference_steps": 8 * cfg.convergence.steps[-1]}
    code = _verdict(checks)
    _write_outputs(cfg, "convergence", started, checks, result,
        tables=[("convergence.csv", CONVERGENCE_COLUMNS, table)])
    return code


def verify(cfg, n_jobs=1):
    '''Evolve with every state kept and run the full check battery.'''
    started = time.perf_counter()
    setup = prepare(cfg, keep_states=True)
    tests = sample_fields(setup.grid, cfg.verify.n_tests, cfg.verify.max_mode, cfg.verify.amplitude,
        cfg.verify.seed)
    try:
        if cfg.verify.pair:
            partner = mean_zero_project(setup.u0 + tests[0])
            paired = two_flow_run(setup.u0, partner, setup.flow, n_jobs)
            trace = paired.trace_u
        else:
            paired = None
            trace = evolve(setup.u0, setup.flow)
    except NonConvergenceError as exc:
        logger.error("verify: %s", exc)
        _write_outputs(cfg, "verify", started, result={"status": "nonconvergence", "message": str(exc)},
            trace=exc.trace)
        return EXIT_NONCONVERGENCE
    except ConstraintViolationError as exc:
        logger.error("verify: %s", exc)
        _write_outputs(cfg, "verify", started, result={"status": "measure_bound", "message": str(exc)},
            trace=exc.trace)
        return EXIT_CHECK
    checks = run_battery(trace, tests, paired=paired)
    result = _final_result(trace, "ok")
    if setup.policy.truncated:
        singular = singularity_report(trace)
        result["singularity_onset"] = singular.onset_step
        result["truncation_level"] = singular.level
    code = _verdict(checks)
    _write_outputs(cfg, "verify", started, checks, result, trace)
    return code


def sweep_members(cfg):
    '''
    Member configurations of a sweep, one per value of the declared axis, each writing into
    its own subdirectory <axis>_<value>.
    '''
    axis = cfg.sweep.axis
    if axis is None:
        raise ConfigError([ConfigIssue("sweep.axis", 0, "the sweep command needs sweep.axis and sweep.values")])
    members = []
    for value in cfg.sweep.values:
        if axis == "tau":
            member = replace(cfg, flow=replace(cfg.flow, n_steps=max(1, int(round(cfg.flow.t_final / value)))))
        elif axis == "n":
            member = replace(cfg, grid=replace(cfg.grid, n=int(value)))
        elif axis == "amplitude":
            member = replace(cfg, ic=replace(cfg.ic, amplitude=value))
        else:
            member = replace(cfg, flow=replace(cfg.flow, truncation=value))
        directory = os.path.join(cfg.output.directory, "{}_{:g}".format(axis, value))
        members.append((value, member.with_overrides(out_dir=directory)))
    return members


def sweep(cfg, n_jobs=1):
    '''Run every member of the sweep concurrently and aggregate their final states in sweep.csv.'''
    started = time.perf_counter()
    members = sweep_members(cfg)
    outcomes = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(execute_run)(member) for _, member in members)
    table = []
    for (value, _), (code, trace) in zip(members, outcomes):
        if trace is None:
            table.append([value, code] + [math.nan] * 5)
            continue
        last = trace.reports[-1]
        table.append([value, code, last.phi, last.slope, last.excess_mass,
            sum(trace.newton_iters), sum(trace.cg_iters)])
        logger.info("sweep %s = %g: exit %d, phi = %.12g", cfg.sweep.axis, value, code, last.phi)
    code = max(code for code, _ in outcomes)
    result = {"status": "ok" if code == EXIT_OK else "failed", "axis": cfg.sweep.axis,
        "members": [dict(zip(SWEEP_COLUMNS, row)) for row in np.asarray(table, dtype=float).tolist()]}
    _write_outputs(cfg, "sweep", started, result=result, tables=[("sweep.csv", SWEEP_COLUMNS, table)])
    return code
