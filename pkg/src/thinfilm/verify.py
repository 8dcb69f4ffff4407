'''Checks of the inequalities every discrete trajectory must satisfy.

Each check reads a FlowTrace (or a paired flow, or a convergence table) and returns a
CheckReport. Tolerances are an absolute floor plus a relative factor times the scale of the
quantities compared; the solver tolerance grad_tol enters wherever an inequality is exact
for exact minimizers. A check reports its worst item, the one with the largest
violation/tolerance ratio, so passed ⇔ max_violation ≤ tolerance.

Checks are pure functions of their inputs: rerunning a check gives an identical report.
'''
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from thinfilm.energy import metric_slope, prox_energy, truncation_l2_terms
from thinfilm.flow import strong_residual
from thinfilm.grid import Field, apply_laplacian, mean_zero_project, norm_h
from thinfilm.presets import bandlimited_values

logger = logging.getLogger(__name__)

# relative rounding floor of energy and norm comparisons
ROUNDING = 1e-12
# relative slack of the regularization estimates on smooth runs
SMOOTH_RTOL = 1e-6
_TINY = 1e-300


@dataclass
class CheckReport:
    '''
    Verdict of one check.
    Attributes:
        name - str
        max_violation - float, violation of the worst item (0 when every item holds)
        tolerance - float, tolerance of that item
        passed - bool, max_violation ≤ tolerance
        context - dict of run parameters and the worst item's label
    '''
    name: str
    max_violation: float
    tolerance: float
    passed: bool
    context: Dict[str, object] = field(default_factory=dict)


class _Verdict:
    '''Collects (violation, tolerance, label) items and keeps the worst one.'''

    def __init__(self, name, context):
        self.name = name
        self.context = dict(context)
        self.worst = None
        self.count = 0

    def add(self, violation, tolerance, label):
        violation = max(float(violation), 0.0)
        tolerance = max(float(tolerance), _TINY)
        self.count += 1
        ratio = violation / tolerance
        if self.worst is None or ratio > self.worst[0]:
            self.worst = (ratio, violation, tolerance, label)

    def report(self):
        if self.worst is None:
            context = dict(self.context, items=0)
            return CheckReport(self.name, 0.0, 0.0, True, context)
        _, violation, tolerance, label = self.worst
        context = dict(self.context, items=self.count, worst=label)
        passed = violation <= tolerance
        logger.debug("%s: violation %.3e, tolerance %.3e at %s", self.name, violation, tolerance, label)
        return CheckReport(self.name, violation, tolerance, passed, context)


def _context(trace):
    return {"n_steps": trace.n_steps, "tau": trace.tau, "N": trace.policy.describe(),
        "grad_tol": trace.grad_tol, "rounding_floor": trace.rounding_floor}


def _phi(trace):
    return trace.series("phi_prox")


def _test_energies(trace, tests):
    return [prox_energy(v, trace.policy) for v in tests]


def check_evi(trace, tests):
    '''
    Discrete evolution variational inequality, for every step k ≥ 1 and test field v:
        (‖u_k − v‖² − ‖u_{k−1} − v‖²)/(2τ) ≤ φ(v) − φ(u_k).
    Tolerance 10·grad_tol·max(‖u_k − v‖, ‖u_{k−1} − v‖) plus rounding.
    '''
    states = trace.require_states()
    verdict = _Verdict("evi", _context(trace))
    phi = _phi(trace)
    cv = trace.grid.cell_volume
    for j, (v, energy_v) in enumerate(zip(tests, _test_energies(trace, tests))):
        dist_prev = norm_h(states[0] - v)
        for k in range(1, len(states)):
            u_prev, u_k = states[k - 1].values, states[k].values
            lhs = cv * np.sum((u_k - u_prev) * (u_k + u_prev - 2.0 * v.values)) / (2.0 * trace.tau)
            dist = norm_h(states[k] - v)
            scale = max(abs(energy_v), abs(phi[k]), abs(lhs))
            tol = 10.0 * trace.grad_tol * max(dist, dist_prev) + ROUNDING * scale
            verdict.add(lhs - (energy_v - phi[k]), tol, "step {} test {}".format(k, j))
            dist_prev = dist
    return verdict.report()


def check_regularization(trace, tests):
    '''
    Regularization estimates with the flat minimizer ū = 0, for every step k ≥ 1:
        φ(u_k) ≤ φ(v) + ‖v − u⁰‖²/(2t_k)        for every test field v
        slope(u_k) ≤ ‖u⁰‖/t_k
        φ(u_k) − |Ω| ≤ ‖u⁰‖²/(2t_k)
        ‖u_k‖ ≤ ‖u_{k−1}‖
    '''
    states = trace.require_states()
    verdict = _Verdict("regularization", _context(trace))
    phi = _phi(trace)
    gt = trace.grad_tol
    norm0 = norm_h(states[0])
    volume = trace.grid.volume
    displacement_sum = np.cumsum(trace.displacements)
    energies = _test_energies(trace, tests)
    dist0 = [norm_h(v - states[0]) for v in tests]
    max_dist = [0.0] * len(tests)
    norm_prev = norm0
    for k in range(1, len(states)):
        t = trace.times[k]
        drift = 10.0 * gt * displacement_sum[k]
        for j, v in enumerate(tests):
            max_dist[j] = max(max_dist[j], norm_h(states[k] - v))
            rhs = energies[j] + dist0[j] ** 2 / (2.0 * t)
            tol = SMOOTH_RTOL * max(abs(phi[k]), abs(rhs)) + 10.0 * gt * max_dist[j] + drift
            verdict.add(phi[k] - rhs, tol, "energy step {} test {}".format(k, j))
        slope = trace.reports[k].slope
        bound = norm0 / t
        verdict.add(slope - bound, SMOOTH_RTOL * max(slope, bound) + 10.0 * gt, "slope step {}".format(k))
        rhs = volume + norm0 ** 2 / (2.0 * t)
        tol = SMOOTH_RTOL * max(abs(phi[k]), rhs) + 10.0 * gt * norm_prev + drift
        verdict.add(phi[k] - rhs, tol, "asymptotic step {}".format(k))
        norm_k = norm_h(states[k])
        verdict.add(norm_k - norm_prev, ROUNDING * norm_prev + 10.0 * trace.tau * gt, "norm step {}".format(k))
        norm_prev = norm_k
    return verdict.report()


def check_dphi_decay(trace, tests):
    '''
    Slope regularization, for every step k ≥ 1 and test field v:
        slope(u_k)² ≤ slope(v)² + ‖v − u⁰‖²/t_k²
    '''
    states = trace.require_states()
    verdict = _Verdict("dphi_decay", _context(trace))
    gt = trace.grad_tol
    slopes = [metric_slope(v, trace.policy) for v in tests]
    dist0 = [norm_h(v - states[0]) for v in tests]
    for k in range(1, len(states)):
        t = trace.times[k]
        s_k = trace.reports[k].slope
        for j in range(len(tests)):
            reach = dist0[j] / t
            rhs = slopes[j] ** 2 + reach ** 2
            tol = SMOOTH_RTOL * max(s_k ** 2, rhs) + 20.0 * gt * (s_k + slopes[j] + reach + gt)
            verdict.add(s_k ** 2 - rhs, tol, "step {} test {}".format(k, j))
    return verdict.report()


def check_strong_residual(trace):
    '''
    Discrete strong form ‖(u_k − u_{k−1})/τ − Δ_h e^{−min{Δ_h u_k, N}}‖_h recomputed from the
    states. The residual is the gradient norm the Newton solver terminated on, so it lies below
    grad_tol (rounding floor included). The accepted bound is max(grad_tol, grad_tol/τ): equal to
    grad_tol/τ for τ ≤ 1, and looser than grad_tol/τ for τ > 1, where the solver only guarantees
    grad_tol.
    '''
    states = trace.require_states()
    verdict = _Verdict("strong_residual", _context(trace))
    tol = max(trace.grad_tol, trace.grad_tol / trace.tau) * (1.0 + 1e-9)
    for k in range(1, len(states)):
        residual = strong_residual(states[k - 1], states[k], trace.tau, trace.policy)
        verdict.add(residual, tol, "step {}".format(k))
    return verdict.report()


def check_dissipation_pair(trace):
    '''
    Energy dissipation in its exact discrete form
        φ(u_k) + ‖u_k − u_{k−1}‖²/(2τ) ≤ φ(u_{k−1})        slack 10·grad_tol
    and E(u_k) ≤ E(u⁰) with relative slack 10⁻⁶. On truncated runs the E-part is
    logged and kept out of the verdict.
    '''
    verdict = _Verdict("dissipation_pair", _context(trace))
    phi = _phi(trace)
    for k in range(1, len(phi)):
        d = trace.displacements[k]
        lhs = phi[k] + d ** 2 / (2.0 * trace.tau)
        tol = 10.0 * trace.grad_tol * max(1.0, d) + ROUNDING * max(abs(phi[k - 1]), abs(lhs))
        verdict.add(lhs - phi[k - 1], tol, "energy step {}".format(k))

    e_series = trace.series("dissipation_E")
    e_verdict = _Verdict("dissipation_E", _context(trace))
    for k in range(1, len(e_series)):
        e_verdict.add(e_series[k] - e_series[0],
            SMOOTH_RTOL * e_series[0] + 10.0 * trace.grad_tol * math.sqrt(2.0 * e_series[0]) + _TINY,
            "E step {}".format(k))
    e_report = e_verdict.report()
    if trace.policy.truncated:
        if not e_report.passed:
            logger.warning("E-dissipation fails on a truncated run (diagnostic only): %.3e > %.3e",
                e_report.max_violation, e_report.tolerance)
        report = verdict.report()
        report.context["E_violation_logged"] = e_report.max_violation
        return report
    if e_verdict.worst is not None:
        verdict.add(*e_verdict.worst[1:])
    return verdict.report()


def check_mass_split(trace):
    '''‖(Δ_h u)⁺‖ = ‖(Δ_h u)⁻‖ at every step, up to 10⁻¹⁰·‖Δ_h u‖.'''
    verdict = _Verdict("mass_split", _context(trace))
    for k, r in enumerate(trace.reports):
        verdict.add(abs(r.measure_pos - r.measure_neg), 1e-10 * r.measure_total, "step {}".format(k))
    return verdict.report()


def check_ut_bound(trace):
    '''
    ‖u_t‖ bound ut_norm_k ≤ slope(u⁰)·(1 + 10⁻⁶), and ut_norm nonincreasing with relative
    slack 10⁻⁶ (logged only on truncated runs).
    '''
    verdict = _Verdict("ut_bound", _context(trace))
    slope0 = trace.reports[0].slope
    gt = trace.grad_tol
    for k in range(1, len(trace.ut_norms)):
        verdict.add(trace.ut_norms[k] - slope0, SMOOTH_RTOL * slope0 + 10.0 * gt, "bound step {}".format(k))
    trend = _Verdict("ut_trend", _context(trace))
    for k in range(2, len(trace.ut_norms)):
        prev = trace.ut_norms[k - 1]
        trend.add(trace.ut_norms[k] - prev, SMOOTH_RTOL * prev + 10.0 * gt, "trend step {}".format(k))
    if trace.policy.truncated:
        trend_report = trend.report()
        if not trend_report.passed:
            logger.warning("u_t monotonicity fails on a truncated run (diagnostic only): %.3e > %.3e",
                trend_report.max_violation, trend_report.tolerance)
    elif trend.worst is not None:
        verdict.add(*trend.worst[1:])
    return verdict.report()


def check_measure_bound(trace):
    '''
    Inactivity of the measure ball: ‖Δ_h u_k‖ ≤ 2φ(u⁰) + 10⁻⁸. With truncation the bound is
    taken against φ(u_k) itself, since 2‖(Δ_h u)⁻‖ ≤ 2φ holds for every state.
    '''
    verdict = _Verdict("measure_bound", dict(_context(trace), c_star=trace.c_star))
    phi0 = trace.reports[0].phi
    for k, r in enumerate(trace.reports):
        bound = 2.0 * (r.phi if trace.policy.truncated else phi0)
        verdict.add(r.measure_total - bound, 1e-8 + 1e-10 * r.measure_total, "step {}".format(k))
    return verdict.report()


def check_truncation_bound(trace):
    '''
    L² bound ‖min{Δ_h u_k, N}‖² ≤ 4e^N·A + 2|Ω|N² on every state, with A the reported raw
    energy (untruncated runs use N = 1). A reported raw energy below the recomputed one
    counts as a violation of the precondition.
    '''
    states = trace.require_states()
    level = trace.policy.level_N if trace.policy.truncated else 1.0
    verdict = _Verdict("truncation_bound", dict(_context(trace), level=level))
    for k, u in enumerate(states):
        mu = Field(trace.grid, apply_laplacian(trace.grid, u.values))
        A = trace.reports[k].phi_raw
        lhs, rhs, raw = truncation_l2_terms(mu, level, A)
        verdict.add(raw - A, ROUNDING * raw, "precondition step {}".format(k))
        verdict.add(lhs - rhs, ROUNDING * rhs, "bound step {}".format(k))
    return verdict.report()


def check_maximal_slope(trace):
    '''
    Integrated maximal-slope budget
        Σ_k τ(½ut_k² + ½slope(u_k)²) ≤ φ(u⁰) − φ(u_n)
    with slack 10·grad_tol·(d_k + τ(slope_k + ut_k)) per step.
    '''
    verdict = _Verdict("maximal_slope", _context(trace))
    phi = _phi(trace)
    tau = trace.tau
    spent = slack = 0.0
    for k in range(1, len(phi)):
        ut = trace.ut_norms[k]
        s = trace.reports[k].slope
        spent += 0.5 * tau * (ut ** 2 + s ** 2)
        slack += 10.0 * trace.grad_tol * (trace.displacements[k] + tau * (s + ut))
    budget = phi[0] - phi[-1]
    verdict.add(spent - budget, slack + ROUNDING * max(abs(phi[0]), spent), "run")
    return verdict.report()


def check_mean_conservation(trace):
    '''|mean(u_k)| ≤ 10⁻¹²·‖u_k‖_h at every step.'''
    states = trace.require_states()
    verdict = _Verdict("mean_conservation", _context(trace))
    for k, u in enumerate(states):
        verdict.add(abs(float(np.mean(u.values))), ROUNDING * norm_h(u), "step {}".format(k))
    return verdict.report()


def check_contraction(paired):
    '''
    Contraction of two flows: d_k ≤ d_{k−1} and d_k ≤ d_0, relative slack 10⁻¹⁰ plus the
    inexactness τ(grad_tol_u + grad_tol_v) per step.
    '''
    tu, tv = paired.trace_u, paired.trace_v
    gt = tu.grad_tol + tv.grad_tol
    verdict = _Verdict("contraction", dict(_context(tu), pairs=1))
    d = paired.distances
    for k in range(1, len(d)):
        verdict.add(d[k] - d[k - 1], 1e-10 * d[k - 1] + 10.0 * tu.tau * gt, "step {}".format(k))
        verdict.add(d[k] - d[0], 1e-10 * d[0] + 10.0 * tu.times[k] * gt, "initial step {}".format(k))
    return verdict.report()


def check_error_estimate(rows, min_order=None):
    '''
    Error estimate error ≤ (τ/√2)·slope(u⁰) on every row of a convergence table and, when
    min_order is given, observed order ≥ min_order between successive rows.
    '''
    verdict = _Verdict("error_estimate", {"rows": len(rows), "min_order": min_order})
    for row in rows:
        verdict.add(row.error - row.bound_rhs, SMOOTH_RTOL * row.bound_rhs + 1e-14,
            "bound n={}".format(row.n_steps))
        if min_order is not None and row.order is not None:
            verdict.add(min_order - row.order, 1e-12, "order n={}".format(row.n_steps))
    return verdict.report()


@dataclass
class SingularityReport:
    '''Per-step singularity diagnostics; onset_step is the first step with excess_mass > 0.'''
    level: Optional[float]
    steps: List[int]
    times: List[float]
    max_pos_laplacian: List[float]
    excess_mass: List[float]
    neg_min: List[float]
    onset_step: Optional[int]


def singularity_report(trace, N=None):
    '''
    Series of (max_pos_laplacian, excess_mass, min Δ_h u) with the onset of positive excess.
    Parameters:
        trace - FlowTrace
        N - float or None, level defining the excess; None uses the trace's policy. A level
            other than the trace's is evaluated on the stored states, or on the snapshots
            when states were not kept.
    Returns:
        SingularityReport
    '''
    if N is None or (trace.policy.truncated and N == trace.policy.level_N):
        level = trace.policy.level_N
        steps = list(range(len(trace.reports)))
        max_pos = list(trace.series("max_pos_laplacian"))
        excess = list(trace.series("excess_mass"))
        neg_min = list(trace.series("min_laplacian"))
    else:
        if not N > 0:
            raise ValueError("level must be positive, got {}".format(N))
        level = float(N)
        if trace.states is not None:
            items = list(enumerate(trace.states))
        elif trace.snapshots:
            items = sorted(trace.snapshots.items())
        else:
            raise ValueError("a custom level needs states or snapshots")
        cv = trace.grid.cell_volume
        steps, max_pos, excess, neg_min = [], [], [], []
        for k, u in items:
            lap = apply_laplacian(trace.grid, u.values)
            steps.append(k)
            max_pos.append(max(0.0, float(np.max(lap))))
            excess.append(float(cv * np.sum(np.maximum(lap - level, 0.0))))
            neg_min.append(float(np.min(lap)))
    onset = next((k for k, e in zip(steps, excess) if e > 0), None)
    logger.info("singularity: level %s, onset %s, max excess %.3e",
        "none" if level is None else "{:.6g}".format(level), onset, max(excess))
    return SingularityReport(level, steps, [trace.times[k] for k in steps], max_pos, excess,
        neg_min, onset)


def sample_fields(grid, count, max_mode=4, amplitude=1e-2, seed=0):
    '''
    Reproducible random band-limited mean-zero test fields.
    Parameters:
        grid - Grid
        count - int, number of fields
        max_mode - int, highest cosine index per axis
        amplitude - float, sup norm of every field
        seed - int
    Returns:
        list of Field
    '''
    rng = np.random.default_rng(seed)
    return [mean_zero_project(Field(grid, bandlimited_values(grid, rng, max_mode, amplitude)))
        for _ in range(count)]


CORRUPTIONS = ("noise", "mass", "energy", "speed", "mean", "raw")


def corrupt_trace(trace, kind, seed=0):
    '''
    Copy of trace with a documented defect, used as a negative control.
    Kinds and the checks they break:
        noise  - 10⁻³ mean-zero noise added to every state after the first: strong_residual
        mass   - reports replaced by the measure norms of a nonnegative non-Laplacian density:
                 mass_split, measure_bound
        energy - φ of the last state raised above φ(u⁰): dissipation_pair, evi (with u_{n−1}
                 among the tests), regularization (with u⁰ among the tests), maximal_slope
        speed  - ut_norm, displacement and slope scaled by 10 after the first step: ut_bound,
                 dphi_decay (with u⁰ among the tests), maximal_slope, dissipation_pair
        mean   - a constant added to every state after the first: mean_conservation
        raw    - raw energies reported as zero: truncation_bound
    '''
    if kind not in CORRUPTIONS:
        raise ValueError("unknown corruption {!r}, expected one of {}".format(kind, CORRUPTIONS))
    reports = [replace(r) for r in trace.reports]
    states = None if trace.states is None else [u.copy() for u in trace.states]
    out = replace(trace, reports=reports, states=states, times=list(trace.times),
        displacements=list(trace.displacements), ut_norms=list(trace.ut_norms),
        pde_residuals=list(trace.pde_residuals), snapshots=dict(trace.snapshots),
        flags=list(trace.flags) + ["corrupted:" + kind])
    last = len(reports) - 1
    if kind == "noise":
        rng = np.random.default_rng(seed)
        states = out.require_states()
        for k in range(1, len(states)):
            noise = mean_zero_project(Field(trace.grid, 1e-3 * rng.standard_normal(trace.grid.shape)))
            states[k] = states[k] + noise
    elif kind == "mass":
        phi0 = reports[0].phi
        for k, r in enumerate(reports):
            total = r.measure_total + 2.0 * phi0 + trace.grid.volume
            reports[k] = replace(r, measure_total=total, measure_pos=total, measure_neg=0.0)
    elif kind == "energy":
        raised = reports[0].phi_prox + 1e-3 * max(1.0, abs(reports[0].phi_prox))
        reports[last] = replace(reports[last], phi=raised, phi_prox=raised)
    elif kind == "speed":
        for k in range(1, len(reports)):
            out.ut_norms[k] *= 10.0
            out.displacements[k] *= 10.0
            slope = 10.0 * reports[k].slope
            reports[k] = replace(reports[k], slope=slope, dissipation_E=0.5 * slope ** 2)
    elif kind == "mean":
        states = out.require_states()
        for k in range(1, len(states)):
            shift = 1e-6 * max(1.0, norm_h(states[k]))
            states[k] = Field(trace.grid, states[k].values + shift)
    elif kind == "raw":
        for k, r in enumerate(reports):
            reports[k] = replace(r, phi_raw=0.0, free_energy_F=0.0)
    return out


def battery_tests(trace, tests):
    '''tests extended by u⁰, u_{n−1} and u_n, the anchors the negative controls rely on.'''
    anchors = []
    if trace.states is not None:
        anchors = [trace.states[0]]
        if len(trace.states) > 2:
            anchors.append(trace.states[-2])
        if len(trace.states) > 1:
            anchors.append(trace.states[-1])
    return list(tests) + anchors


def run_battery(trace, tests, paired=None, rows=None, min_order=None):
    '''
    Run every trace check; contraction and error-estimate checks join when paired flows or a
    convergence table are given.
    Returns:
        list of CheckReport
    '''
    tests = battery_tests(trace, tests)
    reports = [
        check_evi(trace, tests),
        check_regularization(trace, tests),
        check_dphi_decay(trace, tests),
        check_strong_residual(trace),
        check_dissipation_pair(trace),
        check_mass_split(trace),
        check_ut_bound(trace),
        check_measure_bound(trace),
        check_truncation_bound(trace),
        check_maximal_slope(trace),
        check_mean_conservation(trace),
    ]
    if paired is not None:
        reports.append(check_contraction(paired))
    if rows is not None:
        reports.append(check_error_estimate(rows, min_order))
    for report in reports:
        log = logger.info if report.passed else logger.error
        log("check %-18s %s  violation %.3e  tolerance %.3e", report.name,
            "PASS" if report.passed else "FAIL", report.max_violation, report.tolerance)
    return reports
