"""Temporal order of the minimizing-movement scheme against an 8x finer run."""
import numpy as np

from thinfilm.flow import convergence_study
from thinfilm.grid import build_grid, cosine_mode, discrete_eigenvalue
from thinfilm.presets import InitialCondition
from thinfilm.prox import ProxOptions
from thinfilm.verify import check_error_estimate
from validation.utils import plot_series, save_figure, save_table

grid = build_grid(1, 64, 1.0)
t_final = 1.0 / discrete_eigenvalue(grid, 1) ** 2
steps = [8, 16, 32, 64]

for name, u0 in (("cosine", cosine_mode(grid, 1, 1e-3)),
        ("bandlimited", InitialCondition(grid, "random_bandlimited", amplitude=1e-2, seed=1)())):
    rows = convergence_study(u0, t_final, steps, ProxOptions(tau=1.0), n_jobs=4)
    report = check_error_estimate(rows, min_order=0.9)
    print("{}: error estimate {}".format(name, "PASS" if report.passed else "FAIL"))
    save_table(__file__, "convergence_" + name, ("n_steps", "tau", "error", "bound_rhs", "order"),
        [[r.n_steps, r.tau, r.error, r.bound_rhs, float("nan") if r.order is None else r.order] for r in rows])
    taus = np.array([r.tau for r in rows])
    fig, ax = plot_series(taus, [np.array([r.error for r in rows]), np.array([r.bound_rhs for r in rows])],
        ["error against 8x finer run", "τ/√2 · |∂φ|(u0)"], "τ", "error", figtitle=name, logx=True, logy=True)
    save_figure(__file__, fig, "convergence_" + name)
