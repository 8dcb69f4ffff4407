"""Contraction of paired flows and of a flow against its mirror image."""
import numpy as np

from thinfilm.flow import FlowConfig, two_flow_run
from thinfilm.grid import Field, build_grid, mean_zero_project
from thinfilm.verify import check_contraction, sample_fields
from validation.utils import plot_series, save_figure, save_table

grid = build_grid(1, 64, 1.0)
cfg = FlowConfig(2e-3, 50)
fields = sample_fields(grid, 20, amplitude=2e-2, seed=3)

# ten random pairs
rows = []
for j, (u0, w) in enumerate(zip(fields[::2], fields[1::2])):
    pair = two_flow_run(u0, mean_zero_project(u0 + w), cfg, n_jobs=2)
    report = check_contraction(pair)
    rows.append([j, pair.distances[0], pair.distances[-1], report.max_violation, report.passed])
save_table(__file__, "contraction_pairs", ("pair", "d0", "dn", "violation", "passed"), rows)

# mirror partner, x -> L - x
u0 = fields[0]
mirrored = two_flow_run(u0, Field(grid, u0.values[::-1].copy(), mean_zero=True), cfg, n_jobs=2)
print("mirror: {}".format("PASS" if check_contraction(mirrored).passed else "FAIL"))
save_table(__file__, "contraction_mirror", ("time", "distance"),
    np.column_stack([mirrored.trace_u.times, mirrored.distances]))

fig, ax = plot_series(np.array(mirrored.trace_u.times), [np.array(mirrored.distances)], ["‖u − Ru‖"], "time",
    "distance", figtitle="Flow against its mirror image")
save_figure(__file__, fig, "contraction_mirror")
