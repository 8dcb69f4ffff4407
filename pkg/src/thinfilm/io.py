'''Readers and writers of traces, snapshots, tables and summaries.'''
import logging
import os

import jsons
import numpy as np

from thinfilm.energy import chemical_potential
from thinfilm.exceptions import GridError
from thinfilm.grid import Field

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("step", "time", "phi", "phi_raw", "free_energy_F", "dissipation_E", "measure_total",
    "measure_pos", "measure_neg", "max_pos_laplacian", "excess_mass", "slope", "displacement",
    "ut_norm", "pde_residual", "newton_iters", "cg_iters", "clamp_events")
FLOAT_FORMAT = "%.17g"


def trace_rows(trace):
    '''One row per step in TRACE_COLUMNS order.'''
    rows = []
    for k, r in enumerate(trace.reports):
        rows.append([k, trace.times[k], r.phi, r.phi_raw, r.free_energy_F, r.dissipation_E,
            r.measure_total, r.measure_pos, r.measure_neg, r.max_pos_laplacian, r.excess_mass,
            r.slope, trace.displacements[k], trace.ut_norms[k], trace.pde_residuals[k],
            trace.newton_iters[k], trace.cg_iters[k], r.clamp_events])
    return np.array(rows, dtype=float)


def write_table_csv(path, columns, rows):
    '''
    Write a numeric table with a header line.
    Parameters:
        path - str
        columns - sequence of column names
        rows - 2D array-like, NaN for missing entries
    '''
    data = np.atleast_2d(np.asarray(rows, dtype=float))
    if data.size == 0:
        data = np.zeros((0, len(columns)))
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(columns), comments="")
    logger.debug("wrote %s (%d rows)", path, data.shape[0])


def write_trace_csv(path, trace):
    write_table_csv(path, TRACE_COLUMNS, trace_rows(trace))


def read_table_csv(path):
    '''
    Read a table written by write_table_csv.
    Returns:
        dict column name -> 1D array
    '''
    with open(path) as handle:
        header = handle.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] == 0:
        return {name: np.zeros(0) for name in header}
    return {name: data[:, i] for i, name in enumerate(header)}


def read_trace_csv(path):
    table = read_table_csv(path)
    missing = [c for c in TRACE_COLUMNS if c not in table]
    if missing:
        raise ValueError("{} lacks trace columns {}".format(path, missing))
    return table


def write_field(path, field):
    '''One value per line, row-major in 2D.'''
    np.savetxt(path, field.values.ravel(), fmt=FLOAT_FORMAT)


def read_field(grid, path):
    '''
    Read a field written by write_field (or any one-value-per-line file).
    Returns:
        Field, not mean-corrected
    '''
    values = np.loadtxt(path, ndmin=1).ravel()
    if values.size != grid.size:
        raise GridError("{} holds {} values, grid needs {}".format(path, values.size, grid.size))
    return Field(grid, values.reshape(grid.shape))


def write_snapshots(out_dir, trace):
    '''
    snapshot_<step>.csv and potential_<step>.csv (the field e^{−min{Δ_h u, N}}) for every
    stored snapshot.
    Returns:
        list of written paths
    '''
    paths = []
    for step, u in sorted(trace.snapshots.items()):
        for stem, field in (("snapshot", u), ("potential", chemical_potential(u, trace.policy))):
            path = os.path.join(out_dir, "{}_{}.csv".format(stem, step))
            write_field(path, field)
            paths.append(path)
    return paths


def _strict(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {key: _strict(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_strict(value) for value in obj]
    return obj


def write_json(path, obj):
    '''
    Serialize obj with jsons, keys sorted so equal inputs give equal bytes.
    Non-finite floats are written as null, so the file is strict JSON.
    '''
    text = jsons.dumps(_strict(jsons.dump(obj)), jdkwargs={"sort_keys": True, "indent": 2, "allow_nan": False})
    with open(path, "w") as handle:
        handle.write(text + "\n")
    logger.debug("wrote %s", path)


def read_json(path):
    with open(path) as handle:
        return jsons.loads(handle.read())
