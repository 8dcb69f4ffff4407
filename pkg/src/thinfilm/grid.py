'''Uniform cell-centered grids, the homogeneous-Neumann Laplacian and discrete norms.

Cells are centered at x_i = (i + 1/2) h. The Neumann condition is realized by
reflecting ghost cells, so the stencil telescopes: the Laplacian of any field sums to
zero and constants span its kernel.
'''
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sps

from thinfilm.exceptions import GridError

logger = logging.getLogger(__name__)

# relative tolerance of the mean-zero certificate
MEAN_ZERO_RTOL = 1e-12


@dataclass(frozen=True)
class Grid:
    '''
    Uniform square grid with the same number of cells per axis.
    Parameters:
        dim - int, 1 or 2
        n - int, cells per axis
        length - float, physical extent per axis
    '''
    dim: int
    n: int
    length: float

    @property
    def h(self):
        return self.length / self.n

    @property
    def cell_volume(self):
        return self.h ** self.dim

    @property
    def volume(self):
        return self.length ** self.dim

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def size(self):
        return self.n ** self.dim

    def centers(self):
        '''Cell-center coordinates, one array per axis ("ij" indexing).'''
        x = (np.arange(self.n) + 0.5) * self.h
        if self.dim == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def zeros(self):
        return Field(self, np.zeros(self.shape), mean_zero=True)


def build_grid(dim, n, length):
    '''
    Create a Grid after checking its parameters.
    Parameters:
        dim - int in {1, 2}
        n - int, number of cells per axis, at least 4
        length - float, positive extent per axis
    Returns:
        Grid
    '''
    if dim not in (1, 2):
        raise GridError("dim must be 1 or 2, got {}".format(dim))
    if int(n) != n or n < 4:
        raise GridError("n must be an integer >= 4, got {}".format(n))
    if not np.isfinite(length) or length <= 0:
        raise GridError("length must be positive, got {}".format(length))
    return Grid(int(dim), int(n), float(length))


class Field:
    '''
    Real grid function, the discrete representative of a state u in H.
    Parameters:
        grid - Grid the values live on
        values - array of shape grid.shape, all finite
        mean_zero - bool, certificate that the cell-volume weighted mean vanishes
    '''
    __slots__ = ("grid", "values", "mean_zero")

    def __init__(self, grid, values, mean_zero=False, _inherited=False):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise GridError("field of shape {} does not fit grid {}".format(values.shape, grid.shape))
        if not np.all(np.isfinite(values)):
            raise GridError("field values must be finite")
        # combinations of certified fields inherit the certificate unchecked
        if mean_zero and not _inherited:
            slack = max(MEAN_ZERO_RTOL * np.sqrt(np.sum(values ** 2)),
                16.0 * np.finfo(float).eps * np.sum(np.abs(values)))
            if abs(np.sum(values)) > slack:
                raise GridError("mean-zero certificate requested for a field with mean {:.3e}".format(
                    float(np.mean(values))))
        self.grid = grid
        self.values = values
        self.mean_zero = bool(mean_zero)

    def _combine(self, values, mean_zero):
        return Field(self.grid, values, mean_zero, _inherited=True)

    def _check(self, other):
        if not isinstance(other, Field):
            return NotImplemented
        if other.grid != self.grid:
            raise GridError("fields live on different grids")
        return True

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self._combine(self.values + other.values, self.mean_zero and other.mean_zero)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self._combine(self.values - other.values, self.mean_zero and other.mean_zero)

    def __mul__(self, scalar):
        return self._combine(float(scalar) * self.values, self.mean_zero)

    __rmul__ = __mul__

    def __neg__(self):
        return self._combine(-self.values, self.mean_zero)

    def copy(self):
        return self._combine(self.values.copy(), self.mean_zero)

    def __repr__(self):
        return "Field(dim={}, n={}, mean_zero={})".format(self.grid.dim, self.grid.n, self.mean_zero)


def apply_laplacian(grid, values):
    '''
    3-point (1D) / 5-point (2D) Laplacian with reflected ghost cells.
    Parameters:
        grid - Grid
        values - array of shape grid.shape
    Returns:
        array of shape grid.shape
    '''
    padded = np.pad(values, 1, mode="symmetric")
    if grid.dim == 1:
        out = padded[:-2] + padded[2:] - 2.0 * values
    else:
        out = (padded[:-2, 1:-1] + padded[2:, 1:-1]
            + padded[1:-1, :-2] + padded[1:-1, 2:] - 4.0 * values)
    return out / grid.h ** 2


def neumann_laplacian(g, f):
    '''Discrete Laplacian Δ_h f of a Field on grid g.'''
    if f.grid != g:
        raise GridError("field does not live on the given grid")
    return Field(g, apply_laplacian(g, f.values))


@lru_cache(maxsize=16)
def laplacian_matrix(grid):
    '''
    Assembled Neumann Laplacian as a sparse CSR matrix acting on raveled fields.
    Rows sum to zero and the matrix is symmetric.
    '''
    n, h = grid.n, grid.h
    main = -2.0 * np.ones(n)
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    lap1 = sps.diags([off, main, off], [-1, 0, 1], format="csr") / h ** 2
    if grid.dim == 1:
        return lap1
    eye = sps.identity(n, format="csr")
    return (sps.kron(lap1, eye) + sps.kron(eye, lap1)).tocsr()


def discrete_eigenvalue(grid, k):
    '''Eigenvalue of the 1D reflecting stencil for the mode cos(kπx/L).'''
    return -(2.0 / grid.h ** 2) * (1.0 - np.cos(k * np.pi * grid.h / grid.length))


def mean_zero_project(f):
    '''Subtract the cell-volume weighted mean and certify the result.'''
    values = f.values - np.mean(f.values)
    # second pass removes the rounding error of a large first mean
    values -= np.mean(values)
    return Field(f.grid, values, mean_zero=True)


def inner(f, g):
    '''Discrete H inner product cell_volume · Σ f_i g_i.'''
    if f.grid != g.grid:
        raise GridError("fields live on different grids")
    return float(f.grid.cell_volume * np.sum(f.values * g.values))


def norm_h(f):
    return float(np.sqrt(f.grid.cell_volume * np.sum(f.values ** 2)))


def norm_values(grid, values):
    '''norm_h for a raw array on grid.'''
    return float(np.sqrt(grid.cell_volume * np.sum(values ** 2)))


def measure_norms(lap):
    '''
    Discrete surrogate of ‖Δu‖ in M(Ω) with its positive and negative parts.
    Parameters:
        lap - Field, a Laplacian image
    Returns:
        (total, pos, neg) - floats with total = pos + neg
    '''
    cv = lap.grid.cell_volume
    pos = float(cv * np.sum(np.maximum(lap.values, 0.0)))
    neg = float(cv * np.sum(np.maximum(-lap.values, 0.0)))
    return pos + neg, pos, neg


def cosine_mode(grid, k, amplitude=1.0):
    '''amplitude · cos(kπx/L) along the first axis (constant along the second in 2D).'''
    x = grid.centers()[0]
    return Field(grid, amplitude * np.cos(k * np.pi * x / grid.length), mean_zero=(k != 0))


def mode_amplitude(f, k):
    '''Coefficient of cos(kπx/L) in f, by H-orthogonal projection.'''
    mode = cosine_mode(f.grid, k)
    return inner(f, mode) / inner(mode, mode)
