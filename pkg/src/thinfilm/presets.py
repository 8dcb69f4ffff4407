'''Initial surface profiles u⁰. Every preset is mean-removed before use.'''
import logging

import numpy as np

from thinfilm.exceptions import ConfigError, ConfigIssue
from thinfilm.grid import Field, cosine_mode, mean_zero_project
from thinfilm.io import read_field

logger = logging.getLogger(__name__)

PRESETS = ("cosine", "gaussian_bump", "cone", "random_bandlimited", "from_file")


def bandlimited_values(grid, rng, max_mode, amplitude):
    '''
    Random combination of cos(jπx/L)cos(kπy/L), 1 ≤ j + k, j, k ≤ max_mode, with coefficients
    damped like 1/(1 + j² + k²) and the sum scaled to sup norm amplitude.
    '''
    if max_mode < 1:
        raise ValueError("max_mode must be at least 1, got {}".format(max_mode))
    axes = [c / grid.length for c in grid.centers()]
    modes = np.arange(max_mode + 1)
    if grid.dim == 1:
        coeff = rng.standard_normal(max_mode + 1) / (1.0 + modes ** 2)
        coeff[0] = 0.0
        values = np.cos(np.pi * np.outer(axes[0], modes)) @ coeff
    else:
        coeff = rng.standard_normal((max_mode + 1, max_mode + 1))
        coeff /= 1.0 + modes[:, None] ** 2 + modes[None, :] ** 2
        coeff[0, 0] = 0.0
        cos_x = np.cos(np.pi * np.multiply.outer(axes[0], modes))
        cos_y = np.cos(np.pi * np.multiply.outer(axes[1], modes))
        values = np.einsum("abj,abk,jk->ab", cos_x, cos_y, coeff)
    peak = float(np.max(np.abs(values)))
    return values * (amplitude / peak) if peak > 0 else values


class InitialCondition:
    '''
    Named initial-condition preset.
    Parameters:
        grid - Grid
        name - str, one of PRESETS
        params - dict of preset parameters:
            cosine              k, amplitude
            gaussian_bump       center, width, amplitude
            cone                center, slope, radius
            random_bandlimited  max_mode, amplitude, seed
            from_file           path
    '''
    def __init__(self, grid, name="cosine", **params):
        if name not in PRESETS:
            raise ConfigError([_issue("ic", "unknown preset {!r}, expected one of {}".format(name, PRESETS))])
        self.grid = grid
        self.name = name
        self.params = params

    def _center(self):
        center = self.params.get("center")
        if center is None:
            return (0.5 * self.grid.length,) * self.grid.dim
        center = tuple(float(c) for c in np.atleast_1d(center))
        if len(center) != self.grid.dim:
            raise ConfigError([_issue("ic.center", "needs {} coordinates".format(self.grid.dim))])
        return center

    def _radius(self, center):
        offsets = [x - c for x, c in zip(self.grid.centers(), center)]
        return np.sqrt(sum(o ** 2 for o in offsets))

    def cosine(self):
        return cosine_mode(self.grid, int(self.params.get("k", 1)),
            float(self.params.get("amplitude", 1e-3))).values

    def gaussian_bump(self):
        width = float(self.params.get("width", 0.1))
        amplitude = float(self.params.get("amplitude", 1e-3))
        r = self._radius(self._center())
        return amplitude * np.exp(-r ** 2 / (2.0 * width ** 2))

    def cone(self):
        '''
        V-shaped tip slope·r at the center, bent to zero slope at radius R so the profile is
        flat at the boundary: slope·(r − r²/(2R)) for r ≤ R, slope·R/2 beyond.
        '''
        center = self._center()
        radius = self.params.get("radius")
        if radius is None:
            radius = min(min(c, self.grid.length - c) for c in center)
        radius = float(radius)
        if not radius > 0:
            raise ConfigError([_issue("ic.radius", "cone radius must be positive")])
        slope = float(self.params.get("slope", 0.2))
        r = np.minimum(self._radius(center), radius)
        return slope * (r - r ** 2 / (2.0 * radius))

    def random_bandlimited(self):
        rng = np.random.default_rng(int(self.params.get("seed", 0)))
        return bandlimited_values(self.grid, rng, int(self.params.get("max_mode", 4)),
            float(self.params.get("amplitude", 1e-3)))

    def from_file(self):
        path = self.params.get("path")
        if not path:
            raise ConfigError([_issue("ic.path", "from_file needs a path")])
        return read_field(self.grid, path).values

    def __call__(self):
        if self.name == "cosine":
            values = self.cosine()
        elif self.name == "gaussian_bump":
            values = self.gaussian_bump()
        elif self.name == "cone":
            values = self.cone()
        elif self.name == "random_bandlimited":
            values = self.random_bandlimited()
        else:
            values = self.from_file()
        raw = Field(self.grid, values)
        removed = float(np.mean(raw.values))
        logger.info("initial condition %s: removed mean %.6e", self.name, removed)
        return mean_zero_project(raw)


def _issue(key, reason):
    return ConfigIssue(key, 0, reason)


def build_initial_condition(grid, spec):
    '''
    Initial state from an InitialConditionSpec.
    Returns:
        Field, mean-zero
    '''
    return InitialCondition(grid, spec.preset, **spec.params())()
