'''Run configuration: a flat text of `key = value` lines.

Blank lines and everything after `#` are ignored. Every key may appear once. All problems
are collected and raised together as a ConfigError.

    grid.dim             1 | 2                                  default 1
    grid.n               integer ≥ 4                            default 64
    grid.length          positive real                          default 1
    ic                   cosine | gaussian_bump | cone | random_bandlimited | from_file
                                                                default cosine
    ic.k                 nonnegative integer                    default 1
    ic.amplitude         real                                   default 1e-3
    ic.center            comma separated reals, one per axis    default domain center
    ic.width             positive real                          default 0.1
    ic.slope             real                                   default 0.2
    ic.radius            positive real                          default distance to the wall
    ic.max_mode          integer ≥ 1                            default 4
    ic.seed              nonnegative integer                    default 0
    ic.path              file of one value per line             required by from_file
    flow.t_final         positive real                          default 0.01
    flow.n_steps         integer ≥ 1                            default 100
    flow.snapshot_stride nonnegative integer                    default 0
    flow.truncation      none | auto | positive real            default none
    flow.c_star          auto | positive real                   default auto
    solver.grad_tol      auto | positive real                   default auto
    solver.max_newton    integer ≥ 1                            default 50
    solver.max_cg        auto | integer ≥ 1                     default auto
    output.dir           directory                              default thinfilm_out
    output.formats       comma separated subset of csv, json    default csv,json
    convergence.steps    increasing comma separated integers    default 8,16,32,64
    convergence.min_order real                                  default 0.9
    verify.n_tests       integer ≥ 1                            default 20
    verify.max_mode      integer ≥ 1                            default 4
    verify.amplitude     positive real                          default 1e-2
    verify.seed          nonnegative integer                    default 0
    verify.pair          true | false, contraction pair check   default true
    sweep.axis           tau | n | amplitude | N                required by sweep
    sweep.values         comma separated positive reals         required by sweep
'''
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from thinfilm.exceptions import ConfigError, ConfigIssue
from thinfilm.presets import PRESETS

logger = logging.getLogger(__name__)

SWEEP_AXES = ("tau", "n", "amplitude", "N")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class GridSpec:
    dim: int = 1
    n: int = 64
    length: float = 1.0


@dataclass(frozen=True)
class InitialConditionSpec:
    preset: str = "cosine"
    k: int = 1
    amplitude: float = 1e-3
    center: Optional[Tuple[float, ...]] = None
    width: float = 0.1
    slope: float = 0.2
    radius: Optional[float] = None
    max_mode: int = 4
    seed: int = 0
    path: Optional[str] = None

    def params(self):
        '''Keyword parameters of the selected preset.'''
        keys = {
            "cosine": ("k", "amplitude"),
            "gaussian_bump": ("center", "width", "amplitude"),
            "cone": ("center", "slope", "radius"),
            "random_bandlimited": ("max_mode", "amplitude", "seed"),
            "from_file": ("path",),
        }[self.preset]
        return {key: getattr(self, key) for key in keys}


@dataclass(frozen=True)
class FlowSpec:
    t_final: float = 0.01
    n_steps: int = 100
    snapshot_stride: int = 0
    truncation: object = "none"
    c_star: object = "auto"


@dataclass(frozen=True)
class SolverSpec:
    grad_tol: Optional[float] = None
    max_newton: int = 50
    max_cg: Optional[int] = None


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "thinfilm_out"
    formats: Tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class ConvergenceSpec:
    steps: Tuple[int, ...] = (8, 16, 32, 64)
    min_order: float = 0.9


@dataclass(frozen=True)
class VerifySpec:
    n_tests: int = 20
    max_mode: int = 4
    amplitude: float = 1e-2
    seed: int = 0
    pair: bool = True


@dataclass(frozen=True)
class SweepSpec:
    axis: Optional[str] = None
    values: Tuple[float, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    ic: InitialConditionSpec = field(default_factory=InitialConditionSpec)
    flow: FlowSpec = field(default_factory=FlowSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    convergence: ConvergenceSpec = field(default_factory=ConvergenceSpec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def with_overrides(self, seed=None, out_dir=None):
        '''Apply the command-line overrides --seed and --out.'''
        cfg = self
        if seed is not None:
            cfg = replace(cfg, ic=replace(cfg.ic, seed=int(seed)), verify=replace(cfg.verify, seed=int(seed)))
        if out_dir is not None:
            cfg = replace(cfg, output=replace(cfg.output, directory=str(out_dir)))
        return cfg


def _integer(text):
    value = _real(text)
    if value != int(value):
        raise ValueError("expected an integer")
    return int(value)


def _real(text):
    value = float(text)
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("expected a finite number")
    return value


def _reals(text):
    return tuple(_real(part) for part in text.split(",") if part.strip())


def _integers(text):
    return tuple(_integer(part) for part in text.split(",") if part.strip())


def _auto_or(convert):
    def parse(text):
        return None if text == "auto" else convert(text)
    return parse


def _truncation(text):
    return text if text in ("none", "auto") else _real(text)


def _c_star(text):
    return "auto" if text == "auto" else _real(text)


def _boolean(text):
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError("expected true or false")


def _formats(text):
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _positive(value):
    return None if value > 0 else "must be positive"


def _nonnegative(value):
    return None if value >= 0 else "must be nonnegative"


def _at_least(bound):
    def check(value):
        return None if value >= bound else "must be ≥ {}".format(bound)
    return check


def _optional(check):
    def inner(value):
        return None if value is None else check(value)
    return inner


# key -> (section, attribute, parser, check)
KEYS = {
    "grid.dim": ("grid", "dim", _integer, lambda v: None if v in (1, 2) else "dim must be 1 or 2"),
    "grid.n": ("grid", "n", _integer, lambda v: None if v >= 4 else "n ≥ 4"),
    "grid.length": ("grid", "length", _real, _positive),
    "ic": ("ic", "preset", str, lambda v: None if v in PRESETS else "unknown preset, expected one of {}".format(
        ", ".join(PRESETS))),
    "ic.k": ("ic", "k", _integer, _nonnegative),
    "ic.amplitude": ("ic", "amplitude", _real, None),
    "ic.center": ("ic", "center", _reals, None),
    "ic.width": ("ic", "width", _real, _positive),
    "ic.slope": ("ic", "slope", _real, None),
    "ic.radius": ("ic", "radius", _real, _positive),
    "ic.max_mode": ("ic", "max_mode", _integer, _at_least(1)),
    "ic.seed": ("ic", "seed", _integer, _nonnegative),
    "ic.path": ("ic", "path", str, None),
    "flow.t_final": ("flow", "t_final", _real, _positive),
    "flow.n_steps": ("flow", "n_steps", _integer, _at_least(1)),
    "flow.snapshot_stride": ("flow", "snapshot_stride", _integer, _nonnegative),
    "flow.truncation": ("flow", "truncation", _truncation,
        lambda v: None if isinstance(v, str) or v > 0 else "must be none, auto or positive"),
    "flow.c_star": ("flow", "c_star", _c_star, lambda v: None if v == "auto" or v > 0 else "must be auto or positive"),
    "solver.grad_tol": ("solver", "grad_tol", _auto_or(_real), _optional(_positive)),
    "solver.max_newton": ("solver", "max_newton", _integer, _at_least(1)),
    "solver.max_cg": ("solver", "max_cg", _auto_or(_integer), _optional(_at_least(1))),
    "output.dir": ("output", "directory", str, None),
    "output.formats": ("output", "formats", _formats,
        lambda v: None if set(v) <= set(FORMATS) else "formats must be among {}".format(", ".join(FORMATS))),
    "convergence.steps": ("convergence", "steps", _integers,
        lambda v: None if v and v[0] >= 1 and all(b > a for a, b in zip(v, v[1:]))
        else "steps must be positive and increasing"),
    "convergence.min_order": ("convergence", "min_order", _real, None),
    "verify.n_tests": ("verify", "n_tests", _integer, _at_least(1)),
    "verify.max_mode": ("verify", "max_mode", _integer, _at_least(1)),
    "verify.amplitude": ("verify", "amplitude", _real, _positive),
    "verify.seed": ("verify", "seed", _integer, _nonnegative),
    "verify.pair": ("verify", "pair", _boolean, None),
    "sweep.axis": ("sweep", "axis", str, lambda v: None if v in SWEEP_AXES else "axis must be one of {}".format(
        ", ".join(SWEEP_AXES))),
    "sweep.values": ("sweep", "values", _reals,
        lambda v: None if v and all(x > 0 for x in v) else "values must be positive"),
}


def _split(text):
    '''Yield (line number, key, value) for every setting line, or (line, None, raw) for a bad line.'''
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            yield number, None, line
            continue
        key, value = line.split("=", 1)
        yield number, key.strip(), value.strip()


def parse_config(text):
    '''
    Parse and validate a configuration text.
    Parameters:
        text - str
    Returns:
        RunConfig with documented defaults for every absent key
    Raises:
        ConfigError listing every problem with its key and line
    '''
    issues = []
    seen = {}
    sections = {name: {} for name in ("grid", "ic", "flow", "solver", "output", "convergence", "verify", "sweep")}
    for number, key, value in _split(text):
        if key is None:
            issues.append(ConfigIssue(value, number, "expected `key = value`"))
            continue
        if key in seen:
            issues.append(ConfigIssue(key, number, "duplicate key, first set on line {}".format(seen[key])))
            continue
        seen[key] = number
        if key not in KEYS:
            issues.append(ConfigIssue(key, number, "unknown key"))
            continue
        section, attribute, parser, check = KEYS[key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            issues.append(ConfigIssue(key, number, "cannot parse {!r}: {}".format(value, exc)))
            continue
        reason = check(parsed) if check is not None else None
        if reason:
            issues.append(ConfigIssue(key, number, reason))
            continue
        sections[section][attribute] = parsed

    cfg = RunConfig(
        grid=GridSpec(**sections["grid"]),
        ic=InitialConditionSpec(**sections["ic"]),
        flow=FlowSpec(**sections["flow"]),
        solver=SolverSpec(**sections["solver"]),
        output=OutputSpec(**sections["output"]),
        convergence=ConvergenceSpec(**sections["convergence"]),
        verify=VerifySpec(**sections["verify"]),
        sweep=SweepSpec(**sections["sweep"]),
    )
    issues.extend(_cross_checks(cfg, seen))
    if issues:
        raise ConfigError(issues)
    logger.debug("configuration: %s", cfg)
    return cfg


def _cross_checks(cfg, seen):
    issues = []
    if cfg.ic.preset == "from_file" and not cfg.ic.path:
        issues.append(ConfigIssue("ic.path", seen.get("ic", 0), "from_file needs ic.path"))
    if cfg.ic.center is not None and len(cfg.ic.center) != cfg.grid.dim:
        issues.append(ConfigIssue("ic.center", seen.get("ic.center", 0),
            "needs {} coordinates".format(cfg.grid.dim)))
    if (cfg.sweep.axis is None) != (not cfg.sweep.values):
        key = "sweep.values" if cfg.sweep.axis is not None else "sweep.axis"
        issues.append(ConfigIssue(key, seen.get("sweep.axis", seen.get("sweep.values", 0)),
            "sweep.axis and sweep.values go together"))
    if cfg.sweep.axis == "n" and any(v != int(v) or v < 4 for v in cfg.sweep.values):
        issues.append(ConfigIssue("sweep.values", seen.get("sweep.values", 0), "grid sizes must be integers ≥ 4"))
    return issues


def read_config(path):
    with open(path) as handle:
        return parse_config(handle.read())
