'''Error hierarchy of the thinfilm package.'''
from collections import namedtuple


class ThinFilmError(Exception):
    '''Base class of all thinfilm errors.'''


class GridError(ThinFilmError, ValueError):
    '''Invalid grid parameters or fields living on different grids.'''


class NonConvergenceError(ThinFilmError, RuntimeError):
    '''
    The Newton budget of a resolvent step was exhausted.
    Attributes:
        trace - FlowTrace recorded up to (and excluding) the failing step, or None
        result - ProxResult of the failing step (best iterate), or None
    '''
    def __init__(self, message, trace=None, result=None):
        super().__init__(message)
        self.trace = trace
        self.result = result


class ConstraintViolationError(ThinFilmError, RuntimeError):
    '''The a-posteriori measure bound ‖Δ_h u‖ ≤ C* failed along a flow.'''
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


ConfigIssue = namedtuple("ConfigIssue", ["key", "line", "reason"])


class ConfigError(ThinFilmError, ValueError):
    '''
    One or more configuration problems.
    Attributes:
        issues - list of ConfigIssue(key, line, reason)
    '''
    def __init__(self, issues):
        self.issues = list(issues)
        lines = ["{} (line {}): {}".format(i.key, i.line, i.reason) for i in self.issues]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
