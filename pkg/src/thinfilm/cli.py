'''Command line front end: thinfilm run|convergence|verify|sweep --config <path>.'''
import logging
import sys

import click

from thinfilm import __version__, runner
from thinfilm.config import read_config
from thinfilm.exceptions import ConfigError, GridError

logger = logging.getLogger(__name__)


def _load(config, out, seed):
    return read_config(config).with_overrides(seed=seed, out_dir=out)


def _dispatch(command, config, out, seed, **kwargs):
    '''Parse the configuration, run the command and leave with its exit code.'''
    try:
        cfg = _load(config, out, seed)
        code = command(cfg, **kwargs)
    except ConfigError as exc:
        click.echo(str(exc), err=True)
        code = runner.EXIT_CONFIG
    except (GridError, OSError) as exc:
        logger.error("%s", exc)
        click.echo("error: {}".format(exc), err=True)
        code = runner.EXIT_CONFIG
    sys.exit(code)


def _common(func):
    func = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
        help="Parallel evolutions.")(func)
    func = click.option("--seed", type=click.IntRange(min=0), default=None,
        help="Override ic.seed and verify.seed.")(func)
    func = click.option("--out", type=click.Path(file_okay=False), default=None,
        help="Override output.dir.")(func)
    func = click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), required=True,
        help="Configuration file of key = value lines.")(func)
    return func


@click.group()
@click.version_option(__version__)
@click.option("--verbose", is_flag=True, help="Log solver iterations.")
def main(verbose):
    '''Minimizing-movement solver and trajectory checks for u_t = Δe^{−Δu}.'''
    logging.basicConfig(stream=sys.stdout, level=logging.DEBUG if verbose else logging.INFO,
        format='%(levelname)s %(message)s', force=True)


@main.command()
@_common
@click.option("--self-test", is_flag=True, help="Also check a deliberately corrupted copy of the trace.")
def run(config, out, seed, threads, self_test):
    '''Evolve the configured initial state and write trace.csv and summary.json.'''
    _dispatch(runner.run, config, out, seed, self_test=self_test)


@main.command()
@_common
def convergence(config, out, seed, threads):
    '''Refine τ over convergence.steps and compare against an 8× finer reference.'''
    _dispatch(runner.convergence, config, out, seed, n_jobs=threads)


@main.command()
@_common
def verify(config, out, seed, threads):
    '''Evolve with every state kept and run all trajectory checks.'''
    _dispatch(runner.verify, config, out, seed, n_jobs=threads)


@main.command()
@_common
def sweep(config, out, seed, threads):
    '''Run one member per value of sweep.axis, each in its own subdirectory.'''
    _dispatch(runner.sweep, config, out, seed, n_jobs=threads)


if __name__ == "__main__":
    main()
