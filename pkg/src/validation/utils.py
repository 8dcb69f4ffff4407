'''Table and plotting helpers shared by the validation scripts.'''
from itertools import cycle
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from thinfilm.io import write_table_csv

color1 = "#1874a5"
color2 = "#e07b39"
color3 = "#88d269"


def results_dir(script):
    '''results/ next to the calling script.'''
    out_dir = Path(script).parents[0].joinpath('results')
    if not out_dir.is_dir():
        out_dir.mkdir()
    return out_dir


def print_table(columns, rows, fmt="{:>14.6g}"):
    print("".join("{:>14}".format(c) for c in columns))
    for row in rows:
        print("".join(fmt.format(v) for v in row))


def save_table(script, name, columns, rows):
    '''Print the table and write it to results/<name>.csv.'''
    rows = np.asarray(rows, dtype=float)
    print_table(columns, rows)
    path = results_dir(script).joinpath(name + ".csv")
    write_table_csv(str(path), columns, rows)
    return path


def plot_series(x, series, labels, xlabel, ylabel, fig=None, ax=None, figtitle=None, logx=False, logy=False,
        fontsize=16):
    '''
    Curves sharing one abscissa.
    Inputs:
        x - 1D array
        series - list of 1D arrays of len(x)
        labels - legend entries, one per series
    Outputs:
        fig, ax'''
    if fig is None and ax is None:
        fig, ax = plt.subplots(figsize=(12, 6))
    styles = cycle([(color1, 'solid'), (color2, 'dashed'), (color3, 'dotted')])
    for y, (color, linestyle) in zip(series, styles):
        ax.plot(x, y, color=color, linestyle=linestyle)
    if logx:
        ax.set_xscale('log')
    if logy:
        ax.set_yscale('log')
    ax.set_xlabel(xlabel, fontsize=fontsize)
    ax.set_ylabel(ylabel, fontsize=fontsize)
    ax.legend(labels)
    if figtitle is not None:
        fig.suptitle(figtitle, fontsize=fontsize+4)
    return fig, ax


def save_figure(script, fig, name):
    '''Write fig to results/<name>.svg and release it.'''
    path = results_dir(script).joinpath(name + ".svg")
    fig.savefig(path, dpi=300)
    plt.close(fig)
    return path
