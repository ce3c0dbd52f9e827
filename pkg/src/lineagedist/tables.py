"""Published reference tables and the report builders that compare against them.

The published values are embedded verbatim as constant data keyed by
their table coordinates.  Reports place computed values beside them with
the signed difference; they never assert agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .birthdeath import ModelParams
from .distributions import MethodKind
from .errors import LineageDistError
from .tails import QuantileRequest, cdf_values, quantile

__all__ = [
    "TABLE_DATA_VERSION",
    "TABLE_PARAMS",
    "TABLE1_N",
    "TABLE2_P",
    "TABLE1_PUBLISHED",
    "TABLE2_PUBLISHED",
    "FIGURES",
    "TableCell",
    "table1_cells",
    "table2_cells",
    "figure_grid",
    "figure_params",
    "figure_rows",
]

TABLE_DATA_VERSION = "1"

# (r, theta) grid shared by both tables, in published row order
TABLE_PARAMS = ((0.4, 0.01), (0.4, 0.1), (0.4, 0.4), (0.1, 0.01), (0.1, 0.1), (0.1, 0.4))
DISTS = ("E", "S", "A")
DIST_METHOD = {"E": MethodKind.EXACT_SERIES, "S": MethodKind.SECOND_ORDER, "A": MethodKind.ASYMPTOTIC}

TABLE1_N = (10, 50, 100, 500, 1000, 2000, 10000)
TABLE2_P = (0.05, 0.01)

_T1_ROWS = (
    (0.580, 0.780, 0.834, 0.915, 0.937, 0.953, 0.977),
    (0.575, 0.777, 0.832, 0.914, 0.936, 0.956, 0.977),
    (0.604, 0.794, 0.845, 0.920, 0.941, 0.956, 0.979),
    (0.577, 0.778, 0.833, 0.914, 0.936, 0.953, 0.978),
    (0.576, 0.777, 0.832, 0.914, 0.936, 0.952, 0.977),
    (0.604, 0.794, 0.844, 0.920, 0.941, 0.956, 0.979),
    (0.563, 0.770, 0.826, 0.911, 0.933, 0.951, 0.976),
    (0.682, 0.829, 0.871, 0.934, 0.950, 0.963, 0.982),
    (0.604, 0.794, 0.845, 0.920, 0.941, 0.956, 0.979),
    (0.271, 0.429, 0.490, 0.616, 0.664, 0.709, 0.803),
    (0.270, 0.428, 0.489, 0.615, 0.664, 0.709, 0.802),
    (0.275, 0.432, 0.493, 0.618, 0.666, 0.711, 0.804),
    (0.270, 0.429, 0.489, 0.615, 0.664, 0.709, 0.802),
    (0.268, 0.425, 0.487, 0.614, 0.662, 0.708, 0.801),
    (0.275, 0.432, 0.493, 0.618, 0.666, 0.711, 0.804),
    (0.268, 0.426, 0.487, 0.614, 0.662, 0.708, 0.802),
    (0.300, 0.448, 0.506, 0.628, 0.674, 0.718, 0.810),
    (0.275, 0.432, 0.493, 0.618, 0.666, 0.711, 0.804),
)

_T2_ROWS = (
    (1743, 49111),
    (1798, 50276),
    (1491, 43576),
    (1778, 49853),
    (1801, 50358),
    (1491, 43576),
    (1949, 53439),
    (980, 31356),
    (1491, 43576),
    (251193, 746770),
    (251582, 747932),
    (249229, 745463),
    (251470, 746954),
    (252951, 747932),
    (249229, 745463),
    (252810, 747839),
    (241228, 740048),
    (249229, 745463),
)


def _keyed(rows, cols):
    out = {}
    i = 0
    for r, th in TABLE_PARAMS:
        for d in DISTS:
            for c, v in zip(cols, rows[i]):
                out[(r, th, d, c)] = v
            i += 1
    return out


# (r, theta, dist, n) -> published P(N <= n)
TABLE1_PUBLISHED = _keyed(_T1_ROWS, TABLE1_N)
# (r, theta, dist, p) -> published upper percentile n*
TABLE2_PUBLISHED = _keyed(_T2_ROWS, TABLE2_P)

# figure id -> (rho, omega, theta)
FIGURES = {
    "1a": (0.02, 0.05, 0.01),
    "1b": (0.02, 0.05, 0.1),
    "1c": (0.02, 0.05, 0.4),
    "2a": (0.01, 0.1, 0.01),
    "2b": (0.01, 0.1, 0.1),
    "2c": (0.01, 0.1, 0.4),
}


@dataclass(frozen=True)
class TableCell:
    r: float
    theta: float
    dist: str
    column: float
    value: float | None
    published: float
    error: str = ""

    @property
    def difference(self):
        if self.value is None:
            return None
        return self.value - self.published


def table1_cells():
    """All 126 cells: computed self-normalised CDFs beside published ones."""
    cells = []
    for r, th in TABLE_PARAMS:
        params = ModelParams.from_ratios(r, th)
        for d in DISTS:
            try:
                vals = cdf_values(params, DIST_METHOD[d], TABLE1_N)
                err = ""
            except (LineageDistError, ArithmeticError, ValueError) as exc:
                vals = [None] * len(TABLE1_N)
                err = str(exc)
            for n, v in zip(TABLE1_N, vals):
                cells.append(
                    TableCell(r, th, d, n, None if v is None else float(v), TABLE1_PUBLISHED[(r, th, d, n)], err)
                )
    return cells


def table2_cells():
    """All 36 cells: computed upper percentiles beside published ones.

    A percentile beyond ``2^63 - 1`` is reported as a failed cell.
    """
    cells = []
    for r, th in TABLE_PARAMS:
        params = ModelParams.from_ratios(r, th)
        for d in DISTS:
            for p in TABLE2_P:
                try:
                    v = quantile(QuantileRequest(params, DIST_METHOD[d], p))
                    err = ""
                except (LineageDistError, ArithmeticError, ValueError) as exc:
                    v, err = None, str(exc)
                cells.append(TableCell(r, th, d, p, v, TABLE2_PUBLISHED[(r, th, d, p)], err))
    return cells


def figure_grid(n_max: int = 10**6, points: int = 121):
    """Log-spaced integer grid from 1 to ``n_max`` (duplicates removed)."""
    g = np.unique(np.round(np.logspace(0, math.log10(n_max), points)).astype(np.int64))
    return [int(n) for n in g]


def figure_params(fig: str) -> ModelParams:
    rho, omega, theta = FIGURES[fig]
    lam = omega / (1.0 - theta)
    return ModelParams(lam, theta * lam, rho)


def figure_rows(fig: str, grid=None):
    """``(n, exact, second_order, asymptotic)`` CDF rows for one figure panel."""
    if fig not in FIGURES:
        raise KeyError(f"unknown figure {fig!r}; expected one of {', '.join(FIGURES)}")
    params = figure_params(fig)
    grid = grid or figure_grid()
    cols = [cdf_values(params, m, grid) for m in (MethodKind.EXACT_SERIES, MethodKind.SECOND_ORDER, MethodKind.ASYMPTOTIC)]
    return [(n, float(cols[0][i]), float(cols[1][i]), float(cols[2][i])) for i, n in enumerate(grid)]
