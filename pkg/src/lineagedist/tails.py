"""Cumulative probabilities, upper percentiles and approximation errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .birthdeath import ModelParams, Regime
from .distributions import (
    DEFAULT_QUADRATURE,
    MethodKind,
    QuadratureConfig,
    exact_tail_quadrature,
    exact_tail_series,
    q_asymptotic,
    q_series_exact,
    second_order_coefficients,
)
from .errors import DomainError, SeriesConvergenceError

__all__ = [
    "Normalization",
    "CdfRequest",
    "QuantileRequest",
    "ErrorRow",
    "ErrorReport",
    "cdf",
    "cdf_values",
    "tail_probability",
    "quantile",
    "approximation_error_report",
    "MAX_QUANTILE",
]

MAX_QUANTILE = 2**63 - 1

# direct summation cap for subcritical approximants (geometric decay)
_GEOMETRIC_SUM_CAP = 20_000_000


class Normalization:
    SELF = "self"
    SHARED = "shared"


@dataclass(frozen=True)
class CdfRequest:
    """CDF evaluation request.

    ``normalization="self"`` divides each method by its own total mass so
    approximations are compared as distributions; ``"shared"`` keeps the raw
    partial sums (the exact total is one by construction).
    """

    params: ModelParams
    method: MethodKind
    n_points: tuple
    normalization: str = Normalization.SELF
    quad: QuadratureConfig = DEFAULT_QUADRATURE

    def __post_init__(self):
        object.__setattr__(self, "method", MethodKind.parse(self.method))
        pts = tuple(int(n) for n in self.n_points)
        if not pts:
            raise DomainError("n_points must be non-empty")
        if pts[0] < 1 or any(b <= a for a, b in zip(pts, pts[1:])):
            raise DomainError("n_points must be strictly increasing positive integers")
        object.__setattr__(self, "n_points", pts)
        if self.normalization not in (Normalization.SELF, Normalization.SHARED):
            raise DomainError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class QuantileRequest:
    params: ModelParams
    method: MethodKind
    p: float
    quad: QuadratureConfig = DEFAULT_QUADRATURE

    def __post_init__(self):
        object.__setattr__(self, "method", MethodKind.parse(self.method))
        if not 0 < self.p < 1:
            raise DomainError(f"tail probability must lie in (0, 1), got {self.p}")


# ---------------------------------------------------------------------------
# per-method tail machinery


class _Tail:
    """Upper tail ``T(n) = sum_{m > n} q_m`` and total mass ``T(0)`` of one method."""

    def __init__(self, params: ModelParams, method: MethodKind, quad: QuadratureConfig):
        self.params = params
        self.method = method
        self.quad = quad
        self._coef = None
        if method is MethodKind.SECOND_ORDER:
            self._coef = second_order_coefficients(params)
        self.total = self.raw_tail(0)

    def raw_tail(self, n: int) -> float:
        m = self.method
        if m is MethodKind.EXACT_SERIES:
            return exact_tail_series(self.params, n)
        if m is MethodKind.EXACT_QUADRATURE:
            return exact_tail_quadrature(self.params, n, self.quad)
        if self.params.regime is Regime.SUPERCRITICAL:
            return self._power_tail(n)
        return self._geometric_tail(n)

    def _power_tail(self, n):
        # sum_{m>n} m^-(sigma+j) is a Hurwitz zeta value
        if self.method is MethodKind.ASYMPTOTIC:
            p = self.params
            sigma = 1.0 + p.r
            log_c = math.log(p.rho / p.lam) + math.lgamma(sigma) - sigma * math.log1p(-p.theta)
            return math.exp(log_c) * float(sc.zeta(sigma, n + 1.0))
        c = self._coef
        acc = 0.0
        for j, cj in enumerate(c.poly):
            acc += cj * float(sc.zeta(c.sigma + j, n + 1.0))
        return math.exp(c.log_scale) * acc

    def _values(self, n):
        if self.method is MethodKind.ASYMPTOTIC:
            return np.array([q_asymptotic(self.params, int(k)) for k in n])
        return self._coef.value(n)

    def _geometric_tail(self, n):
        # subcritical approximants decay like theta^-n; sum directly
        acc = 0.0
        start = n + 1
        chunk = 4096
        while start - n <= _GEOMETRIC_SUM_CAP:
            block = self._values(np.arange(start, start + chunk, dtype=float))
            acc += math.fsum(block)
            if abs(block[-1]) <= 1e-18 * abs(acc) or acc == 0.0:
                return acc
            start += chunk
        raise SeriesConvergenceError(
            f"subcritical tail sum did not settle within {_GEOMETRIC_SUM_CAP} terms",
            partial_sum=acc,
        )

    def tail(self, n: int, normalization: str) -> float:
        t = self.raw_tail(n)
        if normalization == Normalization.SELF:
            return t / self.total
        return t - (self.total - 1.0)

    def cdf(self, n: int, normalization: str) -> float:
        if normalization == Normalization.SELF:
            return 1.0 - self.raw_tail(n) / self.total
        return self.total - self.raw_tail(n)


def cdf(req: CdfRequest):
    """``[(n, P(N <= n)), ...]`` for the requested grid.

    Every value comes from an upper-tail evaluation, so the cost per grid
    point is independent of ``n``.  Exact CDFs are non-decreasing by
    construction; the approximants inherit monotonicity wherever their
    pmf is non-negative.
    """
    t = _Tail(req.params, req.method, req.quad)
    return [(n, t.cdf(n, req.normalization)) for n in req.n_points]


def cdf_values(params: ModelParams, method, n_points, normalization=Normalization.SELF):
    """Array form of :func:`cdf`."""
    req = CdfRequest(params, method, tuple(n_points), normalization)
    return np.array([v for _, v in cdf(req)])


def tail_probability(params: ModelParams, n: int, method=MethodKind.EXACT_SERIES) -> float:
    """``P(N > n)`` under the self-normalised distribution of ``method``."""
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a non-negative integer, got {n}")
    t = _Tail(params, MethodKind.parse(method), DEFAULT_QUADRATURE)
    return t.tail(int(n), Normalization.SELF)


def quantile(req: QuantileRequest) -> int:
    """Minimal ``n*`` with ``P(N <= n*) >= 1 - p``.

    Equivalently the minimal ``n`` with upper tail ``<= p``.  Doubling
    brackets the answer, bisection on the monotone tail pins it.
    """
    t = _Tail(req.params, req.method, req.quad)
    p = req.p

    def ok(n):
        return t.tail(n, Normalization.SELF) <= p

    if ok(1):
        return 1
    lo, hi = 1, 2
    while not ok(hi):
        lo = hi
        if hi > MAX_QUANTILE // 2:
            raise OverflowError(f"upper percentile for p={p} exceeds 2^63-1")
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# approximation errors


@dataclass(frozen=True)
class ErrorRow:
    n: int
    exact: float
    second_order: float
    asymptotic: float

    @property
    def err_second_order(self) -> float:
        return (self.second_order - self.exact) / self.exact

    @property
    def err_asymptotic(self) -> float:
        return (self.asymptotic - self.exact) / self.exact


@dataclass(frozen=True)
class ErrorReport:
    """Signed relative errors of both approximants against the exact series.

    ``crossover`` is the first grid point where the more accurate
    approximant differs from the one that wins at the start of the grid
    (``None`` if the winner never changes).
    """

    params: ModelParams
    quantity: str
    rows: list = field(default_factory=list)

    @property
    def crossover(self):
        if not self.rows:
            return None

        def winner(row):
            return abs(row.err_second_order) < abs(row.err_asymptotic)

        first = winner(self.rows[0])
        for row in self.rows[1:]:
            if winner(row) != first:
                return row.n
        return None

    def max_abs_error(self, method, n_min=1, n_max=math.inf) -> float:
        method = MethodKind.parse(method)
        get = {
            MethodKind.SECOND_ORDER: lambda r: r.err_second_order,
            MethodKind.ASYMPTOTIC: lambda r: r.err_asymptotic,
        }[method]
        vals = [abs(get(r)) for r in self.rows if n_min <= r.n <= n_max]
        return max(vals) if vals else math.nan


def approximation_error_report(params: ModelParams, n_grid, quantity: str = "pmf") -> ErrorReport:
    """Compare second-order and asymptotic forms with the exact series.

    ``quantity`` is ``"pmf"`` for pointwise probabilities or ``"cdf"`` for
    self-normalised cumulative probabilities.
    """
    grid = sorted({int(n) for n in n_grid})
    if not grid or grid[0] < 1:
        raise DomainError("n_grid must contain positive integers")
    rows = []
    if quantity == "pmf":
        coef = second_order_coefficients(params)
        for n in grid:
            rows.append(ErrorRow(n, q_series_exact(params, n), coef.value(n), q_asymptotic(params, n)))
    elif quantity == "cdf":
        cols = [cdf_values(params, m, grid) for m in (MethodKind.EXACT_SERIES, MethodKind.SECOND_ORDER, MethodKind.ASYMPTOTIC)]
        for i, n in enumerate(grid):
            rows.append(ErrorRow(n, cols[0][i], cols[1][i], cols[2][i]))
    else:
        raise DomainError(f"quantity must be 'pmf' or 'cdf', got {quantity!r}")
    return ErrorReport(params, quantity, rows)
