"""Maximum-likelihood estimation of ``(r, theta)`` from lineage sizes.

Sizes alone identify only ``r = rho/omega`` and ``theta = mu/lam``; an
absolute time scale would need outside calibration.  Only the
supercritical regime is fitted.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .birthdeath import ModelParams
from .distributions import (
    DEFAULT_QUADRATURE,
    exact_tail_quadrature,
    log_pmf_array,
    log_tail_array,
    q_integral_exact,
)
from .errors import DomainError, LineageDistError
from .tails import tail_probability

__all__ = [
    "ObservedCounts",
    "FitResult",
    "TailFlag",
    "log_likelihood",
    "log_likelihood_params",
    "fit_mle",
    "tail_flag",
    "read_sizes_csv",
    "R_MAX",
    "THETA_EPS",
]

R_MAX = 1e3
R_MIN = 1e-4
THETA_EPS = 1e-6
# above this theta the series needs ~35/(1-theta) terms; integrate instead
SERIES_THETA_MAX = 0.95


@dataclass(frozen=True)
class ObservedCounts:
    """Observed lineage sizes, stored as unique values with multiplicities.

    With ``censor_at`` set, any observation ``>= censor_at`` is treated as
    right-censored: only the event ``N >= censor_at`` enters the likelihood.
    """

    values: np.ndarray
    weights: np.ndarray
    censor_at: int | None = None

    def __post_init__(self):
        if self.values.size == 0:
            raise DomainError("at least one observation is required")
        if np.any(self.values < 1):
            raise DomainError("lineage sizes must be >= 1")
        if self.censor_at is not None and self.censor_at < 2:
            raise DomainError("censor_at must be >= 2")

    @classmethod
    def from_sizes(cls, sizes, censor_at=None) -> "ObservedCounts":
        arr = np.asarray(list(sizes) if not isinstance(sizes, np.ndarray) else sizes)
        if arr.size == 0:
            raise DomainError("at least one observation is required")
        if arr.dtype.kind == "f":
            if np.any(arr != np.round(arr)):
                raise DomainError("lineage sizes must be integers")
        arr = arr.astype(np.int64)
        vals, counts = np.unique(arr, return_counts=True)
        return cls(vals, counts.astype(np.int64), censor_at)

    @property
    def n_obs(self) -> int:
        return int(self.weights.sum())

    @property
    def n_censored(self) -> int:
        if self.censor_at is None:
            return 0
        return int(self.weights[self.values >= self.censor_at].sum())

    def _split(self):
        if self.censor_at is None:
            return self.values, self.weights, 0
        keep = self.values < self.censor_at
        return self.values[keep], self.weights[keep], self.n_censored


def _check_domain(r, theta):
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"r must be positive and finite, got {r}")
    if not 0 <= theta < 1:
        raise DomainError(f"theta must lie in [0, 1), got {theta}")


def log_likelihood(data: ObservedCounts, r: float, theta: float) -> float:
    """Sum of log exact probabilities of the observations under ``(r, theta)``.

    The size law is evaluated on its natural scale ``lam = 1``; it depends
    on ``(r, theta)`` only.  Censored observations add ``ln P(N >= censor_at)``.
    """
    _check_domain(r, theta)
    params = ModelParams.from_ratios(r, theta)
    vals, w, n_cens = data._split()
    total = 0.0
    if vals.size:
        if theta <= SERIES_THETA_MAX:
            logs = log_pmf_array(params, vals.astype(float))
        else:
            logs = np.empty(vals.size)
            for i, n in enumerate(vals):
                try:
                    logs[i] = math.log(q_integral_exact(params, int(n)))
                except (LineageDistError, ValueError) as exc:
                    raise LineageDistError(f"likelihood evaluation failed at n={n}: {exc}") from exc
        if not np.all(np.isfinite(logs)):
            bad = int(vals[~np.isfinite(logs)][0])
            raise LineageDistError(f"likelihood evaluation failed at n={bad}")
        total += math.fsum(w * logs)
    if n_cens:
        k = data.censor_at - 1
        if theta <= SERIES_THETA_MAX:
            log_tail = float(log_tail_array(params, np.array([float(k)]))[0])
        else:
            log_tail = math.log(exact_tail_quadrature(params, k, DEFAULT_QUADRATURE))
        total += n_cens * log_tail
    return total


def log_likelihood_params(data: ObservedCounts, params: ModelParams) -> float:
    """:func:`log_likelihood` at the ``(r, theta)`` implied by ``params``."""
    return log_likelihood(data, params.r, params.theta)


@dataclass(frozen=True)
class FitResult:
    r_hat: float
    theta_hat: float
    log_likelihood: float
    converged: bool
    iterations: int
    boundary_hit: dict = field(default_factory=dict)
    n_obs: int = 0
    n_censored: int = 0
    message: str = ""

    FIELDS = (
        "r_hat",
        "theta_hat",
        "log_likelihood",
        "converged",
        "iterations",
        "boundary_r",
        "boundary_theta",
        "n_obs",
        "n_censored",
    )

    def params(self, lam: float = 1.0) -> ModelParams:
        """Model on the ``lam`` time scale with the fitted ratios."""
        return ModelParams.from_ratios(self.r_hat, self.theta_hat, lam)

    def _row(self):
        return [
            f"{self.r_hat:.12g}",
            f"{self.theta_hat:.12g}",
            f"{self.log_likelihood:.12g}",
            str(self.converged).lower(),
            str(self.iterations),
            str(self.boundary_hit.get("r", False)).lower(),
            str(self.boundary_hit.get("theta", False)).lower(),
            str(self.n_obs),
            str(self.n_censored),
        ]

    def to_kv(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in zip(self.FIELDS, self._row()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.FIELDS)
        w.writerow(self._row())
        return buf.getvalue()


def _grid():
    rs = np.logspace(-2, 3, 8)
    thetas = np.concatenate([[0.0], np.logspace(-3, math.log10(0.9), 7)])
    return rs, thetas


def fit_mle(data: ObservedCounts, init=None, max_iter: int = 400) -> FitResult:
    """Maximise :func:`log_likelihood` over ``(0, R_MAX] x [0, 1 - THETA_EPS]``.

    The best cell of an 8x8 grid (log-spaced in ``r``, zero plus
    log-spaced in ``theta``) seeds a bounded Nelder-Mead search in
    ``(ln r, theta)``.  Failure to converge is reported, not raised.
    """
    if init is not None:
        r0, th0 = init
        _check_domain(r0, th0)
    else:
        best = (-math.inf, None)
        rs, thetas = _grid()
        for r in rs:
            for th in thetas:
                try:
                    ll = log_likelihood(data, float(r), float(th))
                except (LineageDistError, ValueError, OverflowError):
                    continue
                if ll > best[0]:
                    best = (ll, (float(r), float(th)))
        if best[1] is None:
            raise LineageDistError("log-likelihood failed on every grid cell")
        r0, th0 = best[1]
    lo = (math.log(R_MIN), 0.0)
    hi = (math.log(R_MAX), 1.0 - THETA_EPS)

    def neg(x):
        r = math.exp(min(max(x[0], lo[0]), hi[0]))
        th = min(max(x[1], lo[1]), hi[1])
        try:
            return -log_likelihood(data, r, th)
        except (LineageDistError, ValueError, OverflowError):
            return math.inf

    res = optimize.minimize(
        neg,
        x0=[math.log(r0), th0],
        method="Nelder-Mead",
        bounds=[(lo[0], hi[0]), (lo[1], hi[1])],
        options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": max_iter},
    )
    r_hat = math.exp(min(max(res.x[0], lo[0]), hi[0]))
    th_hat = float(min(max(res.x[1], lo[1]), hi[1]))
    boundary = {
        "r": r_hat >= R_MAX * (1 - 1e-3) or r_hat <= R_MIN * (1 + 1e-3),
        "theta": th_hat <= 1e-6 or th_hat >= 1 - THETA_EPS - 1e-6,
    }
    ll = -float(res.fun)
    return FitResult(
        r_hat=r_hat,
        theta_hat=th_hat,
        log_likelihood=ll,
        converged=bool(res.success) and math.isfinite(ll),
        iterations=int(res.nit),
        boundary_hit=boundary,
        n_obs=data.n_obs,
        n_censored=data.n_censored,
        message=str(res.message),
    )


@dataclass(frozen=True)
class TailFlag:
    flagged: bool
    tail_probability: float


def tail_flag(model, n_obs: int, alpha: float) -> TailFlag:
    """Flag ``n_obs`` when ``P(N >= n_obs) < alpha``.

    ``model`` is a :class:`ModelParams` or a :class:`FitResult`.
    """
    if isinstance(model, FitResult):
        model = model.params()
    if not isinstance(model, ModelParams):
        raise DomainError("model must be ModelParams or FitResult")
    if model.omega <= 0:
        raise DomainError("tail flagging needs supercritical parameters")
    if int(n_obs) != n_obs or n_obs < 1:
        raise DomainError(f"n_obs must be a positive integer, got {n_obs}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    tp = tail_probability(model, int(n_obs) - 1)
    return TailFlag(tp < alpha, tp)


def read_sizes_csv(fh) -> list:
    """Read lineage sizes: one integer per line, or ``name,count`` rows.

    A non-numeric first row is taken as a header and skipped.
    """
    out = []
    for lineno, row in enumerate(csv.reader(fh), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        cell = row[-1].strip() if len(row) >= 2 else row[0].strip()
        try:
            v = int(cell)
        except ValueError:
            try:
                fv = float(cell)
            except ValueError:
                if lineno == 1:
                    continue
                raise DomainError(f"line {lineno}: not an integer: {cell!r}") from None
            if fv != int(fv):
                raise DomainError(f"line {lineno}: not an integer: {cell!r}") from None
            v = int(fv)
        if v < 1:
            raise DomainError(f"line {lineno}: sizes must be >= 1, got {v}")
        out.append(v)
    if not out:
        raise DomainError("no observations found")
    return out
