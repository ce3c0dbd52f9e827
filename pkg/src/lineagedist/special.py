"""Real-valued special functions used throughout the package.

Everything involving Gamma functions is evaluated in log space; callers
exponentiate once at the end.  The hypergeometric series is only ever
needed for ``0 <= z < 1`` so no analytic continuation is attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import DomainError, SeriesConvergenceError

__all__ = [
    "SeriesControl",
    "ln_gamma",
    "log_gamma_ratio",
    "ln_beta",
    "pochhammer",
    "gauss_2f1",
    "gauss_2f1_array",
    "gamma_ratio_coefficients",
    "gamma_ratio_expansion",
    "pochhammer_moment_sums",
]

EULER_GAMMA = 0.57721566490153286061

# Taylor coefficients of ln Gamma(1 + e) = -gamma*e + sum_k (-1)^k zeta(k)/k e^k
_LG1_COEFFS = [(-1.0) ** k * float(sc.zeta(k)) / k for k in range(2, 40)]

# B_{2k} / (2k (2k-1)) for the Stirling tail
_STIRLING = [1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360, 1 / 156]


@dataclass(frozen=True)
class SeriesControl:
    """Stopping controls for power series.

    A series stops once three consecutive terms fall below
    ``rel_tol * |partial sum|``.
    """

    rel_tol: float = 1e-12
    max_terms: int = 100_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_terms < 1:
            raise DomainError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


def _lgamma_near_one(eps):
    # ln Gamma(1 + eps) for |eps| <= 0.25
    acc = 0.0
    p = eps * eps
    for c in _LG1_COEFFS:
        term = c * p
        acc += term
        if abs(term) < 1e-18 * abs(acc):
            break
        p *= eps
    return -EULER_GAMMA * eps + acc


def ln_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``.

    The zeros at 1 and 2 are handled by a Taylor expansion so the result
    keeps full relative accuracy there.
    """
    x = float(x)
    if not x > 0 or math.isnan(x):
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    if abs(x - 1.0) <= 0.25:
        return _lgamma_near_one(x - 1.0)
    if abs(x - 2.0) <= 0.25:
        eps = x - 2.0
        return _lgamma_near_one(eps) + math.log1p(eps)
    return math.lgamma(x)


def _stirling_tail(z):
    zi = 1.0 / z
    zi2 = zi * zi
    acc = 0.0
    for c in reversed(_STIRLING):
        acc = acc * zi2 + c
    return acc * zi


def log_gamma_ratio(x, a, b):
    """``ln Gamma(x + a) - ln Gamma(x + b)``, accurate for very large ``x``.

    Direct differencing of ``lgamma`` loses ``eps * x ln x`` absolute
    accuracy, which is fatal for ``x`` beyond ~1e6.  For large ``x`` the
    difference of Stirling series is taken analytically.  ``x`` may be an
    array; ``a`` and ``b`` are scalars.
    """
    x = np.asarray(x, dtype=float)
    a = float(a)
    b = float(b)
    out = np.empty_like(x)
    big = (x >= 30.0) & (x >= 3.0 * max(abs(a), abs(b)))
    if np.any(~big):
        xs = x[~big]
        if np.any(xs + min(a, b) <= 0):
            raise DomainError("log_gamma_ratio arguments must stay positive")
        out[~big] = sc.gammaln(xs + a) - sc.gammaln(xs + b)
    if np.any(big):
        xb = x[big]
        la = np.log1p(a / xb)
        lb = np.log1p(b / xb)
        out[big] = (
            (xb - 0.5) * (la - lb)
            + a * la
            - b * lb
            + (a - b) * np.log(xb)
            - (a - b)
            + _stirling_tail(xb + a)
            - _stirling_tail(xb + b)
        )
    return out if out.ndim else float(out)


def ln_beta(p: float, q: float) -> float:
    """``ln B(p, q)`` for positive ``p`` and ``q``."""
    if not (p > 0 and q > 0):
        raise DomainError(f"ln_beta requires p, q > 0, got ({p}, {q})")
    small, large = (p, q) if p <= q else (q, p)
    return ln_gamma(small) - log_gamma_ratio(large, small, 0.0)


def pochhammer(a: float, k: int) -> float:
    """Rising factorial ``(a)_k = a (a+1) ... (a+k-1)`` by running product."""
    if k < 0:
        raise DomainError(f"pochhammer requires k >= 0, got {k}")
    out = 1.0
    for j in range(k):
        out *= a + j
    return out


def _check_2f1(c, z):
    if c <= 0 and float(c).is_integer():
        raise DomainError(f"2F1 undefined for c = {c}")
    if not abs(z) < 1:
        raise DomainError(f"2F1 series requires |z| < 1, got z = {z}")


def gauss_2f1(a: float, b: float, c: float, z: float, ctrl: SeriesControl = DEFAULT_SERIES):
    """Gauss hypergeometric series ``2F1(a, b; c; z)`` for ``|z| < 1``.

    Returns
    -------
    value : float
    terms : int
        Number of series terms consumed.
    """
    _check_2f1(c, z)
    total = 1.0
    term = 1.0
    quiet = 0
    for k in range(ctrl.max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total += term
        if not math.isfinite(total):
            raise SeriesConvergenceError(
                f"2F1({a}, {b}; {c}; {z}) overflowed after {k + 1} terms", partial_sum=total, terms=k + 1
            )
        if abs(term) < ctrl.rel_tol * abs(total):
            quiet += 1
            if quiet == 3:
                return total, k + 2
        else:
            quiet = 0
    raise SeriesConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) did not converge in {ctrl.max_terms} terms",
        partial_sum=total,
        terms=ctrl.max_terms,
    )


def gauss_2f1_array(a, b: float, c, z: float, ctrl: SeriesControl = DEFAULT_SERIES):
    """Vectorised :func:`gauss_2f1` over arrays ``a`` and ``c``.

    Every element runs the same stopping rule as the scalar version; the
    loop ends when all elements have stopped.
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    a, c = np.broadcast_arrays(a, c)
    if np.any((c <= 0) & (c == np.round(c))):
        raise DomainError("2F1 undefined for non-positive integer c")
    if not abs(z) < 1:
        raise DomainError(f"2F1 series requires |z| < 1, got z = {z}")
    total = np.ones(a.shape)
    term = np.ones(a.shape)
    quiet = np.zeros(a.shape, dtype=np.int64)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(ctrl.max_terms):
            active = quiet < 3
            if not active.any():
                break
            step = (a + k) * (b + k) / ((c + k) * (k + 1)) * z
            term = np.where(active, term * step, 0.0)
            total = total + term
            small = np.abs(term) < ctrl.rel_tol * np.abs(total)
            quiet = np.where(active, np.where(small, quiet + 1, 0), quiet)
    if not np.all(np.isfinite(total)):
        raise SeriesConvergenceError("2F1 array series overflowed", partial_sum=total)
    if np.all(quiet >= 3):
        return total
    raise SeriesConvergenceError(
        f"2F1 array series did not converge in {ctrl.max_terms} terms", partial_sum=total
    )


def gamma_ratio_coefficients(a: float, b: float):
    """First two coefficients of ``Gamma(n+a)/Gamma(n+b) * n^(b-a) ~ 1 + c1/n + c2/n^2``.

    From the generalised Bernoulli polynomial expansion of the Gamma ratio.
    """
    d = a - b
    c1 = d * (a + b - 1.0) / 2.0
    sigma = d + 1.0
    b2 = a * a - sigma * a + sigma * (3.0 * sigma - 1.0) / 12.0
    c2 = d * (d - 1.0) / 2.0 * b2
    return c1, c2


def gamma_ratio_expansion(shift: float, n: float, order: int = 2) -> float:
    """Truncated 1/n expansion of ``Gamma(n)/Gamma(n+shift) * n^shift``.

    ``order`` selects how many correction terms are kept (0, 1 or 2).
    """
    if order not in (0, 1, 2):
        raise DomainError(f"order must be 0, 1 or 2, got {order}")
    if n < 1:
        raise DomainError(f"expansion requires n >= 1, got {n}")
    c1, c2 = gamma_ratio_coefficients(0.0, shift)
    out = 1.0
    if order >= 1:
        out += c1 / n
    if order >= 2:
        out += c2 / (n * n)
    return out


def pochhammer_moment_sums(b: float, x: float, ctrl: SeriesControl = DEFAULT_SERIES):
    """The three sums ``sum_k k^j (b)_k x^k / k!`` for ``j = 0, 1, 2``.

    Summed numerically term by term; the stopping rule watches the
    ``k^2``-weighted series, which converges slowest.
    """
    if not 0 <= x < 1:
        raise DomainError(f"moment sums require 0 <= x < 1, got {x}")
    base = 1.0
    s0, s1, s2 = 1.0, 0.0, 0.0
    quiet = 0
    for k in range(1, ctrl.max_terms + 1):
        base *= (b + k - 1) / k * x
        s0 += base
        s1 += k * base
        t2 = k * k * base
        s2 += t2
        if abs(t2) <= ctrl.rel_tol * abs(s2) and abs(base) <= ctrl.rel_tol * abs(s0):
            quiet += 1
            if quiet == 3:
                return s0, s1, s2
        else:
            quiet = 0
    raise SeriesConvergenceError(
        f"moment sums for b={b}, x={x} did not converge", partial_sum=(s0, s1, s2)
    )
