"""Age-averaged lineage-size distributions.

A lineage founded at an exponentially distributed age (rate ``rho``) and
growing as a linear birth-death process has size law

    Q_n = (rho/lam) * int_0^1 y^(n-1) (1-y)^r (1-theta y)^(-r-1) dy

in the supercritical case (``r = rho/omega``, ``theta = mu/lam < 1``), and
an analogous integral over ``[0, 1/theta]`` when ``theta > 1``.  All public
functions return normalised probabilities; :func:`raw_scale` converts back
to the unnormalised convention that carries an extra factor of ``omega``.

Every distribution can be evaluated four ways (:class:`MethodKind`): the
hypergeometric series, adaptive quadrature of the integral, the second
order ``1/n`` expansion, and the leading power law.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .birthdeath import ModelParams, Regime, bd_extinction, survival_ratio
from .errors import DomainError, QuadratureError, RegimeError
from .special import (
    SeriesControl,
    gamma_ratio_coefficients,
    gauss_2f1,
    gauss_2f1_array,
    ln_gamma,
    log_gamma_ratio,
    pochhammer_moment_sums,
)

__all__ = [
    "MethodKind",
    "QuadratureConfig",
    "SecondOrderCoefficients",
    "EXACT_SERIES_CONTROL",
    "pure_birth_weighted_pmf",
    "q_series_exact",
    "q_series_exact_array",
    "q_integral_exact",
    "q_second_order",
    "q_asymptotic",
    "q_time_domain",
    "q_finite_tau",
    "exact_tail_series",
    "exact_tail_quadrature",
    "extinction_mass",
    "second_order_coefficients",
    "pmf",
    "raw_scale",
]

EXACT_SERIES_CONTROL = SeriesControl(rel_tol=1e-15)


class MethodKind(enum.Enum):
    EXACT_SERIES = "exact"
    EXACT_QUADRATURE = "exact-quad"
    SECOND_ORDER = "second-order"
    ASYMPTOTIC = "asymptotic"

    @classmethod
    def parse(cls, value) -> "MethodKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise DomainError(f"unknown method {value!r}; expected one of {names}") from None

    @property
    def is_exact(self) -> bool:
        return self in (MethodKind.EXACT_SERIES, MethodKind.EXACT_QUADRATURE)


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the adaptive quadrature routes.

    ``max_depth`` caps the number of adaptive subintervals.  With
    ``endpoint_substitution`` the integrable ``(1-y)^(r-1)`` behaviour at
    the upper limit is removed by integrating in ``u = (1-y)^r``.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_depth: int = 60
    endpoint_substitution: bool = True

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_depth < 1:
            raise DomainError("max_depth must be >= 1")


DEFAULT_QUADRATURE = QuadratureConfig()


def _require_noncritical(params: ModelParams) -> Regime:
    regime = params.regime
    if regime is Regime.CRITICAL:
        raise RegimeError(
            "the age-averaged distribution is not implemented for lam == mu; "
            "use a nearby non-critical model"
        )
    return regime


def _check_n(n, lower=1):
    if int(n) != n or n < lower:
        raise DomainError(f"n must be an integer >= {lower}, got {n}")
    return int(n)


def raw_scale(params: ModelParams) -> float:
    """Factor turning a normalised probability into the raw integral value.

    The raw supercritical ``Q_n`` (without the ``1/omega`` Jacobian) sums
    to ``omega``; for ``mu = 0`` the raw Beta form sums to ``lam/rho``.
    """
    if params.mu == 0:
        return params.lam / params.rho
    return abs(params.omega)


# ---------------------------------------------------------------------------
# hypergeometric (Euler integral) representation


def _shape(params: ModelParams):
    """Return ``(regime, sigma, x)``: the Beta shape and the series argument."""
    regime = _require_noncritical(params)
    if regime is Regime.SUPERCRITICAL:
        return regime, 1.0 + params.r, params.theta
    return regime, -params.r, 1.0 / params.theta


def _beta_n(n: int, q: float) -> float:
    """``B(n, q)``; exact product form when ``q`` is a small integer."""
    if q == int(q) and 1 <= q <= 20:
        den = 1.0
        for j in range(int(q)):
            den *= n + j
        return math.factorial(int(q) - 1) / den
    return math.exp(ln_gamma(q) - log_gamma_ratio(n, q, 0.0))


def _ln_beta_n(n, q: float):
    return ln_gamma(q) - log_gamma_ratio(np.asarray(n, dtype=float), q, 0.0)


def _euler_terms(params: ModelParams, n, kind: str):
    """Euler-integral data for the requested quantity.

    Returns ``(log_theta_power, q, a, b, c, x)`` so that the value is
    ``(rho/lam) * x^(-log_theta_power) * B(a, q) * 2F1(a, b; c; x)``
    with ``x^(...)`` only present in the subcritical regime.
    """
    regime, sigma, x = _shape(params)
    if regime is Regime.SUPERCRITICAL:
        r = params.r
        if kind == "pmf":
            return 0, sigma, n, sigma, n + sigma, x
        if kind == "untruncated":
            return 0, sigma, n, r, n + sigma, x
        # tail: sum over m > n
        return 0, r, n + 1, sigma, n + 1 + r, x
    s = sigma
    if kind == "pmf":
        return n, s, n, s, n + s, x
    if kind == "untruncated":
        return n, s + 1.0, n, s, n + s + 1.0, x
    return n + 1, s, n + 1, s + 1.0, n + 1 + s, x


def _series_value(params, n, kind, ctrl):
    power, q, a, b, c, x = _euler_terms(params, n, kind)
    f, _ = gauss_2f1(a, b, c, x, ctrl)
    pref = params.rho / params.lam
    if power == 0:
        return pref * _beta_n(a, q) * f
    # subcritical: x = 1/theta, the theta^(-power) factor is x^power
    log_v = math.log(pref) + power * math.log(x) + ln_gamma(q) - log_gamma_ratio(a, q, 0.0)
    return math.exp(log_v) * f


def q_series_exact(
    params: ModelParams,
    n: int,
    ctrl: SeriesControl = EXACT_SERIES_CONTROL,
    truncated: bool = True,
) -> float:
    """Exact ``Q_n`` from the hypergeometric series.

    Supercritical: ``(rho/lam) B(n, 1+r) 2F1(n, 1+r; n+r+1; theta)``.
    Subcritical (``s = -r``): ``(rho/lam) theta^-n B(n, s) 2F1(n, s; n+s; 1/theta)``.
    ``truncated=False`` gives the unconditioned ``q_n`` (extinct lineages
    keep their mass at ``n = 0``).
    """
    n = _check_n(n)
    return _series_value(params, n, "pmf" if truncated else "untruncated", ctrl)


def q_series_exact_array(
    params: ModelParams,
    n,
    ctrl: SeriesControl = EXACT_SERIES_CONTROL,
    truncated: bool = True,
):
    """Vectorised :func:`q_series_exact` over an integer array ``n``."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1) or np.any(n != np.round(n)):
        raise DomainError("n must contain integers >= 1")
    return np.exp(_log_series_array(params, n, "pmf" if truncated else "untruncated", ctrl))


def _log_series_array(params, n, kind, ctrl):
    power, q, a, b, c, x = _euler_terms(params, n, kind)
    f = gauss_2f1_array(a, b, c, x, ctrl)
    log_v = math.log(params.rho / params.lam) + _ln_beta_n(a, q) + np.log(f)
    if not np.isscalar(power) or power != 0:
        log_v = log_v + np.asarray(power, dtype=float) * math.log(x)
    return log_v


def log_pmf_array(params: ModelParams, n, ctrl: SeriesControl = EXACT_SERIES_CONTROL):
    """``ln Q_n`` over an integer array, exact series route."""
    n = np.asarray(n, dtype=float)
    return _log_series_array(params, n, "pmf", ctrl)


def exact_tail_series(
    params: ModelParams, n: int, ctrl: SeriesControl = EXACT_SERIES_CONTROL
) -> float:
    """``sum_{m > n} Q_m`` in closed form.

    Summing ``y^m`` under the integral gives another Euler integral, so the
    tail is a single hypergeometric evaluation at any ``n``.
    """
    n = _check_n(n, lower=0)
    return _series_value(params, n, "tail", ctrl)


def log_tail_array(params: ModelParams, n, ctrl: SeriesControl = EXACT_SERIES_CONTROL):
    """``ln sum_{m > n} Q_m`` over an integer array."""
    n = np.asarray(n, dtype=float)
    return _log_series_array(params, n, "tail", ctrl)


# ---------------------------------------------------------------------------
# adaptive quadrature


def _quad(f, lo, hi, cfg: QuadratureConfig, points=None):
    kw = {}
    if points:
        kw["points"] = points
    val, err, info = integrate.quad(
        f,
        lo,
        hi,
        epsabs=cfg.abs_tol,
        epsrel=cfg.rel_tol,
        limit=cfg.max_depth,
        full_output=1,
        **kw,
    )[:3]
    tol = max(cfg.abs_tol, cfg.rel_tol * abs(val))
    if not math.isfinite(val) or err > 10 * tol:
        raise QuadratureError(
            f"quadrature failed: estimate {val!r} with error {err:.3g}",
            estimate=val,
            error_estimate=err,
        )
    return val


def _pow1m(w, k):
    # (1 - w)^k for 0 <= w <= 1, integer k >= 0
    if k == 0:
        return 1.0
    if w >= 1.0:
        return 0.0
    return math.exp(k * math.log1p(-w))


def _integrand(params: ModelParams, n: int, kind: str, substitute: bool):
    """Integrand on ``[0, 1]`` and its constant prefactor (log scale).

    With substitution the variable is ``u = w^(1/e)`` where ``w`` is the
    distance to the singular endpoint and ``e`` its exponent.
    """
    regime, sigma, x = _shape(params)
    log_pref = math.log(params.rho / params.lam)
    k_pow = n if kind == "tail" else n - 1
    if regime is Regime.SUPERCRITICAL:
        r, th = params.r, params.theta
        b = r if kind == "untruncated" else r + 1.0
        e = r  # exponent of (1-y) in the substituted variable
        w_pow = 0.0 if kind == "tail" else 1.0

        def base(w):
            return (1.0 - th + th * w) ** (-b)

        if substitute:
            inv_e = 1.0 / e

            def f(u):
                w = u**inv_e
                return _pow1m(w, k_pow) * w**w_pow * base(w)

            return f, log_pref - math.log(e)

        y_exp = r - 1.0 if kind == "tail" else r

        def g(y):
            w = 1.0 - y
            return (y**k_pow if k_pow else 1.0) * w**y_exp * base(w)

        return g, log_pref

    # subcritical, z = theta y on [0, 1]; w = 1 - z
    s, th = -params.r, params.theta
    log_pref += -(n + 1 if kind == "tail" else n) * math.log(th)
    a_exp = s + 1.0 if kind == "tail" else s  # power of (1 - z/theta)^-1
    w_pow = 1.0 if kind == "untruncated" else 0.0

    def base(w):
        return (1.0 - (1.0 - w) / th) ** (-a_exp)

    if substitute:
        inv_s = 1.0 / s

        def f(u):
            w = u**inv_s
            return _pow1m(w, k_pow) * w**w_pow * base(w)

        return f, log_pref - math.log(s)

    def g(z):
        w = 1.0 - z
        return (z**k_pow if k_pow else 1.0) * w ** (s - 1.0 + w_pow) * base(w)

    return g, log_pref


def _quadrature_value(params, n, kind, cfg):
    _require_noncritical(params)
    e = params.r if params.regime is Regime.SUPERCRITICAL else -params.r
    # only an exponent below one makes the endpoint singular
    substitute = cfg.endpoint_substitution and e < 1.0
    f, log_pref = _integrand(params, n, kind, substitute)
    # the mass of y^(n-1) sits within ~1/n of the endpoint; tell quad where
    hint = None
    if n > 20:
        if substitute:
            hint = sorted({min(0.999, (k / n) ** e) for k in (0.1, 1.0, 10.0)})
        else:
            hint = sorted({max(0.001, 1.0 - k / n) for k in (0.1, 1.0, 10.0, 50.0)})
    val = _quad(f, 0.0, 1.0, cfg, points=hint)
    return math.exp(log_pref) * val


def q_integral_exact(
    params: ModelParams,
    n: int,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    truncated: bool = True,
) -> float:
    """Exact ``Q_n`` by adaptive quadrature of the Beta-type integral."""
    n = _check_n(n)
    return _quadrature_value(params, n, "pmf" if truncated else "untruncated", cfg)


def exact_tail_quadrature(
    params: ModelParams, n: int, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """``sum_{m > n} Q_m`` as a single integral (partial geometric sum folded in)."""
    n = _check_n(n, lower=0)
    return _quadrature_value(params, n, "tail", cfg)


# ---------------------------------------------------------------------------
# time-domain route


def q_time_domain(
    params: ModelParams,
    n: int,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    tau: float | None = None,
    truncated: bool = True,
) -> float:
    """``int rho e^(-rho t) P_n(t) dt`` integrated directly over age.

    Bypasses every change of variables; with ``tau`` the age density is
    the truncated exponential on ``[0, tau]``.
    """
    n = _check_n(n, lower=0 if not truncated else 1)
    _require_noncritical(params)
    rho = params.rho
    om = abs(params.omega)

    def f(t):
        if n == 0:
            return rho * math.exp(-rho * t) * bd_extinction(params, t)
        ln_y, ln_1my, ln_surv = survival_ratio(params, t)
        lv = -rho * t + ln_1my + ((n - 1) * ln_y if n > 1 else 0.0)
        if not truncated:
            lv += ln_surv
        return rho * math.exp(lv)

    scale = 1.0 / om
    marks = [scale * k for k in (0.5, 1.0, math.log(n + 1) + 1.0, math.log(n + 1) + 5.0, math.log(n + 1) + 20.0)]
    if tau is not None and not math.isinf(tau):
        if not tau > 0:
            raise DomainError(f"tau must be > 0, got {tau}")
        pts = sorted({m for m in marks if 0 < m < tau})
        val = _quad(f, 0.0, tau, cfg, points=pts or None)
        return val / -math.expm1(-rho * tau)
    split = max(marks[-1], 40.0 / rho)
    pts = sorted({m for m in marks if m < split})
    head = _quad(f, 0.0, split, cfg, points=pts)
    tail = _quad(f, split, math.inf, cfg)
    return head + tail


def q_finite_tau(
    params: ModelParams, n: int, tau: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """Size law for a clade of finite age ``tau`` (truncated kernel).

    Converges to :func:`q_integral_exact` as ``tau`` grows.
    """
    if tau is None or not tau > 0:
        raise DomainError(f"tau must be > 0, got {tau}")
    return q_time_domain(params, n, cfg, tau=tau)


def extinction_mass(params: ModelParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Probability that a lineage of exponential age is extinct (``q_0``)."""
    return q_time_domain(params, 0, cfg, truncated=False)


# ---------------------------------------------------------------------------
# 1/n expansions


@dataclass(frozen=True)
class SecondOrderCoefficients:
    """Ingredients of the second-order approximation.

    ``Q_n ~ scale * x^n * n^-sigma * (1 + g1/n + g2/n^2) * (t0 + h1/n + h2/n^2)``
    where ``x^n`` is only present in the subcritical case (``x = 1/theta``)
    and ``t0, t1, t2`` are the numerically summed series
    ``sum k^j (sigma)_k x^k / k!``.
    """

    sigma: float
    x: float
    log_scale: float
    geometric: bool
    g1: float
    g2: float
    t0: float
    t1: float
    t2: float

    @property
    def h1(self) -> float:
        return -self.sigma * self.t1

    @property
    def h2(self) -> float:
        s = self.sigma
        return s * (s + 1.0) / 2.0 * self.t2 + s * (s - 1.0) / 2.0 * self.t1

    def phi(self, k):
        """Second-order coefficient of ``(n)_k / (n+sigma)_k`` in ``1/n``."""
        s = self.sigma
        return s * (s + 1.0) / 2.0 * k * k + s * (s - 1.0) / 2.0 * k

    @property
    def poly(self):
        """Coefficients ``c_0..c_4`` of ``n^-j`` after multiplying the brackets."""
        g1, g2, h1, h2, t0 = self.g1, self.g2, self.h1, self.h2, self.t0
        return (t0, g1 * t0 + h1, g2 * t0 + g1 * h1 + h2, g2 * h1 + g1 * h2, g2 * h2)

    def value(self, n):
        n = np.asarray(n, dtype=float)
        g = 1.0 + self.g1 / n + self.g2 / (n * n)
        h = self.t0 + self.h1 / n + self.h2 / (n * n)
        log_mag = self.log_scale - self.sigma * np.log(n)
        if self.geometric:
            log_mag = log_mag + n * math.log(self.x)
        out = np.exp(log_mag) * g * h
        return out if out.ndim else float(out)


def second_order_coefficients(
    params: ModelParams, ctrl: SeriesControl = EXACT_SERIES_CONTROL
) -> SecondOrderCoefficients:
    regime, sigma, x = _shape(params)
    t0, t1, t2 = pochhammer_moment_sums(sigma, x, ctrl)
    g1, g2 = gamma_ratio_coefficients(0.0, sigma)
    log_scale = math.log(params.rho / params.lam) + ln_gamma(sigma)
    return SecondOrderCoefficients(
        sigma=sigma,
        x=x,
        log_scale=log_scale,
        geometric=regime is Regime.SUBCRITICAL,
        g1=g1,
        g2=g2,
        t0=t0,
        t1=t1,
        t2=t2,
    )


def q_second_order(
    params: ModelParams, n: int, ctrl: SeriesControl = EXACT_SERIES_CONTROL
) -> float:
    """Second-order ``1/n`` approximation of ``Q_n``.

    The Gamma-ratio prefactor and the k-series bracket are expanded to
    ``n^-2`` separately and then multiplied.
    """
    n = _check_n(n)
    return second_order_coefficients(params, ctrl).value(n)


def q_asymptotic(params: ModelParams, n: int) -> float:
    """Leading power-law term of ``Q_n`` as ``n -> inf``.

    Supercritical: ``r Gamma(1+r) (1-theta)^-r n^(-r-1)``.
    Subcritical (``s = -r``): ``(rho/lam) Gamma(s) (1-1/theta)^-s theta^-n n^-s``.
    """
    n = _check_n(n)
    regime, sigma, x = _shape(params)
    log_v = math.log(params.rho / params.lam) + ln_gamma(sigma) - sigma * math.log(n)
    log_v -= sigma * math.log1p(-x)
    if regime is Regime.SUBCRITICAL:
        log_v += n * math.log(x)
    return math.exp(log_v)


def pure_birth_weighted_pmf(
    params: ModelParams, n: int, method: MethodKind | str = MethodKind.EXACT_SERIES
) -> float:
    """Yule-process size law averaged over exponential ages.

    Exact value ``(rho/lam) B(rho/lam + 1, n)``.
    """
    if params.mu != 0:
        raise DomainError(f"pure-birth distribution requires mu = 0, got {params.mu}")
    return pmf(params, n, method)


def pmf(params: ModelParams, n: int, method: MethodKind | str = MethodKind.EXACT_SERIES, **kw) -> float:
    """Dispatch to the evaluator for ``method``."""
    method = MethodKind.parse(method)
    if method is MethodKind.EXACT_SERIES:
        return q_series_exact(params, n, **kw)
    if method is MethodKind.EXACT_QUADRATURE:
        return q_integral_exact(params, n, **kw)
    if method is MethodKind.SECOND_ORDER:
        return q_second_order(params, n, **kw)
    return q_asymptotic(params, n)
