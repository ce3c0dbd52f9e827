"""Closed-form transient solutions of the linear birth-death process."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "Regime",
    "ModelParams",
    "pure_birth_pmf",
    "bd_pmf",
    "bd_extinction",
    "bd_truncated_pmf",
    "age_density",
    "survival_ratio",
]

# below this |omega| t the critical (lambda == mu) forms are used
NEAR_CRITICAL = 1e-8


class Regime(enum.Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"


@dataclass(frozen=True)
class ModelParams:
    """Per-capita birth rate ``lam``, death rate ``mu`` and sublineage
    origination rate ``rho`` (all in 1/time)."""

    lam: float
    mu: float
    rho: float

    def __post_init__(self):
        for name in ("lam", "mu", "rho"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")
        if not self.lam > 0:
            raise DomainError(f"lam must be > 0, got {self.lam}")
        if self.mu < 0:
            raise DomainError(f"mu must be >= 0, got {self.mu}")
        if not self.rho > 0:
            raise DomainError(f"rho must be > 0, got {self.rho}")

    @classmethod
    def from_ratios(cls, r: float, theta: float, lam: float = 1.0) -> "ModelParams":
        """Build parameters from ``r = rho/omega`` and ``theta = mu/lam``.

        ``r`` is signed: subcritical models (``theta > 1``) need ``r < 0``.
        """
        if theta < 0:
            raise DomainError(f"theta must be >= 0, got {theta}")
        if theta == 1:
            raise DomainError("r = rho/omega is undefined at theta = 1")
        mu = theta * lam
        omega = lam - mu
        rho = r * omega
        if not rho > 0:
            raise DomainError(
                f"r = {r} with theta = {theta} gives rho = {rho}; r must share the sign of 1 - theta"
            )
        return cls(lam, mu, rho)

    @property
    def omega(self) -> float:
        return self.lam - self.mu

    @property
    def theta(self) -> float:
        return self.mu / self.lam

    @property
    def r(self) -> float:
        if self.omega == 0:
            raise DomainError("r = rho/omega is undefined in the critical regime")
        return self.rho / self.omega

    @property
    def regime(self) -> Regime:
        if self.omega > 0:
            return Regime.SUPERCRITICAL
        if self.omega < 0:
            return Regime.SUBCRITICAL
        return Regime.CRITICAL

    def scaled(self, factor: float) -> "ModelParams":
        """Same model with every rate multiplied by ``factor`` (time rescaling)."""
        return ModelParams(self.lam * factor, self.mu * factor, self.rho * factor)


def _check_t(t):
    if not t >= 0 or math.isinf(t):
        raise DomainError(f"time must be finite and >= 0, got {t}")


def survival_ratio(params: ModelParams, t: float):
    """Return ``(ln y, ln(1-y), ln(1-p0))`` at time ``t``.

    ``y`` is the geometric ratio of the truncated distribution,
    ``P_n(t) = (1-y) y^(n-1)``, and ``1 - p0`` the survival probability.
    """
    _check_t(t)
    lam, mu, om = params.lam, params.mu, params.omega
    if t == 0:
        return -math.inf, 0.0, 0.0
    if abs(om) * t < NEAR_CRITICAL:
        lt = lam * t
        return math.log(lt) - math.log1p(lt), -math.log1p(lt), -math.log1p(lt)
    if om > 0:
        em1 = -math.expm1(-om * t)  # 1 - e^(-omega t)
        d = om + mu * em1  # lam - mu e^(-omega t)
        ln_surv = math.log(om / d)
        return math.log(lam * em1 / d), ln_surv - om * t, ln_surv
    # subcritical: rewrite with the decaying exponential e^(-|omega| t)
    a = -om
    em1 = -math.expm1(-a * t)
    d = a + lam * em1  # mu - lam e^(-|omega| t)
    ln_1my = math.log(a / d)
    return math.log(lam * em1 / d), ln_1my, ln_1my - a * t


def _linear_parts(params: ModelParams, t: float):
    """``(p0, 1 - p0, y, 1 - y)`` evaluated directly, without logarithms.

    Survival is taken as ``1 - p0`` while ``p0 <= 1/2`` (no cancellation
    there) and from its own ratio otherwise.
    """
    _check_t(t)
    lam, mu, om = params.lam, params.mu, params.omega
    if t == 0:
        return 0.0, 1.0, 0.0, 1.0
    if abs(om) * t < NEAR_CRITICAL:
        lt = lam * t
        return lt / (1.0 + lt), 1.0 / (1.0 + lt), lt / (1.0 + lt), 1.0 / (1.0 + lt)
    if om > 0:
        em1 = -math.expm1(-om * t)
        d = om + mu * em1
        p0 = mu * em1 / d
        surv = 1.0 - p0 if p0 <= 0.5 else om / d
        return p0, surv, lam * em1 / d, om * (1.0 - em1) / d
    a = -om
    em1 = -math.expm1(-a * t)
    d = a + lam * em1
    p0 = mu * em1 / d
    surv = 1.0 - p0 if p0 <= 0.5 else a * math.exp(-a * t) / d
    return p0, surv, lam * em1 / d, a / d


def bd_truncated_pmf(params: ModelParams, t: float, n: int) -> float:
    """``P_n(t) = p_n(t) / (1 - p_0(t))``, the size law conditioned on survival.

    At ``t = 0`` this is the point mass at ``n = 1``.
    """
    if n < 1:
        raise DomainError(f"truncated pmf requires n >= 1, got {n}")
    _, _, y, one_my = _linear_parts(params, t)
    if n == 1:
        return one_my
    return one_my * y ** (n - 1)


def bd_extinction(params: ModelParams, t: float) -> float:
    """``p_0(t)``, the probability that the lineage is extinct by time ``t``."""
    if params.mu == 0:
        _check_t(t)
        return 0.0
    return _linear_parts(params, t)[0]


def bd_pmf(params: ModelParams, t: float, n: int) -> float:
    """Untruncated ``p_n(t)`` for a lineage founded by one individual."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if n == 0:
        return bd_extinction(params, t)
    _, surv, _, _ = _linear_parts(params, t)
    return surv * bd_truncated_pmf(params, t, n)


def pure_birth_pmf(params: ModelParams, t: float, n: int) -> float:
    """Yule-process size law ``e^(-lam t) (1 - e^(-lam t))^(n-1)``."""
    if params.mu != 0:
        raise DomainError(f"pure-birth pmf requires mu = 0, got {params.mu}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return bd_pmf(params, t, n)


def age_density(params: ModelParams, t: float, tau: float | None = None) -> float:
    """Density of a sublineage's age under exponential origination.

    With ``tau`` given the density is truncated to ``[0, tau]``.
    """
    _check_t(t)
    rho = params.rho
    if tau is None or math.isinf(tau):
        return rho * math.exp(-rho * t)
    if not tau > 0:
        raise DomainError(f"tau must be > 0, got {tau}")
    if t > tau:
        raise DomainError(f"t = {t} exceeds the clade age tau = {tau}")
    return rho * math.exp(-rho * t) / -math.expm1(-rho * tau)
