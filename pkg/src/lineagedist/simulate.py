"""Event-driven Monte Carlo for lineage sizes.

Each replicate owns a SplitMix64 stream keyed by ``(seed, replicate)``,
so output is bit-identical whatever the thread count or scheduling.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .birthdeath import ModelParams
from .distributions import exact_tail_series, q_series_exact_array
from .errors import DomainError

# the bundled TBB is too old for numba; OpenMP avoids a warning at first use
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "omp"

__all__ = [
    "SimulationConfig",
    "SizeSample",
    "BDOutcome",
    "simulate_bd_at_time",
    "simulate_bd_sizes",
    "sample_lineage_size",
    "lumped_tvd",
    "thread_count",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 2.0**-53

# resampling an extinct run at the same age gives up after this many tries
MAX_TRUNCATION_TRIES = 1_000_000


def thread_count() -> int:
    """Worker threads, capped by ``LINEAGEDIST_THREADS`` when set."""
    cap = numba.config.NUMBA_NUM_THREADS
    env = os.environ.get("LINEAGEDIST_THREADS")
    if env:
        try:
            want = int(env)
        except ValueError:
            raise DomainError(f"LINEAGEDIST_THREADS must be an integer, got {env!r}") from None
        if want < 1:
            raise DomainError("LINEAGEDIST_THREADS must be >= 1")
        return min(want, cap)
    return cap


@numba.njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(inline="always")
def _next(state):
    state = state + _GOLDEN
    return state, _mix(state)


@numba.njit(inline="always")
def _uniform(state):
    # uniform on (0, 1], safe under log
    state, z = _next(state)
    return state, ((z >> _S11) + _ONE) * _TWO_M53


@numba.njit
def _stream(seed, rep):
    return _mix(seed ^ _mix(np.uint64(rep) + _GOLDEN))


@numba.njit
def _run_bd(lam, mu, t, state, cap):
    """One linear birth-death path from a single founder up to time ``t``.

    Returns ``(state, size, capped)``; a path reaching ``cap`` stops early.
    """
    n = 1
    clock = 0.0
    total = lam + mu
    while True:
        if n == 0:
            return state, 0, False
        if n >= cap:
            return state, n, True
        state, u = _uniform(state)
        clock += -math.log(u) / (total * n)
        if clock > t:
            return state, n, False
        state, u = _uniform(state)
        if u * total <= lam:
            n += 1
        else:
            n -= 1


@numba.njit(parallel=True)
def _bd_batch(lam, mu, t, seed, n_rep, cap):
    sizes = np.empty(n_rep, dtype=np.int64)
    capped = np.zeros(n_rep, dtype=np.bool_)
    for i in numba.prange(n_rep):
        state = _stream(seed, i)
        state, n, c = _run_bd(lam, mu, t, state, cap)
        sizes[i] = n
        capped[i] = c
    return sizes, capped


@numba.njit(parallel=True)
def _lineage_batch(lam, mu, rho, tau_mass, seed, n_rep, cap, truncated, max_tries):
    sizes = np.empty(n_rep, dtype=np.int64)
    capped = np.zeros(n_rep, dtype=np.bool_)
    rejections = np.zeros(n_rep, dtype=np.int64)
    for i in numba.prange(n_rep):
        state = _stream(seed, i)
        state, u = _uniform(state)
        # inverse cdf of the exponential age, truncated to [0, tau]
        t = -math.log1p(-(1.0 - u) * tau_mass) / rho
        state, n, c = _run_bd(lam, mu, t, state, cap)
        tries = 0
        while truncated and n == 0:
            tries += 1
            if tries > max_tries:
                c = True
                break
            state, n, c = _run_bd(lam, mu, t, state, cap)
        sizes[i] = n
        capped[i] = c
        rejections[i] = tries
    return sizes, capped, rejections


def _set_threads():
    numba.set_num_threads(thread_count())


def _seed64(seed) -> np.uint64:
    if seed is None:
        raise DomainError("a seed is required; the simulator never draws entropy implicitly")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.uint64(seed)


class BDOutcome(NamedTuple):
    size: int
    capped: bool


def simulate_bd_at_time(
    params: ModelParams, t: float, seed: int, replicate: int = 0, max_population: int = 10**8
) -> BDOutcome:
    """Size at time ``t`` of one simulated birth-death path."""
    if not t >= 0 or math.isinf(t):
        raise DomainError(f"t must be finite and >= 0, got {t}")
    state = np.uint64(_stream(_seed64(seed), np.uint64(replicate)))
    _, n, c = _run_bd(params.lam, params.mu, float(t), state, int(max_population))
    return BDOutcome(int(n), bool(c))


def simulate_bd_sizes(
    params: ModelParams, t: float, seed: int, n_replicates: int, max_population: int = 10**8
):
    """Vectorised :func:`simulate_bd_at_time`; returns ``(sizes, capped)`` arrays."""
    if not t >= 0 or math.isinf(t):
        raise DomainError(f"t must be finite and >= 0, got {t}")
    if n_replicates < 1:
        raise DomainError("n_replicates must be >= 1")
    _set_threads()
    return _bd_batch(params.lam, params.mu, float(t), _seed64(seed), int(n_replicates), int(max_population))


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo settings for :func:`sample_lineage_size`.

    ``max_population`` stops a path once it reaches that many individuals;
    such replicates are recorded at the cap and counted in
    ``capped_replicates``.  Heavy-tailed settings need a modest cap to keep
    run times bounded, with comparisons lumping everything well below it.
    """

    params: ModelParams
    n_replicates: int
    seed: int
    tau: float | None = None
    truncated: bool = True
    max_population: int = 10**8

    def __post_init__(self):
        if int(self.n_replicates) != self.n_replicates or self.n_replicates < 1:
            raise DomainError(f"n_replicates must be a positive integer, got {self.n_replicates}")
        if self.max_population < 1:
            raise DomainError("max_population must be positive")
        if self.tau is not None and not self.tau > 0:
            raise DomainError(f"tau must be > 0, got {self.tau}")
        _seed64(self.seed)


@dataclass(frozen=True)
class SizeSample:
    """Empirical size histogram.

    ``sizes``/``counts`` are sorted parallel arrays.  Replicates stopped at
    the population cap appear under ``n = max_population``.
    """

    sizes: np.ndarray
    counts: np.ndarray
    n_replicates_used: int
    truncation_rejections: int
    capped_replicates: int
    max_population: int

    @property
    def histogram(self) -> dict:
        return {int(n): int(c) for n, c in zip(self.sizes, self.counts)}

    def count(self, n: int) -> int:
        i = np.searchsorted(self.sizes, n)
        if i < len(self.sizes) and self.sizes[i] == n:
            return int(self.counts[i])
        return 0

    def fraction_at_least(self, n: int) -> float:
        return float(self.counts[self.sizes >= n].sum()) / self.n_replicates_used

    def mean(self) -> float:
        return float(np.dot(self.sizes, self.counts)) / self.n_replicates_used

    def to_csv(self, fh=None) -> str:
        """Write ``n,count`` rows (header first, LF endings); returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "count"])
        for n, c in zip(self.sizes, self.counts):
            w.writerow([int(n), int(c)])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _histogram(sizes):
    vals, counts = np.unique(sizes, return_counts=True)
    return vals.astype(np.int64), counts.astype(np.int64)


def sample_lineage_size(cfg: SimulationConfig, return_sizes: bool = False):
    """Simulate lineage sizes at exponentially distributed ages.

    Per replicate: an age ``t`` drawn from the (optionally ``tau``-truncated)
    exponential with rate ``rho``, then one birth-death path to ``t``.  With
    ``truncated`` set, an extinct path is rerun at the same ``t`` until it
    survives, which is the per-age conditioning the size law assumes.

    With ``return_sizes`` the per-replicate sizes come back as a second value.
    """
    p = cfg.params
    tau_mass = 1.0 if cfg.tau is None or math.isinf(cfg.tau) else -math.expm1(-p.rho * cfg.tau)
    _set_threads()
    sizes, capped, rej = _lineage_batch(
        p.lam,
        p.mu,
        p.rho,
        tau_mass,
        _seed64(cfg.seed),
        int(cfg.n_replicates),
        int(cfg.max_population),
        bool(cfg.truncated),
        MAX_TRUNCATION_TRIES,
    )
    vals, counts = _histogram(sizes)
    sample = SizeSample(
        sizes=vals,
        counts=counts,
        n_replicates_used=int(cfg.n_replicates),
        truncation_rejections=int(rej.sum()),
        capped_replicates=int(capped.sum()),
        max_population=int(cfg.max_population),
    )
    if return_sizes:
        return sample, sizes
    return sample


def lumped_tvd(sample: SizeSample, params: ModelParams, lump_at: int) -> float:
    """Total variation distance between ``sample`` and the exact size law.

    Sizes ``1 .. lump_at-1`` are compared one by one; everything at or
    above ``lump_at`` forms one bin whose exact mass is the closed-form
    tail.  ``lump_at`` must sit well below the population cap (at most half
    of it) so capped paths land in the lumped bin.
    """
    lump_at = int(lump_at)
    if lump_at < 2:
        raise DomainError("lump_at must be >= 2")
    if 2 * lump_at > sample.max_population:
        raise DomainError(
            f"lump_at={lump_at} too close to the population cap {sample.max_population}"
        )
    if sample.count(0):
        raise DomainError("lumped_tvd compares truncated samples; found extinct replicates")
    n_tot = sample.n_replicates_used
    emp = np.zeros(lump_at - 1)
    below = sample.sizes < lump_at
    emp[sample.sizes[below] - 1] = sample.counts[below] / n_tot
    exact = q_series_exact_array(params, np.arange(1, lump_at))
    emp_tail = sample.fraction_at_least(lump_at)
    ex_tail = exact_tail_series(params, lump_at - 1)
    return 0.5 * (math.fsum(np.abs(emp - exact)) + abs(emp_tail - ex_tail))
