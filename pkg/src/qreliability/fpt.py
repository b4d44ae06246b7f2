"""Stroboscopic first-passage monitoring: sampling and estimators.

Shots start in ``|11>`` and are checked for failure at ``t_k = k dt``.  A shot
whose first detected failure is at ``t_k`` falls in bin ``k`` (true failure
time in ``(t_{k-1}, t_k]``).

Starting from ``|11>`` the state stays block diagonal in the excitation
sectors, so a failure check never disturbs the surviving part of the state
and the failure time has exactly the law ``1 - R(t)``.  Shots are therefore
drawn by inverse transform on the closed-form reliability.

Random numbers come from a counter-based Philox stream keyed by
``(seed, stream)``; shot ``i`` always consumes output ``i`` of that stream,
so results do not depend on chunking or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .closedform import hazard_analytic, reliability_analytic
from .core import ModelParams
from .exceptions import EmptySample, ValidationError

CENSORED = -1
#: Bins whose risk set is smaller than this are flagged unreliable.
MIN_RISK = 10
DEFAULT_CHUNK = 1 << 20
_BLOCK = 4  # Philox emits four 64-bit words per counter increment


@dataclass(frozen=True)
class MonitoringConfig:
    """Sampling interval, shot count, seed and censoring horizon.

    ``t_max=None`` picks the first multiple of ``dt`` at which the
    reliability has dropped below ``1e-6`` (see :func:`default_horizon`).
    """

    dt: float
    n_shots: int
    seed: int = 0
    t_max: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("dt", f"must be > 0, got {self.dt!r}")
        if int(self.n_shots) != self.n_shots or self.n_shots < 1:
            raise ValidationError("n_shots", f"must be an integer >= 1, got {self.n_shots!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed", "must be an integer in [0, 2**64)")
        if self.t_max is not None and not (math.isfinite(self.t_max) and self.t_max >= self.dt):
            raise ValidationError("t_max", f"must be >= dt, got {self.t_max!r}")

    def resolved(self, p: ModelParams) -> "MonitoringConfig":
        if self.t_max is not None:
            return self
        return MonitoringConfig(self.dt, self.n_shots, self.seed, default_horizon(p, self.dt))

    def n_bins(self) -> int:
        """Index ``K`` of the last monitoring time ``t_K <= t_max``."""
        if self.t_max is None:
            raise ValidationError("t_max", "unresolved; call resolved(params) first")
        return int(math.floor(self.t_max / self.dt + 1e-9))

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_bins() + 1)


def default_horizon(p: ModelParams, dt: float, r_target: float = 1e-6) -> float:
    """Smallest ``k dt`` with ``R(k dt) < r_target``."""
    t = max(dt, 1.0)
    while reliability_analytic(p, t) >= r_target:
        t *= 2.0
    k = np.arange(1, int(math.ceil(t / dt)) + 1)
    R = reliability_analytic(p, dt * k)
    return float(dt * k[np.argmax(R < r_target)])


@dataclass
class FptSampleSet:
    """Per-shot failure bins; :data:`CENSORED` marks survival past ``t_max``."""

    bins: np.ndarray
    config: MonitoringConfig
    params: ModelParams

    @property
    def censored(self) -> np.ndarray:
        return self.bins == CENSORED


@dataclass
class EstimateSeries:
    """Discrete-time estimates on ``t_k = k dt``, ``k = 0..K``.

    ``n_k[k]`` counts failures in ``(t_k, t_{k+1}]``; it is unobserved for the
    last grid point, where ``n_k`` is 0 and ``h_hat`` is ``nan``.  ``h_hat`` is
    also ``nan`` wherever ``n_risk == 0``.
    """

    t: np.ndarray
    n_risk: np.ndarray
    n_k: np.ndarray
    R_hat: np.ndarray
    h_hat: np.ndarray
    var_theory: np.ndarray

    @property
    def reliable(self) -> np.ndarray:
        """Bins with a risk set of at least :data:`MIN_RISK` shots."""
        return self.n_risk >= MIN_RISK


def _reliability_grid(p, cfg):
    R = reliability_analytic(p, cfg.times())
    # guard searchsorted against sub-ulp wobble
    return np.minimum.accumulate(R)


def bin_probabilities(p: ModelParams, cfg: MonitoringConfig) -> np.ndarray:
    """Conditional failure probabilities ``p_k = 1 - R(t_{k+1}) / R(t_k)``.

    Returns ``K`` values for ``k = 0..K-1``; ``nan`` where ``R(t_k)``
    underflows to zero.
    """
    cfg = cfg.resolved(p)
    R = reliability_analytic(p, cfg.times())
    with np.errstate(divide="ignore", invalid="ignore"):
        pk = -np.expm1(np.log(R[1:]) - np.log(R[:-1]))
    pk[R[:-1] <= 0] = np.nan
    return np.clip(pk, 0.0, 1.0)


def shot_uniforms(seed: int, start: int, stop: int, stream: int = 0) -> np.ndarray:
    """Uniforms in ``[0, 1)`` for shots ``start..stop-1`` of stream ``(seed, stream)``."""
    block, skip = divmod(start, _BLOCK)
    key = np.array([int(seed), int(stream)], dtype=np.uint64)
    bg = np.random.Philox(key=key, counter=np.array([block, 0, 0, 0], dtype=np.uint64))
    return np.random.Generator(bg).random(stop - start + skip)[skip:]


def bins_from_uniforms(R_grid: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Smallest ``k >= 1`` with ``R_grid[k] < u``; :data:`CENSORED` if none."""
    neg = -R_grid[1:]
    j = np.searchsorted(neg, -np.asarray(u), side="right")
    return np.where(j < neg.size, j + 1, CENSORED).astype(np.int64)


def sample_first_passage(p: ModelParams, cfg: MonitoringConfig, *, stream: int = 0,
                         uniforms=None, chunk_size: int = DEFAULT_CHUNK,
                         workers: int = 1) -> FptSampleSet:
    """Draw ``cfg.n_shots`` binned first-passage times.

    ``uniforms`` replaces the Philox stream (for controlled tests).  Chunking
    and ``workers`` only affect scheduling, never the output.
    """
    cfg = cfg.resolved(p)
    R_grid = _reliability_grid(p, cfg)
    if uniforms is not None:
        u = np.asarray(uniforms, dtype=float)
        if u.shape != (cfg.n_shots,):
            raise ValidationError("uniforms", f"expected {cfg.n_shots} values")
        return FptSampleSet(bins_from_uniforms(R_grid, u), cfg, p)

    if chunk_size < 1:
        raise ValidationError("chunk_size", "must be >= 1")
    starts = range(0, cfg.n_shots, chunk_size)

    def work(start):
        stop = min(start + chunk_size, cfg.n_shots)
        return bins_from_uniforms(R_grid, shot_uniforms(cfg.seed, start, stop, stream))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    return FptSampleSet(np.concatenate(parts), cfg, p)


def hazard_variance_theory(p: ModelParams, t_k, cfg: MonitoringConfig):
    """Binomial variance of the hazard estimator at times ``t_k``.

    Returns ``(exact, asymptotic)`` with::

        exact      = p_k (1 - p_k) / (dt**2 * N_s R(t_k))
        asymptotic = h(t_k) / (dt * N_s R(t_k))

    where ``p_k = 1 - R(t_k + dt) / R(t_k)``.
    """
    t = np.asarray(t_k, dtype=float)
    dt, n = cfg.dt, cfg.n_shots
    R0 = reliability_analytic(p, t)
    R1 = reliability_analytic(p, t + dt)
    with np.errstate(divide="ignore", invalid="ignore"):
        pk = -np.expm1(np.log(R1) - np.log(R0))
        exact = pk * (1.0 - pk) / (dt * dt * n * R0)
        asym = hazard_analytic(p, t) / (dt * n * R0)
    return exact, asym


def estimate(sample: FptSampleSet) -> EstimateSeries:
    """Empirical reliability, hazard and theoretical hazard variance."""
    bins = np.asarray(sample.bins)
    if bins.size == 0:
        raise EmptySample("no shots in sample")
    cfg, p = sample.config, sample.params
    K = cfg.n_bins()
    N = bins.size
    failed = bins[bins != CENSORED]
    if failed.size and (failed.min() < 1 or failed.max() > K):
        raise ValidationError("bins", f"bin indices must lie in 1..{K}")
    n_k = np.bincount(failed - 1, minlength=K + 1).astype(np.int64)
    n_risk = N - np.concatenate([[0], np.cumsum(n_k[:-1])])
    t = cfg.times()
    with np.errstate(divide="ignore", invalid="ignore"):
        h_hat = np.where(n_risk > 0, n_k / (cfg.dt * n_risk), np.nan)
    h_hat[K] = np.nan
    var, _ = hazard_variance_theory(p, t, MonitoringConfig(cfg.dt, N, cfg.seed, cfg.t_max))
    return EstimateSeries(t, n_risk, n_k, n_risk / N, h_hat, var)


@dataclass
class VarianceRow:
    n_shots: int
    t: float
    var_emp: float
    var_theory: float
    var_asymptotic: float


def variance_experiment(p: ModelParams, cfg: MonitoringConfig, n_s_list: Sequence[int],
                        times: Sequence[float], repetitions: int = 50) -> list:
    """Empirical versus theoretical variance of the hazard estimator.

    For each shot count, ``repetitions`` independent samples are drawn, each
    on its own Philox stream, and the unbiased sample variance of
    ``h_hat(t_k)`` is compared with :func:`hazard_variance_theory`.
    Repetitions whose risk set at ``t_k`` is empty are left out.
    """
    if repetitions < 2:
        raise ValidationError("repetitions", "must be >= 2")
    rows = []
    for i_ns, n_s in enumerate(n_s_list):
        run_cfg = MonitoringConfig(cfg.dt, int(n_s), cfg.seed, cfg.t_max).resolved(p)
        ks = [int(round(t / cfg.dt)) for t in times]
        if max(ks) >= run_cfg.n_bins():
            raise ValidationError("times", "must lie below the censoring horizon")
        h = np.empty((repetitions, len(ks)))
        for rep in range(repetitions):
            est = estimate(sample_first_passage(p, run_cfg, stream=i_ns * repetitions + rep))
            h[rep] = est.h_hat[ks]
        var_emp = np.nanvar(h, axis=0, ddof=1)
        tk = cfg.dt * np.asarray(ks)
        exact, asym = hazard_variance_theory(p, tk, run_cfg)
        rows.extend(VarianceRow(int(n_s), float(tt), float(ve), float(vx), float(va))
                    for tt, ve, vx, va in zip(tk, var_emp, exact, asym))
    return rows


def loglog_slope(n_shots, variances) -> float:
    """Least-squares slope of ``log(var)`` against ``log(N_s)``."""
    x = np.log(np.asarray(n_shots, dtype=float))
    y = np.log(np.asarray(variances, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
