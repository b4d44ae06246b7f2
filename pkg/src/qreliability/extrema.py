"""Extremum structure of the overdamped hazard.

The hazard is ``h = gbar - D'/D`` with ``D(t) = 2 Theta(t) - exp(-gbar t)``,
so ``h'(t) = -F(t) / D(t)**2`` where ``F = D D'' - D'**2``.  Extrema of ``h``
are the sign changes of ``F``.  Substituting ``u = exp(-Lambda t / 2)``
turns the same condition into ``G(u) = 0`` on ``(0, 1)``.  Both routes are
evaluated independently and must agree.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .closedform import hazard_analytic
from .core import EPS_CRIT, ModelParams, Regime, derived_values
from .exceptions import BracketNotFound, MethodDisagreement, RegimeError, ValidationError

BLANK = -1
DISAGREE = -2
DEFAULT_BAND = 0.02
ROOT_XTOL = 1e-9
ROOT_MATCH_TOL = 1e-6
NEAR_DEGENERATE = 1e-6


def _overdamped(p: ModelParams, eps_crit=EPS_CRIT):
    d = derived_values(p, eps_crit)
    if d.regime is not Regime.OVERDAMPED:
        raise RegimeError(f"requires the overdamped regime, got {d.regime.value}")
    return d


def _f_scaled(d, t):
    """``F(t) / cosh(theta)``; same sign as ``F`` and bounded for large ``t``."""
    lam, a, g = d.lambda_or_omega, d.alpha, d.gbar
    theta = 0.5 * lam * t
    w = np.exp(-2.0 * theta)
    sech = 2.0 * np.exp(-theta) / (1.0 + w)
    tanh = (1.0 - w) / (1.0 + w)
    E = np.exp(-g * t)
    lam2 = lam * lam
    return (a * a * lam2 * sech + a * (1.0 - a) * lam2
            - 2.0 * E * ((1.0 - a) * g * g * sech + a * (g * g + 0.25 * lam2) + a * lam * g * tanh))


def F_extremum(p: ModelParams, t, eps_crit: float = EPS_CRIT):
    """Extremum function ``F(t) = D D'' - (D')**2`` (overdamped only).

    Expanded so that the ``cosh(theta)**2`` contributions cancel exactly::

        F = alpha**2 Lambda**2 + alpha (1 - alpha) Lambda**2 cosh(theta)
            - E [2 (1 - alpha) gbar**2 + 2 alpha (gbar**2 + Lambda**2/4) cosh(theta)
                 + 2 alpha Lambda gbar sinh(theta)]

    with ``E = exp(-gbar t)``.  ``F(0) = -2 gamma1 gamma2``.
    """
    d = _overdamped(p, eps_crit)
    tt = np.asarray(t, dtype=float)
    lam, a, g = d.lambda_or_omega, d.alpha, d.gbar
    theta = 0.5 * lam * tt
    ep = np.exp(theta - g * tt)
    em = np.exp(-theta - g * tt)
    E = np.exp(-g * tt)
    lam2 = lam * lam
    F = (a * a * lam2 + a * (1.0 - a) * lam2 * np.cosh(theta)
         - 2.0 * (1.0 - a) * g * g * E
         - a * (g * g + 0.25 * lam2) * (ep + em)
         - a * lam * g * (ep - em))
    return float(F) if np.ndim(t) == 0 else F


def G_coefficients(p: ModelParams, eps_crit: float = EPS_CRIT):
    """``(A, B, k)`` of the ``u``-domain extremum equation."""
    d = _overdamped(p, eps_crit)
    lam2 = d.lambda_or_omega ** 2
    return d.alpha, -32.0 * p.J * p.J / lam2, d.k


def _g_from_coeffs(A, B, k, u):
    return (A * B + 4.0 * A * A * u + A * B * u * u
            - A * (k + 1.0) ** 2 * u ** k
            - B * k * k * u ** (k + 1.0)
            - A * (k - 1.0) ** 2 * u ** (k + 2.0))


def G_of_u(p: ModelParams, u, eps_crit: float = EPS_CRIT):
    """Extremum function in ``u = exp(-Lambda t / 2)``, ``u`` in ``(0, 1]``.

    ``G(0+) = A B < 0`` and ``G(1) = -8 gamma1 gamma2 / Lambda**2``.
    """
    uu = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(uu)) or np.any(uu < 0) or np.any(uu > 1):
        raise ValidationError("u", "must lie in (0, 1]")
    A, B, k = G_coefficients(p, eps_crit)
    G = _g_from_coeffs(A, B, k, uu)
    return float(G) if np.ndim(u) == 0 else G


@dataclass
class ExtremumReport:
    """Outcome of the dual-route extremum classification.

    ``locations`` is ``(t_max, t_min)`` when ``count == 2``.
    """

    count: int
    locations: Optional[Tuple[float, float]]
    plateau: float
    method_agreement: bool
    near_degenerate: bool = False
    f_roots: np.ndarray = field(default_factory=lambda: np.empty(0))
    g_roots: np.ndarray = field(default_factory=lambda: np.empty(0))


def scan_settings(d) -> Tuple[float, float]:
    """Scan horizon and grid step for the ``F`` sign scan."""
    lam = d.lambda_or_omega
    return max(20.0, 20.0 / lam), 1e-3 * min(1.0, 1.0 / lam)


def _sign_change_roots(fn, grid, xtol, rtol=4 * np.finfo(float).eps):
    vals = fn(grid)
    pos = vals > 0
    idx = np.nonzero(pos[1:] != pos[:-1])[0]
    return np.array([brentq(fn, grid[i], grid[i + 1], xtol=xtol, rtol=rtol) for i in idx])


def f_scan_roots(p: ModelParams, step: Optional[float] = None, horizon: Optional[float] = None,
                 eps_crit: float = EPS_CRIT) -> np.ndarray:
    """Positive roots of ``F`` from a dense sign scan refined to ``1e-9``."""
    d = _overdamped(p, eps_crit)
    T, dt = scan_settings(d)
    T = horizon or T
    dt = step or dt
    grid = np.linspace(0.0, T, int(math.ceil(T / dt)) + 1)
    return _sign_change_roots(lambda t: _f_scaled(d, t), grid, ROOT_XTOL)


def g_scan_roots(p: ModelParams, n_grid: int = 20000, horizon: Optional[float] = None,
                 eps_crit: float = EPS_CRIT) -> np.ndarray:
    """Roots of ``G`` on ``(0, 1)`` mapped to times, in increasing ``t``.

    The ``u`` grid is the union of a uniform and a geometric grid down to
    ``exp(-Lambda T / 2)`` so both early and late times are resolved.
    """
    d = _overdamped(p, eps_crit)
    lam = d.lambda_or_omega
    T = horizon or scan_settings(d)[0]
    A, B, k = G_coefficients(p, eps_crit)
    u_min = math.exp(-0.5 * lam * T)
    grid = np.union1d(np.linspace(u_min, 1.0, n_grid), np.geomspace(u_min, 1.0, n_grid))
    grid = grid[grid < 1.0]
    fn = lambda u: _g_from_coeffs(A, B, k, u)  # noqa: E731
    u_roots = _sign_change_roots(fn, grid, xtol=1e-300, rtol=1e-14)
    return np.sort(-2.0 * np.log(u_roots) / lam) if u_roots.size else u_roots


def count_hazard_extrema(p: ModelParams, scan: Optional[float] = None, *,
                         eps_crit: float = EPS_CRIT, strict: bool = True) -> ExtremumReport:
    """Number and location of hazard extrema for an overdamped ``p``.

    Parameters
    ----------
    scan : float, optional
        Override of the ``F`` scan step.
    strict : bool
        Raise :class:`MethodDisagreement` when the ``F`` and ``G`` routes
        disagree; otherwise return the report with ``method_agreement=False``.
    """
    d = _overdamped(p, eps_crit)
    f_roots = f_scan_roots(p, step=scan, eps_crit=eps_crit)
    g_roots = g_scan_roots(p, eps_crit=eps_crit)
    agree = f_roots.size == g_roots.size and bool(
        np.all(np.abs(f_roots - g_roots) <= ROOT_MATCH_TOL))
    near = bool(f_roots.size >= 2 and np.min(np.diff(f_roots)) < NEAR_DEGENERATE)
    count = int(f_roots.size)
    locations = (float(f_roots[0]), float(f_roots[1])) if count == 2 else None
    report = ExtremumReport(count, locations, d.gbar - 0.5 * d.lambda_or_omega, agree, near,
                            f_roots, g_roots)
    if strict and not agree:
        raise MethodDisagreement(
            f"F-scan found {f_roots.size} roots, G-scan {g_roots.size} for {p}", report)
    return report


@dataclass
class PhaseMap:
    """Extremum-count classes on a ``(gamma1, gamma2)`` grid.

    ``classes[i, j]`` refers to ``gamma1 = gamma1_axis[i]``,
    ``gamma2 = gamma2_axis[j]`` and holds ``0``, ``2``, :data:`BLANK`
    (not overdamped, or inside the crossover band) or :data:`DISAGREE`.
    """

    J: float
    gamma1_axis: np.ndarray
    gamma2_axis: np.ndarray
    regimes: np.ndarray  # object array of Regime
    classes: np.ndarray  # int

    def rows(self):
        for i, g1 in enumerate(self.gamma1_axis):
            for j, g2 in enumerate(self.gamma2_axis):
                yield g1, g2, self.regimes[i, j], int(self.classes[i, j])


def _classify_cell(args):
    J, g1, g2, band, eps_crit = args
    p = ModelParams(J, g1, g2)
    d = derived_values(p, eps_crit)
    if d.regime is not Regime.OVERDAMPED or abs(d.dgamma) - 4.0 * J <= band:
        return d.regime, BLANK
    try:
        return d.regime, count_hazard_extrema(p, eps_crit=eps_crit).count
    except MethodDisagreement:
        return d.regime, DISAGREE


def phase_map(J: float, gmin: float, gmax: float, n: int, band: float = DEFAULT_BAND, *,
              eps_crit: float = EPS_CRIT, workers: int = 1) -> PhaseMap:
    """Classify an ``n x n`` grid over ``[gmin, gmax]**2`` at coupling ``J``.

    Cells are independent; with ``workers > 1`` they are farmed out to a
    process pool, and results keep the grid order regardless.
    """
    if not (gmin > 0 and gmax > gmin):
        raise ValidationError("grid", "need 0 < gmin < gmax")
    if n < 1:
        raise ValidationError("n", "must be >= 1")
    axis = np.linspace(gmin, gmax, n)
    tasks = [(J, g1, g2, band, eps_crit) for g1 in axis for g2 in axis]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_classify_cell, tasks, chunksize=64))
    else:
        results = [_classify_cell(t) for t in tasks]
    regimes = np.empty((n, n), dtype=object)
    classes = np.empty((n, n), dtype=int)
    for idx, (reg, cls) in enumerate(results):
        regimes.flat[idx] = reg
        classes.flat[idx] = cls
    return PhaseMap(float(J), axis, axis.copy(), regimes, classes)


def hazard_extrema_on_grid(p: ModelParams, t) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of interior local maxima and minima of the sampled hazard."""
    h = hazard_analytic(p, t)
    dh = np.diff(h)
    maxima = np.nonzero((dh[:-1] > 0) & (dh[1:] <= 0))[0] + 1
    minima = np.nonzero((dh[:-1] < 0) & (dh[1:] >= 0))[0] + 1
    return maxima, minima


# --- k = 2 slice ------------------------------------------------------------

def quartic_k2(x: float) -> np.ndarray:
    """Coefficients (highest degree first) of ``P(u) = -2 G(u)`` on the ``k = 2`` slice."""
    return np.array([x + 2.0, -8.0 * x, x * x + 11.0 * x + 18.0,
                     -(2.0 * x * x + 8.0 * x + 8.0), x * x + 2.0 * x])


def _trim(c, tol):
    c = np.trim_zeros(np.where(np.abs(c) <= tol, 0.0, c), "f")
    return c if c.size else np.zeros(1)


def sturm_sequence(coeffs) -> list:
    """Sturm chain of a polynomial given highest-degree-first coefficients."""
    p0 = np.asarray(coeffs, dtype=float)
    scale = np.max(np.abs(p0))
    tol = 1e-12 * scale
    seq = [_trim(p0, tol), _trim(np.polyder(p0), tol)]
    while seq[-1].size > 1:
        _, r = np.polydiv(seq[-2], seq[-1])
        r = _trim(-r, tol)
        if not np.any(r):
            break
        seq.append(r)
    return seq


def _sign_variations(seq, x):
    vals = np.array([np.polyval(s, x) for s in seq])
    vals = vals[vals != 0]
    return int(np.count_nonzero(np.signbit(vals[1:]) != np.signbit(vals[:-1])))


def count_roots_in(coeffs, a: float, b: float) -> int:
    """Distinct real roots in ``(a, b]`` by Sturm's theorem."""
    seq = sturm_sequence(coeffs)
    return _sign_variations(seq, a) - _sign_variations(seq, b)


def k2_root_count(x: float) -> int:
    """Number of roots of the ``k = 2`` quartic in ``(0, 1)`` (endpoints are never roots for ``0 < x < 6``)."""
    return count_roots_in(quartic_k2(x), 0.0, 1.0)


def critical_x_k2(lo: float = 1e-6, hi: float = 6.0 - 1e-6, n_scan: int = 600,
                  xtol: float = 1e-12) -> float:
    """Value of ``x = 32 J**2 / Lambda**2`` where the ``k = 2`` root count changes.

    Scans ``(0, 6)`` for the first change in :func:`k2_root_count` and then
    bisects on the count.

    Raises
    ------
    BracketNotFound
        If the count is constant over the scanned interval.
    """
    xs = np.linspace(lo, hi, n_scan)
    counts = [k2_root_count(x) for x in xs]
    change = next((i for i in range(len(xs) - 1) if counts[i] != counts[i + 1]), None)
    if change is None:
        raise BracketNotFound(f"root count constant ({counts[0]}) on ({lo}, {hi})")
    a, b = xs[change], xs[change + 1]
    ca = counts[change]
    while b - a > xtol:
        m = 0.5 * (a + b)
        if k2_root_count(m) == ca:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def integer_k_curve(n: int, J: float, s_values, branch: int = 0) -> np.ndarray:
    """Points ``(gamma1, gamma2)`` on the curve ``k = n``.

    Solves ``s**2 - n**2 d**2 + 16 n**2 J**2 = 0`` for ``d = gamma1 - gamma2``
    at each ``s = gamma1 + gamma2``; ``branch`` selects ``d > 0`` (``+1``),
    ``d < 0`` (``-1``) or both (``0``).  Points with a non-positive rate are
    dropped.
    """
    if int(n) != n or n < 2:
        raise ValidationError("n", f"must be an integer >= 2, got {n!r}")
    if not J > 0:
        raise ValidationError("J", "must be > 0")
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    d = np.sqrt(s * s + 16.0 * n * n * J * J) / n
    signs = {1: (1.0,), -1: (-1.0,), 0: (1.0, -1.0)}[branch]
    pts = []
    for sign in signs:
        g1 = 0.5 * (s + sign * d)
        g2 = 0.5 * (s - sign * d)
        ok = (g1 > 0) & (g2 > 0)
        pts.append(np.column_stack([g1[ok], g2[ok]]))
    return np.vstack(pts)
