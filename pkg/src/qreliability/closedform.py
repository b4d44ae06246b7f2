"""Analytic eigenmodes, reliability and hazard for the ``|11>`` initial state.

Production evaluation uses the real hyperbolic (overdamped), trigonometric
(underdamped) or polynomial (critical) branches.  With
``E = exp(-gbar t)`` and ``theta = Lambda t / 2`` (or ``Omega t / 2``)::

    R(t)  = 2 E Theta(t) - E**2
    -R'(t) = 2 gbar E Theta - alpha Lambda E sinh(theta) - 2 gbar E**2

where ``Theta = 1 + alpha (cosh theta - 1)`` in the overdamped regime and
``1 + alpha (1 - cos theta)`` in the underdamped one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import EPS_CRIT, ModelParams, Regime, derived_values
from .exceptions import DegenerateDissipation, DegenerateSpectrum, ValidationError

EPS_DEG = 1e-12
# above this theta the overdamped forms are evaluated in factored exponentials
_THETA_SWITCH = 1.0


@dataclass
class ModeDecomposition:
    """Eigenvalues, eigenvectors (columns) and expansion coefficients."""

    eigenvalues: np.ndarray  # (4,) complex
    eigenvectors: np.ndarray  # (4, 4) complex, column k is v_k
    coefficients: np.ndarray  # (4,) complex

    def state(self, t) -> np.ndarray:
        """Reduced state ``sum_k C_k exp(lambda_k t) v_k``; complex, shape (n, 4)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return (np.exp(np.outer(t, self.eigenvalues)) * self.coefficients) @ self.eigenvectors.T


def ket11_coefficients(p: ModelParams, eps_crit: float = EPS_CRIT) -> np.ndarray:
    """Closed-form mode amplitudes ``(C1, C2, C3, C4)`` for ``x(0) = (0, 0, 1, 0)``."""
    d = derived_values(p, eps_crit)
    lam2 = _lambda_complex(d) ** 2
    c3 = 4.0 * p.J * d.dgamma / lam2
    return np.array([-2.0 * c3, 1.0, c3, c3], dtype=complex)


def _lambda_complex(d) -> complex:
    if d.regime is Regime.UNDERDAMPED:
        return 1j * d.lambda_or_omega
    return complex(d.lambda_or_omega)


def eigen_modes(p: ModelParams, x0=None, *, eps_crit: float = EPS_CRIT,
                eps_deg: float = EPS_DEG) -> ModeDecomposition:
    """Eigen-decomposition of the reduced generator and the amplitudes for ``x0``.

    ``x0`` defaults to the ``|11>`` state, for which the closed-form
    amplitudes are used; any other initial vector is solved for directly.

    Raises
    ------
    DegenerateSpectrum
        In the critical band (the generator is not diagonalizable) or for
        ``J = 0`` where the chosen eigenvectors diverge.
    DegenerateDissipation
        If ``|gamma1 - gamma2| <= eps_deg``.
    """
    d = derived_values(p, eps_crit)
    if d.regime is Regime.CRITICAL:
        raise DegenerateSpectrum("critical regime: eigenvalues coalesce, no eigenbasis")
    if abs(d.dgamma) <= eps_deg:
        raise DegenerateDissipation(f"|gamma1 - gamma2| = {abs(d.dgamma):.3g} <= {eps_deg:g}")
    if p.J == 0.0:
        raise DegenerateSpectrum("J = 0: eigenvectors v3, v4 are not finite in this basis")

    J, dg, gbar = p.J, d.dgamma, d.gbar
    lam = _lambda_complex(d)
    eigenvalues = np.array([-gbar, -2.0 * gbar, -gbar - lam / 2, -gbar + lam / 2], dtype=complex)
    V = np.zeros((4, 4), dtype=complex)
    V[:, 0] = [2 * J / dg, 2 * J / dg, 0, 1]
    V[:, 1] = [-1, -1, 1, 0]
    # (dg + lam)(dg - lam) = 16 J**2; form the non-cancelling sum directly and
    # the other from the product, then v3, v4 need no differences at all
    sp, sm = dg + lam, dg - lam
    if abs(sp) >= abs(sm):
        sm = 16.0 * J * J / sp
    else:
        sp = 16.0 * J * J / sm
    V[:, 2] = [sp / (8 * J), sm / (8 * J), 0, 1]
    V[:, 3] = [sm / (8 * J), sp / (8 * J), 0, 1]

    if x0 is None:
        C = ket11_coefficients(p, eps_crit)
    else:
        x0 = np.asarray(x0, dtype=complex)
        if x0.shape != (4,):
            raise ValidationError("x0", f"expected 4 components, got shape {x0.shape}")
        C = np.linalg.solve(V, x0)
    return ModeDecomposition(eigenvalues, V, C)


def _as_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise ValidationError("t", "times must be finite and >= 0")
    return t


def _pieces(p: ModelParams, t, eps_crit):
    """Return ``(E, ETheta, Esinh_scaled, Ehalf, d)`` evaluated at ``t``.

    * ``ETheta``   = ``E * Theta``
    * ``Esinh``    = ``E * sinh(theta) / Lambda`` (``sin``/``Omega`` when
      underdamped, ``t/2`` critical), finite as ``Lambda -> 0``
    * ``Ehalf``    = ``E * 2 sinh(theta/2)**2 / Lambda**2`` with the analogous
      underdamped (sign-flipped) and critical (``t**2/8``) continuations
    """
    d = derived_values(p, eps_crit)
    g = d.gbar
    E = np.exp(-g * t)
    if d.regime is Regime.CRITICAL:
        half = t * t / 8.0
        return E, E * (1.0 + d.dgamma ** 2 * half), E * t / 2.0, E * half, d
    if d.regime is Regime.UNDERDAMPED:
        om = d.lambda_or_omega
        phi = 0.5 * om * t
        half = 2.0 * np.sin(0.5 * phi) ** 2 / (om * om)
        Eth = E * (1.0 + d.dgamma ** 2 * half)
        return E, Eth, E * np.sin(phi) / om, E * half, d

    lam = d.lambda_or_omega
    theta = 0.5 * lam * t
    small = theta <= _THETA_SWITCH
    ts = np.where(small, theta, 0.0)
    tl = np.where(small, 0.0, theta)
    # small theta: direct forms, cancellation-free via sinh^2
    half_s = E * 2.0 * np.sinh(0.5 * ts) ** 2 / (lam * lam)
    sinh_s = E * np.sinh(ts) / lam
    # large theta: exponents combined before exponentiating
    ep = np.exp(tl - g * t)
    em = np.exp(-tl - g * t)
    half_l = (0.5 * (ep + em) - E) / (lam * lam)
    sinh_l = 0.5 * (ep - em) / lam
    Ehalf = np.where(small, half_s, half_l)
    Esinh = np.where(small, sinh_s, sinh_l)
    return E, E + d.dgamma ** 2 * Ehalf, Esinh, Ehalf, d


def _scalar_out(t_in, arr):
    return float(arr) if np.ndim(t_in) == 0 else arr


def reliability_analytic(p: ModelParams, t, eps_crit: float = EPS_CRIT):
    """Closed-form reliability ``R(t)`` for the ``|11>`` initial state."""
    tt = _as_time(t)
    E, ETh, _, _, _ = _pieces(p, tt, eps_crit)
    R = np.clip(2.0 * ETh - E * E, 0.0, 1.0)
    return _scalar_out(t, R)


def failure_density_analytic(p: ModelParams, t, eps_crit: float = EPS_CRIT):
    """``-dR/dt`` from the closed form (the failure-time density)."""
    tt = _as_time(t)
    E, ETh, Esinh, _, d = _pieces(p, tt, eps_crit)
    g = d.gbar
    f = 2.0 * g * ETh - d.dgamma ** 2 * Esinh - 2.0 * g * E * E
    return _scalar_out(t, f)


def populations_analytic(p: ModelParams, t, eps_crit: float = EPS_CRIT) -> np.ndarray:
    """Closed-form ``(rho11, rho22, rho33, rho_m)`` rows for the ``|11>`` start."""
    tt = np.atleast_1d(_as_time(t))
    E, ETh, Esinh, Ehalf, d = _pieces(p, tt, eps_crit)
    odd = d.dgamma * Esinh
    E2 = E * E
    rho_m = 8.0 * p.J * d.dgamma * Ehalf
    return np.stack([ETh - odd - E2, ETh + odd - E2, E2, rho_m], axis=-1)


def hazard_analytic(p: ModelParams, t, eps_crit: float = EPS_CRIT):
    """Closed-form hazard ``h(t) = -R'(t) / R(t)``.

    Written as ``gbar - N(t) / D(t)`` with numerator and denominator rescaled
    by ``exp(-theta)`` at large overdamped ``theta`` so the ratio stays finite
    long after ``R`` underflows.
    """
    tt = _as_time(t)
    d = derived_values(p, eps_crit)
    g = d.gbar
    E = np.exp(-g * tt)
    if d.regime is Regime.CRITICAL:
        J2 = p.J * p.J
        num = 8.0 * J2 * tt + g * E
        den = 2.0 + 4.0 * J2 * tt * tt - E
    elif d.regime is Regime.UNDERDAMPED:
        om, a = d.lambda_or_omega, d.alpha
        phi = 0.5 * om * tt
        num = om * a * np.sin(phi) + g * E
        den = 2.0 * (1.0 + 2.0 * a * np.sin(0.5 * phi) ** 2) - E
    else:
        lam, a = d.lambda_or_omega, d.alpha
        theta = 0.5 * lam * tt
        small = theta <= _THETA_SWITCH
        ts = np.where(small, theta, 0.0)
        tl = np.where(small, _THETA_SWITCH, theta)
        num_s = lam * a * np.sinh(ts) + g * E
        den_s = 2.0 * (1.0 + 2.0 * a * np.sinh(0.5 * ts) ** 2) - E
        w = np.exp(-2.0 * tl)
        Ew = np.exp(-g * tt - tl)
        num_l = 0.5 * lam * a * (1.0 - w) + g * Ew
        den_l = 2.0 * (1.0 - a) * np.exp(-tl) + a * (1.0 + w) - Ew
        num = np.where(small, num_s, num_l)
        den = np.where(small, den_s, den_l)
    h = np.maximum(g - num / den, 0.0)
    return _scalar_out(t, h)


@dataclass(frozen=True)
class HazardAsymptote:
    """Long-time behaviour of the hazard.

    ``plateau`` is set for the overdamped and critical regimes; the
    underdamped hazard instead oscillates boundedly about ``baseline`` with
    angular ``frequency`` and ``bounded`` is ``True``.
    """

    regime: Regime
    plateau: Optional[float] = None
    baseline: Optional[float] = None
    frequency: Optional[float] = None
    bounded: bool = True


def hazard_asymptote(p: ModelParams, eps_crit: float = EPS_CRIT) -> HazardAsymptote:
    d = derived_values(p, eps_crit)
    if d.regime is Regime.UNDERDAMPED:
        return HazardAsymptote(d.regime, baseline=d.gbar, frequency=0.5 * d.lambda_or_omega)
    plateau = d.gbar - 0.5 * d.lambda_or_omega
    return HazardAsymptote(d.regime, plateau=max(plateau, 0.0))


def oscillation_period(p: ModelParams, eps_crit: float = EPS_CRIT) -> float:
    """Hazard period ``4 pi / Omega`` (underdamped); ``inf`` otherwise."""
    d = derived_values(p, eps_crit)
    if d.regime is not Regime.UNDERDAMPED:
        return math.inf
    return 4.0 * math.pi / d.lambda_or_omega
