"""Model parameters, regime classification and derived rate quantities.

All rates share a single inverse-time unit; times are in the reciprocal unit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .exceptions import ValidationError

#: Default half-width (in rate units) of the band around ``|dgamma| = 4J``
#: that is classified as critical.
EPS_CRIT = 1e-9


class Regime(str, enum.Enum):
    UNDERDAMPED = "underdamped"
    OVERDAMPED = "overdamped"
    CRITICAL = "critical"


def _check_finite(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(name, f"expected a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise ValidationError(name, f"must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """Exchange coupling ``J`` and the two local damping rates.

    Parameters
    ----------
    J : float
        Exchange coupling, ``J >= 0``.
    gamma1, gamma2 : float
        Amplitude-damping rates of site 1 and site 2, both strictly positive.
    """

    J: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        J = _check_finite("J", self.J)
        g1 = _check_finite("gamma1", self.gamma1)
        g2 = _check_finite("gamma2", self.gamma2)
        if J < 0:
            raise ValidationError("J", f"must be >= 0, got {J!r}")
        if g1 <= 0:
            raise ValidationError("gamma1", f"must be > 0, got {g1!r}")
        if g2 <= 0:
            raise ValidationError("gamma2", f"must be > 0, got {g2!r}")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "gamma2", g2)

    def swapped(self) -> "ModelParams":
        return ModelParams(self.J, self.gamma2, self.gamma1)


@dataclass(frozen=True)
class DerivedParams:
    """Regime-dependent quantities derived from :class:`ModelParams`.

    ``lambda_or_omega`` holds the real decay gap ``sqrt(dgamma**2 - 16 J**2)``
    when overdamped, the real frequency ``sqrt(16 J**2 - dgamma**2)`` when
    underdamped and ``0.0`` at the critical point.  ``alpha`` is
    ``dgamma**2 / lambda_or_omega**2`` and is ``None`` when critical; ``k`` is
    ``2 * gbar / Lambda`` and is only defined in the overdamped regime.
    """

    gbar: float
    dgamma: float
    regime: Regime
    lambda_or_omega: float
    alpha: Optional[float]
    k: Optional[float]

    @property
    def gap(self) -> float:
        """``Lambda`` in the overdamped regime (``nan`` otherwise)."""
        return self.lambda_or_omega if self.regime is Regime.OVERDAMPED else math.nan

    @property
    def omega(self) -> float:
        """``Omega`` in the underdamped regime (``nan`` otherwise)."""
        return self.lambda_or_omega if self.regime is Regime.UNDERDAMPED else math.nan


def derived_values(p: ModelParams, eps_crit: float = EPS_CRIT) -> DerivedParams:
    """Classify the regime of ``p`` and compute its derived quantities.

    The regime only depends on ``|gamma1 - gamma2| - 4 J``: above ``eps_crit``
    the dynamics is overdamped, below ``-eps_crit`` underdamped, and critical
    in between.
    """
    if not isinstance(p, ModelParams):
        raise ValidationError("params", f"expected ModelParams, got {type(p).__name__}")
    eps_crit = _check_finite("eps_crit", eps_crit)
    if eps_crit < 0:
        raise ValidationError("eps_crit", "must be >= 0")

    gbar = 0.5 * (p.gamma1 + p.gamma2)
    dgamma = p.gamma1 - p.gamma2
    adg = abs(dgamma)
    four_j = 4.0 * p.J
    margin = adg - four_j

    # factored form keeps the gap accurate close to the crossover
    if margin > eps_crit:
        lam = math.sqrt(margin * (adg + four_j))
        return DerivedParams(gbar, dgamma, Regime.OVERDAMPED, lam,
                             dgamma * dgamma / (lam * lam), 2.0 * gbar / lam)
    if -margin > eps_crit:
        omega = math.sqrt(-margin * (adg + four_j))
        return DerivedParams(gbar, dgamma, Regime.UNDERDAMPED, omega,
                             dgamma * dgamma / (omega * omega), None)
    return DerivedParams(gbar, dgamma, Regime.CRITICAL, 0.0, None, None)


def classify_regime(p: ModelParams, eps_crit: float = EPS_CRIT) -> DerivedParams:
    """Alias of :func:`derived_values`; the returned object carries ``regime``."""
    return derived_values(p, eps_crit)
