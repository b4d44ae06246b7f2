"""Numerical ground truth: full 4x4 master equation and the reduced system.

Basis ordering is ``|0> = |00>, |1> = |10>, |2> = |01>, |3> = |11>`` where the
first digit is site 1.  ``|00>`` is the absorbing failure state.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import EPS_CRIT, ModelParams, Regime, derived_values
from .exceptions import InvariantBreach, StepTooLarge, ValidationError

R_CUTOFF = 1e-4
DEFAULT_DT = 1e-3
#: Upper bound on ``dt * (gamma1 + gamma2 + 4 J)`` for the fixed-step integrator.
STABILITY_LIMIT = 0.1

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8

_SM = np.array([[0.0, 1.0], [0.0, 0.0]])  # sigma_minus on (|0>, |1>)
_I2 = np.eye(2)
# index = s1 + 2*s2, so site 2 is the slow kron factor
SIGMA_MINUS_1 = np.kron(_I2, _SM)
SIGMA_MINUS_2 = np.kron(_SM, _I2)
_HOP = SIGMA_MINUS_1.T @ SIGMA_MINUS_2 + SIGMA_MINUS_2.T @ SIGMA_MINUS_1

#: Reduced initial state for ``rho(0) = |11><11|``.
X0_KET11 = np.array([0.0, 0.0, 1.0, 0.0])


def hamiltonian(p: ModelParams) -> np.ndarray:
    """Resonant exchange Hamiltonian (on-site energies set to zero)."""
    return p.J * _HOP


def jump_operators(p: ModelParams):
    return (np.sqrt(p.gamma1) * SIGMA_MINUS_1, np.sqrt(p.gamma2) * SIGMA_MINUS_2)


def basis_density(index: int) -> np.ndarray:
    """Projector onto basis state ``index`` (0..3) as a complex 4x4 array."""
    rho = np.zeros((4, 4), dtype=complex)
    rho[index, index] = 1.0
    return rho


def ket11() -> np.ndarray:
    return basis_density(3)


def check_density_matrix(rho, *, where: str = "") -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; return ``rho``.

    Raises :class:`InvariantBreach` naming the violated tolerance.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValidationError("rho", f"expected shape (4, 4), got {rho.shape}")
    suffix = f" at {where}" if where else ""
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise InvariantBreach(f"hermiticity error {herm:.3e}{suffix}")
    tr = abs(np.trace(rho) - 1.0)
    if tr > TRACE_TOL:
        raise InvariantBreach(f"trace error {tr:.3e}{suffix}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -POSITIVITY_TOL:
        raise InvariantBreach(f"negative eigenvalue {lo:.3e}{suffix}")
    return rho


def build_A(p: ModelParams) -> np.ndarray:
    """Generator of the closed system for ``(rho11, rho22, rho33, rho_m)``."""
    g1, g2, J = p.gamma1, p.gamma2, p.J
    gbar = 0.5 * (g1 + g2)
    return np.array([
        [-g1, 0.0, g2, J],
        [0.0, -g2, g1, -J],
        [0.0, 0.0, -2.0 * gbar, 0.0],
        [-2.0 * J, 2.0 * J, 0.0, -gbar],
    ])


def lindblad_rhs(rho, p: ModelParams) -> np.ndarray:
    """Right-hand side of the local amplitude-damping master equation."""
    rho = np.asarray(rho, dtype=complex)
    H = hamiltonian(p)
    out = -1j * (H @ rho - rho @ H)
    for L in jump_operators(p):
        LdL = L.T @ L
        out += L @ rho @ L.T - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def reduced_from_density(rho) -> np.ndarray:
    """Map density matrices ``(..., 4, 4)`` to ``(rho11, rho22, rho33, rho_m)``.

    ``rho_m = i (rho12 - rho21)``, which equals ``-2 Im rho12``.
    """
    rho = np.asarray(rho)
    rho_m = np.real(1j * (rho[..., 1, 2] - rho[..., 2, 1]))
    return np.stack([rho[..., 1, 1].real, rho[..., 2, 2].real, rho[..., 3, 3].real, rho_m],
                    axis=-1)


def check_stability(p: ModelParams, dt: float) -> None:
    if not np.isfinite(dt) or dt <= 0:
        raise ValidationError("dt", f"must be positive and finite, got {dt!r}")
    scale = dt * (p.gamma1 + p.gamma2 + 4.0 * p.J)
    if scale > STABILITY_LIMIT:
        raise StepTooLarge(
            f"dt*(gamma1+gamma2+4J) = {scale:.4g} exceeds {STABILITY_LIMIT}; reduce dt")


def _check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValidationError("t_grid", "must be a non-empty 1-D array")
    if not np.all(np.isfinite(t)):
        raise ValidationError("t_grid", "must be finite")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValidationError("t_grid", "must be strictly increasing")
    return t


def rk4_step_matrix(generator: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step for ``y' = G y`` written as a matrix.

    For a linear right-hand side the four RK4 stages collapse to the degree-4
    Taylor polynomial of ``h G``; applying this matrix is bit-for-bit the same
    scheme, just without re-evaluating the stages every step.
    """
    n = generator.shape[0]
    hg = h * generator
    out = np.eye(n, dtype=hg.dtype)
    term = np.eye(n, dtype=hg.dtype)
    for j in range(1, 5):
        term = term @ hg / j
        out = out + term
    return out


def _integrate_linear(generator, y0, t, dt):
    """Fixed-step RK4 from ``t[0]``, sampling at every grid point.

    Each gap is split into ``ceil(gap / dt)`` equal steps so no step exceeds
    ``dt``.
    """
    out = np.empty((t.size, y0.size), dtype=generator.dtype)
    y = y0.astype(generator.dtype)
    out[0] = y
    cache = {}
    for i in range(1, t.size):
        gap = t[i] - t[i - 1]
        n = max(1, int(np.ceil(gap / dt - 1e-9)))
        h = gap / n
        key = round(h, 15)
        M = cache.get(key)
        if M is None:
            M = cache[key] = rk4_step_matrix(generator, h)
        for _ in range(n):
            y = M @ y
        out[i] = y
    return out


@lru_cache(maxsize=64)
def _superoperator_cached(J, g1, g2):
    p = ModelParams(J, g1, g2)
    cols = []
    for idx in range(16):
        E = np.zeros(16, dtype=complex)
        E[idx] = 1.0
        cols.append(lindblad_rhs(E.reshape(4, 4), p).reshape(16))
    return np.array(cols).T


def superoperator(p: ModelParams) -> np.ndarray:
    """16x16 matrix of :func:`lindblad_rhs` acting on row-major ``vec(rho)``."""
    return _superoperator_cached(p.J, p.gamma1, p.gamma2).copy()


@dataclass
class MasterTrajectory:
    """Sampled solution of the full master equation."""

    params: ModelParams
    t: np.ndarray
    rho: np.ndarray  # (n, 4, 4) complex

    @property
    def states(self) -> np.ndarray:
        return reduced_from_density(self.rho)


@dataclass
class ReducedTrajectory:
    """Reduced state samples with reliability and hazard.

    ``h`` is ``nan`` where ``R <= r_cutoff``.
    """

    params: ModelParams
    t: np.ndarray
    states: np.ndarray  # (n, 4)
    R: np.ndarray
    h: np.ndarray
    method: str = "spectral"


def evolve_master(rho0, p: ModelParams, t_grid, dt: float = DEFAULT_DT,
                  check: bool = True) -> MasterTrajectory:
    """Integrate the master equation from ``rho0`` at ``t_grid[0]``.

    Parameters
    ----------
    rho0 : array_like, shape (4, 4)
        Initial density matrix.
    p : ModelParams
    t_grid : array_like
        Strictly increasing output times; the first entry is the start time.
    dt : float
        Maximum RK4 step, subject to ``dt * (gamma1 + gamma2 + 4 J) <= 0.1``.
    check : bool
        Verify the density-matrix invariants at every output time.

    Raises
    ------
    StepTooLarge
        If the stability guard is violated.
    InvariantBreach
        If a trace, Hermiticity or positivity tolerance is exceeded.
    """
    check_stability(p, dt)
    t = _check_grid(t_grid)
    rho0 = np.asarray(rho0, dtype=complex)
    if check:
        check_density_matrix(rho0, where=f"t={t[0]:g}")
    vecs = _integrate_linear(superoperator(p), rho0.reshape(16), t, dt)
    rho = vecs.reshape(-1, 4, 4)
    if check:
        for ti, r in zip(t, rho):
            check_density_matrix(r, where=f"t={ti:g}")
    return MasterTrajectory(p, t, rho)


def _spectral_solution(A, x0, tau):
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) > 1e8:
        return None
    c = np.linalg.solve(V, x0.astype(complex))
    modes = np.exp(np.outer(tau, lam)) * c
    return (modes @ V.T).real


def evolve_reduced(x0, p: ModelParams, t_grid, *, dt: float = DEFAULT_DT,
                   r_cutoff: float = R_CUTOFF, eps_crit: float = EPS_CRIT) -> ReducedTrajectory:
    """Solve ``x' = A x`` on ``t_grid`` starting from ``x0`` at ``t_grid[0]``.

    Uses the eigenmode expansion away from the critical band and the RK4
    integrator of :func:`evolve_master` inside it (or whenever the numerical
    eigenbasis is too ill-conditioned to trust).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (4,) or not np.all(np.isfinite(x0)):
        raise ValidationError("x0", "expected 4 finite reals (rho11, rho22, rho33, rho_m)")
    t = _check_grid(t_grid)
    A = build_A(p)
    states = None
    method = "spectral"
    if derived_values(p, eps_crit).regime is not Regime.CRITICAL:
        states = _spectral_solution(A, x0, t - t[0])
        if states is not None:
            states[0] = x0  # exact initial condition, no round-trip through V
    if states is None:
        check_stability(p, dt)
        states = _integrate_linear(A, x0, t, dt)
        method = "rk4"
    traj = ReducedTrajectory(p, t, states, np.empty(0), np.empty(0), method)
    traj.R = reliability_numeric(traj)
    traj.h = hazard_numeric(traj, r_cutoff)
    return traj


def reliability_numeric(traj) -> np.ndarray:
    """``R = rho11 + rho22 + rho33`` for each sample of ``traj``."""
    x = traj.states
    return x[:, 0] + x[:, 1] + x[:, 2]


def hazard_numeric(traj, r_cutoff: float = R_CUTOFF) -> np.ndarray:
    """Pointwise hazard ``(gamma1 rho11 + gamma2 rho22) / R``.

    Evaluated from the state rather than by differencing ``R``; entries with
    ``R <= r_cutoff`` are ``nan``.
    """
    p = traj.params
    x = traj.states
    R = x[:, 0] + x[:, 1] + x[:, 2]
    flux = p.gamma1 * x[:, 0] + p.gamma2 * x[:, 1]
    h = np.full(R.shape, np.nan)
    ok = R > r_cutoff
    h[ok] = flux[ok] / R[ok]
    return h
