"""Harmonic steady-state controllers acting on phasors.

All controllers here see the plant only through the phasor of the measured
performance at one frequency, ``y_{k+1} = M_* u_k + d_hat`` in the ideal case.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ahss.harmonic import PhasorVector, avg_power, extract, has_full_rank, synthesize
from ahss.lti_core import ValidationError

#: An HSS loop is declared divergent once ||y_k|| exceeds this multiple of ||y_1||.
DIVERGENCE_FACTOR = 1e3


class DegeneratePlantError(ValueError):
    """The plant map does not have full rank min(l, m)."""


class DivergentLimitError(ArithmeticError):
    """The HSS closed loop has no limit for the given estimate."""


class EstimatorCollapseWarning(RuntimeWarning):
    """The adaptive estimate hit exactly zero; the model update was skipped."""


def _vec(x) -> np.ndarray:
    if isinstance(x, PhasorVector):
        x = x.value
    return np.atleast_1d(np.asarray(x, dtype=complex))


def _mat(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=complex))


def _fro2(M: np.ndarray) -> float:
    return float(np.vdot(M, M).real)


# ---------------------------------------------------------------------------
# optimal open-loop control


class OptimalControl(NamedTuple):
    u: np.ndarray
    y: np.ndarray
    cost: float


def optimal_control(M, d_hat) -> OptimalControl:
    """Control phasor minimising the average output power ``0.5 ||M u + d_hat||^2``.

    For a wide plant (fewer outputs than inputs) the minimum-norm minimiser is
    returned.
    """
    M, d_hat = _mat(M), _vec(d_hat)
    ell, m = M.shape
    if d_hat.shape != (ell,):
        raise ValidationError(f"d_hat has length {d_hat.size}, expected {ell}")
    if not has_full_rank(M):
        raise DegeneratePlantError("degenerate plant map: rank M < min(l, m)")
    Mh = M.conj().T
    if ell > m:
        u = -np.linalg.solve(Mh @ M, Mh @ d_hat)
    elif ell == m:
        u = -np.linalg.solve(M, d_hat)
    else:
        u = -Mh @ np.linalg.solve(M @ Mh, d_hat)
    y = M @ u + d_hat
    if ell <= m:
        y = np.zeros(ell, dtype=complex)
    return OptimalControl(u, y, avg_power(y))


# ---------------------------------------------------------------------------
# fixed-estimate HSS


@dataclass(frozen=True, eq=False)
class HssController:
    M_e: np.ndarray
    rho: float
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M_e", _mat(self.M_e))
        object.__setattr__(self, "u", _vec(self.u))
        if not self.rho > 0:
            raise ValidationError("rho must be positive")
        if self.u.shape != (self.M_e.shape[1],):
            raise ValidationError("initial control does not match the estimate's input count")

    @classmethod
    def from_initial(cls, M_e, rho: float, u0=None) -> "HssController":
        M_e = _mat(M_e)
        u0 = np.zeros(M_e.shape[1], dtype=complex) if u0 is None else u0
        return cls(M_e, rho, u0)

    def step(self, y_next) -> "HssController":
        return hss_step(self, y_next)


def hss_step(ctl: HssController, y_next) -> HssController:
    """``u_{k+1} = u_k - rho M_e^H y_{k+1}``."""
    y = _vec(y_next)
    if y.shape != (ctl.M_e.shape[0],):
        raise ValidationError(f"measurement has length {y.size}, expected {ctl.M_e.shape[0]}")
    return replace(ctl, u=ctl.u - ctl.rho * (ctl.M_e.conj().T @ y))


class GainBound(NamedTuple):
    eigenvalues: np.ndarray
    rho_max: Optional[float]

    @property
    def stable(self) -> bool:
        return self.rho_max is not None


def closed_loop_eigenvalues(M_e, M_star) -> np.ndarray:
    """spec(M_e^H M_*) intersected with spec(M_* M_e^H).

    The two products share their nonzero eigenvalues and the larger one only
    adds zeros, so the intersection is the spectrum of the smaller product.
    """
    M_e, M_star = _mat(M_e), _mat(M_star)
    ell, m = M_star.shape
    if M_e.shape != (ell, m):
        raise ValidationError("estimate and plant map differ in shape")
    small = M_e.conj().T @ M_star if m <= ell else M_star @ M_e.conj().T
    return np.linalg.eigvals(small)


def hss_gain_bound(M_e, M_star) -> GainBound:
    """Largest admissible HSS gain, ``min 2 Re(l) / |l|^2`` over the closed-loop eigenvalues.

    ``rho_max`` is ``None`` when some eigenvalue lies outside the open right
    half-plane; then the loop diverges for every ``rho > 0``.
    """
    lam = closed_loop_eigenvalues(M_e, M_star)
    if np.any(lam.real <= 0):
        return GainBound(lam, None)
    return GainBound(lam, float(np.min(2 * lam.real / np.abs(lam) ** 2)))


class HssLimit(NamedTuple):
    u: np.ndarray
    y: np.ndarray


def hss_limits(M_e, M_star, d_hat, u0=None) -> HssLimit:
    """Closed-form limits of the HSS loop (valid for any admissible ``rho``)."""
    M_e, M_star, d_hat = _mat(M_e), _mat(M_star), _vec(d_hat)
    ell, m = M_star.shape
    u0 = np.zeros(m, dtype=complex) if u0 is None else _vec(u0)
    if not hss_gain_bound(M_e, M_star).stable:
        raise DivergentLimitError("no limit: an eigenvalue of the HSS loop lies outside the ORHP")
    Meh = M_e.conj().T
    if ell > m:
        u = -np.linalg.solve(Meh @ M_star, Meh @ d_hat)
        y = d_hat - M_star @ np.linalg.solve(Meh @ M_star, Meh @ d_hat)
    elif ell == m:
        u = -np.linalg.solve(M_star, d_hat)
        y = np.zeros(ell, dtype=complex)
    else:
        u = u0 - Meh @ np.linalg.solve(M_star @ Meh, M_star @ u0 + d_hat)
        y = np.zeros(ell, dtype=complex)
    return HssLimit(u, y)


# ---------------------------------------------------------------------------
# adaptive HSS


@dataclass(frozen=True)
class AhssGains:
    mu: float = 0.2
    gamma: float = 0.2
    nu1: float = 1.0
    nu2: float = 1.0

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise ValidationError("mu must lie in (0, 1]")
        # gamma = 0 freezes the estimate (HSS with a normalised gain)
        if not 0 <= self.gamma <= 1:
            raise ValidationError("gamma must lie in [0, 1]")
        if not (self.nu1 > 0 and self.nu2 > 0):
            raise ValidationError("nu1 and nu2 must be positive")

    @classmethod
    def defaults_for(cls, M0, mu: float = 0.2, gamma: float = 0.2, scale: float = 0.1) -> "AhssGains":
        """Gains with ``nu1 = nu2 = scale * ||M0||_F^2``."""
        nu = scale * _fro2(_mat(M0))
        return cls(mu=mu, gamma=gamma, nu1=nu, nu2=nu)

    def hss_rho(self, M0) -> float:
        """Fixed HSS gain matching the first AHSS step, ``mu / (nu1 + ||M0||_F^2)``."""
        return self.mu / (self.nu1 + _fro2(_mat(M0)))


@dataclass(frozen=True, eq=False)
class AhssState:
    """One tone's adaptive controller.

    ``u`` is the command currently applied (u_k), ``u_prev`` the one before
    it, ``y`` the latest measurement (y_k) and ``M`` the latest estimate.
    Before the first measurement ``u_prev`` and ``y`` are ``None``.
    """

    M: np.ndarray
    u: np.ndarray
    gains: AhssGains
    u_prev: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    k: int = 0
    eta: float = 0.0

    def __post_init__(self):
        M = _mat(self.M)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "u", _vec(self.u))
        if self.u.shape != (M.shape[1],):
            raise ValidationError("initial control does not match the estimate's input count")

    @classmethod
    def initial(cls, M0, gains: Optional[AhssGains] = None, u0=None) -> "AhssState":
        M0 = _mat(M0)
        if not np.any(M0):
            raise ValidationError("initial estimate M0 must be nonzero")
        gains = AhssGains.defaults_for(M0) if gains is None else gains
        u0 = np.zeros(M0.shape[1], dtype=complex) if u0 is None else u0
        return cls(M=M0, u=u0, gains=gains)

    def step(self, y_next) -> "AhssState":
        return ahss_control_step(self, y_next)


def ahss_gradient(M, du, dy) -> np.ndarray:
    """Complex gradient ``(M du - dy) du^H`` of ``0.5 ||M du - dy||^2``."""
    M, du, dy = _mat(M), _vec(du), _vec(dy)
    return np.outer(M @ du - dy, du.conj())


def ahss_step_size(M_prev, du, mu: float, gamma: float, nu1: float, nu2: float) -> float:
    s = (nu1 + _fro2(_mat(M_prev))) ** 2
    du = _vec(du)
    return gamma * s / (nu2 * mu * mu + s * float(np.vdot(du, du).real))


def ahss_model_update(state: AhssState, y_next) -> tuple[np.ndarray, float]:
    """Gradient step on the estimate from the latest pair of windows.

    Returns the new estimate and the step size used.  Must not be called before
    the controller has seen its first measurement.
    """
    if state.y is None or state.u_prev is None:
        raise ValidationError("model update needs two measurements")
    g = state.gains
    du = state.u - state.u_prev
    dy = _vec(y_next) - state.y
    eta = ahss_step_size(state.M, du, g.mu, g.gamma, g.nu1, g.nu2)
    return state.M - eta * ahss_gradient(state.M, du, dy), eta


def ahss_control_step(state: AhssState, y_next) -> AhssState:
    """Consume ``y_{k+1}``: update the estimate (from k >= 1), then the command."""
    y = _vec(y_next)
    if y.shape != (state.M.shape[0],):
        raise ValidationError(f"measurement has length {y.size}, expected {state.M.shape[0]}")
    M, eta = state.M, 0.0
    if state.y is not None:
        M_new, eta = ahss_model_update(state, y)
        if not np.any(M_new):
            warnings.warn(
                f"estimator collapse at step {state.k}: model update skipped",
                EstimatorCollapseWarning,
                stacklevel=2,
            )
        else:
            M = M_new
    g = state.gains
    u_next = state.u - (g.mu / (g.nu1 + _fro2(M))) * (M.conj().T @ y)
    return replace(state, M=M, u=u_next, u_prev=state.u, y=y, k=state.k + 1, eta=eta)


# ---------------------------------------------------------------------------
# multi-tone bank


@dataclass(frozen=True, eq=False)
class ToneBank:
    """Independent controllers, one per disturbance frequency."""

    frequencies: tuple
    controllers: tuple

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.frequencies)
        if len(set(freqs)) != len(freqs):
            raise ValidationError("tone frequencies must be distinct")
        if len(freqs) != len(self.controllers):
            raise ValidationError("need exactly one controller per tone")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "controllers", tuple(self.controllers))

    def phasors(self) -> list[PhasorVector]:
        return [PhasorVector(w, c.u) for w, c in zip(self.frequencies, self.controllers)]

    def command(self, t) -> np.ndarray:
        """Summed real control signal for the current phasor commands."""
        return synthesize(self.phasors(), t)

    def step_phasors(self, measurements: Sequence) -> "ToneBank":
        return replace(self, controllers=tuple(c.step(y) for c, y in zip(self.controllers, measurements)))


def tone_bank_step(bank: ToneBank, samples, sample_times) -> tuple[ToneBank, list[PhasorVector]]:
    """Extract every tone from one window, step each controller, return the new bank."""
    ys = [extract(samples, sample_times, w) for w in bank.frequencies]
    return bank.step_phasors(ys), ys
