"""Runtime checks of the AHSS stability analysis.

Everything here evaluates quantities along trajectories: the estimator
decrease inequality, the Lyapunov function of the SISO closed loop with its
constants, and the exact SISO phasor-domain recursion itself.  Checks are
strict for exact phasor runs and report-only for time-domain runs, where the
harmonic steady-state assumption holds only approximately.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ahss.controllers import AhssGains, closed_loop_eigenvalues

logger = logging.getLogger(__name__)

#: Absolute slack for inequalities evaluated on exact phasor runs.
SLACK = 1e-12


class OutsideAdmissibleSetError(ValueError):
    """The initial estimate is exactly anti-phase to the true plant value."""


def _fro2(M) -> float:
    M = np.asarray(M, dtype=complex)
    return float(np.vdot(M, M).real)


def prop1_gap(M_prev, M_next, M_star, y_k, gamma: float, nu2: float) -> float:
    """LHS minus RHS of the estimator decrease inequality (<= 0 when it holds).

    LHS = ||M_k - M_*||^2 - ||M_{k-1} - M_*||^2,
    RHS = -gamma ||(M_{k-1} - M_*) M_{k-1}^H y_k||^2 / (nu2 + ||M_{k-1}^H y_k||^2).
    """
    M_prev = np.atleast_2d(np.asarray(M_prev, dtype=complex))
    M_next = np.atleast_2d(np.asarray(M_next, dtype=complex))
    M_star = np.atleast_2d(np.asarray(M_star, dtype=complex))
    y_k = np.atleast_1d(np.asarray(y_k, dtype=complex))
    lhs = _fro2(M_next - M_star) - _fro2(M_prev - M_star)
    w = M_prev.conj().T @ y_k
    rhs = -gamma * _fro2((M_prev - M_star) @ w) / (nu2 + _fro2(w))
    return lhs - rhs


@dataclass(frozen=True)
class LyapunovConstants:
    a: float
    b_stab: float
    b_conv: float
    c1: float
    c2: float


def lyap_constants(M0: complex, M_star: complex, mu: float, gamma: float, nu1: float, nu2: float) -> LyapunovConstants:
    """Constants of the SISO Lyapunov argument for initial estimate ``M0``.

    ``c2`` lower-bounds ``|M_k|`` along the whole trajectory.  When ``M0`` is a
    positive multiple of ``M_*`` (other than ``M_*`` itself) the estimate moves
    along the segment between them, so ``min(|M0|, |M_*|)`` is used instead of
    the generic expression, which would vanish there.
    """
    M0, M_star = complex(M0), complex(M_star)
    if not gamma > 0:
        raise ValueError("the Lyapunov constants need gamma > 0")
    if M0 == 0:
        raise OutsideAdmissibleSetError("M0 must be nonzero")
    ms = abs(M_star)
    a = (abs(M0) + 2 * ms) ** 2 / nu2
    cross = M0 * M_star.conjugate()
    collinear = abs(cross.imag) <= 1e-14 * abs(cross)
    if collinear and cross.real < 0:
        raise OutsideAdmissibleSetError("M0 is anti-phase to M_* (outside the admissible set)")
    tilde0 = M0 - M_star
    if tilde0 == 0:
        c2 = ms
    elif collinear:
        c2 = min(abs(M0), ms)
    else:
        c2 = abs((tilde0 * M_star.conjugate()).imag) / abs(tilde0)
    b_stab = 4 * a * mu * nu2 / (gamma * nu1 * ms**2)
    b_conv = a * mu * nu2 / (gamma * nu1 * c2**2)
    c1 = a * mu * nu1 * ms**2 / (nu1 + a * nu2) ** 2
    return LyapunovConstants(a=a, b_stab=b_stab, b_conv=b_conv, c1=c1, c2=c2)


def lyap_V(y, M_tilde, a: float, b: float) -> float:
    """``ln(1 + a |y|^2) + b |M_tilde|^2``."""
    return math.log1p(a * abs(y) ** 2) + b * abs(M_tilde) ** 2


@dataclass(eq=False)
class StepTrace:
    """SISO phasor trajectory indexed as in the recursions.

    ``y[k]`` for k = 1..K+1 (``y[0]`` is NaN), ``u[k]`` and ``M[k]`` for
    k = 0..K, ``eta[k]`` for k = 1..K (``eta[0]`` is NaN).
    """

    M_star: complex
    d_hat: complex
    gains: AhssGains
    y: np.ndarray
    u: np.ndarray
    M: np.ndarray
    eta: np.ndarray

    @property
    def steps(self) -> int:
        return self.M.size - 1

    @property
    def M_tilde(self) -> np.ndarray:
        return self.M - self.M_star

    def constants(self) -> LyapunovConstants:
        g = self.gains
        return lyap_constants(self.M[0], self.M_star, g.mu, g.gamma, g.nu1, g.nu2)

    def prop1_gaps(self) -> np.ndarray:
        """Gap for k = 1..K (entry k-1)."""
        g = self.gains
        Mp, Mn, yk = self.M[:-1], self.M[1:], self.y[1:-1]
        lhs = np.abs(Mn - self.M_star) ** 2 - np.abs(Mp - self.M_star) ** 2
        w = np.abs(Mp * yk) ** 2
        rhs = -g.gamma * np.abs(Mp - self.M_star) ** 2 * w / (g.nu2 + w)
        return lhs - rhs

    def V(self, a: float, b: float) -> np.ndarray:
        """V(y_k, M_tilde_{k-1}) for k = 1..K+1 (entry k-1)."""
        return np.log1p(a * np.abs(self.y[1:]) ** 2) + b * np.abs(self.M_tilde) ** 2

    def lyapunov(self, constants: Optional[LyapunovConstants] = None, b: Optional[float] = None) -> "LyapunovTrace":
        """Lyapunov differences and bound margins for k = 1..K.

        ``margin`` is ``bound - dV`` with ``bound = -c1 |y_k|^2 / (1 + a |y_k|^2)``;
        it is nonnegative wherever the decrease bound holds.
        """
        c = self.constants() if constants is None else constants
        b = c.b_conv if b is None else b
        V = self.V(c.a, b)
        dV = np.diff(V)
        yk = np.abs(self.y[1:-1]) ** 2
        bound = -c.c1 * yk / (1 + c.a * yk)
        Vm = np.abs(self.M_tilde) ** 2
        Vy = np.abs(self.y[1:]) ** 2
        return LyapunovTrace(V=V, dV=dV, margin=bound - dV, dV_M=np.diff(Vm), dV_y=np.diff(Vy))

    def beta(self) -> np.ndarray:
        """beta_k for k = 0..K: the running product of estimator contraction factors."""
        g = self.gains
        s = np.abs(self.M[:-1]) ** 2 * np.abs(self.y[1:-1]) ** 2
        factors = 1 - g.gamma * s / (g.nu2 + s)
        return np.concatenate([[1.0], np.cumprod(factors)])


class LyapunovTrace(NamedTuple):
    V: np.ndarray
    dV: np.ndarray
    margin: np.ndarray
    dV_M: np.ndarray
    dV_y: np.ndarray


def siso_closed_loop_iterate(M_star, d_hat, u0, M0, gains: AhssGains, K: int) -> StepTrace:
    """Iterate the exact SISO AHSS closed loop in phasor space for K steps."""
    M_star, d_hat = complex(M_star), complex(d_hat)
    mu, gamma, nu1, nu2 = gains.mu, gains.gamma, gains.nu1, gains.nu2
    # plain Python complex arithmetic; numpy scalars are much slower per step
    y = [complex("nan"), M_star * complex(u0) + d_hat]
    u = [complex(u0)]
    M = [complex(M0)]
    eta = [math.nan]
    for k in range(1, K + 1):
        Mp, yk = M[k - 1], y[k]
        n1 = nu1 + abs(Mp) ** 2
        y.append(yk - mu * M_star * Mp.conjugate() * yk / n1)
        u.append(u[k - 1] - mu / n1 * Mp.conjugate() * yk)
        M.append(
            Mp
            - gamma
            / (nu2 + abs(Mp) ** 2 * abs(yk) ** 2)
            * (Mp * Mp.conjugate() * yk + n1 / mu * (y[k + 1] - yk))
            * yk.conjugate()
            * Mp
        )
        du = u[k] - u[k - 1]
        eta.append(gamma * n1 * n1 / (nu2 * mu * mu + n1 * n1 * abs(du) ** 2))
    y, u, M, eta = np.array(y), np.array(u), np.array(M), np.array(eta)
    return StepTrace(M_star=M_star, d_hat=d_hat, gains=gains, y=y, u=u, M=M, eta=eta)


def hss_iterate(M_e, M_star, y1, rho: float, K: int, stop_above: Optional[float] = None) -> np.ndarray:
    """``y_{k+1} = (I - rho M_* M_e^H) y_k`` for k = 1..K; row k-1 holds y_k.

    With ``stop_above`` the iteration ends early (and the array is shortened)
    once ``||y_k||`` exceeds that value.
    """
    M_e = np.atleast_2d(np.asarray(M_e, dtype=complex))
    M_star = np.atleast_2d(np.asarray(M_star, dtype=complex))
    T = np.eye(M_star.shape[0]) - rho * M_star @ M_e.conj().T
    ys = np.empty((K + 1, M_star.shape[0]), dtype=complex)
    ys[0] = y1
    for k in range(K):
        ys[k + 1] = T @ ys[k]
        if stop_above is not None and np.linalg.norm(ys[k + 1]) > stop_above:
            return ys[: k + 2]
    return ys


def hss_spectral_radius(M_e, M_star, rho: float) -> float:
    """Spectral radius of the HSS closed-loop matrix on the nonzero eigen-directions."""
    lam = closed_loop_eigenvalues(M_e, M_star)
    return float(np.max(np.abs(1 - rho * lam)))


@dataclass
class OracleRecord:
    k: int
    prop1_gap: float
    dV: float
    dV_bound_margin: float
    M_abs: float
    c2: float


def oracle_report(M_star, gains: AhssGains, M_hist, y_hist, strict: bool = False) -> list[OracleRecord]:
    """Evaluate the analysis inequalities along a recorded controller history.

    ``M_hist[k]`` and ``y_hist[k]`` follow the recursion indexing (``y_hist[0]``
    unused).  Lyapunov quantities are only defined for SISO loops with an
    admissible initial estimate and ``gamma > 0``; otherwise they are NaN.  With
    ``strict`` a violation raises ``AssertionError``; otherwise it is logged.
    """
    M_star = np.atleast_2d(np.asarray(M_star, dtype=complex))
    M_hist = [np.atleast_2d(np.asarray(M, dtype=complex)) for M in M_hist]
    siso = M_star.shape == (1, 1)
    consts = None
    if siso and gains.gamma > 0:
        try:
            consts = lyap_constants(M_hist[0][0, 0], M_star[0, 0], gains.mu, gains.gamma, gains.nu1, gains.nu2)
        except OutsideAdmissibleSetError:
            consts = None
    records = []
    for k in range(1, len(M_hist)):
        if k + 1 >= len(y_hist):
            break
        gap = prop1_gap(M_hist[k - 1], M_hist[k], M_star, y_hist[k], gains.gamma, gains.nu2)
        dV = margin = math.nan
        c2 = consts.c2 if consts else math.nan
        if consts is not None:
            yk, yk1 = complex(np.ravel(y_hist[k])[0]), complex(np.ravel(y_hist[k + 1])[0])
            ms = M_star[0, 0]
            dV = lyap_V(yk1, M_hist[k][0, 0] - ms, consts.a, consts.b_conv) - lyap_V(
                yk, M_hist[k - 1][0, 0] - ms, consts.a, consts.b_conv
            )
            bound = -consts.c1 * abs(yk) ** 2 / (1 + consts.a * abs(yk) ** 2)
            margin = bound - dV
        rec = OracleRecord(k, gap, dV, margin, float(np.sqrt(_fro2(M_hist[k]))), c2)
        violated = gap > SLACK or margin < -SLACK or (consts is not None and rec.M_abs < c2 - SLACK)
        if violated:
            msg = f"analysis inequality violated at k={k}: gap={gap:.3e} margin={margin:.3e} |M|={rec.M_abs:.3e}"
            if strict:
                raise AssertionError(msg)
            logger.debug(msg)
        records.append(rec)
    return records
