"""Continuous-time LTI plants: representation, frequency response and simulation.

The plant is

    dx/dt = A x + B u + D1 d
        y = C x + D u + D2 d

with control ``u`` (m channels), disturbance ``d`` (p channels) and measured
performance ``y`` (l channels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

#: A model counts as asymptotically stable when max Re(spec A) < -STABILITY_MARGIN.
STABILITY_MARGIN = 1e-9

#: Minimum number of samples per period of the fastest tone / fastest mode.
MIN_SAMPLES_PER_PERIOD = 10

Signal = Callable[[np.ndarray], np.ndarray]


class ValidationError(ValueError):
    """Inconsistent dimensions or invalid model data."""


class ConfigurationError(ValueError):
    """A run was requested with settings that cannot be honoured."""


class ResonantEvaluationError(ArithmeticError):
    """(jwI - A) is singular at the requested frequency."""


class EigenSolverError(RuntimeError):
    """The dense eigen-solver failed to converge."""


def _as_matrix(value, shape, name: str) -> np.ndarray:
    if value is None:
        return np.zeros(shape)
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.shape != shape:
        raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: Optional[np.ndarray] = None
    D1: Optional[np.ndarray] = None
    D2: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if B.shape[0] != n:
            raise ValidationError(f"B has {B.shape[0]} rows, expected {n}")
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if C.shape[1] != n:
            raise ValidationError(f"C has {C.shape[1]} columns, expected {n}")
        m, ell = B.shape[1], C.shape[0]
        D1 = self.D1
        p = 1 if D1 is None else np.atleast_2d(np.asarray(D1, dtype=float)).shape[1]
        object.__setattr__(self, "A", _as_matrix(A, (n, n), "A"))
        object.__setattr__(self, "B", _as_matrix(B, (n, m), "B"))
        object.__setattr__(self, "C", _as_matrix(C, (ell, n), "C"))
        object.__setattr__(self, "D", _as_matrix(self.D, (ell, m), "D"))
        object.__setattr__(self, "D1", _as_matrix(D1, (n, p), "D1"))
        object.__setattr__(self, "D2", _as_matrix(self.D2, (ell, p), "D2"))
        x0 = np.zeros(n) if self.x0 is None else np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape != (n,):
            raise ValidationError(f"x0 has length {x0.size}, expected {n}")
        object.__setattr__(self, "x0", x0)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def n_disturbances(self) -> int:
        return self.D1.shape[1]

    def select(self, inputs: Sequence[int], outputs: Sequence[int]) -> "StateSpaceModel":
        """Sub-model keeping the given control columns and output rows."""
        inputs, outputs = list(inputs), list(outputs)
        return StateSpaceModel(
            self.A,
            self.B[:, inputs],
            self.C[outputs, :],
            self.D[np.ix_(outputs, inputs)],
            self.D1,
            self.D2[outputs, :],
            self.x0,
        )


@dataclass(frozen=True, eq=False)
class TonalDisturbance:
    """Sum of tones ``d_c cos(w t) + d_s sin(w t)``, one row of coefficients per tone."""

    frequencies: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        dc = np.asarray(self.cos_coeffs, dtype=float).reshape(w.size, -1)
        ds = np.asarray(self.sin_coeffs, dtype=float).reshape(w.size, -1)
        if dc.shape != ds.shape:
            raise ValidationError("cos and sin coefficients must have the same shape")
        if np.any(w <= 0):
            raise ValidationError("tone frequencies must be positive")
        if np.unique(w).size != w.size:
            raise ValidationError("tone frequencies must be pairwise distinct")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "cos_coeffs", dc)
        object.__setattr__(self, "sin_coeffs", ds)

    @property
    def n_channels(self) -> int:
        return self.cos_coeffs.shape[1]

    def phasor(self, i: int) -> np.ndarray:
        """Input-side phasor d_c - j d_s of tone ``i``."""
        return self.cos_coeffs[i] - 1j * self.sin_coeffs[i]

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        wt = np.outer(t, self.frequencies)
        return np.cos(wt) @ self.cos_coeffs + np.sin(wt) @ self.sin_coeffs


def transfer_at(model: StateSpaceModel, omega: float, port: str = "control") -> np.ndarray:
    """Frequency response ``C (jwI - A)^-1 B + D`` (or the disturbance analogue) at ``s = jw``."""
    if port == "control":
        Bp, Dp = model.B, model.D
    elif port == "disturbance":
        Bp, Dp = model.D1, model.D2
    else:
        raise ValidationError(f"unknown port {port!r}; use 'control' or 'disturbance'")
    n = model.n_states
    resolvent = 1j * omega * np.eye(n) - model.A
    sv = np.linalg.svd(resolvent, compute_uv=False)
    if sv[-1] <= n * np.finfo(float).eps * max(sv[0], 1.0):
        raise ResonantEvaluationError(f"jw = {omega}j is an eigenvalue of A")
    return model.C @ np.linalg.solve(resolvent, Bp) + Dp


def _eigenvalues(A: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigenvalue computation did not converge: {exc}") from exc


def is_asymptotically_stable(model: StateSpaceModel) -> bool:
    return bool(np.max(_eigenvalues(model.A).real) < -STABILITY_MARGIN)


def min_integration_rate(model: StateSpaceModel) -> float:
    """Lowest integration rate (Hz) resolving the fastest mode of ``model``."""
    lam = np.max(np.abs(_eigenvalues(model.A)))
    return MIN_SAMPLES_PER_PERIOD * lam / (2 * math.pi)


def _rk4_matrices(A: np.ndarray, h: float):
    """Return (Phi, G0, Gh, G1) with x+ = Phi x + G0 f(t) + Gh f(t+h/2) + G1 f(t+h).

    This is one classical RK4 step for x' = A x + f(t), written out by linearity.
    """
    n = A.shape[0]
    eye = np.eye(n)
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    phi = eye + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    g0 = h / 6 * (eye + hA + hA2 / 2 + hA3 / 4)
    gh = h / 6 * (4 * eye + 2 * hA + hA2 / 2)
    g1 = h / 6 * eye
    return phi, g0, gh, g1


@dataclass(eq=False)
class SimulationResult:
    t: np.ndarray
    y: np.ndarray
    x_final: np.ndarray
    u: np.ndarray = field(repr=False, default=None)


def _evaluate(signal: Optional[Signal], t: np.ndarray, width: int) -> np.ndarray:
    if signal is None:
        return np.zeros((t.size, width))
    out = np.asarray(signal(t), dtype=float).reshape(t.size, -1)
    if out.shape[1] != width:
        raise ValidationError(f"signal has {out.shape[1]} channels, expected {width}")
    return out


def simulate(
    model: StateSpaceModel,
    control: Optional[Signal],
    disturbance: Optional[Signal],
    t_span: tuple[float, float],
    sample_rate: float = 1000.0,
    *,
    x0: Optional[np.ndarray] = None,
    frequencies: Sequence[float] = (),
    substeps: Optional[int] = None,
    start_index: int = 0,
) -> SimulationResult:
    """Sample ``y`` at ``t_k = t0 + k / sample_rate`` for ``t_k`` in ``[t0, t1)``.

    ``control`` and ``disturbance`` map an array of times to an ``(N, channels)``
    array; ``None`` means zero.  Integration is fixed-step RK4 with ``substeps``
    steps per output sample; by default the smallest count that resolves the
    fastest mode is used.  ``frequencies`` lists the tones present in the inputs
    so that the output sampling can be checked against them.  ``start_index``
    offsets the sample grid so that ``t0 = start_index / sample_rate`` exactly.
    """
    if sample_rate <= 0:
        raise ConfigurationError("sample_rate must be positive")
    if not is_asymptotically_stable(model):
        raise ConfigurationError("simulation requires an asymptotically stable model")
    if len(frequencies):
        needed = MIN_SAMPLES_PER_PERIOD * max(frequencies) / (2 * math.pi)
        if sample_rate < needed:
            raise ConfigurationError(
                f"sample_rate {sample_rate} Hz under-resolves a {max(frequencies)} rad/s tone "
                f"(need >= {needed:.1f} Hz)"
            )
    needed = min_integration_rate(model)
    if substeps is None:
        substeps = max(1, math.ceil(needed / sample_rate))
    elif substeps < 1 or sample_rate * substeps < needed:
        raise ConfigurationError(
            f"integration rate {sample_rate * substeps} Hz under-resolves the fastest mode "
            f"(need >= {needed:.1f} Hz)"
        )

    t0, t1 = t_span
    if start_index:
        t0 = start_index / sample_rate
    n_samples = int(round((t1 - t0) * sample_rate))
    if n_samples < 1:
        raise ConfigurationError("t_span shorter than one sample")

    # fine grid: substeps per sample, plus midpoints
    h = 1.0 / (sample_rate * substeps)
    n_fine = n_samples * substeps
    idx = np.arange(2 * n_fine + 1)
    if start_index:
        t_half = (2 * substeps * start_index + idx) / (2 * substeps * sample_rate)
    else:
        t_half = t0 + idx * (h / 2)
    u = _evaluate(control, t_half, model.n_inputs)
    d = _evaluate(disturbance, t_half, model.n_disturbances)
    f = u @ model.B.T + d @ model.D1.T

    phi, g0, gh, g1 = _rk4_matrices(model.A, h)
    forcing = f[0:-1:2] @ g0.T + f[1::2] @ gh.T + f[2::2] @ g1.T

    x = model.x0.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    states = np.empty((n_samples, model.n_states))
    for j in range(n_fine):
        if j % substeps == 0:
            states[j // substeps] = x
        x = phi @ x + forcing[j]

    sample_idx = np.arange(n_samples) * 2 * substeps
    t = t_half[sample_idx]
    y = states @ model.C.T + u[sample_idx] @ model.D.T + d[sample_idx] @ model.D2.T
    return SimulationResult(t=t, y=y, x_final=x, u=u[sample_idx])
