"""Phasors at known frequencies.

A real signal ``v_c cos(wt) + v_s sin(wt)`` is represented by the complex
phasor ``v_c - j v_s``.  Both :func:`synthesize` and :func:`extract` are
referenced to absolute time, so phasors from successive windows can be
compared directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ahss.lti_core import ConfigurationError, ValidationError, transfer_at

#: Smallest-to-largest singular value ratio below which a plant map is rank deficient.
RANK_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class PhasorVector:
    omega: float
    value: np.ndarray

    def __post_init__(self):
        if not self.omega > 0:
            raise ValidationError("phasor frequency must be positive")
        value = np.atleast_1d(np.asarray(self.value, dtype=complex))
        if not np.all(np.isfinite(value)):
            raise ValidationError("phasor entries must be finite")
        object.__setattr__(self, "value", value)

    def __len__(self):
        return self.value.size


def has_full_rank(M: np.ndarray) -> bool:
    sv = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    return bool(sv[0] > 0 and sv[-1] > RANK_TOLERANCE * sv[0])


@dataclass(frozen=True, eq=False)
class HarmonicPlantMap:
    """Exact phasor-domain plant ``y = M u + d_hat`` at one frequency."""

    omega: float
    M: np.ndarray
    d_hat: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=complex))
        d_hat = np.atleast_1d(np.asarray(self.d_hat, dtype=complex))
        if d_hat.shape != (M.shape[0],):
            raise ValidationError(f"d_hat has length {d_hat.size}, expected {M.shape[0]}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "d_hat", d_hat)

    @property
    def full_rank(self) -> bool:
        return has_full_rank(self.M)

    @classmethod
    def from_model(cls, model, omega: float, disturbance_phasor) -> "HarmonicPlantMap":
        M = transfer_at(model, omega, "control")
        Gd = transfer_at(model, omega, "disturbance")
        return cls(omega, M, Gd @ np.atleast_1d(np.asarray(disturbance_phasor, dtype=complex)))


def synthesize(phasors: Iterable[PhasorVector], t) -> np.ndarray:
    """Real signal ``sum_i Re(p_i) cos(w_i t) - Im(p_i) sin(w_i t)``.

    Scalar ``t`` gives a channel vector; an array of times gives ``(len(t), channels)``.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = None
    for p in phasors:
        wt = p.omega * t[:, None]
        term = np.cos(wt) * p.value.real - np.sin(wt) * p.value.imag
        out = term if out is None else out + term
    if out is None:
        raise ValidationError("synthesize needs at least one phasor")
    return out[0] if scalar else out


def extract(samples, sample_times, omega: float) -> PhasorVector:
    """Single-frequency DFT value ``(2/N) sum_n y[n] exp(-j w t_n)`` per channel."""
    y = np.asarray(samples, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    t = np.asarray(sample_times, dtype=float)
    if t.shape != (y.shape[0],):
        raise ValidationError("sample_times must match the number of samples")
    n = t.size
    if n < 2:
        raise ConfigurationError("window needs at least two samples")
    span = (t[-1] - t[0]) * n / (n - 1)
    if span < 2 * math.pi / omega * (1 - 1e-9):
        raise ConfigurationError("window is shorter than one period of the requested tone")
    kernel = np.exp(-1j * omega * t)
    return PhasorVector(omega, (2.0 / n) * (kernel @ y))


def hss_response(plant: HarmonicPlantMap, u: PhasorVector) -> PhasorVector:
    u_val = u.value
    if u_val.shape != (plant.M.shape[1],):
        raise ValidationError(f"control phasor has length {u_val.size}, expected {plant.M.shape[1]}")
    return PhasorVector(plant.omega, plant.M @ u_val + plant.d_hat)


def avg_power(y) -> float:
    """Average power ``0.5 * ||y||^2`` of the harmonic signal with phasor ``y``."""
    value = y.value if isinstance(y, PhasorVector) else np.asarray(y, dtype=complex)
    return 0.5 * float(np.vdot(value, value).real)

