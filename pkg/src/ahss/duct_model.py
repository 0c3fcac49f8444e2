"""Modal model of a one-dimensional acoustic duct with point speakers and microphones."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
from scipy.linalg import block_diag

from ahss.lti_core import StateSpaceModel, ValidationError


@dataclass(frozen=True)
class DuctGeometry:
    """Duct geometry and acoustic constants (SI units).

    Defaults reproduce the 2 m duct with two control speakers, one disturbance
    speaker and two microphones used throughout the examples.
    """

    length: float = 2.0
    disturbance_position: float = 0.95
    speaker_positions: tuple = (0.4, 1.25)
    microphone_positions: tuple = (0.3, 1.7)
    sound_speed: float = 343.0
    air_density: float = 1.21
    speaker_area: float = 0.0025
    n_modes: int = 5
    damping: tuple = field(default=(0.2,))

    def __post_init__(self):
        object.__setattr__(self, "speaker_positions", tuple(float(x) for x in self.speaker_positions))
        object.__setattr__(self, "microphone_positions", tuple(float(x) for x in self.microphone_positions))
        zeta = tuple(float(z) for z in np.atleast_1d(self.damping))
        if len(zeta) == 1:
            zeta = zeta * int(self.n_modes)
        object.__setattr__(self, "damping", zeta)
        self.validate()

    def validate(self):
        if self.length <= 0:
            raise ValidationError("duct length must be positive")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValidationError("n_modes must be a positive integer")
        if len(self.damping) != self.n_modes:
            raise ValidationError(f"expected {self.n_modes} damping ratios, got {len(self.damping)}")
        if not all(0 < z < 1 for z in self.damping):
            raise ValidationError("damping ratios must lie in (0, 1)")
        positions = (self.disturbance_position, *self.speaker_positions, *self.microphone_positions)
        if not all(0 < x < self.length for x in positions):
            raise ValidationError("speaker and microphone positions must lie strictly inside the duct")
        if not self.speaker_positions or not self.microphone_positions:
            raise ValidationError("need at least one control speaker and one microphone")
        for name in ("sound_speed", "air_density", "speaker_area"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")

    def natural_frequency(self, i: int) -> float:
        """Natural frequency (rad/s) of mode ``i`` (1-based)."""
        return i * math.pi * self.sound_speed / self.length


def mode_shape(geometry: DuctGeometry, i: int, xi: float) -> float:
    """Mode shape ``c sqrt(2/L) sin(i pi xi / L)`` of mode ``i`` (1-based) at position ``xi``."""
    if not 1 <= i <= geometry.n_modes:
        raise ValidationError(f"mode index {i} outside 1..{geometry.n_modes}")
    L = geometry.length
    if not 0 <= xi <= L:
        raise ValidationError(f"position {xi} outside [0, {L}]")
    return geometry.sound_speed * math.sqrt(2.0 / L) * math.sin(i * math.pi * xi / L)


def _modal_column(geometry: DuctGeometry, xi: float) -> np.ndarray:
    # (integral of q_i, q_i) ordering: only the q_i slot is driven / observed
    col = np.zeros(2 * geometry.n_modes)
    for i in range(1, geometry.n_modes + 1):
        col[2 * i - 1] = mode_shape(geometry, i, xi)
    return geometry.air_density / geometry.speaker_area * col


def build_duct(geometry: DuctGeometry) -> StateSpaceModel:
    """2r-state model: control speakers -> microphone pressures, disturbance speaker on D1."""
    geometry.validate()
    blocks = []
    for i, zeta in enumerate(geometry.damping, start=1):
        wn = geometry.natural_frequency(i)
        blocks.append(np.array([[0.0, 1.0], [-wn * wn, -2.0 * zeta * wn]]))
    A = block_diag(*blocks)
    B = np.column_stack([_modal_column(geometry, x) for x in geometry.speaker_positions])
    C = np.vstack([_modal_column(geometry, x) for x in geometry.microphone_positions])
    D1 = _modal_column(geometry, geometry.disturbance_position)[:, None]
    return StateSpaceModel(A=A, B=B, C=C, D1=D1)


def duct_eigenvalues(geometry: DuctGeometry) -> np.ndarray:
    """Closed-form eigenvalues ``-zeta wn +/- j wn sqrt(1 - zeta^2)`` of every mode."""
    out = []
    for i, zeta in enumerate(geometry.damping, start=1):
        wn = geometry.natural_frequency(i)
        wd = wn * math.sqrt(1 - zeta * zeta)
        out.extend([complex(-zeta * wn, wd), complex(-zeta * wn, -wd)])
    return np.array(out)

