"""Uniform circular microphone array: geometry, far-field steering vectors
and the spherically isotropic (diffuse) noise coherence."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from errors import GeometryError
from utils import debug_print

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform circular array, microphone 0 at angle 0.

    Args:
        mic_count: Number of microphones C
        radius: Array radius in meters
        sample_rate: Sampling rate in Hz
        sound_speed: Speed of sound in m/s
    """
    mic_count: int = 8
    radius: float = 0.05
    sample_rate: float = 16000.0
    sound_speed: float = 343.0
    mic_angles: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.mic_count < 2:
            raise GeometryError(f"Need at least 2 microphones, got {self.mic_count}")
        if self.radius <= 0:
            raise GeometryError(f"Radius must be positive, got {self.radius}")
        if self.sample_rate <= 0:
            raise GeometryError(f"Sample rate must be positive, got {self.sample_rate}")
        if self.sound_speed <= 0:
            raise GeometryError(f"Sound speed must be positive, got {self.sound_speed}")
        angles = self.mic_angles
        if angles is None:
            angles = TWO_PI * np.arange(self.mic_count) / self.mic_count
        angles = np.asarray(angles, dtype=np.float64)
        if angles.shape != (self.mic_count,) or np.any(np.diff(angles) <= 0) \
                or angles[0] < 0 or angles[-1] >= TWO_PI:
            raise GeometryError("mic_angles must be strictly increasing in [0, 2pi)")
        angles.setflags(write=False)
        object.__setattr__(self, 'mic_angles', angles)

    @property
    def positions(self) -> np.ndarray:
        """Microphone coordinates (C x 2) relative to the array center"""
        return self.radius * np.stack([np.cos(self.mic_angles), np.sin(self.mic_angles)], axis=1)

    def mic_distances(self) -> np.ndarray:
        pos = self.positions
        return np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)

    def delays(self, theta: float, elevation: float = 0.0) -> np.ndarray:
        """Arrival times tau_c (seconds) of a plane wave from theta, relative to the center.

        The microphone facing theta hears the wave first (negative delay).
        """
        return -(self.radius / self.sound_speed) * np.cos(elevation) * np.cos(theta - self.mic_angles)


@dataclass(frozen=True)
class SteeringVector:
    omega: float
    theta: float
    values: np.ndarray


@dataclass(frozen=True)
class NoiseCovariance:
    omega: float
    matrix: np.ndarray


def steering_vector(geom: ArrayGeometry, omega: float, theta: float) -> SteeringVector:
    """d(omega, theta)[c] = exp(-j omega tau_c(theta))"""
    theta = float(np.mod(theta, TWO_PI))
    values = np.exp(-1j * omega * geom.delays(theta))
    return SteeringVector(omega=float(omega), theta=theta, values=values)


def steering_matrix(geom: ArrayGeometry, omegas: np.ndarray, theta: float) -> np.ndarray:
    """Steering vectors for several frequencies at once (F x C)"""
    omegas = np.asarray(omegas, dtype=np.float64)
    return np.exp(-1j * omegas[:, None] * geom.delays(np.mod(theta, TWO_PI))[None, :])


def diffuse_noise_covariance(geom: ArrayGeometry, omega: float) -> NoiseCovariance:
    """Coherence sinc(omega d_ij / c) of a spherically isotropic noise field"""
    distances = geom.mic_distances()
    # np.sinc is the normalized sinc: sin(pi x) / (pi x)
    matrix = np.sinc(omega * distances / (geom.sound_speed * np.pi))
    np.fill_diagonal(matrix, 1.0)
    debug_print(f"Diffuse coherence at omega={omega:.1f}: min={matrix.min():.4f}", component="array")
    return NoiseCovariance(omega=float(omega), matrix=matrix)


def diffuse_noise_covariances(geom: ArrayGeometry, omegas: np.ndarray) -> np.ndarray:
    """Stack of diffuse coherence matrices (F x C x C)"""
    distances = geom.mic_distances()
    stack = np.sinc(np.asarray(omegas)[:, None, None] * distances[None] / (geom.sound_speed * np.pi))
    idx = np.arange(geom.mic_count)
    stack[:, idx, idx] = 1.0
    return stack
