"""Superdirective beamformer (SDB) design.

Narrowband weights minimize the diffuse-noise output power under the
distortionless look-direction constraint:

    h = R^-1 d / (d^H R^-1 d),  R = R_NN + loading * I

and are realized as K-tap FIR filters on the K-point DFT grid. A bank holds
one C x K filter set per look direction, uniformly spread around the circle.
"""

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from array_model import ArrayGeometry, TWO_PI, diffuse_noise_covariances, steering_matrix, steering_vector
from errors import CorruptHeader, SingularCovariance
from utils import atomic_write, debug_print

MAX_CONDITION = 1e12
DEFAULT_LOADING = 1e-3

BANK_MAGIC = b"SDBK"
BANK_VERSION = 1
_BANK_HEADER = struct.Struct("<4sIIIIdd")

# TODO: realize_fir uses frequency sampling only; a least-squares design over a
# denser grid would flatten the response between bins.


@dataclass(frozen=True)
class NarrowbandWeights:
    omega: float
    theta0: float
    h: np.ndarray


@dataclass(frozen=True)
class BeamformerBank:
    taps: np.ndarray  # N x C x K
    look_directions: np.ndarray
    geom: ArrayGeometry

    @property
    def n_directions(self) -> int:
        return self.taps.shape[0]

    @property
    def channels(self) -> int:
        return self.taps.shape[1]

    @property
    def n_taps(self) -> int:
        return self.taps.shape[2]


@dataclass(frozen=True)
class Beampattern:
    omega: float
    grid: np.ndarray
    response: np.ndarray


def default_loading(geom: ArrayGeometry) -> float:
    """1e-3 * trace(R_NN) / C"""
    trace = np.trace(diffuse_noise_covariances(geom, np.zeros(1))[0])
    return DEFAULT_LOADING * trace / geom.mic_count


def _loaded(covariances: np.ndarray, loading: float) -> np.ndarray:
    eye = np.eye(covariances.shape[-1])
    return covariances + loading * eye


def _check_condition(loaded: np.ndarray, omegas: np.ndarray) -> None:
    conds = np.linalg.cond(loaded)
    bad = np.flatnonzero(~np.isfinite(conds) | (conds > MAX_CONDITION))
    if bad.size:
        i = int(bad[0])
        raise SingularCovariance(
            f"Loaded noise covariance is numerically singular at omega={omegas[i]:.2f} rad/s "
            f"(condition {conds[i]:.3e}); increase the diagonal loading", index=i)


def design_narrowband(geom: ArrayGeometry, omega: float, theta0: float,
                      loading: Optional[float] = None) -> NarrowbandWeights:
    """Superdirective weights for one frequency and look direction"""
    if omega < 0:
        raise ValueError(f"omega must be non-negative, got {omega}")
    loading = default_loading(geom) if loading is None else loading
    if loading < 0:
        raise ValueError(f"loading must be non-negative, got {loading}")
    h = _design_bins(geom, np.array([omega]), theta0, loading)[0]
    return NarrowbandWeights(omega=float(omega), theta0=float(np.mod(theta0, TWO_PI)), h=h)


def _design_bins(geom: ArrayGeometry, omegas: np.ndarray, theta0: float, loading: float) -> np.ndarray:
    """Weights for several frequencies (F x C)"""
    loaded = _loaded(diffuse_noise_covariances(geom, omegas), loading)
    _check_condition(loaded, omegas)
    d = steering_matrix(geom, omegas, theta0)
    x = np.linalg.solve(loaded, d[..., None])[..., 0]
    norm = np.einsum('fc,fc->f', d.conj(), x)
    return x / norm[:, None]


def realize_fir(geom: ArrayGeometry, theta0: float, n_taps: int = 128,
                loading: Optional[float] = None) -> np.ndarray:
    """Frequency-sampling FIR realization of the SDB for one look direction.

    Returns C x K real taps whose DFT is conj(h(omega_f)) * exp(-j omega_f K/2 / fs),
    i.e. the filters compute Y = H^H X with a causal delay of K/2 samples.
    """
    if n_taps % 2 or n_taps < 8:
        raise ValueError(f"Filter length must be even and >= 8, got {n_taps}")
    loading = default_loading(geom) if loading is None else loading
    n_bins = n_taps // 2 + 1
    omegas = TWO_PI * np.arange(n_bins) * geom.sample_rate / n_taps

    weights = np.empty((n_bins, geom.mic_count), dtype=np.complex128)
    weights[1:-1] = _design_bins(geom, omegas[1:-1], theta0, loading)
    # DC and Nyquist carry a real constraint: delay-and-sum there
    for f in (0, n_bins - 1):
        weights[f] = np.real(steering_matrix(geom, omegas[f:f + 1], theta0)[0]) / geom.mic_count

    impulse = np.fft.irfft(np.conj(weights), n=n_taps, axis=0)
    taps = np.roll(impulse, n_taps // 2, axis=0).T
    return np.ascontiguousarray(taps)


def build_bank(geom: ArrayGeometry, n_directions: int = 120, n_taps: int = 128,
               loading: Optional[float] = None) -> BeamformerBank:
    """N look directions 2 pi n / N, each realized with realize_fir"""
    if n_directions < 1:
        raise ValueError(f"Need at least one direction, got {n_directions}")
    look_directions = TWO_PI * np.arange(n_directions) / n_directions
    taps = np.stack([realize_fir(geom, theta, n_taps, loading) for theta in look_directions])
    taps.setflags(write=False)
    debug_print(f"Built SDB bank: N={n_directions}, C={geom.mic_count}, K={n_taps}", component="sdb")
    return BeamformerBank(taps=taps, look_directions=look_directions, geom=geom)


def beampattern(weights: NarrowbandWeights, geom: ArrayGeometry, grid: np.ndarray) -> Beampattern:
    """B(omega, theta) = h^H d(omega, theta) over a grid of directions"""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("Beampattern grid is empty")
    response = np.array([np.vdot(weights.h, steering_vector(geom, weights.omega, theta).values)
                         for theta in grid])
    return Beampattern(omega=weights.omega, grid=grid, response=response)


def fir_response(taps: np.ndarray, geom: ArrayGeometry, theta: float) -> np.ndarray:
    """Response of C x K FIR taps to a plane wave from theta on the DFT bins,
    with the K/2 causality delay removed (one value per bin 0..K/2)."""
    n_taps = taps.shape[-1]
    spectrum = np.fft.rfft(taps, axis=-1)  # C x bins
    omegas = TWO_PI * np.arange(spectrum.shape[-1]) * geom.sample_rate / n_taps
    d = steering_matrix(geom, omegas, theta)  # bins x C
    delay = np.exp(1j * omegas * (n_taps // 2) / geom.sample_rate)
    return np.einsum('cf,fc->f', spectrum, d) * delay


def write_bank(bank: BeamformerBank, path: str) -> None:
    """Binary bank file: SDBK header then N*C*K float64 little-endian in (n, c, k) order"""
    header = _BANK_HEADER.pack(BANK_MAGIC, BANK_VERSION, bank.n_directions, bank.channels, bank.n_taps,
                               float(bank.geom.sample_rate), float(bank.geom.radius))
    payload = np.ascontiguousarray(bank.taps, dtype='<f8').tobytes()
    atomic_write(path, header + payload)
    debug_print(f"Wrote bank to {path}", component="sdb")


def read_bank(path: str, sound_speed: float = 343.0) -> BeamformerBank:
    with open(path, 'rb') as f:
        data = f.read()
    if len(data) < _BANK_HEADER.size:
        raise CorruptHeader(f"Bank file too short: {path}", component="sdb")
    magic, version, n, c, k, sample_rate, radius = _BANK_HEADER.unpack_from(data)
    if magic != BANK_MAGIC or version != BANK_VERSION:
        raise CorruptHeader(f"Not a version {BANK_VERSION} bank file: {path}", component="sdb")
    expected = _BANK_HEADER.size + 8 * n * c * k
    if len(data) != expected:
        raise CorruptHeader(f"Bank payload size {len(data)} != {expected}", component="sdb")
    taps = np.frombuffer(data, dtype='<f8', offset=_BANK_HEADER.size).reshape(n, c, k).astype(np.float64)
    taps.setflags(write=False)
    geom = ArrayGeometry(mic_count=c, radius=radius, sample_rate=sample_rate, sound_speed=sound_speed)
    return BeamformerBank(taps=taps, look_directions=TWO_PI * np.arange(n) / n, geom=geom)
