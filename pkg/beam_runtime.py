"""Applies a beamformer bank to multichannel audio and extracts s-vectors
(normalized output energies of the N look directions per sliding window)."""

from typing import List, Sequence, Tuple

import numpy as np
from scipy.signal import oaconvolve

from errors import AudioTooShort, ChannelMismatch
from models import MultichannelAudio, SVector, Window
from sdb_designer import BeamformerBank
from utils import atomic_write, debug_print

SILENCE_ENERGY = 1e-12


def beamform(bank: BeamformerBank, audio: MultichannelAudio, n: int) -> np.ndarray:
    """y[t] = sum_c sum_k taps[n][c][k] * x_c[t - k], zero initial state, length L"""
    if audio.channels != bank.channels:
        raise ChannelMismatch(f"Audio has {audio.channels} channels, bank expects {bank.channels}")
    if not 0 <= n < bank.n_directions:
        raise IndexError(f"Direction index {n} out of range [0, {bank.n_directions})")
    per_channel = oaconvolve(audio.samples.T, bank.taps[n], mode='full', axes=1)
    return per_channel[:, :audio.length].sum(axis=0)


def tile_windows(n_samples: int, window: int, shift: int) -> List[Tuple[int, int]]:
    """Window (start, end) sample spans over a recording.

    Full windows are tiled while they fit. If audio after the last full window
    is uncovered, one more window is kept when at least half a window of audio
    remains from its start; its end is past n_samples (zero-padded).
    """
    if n_samples < window:
        raise AudioTooShort(f"{n_samples} samples is shorter than one window ({window})")
    spans = []
    start = 0
    while start + window <= n_samples:
        spans.append((start, start + window))
        start += shift
    if spans[-1][1] < n_samples and n_samples - start >= window / 2:
        spans.append((start, start + window))
    return spans


def window_energies(bank: BeamformerBank, audio: MultichannelAudio,
                    spans: Sequence[Tuple[int, int]]) -> np.ndarray:
    """Output energy of every direction in every window (W x N)"""
    energies = np.zeros((len(spans), bank.n_directions))
    for n in range(bank.n_directions):
        y = beamform(bank, audio, n)
        for w, (start, end) in enumerate(spans):
            segment = y[start:min(end, audio.length)]
            energies[w, n] = np.dot(segment, segment)
    return energies


def normalize_energies(energies: np.ndarray) -> np.ndarray:
    """Rows to distributions; silent rows become uniform"""
    energies = np.maximum(energies, 0.0)
    totals = energies.sum(axis=1, keepdims=True)
    uniform = np.full_like(energies, 1.0 / energies.shape[1])
    safe = np.where(totals < SILENCE_ENERGY, 1.0, totals)
    return np.where(totals < SILENCE_ENERGY, uniform, energies / safe)


def svectors_for_spans(bank: BeamformerBank, audio: MultichannelAudio,
                       spans: Sequence[Tuple[int, int]]) -> List[SVector]:
    normalized = normalize_energies(window_energies(bank, audio, spans))
    rate = audio.sample_rate
    return [SVector(energies=normalized[w], window_start=start / rate,
                    window_len=(min(end, audio.length) - start) / rate)
            for w, (start, end) in enumerate(spans)]


def extract_svectors(bank: BeamformerBank, audio: MultichannelAudio,
                     window_len: float = 1.0, window_shift: float = 0.5) -> List[SVector]:
    """One s-vector per sliding window"""
    window = int(round(window_len * audio.sample_rate))
    shift = int(round(window_shift * audio.sample_rate))
    if audio.length < window:
        raise AudioTooShort(f"Audio of {audio.duration:.3f} s is shorter than the window ({window_len} s)")
    spans = tile_windows(audio.length, window, shift)
    svectors = svectors_for_spans(bank, audio, spans)
    debug_print(f"Extracted {len(svectors)} s-vectors (N={bank.n_directions})", component="beam")
    return svectors


def svector_windows(svectors: Sequence[SVector]) -> List[Window]:
    return [(sv.window_start, sv.window_end) for sv in svectors]


def write_svectors(svectors: Sequence[SVector], path: str) -> None:
    """One line per window: start end e_1 ... e_N"""
    lines = []
    for sv in svectors:
        values = " ".join(f"{e:.10g}" for e in sv.energies)
        lines.append(f"{sv.window_start:.3f} {sv.window_end:.3f} {values}")
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))
