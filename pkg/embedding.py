"""Segment-level speaker embeddings.

Embeddings either come from a text file produced by an external extractor
(`start end v_1 ... v_D` per line) or from `lightweight_embed`, a log-mel
statistics vector that needs no trained network.
"""

from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
import torch
import torchaudio.functional as AF

from errors import AudioTooShort, DimensionMismatch, ParseError
from models import EmbeddingSource, MultichannelAudio, SegmentEmbedding
from utils import debug_print

FRAME_LENGTH = 0.025
FRAME_SHIFT = 0.010
N_FFT = 1024
N_MELS = 81
LOG_FLOOR = 1e-10

# Start times are matched to the window grid at millisecond resolution
_ALIGN_TOLERANCE = 5e-4


@lru_cache(maxsize=8)
def _mel_bank(sample_rate: int, n_fft: int) -> np.ndarray:
    """HTK triangular filters between 0 Hz and min(8 kHz, Nyquist), (n_fft//2+1) x N_MELS"""
    f_max = min(8000.0, sample_rate / 2.0)
    fbanks = AF.melscale_fbanks(n_freqs=n_fft // 2 + 1, f_min=0.0, f_max=f_max, n_mels=N_MELS,
                                sample_rate=int(sample_rate), norm=None, mel_scale="htk")
    bank = fbanks.to(torch.float64).numpy()
    bank.setflags(write=False)
    return bank


def log_mel_frames(audio_mono: np.ndarray, sample_rate: int) -> np.ndarray:
    """Log mel filter-bank energies of 25 ms Hamming frames every 10 ms (frames x 81)"""
    frame = int(round(FRAME_LENGTH * sample_rate))
    shift = int(round(FRAME_SHIFT * sample_rate))
    x = np.asarray(audio_mono, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < frame:
        raise AudioTooShort(f"Need at least {frame} samples for one frame, got {x.shape[-1] if x.ndim else 0}",
                            component="embed")
    frames = np.lib.stride_tricks.sliding_window_view(x, frame)[::shift]
    n_fft = max(N_FFT, 1 << (frame - 1).bit_length())
    power = np.abs(np.fft.rfft(frames * np.hamming(frame), n=n_fft, axis=1)) ** 2
    return np.log(np.maximum(power @ _mel_bank(sample_rate, n_fft), LOG_FLOOR))


def lightweight_embed(audio_mono: np.ndarray, sample_rate: int) -> np.ndarray:
    """Per-bin mean and standard deviation of the log-mel frames (D = 162).

    The average of the 81 means is removed, so a gain change of the input
    leaves the vector unchanged as long as no bin hits the log floor.
    """
    fbank = log_mel_frames(audio_mono, sample_rate)
    means = fbank.mean(axis=0)
    stds = fbank.std(axis=0)
    return np.concatenate([means - means.mean(), stds])


def embed_spans(audio: MultichannelAudio, spans: Sequence[Tuple[int, int]],
                channel: int = 0) -> List[SegmentEmbedding]:
    """Lightweight embeddings of one channel over sample spans (zero-padded past the end)"""
    embeddings = []
    for start, end in spans:
        segment = audio.slice(start, end)[:, channel]
        embeddings.append(SegmentEmbedding(vector=lightweight_embed(segment, audio.sample_rate),
                                           window_start=start / audio.sample_rate,
                                           window_len=(min(end, audio.length) - start) / audio.sample_rate,
                                           source=EmbeddingSource.LIGHTWEIGHT))
    debug_print(f"Computed {len(embeddings)} lightweight embeddings on channel {channel}", component="embed")
    return embeddings


def load_embeddings(path: str) -> List[SegmentEmbedding]:
    """Read `start end v_1 ... v_D` rows; blank lines are skipped"""
    embeddings: List[SegmentEmbedding] = []
    dim = None
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) < 3:
                raise ParseError(f"Expected 'start end v_1 ... v_D' in {path}", component="embed", index=line_no)
            try:
                values = [float(v) for v in fields]
            except ValueError as e:
                raise ParseError(f"Non-numeric field in {path}: {e}", component="embed", index=line_no)
            start, end, vector = values[0], values[1], np.array(values[2:])
            if end <= start:
                raise ParseError(f"Window end {end} not after start {start}", component="embed", index=line_no)
            if not np.all(np.isfinite(vector)):
                raise ParseError(f"Non-finite embedding value in {path}", component="embed", index=line_no)
            if dim is None:
                dim = vector.shape[0]
            elif vector.shape[0] != dim:
                raise DimensionMismatch(f"Row has dimension {vector.shape[0]}, expected {dim}", index=line_no)
            embeddings.append(SegmentEmbedding(vector=vector, window_start=start, window_len=end - start,
                                               source=EmbeddingSource.EXTERNAL))
    debug_print(f"Loaded {len(embeddings)} embeddings (D={dim}) from {path}", component="embed")
    return embeddings


def align_embeddings(embeddings: Sequence[SegmentEmbedding],
                     window_starts: Sequence[float]) -> List[SegmentEmbedding]:
    """Pick the external embedding of every window on the s-vector grid"""
    by_start = {}
    for emb in embeddings:
        by_start.setdefault(int(round(emb.window_start * 1000)), emb)
    aligned = []
    for i, start in enumerate(window_starts):
        emb = by_start.get(int(round(start * 1000)))
        if emb is None or abs(emb.window_start - start) > _ALIGN_TOLERANCE:
            raise DimensionMismatch(f"No embedding for the window starting at {start:.3f} s", index=i)
        aligned.append(emb)
    return aligned
