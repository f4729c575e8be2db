import errno
import io
import os

import numpy as np
import soundfile as sf

from errors import CorruptHeader, UnsupportedFormat
from models import MultichannelAudio
from utils import atomic_write, debug_print

SUPPORTED_SUBTYPES = ('PCM_16', 'FLOAT')
# libsndfile reports WAVE_FORMAT_EXTENSIBLE files (common for > 2 channels) as WAVEX
SUPPORTED_FORMATS = ('WAV', 'WAVEX')


class WavHandler:
    """Multichannel WAV input/output (16-bit PCM or 32-bit float)"""

    @staticmethod
    def read(path: str) -> MultichannelAudio:
        if not os.path.exists(path):
            raise FileNotFoundError(errno.ENOENT, 'No such file', path)
        try:
            info = sf.info(path)
        except RuntimeError as e:
            raise CorruptHeader(f"Cannot read WAV header of {path}: {e}")
        if info.format not in SUPPORTED_FORMATS:
            raise UnsupportedFormat(f"{path} is {info.format}, expected RIFF/WAVE")
        if info.subtype not in SUPPORTED_SUBTYPES:
            raise UnsupportedFormat(f"{path} uses {info.subtype}; supported: {', '.join(SUPPORTED_SUBTYPES)}")
        try:
            samples, sample_rate = sf.read(path, dtype='float64', always_2d=True)
        except RuntimeError as e:
            raise CorruptHeader(f"Cannot decode {path}: {e}")
        if samples.shape[0] == 0:
            raise CorruptHeader(f"{path} contains no samples")
        debug_print(f"Read {path}: {samples.shape[0]} samples x {samples.shape[1]} channels "
                    f"@ {sample_rate} Hz ({info.subtype})", component="io")
        return MultichannelAudio(samples=samples, sample_rate=int(sample_rate))

    @staticmethod
    def write(path: str, audio: MultichannelAudio, subtype: str = 'PCM_16') -> None:
        if subtype not in SUPPORTED_SUBTYPES:
            raise UnsupportedFormat(f"Cannot write subtype {subtype}")
        samples = audio.samples
        if subtype == 'PCM_16':
            samples = np.clip(samples, -1.0, 1.0)
        buffer = io.BytesIO()
        sf.write(buffer, samples, int(audio.sample_rate), format='WAV', subtype=subtype)
        atomic_write(path, buffer.getvalue())
        debug_print(f"Wrote {path}: {audio.length} x {audio.channels} ({subtype})", component="io")


def read_wav(path: str) -> MultichannelAudio:
    return WavHandler.read(path)


def write_wav(path: str, audio: MultichannelAudio, subtype: str = 'PCM_16') -> None:
    WavHandler.write(path, audio, subtype)
