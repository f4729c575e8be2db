"""Synthetic far-field meetings recorded by a circular microphone array.

Speakers are point sources in the free field at fixed azimuths. Every source
signal is delayed onto the microphones with windowed-sinc fractional-delay
filters; diffuse noise is a sum of plane waves from random directions on the
sphere. Rendering returns the multichannel audio together with the reference
annotation and the 10 ms overlap labels.
"""

import configparser
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import butter, get_window, oaconvolve, sosfilt

from array_model import ArrayGeometry, TWO_PI
from dmsnet import DmsNetConfig, output_frames
from errors import ConfigError, DiarizationError, DirectionCollision
from models import Annotation, MultichannelAudio, OverlapLabels, Segment, to_frames
from utils import debug_print

FD_TAPS = 63
N_HARMONICS = 8
VIBRATO_HZ = 6.0
VIBRATO_DEPTH = 0.02
ENVELOPE_HZ = 4.0
SOURCE_RMS = 0.1
NOISE_WAVES = 64
# Noise level when there is no speech to reference the SNR against
NOISE_ONLY_RMS = 0.01
RAMP_SECONDS = 0.01
DEFAULT_N_MIN = 36


class SourceKind(Enum):
    HARMONIC = "harmonic"
    NOISE = "noise"


@dataclass(frozen=True)
class SpeakerSpec:
    id: str
    direction: float
    kind: SourceKind = SourceKind.HARMONIC
    f0: float = 150.0
    band: Tuple[float, float] = (300.0, 3000.0)


@dataclass(frozen=True)
class Turn:
    speaker: str
    start: float
    end: float


@dataclass(frozen=True)
class Reflection:
    """Single wall reflection: every source is mirrored across wall_angle"""
    wall_angle: float = 0.0
    delay: float = 0.005
    gain: float = 0.3


@dataclass
class MeetingScript:
    speakers: List[SpeakerSpec]
    turns: List[Turn]
    snr_db: Optional[float] = 20.0
    seed: int = 0
    duration: Optional[float] = None
    reflection: Optional[Reflection] = None
    n_min: int = DEFAULT_N_MIN
    file_id: str = "meeting"


class Rendering(NamedTuple):
    audio: MultichannelAudio
    annotation: Annotation
    labels: OverlapLabels


@dataclass
class OsdDatasetReport:
    chunks: int = 0
    positive_chunks: int = 0
    positive_frame_ratio: float = 0.0

    @property
    def positive_chunk_ratio(self) -> float:
        return self.positive_chunks / self.chunks if self.chunks else 0.0


@dataclass
class OsdDataset:
    items: List[Tuple[MultichannelAudio, OverlapLabels]] = field(default_factory=list)
    report: OsdDatasetReport = field(default_factory=OsdDatasetReport)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]


def angular_distance(a: float, b: float) -> float:
    return abs((a - b + np.pi) % TWO_PI - np.pi)


def validate_script(script: MeetingScript, duration: float) -> None:
    ids = [spk.id for spk in script.speakers]
    if len(set(ids)) != len(ids):
        raise DiarizationError("Duplicate speaker ids in script", component="sim")
    min_gap = TWO_PI / script.n_min
    for i, a in enumerate(script.speakers):
        for b in script.speakers[i + 1:]:
            if angular_distance(a.direction, b.direction) < min_gap - 1e-12:
                raise DirectionCollision(
                    f"Speakers {a.id} and {b.id} are {np.degrees(angular_distance(a.direction, b.direction)):.1f}"
                    f" deg apart, minimum is {np.degrees(min_gap):.1f} deg")
    for i, turn in enumerate(script.turns):
        if turn.speaker not in ids:
            raise DiarizationError(f"Turn for unknown speaker {turn.speaker}", component="sim", index=i)
        if not 0 <= turn.start < turn.end <= duration + 1e-9:
            raise DiarizationError(f"Turn [{turn.start}, {turn.end}) outside [0, {duration}]",
                                   component="sim", index=i)


def fractional_delay_filter(delay_samples: float, n_taps: int = FD_TAPS) -> np.ndarray:
    """Windowed-sinc filter delaying by (n_taps - 1) / 2 + delay_samples"""
    n = np.arange(n_taps) - (n_taps - 1) / 2
    h = np.sinc(n - delay_samples) * get_window('blackman', n_taps, fftbins=False)
    return h / h.sum()


def spatialize(signal: np.ndarray, geom: ArrayGeometry, theta: float, elevation: float = 0.0) -> np.ndarray:
    """Plane wave from (theta, elevation) as received by each microphone (L x C)"""
    delays = geom.delays(theta, elevation) * geom.sample_rate
    filters = np.stack([fractional_delay_filter(d) for d in delays])
    half = (FD_TAPS - 1) // 2
    stacked = np.repeat(signal[None, :], geom.mic_count, axis=0)
    out = oaconvolve(stacked, filters, mode='full', axes=1)[:, half:half + signal.shape[0]]
    return out.T


def harmonic_source(rng: np.random.Generator, f0: float, n_samples: int, sample_rate: float) -> np.ndarray:
    """Voice-like harmonic stack with vibrato and a slow amplitude envelope"""
    t = np.arange(n_samples) / sample_rate
    vibrato = 1.0 + VIBRATO_DEPTH * np.sin(TWO_PI * VIBRATO_HZ * t + rng.uniform(0, TWO_PI))
    phase = TWO_PI * np.cumsum(f0 * vibrato) / sample_rate
    signal = np.zeros(n_samples)
    for h in range(1, N_HARMONICS + 1):
        if h * f0 * (1 + VIBRATO_DEPTH) >= sample_rate / 2:
            break
        signal += np.sin(h * phase + rng.uniform(0, TWO_PI)) / h
    envelope = 0.6 + 0.4 * np.sin(TWO_PI * ENVELOPE_HZ * t + rng.uniform(0, TWO_PI))
    return signal * envelope


def band_noise_source(rng: np.random.Generator, band: Tuple[float, float], n_samples: int,
                      sample_rate: float) -> np.ndarray:
    low, high = band
    high = min(high, 0.45 * sample_rate)
    sos = butter(4, [low, high], btype='bandpass', fs=sample_rate, output='sos')
    return sosfilt(sos, rng.standard_normal(n_samples))


def _normalize(signal: np.ndarray, rms: float = SOURCE_RMS) -> np.ndarray:
    current = np.sqrt(np.mean(signal ** 2))
    return signal * (rms / current) if current > 0 else signal


def _gate(turns: Sequence[Turn], n_samples: int, sample_rate: float) -> np.ndarray:
    """0/1 activity with short raised-cosine ramps inside every turn"""
    gate = np.zeros(n_samples)
    ramp_len = max(int(RAMP_SECONDS * sample_rate), 1)
    for turn in turns:
        start = int(round(turn.start * sample_rate))
        end = min(int(round(turn.end * sample_rate)), n_samples)
        length = end - start
        if length <= 0:
            continue
        shape = np.ones(length)
        ramp = min(ramp_len, length // 2)
        if ramp:
            rise = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
            shape[:ramp] = rise
            shape[length - ramp:] = rise[::-1]
        gate[start:end] = np.maximum(gate[start:end], shape)
    return gate


def diffuse_noise(rng: np.random.Generator, geom: ArrayGeometry, n_samples: int,
                  n_waves: int = NOISE_WAVES) -> np.ndarray:
    """Sum of independent white plane waves from directions uniform on the sphere (L x C)"""
    azimuths = rng.uniform(0.0, TWO_PI, n_waves)
    elevations = np.arcsin(rng.uniform(-1.0, 1.0, n_waves))
    noise = np.zeros((n_samples, geom.mic_count))
    for azimuth, elevation in zip(azimuths, elevations):
        noise += spatialize(rng.standard_normal(n_samples), geom, azimuth, elevation)
    return noise / np.sqrt(n_waves)


def reference_annotation(script: MeetingScript) -> Annotation:
    segments = [Segment(turn.start, turn.end, turn.speaker) for turn in script.turns]
    return Annotation(segments, script.file_id).support()


def overlap_labels(annotation: Annotation, duration: float) -> OverlapLabels:
    n_frames = to_frames(duration)
    return OverlapLabels(frames=annotation.overlap_timeline().to_frames(n_frames).astype(np.int8))


def render(script: MeetingScript, geom: ArrayGeometry, duration: Optional[float] = None) -> Rendering:
    """Render a meeting script to multichannel audio plus ground truth"""
    duration = script.duration if duration is None else duration
    if duration is None or duration <= 0:
        raise DiarizationError("Meeting duration must be positive", component="sim")
    validate_script(script, duration)
    fs = geom.sample_rate
    n_samples = int(round(duration * fs))

    children = np.random.SeedSequence(script.seed).spawn(len(script.speakers) + 1)
    clean = np.zeros((n_samples, geom.mic_count))
    for spk, seq in zip(script.speakers, children):
        rng = np.random.default_rng(seq)
        if spk.kind is SourceKind.HARMONIC:
            source = harmonic_source(rng, spk.f0, n_samples, fs)
        else:
            source = band_noise_source(rng, spk.band, n_samples, fs)
        source = _normalize(source) * _gate([t for t in script.turns if t.speaker == spk.id], n_samples, fs)
        clean += spatialize(source, geom, spk.direction)
        if script.reflection is not None and 0 <= int(round(script.reflection.delay * fs)) < n_samples:
            shift = int(round(script.reflection.delay * fs))
            echo = np.zeros(n_samples)
            echo[shift:] = source[:n_samples - shift] * script.reflection.gain
            clean += spatialize(echo, geom, 2 * script.reflection.wall_angle - spk.direction)

    annotation = reference_annotation(script)
    noise = diffuse_noise(np.random.default_rng(children[-1]), geom, n_samples)
    samples = clean
    if script.snr_db is not None:
        speech = annotation.timeline().to_frames(n_samples, 1.0 / fs)
        if speech.any():
            speech_power = np.mean(clean[speech] ** 2)
            noise_power = np.mean(noise[speech] ** 2)
            noise *= np.sqrt(speech_power / (noise_power * 10 ** (script.snr_db / 10)))
        else:
            noise *= NOISE_ONLY_RMS / np.sqrt(np.mean(noise ** 2))
        samples = clean + noise

    debug_print(f"Rendered '{script.file_id}': {duration:.1f} s, {len(script.speakers)} speakers, "
                f"{len(script.turns)} turns, snr={script.snr_db}", component="sim")
    audio = MultichannelAudio(samples=samples, sample_rate=int(round(fs)))
    return Rendering(audio, annotation, overlap_labels(annotation, duration))


def random_script(seed: int, n_speakers: int = 2, duration: float = 20.0, overlap_ratio: float = 0.3,
                  snr_db: Optional[float] = 20.0, n_directions: int = 120, file_id: str = "meeting") -> MeetingScript:
    """Seeded meeting: speakers spread around the array on the look-direction grid,
    alternating turns of 2-4 s, each overlapping the next by a share of its length"""
    if n_speakers < 1:
        raise DiarizationError("Need at least one speaker", component="sim")
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(n_directions))
    spacing = n_directions // n_speakers
    jitter = max(spacing // 6, 0)
    speakers = []
    for i in range(n_speakers):
        index = (offset + i * spacing + int(rng.integers(-jitter, jitter + 1))) % n_directions
        f0 = 110.0 + 170.0 * (i + 0.5 * rng.uniform()) / n_speakers
        speakers.append(SpeakerSpec(id=f"spk{i + 1}", direction=TWO_PI * index / n_directions, f0=f0))

    share = overlap_ratio / (1.0 + overlap_ratio)
    turns: List[Turn] = []
    start, current = 0.0, int(rng.integers(n_speakers))
    next_len = rng.uniform(2.0, 4.0)
    while start < duration - 0.5:
        length = next_len
        next_len = rng.uniform(2.0, 4.0)
        end = min(start + length, duration)
        turns.append(Turn(speakers[current].id, round(start, 2), round(end, 2)))
        overlap = min(share * length, 0.4 * next_len) if n_speakers > 1 else 0.0
        start = end - overlap
        if n_speakers > 1:
            current = (current + 1 + int(rng.integers(n_speakers - 1))) % n_speakers
    return MeetingScript(speakers=speakers, turns=turns, snr_db=snr_db, seed=seed, duration=duration,
                         file_id=file_id)


def chunk_labels(labels: OverlapLabels, start_frame: int, chunk_frames: int, model_frames: int) -> OverlapLabels:
    """Majority vote of the 10 ms labels inside every model frame of a chunk"""
    frames = np.zeros(chunk_frames)
    source = np.asarray(labels.frames, dtype=np.float64)[start_frame:start_frame + chunk_frames]
    frames[:source.shape[0]] = source
    edges = np.linspace(0, chunk_frames, model_frames + 1)
    votes = np.array([frames[int(np.floor(lo)):max(int(np.ceil(hi)), int(np.floor(lo)) + 1)].mean()
                      for lo, hi in zip(edges[:-1], edges[1:])])
    return OverlapLabels(frames=(votes >= 0.5).astype(np.int8), frame_rate=model_frames * labels.frame_rate / chunk_frames)


def make_osd_dataset(n_meetings: int, geom: ArrayGeometry, config: DmsNetConfig, seed: int = 0,
                     meeting_duration: float = 20.0, overlap_ratio: float = 0.3, n_speakers: int = 2,
                     hop: float = 1.0, min_positive: float = 0.3) -> OsdDataset:
    """Chunk seeded simulated meetings into (audio, model-rate labels) training pairs"""
    if n_meetings < 1:
        raise DiarizationError("Need at least one meeting", component="sim")
    model_frames = output_frames(config)
    chunk_samples = int(round(config.chunk_len * geom.sample_rate))
    chunk_frames = to_frames(config.chunk_len)
    hop_samples = int(round(hop * geom.sample_rate))

    items = []
    for m in range(n_meetings):
        script = random_script(seed + m, n_speakers, meeting_duration, overlap_ratio, file_id=f"meeting{m}")
        audio, _, labels = render(script, geom)
        for start in range(0, audio.length - chunk_samples + 1, hop_samples):
            chunk = MultichannelAudio(audio.samples[start:start + chunk_samples], audio.sample_rate)
            start_frame = to_frames(start / geom.sample_rate)
            items.append((chunk, chunk_labels(labels, start_frame, chunk_frames, model_frames)))

    positives = [i for i, (_, lab) in enumerate(items) if lab.frames.any()]
    negatives = [i for i, (_, lab) in enumerate(items) if not lab.frames.any()]
    if positives and len(positives) < min_positive * len(items):
        keep = int(np.floor(len(positives) * (1 - min_positive) / min_positive))
        rng = np.random.default_rng(seed)
        kept = set(rng.choice(negatives, size=keep, replace=False).tolist()) | set(positives)
        items = [item for i, item in enumerate(items) if i in kept]
        debug_print(f"Dropped {len(negatives) - keep} overlap-free chunks for balance", component="sim")

    all_frames = np.concatenate([lab.frames for _, lab in items]) if items else np.zeros(0)
    report = OsdDatasetReport(chunks=len(items), positive_chunks=sum(1 for _, lab in items if lab.frames.any()),
                              positive_frame_ratio=float(all_frames.mean()) if all_frames.size else 0.0)
    debug_print(f"OSD dataset: {report.chunks} chunks, {report.positive_chunk_ratio:.2%} positive, "
                f"{report.positive_frame_ratio:.2%} positive frames", component="sim")
    return OsdDataset(items=items, report=report)


def load_script(path: str) -> MeetingScript:
    """Meeting script from a `[meeting]` / `[speaker <id>]` / `[turns]` INI file.

    Example::

        [meeting]
        duration = 20
        snr_db = 20
        seed = 1

        [speaker spk1]
        direction_deg = 30
        f0 = 150

        [turns]
        t1 = spk1 0.0 3.5
    """
    parser = configparser.ConfigParser()
    try:
        with open(path, 'r', encoding='utf-8') as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse script {path}: {e}")
    if not parser.has_section('meeting'):
        raise ConfigError(f"Script {path} has no [meeting] section")

    try:
        meeting = parser['meeting']
        snr = meeting.get('snr_db', '20')
        speakers = []
        for section in parser.sections():
            if not section.startswith('speaker '):
                continue
            entry = parser[section]
            kind = SourceKind(entry.get('kind', 'harmonic'))
            band = tuple(float(v) for v in entry.get('band', '300 3000').split())
            speakers.append(SpeakerSpec(id=section.split(None, 1)[1].strip(),
                                        direction=np.radians(entry.getfloat('direction_deg')),
                                        kind=kind, f0=entry.getfloat('f0', 150.0), band=band))
        turns = []
        if parser.has_section('turns'):
            for _, value in parser.items('turns'):
                speaker, start, end = value.split()
                turns.append(Turn(speaker, float(start), float(end)))
        reflection = None
        if parser.has_section('reflection'):
            ref = parser['reflection']
            reflection = Reflection(wall_angle=np.radians(ref.getfloat('wall_angle_deg', 0.0)),
                                    delay=ref.getfloat('delay', 0.005), gain=ref.getfloat('gain', 0.3))
        return MeetingScript(speakers=speakers, turns=sorted(turns, key=lambda t: (t.start, t.speaker)),
                             snr_db=None if snr.lower() == 'none' else float(snr),
                             seed=meeting.getint('seed', 0), duration=meeting.getfloat('duration'),
                             reflection=reflection, n_min=meeting.getint('n_min', DEFAULT_N_MIN),
                             file_id=meeting.get('file_id', 'meeting'))
    except (ValueError, TypeError) as e:
        raise ConfigError(f"Invalid value in script {path}: {e}")
