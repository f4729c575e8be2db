from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from pyannote import core

# Scoring and label resolution shared by sim, dmsnet and scoring
FRAME_SECONDS = 0.01

# A window of the shared s-vector/embedding grid: (start, end) in seconds
Window = Tuple[float, float]


class SimilarityKind(Enum):
    """Origin of a similarity matrix"""
    SPEAKER = "A_x"
    SPATIAL = "A_s"
    FUSED = "A_sx"


class EmbeddingSource(Enum):
    """Where a segment embedding came from"""
    EXTERNAL = "external"
    LIGHTWEIGHT = "lightweight"


class RunMode(Enum):
    """Pipeline run modes"""
    CLUSTER_ONLY = "cluster_only"
    WITH_OSD = "with_osd"
    ORACLE_OSD = "oracle_osd"  # overlap regions taken from the reference

    @classmethod
    def from_name(cls, name: str) -> 'RunMode':
        try:
            return next(mode for mode in cls if mode.value == name.lower())
        except StopIteration:
            raise ValueError(f"Unknown run mode: {name}")


def to_frames(seconds: float, frame: float = FRAME_SECONDS) -> int:
    """Index of the frame boundary closest to a time"""
    return int(round(seconds / frame))


@dataclass(frozen=True, order=True)
class Segment:
    """One speaker turn [start, end)"""
    start: float
    end: float
    speaker: str = ""

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class Timeline:
    """Sorted, non-overlapping set of [start, end) regions, kept as the support of a pyannote timeline"""
    regions: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        self.regions = self._merge(self.regions)

    @staticmethod
    def _merge(regions) -> List[Tuple[float, float]]:
        timeline = core.Timeline([core.Segment(float(s), float(e)) for s, e in regions if e > s])
        return [(seg.start, seg.end) for seg in timeline.support()]

    @classmethod
    def from_core(cls, timeline: core.Timeline) -> 'Timeline':
        return cls([(seg.start, seg.end) for seg in timeline])

    def to_core(self, uri: Optional[str] = None) -> core.Timeline:
        return core.Timeline([core.Segment(s, e) for s, e in self.regions], uri=uri)

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return iter(self.regions)

    def __len__(self) -> int:
        return len(self.regions)

    def __bool__(self) -> bool:
        return bool(self.regions)

    @property
    def duration(self) -> float:
        return sum(end - start for start, end in self.regions)

    def intersect(self, other: 'Timeline') -> 'Timeline':
        if not self or not other:
            return Timeline()
        return Timeline.from_core(self.to_core().crop(other.to_core(), mode='intersection'))

    def clip(self, start: float, end: float) -> 'Timeline':
        return self.intersect(Timeline([(start, end)]))

    def fill_gaps(self, max_gap: float) -> 'Timeline':
        """Close gaps strictly shorter than max_gap"""
        if not self:
            return Timeline()
        return Timeline.from_core(self.to_core().support(collar=max_gap))

    def drop_short(self, min_duration: float) -> 'Timeline':
        return Timeline([(s, e) for s, e in self.regions if e - s >= min_duration - 1e-9])

    def to_frames(self, n_frames: int, frame: float = FRAME_SECONDS) -> np.ndarray:
        mask = np.zeros(n_frames, dtype=bool)
        for start, end in self.regions:
            mask[max(to_frames(start, frame), 0):min(to_frames(end, frame), n_frames)] = True
        return mask


@dataclass
class Annotation:
    """Speaker segments of one recording (RTTM content).

    Segment algebra (support, crop, overlap) runs on pyannote.core.Annotation;
    this class keeps the flat segment list the RTTM writer and scorer work on.
    """
    segments: List[Segment] = field(default_factory=list)
    file_id: str = "recording"

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    @classmethod
    def from_core(cls, annotation: core.Annotation, file_id: Optional[str] = None) -> 'Annotation':
        segments = [Segment(turn.start, turn.end, str(label))
                    for turn, _, label in annotation.itertracks(yield_label=True)]
        return cls(segments, file_id or annotation.uri or "recording").sorted()

    def to_core(self) -> core.Annotation:
        annotation = core.Annotation(uri=self.file_id)
        for track, seg in enumerate(self.segments):
            if seg.end > seg.start:
                annotation[core.Segment(seg.start, seg.end), track] = seg.speaker
        return annotation

    @property
    def speakers(self) -> List[str]:
        return sorted({seg.speaker for seg in self.segments})

    @property
    def end(self) -> float:
        return max((seg.end for seg in self.segments), default=0.0)

    def sorted(self) -> 'Annotation':
        return Annotation(sorted(self.segments, key=lambda s: (s.start, s.speaker, s.end)), self.file_id)

    def speaker_timeline(self, speaker: str) -> Timeline:
        return Timeline([(s.start, s.end) for s in self.segments if s.speaker == speaker])

    def support(self) -> 'Annotation':
        """Merge overlapping or touching segments of the same speaker"""
        if not self.segments:
            return Annotation([], self.file_id)
        return Annotation.from_core(self.to_core().support(), self.file_id)

    def timeline(self) -> Timeline:
        """Regions where anybody speaks"""
        return Timeline([(s.start, s.end) for s in self.segments])

    def overlap_timeline(self) -> Timeline:
        """Regions where at least two speakers are active"""
        if len(self.speakers) < 2:
            return Timeline()
        return Timeline.from_core(self.to_core().get_overlap())

    def crop(self, timeline: Timeline) -> 'Annotation':
        if not self.segments or not timeline:
            return Annotation([], self.file_id)
        return Annotation.from_core(self.to_core().crop(timeline.to_core(), mode='intersection'), self.file_id)

    def activity(self, n_frames: int, frame: float = FRAME_SECONDS) -> Tuple[List[str], np.ndarray]:
        """Frame-level speaker activity matrix (frames x speakers)"""
        speakers = self.speakers
        matrix = np.zeros((n_frames, len(speakers)), dtype=bool)
        for j, speaker in enumerate(speakers):
            matrix[:, j] = self.speaker_timeline(speaker).to_frames(n_frames, frame)
        return speakers, matrix


@dataclass
class MultichannelAudio:
    """L x C waveform in [-1, 1]"""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError(f"Audio must be L x C with L >= 1, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("Audio contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError(f"Invalid sample rate: {self.sample_rate}")
        self.samples = samples

    @property
    def length(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate

    def scaled(self, factor: float) -> 'MultichannelAudio':
        return MultichannelAudio(self.samples * factor, self.sample_rate)

    def slice(self, start: int, end: int) -> np.ndarray:
        """Samples [start, end) zero-padded past the end of the recording"""
        out = np.zeros((end - start, self.channels))
        stop = min(end, self.length)
        if stop > start:
            out[:stop - start] = self.samples[start:stop]
        return out


@dataclass
class SVector:
    """Normalized direction-energy embedding of one window"""
    energies: np.ndarray
    window_start: float
    window_len: float

    @property
    def window_end(self) -> float:
        return self.window_start + self.window_len


@dataclass
class SegmentEmbedding:
    vector: np.ndarray
    window_start: float
    window_len: float
    source: EmbeddingSource = EmbeddingSource.LIGHTWEIGHT


@dataclass
class SimilarityMatrix:
    values: np.ndarray
    kind: SimilarityKind

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass
class ClusterResult:
    labels: np.ndarray
    k: int
    chosen_p: int
    eigengaps: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class OverlapLabels:
    """Per-frame binary overlap sequence"""
    frames: np.ndarray
    frame_rate: float = 1.0 / FRAME_SECONDS

    def to_timeline(self) -> Timeline:
        frames = np.asarray(self.frames).astype(bool)
        padded = np.concatenate([[False], frames, [False]])
        edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
        return Timeline([(s / self.frame_rate, e / self.frame_rate) for s, e in zip(edges[::2], edges[1::2])])


@dataclass
class OverlapPosterior:
    probs: np.ndarray
    frame_rate: float


@dataclass
class DerReport:
    miss: float
    fa: float
    spkerr: float
    der: float
    scored_time: float
    mapping: Dict[str, str] = field(default_factory=dict)

    def as_lines(self) -> List[str]:
        return [f"MISS={self.miss:.2f}", f"FA={self.fa:.2f}", f"SpkErr={self.spkerr:.2f}",
                f"DER={self.der:.2f}", f"scored_time={self.scored_time:.2f}"]


@dataclass
class OsdReport:
    deter: Optional[float]
    accuracy: float
    precision: float
    recall: float
    tp: float = 0.0  # seconds
    fp: float = 0.0
    fn: float = 0.0
    tn: float = 0.0

    def as_lines(self) -> List[str]:
        deter = "NA" if self.deter is None else f"{self.deter:.2f}"
        return [f"DetER={deter}", f"Accuracy={self.accuracy:.2f}",
                f"Precision={self.precision:.2f}", f"Recall={self.recall:.2f}"]


@dataclass
class RttmRow:
    """One SPEAKER line of an RTTM file"""
    file_id: str
    onset: float
    duration: float
    speaker: str
    channel: int = 1
    type: str = "SPEAKER"

    def to_segment(self) -> Segment:
        return Segment(self.onset, self.onset + self.duration, self.speaker)
