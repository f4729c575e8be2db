"""End-to-end diarization: oracle VAD windows -> s-vectors and speaker
embeddings -> fused similarity -> NME-SC -> speaker segments -> optional
overlap detection and secondary speaker assignment -> RTTM + run report."""

import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from beam_runtime import svectors_for_spans, tile_windows
from config_loader import PipelineConfig
from dmsnet import DmsNetConfig, DmsNetParams, detect_overlap, load_checkpoint
from embedding import FRAME_LENGTH, align_embeddings, embed_spans, load_embeddings
from errors import ChannelMismatch, DiarizationError, PipelineError
from fusion_cluster import assign_labels, cosine_matrix, fuse, nme_sc
from models import (Annotation, ClusterResult, MultichannelAudio, RunMode, SimilarityKind,
                    SimilarityMatrix, Timeline, Window)
from overlap_assign import assign_secondary
from rttm_handler import parse_rttm, read_vad, write_rttm
from sdb_designer import BeamformerBank, build_bank, read_bank
from utils import StageTimer, atomic_write, calculate_md5, debug_print
from wav_handler import read_wav

Span = Tuple[int, int]
ModelSource = Union[str, Tuple[DmsNetParams, DmsNetConfig]]


@dataclass
class PipelineResult:
    annotation: Annotation
    primary: Annotation
    overlaps: Timeline
    clusters: ClusterResult
    windows: List[Window]
    similarity: SimilarityMatrix
    report: Dict = field(default_factory=dict)


def vad_spans(vad: Timeline, n_samples: int, sample_rate: int, window: int, shift: int) -> List[Span]:
    """Analysis windows inside the speech regions, clipped to the region ends.

    A region shorter than one window becomes a single window; regions too
    short for one embedding frame are skipped.
    """
    min_len = int(round(FRAME_LENGTH * sample_rate))
    spans: List[Span] = []
    for start_s, end_s in vad.clip(0.0, n_samples / sample_rate):
        start = int(round(start_s * sample_rate))
        end = min(int(round(end_s * sample_rate)), n_samples)
        length = end - start
        if length < min_len:
            debug_print(f"Skipping {length}-sample VAD region at {start_s:.3f} s", component="pipeline")
            continue
        if length < window:
            spans.append((start, end))
            continue
        spans.extend((start + a, min(start + b, end)) for a, b in tile_windows(length, window, shift))
    return spans


class DiarizationPipeline:
    """Runs every stage with timing, wrapping module errors with the stage name"""

    def __init__(self, config: PipelineConfig, mode: RunMode = RunMode.CLUSTER_ONLY):
        self.config = config
        self.mode = mode
        self.timer = StageTimer(component='pipeline')
        self.inputs: Dict[str, str] = {}

    @contextmanager
    def stage(self, name: str):
        try:
            with self.timer.stage(name) as record:
                yield record
        except PipelineError:
            raise
        except DiarizationError as e:
            raise PipelineError(name, e) from e

    def _remember(self, key: str, path: Optional[str]) -> None:
        if isinstance(path, str):
            self.inputs[key] = calculate_md5(path)

    def load_audio(self, wav: Union[str, MultichannelAudio]) -> MultichannelAudio:
        with self.stage("read_audio") as rec:
            self._remember("wav", wav)
            audio = read_wav(wav) if isinstance(wav, str) else wav
            rec.count = audio.length
        return audio

    def load_vad(self, vad: Union[str, Timeline]) -> Timeline:
        with self.stage("read_vad") as rec:
            self._remember("vad", vad)
            timeline = read_vad(vad) if isinstance(vad, str) else vad
            rec.count = len(timeline)
        return timeline

    def load_bank(self, bank: Union[None, str, BeamformerBank], audio: MultichannelAudio) -> BeamformerBank:
        with self.stage("bank") as rec:
            if isinstance(bank, str):
                self._remember("bank", bank)
                bank = read_bank(bank, sound_speed=self.config.geometry.sound_speed)
            elif bank is None:
                bank = build_bank(self.config.geometry.build(), self.config.bank.n_directions,
                                  self.config.bank.n_taps, self.config.bank.loading)
            if bank.channels != audio.channels:
                raise ChannelMismatch(f"Bank has {bank.channels} channels, audio has {audio.channels}")
            rec.count = bank.n_directions
        return bank

    def similarity(self, audio: MultichannelAudio, spans: List[Span], bank_source,
                   embeddings: Optional[str]) -> SimilarityMatrix:
        rate = audio.sample_rate
        with self.stage("embeddings") as rec:
            if embeddings:
                self._remember("embeddings", embeddings)
                vectors = align_embeddings(load_embeddings(embeddings), [s / rate for s, _ in spans])
            else:
                vectors = embed_spans(audio, spans)
            a_x = cosine_matrix(np.stack([v.vector for v in vectors]), SimilarityKind.SPEAKER)
            rec.count = len(vectors)

        a = self.config.fusion_weight()
        if a == 1.0:
            return fuse(a_x, a_x, a)
        bank = self.load_bank(bank_source, audio)
        with self.stage("svectors") as rec:
            svectors = svectors_for_spans(bank, audio, spans)
            a_s = cosine_matrix(np.stack([sv.energies for sv in svectors]), SimilarityKind.SPATIAL)
            rec.count = len(svectors)
        with self.stage("fusion") as rec:
            fused = fuse(a_x, a_s, a)
            rec.count = fused.size
        return fused

    def overlaps(self, audio: MultichannelAudio, vad: Timeline, osd_model: Optional[ModelSource],
                 oracle_reference: Union[None, str, Annotation]) -> Timeline:
        if self.mode is RunMode.CLUSTER_ONLY:
            return Timeline()
        with self.stage("osd") as rec:
            if self.mode is RunMode.ORACLE_OSD:
                if oracle_reference is None:
                    raise DiarizationError("Oracle OSD needs a reference annotation", component="pipeline")
                self._remember("oracle_reference", oracle_reference)
                reference = parse_rttm(oracle_reference) if isinstance(oracle_reference, str) else oracle_reference
                timeline = reference.overlap_timeline()
            else:
                if osd_model is None:
                    raise DiarizationError("OSD mode needs a trained model", component="pipeline")
                if isinstance(osd_model, str):
                    self._remember("osd_model", osd_model)
                    params, model_config = load_checkpoint(osd_model)
                else:
                    params, model_config = osd_model
                timeline = detect_overlap(params, model_config, audio, self.config.osd.threshold)
            timeline = timeline.intersect(vad)
            rec.count = len(timeline)
        return timeline

    def run(self, wav, vad, embeddings: Optional[str] = None, bank=None,
            osd_model: Optional[ModelSource] = None, oracle_reference=None,
            file_id: Optional[str] = None) -> PipelineResult:
        cfg = self.config
        audio = self.load_audio(wav)
        speech = self.load_vad(vad)
        if file_id is None:
            file_id = Path(wav).stem if isinstance(wav, str) else "recording"

        window = int(round(cfg.windows.length * audio.sample_rate))
        shift = int(round(cfg.windows.shift * audio.sample_rate))
        with self.stage("windows") as rec:
            spans = vad_spans(speech, audio.length, audio.sample_rate, window, shift)
            rec.count = len(spans)
        windows = [(a / audio.sample_rate, b / audio.sample_rate) for a, b in spans]

        if not spans:
            debug_print("No speech windows, writing an empty annotation", component="pipeline")
            empty = Annotation([], file_id)
            clusters = ClusterResult(labels=np.zeros(0, dtype=np.int64), k=0, chosen_p=0)
            return self._finish(empty, empty, Timeline(), clusters, windows,
                                SimilarityMatrix(np.zeros((0, 0)), SimilarityKind.FUSED))

        fused = self.similarity(audio, spans, bank, embeddings)
        with self.stage("clustering") as rec:
            clusters = nme_sc(fused, cfg.clustering.max_speakers, cfg.clustering.seed, cfg.clustering.max_p)
            primary = assign_labels(clusters, windows, file_id)
            rec.count = clusters.k

        overlaps = self.overlaps(audio, speech, osd_model, oracle_reference)
        with self.stage("assign_secondary") as rec:
            annotation = assign_secondary(primary, overlaps, fused, windows, clusters)
            rec.count = len(annotation)
        return self._finish(annotation, primary, overlaps, clusters, windows, fused)

    def _finish(self, annotation, primary, overlaps, clusters, windows, fused) -> PipelineResult:
        report = {
            "file_id": annotation.file_id,
            "mode": self.mode.value,
            "windows": len(windows),
            "k": clusters.k,
            "chosen_p": clusters.chosen_p,
            "eigengaps": [float(g) for g in clusters.eigengaps],
            "speakers": annotation.speakers,
            "overlap_seconds": overlaps.duration,
            "speech_seconds": annotation.timeline().duration,
            "stages": self.timer.as_dict(),
            "inputs_md5": dict(self.inputs),
            "config": self.config.to_dict(),
        }
        debug_print(f"Pipeline finished: {len(windows)} windows, k={clusters.k}, "
                    f"{overlaps.duration:.2f} s overlap", component="pipeline")
        return PipelineResult(annotation, primary, overlaps, clusters, windows, fused, report)


def write_outputs(result: PipelineResult, rttm_path: str, report_path: Optional[str] = None) -> None:
    write_rttm(result.annotation, rttm_path)
    if report_path:
        atomic_write(report_path, json.dumps(result.report, indent=2, sort_keys=True) + "\n")


def run_pipeline(config: PipelineConfig, wav, vad, mode: RunMode = RunMode.CLUSTER_ONLY,
                 rttm_path: Optional[str] = None, report_path: Optional[str] = None, **sources) -> PipelineResult:
    """Diarize one recording; writes the RTTM and report when paths are given.

    Keyword sources: embeddings (path), bank (path or bank), osd_model (path or
    (params, config)), oracle_reference (path or annotation), file_id.
    """
    result = DiarizationPipeline(config, mode).run(wav, vad, **sources)
    if rttm_path:
        write_outputs(result, rttm_path, report_path)
    return result
