"""Frame-based diarization (DER) and overlap detection (DetER) scoring."""

import math
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from models import FRAME_SECONDS, Annotation, DerReport, OsdReport, Timeline, to_frames
from utils import debug_print

DEFAULT_COLLAR = 0.25


def frame_count(*ends: float, frame: float = FRAME_SECONDS) -> int:
    end = max((e for e in ends if e is not None), default=0.0)
    return max(int(math.ceil(end / frame - 1e-9)), 0)


def scored_frames(reference: Annotation, n_frames: int, collar: float = DEFAULT_COLLAR,
                  score_overlap: bool = True, frame: float = FRAME_SECONDS) -> np.ndarray:
    """Mask of frames that count: collars around reference boundaries removed,
    multi-speaker reference frames removed unless score_overlap"""
    mask = np.ones(n_frames, dtype=bool)
    if collar > 0:
        for seg in reference.support():
            for boundary in (seg.start, seg.end):
                lo = max(to_frames(boundary - collar, frame), 0)
                hi = min(to_frames(boundary + collar, frame), n_frames)
                mask[lo:hi] = False
    if not score_overlap:
        _, ref = reference.activity(n_frames, frame)
        mask &= ref.sum(axis=1) < 2
    return mask


def optimal_mapping(ref: np.ndarray, hyp: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hungarian assignment maximizing co-active frames; returns (rows, cols, overlap matrix)"""
    overlap = ref.astype(np.int64).T @ hyp.astype(np.int64)
    if overlap.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int), overlap
    rows, cols = linear_sum_assignment(-overlap)
    return rows, cols, overlap


def score_der(reference: Annotation, hypothesis: Annotation, collar: float = DEFAULT_COLLAR,
              score_overlap: bool = True, frame: float = FRAME_SECONDS) -> DerReport:
    """MISS, FA and speaker error as percentages of scored reference speaker-time"""
    n_frames = frame_count(reference.end, hypothesis.end, frame=frame)
    mask = scored_frames(reference, n_frames, collar, score_overlap, frame)
    ref_speakers, ref = reference.activity(n_frames, frame)
    hyp_speakers, hyp = hypothesis.activity(n_frames, frame)
    ref, hyp = ref[mask], hyp[mask]

    n_ref = ref.sum(axis=1)
    n_hyp = hyp.sum(axis=1)
    total = int(n_ref.sum())
    if total == 0:
        debug_print("Empty reference after collar/overlap exclusion, reporting zeros", component="score")
        return DerReport(miss=0.0, fa=0.0, spkerr=0.0, der=0.0, scored_time=0.0)

    rows, cols, overlap = optimal_mapping(ref, hyp)
    correct = np.zeros(ref.shape[0], dtype=np.int64)
    mapping: Dict[str, str] = {}
    for i, j in zip(rows, cols):
        correct += ref[:, i] & hyp[:, j]
        if overlap[i, j] > 0:
            mapping[ref_speakers[i]] = hyp_speakers[j]

    miss = int(np.maximum(n_ref - n_hyp, 0).sum())
    fa = int(np.maximum(n_hyp - n_ref, 0).sum())
    confusion = int((np.minimum(n_ref, n_hyp) - correct).sum())
    scale = 100.0 / total
    report = DerReport(miss=miss * scale, fa=fa * scale, spkerr=confusion * scale,
                       der=(miss + fa + confusion) * scale, scored_time=total * frame, mapping=mapping)
    debug_print(f"DER {report.der:.2f} (miss {report.miss:.2f}, fa {report.fa:.2f}, "
                f"spkerr {report.spkerr:.2f}) over {report.scored_time:.2f} s", component="score")
    return report


def score_osd(reference: Timeline, hypothesis: Timeline, duration: Optional[float] = None,
              frame: float = FRAME_SECONDS) -> OsdReport:
    """Frame confusion of detected overlap against reference overlap"""
    ref_end = reference.regions[-1][1] if reference else 0.0
    hyp_end = hypothesis.regions[-1][1] if hypothesis else 0.0
    n_frames = frame_count(ref_end, hyp_end, duration, frame=frame)
    ref = reference.to_frames(n_frames, frame)
    hyp = hypothesis.to_frames(n_frames, frame)

    tp = int(np.sum(ref & hyp))
    fp = int(np.sum(~ref & hyp))
    fn = int(np.sum(ref & ~hyp))
    tn = int(np.sum(~ref & ~hyp))

    if tp + fn == 0:
        debug_print("Reference has no overlap, DetER undefined", component="score")
        deter = None
    else:
        deter = 100.0 * (fp + fn) / (tp + fn)
    accuracy = 100.0 * (tp + tn) / n_frames if n_frames else 0.0
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    return OsdReport(deter=deter, accuracy=accuracy, precision=precision, recall=recall,
                     tp=tp * frame, fp=fp * frame, fn=fn * frame, tn=tn * frame)
