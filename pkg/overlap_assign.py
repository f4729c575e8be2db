"""Second stage of overlap handling: a secondary speaker for every window
share that falls inside a detected overlap region."""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from errors import ShapeMismatch
from fusion_cluster import speaker_name, window_tiles
from models import Annotation, ClusterResult, Segment, SimilarityMatrix, Timeline, Window
from utils import debug_print

TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SecondaryAssignment:
    start: float
    end: float
    primary: str
    secondary: str


def centroid_scores(sim: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Similarity of every window to every cluster centroid (M x k)"""
    scores = np.full((sim.shape[0], k), -np.inf)
    for c in range(k):
        members = labels == c
        if members.any():
            scores[:, c] = sim[:, members].mean(axis=1)
    return scores


def _distance_to_cluster(tiles: Sequence[Window], labels: np.ndarray, cluster: int,
                         start: float, end: float) -> float:
    """Gap between [start, end) and the nearest primary tile of a cluster"""
    distances = [max(s - end, start - e, 0.0) for (s, e), label in zip(tiles, labels) if label == cluster]
    return min(distances, default=np.inf)


def secondary_assignments(overlaps: Timeline, fused_sim: SimilarityMatrix, windows: Sequence[Window],
                          clusters: ClusterResult) -> List[SecondaryAssignment]:
    labels = np.asarray(clusters.labels)
    if fused_sim.size != labels.shape[0] or labels.shape[0] != len(windows):
        raise ShapeMismatch(f"{fused_sim.size} x {fused_sim.size} similarity, {labels.shape[0]} labels "
                            f"and {len(windows)} windows do not line up", component="assign")
    scores = centroid_scores(fused_sim.values, labels, clusters.k)
    tiles = window_tiles(windows)
    assignments = []
    for i, (tile_start, tile_end) in enumerate(tiles):
        regions = overlaps.clip(tile_start, tile_end)
        if not regions:
            continue
        own = int(labels[i])
        candidates = [c for c in range(clusters.k) if c != own and np.isfinite(scores[i, c])]
        if not candidates:
            continue
        best = max(scores[i, c] for c in candidates)
        tied = [c for c in candidates if best - scores[i, c] <= TIE_TOLERANCE]
        if len(tied) > 1:
            # nearest primary speech in time wins, then the lower label
            tied.sort(key=lambda c: (_distance_to_cluster(tiles, labels, c, tile_start, tile_end), c))
        for start, end in regions:
            assignments.append(SecondaryAssignment(start, end, speaker_name(own), speaker_name(tied[0])))
    return assignments


def assign_secondary(diar: Annotation, overlaps: Timeline, fused_sim: SimilarityMatrix,
                     windows: Sequence[Window], clusters: ClusterResult) -> Annotation:
    """Add secondary speakers inside overlap regions.

    The secondary speaker of a window is the cluster, other than its own, whose
    centroid is most similar to it in the fused matrix. Outside the overlap
    regions the annotation is left untouched. Ties are broken by the primary
    speech of the window tiles, so a second application changes nothing.
    """
    if not overlaps:
        return diar
    if clusters.k < 2:
        debug_print("Single cluster, no secondary speaker possible", component="assign")
        return diar
    assignments = secondary_assignments(overlaps, fused_sim, windows, clusters)
    extra = [Segment(a.start, a.end, a.secondary) for a in assignments]
    result = Annotation(list(diar.segments) + extra, diar.file_id).support()
    debug_print(f"Assigned {len(assignments)} secondary regions, "
                f"{sum(a.end - a.start for a in assignments):.2f} s", component="assign")
    return result
