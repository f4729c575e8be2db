"""Similarity matrices, late fusion and NME-SC spectral clustering.

NME-SC sweeps the binarization parameter p (top-p neighbours kept per row),
scores every p by the normalized maximum eigengap of the graph Laplacian and
clusters the spectral embedding of the best p with k-means.
"""

import math
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import eigh
from sklearn.cluster import KMeans

from errors import ShapeMismatch, ZeroVector
from models import Annotation, ClusterResult, Segment, SimilarityKind, SimilarityMatrix, Window
from utils import debug_print

EIGEN_EPS = 1e-10
KMEANS_RESTARTS = 50
KMEANS_MAX_ITER = 300
DEGENERATE_ATOL = 1e-9


def cosine_matrix(vectors: np.ndarray, kind: SimilarityKind = SimilarityKind.SPEAKER) -> SimilarityMatrix:
    """Pairwise cosine similarity of the rows of an M x D matrix"""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[0] < 1:
        raise ShapeMismatch("Need at least one vector")
    norms = np.linalg.norm(vectors, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroVector("All-zero embedding row", index=int(zero[0]))
    unit = vectors / norms[:, None]
    values = np.clip(unit @ unit.T, -1.0, 1.0)
    values = 0.5 * (values + values.T)
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(values=values, kind=kind)


def fuse(a_x: SimilarityMatrix, a_s: SimilarityMatrix, a: float) -> SimilarityMatrix:
    """A_sx = a * A_x + (1 - a) * A_s"""
    if a_x.values.shape != a_s.values.shape:
        raise ShapeMismatch(f"Cannot fuse {a_x.values.shape} with {a_s.values.shape}")
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"Fusion weight must be in [0, 1], got {a}")
    if a == 1.0:
        values = a_x.values.copy()
    elif a == 0.0:
        values = a_s.values.copy()
    else:
        values = a * a_x.values + (1.0 - a) * a_s.values
    return SimilarityMatrix(values=values, kind=SimilarityKind.FUSED)


def binarize(affinity: np.ndarray, p: int) -> np.ndarray:
    """Keep the p largest entries of every row as 1, symmetrize by averaging"""
    m = affinity.shape[0]
    order = np.argsort(-affinity, axis=1, kind='stable')[:, :p]
    binary = np.zeros_like(affinity)
    binary[np.arange(m)[:, None], order] = 1.0
    np.fill_diagonal(binary, 1.0)
    return 0.5 * (binary + binary.T)


def laplacian(affinity: np.ndarray) -> np.ndarray:
    """Unnormalized graph Laplacian D - A"""
    return np.diag(affinity.sum(axis=1)) - affinity


def eigengaps(eigenvalues: np.ndarray, max_speakers: int) -> np.ndarray:
    """e_k = lambda_{k+1} - lambda_k for k = 1 .. min(max_speakers, M - 1)"""
    count = min(max_speakers, eigenvalues.shape[0] - 1)
    return np.diff(eigenvalues[:count + 1])


def _sweep_ratio(gaps: np.ndarray, eigenvalues: np.ndarray, p: int, m: int) -> float:
    g = gaps.max() / (eigenvalues[-1] + EIGEN_EPS) if gaps.size else 0.0
    return p / (m * g) if g > 0 else math.inf


def _relabel(labels: np.ndarray) -> np.ndarray:
    """Rename clusters in order of first appearance"""
    mapping = {}
    for label in labels:
        mapping.setdefault(int(label), len(mapping))
    return np.array([mapping[int(label)] for label in labels], dtype=np.int64)


def nme_sc(sim: SimilarityMatrix, max_speakers: int = 4, seed: int = 0,
           max_p: Optional[int] = None) -> ClusterResult:
    """Cluster the rows of a similarity matrix, estimating the speaker count.

    Args:
        sim: M x M similarity matrix
        max_speakers: Upper bound on the number of clusters
        seed: k-means seed
        max_p: Largest p of the sweep, ceil(M / 2) when not given
    """
    affinity = np.maximum(np.asarray(sim.values, dtype=np.float64), 0.0)
    m = affinity.shape[0]
    if affinity.shape != (m, m):
        raise ShapeMismatch(f"Similarity matrix must be square, got {affinity.shape}")
    if max_speakers < 1:
        raise ValueError(f"max_speakers must be >= 1, got {max_speakers}")
    if m < 2 or np.allclose(affinity, 1.0, rtol=0.0, atol=DEGENERATE_ATOL):
        debug_print(f"Degenerate affinity (M={m}), returning a single cluster", component="cluster")
        return ClusterResult(labels=np.zeros(m, dtype=np.int64), k=1, chosen_p=0)
    max_speakers = min(max_speakers, m)
    p_limit = math.ceil(m / 2) if max_p is None else max(1, min(max_p, math.ceil(m / 2)))

    best = None
    for p in range(1, p_limit + 1):
        eigenvalues = eigh(laplacian(binarize(affinity, p)), eigvals_only=True)
        gaps = eigengaps(eigenvalues, max_speakers)
        ratio = _sweep_ratio(gaps, eigenvalues, p, m)
        if best is None or ratio < best[0]:
            best = (ratio, p, gaps)
    ratio, chosen_p, gaps = best

    if math.isinf(ratio):
        # no p produced an edge: every window is its own component
        k = max_speakers
        debug_print(f"Edgeless affinity graph, k={k}", component="cluster")
    else:
        k = int(np.argmax(gaps)) + 1

    _, vectors = eigh(laplacian(binarize(affinity, chosen_p)))
    spectral = vectors[:, :k]
    norms = np.linalg.norm(spectral, axis=1, keepdims=True)
    spectral = spectral / np.where(norms > 0, norms, 1.0)

    if k == 1:
        labels = np.zeros(m, dtype=np.int64)
    else:
        kmeans = KMeans(n_clusters=k, init='k-means++', n_init=KMEANS_RESTARTS,
                        max_iter=KMEANS_MAX_ITER, random_state=seed)
        labels = _relabel(kmeans.fit_predict(spectral))
    k = int(labels.max()) + 1
    debug_print(f"NME-SC: M={m}, p*={chosen_p}, k={k}, gaps={np.round(gaps, 4).tolist()}", component="cluster")
    return ClusterResult(labels=labels, k=k, chosen_p=chosen_p, eigengaps=gaps)


def speaker_name(label: int) -> str:
    return f"spk{label}"


def window_tiles(windows: Sequence[Window]) -> List[Window]:
    """Non-overlapping share of every window: consecutive overlapping windows
    are cut at the middle of their overlap. Returned in input order."""
    order = sorted(range(len(windows)), key=lambda i: windows[i][0])
    spans = [[windows[i][0], windows[i][1]] for i in order]
    for prev, cur in zip(spans, spans[1:]):
        if prev[1] > cur[0]:
            cut = 0.5 * (cur[0] + prev[1])
            prev[1] = cut
            cur[0] = cut
    tiles: List[Window] = [(0.0, 0.0)] * len(windows)
    for i, (start, end) in zip(order, spans):
        tiles[i] = (start, end)
    return tiles


def assign_labels(clusters: ClusterResult, windows: Sequence[Window],
                  file_id: str = "recording") -> Annotation:
    """Turn window labels into speaker segments.

    Consecutive overlapping windows are cut at the middle of their overlap;
    windows that do not overlap keep their own edges. Adjacent segments with
    the same label are merged.
    """
    labels = np.asarray(clusters.labels)
    if labels.shape[0] != len(windows):
        raise ShapeMismatch(f"{labels.shape[0]} labels for {len(windows)} windows")
    if not windows:
        return Annotation([], file_id)

    tiles = window_tiles(windows)
    order = sorted(range(len(windows)), key=lambda i: windows[i][0])
    segments: List[Segment] = []
    for i in order:
        start, end = tiles[i]
        speaker = speaker_name(int(labels[i]))
        if end <= start:
            continue
        if segments and segments[-1].speaker == speaker and segments[-1].end >= start:
            segments[-1] = Segment(segments[-1].start, max(end, segments[-1].end), speaker)
        else:
            segments.append(Segment(start, end, speaker))
    return Annotation(segments, file_id)
