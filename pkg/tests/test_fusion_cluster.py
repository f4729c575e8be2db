import math

import numpy as np
import pytest

from errors import ShapeMismatch, ZeroVector
from fusion_cluster import (assign_labels, binarize, cosine_matrix, eigengaps, fuse, nme_sc, window_tiles)
from models import ClusterResult, Segment, SimilarityKind, SimilarityMatrix


def block_matrix(rng, sizes, within=0.9, across=0.1, spread=0.05):
    m = sum(sizes)
    truth = np.repeat(np.arange(len(sizes)), sizes)
    base = np.where(truth[:, None] == truth[None, :], within, across)
    noise = rng.uniform(-spread, spread, (m, m))
    values = base + 0.5 * (noise + noise.T)
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(values, SimilarityKind.FUSED), truth


def exhaustive_sweep(values, max_speakers):
    """Every p from 1 to ceil(M/2): binarize, Laplacian eigenvalues, normalized max eigengap"""
    affinity = np.maximum(values, 0.0)
    m = affinity.shape[0]
    max_speakers = min(max_speakers, m)
    best = None
    for p in range(1, math.ceil(m / 2) + 1):
        binary = np.zeros((m, m))
        for i in range(m):
            for j in sorted(range(m), key=lambda j: (-affinity[i, j], j))[:p]:
                binary[i, j] = 1.0
            binary[i, i] = 1.0
        binary = 0.5 * (binary + binary.T)
        lap = np.diag(binary.sum(axis=1)) - binary
        eigs = np.linalg.eigvalsh(lap)
        gaps = [eigs[i + 1] - eigs[i] for i in range(min(max_speakers, m - 1))]
        g = max(gaps) / (eigs[-1] + 1e-10)
        ratio = p / (m * g) if g > 0 else math.inf
        if best is None or ratio < best[0]:
            best = (ratio, p, int(np.argmax(gaps)) + 1)
    return best[1], best[2]


def same_partition(labels, truth):
    pairs = set(zip(labels.tolist(), truth.tolist()))
    return len(pairs) == len(set(truth.tolist())) == len(set(labels.tolist()))


def test_single_vector():
    np.testing.assert_array_equal(cosine_matrix(np.array([[3.0, 4.0]])).values, [[1.0]])


def test_identical_vectors():
    values = cosine_matrix(np.array([[1.0, 2.0], [1.0, 2.0]])).values
    assert values[0, 1] == pytest.approx(1.0, abs=1e-15)


def test_hand_computed_cosines():
    values = cosine_matrix(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])).values
    assert values[0, 1] == 0.0
    assert values[0, 2] == pytest.approx(1 / math.sqrt(2))
    assert values[1, 2] == pytest.approx(1 / math.sqrt(2))
    np.testing.assert_array_equal(values, values.T)
    np.testing.assert_array_equal(np.diag(values), np.ones(3))


def test_zero_vector_rejected():
    with pytest.raises(ZeroVector) as info:
        cosine_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert info.value.index == 1


def test_fusion_endpoints_are_exact(rng):
    a_x = cosine_matrix(rng.standard_normal((9, 5)))
    a_s = cosine_matrix(rng.uniform(size=(9, 12)), SimilarityKind.SPATIAL)
    np.testing.assert_array_equal(fuse(a_x, a_s, 1.0).values, a_x.values)
    np.testing.assert_array_equal(fuse(a_x, a_s, 0.0).values, a_s.values)
    fused = fuse(a_x, a_s, 0.95)
    assert fused.kind is SimilarityKind.FUSED
    assert np.max(np.abs(fused.values - (0.95 * a_x.values + 0.05 * a_s.values))) <= 1e-15


def test_fusion_arithmetic():
    a_x = SimilarityMatrix(np.array([[1.0, 0.8], [0.8, 1.0]]), SimilarityKind.SPEAKER)
    a_s = SimilarityMatrix(np.array([[1.0, 0.4], [0.4, 1.0]]), SimilarityKind.SPATIAL)
    assert fuse(a_x, a_s, 0.95).values[0, 1] == pytest.approx(0.78, abs=1e-15)


def test_fusion_rejects_bad_input():
    a = SimilarityMatrix(np.eye(2), SimilarityKind.SPEAKER)
    b = SimilarityMatrix(np.eye(3), SimilarityKind.SPATIAL)
    with pytest.raises(ShapeMismatch):
        fuse(a, b, 0.5)
    with pytest.raises(ValueError):
        fuse(a, a, 1.5)


def test_binarize_is_symmetric_with_unit_diagonal(rng):
    values = rng.uniform(size=(7, 7))
    binary = binarize(values, 3)
    np.testing.assert_array_equal(binary, binary.T)
    np.testing.assert_array_equal(np.diag(binary), np.ones(7))
    assert set(np.unique(binary)) <= {0.0, 0.5, 1.0}


def test_eigengaps_count():
    eigs = np.array([0.0, 0.0, 1.0, 3.0, 6.0])
    np.testing.assert_array_equal(eigengaps(eigs, 2), [0.0, 1.0])
    np.testing.assert_array_equal(eigengaps(eigs, 10), [0.0, 1.0, 2.0, 3.0])


def test_two_disconnected_blocks():
    values = np.zeros((10, 10))
    values[:5, :5] = 1.0
    values[5:, 5:] = 1.0
    result = nme_sc(SimilarityMatrix(values, SimilarityKind.FUSED), max_speakers=4)
    assert result.k == 2
    np.testing.assert_array_equal(result.labels, [0] * 5 + [1] * 5)


def test_identity_pair_gives_two_clusters():
    result = nme_sc(SimilarityMatrix(np.eye(2), SimilarityKind.FUSED))
    assert result.k == 2
    assert result.labels[0] != result.labels[1]


def test_degenerate_inputs_give_one_cluster():
    single = nme_sc(SimilarityMatrix(np.ones((1, 1)), SimilarityKind.FUSED))
    assert single.k == 1
    flat = nme_sc(SimilarityMatrix(np.ones((6, 6)), SimilarityKind.FUSED))
    assert flat.k == 1
    assert flat.chosen_p == 0
    np.testing.assert_array_equal(flat.labels, np.zeros(6))


def test_three_perturbed_blocks():
    sim, truth = block_matrix(np.random.default_rng(5), [4, 5, 6])
    result = nme_sc(sim, max_speakers=6)
    assert result.k == 3
    assert same_partition(result.labels, truth)
    assert (result.chosen_p, result.k) == exhaustive_sweep(sim.values, 6)


@pytest.mark.parametrize("seed", [5, 11, 23])
def test_relabeling_windows_permutes_labels(seed):
    rng = np.random.default_rng(seed)
    sim, _ = block_matrix(rng, [4, 5, 6])
    perm = rng.permutation(sim.values.shape[0])
    result = nme_sc(sim, max_speakers=6)
    shuffled = nme_sc(SimilarityMatrix(sim.values[np.ix_(perm, perm)], SimilarityKind.FUSED), max_speakers=6)
    assert (shuffled.k, shuffled.chosen_p) == (result.k, result.chosen_p)
    assert same_partition(shuffled.labels, result.labels[perm])


def test_max_speakers_caps_k():
    sim, _ = block_matrix(np.random.default_rng(2), [4, 4, 4, 4])
    assert nme_sc(sim, max_speakers=2).k <= 2


def test_non_square_rejected():
    with pytest.raises(ShapeMismatch):
        nme_sc(SimilarityMatrix(np.ones((2, 3)), SimilarityKind.FUSED))


def test_clustering_is_deterministic():
    sim, _ = block_matrix(np.random.default_rng(9), [6, 7])
    a = nme_sc(sim, seed=3)
    b = nme_sc(sim, seed=3)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.chosen_p == b.chosen_p


@pytest.mark.slow
def test_seeded_block_suite():
    rng = np.random.default_rng(2024)
    correct = 0
    for _ in range(50):
        k = int(rng.choice([2, 3, 4]))
        m = int(rng.integers(12, 41))
        sizes = 3 + rng.multinomial(m - 3 * k, np.full(k, 1.0 / k))
        sim, truth = block_matrix(rng, sizes.tolist())
        result = nme_sc(sim, max_speakers=4)
        assert (result.chosen_p, result.k) == exhaustive_sweep(sim.values, 4)
        correct += result.k == k
    assert correct >= 48


def test_midpoint_cut_between_windows():
    diar = assign_labels(ClusterResult(np.array([0, 1]), 2, 1), [(0.0, 1.0), (0.5, 1.5)])
    assert diar.segments == [Segment(0.0, 0.75, "spk0"), Segment(0.75, 1.5, "spk1")]


def test_same_label_windows_merge():
    windows = [(0.0, 1.0), (0.5, 1.5), (1.0, 2.0)]
    diar = assign_labels(ClusterResult(np.array([0, 0, 0]), 1, 1), windows)
    assert diar.segments == [Segment(0.0, 2.0, "spk0")]


def test_gap_between_windows_is_kept():
    diar = assign_labels(ClusterResult(np.array([0, 0]), 1, 1), [(0.0, 1.0), (3.0, 4.0)])
    assert diar.segments == [Segment(0.0, 1.0, "spk0"), Segment(3.0, 4.0, "spk0")]


def test_empty_labels():
    diar = assign_labels(ClusterResult(np.zeros(0, dtype=int), 0, 0), [], file_id="x")
    assert len(diar) == 0
    assert diar.file_id == "x"


def test_label_count_mismatch():
    with pytest.raises(ShapeMismatch):
        assign_labels(ClusterResult(np.array([0]), 1, 1), [(0.0, 1.0), (0.5, 1.5)])


def test_tiles_keep_input_order():
    tiles = window_tiles([(1.0, 2.0), (0.0, 1.5)])
    assert tiles == [(1.25, 2.0), (0.0, 1.25)]
