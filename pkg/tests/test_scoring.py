from itertools import permutations

import numpy as np
import pytest

from models import Annotation, Segment, Timeline
from scoring import score_der, score_osd

COLLAR_FRAMES = 25


def annotation(*segments, file_id="rec"):
    return Annotation([Segment(*s) for s in segments], file_id)


def random_turns(rng, n_speakers, prefix):
    """(start_frame, end_frame, speaker) triples on a 10 ms grid, same-speaker overlaps allowed"""
    turns = []
    for s in range(n_speakers):
        for _ in range(int(rng.integers(1, 4))):
            start = int(rng.integers(0, 900))
            turns.append((start, start + int(rng.integers(10, 200)), f"{prefix}{s}"))
    return turns


def to_annotation(turns):
    return Annotation([Segment(start / 100, end / 100, speaker) for start, end, speaker in turns])


def activity(turns, n_frames):
    speakers = sorted({speaker for _, _, speaker in turns})
    matrix = np.zeros((n_frames, len(speakers)), dtype=bool)
    for start, end, speaker in turns:
        matrix[start:end, speakers.index(speaker)] = True
    return matrix


def brute_force_der(ref_turns, hyp_turns, collar_frames, score_overlap):
    """Minimum DER over every speaker mapping, counted frame by frame from the raw turns"""
    n_frames = max(end for _, end, _ in ref_turns + hyp_turns) + 1
    ref = activity(ref_turns, n_frames)
    hyp = activity(hyp_turns, n_frames)

    scored = np.ones(n_frames, dtype=bool)
    for column in ref.T:
        padded = np.concatenate([[False], column, [False]])
        for boundary in np.flatnonzero(padded[1:] != padded[:-1]):
            scored[max(boundary - collar_frames, 0):boundary + collar_frames] = False
    if not score_overlap:
        scored &= ref.sum(axis=1) < 2
    ref, hyp = ref[scored], hyp[scored]

    width = max(ref.shape[1], hyp.shape[1])
    ref = np.pad(ref, ((0, 0), (0, width - ref.shape[1])))
    hyp = np.pad(hyp, ((0, 0), (0, width - hyp.shape[1])))
    total = ref.sum()
    if total == 0:
        return 0.0
    n_ref, n_hyp = ref.sum(axis=1), hyp.sum(axis=1)
    best = min(int(np.sum(np.maximum(n_ref, n_hyp) - (ref & hyp[:, list(perm)]).sum(axis=1)))
               for perm in permutations(range(width)))
    return 100.0 * best / total


def test_renamed_hypothesis_is_perfect():
    ref = annotation((0.0, 2.0, "alice"), (2.0, 5.0, "bob"), (4.0, 6.0, "alice"))
    hyp = annotation((0.0, 2.0, "spk1"), (2.0, 5.0, "spk0"), (4.0, 6.0, "spk1"))
    report = score_der(ref, hyp, collar=0.0)
    assert report.der == 0.0
    assert report.mapping == {"alice": "spk1", "bob": "spk0"}
    assert report.scored_time == pytest.approx(7.0)


@pytest.mark.parametrize("collar_frames", [0, COLLAR_FRAMES])
@pytest.mark.parametrize("score_overlap", [True, False])
def test_matches_brute_force_mapping(collar_frames, score_overlap):
    rng = np.random.default_rng(77)
    for _ in range(50):
        ref_turns = random_turns(rng, int(rng.integers(1, 4)), "r")
        hyp_turns = random_turns(rng, int(rng.integers(1, 5)), "h")
        report = score_der(to_annotation(ref_turns), to_annotation(hyp_turns), collar=collar_frames / 100,
                           score_overlap=score_overlap)
        expected = brute_force_der(ref_turns, hyp_turns, collar_frames, score_overlap)
        assert report.der == pytest.approx(expected, abs=1e-9)
        assert report.der == pytest.approx(report.miss + report.fa + report.spkerr, abs=1e-9)


def test_spurious_segment_never_lowers_false_alarm():
    rng = np.random.default_rng(5)
    for _ in range(50):
        ref = to_annotation(random_turns(rng, 2, "r"))
        hyp_turns = random_turns(rng, 2, "h")
        start = int(rng.integers(0, 1000))
        label = str(rng.choice(["h0", "h1", "extra"]))
        spurious = hyp_turns + [(start, start + int(rng.integers(5, 100)), label)]
        before = score_der(ref, to_annotation(hyp_turns))
        after = score_der(ref, to_annotation(spurious))
        assert after.fa >= before.fa - 1e-12


def test_collar_forgives_boundary_error():
    ref = annotation((0.0, 10.0, "a"))
    hyp = annotation((0.0, 10.2, "x"))
    assert score_der(ref, hyp, collar=0.25).der == 0.0
    strict = score_der(ref, hyp, collar=0.0)
    assert strict.fa == pytest.approx(2.0)
    assert strict.der == pytest.approx(2.0)


def test_missed_overlap():
    ref = annotation((0.0, 5.0, "a"), (3.0, 8.0, "b"))
    hyp = annotation((0.0, 8.0, "x"))
    report = score_der(ref, hyp, collar=0.0)
    assert report.miss == pytest.approx(20.0)
    assert report.spkerr == pytest.approx(30.0)
    assert report.der == pytest.approx(50.0)


def test_overlap_excluded():
    ref = annotation((0.0, 5.0, "a"), (3.0, 8.0, "b"))
    hyp = annotation((0.0, 8.0, "x"))
    report = score_der(ref, hyp, collar=0.0, score_overlap=False)
    assert report.miss == 0.0
    assert report.spkerr == pytest.approx(50.0)
    assert report.scored_time == pytest.approx(6.0)


def test_empty_reference_scores_zero():
    report = score_der(Annotation(), annotation((0.0, 1.0, "x")))
    assert (report.der, report.scored_time) == (0.0, 0.0)


def test_empty_hypothesis_is_all_miss():
    report = score_der(annotation((0.0, 4.0, "a")), Annotation(), collar=0.0)
    assert report.miss == pytest.approx(100.0)
    assert report.mapping == {}


def test_der_report_lines():
    ref = annotation((0.0, 10.0, "a"))
    hyp = annotation((0.0, 10.2, "x"))
    assert score_der(ref, hyp, collar=0.0).as_lines() == [
        "MISS=0.00", "FA=2.00", "SpkErr=0.00", "DER=2.00", "scored_time=10.00"]


def test_osd_hand_example():
    report = score_osd(Timeline([(2.0, 4.0)]), Timeline([(3.0, 5.0)]), duration=10.0)
    assert (report.tp, report.fp, report.fn) == pytest.approx((1.0, 1.0, 1.0))
    assert report.deter == pytest.approx(100.0)
    assert report.precision == pytest.approx(50.0)
    assert report.recall == pytest.approx(50.0)
    assert report.accuracy == pytest.approx(80.0)


def test_osd_perfect_detection():
    timeline = Timeline([(1.0, 2.5), (6.0, 7.0)])
    report = score_osd(timeline, timeline, duration=8.0)
    assert report.deter == 0.0
    assert report.precision == report.recall == report.accuracy == 100.0


def test_osd_without_reference_overlap():
    report = score_osd(Timeline(), Timeline([(1.0, 2.0)]), duration=5.0)
    assert report.deter is None
    assert report.as_lines()[0] == "DetER=NA"
    assert report.precision == 0.0
    assert report.accuracy == pytest.approx(80.0)


def test_deter_decomposes_into_errors():
    rng = np.random.default_rng(9)
    for _ in range(50):
        reference = Timeline([(s / 100, (s + int(rng.integers(5, 80))) / 100)
                              for s in rng.integers(0, 1000, size=4)])
        hypothesis = Timeline([(s / 100, (s + int(rng.integers(5, 80))) / 100)
                               for s in rng.integers(0, 1000, size=3)])
        report = score_osd(reference, hypothesis, duration=12.0)
        assert report.deter * (report.tp + report.fn) / 100.0 == pytest.approx(report.fp + report.fn, abs=1e-9)
