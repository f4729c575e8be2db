import numpy as np
import pytest

from array_model import ArrayGeometry
from beam_runtime import (beamform, extract_svectors, normalize_energies, svector_windows, tile_windows,
                          write_svectors)
from errors import AudioTooShort, ChannelMismatch
from models import MultichannelAudio
from sdb_designer import BeamformerBank

from conftest import random_audio, single_source


def impulse_bank(channels=4, n_taps=16):
    taps = np.zeros((2, channels, n_taps))
    taps[0, 0, 0] = 1.0
    geom = ArrayGeometry(mic_count=channels)
    return BeamformerBank(taps=taps, look_directions=np.array([0.0, np.pi]), geom=geom)


def test_unit_impulse_passes_channel_zero(rng):
    audio = random_audio(rng, 500, 4)
    np.testing.assert_array_equal(beamform(impulse_bank(), audio, 0), audio.samples[:, 0])


def test_zero_audio_gives_zero_output(small_bank):
    audio = MultichannelAudio(np.zeros((4000, 8)), 16000)
    assert not np.any(beamform(small_bank, audio, 3))


def test_beamform_matches_direct_convolution(small_bank, rng):
    audio = random_audio(rng, 300, 8)
    y = beamform(small_bank, audio, 5)
    expected = sum(np.convolve(audio.samples[:, c], small_bank.taps[5, c])[:300] for c in range(8))
    np.testing.assert_allclose(y, expected, atol=1e-12)


def test_channel_mismatch(small_bank, rng):
    with pytest.raises(ChannelMismatch):
        beamform(small_bank, random_audio(rng, 100, 4), 0)


def test_direction_out_of_range(small_bank, rng):
    with pytest.raises(IndexError):
        beamform(small_bank, random_audio(rng, 100, 8), 24)


def test_look_direction_beats_back_lobe(geom, bank):
    audio = single_source(geom, 30, duration=1.5).audio
    front = np.sum(beamform(bank, audio, 30) ** 2)
    back = np.sum(beamform(bank, audio, 90) ** 2)
    assert front >= back


def test_tiling_two_seconds():
    assert tile_windows(32000, 16000, 8000) == [(0, 16000), (8000, 24000), (16000, 32000)]


def test_tiling_keeps_long_partial_window():
    spans = tile_windows(16000 + 8000 + 4000, 16000, 8000)
    assert spans[-1] == (16000, 32000)


def test_tiling_drops_short_remainder():
    assert tile_windows(16000 + 3000, 16000, 16000) == [(0, 16000)]
    assert tile_windows(16000 + 9000, 16000, 16000) == [(0, 16000), (16000, 32000)]


def test_tiling_too_short():
    with pytest.raises(AudioTooShort):
        tile_windows(15999, 16000, 8000)


def test_silent_rows_become_uniform():
    energies = normalize_energies(np.array([[0.0, 0.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0]]))
    np.testing.assert_array_equal(energies[0], np.full(4, 0.25))
    np.testing.assert_allclose(energies[1], [0.25, 0.75, 0.0, 0.0])


def test_svectors_of_silence_are_uniform(small_bank):
    audio = MultichannelAudio(np.zeros((32000, 8)), 16000)
    svectors = extract_svectors(small_bank, audio)
    assert [sv.window_start for sv in svectors] == [0.0, 0.5, 1.0]
    for sv in svectors:
        np.testing.assert_array_equal(sv.energies, np.full(24, 1 / 24))


def test_svectors_are_distributions(small_bank, rng):
    svectors = extract_svectors(small_bank, random_audio(rng, 40000, 8))
    for sv in svectors:
        assert np.all(sv.energies >= 0)
        assert abs(sv.energies.sum() - 1.0) <= 1e-9


def test_svectors_scale_invariant(small_bank, rng):
    audio = random_audio(rng, 24000, 8)
    base = extract_svectors(small_bank, audio)
    scaled = extract_svectors(small_bank, audio.scaled(37.5))
    for a, b in zip(base, scaled):
        np.testing.assert_allclose(a.energies, b.energies, atol=1e-9)


def test_single_source_argmax(geom, bank):
    audio = single_source(geom, 17, duration=3.0, snr_db=20.0).audio
    for sv in extract_svectors(bank, audio):
        assert int(np.argmax(sv.energies)) == 17


def test_rotation_shifts_argmax(geom, bank):
    first = single_source(geom, 45, duration=1.0, snr_db=None).audio
    second = single_source(geom, 46, duration=1.0, snr_db=None).audio
    a = int(np.argmax(extract_svectors(bank, first)[0].energies))
    b = int(np.argmax(extract_svectors(bank, second)[0].energies))
    assert b == a + 1


def test_partial_window_length(small_bank, rng):
    svectors = extract_svectors(small_bank, random_audio(rng, 28000, 8))
    assert svector_windows(svectors)[-1] == (1.0, 1.75)


def test_audio_shorter_than_window(small_bank, rng):
    with pytest.raises(AudioTooShort):
        extract_svectors(small_bank, random_audio(rng, 8000, 8))


def test_svector_file_layout(small_bank, rng, tmp_path):
    svectors = extract_svectors(small_bank, random_audio(rng, 16000, 8))
    path = tmp_path / "out.svec"
    write_svectors(svectors, str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 1
    fields = lines[0].split()
    assert fields[:2] == ["0.000", "1.000"]
    assert len(fields) == 2 + 24
