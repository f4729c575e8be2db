import numpy as np
import pytest

from embedding import (N_MELS, align_embeddings, embed_spans, lightweight_embed, load_embeddings,
                       log_mel_frames)
from errors import AudioTooShort, DimensionMismatch, ParseError
from models import EmbeddingSource, MultichannelAudio


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def tone(freq, seconds=1.0, rate=16000):
    return 0.3 * np.sin(2 * np.pi * freq * np.arange(int(seconds * rate)) / rate)


def test_frame_layout():
    fbank = log_mel_frames(np.random.default_rng(0).standard_normal(16000), 16000)
    # 25 ms frames every 10 ms over 1 s
    assert fbank.shape == ((16000 - 400) // 160 + 1, N_MELS)


def test_dimension_and_determinism(rng):
    x = rng.standard_normal(16000)
    a = lightweight_embed(x, 16000)
    b = lightweight_embed(x.copy(), 16000)
    assert a.shape == (162,)
    np.testing.assert_array_equal(a, b)


def test_noise_and_tone_are_dissimilar(rng):
    noise = lightweight_embed(0.3 * rng.standard_normal(16000), 16000)
    sine = lightweight_embed(tone(440.0), 16000)
    assert cosine(noise, sine) < 0.5


def test_gain_invariance(rng):
    x = rng.standard_normal(16000)
    assert cosine(lightweight_embed(x, 16000), lightweight_embed(0.1 * x, 16000)) >= 0.999


def test_too_short():
    with pytest.raises(AudioTooShort):
        lightweight_embed(np.ones(399), 16000)


def test_embed_spans_use_requested_channel(rng):
    samples = rng.standard_normal((24000, 2))
    audio = MultichannelAudio(samples, 16000)
    embeddings = embed_spans(audio, [(0, 16000), (8000, 24000)], channel=1)
    assert [e.window_start for e in embeddings] == [0.0, 0.5]
    assert embeddings[1].window_len == 1.0
    assert embeddings[0].source is EmbeddingSource.LIGHTWEIGHT
    np.testing.assert_array_equal(embeddings[0].vector, lightweight_embed(samples[:16000, 1], 16000))


def test_load_empty_file(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("")
    assert load_embeddings(str(path)) == []


def test_load_well_formed(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("0.0 1.0 1 2 3 4\n0.5 1.5 0 1 0 1\n\n1.0 2.0 4 3 2 1\n")
    embeddings = load_embeddings(str(path))
    assert len(embeddings) == 3
    assert all(e.vector.shape == (4,) for e in embeddings)
    assert embeddings[1].window_start == 0.5
    assert embeddings[1].window_len == 1.0
    assert embeddings[2].source is EmbeddingSource.EXTERNAL


def test_load_dimension_change(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("0.0 1.0 1 2 3 4\n0.5 1.5 0 1 0 1\n1.0 2.0 1 2 3\n")
    with pytest.raises(DimensionMismatch) as info:
        load_embeddings(str(path))
    assert info.value.index == 3


def test_load_non_numeric(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("0.0 1.0 1 2\n0.5 abc 1 2\n")
    with pytest.raises(ParseError) as info:
        load_embeddings(str(path))
    assert info.value.index == 2


def test_align_to_window_grid(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("1.0 2.0 3 3\n0.0 1.0 1 1\n0.5 1.5 2 2\n")
    aligned = align_embeddings(load_embeddings(str(path)), [0.0, 0.5, 1.0])
    assert [e.vector[0] for e in aligned] == [1.0, 2.0, 3.0]


def test_align_missing_window(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("0.0 1.0 1 1\n")
    with pytest.raises(DimensionMismatch) as info:
        align_embeddings(load_embeddings(str(path)), [0.0, 0.5])
    assert info.value.index == 1
