import numpy as np
import pytest

from array_model import ArrayGeometry, TWO_PI
from dmsnet import DmsNetConfig
from models import MultichannelAudio
from sdb_designer import build_bank
from sim import MeetingScript, SpeakerSpec, Turn, render


@pytest.fixture(scope="session")
def geom():
    return ArrayGeometry(mic_count=8, radius=0.05, sample_rate=16000.0, sound_speed=343.0)


@pytest.fixture(scope="session")
def bank(geom):
    """Default bank: 120 directions, 128 taps"""
    return build_bank(geom, n_directions=120, n_taps=128)


@pytest.fixture(scope="session")
def small_bank(geom):
    return build_bank(geom, n_directions=24, n_taps=64)


@pytest.fixture
def tiny_config():
    """DMSNet small enough for finite differences: C=4, F=8, T=20, one encoder layer"""
    return DmsNetConfig(channels=4, sample_rate=16000, chunk_len=0.04, sinc_filters=8, sinc_kernel=31,
                        sinc_stride=10, pool_sizes=(3,), se_reduction=4, conformer_layers=1, d_model=8,
                        heads=2, ff_dim=16, conv_kernel=3, lstm_layers=1, lstm_hidden=4, fc1_dim=8,
                        sdb_taps=16, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def single_source(geom, direction_index, n_directions=120, duration=3.0, snr_db=20.0, seed=0):
    """One speaker talking all the time from look direction direction_index"""
    script = MeetingScript(
        speakers=[SpeakerSpec(id="a", direction=TWO_PI * direction_index / n_directions)],
        turns=[Turn("a", 0.0, duration)], snr_db=snr_db, seed=seed, duration=duration)
    return render(script, geom)


def random_audio(rng, length, channels, sample_rate=16000, scale=0.1):
    return MultichannelAudio(samples=scale * rng.standard_normal((length, channels)), sample_rate=sample_rate)


DESK_CONFIG = DmsNetConfig(channels=8, chunk_len=2.0, sinc_filters=16, sinc_kernel=101, pool_sizes=(3, 3),
                           conformer_layers=1, d_model=16, heads=2, ff_dim=32, conv_kernel=7, fc1_dim=16, seed=0)


@pytest.fixture(scope="session")
def desk_detector(geom):
    """M4 detector trained on two-second chunks of seeded two- and three-speaker meetings"""
    from dmsnet import train
    from sim import make_osd_dataset

    pairs = make_osd_dataset(8, geom, DESK_CONFIG, seed=100, hop=0.8, min_positive=0.3)
    triples = make_osd_dataset(4, geom, DESK_CONFIG, seed=200, n_speakers=3, hop=0.8, min_positive=0.3)
    items = pairs.items + triples.items
    params = train(DESK_CONFIG, items, epochs=20, lr=3e-3, batch_size=8)
    return params, DESK_CONFIG, len(items)
