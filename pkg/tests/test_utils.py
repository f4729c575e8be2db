import pytest

import utils
from errors import GeometryError, NonFiniteLoss, ParseError, PipelineError
from languages import SUPPORTED_LANGUAGES, load_language
from utils import StageTimer, atomic_write, calculate_md5


def test_stage_timer_records_in_order():
    timer = StageTimer()
    with timer.stage("windows") as rec:
        rec.count = 11
    with timer.stage("fusion"):
        pass
    stages = timer.as_dict()
    assert [s["stage"] for s in stages] == ["windows", "fusion"]
    assert stages[0]["count"] == 11
    assert stages[1]["count"] is None
    assert all(s["seconds"] >= 0.0 for s in stages)


def test_stage_timer_keeps_failed_stage():
    timer = StageTimer()
    with pytest.raises(RuntimeError):
        with timer.stage("bank"):
            raise RuntimeError("boom")
    assert [s["stage"] for s in timer.as_dict()] == ["bank"]


def test_atomic_write_text_and_bytes(tmp_path):
    path = tmp_path / "sub" / "out.txt"
    atomic_write(str(path), "a\nb\n")
    assert path.read_text() == "a\nb\n"
    atomic_write(str(path), b"\x00\x01")
    assert path.read_bytes() == b"\x00\x01"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


def test_md5(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"")
    assert calculate_md5(str(path)) == "d41d8cd98f00b204e9800998ecf8427e"


def test_debug_files(tmp_path, monkeypatch):
    monkeypatch.setattr(utils, "DEBUG", True)
    anchor = tmp_path / "meeting.wav"
    utils.init_debug_file(str(anchor))
    utils.debug_print("hello", 3, component="cluster")
    utils.close_debug_file()
    assert "hello 3" in (tmp_path / "meeting_debug_cluster.log").read_text()
    assert (tmp_path / "meeting_debug_main.log").exists()


def test_error_text_names_component_and_index():
    assert str(GeometryError("radius must be positive")) == "[array] radius must be positive"
    assert str(ParseError("bad number", index=4, field="tbeg")) == "[io] bad number [field 'tbeg'] (index 4)"


def test_non_finite_loss_positions():
    error = NonFiniteLoss("loss is nan", epoch=2, step=7)
    assert (error.epoch, error.step, error.index) == (2, 7, 7)
    assert "epoch 2, step 7" in str(error)


def test_pipeline_error_takes_cause_index():
    cause = ParseError("missing window", component="embed", index=3)
    error = PipelineError("embeddings", cause)
    assert error.stage == "embeddings"
    assert error.index == 3
    assert error.cause is cause
    assert isinstance(error, ValueError)


def test_languages():
    assert {"en", "de"} <= set(SUPPORTED_LANGUAGES)
    assert load_language("xx").name == "en"
    assert load_language(None).name == "en"
    german = load_language("DE")
    assert german.name == "de"
    assert german.get("argparse", "description") != load_language("en").get("argparse", "description")
    assert german.get("nope", "missing") == "nope.missing"
