from pathlib import Path
from typing import Optional

from errors import ParseError
from models import Annotation, RttmRow, Segment, Timeline
from utils import atomic_write, debug_print

NA = "<NA>"
OVERLAP_LABEL = "overlap"
RTTM_FIELDS = ("type", "file", "chnl", "tbeg", "tdur", "ortho", "stype", "name", "conf", "slat")


class RttmHandler:
    """Reads and writes RTTM files and oracle VAD lists"""

    @staticmethod
    def parse_line(line: str, line_no: int) -> Optional[RttmRow]:
        """One RTTM line to a row; None for blank, comment and SPKR-INFO lines"""
        fields = line.split()
        if not fields or fields[0].startswith(';;') or fields[0] == "SPKR-INFO":
            return None
        if fields[0] != "SPEAKER":
            raise ParseError(f"Unsupported RTTM record type '{fields[0]}'", index=line_no, field="type")
        if len(fields) != len(RTTM_FIELDS):
            missing = RTTM_FIELDS[len(fields)] if len(fields) < len(RTTM_FIELDS) else "slat"
            raise ParseError(f"Expected {len(RTTM_FIELDS)} fields, got {len(fields)}", index=line_no, field=missing)
        try:
            onset = float(fields[3])
        except ValueError:
            raise ParseError(f"Invalid onset '{fields[3]}'", index=line_no, field="tbeg")
        try:
            duration = float(fields[4])
        except ValueError:
            raise ParseError(f"Invalid duration '{fields[4]}'", index=line_no, field="tdur")
        if onset < 0:
            raise ParseError(f"Negative onset {onset}", index=line_no, field="tbeg")
        if duration <= 0:
            raise ParseError(f"Duration must be positive, got {duration}", index=line_no, field="tdur")
        channel = int(fields[2]) if fields[2].isdigit() else 1
        return RttmRow(file_id=fields[1], onset=onset, duration=duration, speaker=fields[7], channel=channel)

    @staticmethod
    def parse_text(text: str, file_id: Optional[str] = None) -> Annotation:
        rows = [row for i, line in enumerate(text.splitlines(), start=1)
                if (row := RttmHandler.parse_line(line, i)) is not None]
        if file_id is None:
            file_id = rows[0].file_id if rows else "recording"
        return Annotation([row.to_segment() for row in rows], file_id)

    @staticmethod
    def parse_file(path: str) -> Annotation:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        annotation = RttmHandler.parse_text(text)
        if not annotation.segments:
            annotation.file_id = Path(path).stem
        debug_print(f"Parsed {len(annotation)} segments, {len(annotation.speakers)} speakers from {path}",
                    component="io")
        return annotation

    @staticmethod
    def serialize(annotation: Annotation) -> str:
        """SPEAKER lines sorted by onset then speaker"""
        segments = sorted(annotation.segments, key=lambda s: (round(s.start, 3), s.speaker, s.end))
        lines = [f"SPEAKER {annotation.file_id} 1 {seg.start:.3f} {seg.duration:.3f} {NA} {NA} "
                 f"{seg.speaker} {NA} {NA}" for seg in segments if seg.duration > 0]
        return "\n".join(lines) + ("\n" if lines else "")

    @staticmethod
    def write_file(annotation: Annotation, path: str) -> None:
        atomic_write(path, RttmHandler.serialize(annotation))
        debug_print(f"Wrote {len(annotation)} segments to {path}", component="io")

    @staticmethod
    def overlap_annotation(overlaps: Timeline, file_id: str) -> Annotation:
        return Annotation([Segment(start, end, OVERLAP_LABEL) for start, end in overlaps], file_id)

    @staticmethod
    def read_vad(path: str) -> Timeline:
        """Speech regions from an RTTM file or from `start end` lines"""
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        first = next((fields[0] for fields in (line.split() for line in text.splitlines())
                      if fields and not fields[0].startswith((';;', '#'))), None)
        if first in ("SPEAKER", "SPKR-INFO"):
            return RttmHandler.parse_text(text).timeline()
        regions = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue
            if len(fields) < 2:
                raise ParseError("Expected 'start end'", index=line_no, field="end")
            try:
                start, end = float(fields[0]), float(fields[1])
            except ValueError:
                raise ParseError(f"Invalid region '{line.strip()}'", index=line_no, field="start")
            if start < 0 or end <= start:
                raise ParseError(f"Invalid region [{start}, {end})", index=line_no, field="end")
            regions.append((start, end))
        timeline = Timeline(regions)
        debug_print(f"Read {len(timeline)} VAD regions ({timeline.duration:.2f} s) from {path}", component="io")
        return timeline


def parse_rttm(path: str) -> Annotation:
    return RttmHandler.parse_file(path)


def serialize_rttm(annotation: Annotation) -> str:
    return RttmHandler.serialize(annotation)


def write_rttm(annotation: Annotation, path: str) -> None:
    RttmHandler.write_file(annotation, path)


def read_vad(path: str) -> Timeline:
    return RttmHandler.read_vad(path)


def write_overlap_rttm(overlaps: Timeline, file_id: str, path: str) -> None:
    RttmHandler.write_file(RttmHandler.overlap_annotation(overlaps, file_id), path)

