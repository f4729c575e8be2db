import hashlib
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

DEBUG = False
DEBUG_FILES: Dict[str, logging.FileHandler] = {}  # One handler per component
DEBUG_BASE_PATH = None

LOGGER_PREFIX = "sdiar"
COMPONENTS = ['main', 'array', 'sdb', 'beam', 'embed', 'cluster', 'osd',
              'assign', 'score', 'sim', 'io', 'pipeline']

_FORMATTER = logging.Formatter("[%(asctime)s] %(message)s", datefmt="%H:%M:%S")


def get_logger(component: str) -> logging.Logger:
    """Logger of one pipeline component"""
    return logging.getLogger(f"{LOGGER_PREFIX}.{component}")


def debug_print(*messages, component: str = 'main') -> None:
    """Log debug messages of a component if DEBUG is True"""
    if DEBUG:
        get_logger(component).debug(" ".join(str(m) for m in messages))


def init_debug_file(anchor_path: str) -> None:
    """Initialize one debug file per component next to the given file"""
    global DEBUG_BASE_PATH
    if not DEBUG:
        return
    debug_dir = os.path.dirname(os.path.abspath(anchor_path))
    base_name = os.path.splitext(os.path.basename(anchor_path))[0]
    DEBUG_BASE_PATH = os.path.join(debug_dir, f"{base_name}_debug")

    logging.getLogger(LOGGER_PREFIX).setLevel(logging.DEBUG)
    for comp in COMPONENTS:
        handler = logging.FileHandler(f"{DEBUG_BASE_PATH}_{comp}.log", mode='w', encoding='utf-8')
        handler.setFormatter(_FORMATTER)
        get_logger(comp).addHandler(handler)
        DEBUG_FILES[comp] = handler
        get_logger(comp).debug(f"Debug log started for {comp}")

    print("Debug files created:")
    for comp in COMPONENTS:
        print(f"  {base_name}_debug_{comp}.log")


def close_debug_file() -> None:
    """Close all debug files"""
    global DEBUG_FILES
    for component, handler in DEBUG_FILES.items():
        logger = get_logger(component)
        logger.debug(f"Debug log ended for {component}")
        logger.removeHandler(handler)
        handler.close()
    DEBUG_FILES = {}


def calculate_md5(file_path: str) -> str:
    """Calculate MD5 hash of a file"""
    try:
        md5_hash = hashlib.md5()
        with open(file_path, "rb") as f:
            # Read the file in chunks to handle large recordings
            for chunk in iter(lambda: f.read(65536), b""):
                md5_hash.update(chunk)
        return md5_hash.hexdigest()
    except OSError as e:
        debug_print(f"Error calculating MD5: {str(e)}", component="io")
        raise


def atomic_write(path: str, data: Union[bytes, str]) -> None:
    """Write a file through a temporary sibling and rename it into place"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = 'wb' if isinstance(data, bytes) else 'w'
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
    try:
        with os.fdopen(fd, mode, **({} if mode == 'wb' else {'encoding': 'utf-8', 'newline': '\n'})) as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


@dataclass
class StageRecord:
    name: str
    seconds: float
    count: Optional[int] = None


@dataclass
class StageTimer:
    """Collects wall time and output cardinality of pipeline stages.

    Usage:
        with timer.stage("svectors") as rec:
            ...
            rec.count = len(svectors)
    """
    component: str = 'pipeline'
    records: List[StageRecord] = field(default_factory=list)

    class _Stage:
        def __init__(self, timer: 'StageTimer', name: str):
            self.timer = timer
            self.record = StageRecord(name=name, seconds=0.0)
            self._start = 0.0

        def __enter__(self) -> StageRecord:
            self._start = time.perf_counter()
            return self.record

        def __exit__(self, exc_type, exc, tb) -> bool:
            self.record.seconds = time.perf_counter() - self._start
            self.timer.records.append(self.record)
            debug_print(f"Stage {self.record.name}: {self.record.seconds:.3f} s, "
                        f"count={self.record.count}", component=self.timer.component)
            return False

    def stage(self, name: str) -> '_Stage':
        return StageTimer._Stage(self, name)

    def as_dict(self) -> List[dict]:
        return [{'stage': r.name, 'seconds': r.seconds, 'count': r.count} for r in self.records]
