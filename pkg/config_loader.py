"""Pipeline configuration: `config.json` defaults overlaid by an optional user
file (JSON with the same layout, or `[section]` / `key = value` INI)."""

import configparser
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional

from array_model import ArrayGeometry
from dmsnet import VARIANTS, DmsNetConfig
from errors import ConfigError, GeometryError
from utils import debug_print

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'config.json')
EMBEDDING_KINDS = ('sx', 'x', 's')


@dataclass
class GeometryConfig:
    mic_count: int = 8
    radius: float = 0.05
    sample_rate: float = 16000.0
    sound_speed: float = 343.0

    def build(self) -> ArrayGeometry:
        return ArrayGeometry(mic_count=self.mic_count, radius=self.radius,
                             sample_rate=float(self.sample_rate), sound_speed=self.sound_speed)


@dataclass
class BankConfig:
    n_directions: int = 120
    n_taps: int = 128
    loading: Optional[float] = None


@dataclass
class WindowConfig:
    length: float = 1.0
    shift: float = 0.5


@dataclass
class FusionConfig:
    a: float = 0.95
    embedding_kind: str = 'sx'


@dataclass
class ClusteringConfig:
    max_speakers: int = 4
    seed: int = 0
    max_p: Optional[int] = None


@dataclass
class OsdConfig:
    model: Optional[str] = None
    threshold: float = 0.5
    variant: str = 'M4'
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 8
    train_meetings: int = 12
    meeting_duration: float = 20.0


@dataclass
class LanguageConfig:
    application: str = 'en'


@dataclass
class PipelineConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    bank: BankConfig = field(default_factory=BankConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    osd: OsdConfig = field(default_factory=OsdConfig)
    dmsnet: DmsNetConfig = field(default_factory=DmsNetConfig)
    language: LanguageConfig = field(default_factory=LanguageConfig)

    def validate(self) -> 'PipelineConfig':
        """Check every value against the range its module accepts"""
        try:
            self.geometry.build()
        except GeometryError as e:
            raise ConfigError(f"[geometry] {e}")
        checks = [
            (self.bank.n_directions >= 1, "bank.n_directions must be >= 1"),
            (self.bank.n_taps >= 8 and self.bank.n_taps % 2 == 0, "bank.n_taps must be even and >= 8"),
            (self.bank.loading is None or self.bank.loading >= 0, "bank.loading must be >= 0"),
            (self.windows.length > 0, "windows.length must be positive"),
            (0 < self.windows.shift <= self.windows.length, "windows.shift must be in (0, length]"),
            (0.0 <= self.fusion.a <= 1.0, "fusion.a must be in [0, 1]"),
            (self.fusion.embedding_kind in EMBEDDING_KINDS, f"fusion.embedding_kind must be one of {EMBEDDING_KINDS}"),
            (self.clustering.max_speakers >= 1, "clustering.max_speakers must be >= 1"),
            (self.clustering.max_p is None or self.clustering.max_p >= 1, "clustering.max_p must be >= 1"),
            (0.0 <= self.osd.threshold <= 1.0, "osd.threshold must be in [0, 1]"),
            (self.osd.variant.upper() in VARIANTS, f"osd.variant must be one of {', '.join(VARIANTS)}"),
            (self.osd.epochs >= 0 and self.osd.lr >= 0 and self.osd.batch_size >= 1, "invalid osd training values"),
            (self.dmsnet.channels == self.geometry.mic_count, "dmsnet.channels must equal geometry.mic_count"),
            (self.dmsnet.sample_rate == int(self.geometry.sample_rate),
             "dmsnet.sample_rate must equal geometry.sample_rate"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        return self

    def with_seed(self, seed: int) -> 'PipelineConfig':
        """Same config with the clustering and training seeds replaced"""
        return replace(self, clustering=replace(self.clustering, seed=seed),
                       dmsnet=replace(self.dmsnet, seed=seed))

    def model_config(self) -> DmsNetConfig:
        """DMSNet config with the configured variant applied"""
        return self.dmsnet.with_variant(self.osd.variant)

    def fusion_weight(self) -> float:
        """a for the configured embedding kind: x only, s only, or the fused weight"""
        return {'x': 1.0, 's': 0.0}.get(self.fusion.embedding_kind, self.fusion.a)

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: asdict(getattr(self, f.name)) for f in fields(self) if f.name != 'dmsnet'}
        data['dmsnet'] = self.dmsnet.to_dict()
        return data


def _coerce(value: str) -> Any:
    """INI value to a JSON scalar where possible"""
    text = value.strip()
    if text.lower() in ('none', 'null', ''):
        return None
    if text.lower() in ('true', 'yes', 'on'):
        return True
    if text.lower() in ('false', 'no', 'off'):
        return False
    try:
        return json.loads(text)
    except ValueError:
        return text


def _read_overlay(path: str) -> Dict[str, Dict[str, Any]]:
    if path.lower().endswith('.json'):
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {path}: {e}")
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError(f"{path} must contain an object of sections")
        return data
    parser = configparser.ConfigParser()
    try:
        with open(path, 'r', encoding='utf-8') as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse {path}: {e}")
    return {section: {key: _coerce(value) for key, value in parser.items(section)}
            for section in parser.sections()}


def _merge(base: Dict[str, Dict[str, Any]], overlay: Dict[str, Dict[str, Any]], source: str) -> None:
    for section, values in overlay.items():
        if section not in base:
            raise ConfigError(f"Unknown section [{section}] in {source}")
        for key, value in values.items():
            if key not in base[section]:
                raise ConfigError(f"Unknown key '{key}' in section [{section}] of {source}")
            base[section][key] = value


def _defaults() -> Dict[str, Dict[str, Any]]:
    return PipelineConfig().to_dict()


def from_dict(data: Dict[str, Dict[str, Any]]) -> PipelineConfig:
    sections = {
        'geometry': GeometryConfig, 'bank': BankConfig, 'windows': WindowConfig,
        'fusion': FusionConfig, 'clustering': ClusteringConfig, 'osd': OsdConfig,
        'language': LanguageConfig,
    }
    try:
        kwargs = {name: cls(**data[name]) for name, cls in sections.items()}
        kwargs['dmsnet'] = DmsNetConfig.from_dict(data['dmsnet'])
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid configuration value: {e}")
    return PipelineConfig(**kwargs).validate()


def load_config(path: Optional[str] = None, defaults_path: str = DEFAULT_CONFIG_PATH) -> PipelineConfig:
    """Defaults from config.json, then the user file on top"""
    data = _defaults()
    if os.path.exists(defaults_path):
        _merge(data, _read_overlay(defaults_path), defaults_path)
    else:
        debug_print(f"{defaults_path} not found, using built-in defaults", component="main")
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        _merge(data, _read_overlay(path), path)
        debug_print(f"Applied config overlay {path}", component="main")
    return from_dict(data)
