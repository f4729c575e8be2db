"""DMSNet overlapped speech detector.

Multichannel raw audio goes through a shared SincNet front-end per channel,
an attention block that weights and combines the channels (SE block plus a
1x1 combining convolution), a Conformer or Bi-LSTM encoder and a two-class
frame classifier. The SDB-SincNet extraction instead beamforms the channels
towards look direction 0 and runs a single-channel front-end.

Parameters are kept outside the torch module as an ordered name -> tensor
mapping (`DmsNetParams`), so forward, backward and training are functions of
(params, config, data). Everything runs in float64 on the CPU.
"""

import json
import math
import struct
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from array_model import ArrayGeometry
from errors import ConfigError, CorruptHeader, LengthMismatch, NonFiniteLoss, ShapeMismatch
from models import MultichannelAudio, OverlapLabels, OverlapPosterior, Timeline
from sdb_designer import realize_fir
from utils import atomic_write, debug_print

PROB_CLAMP = 1e-7
MIN_REGION = 0.1
MIN_GAP = 0.1

CHECKPOINT_MAGIC = b"DMSN"
CHECKPOINT_VERSION = 1


class Extraction(Enum):
    ASDB = "asdb"
    SDB_SINCNET = "sdb_sincnet"


class EncoderKind(Enum):
    CONFORMER = "conformer"
    BILSTM = "bilstm"


# Ablation variants: (feature extraction, encoder)
VARIANTS = {
    "M1": (Extraction.SDB_SINCNET, EncoderKind.BILSTM),
    "M2": (Extraction.SDB_SINCNET, EncoderKind.CONFORMER),
    "M3": (Extraction.ASDB, EncoderKind.BILSTM),
    "M4": (Extraction.ASDB, EncoderKind.CONFORMER),
}


@dataclass(frozen=True)
class DmsNetConfig:
    channels: int = 8
    sample_rate: int = 16000
    chunk_len: float = 2.0
    sinc_filters: int = 60
    sinc_kernel: int = 251
    sinc_stride: int = 10
    pool_sizes: Tuple[int, ...] = (3,)
    se_reduction: int = 4
    extraction: Extraction = Extraction.ASDB
    encoder: EncoderKind = EncoderKind.CONFORMER
    conformer_layers: int = 2
    d_model: int = 64
    heads: int = 4
    ff_dim: int = 128
    conv_kernel: int = 15
    lstm_layers: int = 2
    lstm_hidden: int = 128
    fc1_dim: int = 128
    min_low_hz: float = 50.0
    min_band_hz: float = 50.0
    dropout: float = 0.0
    array_radius: float = 0.05
    sound_speed: float = 343.0
    sdb_taps: int = 128
    sdb_loading: Optional[float] = None
    seed: int = 0
    num_threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'pool_sizes', tuple(int(p) for p in self.pool_sizes))
        object.__setattr__(self, 'extraction', Extraction(self.extraction))
        object.__setattr__(self, 'encoder', EncoderKind(self.encoder))
        if self.channels < 1 or self.sinc_filters < 1:
            raise ConfigError("channels and sinc_filters must be >= 1", component="osd")
        if self.sinc_kernel % 2 == 0 or self.sinc_kernel < 3:
            raise ConfigError(f"sinc_kernel must be odd and >= 3, got {self.sinc_kernel}", component="osd")
        if self.conv_kernel % 2 == 0:
            raise ConfigError(f"conv_kernel must be odd, got {self.conv_kernel}", component="osd")
        if self.d_model % self.heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.heads} heads", component="osd")
        if self.se_reduction < 1:
            raise ConfigError("se_reduction must be >= 1", component="osd")
        if self.chunk_samples < self.sinc_kernel:
            raise ConfigError("Chunk is shorter than the sinc kernel", component="osd")
        if output_frames(self) < 1:
            raise ConfigError("Configuration yields no output frames", component="osd")

    @property
    def chunk_samples(self) -> int:
        return int(round(self.chunk_len * self.sample_rate))

    @property
    def se_hidden(self) -> int:
        return max(self.channels // self.se_reduction, 1)

    @property
    def variant(self) -> Optional[str]:
        return next((name for name, pair in VARIANTS.items() if pair == (self.extraction, self.encoder)), None)

    def with_variant(self, name: str) -> 'DmsNetConfig':
        try:
            extraction, encoder = VARIANTS[name.upper()]
        except KeyError:
            raise ConfigError(f"Unknown variant {name}; choose one of {', '.join(VARIANTS)}", component="osd")
        return replace(self, extraction=extraction, encoder=encoder)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['extraction'] = self.extraction.value
        data['encoder'] = self.encoder.value
        data['pool_sizes'] = list(self.pool_sizes)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'DmsNetConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown dmsnet keys: {', '.join(sorted(unknown))}", component="osd")
        return cls(**data)


def output_frames(config: DmsNetConfig) -> int:
    """Frames T per chunk: strided sinc convolution followed by the max-pools"""
    frames = (config.chunk_samples - config.sinc_kernel) // config.sinc_stride + 1
    for pool in config.pool_sizes:
        frames //= pool
    return frames


def frame_rate(config: DmsNetConfig) -> float:
    return output_frames(config) / config.chunk_len


# ---------------------------------------------------------------- modules

def _to_mel(hz):
    return 2595 * np.log10(1 + hz / 700)


def _to_hz(mel):
    return 700 * (10 ** (mel / 2595) - 1)


class SincConv(nn.Module):
    """Band-pass sinc filters with learnable low cut-off and bandwidth.

    Band edges are low = min_low + |low_hz_| and high = low + min_band + |band_hz_|,
    initialized on the mel scale. low stops 2 min_band and high stops min_band below
    Nyquist, so 0 < low < high < Nyquist holds for any parameter values.
    """

    def __init__(self, n_filters: int, kernel_size: int, stride: int, sample_rate: int,
                 min_low_hz: float = 50.0, min_band_hz: float = 50.0):
        super().__init__()
        self.kernel_size = kernel_size
        self.stride = stride
        self.sample_rate = sample_rate
        self.min_low_hz = min_low_hz
        self.min_band_hz = min_band_hz

        high_hz = sample_rate / 2 - (min_low_hz + min_band_hz)
        hz = _to_hz(np.linspace(_to_mel(30.0), _to_mel(high_hz), n_filters + 1))
        self.low_hz_ = nn.Parameter(torch.tensor(hz[:-1], dtype=torch.float64).view(-1, 1))
        self.band_hz_ = nn.Parameter(torch.tensor(np.diff(hz), dtype=torch.float64).view(-1, 1))

        half = kernel_size // 2
        n_lin = torch.linspace(0, half - 1, steps=half, dtype=torch.float64)
        self.register_buffer('window_', 0.54 - 0.46 * torch.cos(2 * math.pi * n_lin / kernel_size),
                             persistent=False)
        n = 2 * math.pi * torch.arange(-half, 0, dtype=torch.float64).view(1, -1) / sample_rate
        self.register_buffer('n_', n, persistent=False)

    def band_edges(self) -> Tuple[Tensor, Tensor]:
        nyquist = self.sample_rate / 2
        low = torch.clamp(self.min_low_hz + torch.abs(self.low_hz_), max=nyquist - 2 * self.min_band_hz)
        high = torch.clamp(low + self.min_band_hz + torch.abs(self.band_hz_), max=nyquist - self.min_band_hz)
        return low, high

    def filters(self) -> Tensor:
        low, high = self.band_edges()
        band = (high - low)[:, 0]
        left = (torch.sin(high @ self.n_) - torch.sin(low @ self.n_)) / (self.n_ / 2) * self.window_
        center = 2 * band.view(-1, 1)
        band_pass = torch.cat([left, center, torch.flip(left, dims=[1])], dim=1)
        band_pass = band_pass / (2 * band[:, None])
        return band_pass.view(-1, 1, self.kernel_size)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.filters(), stride=self.stride)


class SincFrontEnd(nn.Module):
    """sinc-conv -> abs -> max-pool -> instance norm, applied to every channel"""

    def __init__(self, config: DmsNetConfig):
        super().__init__()
        self.sinc = SincConv(config.sinc_filters, config.sinc_kernel, config.sinc_stride, config.sample_rate,
                             config.min_low_hz, config.min_band_hz)
        self.pool_sizes = config.pool_sizes
        self.norm = nn.InstanceNorm1d(config.sinc_filters)

    def forward(self, x: Tensor) -> Tensor:
        """(B, C, L) -> (B, C, F, T)"""
        batch, channels, length = x.shape
        y = torch.abs(self.sinc(x.reshape(batch * channels, 1, length)))
        for pool in self.pool_sizes:
            y = F.max_pool1d(y, pool)
        y = self.norm(y)
        return y.view(batch, channels, y.shape[1], y.shape[2])


class SEBlock(nn.Module):
    """Squeeze-and-excitation over microphone channels"""

    def __init__(self, channels: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def forward(self, features: Tensor) -> Tensor:
        """(B, C, F, T) -> channel weights (B, C) in (0, 1)"""
        squeezed = features.mean(dim=(2, 3))
        return torch.sigmoid(self.fc2(torch.relu(self.fc1(squeezed))))


class ASDB(nn.Module):
    """Channel attention followed by a 1x1 convolution combining C channels into one"""

    def __init__(self, config: DmsNetConfig):
        super().__init__()
        self.se = SEBlock(config.channels, config.se_hidden)
        self.combine_conv = nn.Conv2d(config.channels, 1, kernel_size=1)

    def combine(self, features: Tensor, weights: Tensor) -> Tensor:
        """(B, C, F, T) scaled by (B, C) weights -> (B, T, F)"""
        scaled = features * weights[:, :, None, None]
        return self.combine_conv(scaled)[:, 0].transpose(1, 2)

    def forward(self, features: Tensor, weights: Optional[Tensor] = None) -> Tensor:
        if weights is None:
            weights = self.se(features)
        return self.combine(features, weights)


class FixedBeamformer(nn.Module):
    """Causal FIR filter-and-sum towards look direction 0"""

    def __init__(self, config: DmsNetConfig):
        super().__init__()
        geom = ArrayGeometry(mic_count=config.channels, radius=config.array_radius,
                             sample_rate=float(config.sample_rate), sound_speed=config.sound_speed)
        taps = realize_fir(geom, 0.0, config.sdb_taps, config.sdb_loading)
        weight = torch.tensor(np.ascontiguousarray(taps[:, ::-1]), dtype=torch.float64)[None]
        self.register_buffer('weight', weight, persistent=False)
        self.pad = config.sdb_taps - 1

    def forward(self, x: Tensor) -> Tensor:
        """(B, C, L) -> (B, 1, L)"""
        return F.conv1d(F.pad(x, (self.pad, 0)), self.weight)


def sinusoidal_encoding(length: int, dim: int) -> Tensor:
    position = torch.arange(length, dtype=torch.float64)[:, None]
    div = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    pe = torch.zeros(length, dim, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(position * div)
    pe[:, 1::2] = torch.cos(position * div)[:, :dim // 2]
    return pe


class FeedForward(nn.Module):
    def __init__(self, dim: int, hidden: int, dropout: float):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.linear1 = nn.Linear(dim, hidden)
        self.linear2 = nn.Linear(hidden, dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: Tensor) -> Tensor:
        x = self.dropout(F.silu(self.linear1(self.norm(x))))
        return self.dropout(self.linear2(x))


class ConvModule(nn.Module):
    """Pointwise conv + GLU, depthwise conv, layer norm, SiLU, pointwise conv"""

    def __init__(self, dim: int, kernel: int, dropout: float):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.pointwise1 = nn.Conv1d(dim, 2 * dim, 1)
        self.depthwise = nn.Conv1d(dim, dim, kernel, padding=kernel // 2, groups=dim)
        self.depth_norm = nn.LayerNorm(dim)
        self.pointwise2 = nn.Conv1d(dim, dim, 1)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: Tensor) -> Tensor:
        y = F.glu(self.pointwise1(self.norm(x).transpose(1, 2)), dim=1)
        y = self.depthwise(y)
        y = F.silu(self.depth_norm(y.transpose(1, 2))).transpose(1, 2)
        return self.dropout(self.pointwise2(y).transpose(1, 2))


class ConformerBlock(nn.Module):
    def __init__(self, dim: int, heads: int, ff_dim: int, kernel: int, dropout: float):
        super().__init__()
        self.ff1 = FeedForward(dim, ff_dim, dropout)
        self.attn_norm = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, dropout=dropout, batch_first=True)
        self.attn_dropout = nn.Dropout(dropout)
        self.conv = ConvModule(dim, kernel, dropout)
        self.ff2 = FeedForward(dim, ff_dim, dropout)
        self.final_norm = nn.LayerNorm(dim)

    def forward(self, x: Tensor) -> Tensor:
        x = x + 0.5 * self.ff1(x)
        y = self.attn_norm(x)
        x = x + self.attn_dropout(self.attn(y, y, y, need_weights=False)[0])
        x = x + self.conv(x)
        x = x + 0.5 * self.ff2(x)
        return self.final_norm(x)


class ConformerEncoder(nn.Module):
    def __init__(self, config: DmsNetConfig):
        super().__init__()
        self.d_model = config.d_model
        self.input_proj = nn.Linear(config.sinc_filters, config.d_model)
        self.blocks = nn.ModuleList(
            ConformerBlock(config.d_model, config.heads, config.ff_dim, config.conv_kernel, config.dropout)
            for _ in range(config.conformer_layers))

    def forward(self, x: Tensor) -> Tensor:
        x = self.input_proj(x) + sinusoidal_encoding(x.shape[1], self.d_model).to(x.device)
        for block in self.blocks:
            x = block(x)
        return x


class BiLstmEncoder(nn.Module):
    def __init__(self, config: DmsNetConfig):
        super().__init__()
        self.lstm = nn.LSTM(config.sinc_filters, config.lstm_hidden, num_layers=config.lstm_layers,
                            batch_first=True, bidirectional=True,
                            dropout=config.dropout if config.lstm_layers > 1 else 0.0)

    def forward(self, x: Tensor) -> Tensor:
        return self.lstm(x)[0]


class DmsNet(nn.Module):
    def __init__(self, config: DmsNetConfig):
        super().__init__()
        self.config = config
        self.frontend = SincFrontEnd(config)
        # present in both extraction modes so every variant has the same parameter set
        self.asdb = ASDB(config)
        if config.extraction is Extraction.SDB_SINCNET:
            self.beamformer = FixedBeamformer(config)
        if config.encoder is EncoderKind.CONFORMER:
            self.encoder = ConformerEncoder(config)
            enc_dim = config.d_model
        else:
            self.encoder = BiLstmEncoder(config)
            enc_dim = 2 * config.lstm_hidden
        self.fc1 = nn.Linear(enc_dim, config.fc1_dim)
        self.fc2 = nn.Linear(config.fc1_dim, 2)

    def features(self, x: Tensor, channel_weights: Optional[Tensor] = None) -> Tensor:
        """(B, C, L) audio -> (B, T, F) combined features"""
        if self.config.extraction is Extraction.SDB_SINCNET:
            return self.frontend(self.beamformer(x))[:, 0].transpose(1, 2)
        return self.asdb(self.frontend(x), channel_weights)

    def class_probs(self, x: Tensor, channel_weights: Optional[Tensor] = None) -> Tensor:
        """(B, C, L) -> (B, T, 2) softmax output"""
        hidden = torch.tanh(self.fc1(self.encoder(self.features(x, channel_weights))))
        return torch.softmax(self.fc2(hidden), dim=-1)

    def forward(self, x: Tensor, channel_weights: Optional[Tensor] = None) -> Tensor:
        return self.class_probs(x, channel_weights)[..., 1]


# ---------------------------------------------------------------- params

@dataclass
class DmsNetParams:
    """Ordered float64 parameter tensors plus the per-epoch training loss"""
    tensors: "OrderedDict[str, Tensor]"
    loss_trace: List[float] = field(default_factory=list)

    def copy(self) -> 'DmsNetParams':
        return DmsNetParams(OrderedDict((k, v.detach().clone()) for k, v in self.tensors.items()),
                            list(self.loss_trace))

    def names(self) -> List[str]:
        return list(self.tensors)

    def equals(self, other: 'DmsNetParams') -> bool:
        return self.names() == other.names() and all(
            torch.equal(self.tensors[k], other.tensors[k]) for k in self.tensors)


def build_model(config: DmsNetConfig) -> DmsNet:
    torch.set_num_threads(config.num_threads)
    return DmsNet(config).double()


def init_params(config: DmsNetConfig) -> DmsNetParams:
    """Seeded initial parameters"""
    torch.manual_seed(config.seed)
    model = build_model(config)
    tensors = OrderedDict((name, p.detach().clone()) for name, p in model.named_parameters())
    debug_print(f"Initialized DMSNet {config.variant or ''} with {sum(t.numel() for t in tensors.values())} "
                f"parameters, T={output_frames(config)}", component="osd")
    return DmsNetParams(tensors)


def _load(model: DmsNet, params: DmsNetParams) -> None:
    own = dict(model.named_parameters())
    if set(own) != set(params.tensors):
        raise ShapeMismatch("Parameter names do not match the configuration", component="osd")
    with torch.no_grad():
        for name, p in own.items():
            if p.shape != params.tensors[name].shape:
                raise ShapeMismatch(f"Parameter {name} has shape {tuple(params.tensors[name].shape)}, "
                                    f"expected {tuple(p.shape)}", component="osd")
            p.copy_(params.tensors[name])


def _model_with(params: DmsNetParams, config: DmsNetConfig) -> DmsNet:
    model = build_model(config)
    _load(model, params)
    model.eval()
    return model


AudioLike = Union[MultichannelAudio, np.ndarray]


def _chunk_tensor(chunk: AudioLike, config: DmsNetConfig) -> Tensor:
    """L x C audio -> (1, C, L) tensor"""
    samples = chunk.samples if isinstance(chunk, MultichannelAudio) else np.asarray(chunk, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape != (config.chunk_samples, config.channels):
        raise ShapeMismatch(f"Chunk shape {samples.shape} does not match "
                            f"({config.chunk_samples}, {config.channels})", component="osd")
    return torch.from_numpy(np.ascontiguousarray(samples.T, dtype=np.float64))[None]


def _label_tensor(labels) -> Tensor:
    frames = labels.frames if isinstance(labels, OverlapLabels) else labels
    return torch.as_tensor(np.asarray(frames, dtype=np.float64))


def _bce(probs: Tensor, labels: Tensor) -> Tensor:
    if probs.shape[-1] != labels.shape[-1]:
        raise LengthMismatch(f"{probs.shape[-1]} posteriors for {labels.shape[-1]} labels")
    p = torch.clamp(probs, PROB_CLAMP, 1 - PROB_CLAMP)
    return -(labels * torch.log(p) + (1 - labels) * torch.log(1 - p)).mean()


# ---------------------------------------------------------------- operations

def forward(params: DmsNetParams, config: DmsNetConfig, chunk: AudioLike) -> OverlapPosterior:
    """Overlap posterior for one chunk"""
    model = _model_with(params, config)
    with torch.no_grad():
        probs = model(_chunk_tensor(chunk, config))[0]
    return OverlapPosterior(probs=probs.numpy().copy(), frame_rate=frame_rate(config))


def bce_loss(posterior: Union[OverlapPosterior, np.ndarray], labels: Union[OverlapLabels, np.ndarray]) -> float:
    """Mean binary cross entropy, probabilities clamped to [1e-7, 1 - 1e-7]"""
    probs = posterior.probs if isinstance(posterior, OverlapPosterior) else posterior
    return float(_bce(torch.as_tensor(np.asarray(probs, dtype=np.float64)), _label_tensor(labels)))


def backward(params: DmsNetParams, config: DmsNetConfig, chunk: AudioLike,
             labels: Union[OverlapLabels, np.ndarray]) -> "OrderedDict[str, Tensor]":
    """Gradient of bce_loss(forward(...), labels) for every parameter tensor.

    Parameters that do not take part in the configured variant get zeros.
    """
    model = _model_with(params, config)
    loss = _bce(model(_chunk_tensor(chunk, config))[0], _label_tensor(labels))
    model.zero_grad(set_to_none=True)
    loss.backward()
    return OrderedDict((name, p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
                       for name, p in model.named_parameters())


def train(config: DmsNetConfig, dataset: Iterable[Tuple[AudioLike, OverlapLabels]], epochs: int, lr: float,
          params: Optional[DmsNetParams] = None, batch_size: int = 8) -> DmsNetParams:
    """Adam training with a seeded shuffle; returns new params with the loss trace"""
    items = list(dataset)
    if not items:
        raise ValueError("Training dataset is empty")
    if epochs < 0 or lr < 0 or batch_size < 1:
        raise ValueError(f"Invalid training settings: epochs={epochs}, lr={lr}, batch_size={batch_size}")
    params = init_params(config) if params is None else params
    torch.manual_seed(config.seed)
    model = build_model(config)
    _load(model, params)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr, betas=(0.9, 0.999), eps=1e-8)
    rng = np.random.default_rng(config.seed)

    audio = torch.cat([_chunk_tensor(chunk, config) for chunk, _ in items])
    labels = torch.stack([_label_tensor(lab) for _, lab in items])
    if labels.shape[-1] != output_frames(config):
        raise LengthMismatch(f"Labels have {labels.shape[-1]} frames, model outputs {output_frames(config)}")

    loss_trace = list(params.loss_trace)
    for epoch in range(epochs):
        order = rng.permutation(len(items))
        total = 0.0
        for step, start in enumerate(range(0, len(order), batch_size)):
            batch = torch.as_tensor(order[start:start + batch_size])
            optimizer.zero_grad(set_to_none=True)
            loss = _bce(model(audio[batch]), labels[batch])
            if not torch.isfinite(loss):
                raise NonFiniteLoss("Training loss is not finite", epoch=epoch, step=step)
            loss.backward()
            optimizer.step()
            total += float(loss) * len(batch)
        loss_trace.append(total / len(items))
        debug_print(f"Epoch {epoch + 1}/{epochs}: loss {loss_trace[-1]:.5f}", component="osd")

    tensors = OrderedDict((name, p.detach().clone()) for name, p in model.named_parameters())
    return DmsNetParams(tensors, loss_trace)


def chunk_posteriors(params: DmsNetParams, config: DmsNetConfig, audio: MultichannelAudio,
                     batch_size: int = 16) -> OverlapPosterior:
    """Posteriors over a whole recording from half-overlapping chunks.

    Frames covered by two chunks get the average; the last chunk is zero-padded.
    """
    if audio.channels != config.channels:
        raise ShapeMismatch(f"Audio has {audio.channels} channels, model expects {config.channels}",
                            component="osd")
    chunk = config.chunk_samples
    hop = max(chunk // 2, 1)
    n_out = output_frames(config)
    starts = [0]
    while starts[-1] + chunk < audio.length:
        starts.append(starts[-1] + hop)
    offsets = [int(round(s * n_out / chunk)) for s in starts]

    total_frames = offsets[-1] + n_out
    sums = np.zeros(total_frames)
    counts = np.zeros(total_frames)
    model = _model_with(params, config)
    with torch.no_grad():
        for b in range(0, len(starts), batch_size):
            batch = np.stack([audio.slice(s, s + chunk).T for s in starts[b:b + batch_size]])
            probs = model(torch.from_numpy(batch)).numpy()
            for offset, row in zip(offsets[b:b + batch_size], probs):
                sums[offset:offset + n_out] += row
                counts[offset:offset + n_out] += 1
    n_frames = min(int(math.ceil(audio.length * n_out / chunk)), total_frames)
    return OverlapPosterior(probs=sums[:n_frames] / counts[:n_frames], frame_rate=frame_rate(config))


def clean_timeline(timeline: Timeline, min_gap: float = MIN_GAP, min_duration: float = MIN_REGION) -> Timeline:
    """Close gaps shorter than min_gap, then drop regions shorter than min_duration"""
    return timeline.fill_gaps(min_gap).drop_short(min_duration)


def posteriors_to_timeline(posterior: OverlapPosterior, threshold: float = 0.5,
                           duration: Optional[float] = None) -> Timeline:
    frames = np.asarray(posterior.probs) >= threshold
    timeline = clean_timeline(OverlapLabels(frames.astype(np.int8), posterior.frame_rate).to_timeline())
    if duration is not None:
        timeline = timeline.clip(0.0, duration)
    return timeline


def detect_overlap(params: DmsNetParams, config: DmsNetConfig, audio: MultichannelAudio,
                   threshold: float = 0.5) -> Timeline:
    """Overlap regions of a recording"""
    posterior = chunk_posteriors(params, config, audio)
    timeline = posteriors_to_timeline(posterior, threshold, audio.duration)
    debug_print(f"Detected {len(timeline)} overlap regions ({timeline.duration:.2f} s) "
                f"at threshold {threshold}", component="osd")
    return timeline


# ---------------------------------------------------------------- checkpoint

def save_checkpoint(params: DmsNetParams, config: DmsNetConfig, path: str) -> None:
    """DMSN header, JSON metadata, then (name, shape, float64 data) per tensor"""
    meta = json.dumps({"config": config.to_dict(), "loss_trace": params.loss_trace},
                      sort_keys=True).encode('utf-8')
    parts = [CHECKPOINT_MAGIC, struct.pack('<II', CHECKPOINT_VERSION, len(meta)), meta,
             struct.pack('<I', len(params.tensors))]
    for name, tensor in params.tensors.items():
        encoded = name.encode('utf-8')
        shape = tuple(tensor.shape)
        parts.append(struct.pack('<I', len(encoded)) + encoded)
        parts.append(struct.pack(f'<I{len(shape)}I', len(shape), *shape))
        parts.append(np.ascontiguousarray(tensor.detach().numpy(), dtype='<f8').tobytes())
    atomic_write(path, b''.join(parts))
    debug_print(f"Saved checkpoint with {len(params.tensors)} tensors to {path}", component="osd")


def load_checkpoint(path: str) -> Tuple[DmsNetParams, DmsNetConfig]:
    with open(path, 'rb') as f:
        data = f.read()
    try:
        if data[:4] != CHECKPOINT_MAGIC:
            raise CorruptHeader(f"{path} is not a DMSNet checkpoint", component="osd")
        version, meta_len = struct.unpack_from('<II', data, 4)
        if version != CHECKPOINT_VERSION:
            raise CorruptHeader(f"Unsupported checkpoint version {version}", component="osd")
        offset = 12
        meta = json.loads(data[offset:offset + meta_len].decode('utf-8'))
        offset += meta_len
        (count,) = struct.unpack_from('<I', data, offset)
        offset += 4
        tensors = OrderedDict()
        for _ in range(count):
            (name_len,) = struct.unpack_from('<I', data, offset)
            offset += 4
            name = data[offset:offset + name_len].decode('utf-8')
            offset += name_len
            (ndim,) = struct.unpack_from('<I', data, offset)
            offset += 4
            shape = struct.unpack_from(f'<{ndim}I', data, offset)
            offset += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            values = np.frombuffer(data, dtype='<f8', count=size, offset=offset).astype(np.float64)
            offset += 8 * size
            tensors[name] = torch.from_numpy(values.reshape(shape))
        if offset != len(data):
            raise CorruptHeader(f"{len(data) - offset} trailing bytes in {path}", component="osd")
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        if isinstance(e, CorruptHeader):
            raise
        raise CorruptHeader(f"Damaged checkpoint {path}: {e}", component="osd")
    config = DmsNetConfig.from_dict(meta["config"])
    return DmsNetParams(tensors, list(meta.get("loss_trace", []))), config

