"""The deraining U-Net.

Direct-coded input -> 3x3 stem -> temporal embedding -> encoder (SMU at
full resolution, strided conv + SDEM below) -> decoder (bilinear upsample,
concatenate skip, 1x1 fuse, SDEM / SMU) -> refinement SDEMs -> temporal mean
-> 3x3 head predicting a rain residual. Output is ``clamp(rainy - residual)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .blocks import MDA, SDEM, SMU, Indicator, SpikingUnit, TemporalEmbedding
from .functional import bilinear_resize
from .neurons import NeuronConfig
from .nn import BatchNorm2d, Conv2d, Identity, Module
from .tensor import ShapeError, Tensor, as_tensor, concat
from .vlif import VlifConfig

NeuronVariant = Literal["hybrid", "lif", "ilif", "vlif_c", "vlif_t"]

# (SDEM second-stage indicator, SMU downsampler) per neuron variant
VARIANTS: dict[str, tuple[Indicator, Indicator]] = {
    "hybrid": ("vlif_c", "vlif_t"),
    "lif": ("lif", "lif"),
    "ilif": ("ilif", "ilif"),
    "vlif_c": ("vlif_c", "vlif_c"),
    "vlif_t": ("vlif_t", "vlif_t"),
}


@dataclass(frozen=True)
class NetworkConfig:
    timesteps: int = 4
    base_channels: int = 16
    scales: int = 3
    channel_multipliers: tuple[int, ...] = (1, 2, 4)
    r: int = 2
    refine_blocks: int = 4
    neuron: NeuronConfig = field(default_factory=NeuronConfig)
    patch_order: Literal["row_major", "column_major"] = "row_major"
    neuron_variant: NeuronVariant = "hybrid"
    use_temb: bool = True
    use_smu: bool = True
    use_sdem: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channel_multipliers", tuple(self.channel_multipliers))
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        if self.scales < 2:
            raise ValueError("scales must be >= 2")
        if len(self.channel_multipliers) != self.scales:
            raise ValueError("need one channel multiplier per scale")
        if self.neuron_variant not in VARIANTS:
            raise ValueError(f"unknown neuron variant {self.neuron_variant!r}")
        if self.refine_blocks < 0 or self.base_channels < 1 or self.r < 1:
            raise ValueError("refine_blocks >= 0, base_channels >= 1 and r >= 1 required")

    @property
    def size_multiple(self) -> int:
        """Input H and W must be divisible by this."""
        return 2 ** (self.scales - 1) * self.r

    def channels(self, scale: int) -> int:
        return self.base_channels * self.channel_multipliers[scale]

    def vlif_config(self) -> VlifConfig:
        return VlifConfig(r=self.r, neuron=self.neuron, patch_order=self.patch_order)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channel_multipliers"] = list(self.channel_multipliers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        if isinstance(d.get("neuron"), dict):
            d["neuron"] = NeuronConfig(**d["neuron"])
        return cls(**d)


def direct_encode(images, timesteps: int) -> Tensor:
    """Replicate (B, 3, H, W) images over ``timesteps``: -> (T, B, 3, H, W)."""
    x = as_tensor(images)
    if x.ndim != 4:
        raise ShapeError(f"expected (B, C, H, W) images, got {x.shape}")
    if x.size and (x.data.min() < 0.0 or x.data.max() > 1.0 or not np.all(np.isfinite(x.data))):
        raise ValueError("input pixels must lie in [0, 1]")
    # broadcasting add keeps the graph, so gradients reach the input image
    return x.reshape(1, *x.shape) + np.zeros((timesteps, 1, 1, 1, 1))


class Downsample(Module):
    def __init__(self, in_ch: int, out_ch: int, *, rng: np.random.Generator):
        super().__init__()
        self.conv = Conv2d(in_ch, out_ch, 3, stride=2, rng=rng)
        self.bn = BatchNorm2d(out_ch)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(self.conv(x))


class Fuse(Module):
    def __init__(self, in_ch: int, out_ch: int, *, rng: np.random.Generator):
        super().__init__()
        self.conv = Conv2d(in_ch, out_ch, 1, rng=rng)
        self.bn = BatchNorm2d(out_ch)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(self.conv(x))


class DerainNet(Module):
    def __init__(self, cfg: NetworkConfig = NetworkConfig()):
        super().__init__()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        t = cfg.timesteps
        stage2, down_kind = VARIANTS[cfg.neuron_variant]
        vcfg = cfg.vlif_config()

        def block(scale: int, top: bool) -> Module:
            c = cfg.channels(scale)
            if top and cfg.use_smu:
                return SMU(t, c, cfg.neuron, vcfg, rng=rng, sdem_stage2=stage2, downsample=down_kind)
            if cfg.use_sdem:
                return SDEM(t, c, cfg.neuron, vcfg, rng=rng, stage2=stage2)
            return SpikingUnit(t, c, cfg.neuron, rng=rng)

        c0 = cfg.channels(0)
        self.stem = Conv2d(3, c0, 3, rng=rng, spike_driven=False)
        self.temb = TemporalEmbedding(t, c0) if cfg.use_temb else Identity()
        self.encoder = [block(0, True)]
        self.down = []
        for s in range(1, cfg.scales):
            self.down.append(Downsample(cfg.channels(s - 1), cfg.channels(s), rng=rng))
            self.encoder.append(block(s, False))
        self.fuse = []
        self.decoder = []
        for s in range(cfg.scales - 2, -1, -1):
            self.fuse.append(Fuse(cfg.channels(s + 1) + cfg.channels(s), cfg.channels(s), rng=rng))
            self.decoder.append(block(s, s == 0))
        self.refine = [block(0, False) for _ in range(cfg.refine_blocks)]
        self.head = Conv2d(c0, 3, 3, rng=rng, spike_driven=False, zero_init=True)
        self.last_residual: Tensor | None = None
        self.assign_names()

    def check_input(self, shape: tuple[int, ...]) -> None:
        m = self.cfg.size_multiple
        if len(shape) != 4 or shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W) input, got {shape}")
        if shape[2] % m or shape[3] % m:
            raise ShapeError(f"input H, W must be divisible by {m}, got {shape[2]}x{shape[3]}")

    def encode_input(self, rainy) -> Tensor:
        """Direct coding followed by the stem and temporal embedding: (T, B, C0, H, W)."""
        x = direct_encode(rainy, self.cfg.timesteps)
        return self.temb(self.stem(x))

    def features(self, rainy) -> Tensor:
        h = self.encode_input(rainy)
        h = self.encoder[0](h)
        skips = [h]
        for down, enc in zip(self.down, self.encoder[1:]):
            h = enc(down(h))
            skips.append(h)
        for fuse, dec, skip in zip(self.fuse, self.decoder, reversed(skips[:-1])):
            up = bilinear_resize(h, *skip.shape[-2:])
            h = dec(fuse(concat([up, skip], axis=2)))
        for blk in self.refine:
            h = blk(h)
        return h

    def forward(self, rainy) -> Tensor:
        """(B, 3, H, W) rainy images in [0, 1] -> derained images, same shape."""
        rainy = as_tensor(rainy)
        self.check_input(rainy.shape)
        residual = self.head(self.features(rainy).mean(axis=0))
        self.last_residual = residual
        return (rainy - residual).clamp(0.0, 1.0)

    def topology(self) -> list[dict]:
        """Block layout for checkpoint manifests."""
        out = []
        for name, mod in self.named_modules():
            if isinstance(mod, (SMU, SDEM, SpikingUnit, MDA, Downsample, Fuse, TemporalEmbedding)) or name in ("stem", "head"):
                out.append({"name": name, "type": type(mod).__name__})
        return out


def charbonnier_loss(pred: Tensor, target, eps: float = 1e-3) -> Tensor:
    """Mean of ``sqrt((pred - target)^2 + eps^2)``."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target
    return (diff * diff + eps * eps).sqrt().mean()
