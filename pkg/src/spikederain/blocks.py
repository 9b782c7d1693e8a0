"""Network blocks on time-major (T, B, C, H, W) features.

- ``MDA``: temporal, channel and spatial squeeze-excitation gates in sequence.
- ``SpikingUnit``: LIF -> BN -> conv -> MDA.
- ``SDEMStage`` / ``SDEM``: spike-masked high/low-frequency decomposition
  with conv-BN refinement, a conv-BN shortcut and MDA fusion.
- ``SMU``: SDEM, VLIF-T spatial downsampling, two spiking units, bilinear
  upsampling, residual bypass and MDA.
- ``TemporalEmbedding``: a learned per-(t, c) offset.
"""

from __future__ import annotations

from typing import Literal

import numpy as np

from .functional import avg_pool, bilinear_resize
from .neurons import NeuronConfig, lif_scan, quantized_scan
from .nn import BatchNorm2d, Conv2d, Module, Parameter
from .tensor import ShapeError, Tensor, as_tensor
from .vlif import GATE_BIAS_INIT, VLIF, Gate, VlifConfig

Indicator = Literal["lif", "ilif", "vlif_c", "vlif_t"]


def _require_rank5(x: Tensor) -> None:
    if x.ndim != 5:
        raise ShapeError(f"blocks expect (T, B, C, H, W) input, got shape {x.shape}")


class SpatialGate(Module):
    def __init__(self, *, rng: np.random.Generator, hidden: int = 2):
        super().__init__()
        self.conv1 = Conv2d(1, hidden, 3, rng=rng, spike_driven=False)
        self.conv2 = Conv2d(hidden, 1, 3, rng=rng, spike_driven=False)
        self.bias = Parameter(np.array(GATE_BIAS_INIT))
        self.frozen = False

    def forward(self, pooled: Tensor) -> Tensor:
        return (self.conv2(self.conv1(pooled).relu()) + self.bias).sigmoid()


class MDA(Module):
    """Multi-axis attention: x is reweighted along time, then channels, then space."""

    def __init__(self, timesteps: int, channels: int, *, rng: np.random.Generator, reduction: int = 4):
        super().__init__()
        self.temporal = Gate(timesteps, rng=rng, reduction=reduction)
        self.channel = Gate(channels, rng=rng, reduction=reduction)
        self.spatial = SpatialGate(rng=rng)

    def freeze(self, frozen: bool = True) -> "MDA":
        self.temporal.frozen = self.channel.frozen = self.spatial.frozen = frozen
        return self

    def forward(self, x: Tensor) -> Tensor:
        _require_rank5(x)
        t, b, c, h, w = x.shape
        if not self.temporal.frozen:
            g = self.temporal(x.mean(axis=(2, 3, 4)).transpose(1, 0))  # (B, T)
            x = x * g.transpose(1, 0).reshape(t, b, 1, 1, 1)
        if not self.channel.frozen:
            g = self.channel(x.mean(axis=(0, 3, 4)))  # (B, C)
            x = x * g.reshape(1, b, c, 1, 1)
        if not self.spatial.frozen:
            g = self.spatial(x.mean(axis=(0, 2)).reshape(b, 1, h, w))  # (B, 1, H, W)
            x = x * g.reshape(1, b, 1, h, w)
        return x


def mda(x, module: MDA) -> Tensor:
    return module(x)


class SpikingUnit(Module):
    def __init__(self, timesteps: int, channels: int, neuron: NeuronConfig, *, rng: np.random.Generator):
        super().__init__()
        self.neuron = neuron
        self.bn = BatchNorm2d(channels)
        self.conv = Conv2d(channels, channels, 3, rng=rng)
        self.mda = MDA(timesteps, channels, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        _require_rank5(x)
        s = lif_scan(x, self.neuron, name=f"{self.qualname}.lif")
        return self.mda(self.conv(self.bn(s)))


def spiking_unit(x, unit: SpikingUnit) -> Tensor:
    return unit(x)


class SpikeIndicator(Module):
    """The spiking mask of an SDEM stage, returned at the input resolution."""

    def __init__(
        self,
        kind: Indicator,
        timesteps: int,
        channels: int,
        neuron: NeuronConfig,
        vlif_cfg: VlifConfig,
        *,
        rng: np.random.Generator,
    ):
        super().__init__()
        self.kind = kind
        self.neuron = neuron
        if kind in ("vlif_c", "vlif_t"):
            cfg = VlifConfig(
                r=vlif_cfg.r,
                neuron=vlif_cfg.neuron,
                compression="channel" if kind == "vlif_c" else "temporal",
                patch_order=vlif_cfg.patch_order,
            )
            self.vlif = VLIF(channels, timesteps, cfg, rng=rng)
        elif kind not in ("lif", "ilif"):
            raise ValueError(f"unknown indicator {kind!r}")

    def forward(self, x: Tensor) -> Tensor:
        if self.kind == "lif":
            return lif_scan(x, self.neuron, name=f"{self.qualname}.lif")
        if self.kind == "ilif":
            return quantized_scan(x, self.neuron, normalize=False, name=f"{self.qualname}.ilif")[0]
        h, w = x.shape[-2:]
        return bilinear_resize(self.vlif(x), h, w)


class SDEMStage(Module):
    """One decomposition stage.

    ``forward`` returns ``(refined + shortcut, refined, shortcut)``.
    """

    def __init__(
        self,
        kind: Indicator,
        timesteps: int,
        channels: int,
        neuron: NeuronConfig,
        vlif_cfg: VlifConfig,
        *,
        rng: np.random.Generator,
    ):
        super().__init__()
        self.indicator = SpikeIndicator(kind, timesteps, channels, neuron, vlif_cfg, rng=rng)
        self.alpha = Parameter(np.array(1.0))
        self.beta2 = Parameter(np.array(1.0))
        self.conv_main = Conv2d(channels, channels, 3, rng=rng)
        self.bn_main = BatchNorm2d(channels)
        self.conv_shortcut = Conv2d(channels, channels, 3, rng=rng)
        self.bn_shortcut = BatchNorm2d(channels)

    def decompose(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """High-frequency part ``alpha * mask`` and its complement ``x - x_h``."""
        x_h = self.alpha * self.indicator(x)
        return x_h, x - x_h

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        _require_rank5(x)
        x_h, x_l = self.decompose(x)
        fused = x_h * x + self.beta2 * x_l + x
        refined = self.bn_main(self.conv_main(fused))
        shortcut = self.bn_shortcut(self.conv_shortcut(x))
        return refined + shortcut, refined, shortcut


def sdem_stage(x, stage: SDEMStage) -> tuple[Tensor, Tensor, Tensor]:
    return stage(x)


class SDEM(Module):
    """Two cascaded stages (LIF mask, then a VLIF-C mask by default) plus MDA fusion.

    Output: ``refined' + shortcut + MDA(refined)`` of the second stage, so
    the shortcut enters twice.
    """

    def __init__(
        self,
        timesteps: int,
        channels: int,
        neuron: NeuronConfig,
        vlif_cfg: VlifConfig,
        *,
        rng: np.random.Generator,
        stage2: Indicator = "vlif_c",
        stage1: Indicator = "lif",
    ):
        super().__init__()
        self.stage1 = SDEMStage(stage1, timesteps, channels, neuron, vlif_cfg, rng=rng)
        self.stage2 = SDEMStage(stage2, timesteps, channels, neuron, vlif_cfg, rng=rng)
        self.mda = MDA(timesteps, channels, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        y, _, _ = self.stage1(x)
        fused, refined, shortcut = self.stage2(y)
        return fused + shortcut + self.mda(refined)


def sdem_forward(x, sdem: SDEM) -> Tensor:
    return sdem(x)


class SpikeDownsample(Module):
    """Parameter-free stand-in for VLIF-T in neuron ablations: spike, then ``r x r`` sum pooling.

    Summing matches the all-ones initial VLIF-T kernel.
    """

    def __init__(self, kind: Literal["lif", "ilif"], neuron: NeuronConfig, r: int):
        super().__init__()
        self.kind = kind
        self.neuron = neuron
        self.r = r

    def forward(self, x: Tensor) -> Tensor:
        if self.kind == "lif":
            s = lif_scan(x, self.neuron, name=f"{self.qualname}.lif")
        else:
            s = quantized_scan(x, self.neuron, normalize=False, name=f"{self.qualname}.ilif")[0]
        return avg_pool(s, self.r) * float(self.r * self.r)


class SMU(Module):
    def __init__(
        self,
        timesteps: int,
        channels: int,
        neuron: NeuronConfig,
        vlif_cfg: VlifConfig,
        *,
        rng: np.random.Generator,
        sdem_stage2: Indicator = "vlif_c",
        downsample: Indicator = "vlif_t",
    ):
        super().__init__()
        self.r = vlif_cfg.r
        self.sdem = SDEM(timesteps, channels, neuron, vlif_cfg, rng=rng, stage2=sdem_stage2)
        if downsample in ("vlif_t", "vlif_c"):
            cfg = VlifConfig(
                r=vlif_cfg.r,
                neuron=vlif_cfg.neuron,
                compression="temporal" if downsample == "vlif_t" else "channel",
                patch_order=vlif_cfg.patch_order,
            )
            self.down = VLIF(channels, timesteps, cfg, rng=rng)
        else:
            self.down = SpikeDownsample(downsample, neuron, vlif_cfg.r)
        self.su1 = SpikingUnit(timesteps, channels, neuron, rng=rng)
        self.su2 = SpikingUnit(timesteps, channels, neuron, rng=rng)
        self.mda = MDA(timesteps, channels, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        _require_rank5(x)
        h, w = x.shape[-2:]
        if h % self.r or w % self.r:
            raise ShapeError(f"SMU input {h}x{w} not divisible by r={self.r}")
        y = self.down(self.sdem(x))
        y = self.su2(self.su1(y))
        y = bilinear_resize(y, h, w)
        return self.mda(y + x)


def smu_forward(x, smu: SMU) -> Tensor:
    return smu(x)


class TemporalEmbedding(Module):
    def __init__(self, timesteps: int, channels: int):
        super().__init__()
        self.table = Parameter(np.zeros((timesteps, channels)))

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        t, c = self.table.shape
        if x.shape[0] != t or x.shape[-3] != c:
            raise ShapeError(f"embedding table {self.table.shape} does not match input {x.shape}")
        extra = x.ndim - 3
        return x + self.table.reshape(t, *([1] * (extra - 1)), c, 1, 1)


def temporal_embedding(x, table: TemporalEmbedding) -> Tensor:
    return table(x)
