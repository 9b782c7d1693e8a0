"""Visual LIF: spatial patches become extra pseudo-timesteps of an NI-LIF neuron.

Pipeline: ``patch_to_time`` -> NI-LIF scan over ``T * r^2`` steps ->
temporal attention -> compression back to ``T`` steps, either with a
per-channel temporal kernel (``CompressT``) or a pointwise MLP over the
flattened pseudo-steps (``CompressC``). Output resolution is ``H/r x W/r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .neurons import NeuronConfig, quantized_scan
from .nn import Linear, Module, Parameter, PointwiseLinear
from . import opcount
from .tensor import ShapeError, Tensor, as_tensor, einsum


@dataclass(frozen=True)
class VlifConfig:
    r: int = 2
    neuron: NeuronConfig = field(default_factory=NeuronConfig)
    compression: Literal["temporal", "channel"] = "channel"
    patch_order: Literal["row_major", "column_major"] = "row_major"

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"r must be a positive integer, got {self.r}")
        if self.compression not in ("temporal", "channel"):
            raise ValueError(f"unknown compression {self.compression!r}")
        if self.patch_order not in ("row_major", "column_major"):
            raise ValueError(f"unknown patch order {self.patch_order!r}")


def patch_to_time(x, cfg: VlifConfig) -> Tensor:
    """(T, ..., H, W) -> (T*r^2, ..., H/r, W/r).

    Patch position (i, j) becomes pseudo-step ``i*r + j`` (row-major) of
    each original timestep. A pure reshape/permute, so exactly invertible.
    """
    x = as_tensor(x)
    r = cfg.r
    t, *mid, h, w = x.shape
    if h % r or w % r:
        raise ShapeError(f"spatial dims {h}x{w} not divisible by r={r}")
    if r == 1:
        return x
    k = len(mid)
    y = x.reshape(t, *mid, h // r, r, w // r, r)
    i_ax, j_ax = k + 2, k + 4
    first, second = (i_ax, j_ax) if cfg.patch_order == "row_major" else (j_ax, i_ax)
    perm = (0, first, second, *range(1, k + 1), k + 1, k + 3)
    return y.transpose(perm).reshape(t * r * r, *mid, h // r, w // r)


def time_to_patch(x, cfg: VlifConfig) -> Tensor:
    """Inverse of :func:`patch_to_time`."""
    x = as_tensor(x)
    r = cfg.r
    steps, *mid, h, w = x.shape
    if steps % (r * r):
        raise ShapeError(f"leading extent {steps} not divisible by r^2={r * r}")
    if r == 1:
        return x
    t, k = steps // (r * r), len(mid)
    y = x.reshape(t, r, r, *mid, h, w)
    # axes now: 0=t, 1=first, 2=second, 3..k+2=mid, k+3=h, k+4=w
    if cfg.patch_order == "row_major":
        i_ax, j_ax = 1, 2
    else:
        i_ax, j_ax = 2, 1
    perm = (0, *range(3, k + 3), k + 3, i_ax, k + 4, j_ax)
    return y.transpose(perm).reshape(t, *mid, h * r, w * r)


def vlif_integrate(x, cfg: VlifConfig, name: str = "vlif") -> tuple[Tensor, np.ndarray]:
    """NI-LIF scan over the pseudo-temporal axis with membrane carried across steps.

    Returns the spike train and the accumulation map ``F = sum_t U_t``.
    """
    spikes, us = quantized_scan(x, cfg.neuron, normalize=True, name=name)
    return spikes, us.sum(axis=0)


GATE_BIAS_INIT = 3.0


class Gate(Module):
    """Squeeze-excitation bottleneck: FC -> ReLU -> FC -> sigmoid over one axis of length ``n``.

    ``frozen`` pins the gate output to exactly 1. The output bias starts at
    ``GATE_BIAS_INIT`` so a fresh gate passes about 95% of its input; with
    a zero bias every gate would halve the signal and stacked gates would
    push spiking layers below threshold.
    """

    def __init__(self, n: int, *, rng: np.random.Generator, reduction: int = 4):
        super().__init__()
        hidden = max(1, n // reduction)
        self.fc1 = Linear(n, hidden, rng=rng)
        self.fc2 = Linear(hidden, n, rng=rng)
        self.fc2.bias.data[:] = GATE_BIAS_INIT
        self.frozen = False

    def forward(self, z: Tensor) -> Tensor:
        return self.fc2(self.fc1(z).relu()).sigmoid()


class TemporalAttention(Module):
    """Gates each pseudo-step of a (L, [B,] C, h, w) spike train by a learned weight in (0, 1)."""

    def __init__(self, steps: int, *, rng: np.random.Generator, reduction: int = 4):
        super().__init__()
        self.steps = steps
        self.gate = Gate(steps, rng=rng, reduction=reduction)

    def forward(self, s: Tensor) -> Tensor:
        s = as_tensor(s)
        if s.shape[0] != self.steps:
            raise ShapeError(f"expected {self.steps} pseudo-steps, got {s.shape[0]}")
        if self.gate.frozen:
            return s
        pooled = s.mean(axis=(-3, -2, -1))  # (L,) or (L, B)
        if pooled.ndim == 1:
            g = self.gate(pooled).reshape(self.steps, 1, 1, 1)
        else:
            g = self.gate(pooled.transpose(1, 0)).transpose(1, 0)
            g = g.reshape(*g.shape, 1, 1, 1)
        return s * g


def temporal_attention(spikes, attn: TemporalAttention) -> Tensor:
    return attn(spikes)


def _split_steps(s: Tensor, r2: int) -> Tensor:
    steps = s.shape[0]
    if steps % r2:
        raise ShapeError(f"leading extent {steps} not divisible by r^2={r2}")
    return s.reshape(steps // r2, r2, *s.shape[1:])


class CompressT(Module):
    """Temporal compression: each output step is a per-channel weighted sum of its r^2 pseudo-steps.

    The kernel starts at all ones, so the output initially counts spike
    mass per patch (range ``[0, r^2]``) and a downstream threshold of 1 is
    reachable. An averaging kernel would cap it at 1.
    """

    def __init__(self, channels: int, r: int):
        super().__init__()
        self.r2 = r * r
        self.channels = channels
        self.weight = Parameter(np.ones((channels, self.r2)))
        self.bias = Parameter(np.zeros(channels))

    def forward(self, s: Tensor) -> Tensor:
        s5 = _split_steps(as_tensor(s), self.r2)
        y = einsum("tk...chw,ck->t...chw", s5, self.weight)
        counter = opcount.active()
        if counter is not None:
            counter.add_layer(self.qualname, y.size * self.r2, s5.data, True)
        return y + self.bias.reshape(self.channels, 1, 1)


class CompressC(Module):
    """Channel compression: flatten the r^2 pseudo-steps into channels, then a 2-layer pointwise MLP."""

    def __init__(self, channels: int, r: int, *, rng: np.random.Generator):
        super().__init__()
        self.r2 = r * r
        self.fc1 = PointwiseLinear(self.r2 * channels, channels, rng=rng)
        self.fc2 = PointwiseLinear(channels, channels, rng=rng, spike_driven=False)

    def forward(self, s: Tensor) -> Tensor:
        s5 = _split_steps(as_tensor(s), self.r2)  # (T, r2, [B,] C, h, w)
        nd = s5.ndim
        if nd == 6:
            s5 = s5.transpose(0, 2, 1, 3, 4, 5)
        t, *rest = s5.shape
        flat = s5.reshape(t, *rest[:-4], rest[-4] * rest[-3], *rest[-2:])
        return self.fc2(self.fc1(flat).relu())


class VLIF(Module):
    """The full VLIF neuron for a ``T x C`` feature stream."""

    def __init__(self, channels: int, timesteps: int, cfg: VlifConfig, *, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.channels = channels
        self.timesteps = timesteps
        self.attention = TemporalAttention(timesteps * cfg.r * cfg.r, rng=rng)
        if cfg.compression == "temporal":
            self.compress = CompressT(channels, cfg.r)
        else:
            self.compress = CompressC(channels, cfg.r, rng=rng)
        self.last_f_map: np.ndarray | None = None

    def spikes(self, x: Tensor) -> Tensor:
        spikes, f_map = vlif_integrate(patch_to_time(x, self.cfg), self.cfg, name=f"{self.qualname}.neuron")
        self.last_f_map = f_map
        return spikes

    def forward(self, x: Tensor) -> Tensor:
        return self.compress(self.attention(self.spikes(x)))


def vlif_forward(x, vlif: VLIF) -> Tensor:
    return vlif(x)
