"""A small module system: parameters, buffers, naming and basic layers."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import functional as F
from . import opcount
from .tensor import ShapeError, Tensor, as_tensor, einsum


class Parameter(Tensor):
    """A named leaf tensor that always requires gradients."""

    __slots__ = ()

    def __init__(self, data, name: str | None = None):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """Base class. Parameters, buffers and submodules are discovered from attributes.

    Lists of modules are treated as indexed children. Qualified names are
    assigned by :meth:`assign_names`, which the top-level model calls once
    construction is finished.
    """

    training: bool = True
    qualname: str = ""

    def __init__(self) -> None:
        self._buffers: dict[str, np.ndarray] = {}

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = np.asarray(value, dtype=np.float64)

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    # -- traversal -------------------------------------------------------
    def _children(self) -> Iterator[tuple[str, "Module"]]:
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{key}.{i}", item

    def named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for key, child in self._children():
            yield from child.named_modules(f"{prefix}.{key}" if prefix else key)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for mod_name, mod in self.named_modules(prefix):
            for key, value in vars(mod).items():
                if isinstance(value, Parameter):
                    yield (f"{mod_name}.{key}" if mod_name else key), value

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        for mod_name, mod in self.named_modules():
            for key, value in mod._buffers.items():
                yield (f"{mod_name}.{key}" if mod_name else key), value

    def assign_names(self) -> "Module":
        for name, mod in self.named_modules():
            mod.qualname = name or type(self).__name__
        for name, p in self.named_parameters():
            p.name = name
        return self

    # -- state -------------------------------------------------------------
    def train(self, mode: bool = True) -> "Module":
        for _, mod in self.named_modules():
            mod.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> list[str]:
        """Copy matching entries in place; returns the names that were not found in ``state``."""
        missing = []
        own = dict(self.named_parameters())
        bufs = dict(self.named_buffers())
        for name, p in own.items():
            if name in state:
                if state[name].shape != p.shape:
                    raise ShapeError(f"{name}: checkpoint shape {state[name].shape} != {p.shape}")
                p.data[...] = state[name]
            else:
                missing.append(name)
        for name, b in bufs.items():
            if name in state:
                b[...] = state[name]
            else:
                missing.append(name)
        if strict:
            unexpected = sorted(set(state) - set(own) - set(bufs))
            if missing or unexpected:
                raise KeyError(f"state mismatch: missing={missing}, unexpected={unexpected}")
        return missing

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class Identity(Module):
    def forward(self, x):
        return x


def _fold(x: Tensor) -> tuple[Tensor, tuple[int, ...] | None]:
    if x.ndim == 5:
        t, b = x.shape[:2]
        return x.reshape(t * b, *x.shape[2:]), (t, b)
    if x.ndim != 4:
        raise ShapeError(f"expected rank-4 or rank-5 input, got {x.shape}")
    return x, None


def _unfold(y: Tensor, lead: tuple[int, ...] | None) -> Tensor:
    return y if lead is None else y.reshape(*lead, *y.shape[1:])


class Conv2d(Module):
    """Bias-free 2-D convolution over (N, C, H, W) or time-major (T, B, C, H, W) input.

    ``spike_driven`` marks the layer for SOP-based energy accounting.
    """

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        kernel_size: int = 3,
        stride: int = 1,
        padding: int | None = None,
        *,
        rng: np.random.Generator,
        spike_driven: bool = True,
        zero_init: bool = False,
    ):
        super().__init__()
        self.in_ch, self.out_ch = in_ch, out_ch
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        self.spike_driven = spike_driven
        shape = (out_ch, in_ch, kernel_size, kernel_size)
        if zero_init:
            w = np.zeros(shape)
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / (in_ch * kernel_size * kernel_size)), size=shape)
        self.weight = Parameter(w)

    def forward(self, x: Tensor) -> Tensor:
        x, lead = _fold(as_tensor(x))
        y = F.conv2d(x, self.weight, self.stride, self.padding)
        counter = opcount.active()
        if counter is not None:
            macs = y.size * self.in_ch * self.weight.shape[2] * self.weight.shape[3]
            counter.add_layer(self.qualname, macs, x.data, self.spike_driven)
        return _unfold(y, lead)


class BatchNorm2d(Module):
    """Batch norm with statistics over every axis except channels (time included)."""

    def __init__(self, channels: int):
        super().__init__()
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.register_buffer("running_mean", np.zeros(channels))
        self.register_buffer("running_var", np.ones(channels))

    def forward(self, x: Tensor) -> Tensor:
        x, lead = _fold(as_tensor(x))
        y = F.batch_norm(
            x, self.gamma, self.beta, self._buffers["running_mean"], self._buffers["running_var"], self.training
        )
        return _unfold(y, lead)


class PointwiseLinear(Module):
    """Affine map over the channel axis (third from last), i.e. a 1x1 convolution."""

    def __init__(self, in_ch: int, out_ch: int, *, rng: np.random.Generator, spike_driven: bool = True):
        super().__init__()
        self.in_ch, self.out_ch = in_ch, out_ch
        self.spike_driven = spike_driven
        self.weight = Parameter(rng.normal(0.0, np.sqrt(2.0 / in_ch), size=(out_ch, in_ch)))
        self.bias = Parameter(np.zeros(out_ch))

    def forward(self, x: Tensor) -> Tensor:
        y = einsum("oc,...chw->...ohw", self.weight, x)
        counter = opcount.active()
        if counter is not None:
            counter.add_layer(self.qualname, y.size * self.in_ch, as_tensor(x).data, self.spike_driven)
        return y + self.bias.reshape(self.out_ch, 1, 1)


class Linear(Module):
    """Affine map over the last axis. Used by the small gating MLPs."""

    def __init__(self, in_f: int, out_f: int, *, rng: np.random.Generator, std: float | None = None):
        super().__init__()
        self.in_f, self.out_f = in_f, out_f
        std = np.sqrt(2.0 / in_f) if std is None else std
        self.weight = Parameter(rng.normal(0.0, std, size=(out_f, in_f)))
        self.bias = Parameter(np.zeros(out_f))

    def forward(self, x: Tensor) -> Tensor:
        y = einsum("...i,oi->...o", x, self.weight)
        counter = opcount.active()
        if counter is not None:
            counter.add_layer(self.qualname, y.size * self.in_f, as_tensor(x).data, False)
        return y + self.bias
