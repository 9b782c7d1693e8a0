"""LIF, I-LIF and NI-LIF neurons.

Step functions (``lif_step`` etc.) are the plain forward recurrences on
arrays. The ``*_scan`` functions run a whole time-major sequence as a single
autodiff node and back-propagate through time with surrogate gradients.

Time is always the leading axis.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from . import opcount
from .tensor import ShapeError, Tensor, as_tensor

Reset = Literal["subtract", "zero"]

_SURROGATE_ON = True


@contextlib.contextmanager
def exact_spike_gradients() -> Iterator[None]:
    """Use the true (almost-everywhere zero) derivative of spike functions.

    Inside this block every network is piecewise smooth with exact
    gradients, which is what finite-difference checks need.
    """
    global _SURROGATE_ON
    prev = _SURROGATE_ON
    _SURROGATE_ON = False
    try:
        yield
    finally:
        _SURROGATE_ON = prev


@dataclass(frozen=True)
class NeuronConfig:
    theta: float = 1.0
    beta: float = 0.5
    d_max: int = 4
    reset: Reset = "subtract"
    surrogate_width: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if int(self.d_max) != self.d_max or self.d_max < 1:
            raise ValueError(f"d_max must be a positive integer, got {self.d_max}")
        if self.reset not in ("subtract", "zero"):
            raise ValueError(f"unknown reset rule {self.reset!r}")
        if not self.surrogate_width > 0:
            raise ValueError("surrogate_width must be positive")


@dataclass
class NeuronState:
    """Membrane memory ``H`` per position, zero at sequence start."""

    h: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, shape) -> "NeuronState":
        return cls(np.zeros(shape))


def _check(x_t, state: NeuronState) -> np.ndarray:
    x = np.asarray(x_t.data if isinstance(x_t, Tensor) else x_t, dtype=np.float64)
    if x.shape != state.h.shape:
        raise ShapeError(f"input shape {x.shape} != state shape {state.h.shape}")
    return x


def _lif_fire(u: np.ndarray, cfg: NeuronConfig) -> tuple[np.ndarray, np.ndarray]:
    s = (u >= cfg.theta).astype(np.float64)
    if cfg.reset == "subtract":
        h = cfg.beta * (u - s * cfg.theta)
    else:
        h = cfg.beta * u * (1.0 - s)
    return s, h


def _quantize(u: np.ndarray, cfg: NeuronConfig) -> tuple[np.ndarray, np.ndarray]:
    q = np.clip(np.round(u), 0, cfg.d_max)
    return q, cfg.beta * (u - q)


def lif_step(x_t, state: NeuronState, cfg: NeuronConfig) -> tuple[np.ndarray, NeuronState]:
    """One binary LIF update: integrate, fire at ``U >= theta``, reset and leak."""
    u = state.h + _check(x_t, state)
    s, h = _lif_fire(u, cfg)
    return s, NeuronState(h)


def nilif_step(x_t, state: NeuronState, cfg: NeuronConfig) -> tuple[np.ndarray, NeuronState]:
    """One NI-LIF update; spikes are multiples of ``1/D`` in ``[0, 1]``."""
    u = state.h + _check(x_t, state)
    q, h = _quantize(u, cfg)
    return q / cfg.d_max, NeuronState(h)


def ilif_step(x_t, state: NeuronState, cfg: NeuronConfig) -> tuple[np.ndarray, NeuronState]:
    """One I-LIF update; spikes are integers in ``{0, ..., D}``."""
    u = state.h + _check(x_t, state)
    q, h = _quantize(u, cfg)
    return q, NeuronState(h)


def surrogate_grad(u, cfg: NeuronConfig) -> np.ndarray:
    """Rectangular surrogate for d(spike)/dU: ``1/(2w)`` on ``|U - theta| < w``."""
    u = np.asarray(u.data if isinstance(u, Tensor) else u, dtype=np.float64)
    w = cfg.surrogate_width
    return (np.abs(u - cfg.theta) < w) / (2.0 * w)


def straight_through_grad(u, cfg: NeuronConfig) -> np.ndarray:
    """Straight-through derivative of ``clip(round(U), 0, D)``: 1 on ``[0, D]``."""
    u = np.asarray(u.data if isinstance(u, Tensor) else u, dtype=np.float64)
    return ((u >= 0) & (u <= cfg.d_max)).astype(np.float64)


# -- differentiable scans ------------------------------------------------------

def lif_scan(x: Tensor, cfg: NeuronConfig, name: str = "lif") -> Tensor:
    """Binary LIF over the leading time axis, starting from zero state."""
    x = as_tensor(x)
    steps = x.shape[0]
    h = np.zeros(x.shape[1:])
    us = np.empty(x.shape)
    spikes = np.empty(x.shape)
    for t in range(steps):
        u = h + x.data[t]
        s, h = _lif_fire(u, cfg)
        us[t], spikes[t] = u, s
    counter = opcount.active()
    if counter is not None:
        counter.add_neuron(name, spikes)
    surrogate = _SURROGATE_ON

    def backward(g):
        gx = np.empty_like(g)
        gh = np.zeros(x.shape[1:])
        for t in range(steps - 1, -1, -1):
            u = us[t]
            sg = surrogate_grad(u, cfg) if surrogate else 0.0
            if cfg.reset == "subtract":
                dh_du = cfg.beta * (1.0 - cfg.theta * sg)
            else:
                dh_du = cfg.beta * (1.0 - spikes[t]) - cfg.beta * u * sg
            gu = g[t] * sg + gh * dh_du
            gx[t] = gu
            gh = gu
        return (gx,)

    return Tensor._node(spikes, (x,), backward)


def quantized_scan(
    x: Tensor, cfg: NeuronConfig, normalize: bool = True, name: str = "nilif"
) -> tuple[Tensor, np.ndarray]:
    """NI-LIF (``normalize=True``) or I-LIF over the leading time axis.

    Returns the spike train and the membrane potentials ``U`` of every step.
    """
    x = as_tensor(x)
    steps = x.shape[0]
    d = float(cfg.d_max)
    h = np.zeros(x.shape[1:])
    us = np.empty(x.shape)
    spikes = np.empty(x.shape)
    for t in range(steps):
        u = h + x.data[t]
        q, h = _quantize(u, cfg)
        us[t] = u
        spikes[t] = q / d if normalize else q
    counter = opcount.active()
    if counter is not None:
        counter.add_neuron(name, spikes)
    surrogate = _SURROGATE_ON
    scale = 1.0 / d if normalize else 1.0

    def backward(g):
        gx = np.empty_like(g)
        gh = np.zeros(x.shape[1:])
        for t in range(steps - 1, -1, -1):
            ste = straight_through_grad(us[t], cfg) if surrogate else 0.0
            gu = g[t] * (ste * scale) + gh * (cfg.beta * (1.0 - ste))
            gx[t] = gu
            gh = gu
        return (gx,)

    return Tensor._node(spikes, (x,), backward), us


# -- high-frequency indicator ---------------------------------------------------

def lif_map(x, cfg: NeuronConfig) -> np.ndarray:
    """Single-step, zero-state binary LIF applied elementwise: ``1[x >= theta]``."""
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    s, _ = lif_step(x, NeuronState.zeros(x.shape), cfg)
    return s


def lif_power(x, t: int, cfg: NeuronConfig, mode: Literal["mask", "temporal"] = "mask") -> np.ndarray:
    """``f^t(x)``.

    ``mask`` re-applies a fresh single-step LIF to its own output ``t`` times.
    ``temporal`` instead feeds ``x`` to one neuron for ``t`` steps and returns
    the spikes of the last step.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if mode == "mask":
        m = x
        for _ in range(t):
            m = lif_map(m, cfg)
        return m
    if mode == "temporal":
        state = NeuronState.zeros(x.shape)
        for _ in range(t):
            s, state = lif_step(x, state, cfg)
        return s
    raise ValueError(f"unknown mode {mode!r}")


def hf_indicator_norm(x, t_applications: int, cfg: NeuronConfig, mode: Literal["mask", "temporal"] = "mask") -> float:
    """L2 norm of ``x * f^t(x)``."""
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    return float(np.linalg.norm((x * lif_power(x, t_applications, cfg, mode)).ravel()))
