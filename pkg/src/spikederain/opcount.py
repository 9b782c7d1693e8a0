"""Per-forward tallies of layer MACs, input firing rates and neuron evaluations.

Layers and neurons report into the active :class:`OpCounter` (if any) during
a forward pass. ``analysis.energy`` turns the tallies into an energy report.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np


@dataclass
class LayerRecord:
    layer_name: str
    mac_count: int
    spike_driven: bool
    fired: int
    total: int

    @property
    def firing_rate(self) -> Fraction:
        """Nonzero fraction of the layer's input, measured on this forward."""
        return Fraction(self.fired, self.total) if self.total else Fraction(0)


@dataclass
class NeuronRecord:
    layer_name: str
    sign_ops: int
    fired: int
    spikes: np.ndarray | None = None

    @property
    def firing_rate(self) -> Fraction:
        return Fraction(self.fired, self.sign_ops) if self.sign_ops else Fraction(0)


@dataclass
class OpCounter:
    """Collects records while active. ``keep_spikes`` also stores spike arrays."""

    keep_spikes: bool = False
    layers: list[LayerRecord] = field(default_factory=list)
    neurons: list[NeuronRecord] = field(default_factory=list)

    def add_layer(self, name: str, macs: int, x: np.ndarray, spike_driven: bool) -> None:
        self.layers.append(LayerRecord(name, int(macs), spike_driven, int(np.count_nonzero(x)), int(x.size)))

    def add_neuron(self, name: str, spikes: np.ndarray) -> None:
        self.neurons.append(
            NeuronRecord(
                name,
                int(spikes.size),
                int(np.count_nonzero(spikes)),
                spikes.copy() if self.keep_spikes else None,
            )
        )

    def spike_signature(self) -> list[np.ndarray]:
        return [r.spikes for r in self.neurons if r.spikes is not None]


_ACTIVE: list[OpCounter] = []


def active() -> OpCounter | None:
    return _ACTIVE[-1] if _ACTIVE else None


@contextlib.contextmanager
def counting(keep_spikes: bool = False) -> Iterator[OpCounter]:
    counter = OpCounter(keep_spikes=keep_spikes)
    _ACTIVE.append(counter)
    try:
        yield counter
    finally:
        _ACTIVE.pop()
