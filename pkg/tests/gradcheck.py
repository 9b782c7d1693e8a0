"""Central finite-difference checks for spiking graphs.

Spike functions are piecewise constant, so the checks run under
``exact_spike_gradients`` and drop any sample whose +/- perturbation
changes a spike anywhere in the network (the loss is not differentiable
there).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spikederain import opcount
from spikederain.neurons import exact_spike_gradients
from spikederain.tensor import relative_error

EPS = 1e-5
FLOOR = 1e-6  # absolute scale below which errors are measured absolutely


@dataclass
class GradReport:
    worst: float = 0.0
    checked: int = 0
    skipped: int = 0
    where: str = ""


def _signature(build):
    with opcount.counting(keep_spikes=True) as c:
        value = build().item()
    return value, c.spike_signature()


def _same(a, b) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def check_gradients(build, tensors: dict, samples: int = 4, seed: int = 0, eps: float = EPS) -> GradReport:
    """``build()`` returns a scalar Tensor; ``tensors`` maps names to leaf Tensors."""
    rng = np.random.default_rng(seed)
    rep = GradReport()
    with exact_spike_gradients():
        for t in tensors.values():
            t.grad = None
            t.requires_grad = True
        build().backward()
        grads = {k: (np.zeros(t.shape) if t.grad is None else t.grad.copy()) for k, t in tensors.items()}
        _, base = _signature(build)
        for name, t in tensors.items():
            flat = t.data.reshape(-1)
            picks = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
            for k in picks:
                orig = flat[k]
                flat[k] = orig + eps
                fp, sp = _signature(build)
                flat[k] = orig - eps
                fm, sm = _signature(build)
                flat[k] = orig
                if not (_same(sp, base) and _same(sm, base)):
                    rep.skipped += 1
                    continue
                num = (fp - fm) / (2 * eps)
                err = relative_error(num, grads[name].reshape(-1)[k], floor=FLOOR)
                rep.checked += 1
                if err > rep.worst:
                    rep.worst, rep.where = err, f"{name}[{k}]: analytic {grads[name].reshape(-1)[k]:.6g} numeric {num:.6g}"
    return rep


def weighted_sum(out, seed: int = 99):
    """Scalar probe ``mean(out * w)`` with fixed random weights."""
    w = np.random.default_rng(seed).normal(size=out.shape)
    return (out * w).mean()
