"""Decay-matrix activation study: how many pixels fire under LIF vs VLIF."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..neurons import NeuronConfig, NeuronState, lif_step
from ..vlif import VlifConfig, patch_to_time, time_to_patch, vlif_integrate

LOW_BUCKET = (0.002, 0.114)


def decay_matrix(n: int, sigma: float = 2.0) -> np.ndarray:
    """``M[i, j] = 0.9 * exp(-|i - j| / sigma)``; the diagonal is exactly 0.9."""
    if n < 1 or not sigma > 0:
        raise ValueError("need n >= 1 and sigma > 0")
    k = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    m = 0.9 * np.exp(-k / sigma)
    np.fill_diagonal(m, 0.9)
    return m


@dataclass
class BucketRate:
    lo: float
    hi: float
    count: int
    lif_rate: float
    vlif_rate: float


@dataclass
class ActivationReport:
    n: int
    sigma: float
    timesteps: int
    lif_rate: float
    vlif_rate: float
    low_bucket: BucketRate
    buckets: list[BucketRate] = field(default_factory=list)
    lif_fired: np.ndarray | None = field(default=None, repr=False)
    vlif_fired: np.ndarray | None = field(default=None, repr=False)

    @property
    def ratio(self) -> float:
        """VLIF / LIF activation fraction; ``inf`` when only VLIF fires."""
        if self.lif_rate > 0:
            return self.vlif_rate / self.lif_rate
        return math.inf if self.vlif_rate > 0 else math.nan

    def to_dict(self) -> dict:
        def b(x: BucketRate) -> dict:
            return {"lo": x.lo, "hi": x.hi, "count": x.count, "lif_rate": x.lif_rate, "vlif_rate": x.vlif_rate}

        ratio = self.ratio
        return {
            "n": self.n,
            "sigma": self.sigma,
            "timesteps": self.timesteps,
            "lif_rate": self.lif_rate,
            "vlif_rate": self.vlif_rate,
            # JSON has no infinity; None stands for "LIF silent"
            "ratio": ratio if math.isfinite(ratio) else None,
            "low_bucket": b(self.low_bucket),
            "buckets": [b(x) for x in self.buckets],
        }

    def to_text(self) -> str:
        lines = [
            f"decay matrix n={self.n} sigma={self.sigma} T={self.timesteps}",
            f"LIF  activation {self.lif_rate:8.4%}",
            f"VLIF activation {self.vlif_rate:8.4%}   ratio {self.ratio:.3f}",
            f"{'bucket':>20} {'count':>6} {'LIF':>8} {'VLIF':>8}",
        ]
        for x in [self.low_bucket, *self.buckets]:
            lines.append(f"[{x.lo:.4f}, {x.hi:.4f}] {x.count:6d} {x.lif_rate:8.2%} {x.vlif_rate:8.2%}")
        return "\n".join(lines)


def lif_fired(x: np.ndarray, timesteps: int, cfg: NeuronConfig) -> np.ndarray:
    """Per-pixel "fired at least once" under plain LIF driven by ``x`` for ``timesteps`` steps."""
    state = NeuronState.zeros(x.shape)
    fired = np.zeros(x.shape, dtype=bool)
    for _ in range(timesteps):
        s, state = lif_step(x, state, cfg)
        fired |= s != 0
    return fired


def vlif_fired(x: np.ndarray, timesteps: int, cfg: VlifConfig) -> np.ndarray:
    """Per-pixel "fired at least once" under VLIF (patch-to-time + NI-LIF scan)."""
    seq = np.broadcast_to(x, (timesteps, 1, *x.shape))
    spikes, _ = vlif_integrate(patch_to_time(seq, cfg), cfg)
    back = time_to_patch(spikes, cfg).data  # (T, 1, n, n)
    return np.any(back != 0, axis=(0, 1))


def _bucket(values, lif, vlif, lo, hi) -> BucketRate:
    sel = (values >= lo) & (values <= hi)
    count = int(sel.sum())
    return BucketRate(
        float(lo),
        float(hi),
        count,
        float(lif[sel].mean()) if count else 0.0,
        float(vlif[sel].mean()) if count else 0.0,
    )


def decay_matrix_experiment(
    n: int = 64,
    cfg_lif: NeuronConfig = NeuronConfig(),
    cfg_vlif: VlifConfig = VlifConfig(),
    sigma: float = 2.0,
    timesteps: int = 1,
    low_bucket: tuple[float, float] = LOW_BUCKET,
    n_buckets: int = 8,
) -> ActivationReport:
    """Run single-step LIF and full VLIF on the decay matrix and compare firing.

    A pixel counts as activated if it emits a nonzero spike at any step.
    ``buckets`` split ``[min, max]`` of the matrix into ``n_buckets`` equal bins.
    """
    if n % cfg_vlif.r:
        raise ValueError(f"n={n} must be divisible by r={cfg_vlif.r}")
    m = decay_matrix(n, sigma)
    lif = lif_fired(m, timesteps, cfg_lif)
    vlif = vlif_fired(m, timesteps, cfg_vlif)
    edges = np.linspace(m.min(), m.max(), n_buckets + 1)
    return ActivationReport(
        n=n,
        sigma=sigma,
        timesteps=timesteps,
        lif_rate=float(lif.mean()),
        vlif_rate=float(vlif.mean()),
        low_bucket=_bucket(m, lif, vlif, *low_bucket),
        buckets=[_bucket(m, lif, vlif, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])],
        lif_fired=lif,
        vlif_fired=vlif,
    )
