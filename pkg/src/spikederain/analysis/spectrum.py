"""Frequency content of feature maps and the LIF saturation experiment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..data import RainSpec, rain_layer, synthetic_clean
from ..neurons import NeuronConfig, lif_power
from ..tensor import ShapeError, Tensor


@dataclass
class SpectrumReport:
    magnitude: np.ndarray = field(repr=False)  # |DFT|, zero frequency centred
    low_energy: float
    high_energy: float
    cutoff: float

    @property
    def total_energy(self) -> float:
        return self.low_energy + self.high_energy

    @property
    def low_fraction(self) -> float:
        total = self.total_energy
        return self.low_energy / total if total > 0 else 0.0


def _mean_map(x) -> np.ndarray:
    a = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if a.ndim < 2:
        raise ShapeError("spectrum needs at least two axes")
    if a.ndim > 2:
        a = a.reshape(-1, *a.shape[-2:]).mean(axis=0)
    if min(a.shape) < 2:
        raise ShapeError(f"spectrum needs H, W >= 2, got {a.shape}")
    return a


def radial_distance(h: int, w: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return np.hypot(yy - h // 2, xx - w // 2)


def spectrum(x, cutoff: float | None = None) -> SpectrumReport:
    """2-D DFT of the mean over all leading axes, split at a radial cutoff (default ``min(H, W)/4``).

    Energies are sums of squared DFT magnitudes, so
    ``total_energy / (H*W)`` equals the spatial sum of squares.
    """
    m = _mean_map(x)
    h, w = m.shape
    cutoff = min(h, w) / 4.0 if cutoff is None else float(cutoff)
    f = np.fft.fftshift(np.fft.fft2(m))
    power = f.real**2 + f.imag**2
    low = radial_distance(h, w) <= cutoff
    return SpectrumReport(
        magnitude=np.abs(f),
        low_energy=float(power[low].sum()),
        high_energy=float(power[~low].sum()),
        cutoff=cutoff,
    )


def spectrum_heatmap(report: SpectrumReport) -> np.ndarray:
    """Log-magnitude scaled to [0, 1], for dumping as a PGM."""
    lm = np.log1p(report.magnitude)
    span = lm.max() - lm.min()
    return (lm - lm.min()) / span if span > 0 else np.zeros_like(lm)


@dataclass
class SaturationReport:
    t_values: list[int]
    norms: list[float]
    means: list[float]
    low_fraction_input: float
    low_fraction_masked: list[float]
    spectra: list[SpectrumReport] = field(repr=False)
    input_spectrum: SpectrumReport = field(repr=False)

    @property
    def saturated(self) -> bool:
        """True when every ``t >= 1`` gives exactly the ``t = 1`` norm."""
        return all(n == self.norms[0] for n in self.norms)

    def to_dict(self) -> dict:
        return {
            "t": self.t_values,
            "norms": self.norms,
            "means": self.means,
            "saturated": self.saturated,
            "low_fraction_input": self.low_fraction_input,
            "low_fraction_masked": self.low_fraction_masked,
        }


def saturation_experiment(
    x, t_max: int, cfg: NeuronConfig = NeuronConfig(), mode: Literal["mask", "temporal"] = "mask"
) -> SaturationReport:
    """``||x * f^t(x)||`` and the spectrum of ``x * f^t(x)`` for ``t = 1..t_max``.

    In ``mask`` mode with ``theta <= 1`` the binary mask is idempotent, so
    the norms must agree exactly; a mismatch raises ``AssertionError``.
    """
    if t_max < 2:
        raise ValueError("t_max must be >= 2")
    a = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    ts = list(range(1, t_max + 1))
    masked = [a * lif_power(a, t, cfg, mode) for t in ts]
    spectra = [spectrum(m) for m in masked]
    inp = spectrum(a)
    report = SaturationReport(
        t_values=ts,
        norms=[float(np.linalg.norm(m.ravel())) for m in masked],
        means=[float(m.mean()) for m in masked],
        low_fraction_input=inp.low_fraction,
        low_fraction_masked=[s.low_fraction for s in spectra],
        spectra=spectra,
        input_spectrum=inp,
    )
    if mode == "mask" and cfg.theta <= 1.0 and not report.saturated:
        raise AssertionError(f"mask saturation violated: {report.norms}")
    return report


def streak_feature_map(n: int = 64, seed: int = 0, streak_gain: float = 1.0) -> np.ndarray:
    """A grey smooth background (below 1) with bright rain streaks that cross 1."""
    rng = np.random.default_rng(seed)
    background = synthetic_clean(n, n, rng).mean(axis=2)
    rain = rain_layer((n, n), RainSpec(streak_count=max(4, n // 4), length_px=n / 4, intensity=1.0, gaussian_blur_sigma=0.0, seed=seed))
    return background + streak_gain * rain
