"""Spectra, activation statistics, energy accounting and image metrics."""

from .activation import ActivationReport, decay_matrix, decay_matrix_experiment
from .energy import EnergyReport, energy_from_counter, energy_profile
from .metrics import psnr, ssim
from .spectrum import SaturationReport, SpectrumReport, saturation_experiment, spectrum

__all__ = [
    "ActivationReport",
    "EnergyReport",
    "SaturationReport",
    "SpectrumReport",
    "decay_matrix",
    "decay_matrix_experiment",
    "energy_from_counter",
    "energy_profile",
    "psnr",
    "saturation_experiment",
    "spectrum",
    "ssim",
]
