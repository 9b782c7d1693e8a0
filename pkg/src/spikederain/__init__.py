"""Spiking neural networks for image deraining, built on a small numpy autodiff core."""

from .blocks import MDA, SDEM, SMU, SpikingUnit, TemporalEmbedding
from .config import ConfigError, RunConfig, load_run_config
from .data import ImagePair, RainSpec, gen_rain, load_image, make_synthetic_pairs, save_image
from .network import DerainNet, NetworkConfig, charbonnier_loss
from .neurons import NeuronConfig, NeuronState, ilif_step, lif_step, nilif_step
from .tensor import ShapeError, Tensor, no_grad
from .train import TrainConfig, evaluate, load_network, save_network, train
from .vlif import VLIF, VlifConfig, patch_to_time, time_to_patch, vlif_integrate

__version__ = "0.1.0"

__all__ = [
    "MDA",
    "SDEM",
    "SMU",
    "VLIF",
    "ConfigError",
    "DerainNet",
    "ImagePair",
    "NetworkConfig",
    "NeuronConfig",
    "NeuronState",
    "RainSpec",
    "RunConfig",
    "ShapeError",
    "SpikingUnit",
    "Tensor",
    "TemporalEmbedding",
    "TrainConfig",
    "VlifConfig",
    "charbonnier_loss",
    "evaluate",
    "gen_rain",
    "ilif_step",
    "lif_step",
    "load_image",
    "load_network",
    "load_run_config",
    "make_synthetic_pairs",
    "nilif_step",
    "no_grad",
    "patch_to_time",
    "save_image",
    "save_network",
    "time_to_patch",
    "train",
    "vlif_integrate",
]
