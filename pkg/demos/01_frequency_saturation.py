"""
A spiking neuron as a high-frequency detector
=============================================

A LIF neuron driven by a feature map fires only where the map is bright.
Rain streaks are thin and bright, so the spike mask picks them out and
drops the smooth background. Re-applying the mask changes nothing.
"""

import numpy as np

from spikederain.analysis.spectrum import saturation_experiment, spectrum, streak_feature_map
from spikederain.neurons import NeuronConfig, lif_map

# a smooth grey scene with a few bright streaks laid on top
x = streak_feature_map(64, seed=3)
print("feature map range: %.3f .. %.3f" % (x.min(), x.max()))

# one LIF step with threshold 1 marks the pixels above the threshold
mask = lif_map(x, NeuronConfig(theta=1.0))
print("pixels that fire: %.2f%%" % (100 * mask.mean()))

# the masked map keeps much less of its energy near zero frequency
before = spectrum(x).low_fraction
after = spectrum(x * mask).low_fraction
print("low-frequency energy fraction: %.3f unmasked, %.3f masked" % (before, after))

# masking again with the same neuron gives the same map, bit for bit
rep = saturation_experiment(x, t_max=5)
for t, norm in zip(rep.t_values, rep.norms):
    print("t=%d  ||x * f^t(x)|| = %.15g" % (t, norm))
print("saturated:", rep.saturated)
