"""
Where the energy goes
=====================

Analog layers pay per multiply-accumulate, spike-driven layers pay per
incoming spike, and every neuron pays for its threshold comparison.
"""

from fractions import Fraction

import numpy as np

from spikederain.analysis.energy import energy_profile, layer_energy
from spikederain.network import DerainNet, NetworkConfig

# one million MACs with a 20% input firing rate
ops, pj = layer_energy(10**6, spike_driven=True, firing_rate=Fraction(1, 5))
print("%d SOPs -> %.1f nJ" % (ops, pj / 1000))

# the same layer run densely on analog inputs
ops, pj = layer_energy(10**6, spike_driven=False)
print("%d FLOPs -> %.1f nJ" % (ops, pj / 1000))

# a full forward of an untrained network on one 32x32 image
net = DerainNet(NetworkConfig())
sample = np.random.default_rng(0).uniform(0, 1, (1, 3, 32, 32))
report = energy_profile(net, sample)
print(report.to_text())
summary = report.to_dict()
print("MAC %.4f uJ, SOP %.4f uJ, sign %.4f uJ" % (summary["mac_uj"], summary["sop_uj"], summary["sign_uj"]))
