"""
Letting a neuron see its neighbours
===================================

VLIF turns each 2x2 patch into four extra time steps, so one membrane
integrates a small neighbourhood. Dim pixels next to bright ones can then
fire, which plain LIF never does.
"""

import numpy as np

from spikederain.analysis.activation import decay_matrix, decay_matrix_experiment
from spikederain.vlif import VlifConfig, patch_to_time, time_to_patch, vlif_integrate

# patch-to-time on a single 2x2 image: four pixels become four steps
cfg = VlifConfig(r=2)
img = np.arange(1.0, 5.0).reshape(1, 1, 1, 2, 2)
seq = patch_to_time(img, cfg)
print("pixels as time steps:", seq.data.ravel())
print("round trip exact:", np.array_equal(time_to_patch(seq, cfg).data, img))

# a uniformly dim patch: no pixel reaches threshold on its own,
# but the membrane accumulates across the patch and fires once
spikes, f_map = vlif_integrate(patch_to_time(np.full((1, 1, 1, 2, 2), 0.3), cfg), cfg)
print("spikes over the patch:", spikes.data.ravel(), " F =", f_map.ravel())

# the decay matrix: 0.9 on the diagonal, fading away from it
m = decay_matrix(8)
print(np.round(m, 3))

rep = decay_matrix_experiment(64)
print(rep.to_text())
