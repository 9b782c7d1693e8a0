"""
Training a small spiking derainer
=================================

Synthetic rain on smooth scenes, a few hundred Adam steps, then the same
weights evaluated with every VLIF neuron swapped for plain LIF.

Pass an iteration count as the first argument (default 300; the
acceptance suite uses 2000).
"""

import sys
import tempfile
import time
from pathlib import Path

from spikederain.data import make_synthetic_pairs
from spikederain.network import DerainNet, NetworkConfig
from spikederain.train import TrainConfig, evaluate, load_network, save_network, train

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 300

# 50 pairs of 32x32 images; the last 10 are held out
pairs = make_synthetic_pairs(50, 32, seed=0)
train_pairs, test_pairs = pairs[:40], pairs[40:]

net = DerainNet(NetworkConfig())
print("parameters:", net.num_parameters())

# the head starts at zero, so the untrained network returns its input
print("before training:", evaluate(net, test_pairs))

t0 = time.perf_counter()
result = train(net, train_pairs, TrainConfig(iterations=iterations))
print("trained %d iterations in %.0fs, final loss %.4f" % (iterations, time.perf_counter() - t0, result.losses[-1]))
print("after training:", evaluate(net, test_pairs))

# reload the weights into a network whose VLIF neurons are plain LIF
with tempfile.TemporaryDirectory() as tmp:
    ckpt = Path(tmp) / "net.ckpt"
    save_network(ckpt, net)
    lif_net, _ = load_network(ckpt, neuron_variant="lif")
print("with plain LIF:", evaluate(lif_net, test_pairs))
