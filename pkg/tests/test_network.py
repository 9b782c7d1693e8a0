"""The deraining network: wiring, variants, input checks, loss and gradients."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from spikederain.network import VARIANTS, DerainNet, NetworkConfig, charbonnier_loss, direct_encode
from spikederain.tensor import ShapeError, Tensor

from gradcheck import check_gradients, weighted_sum

SMALL = NetworkConfig(base_channels=4, refine_blocks=1, timesteps=2)


def images(rng, b=1, size=16):
    return rng.uniform(0, 1, size=(b, 3, size, size))


class TestConfig:
    def test_round_trip_dict(self):
        cfg = NetworkConfig(neuron_variant="lif", channel_multipliers=[1, 2, 2])
        assert NetworkConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize(
        "kw", [{"timesteps": 0}, {"scales": 1}, {"channel_multipliers": (1, 2)}, {"neuron_variant": "izh"}, {"refine_blocks": -1}]
    )
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            NetworkConfig(**kw)

    def test_size_multiple(self):
        assert NetworkConfig().size_multiple == 8


class TestForward:
    def test_identity_at_init(self, rng):
        x = images(rng)
        net = DerainNet(SMALL)
        assert_array_equal(net(x).data, x)
        assert not net.last_residual.data.any()

    def test_output_range(self, rng):
        net = DerainNet(SMALL)
        net.head.weight.data[:] = rng.normal(0, 1, net.head.weight.shape)
        y = net(images(rng, 2)).data
        assert y.min() >= 0.0 and y.max() <= 1.0

    @pytest.mark.parametrize("variant", sorted(VARIANTS))
    def test_variants_run(self, rng, variant):
        net = DerainNet(NetworkConfig(base_channels=4, refine_blocks=1, timesteps=2, neuron_variant=variant))
        assert net(images(rng)).shape == (1, 3, 16, 16)

    @pytest.mark.parametrize("flag", ["use_temb", "use_smu", "use_sdem"])
    def test_ablation_flags(self, rng, flag):
        net = DerainNet(NetworkConfig(base_channels=4, refine_blocks=1, timesteps=2, **{flag: False}))
        assert net(images(rng)).shape == (1, 3, 16, 16)

    def test_default_topology(self):
        net = DerainNet()
        kinds = {d["name"]: d["type"] for d in net.topology()}
        assert kinds["encoder.0"] == "SMU" and kinds["decoder.1"] == "SMU"
        assert kinds["encoder.1"] == "SDEM" and kinds["refine.3"] == "SDEM"
        assert kinds["temb"] == "TemporalEmbedding"
        assert net.num_parameters() < 400_000

    def test_input_checks(self, rng):
        net = DerainNet(SMALL)
        with pytest.raises(ShapeError):
            net(rng.uniform(size=(1, 3, 12, 16)))
        with pytest.raises(ShapeError):
            net(rng.uniform(size=(1, 1, 16, 16)))
        with pytest.raises(ValueError):
            net(np.full((1, 3, 16, 16), 1.5))

    def test_direct_encoding(self, rng):
        x = images(rng)
        enc = direct_encode(x, 3)
        assert enc.shape == (3, 1, 3, 16, 16)
        assert_array_equal(enc.data[2], x)

    def test_eval_mode_is_deterministic(self, rng):
        net = DerainNet(SMALL).eval()
        net.head.weight.data[:] = 0.01
        x = images(rng)
        assert_array_equal(net(x).data, net(x).data)


class TestLoss:
    def test_charbonnier_value(self):
        p, t = Tensor(np.array([0.5, 0.2])), np.array([0.2, 0.2])
        expect = (np.sqrt(0.09 + 1e-6) + np.sqrt(1e-6)) / 2
        assert charbonnier_loss(p, t).item() == pytest.approx(expect, rel=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            charbonnier_loss(Tensor(np.zeros(3)), np.zeros(4))


class TestGradients:
    def test_finite_differences_small_net(self, rng):
        net = DerainNet(SMALL)
        net.head.weight.data[:] = rng.normal(0, 0.05, net.head.weight.shape)
        x = Tensor(rng.uniform(0.2, 0.8, size=(1, 3, 16, 16)), requires_grad=True)
        params = dict(net.named_parameters())
        # zero-initialised biases sit on ReLU kinks where one-sided derivatives differ
        for name, p in params.items():
            if name.endswith("bias"):
                p.data += rng.normal(0, 0.05, p.shape)
        picks = dict(sorted(params.items())[:: max(1, len(params) // 20)])
        rep = check_gradients(lambda: weighted_sum(net(x)), {"x": x, **picks}, samples=2)
        assert rep.checked >= 20, rep
        assert rep.worst <= 1e-4, rep.where

    def test_training_step_reduces_loss(self, rng):
        from spikederain.train import Adam

        net = DerainNet(SMALL)
        x, y = images(rng, 2), images(rng, 2)
        opt = Adam(net.parameters(), 1e-3)
        losses = []
        for _ in range(3):
            opt.zero_grad()
            loss = charbonnier_loss(net(x), y)
            loss.backward()
            opt.step()
            losses.append(loss.item())
        assert losses[-1] < losses[0]
