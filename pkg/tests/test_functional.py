"""Convolution, batch norm, bilinear resize and pooling against brute-force oracles."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from spikederain.functional import avg_pool, batch_norm, bilinear_matrix, bilinear_resize, conv2d, conv_output_size
from spikederain.tensor import ShapeError, Tensor

from gradcheck import check_gradients, weighted_sum


def conv_loops(x, k, stride, pad):
    n, c, h, w = x.shape
    o, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = conv_output_size(h, kh, stride, pad), conv_output_size(w, kw, stride, pad)
    out = np.zeros((n, o, ho, wo))
    for b in range(n):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[b, :, i * stride : i * stride + kh, j * stride : j * stride + kw]
                    out[b, oc, i, j] = np.sum(patch * k[oc])
    return out


def bilinear_scalar(img, out_h, out_w):
    """Half-pixel-centre bilinear sampling, one output pixel at a time."""
    h, w = img.shape

    def coord(i, n_in, n_out):
        s = max((i + 0.5) * n_in / n_out - 0.5, 0.0)
        i0 = min(int(np.floor(s)), n_in - 1)
        return i0, min(i0 + 1, n_in - 1), s - i0

    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        y0, y1, fy = coord(i, h, out_h)
        for j in range(out_w):
            x0, x1, fx = coord(j, w, out_w)
            top = (1 - fx) * img[y0, x0] + fx * img[y0, x1]
            bot = (1 - fx) * img[y1, x0] + fx * img[y1, x1]
            out[i, j] = (1 - fy) * top + fy * bot
    return out


class TestConv2d:
    @pytest.mark.parametrize("stride,pad,ksize", [(1, 1, 3), (2, 1, 3), (1, 0, 1), (2, 0, 3), (1, 2, 5)])
    def test_matches_loops(self, rng, stride, pad, ksize):
        x, k = rng.normal(size=(2, 3, 7, 6)), rng.normal(size=(4, 3, ksize, ksize))
        out = conv2d(Tensor(x), Tensor(k), stride, pad).data
        assert_allclose(out, conv_loops(x, k, stride, pad), rtol=1e-12, atol=1e-12)

    def test_identity_kernel(self, rng):
        x = rng.normal(size=(1, 2, 5, 5))
        k = np.zeros((2, 2, 3, 3))
        k[0, 0, 1, 1] = k[1, 1, 1, 1] = 1.0
        assert_array_equal(conv2d(Tensor(x), Tensor(k), 1, 1).data, x)

    @pytest.mark.parametrize("stride,pad", [(1, 1), (2, 1), (2, 0)])
    def test_gradients(self, rng, stride, pad):
        x = Tensor(rng.normal(size=(2, 3, 6, 6)), requires_grad=True)
        k = Tensor(rng.normal(size=(4, 3, 3, 3)), requires_grad=True)
        rep = check_gradients(lambda: weighted_sum(conv2d(x, k, stride, pad)), {"x": x, "k": k}, samples=10)
        assert rep.worst <= 1e-4, rep.where

    def test_rank_check(self, rng):
        with pytest.raises(ShapeError):
            conv2d(Tensor(rng.normal(size=(3, 5, 5))), Tensor(rng.normal(size=(1, 3, 3, 3))))

    def test_matches_torch(self, rng):
        torch = pytest.importorskip("torch")
        x, k = rng.normal(size=(2, 3, 8, 8)), rng.normal(size=(5, 3, 3, 3))
        ref = torch.nn.functional.conv2d(torch.from_numpy(x), torch.from_numpy(k), stride=2, padding=1).numpy()
        assert_allclose(conv2d(Tensor(x), Tensor(k), 2, 1).data, ref, rtol=1e-10, atol=1e-12)


class TestBatchNorm:
    def test_training_normalises_per_channel(self, rng):
        x = rng.normal(3.0, 2.0, size=(4, 3, 5, 5))
        rm, rv = np.zeros(3), np.ones(3)
        out = batch_norm(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)), rm, rv, training=True).data
        assert_allclose(out.mean(axis=(0, 2, 3)), 0, atol=1e-12)
        assert_allclose(out.var(axis=(0, 2, 3)), 1, rtol=1e-4)
        m = 4 * 25
        assert_allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)))
        assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * m / (m - 1))

    def test_eval_uses_running_stats(self, rng):
        x = rng.normal(size=(2, 2, 3, 3))
        rm, rv = np.array([0.5, -1.0]), np.array([4.0, 0.25])
        out = batch_norm(Tensor(x), Tensor(np.array([2.0, 1.0])), Tensor(np.array([0.0, 1.0])), rm.copy(), rv.copy(), training=False).data
        expect = (x - rm.reshape(1, 2, 1, 1)) / np.sqrt(rv.reshape(1, 2, 1, 1) + 1e-5)
        expect = expect * np.array([2.0, 1.0]).reshape(1, 2, 1, 1) + np.array([0.0, 1.0]).reshape(1, 2, 1, 1)
        assert_allclose(out, expect, rtol=1e-13)

    @pytest.mark.parametrize("training", [True, False])
    def test_gradients(self, rng, training):
        x = Tensor(rng.normal(size=(3, 2, 4, 4)), requires_grad=True)
        g = Tensor(rng.uniform(0.5, 1.5, 2), requires_grad=True)
        b = Tensor(rng.normal(size=2), requires_grad=True)

        def build():
            return weighted_sum(batch_norm(x, g, b, np.zeros(2), np.ones(2), training))

        rep = check_gradients(build, {"x": x, "gamma": g, "beta": b}, samples=10)
        assert rep.worst <= 1e-4, rep.where


class TestBilinear:
    def test_upsample_two_pixels(self):
        out = bilinear_resize(Tensor(np.array([[0.0, 4.0]])), 1, 4).data
        assert_allclose(out, [[0.0, 1.0, 3.0, 4.0]])

    @pytest.mark.parametrize("shape,out", [((4, 4), (8, 8)), ((8, 6), (4, 3)), ((5, 7), (9, 4)), ((3, 3), (3, 6))])
    def test_matches_scalar_oracle(self, rng, shape, out):
        img = rng.normal(size=shape)
        assert_allclose(bilinear_resize(Tensor(img), *out).data, bilinear_scalar(img, *out), rtol=1e-12, atol=1e-12)

    def test_rows_sum_to_one(self):
        for n_in, n_out in [(4, 8), (8, 4), (7, 3)]:
            assert_allclose(bilinear_matrix(n_in, n_out).sum(axis=1), 1.0)

    def test_same_size_is_identity(self, rng):
        x = Tensor(rng.normal(size=(2, 3, 4, 4)))
        assert bilinear_resize(x, 4, 4) is x

    def test_gradients(self, rng):
        x = Tensor(rng.normal(size=(2, 1, 3, 5)), requires_grad=True)
        rep = check_gradients(lambda: weighted_sum(bilinear_resize(x, 6, 4)), {"x": x}, samples=12)
        assert rep.worst <= 1e-4, rep.where

    def test_matches_torch(self, rng):
        torch = pytest.importorskip("torch")
        x = rng.normal(size=(1, 2, 4, 6))
        ref = torch.nn.functional.interpolate(torch.from_numpy(x), size=(8, 12), mode="bilinear", align_corners=False).numpy()
        assert_allclose(bilinear_resize(Tensor(x), 8, 12).data, ref, rtol=1e-10, atol=1e-12)


class TestAvgPool:
    def test_values(self):
        x = np.arange(16.0).reshape(1, 4, 4)
        assert_array_equal(avg_pool(Tensor(x), 2).data, [[[2.5, 4.5], [10.5, 12.5]]])

    def test_indivisible(self):
        with pytest.raises(ShapeError):
            avg_pool(Tensor(np.zeros((3, 5))), 2)

    def test_gradients(self, rng):
        x = Tensor(rng.normal(size=(2, 4, 6)), requires_grad=True)
        rep = check_gradients(lambda: weighted_sum(avg_pool(x, 2)), {"x": x}, samples=10)
        assert rep.worst <= 1e-4, rep.where
