import numpy as np
import pytest

from celforge.errors import InvalidInputError, InvalidParameterError
from celforge.synth import uniform_flow
from celforge.warp import (
    backward_warp, halfway_guess, infilled_warp, mask_from_coverage, occlusion_mask, softmax_splat, z_metric,
)
from oracles import brute_backward_warp, brute_open, brute_splat, srgb_to_lab_scalar
from scenes import translation_scene


class TestBackwardWarp:
    def test_zero_flow_bit_exact(self, rng):
        img = rng.random((9, 11, 3)).astype(np.float32)
        out = backward_warp(img, np.zeros((9, 11, 2), np.float32))
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, img)

    def test_ramp_shift(self):
        ramp = np.tile(np.arange(10, dtype=np.float32), (4, 1))[:, :, None]
        out = backward_warp(ramp, uniform_flow(4, 10, 1, 0))
        expected = np.minimum(np.arange(10) + 1, 9).astype(np.float32)
        np.testing.assert_array_equal(out[:, :, 0], np.tile(expected, (4, 1)))

    def test_far_outside_clamps_to_border(self, rng):
        img = rng.random((5, 6, 3)).astype(np.float32)
        out = backward_warp(img, uniform_flow(5, 6, 100, -100))
        for y in range(5):
            for x in range(6):
                np.testing.assert_array_equal(out[y, x], img[0, 5])

    def test_fractional_against_oracle(self, rng):
        img = rng.random((7, 8, 2)).astype(np.float32)
        flow = rng.uniform(-3, 3, (7, 8, 2)).astype(np.float32)
        np.testing.assert_allclose(backward_warp(img, flow), brute_backward_warp(img, flow), atol=1e-6)

    def test_size_mismatch(self):
        with pytest.raises(InvalidInputError):
            backward_warp(np.zeros((4, 4, 3)), np.zeros((4, 5, 2)))


def _gray_for_lightness(L):
    y = ((L + 16) / 116) ** 3
    return 12.92 * y if y <= 0.0031308 else 1.055 * y ** (1 / 2.4) - 0.055


class TestZMetric:
    def test_self_consistency_is_zero(self, rng):
        img = rng.random((6, 7, 3)).astype(np.float32)
        np.testing.assert_array_equal(z_metric(img, img, np.zeros((6, 7, 2), np.float32)), 0.0)

    def test_lab_distance_ten_gives_minus_one(self):
        a = np.full((3, 3, 3), _gray_for_lightness(60.0), np.float32)
        b = np.full((3, 3, 3), _gray_for_lightness(50.0), np.float32)
        z = z_metric(a, b, np.zeros((3, 3, 2), np.float32))
        assert z.shape == (3, 3, 1)
        np.testing.assert_allclose(z, -1.0, atol=1e-3)

    def test_scale_against_scalar_lab(self, rng):
        a = rng.random((4, 4, 3)).astype(np.float32)
        b = rng.random((4, 4, 3)).astype(np.float32)
        z = z_metric(a, b, np.zeros((4, 4, 2), np.float32))
        for y in range(4):
            for x in range(4):
                la = np.array(srgb_to_lab_scalar(*map(float, a[y, x])))
                lb = np.array(srgb_to_lab_scalar(*map(float, b[y, x])))
                assert z[y, x, 0] == pytest.approx(-0.1 * np.linalg.norm(la - lb), abs=1e-3)

    def test_uses_backward_warp_of_other(self, rng):
        a = rng.random((5, 8, 3)).astype(np.float32)
        b = np.roll(a, 2, axis=1)
        z = z_metric(a, b, uniform_flow(5, 8, 2, 0))
        np.testing.assert_allclose(z[:, :6], 0.0, atol=1e-5)

    def test_non_positive(self, rng):
        a = rng.random((8, 8, 3)).astype(np.float32)
        b = rng.random((8, 8, 3)).astype(np.float32)
        flow = rng.uniform(-4, 4, (8, 8, 2)).astype(np.float32)
        assert (z_metric(a, b, flow) <= 0).all()


class TestSoftmaxSplat:
    def test_zero_flow_identity(self, rng):
        img = rng.random((6, 5, 3)).astype(np.float32)
        z = rng.uniform(-5, 0, (6, 5, 1)).astype(np.float32)
        res = softmax_splat(img, np.zeros((6, 5, 2), np.float32), z)
        np.testing.assert_allclose(res.values, img, atol=1e-6)
        np.testing.assert_array_equal(res.coverage, 1.0)

    def test_constant_shift(self):
        img = np.full((4, 4, 1), 0.3, np.float32)
        res = softmax_splat(img, uniform_flow(4, 4, 1, 0))
        np.testing.assert_array_equal(res.coverage[:, 0], 0.0)
        np.testing.assert_array_equal(res.values[:, 0], 0.0)
        np.testing.assert_allclose(res.values[:, 1:], 0.3, atol=1e-7)

    @pytest.mark.parametrize("zlevel", [0.0, -3.0])
    def test_half_pixel_shift_against_oracle(self, rng, zlevel):
        img = rng.random((4, 4, 3)).astype(np.float32)
        flow = uniform_flow(4, 4, 0.5, 0)
        z = np.full((4, 4, 1), zlevel, np.float32)
        z[::2, ::2] += 1.0
        res = softmax_splat(img, flow, z)
        ref, cov = brute_splat(img, flow, z[..., 0])
        np.testing.assert_allclose(res.values, ref, atol=1e-5)
        np.testing.assert_allclose(res.coverage, cov, atol=1e-6)

    def test_random_against_oracle(self, rng):
        for _ in range(20):
            img = rng.random((5, 6, 2)).astype(np.float32)
            flow = rng.uniform(-2.5, 2.5, (5, 6, 2)).astype(np.float32)
            z = rng.uniform(-4, 0, (5, 6, 1)).astype(np.float32)
            res = softmax_splat(img, flow, z)
            ref, cov = brute_splat(img, flow, z[..., 0])
            np.testing.assert_allclose(res.values, ref, atol=1e-5)
            np.testing.assert_allclose(res.coverage, cov, atol=1e-5)

    def test_constant_preserved_where_covered(self, rng):
        img = np.full((10, 10, 3), 0.42, np.float32)
        flow = rng.uniform(-3, 3, (10, 10, 2)).astype(np.float32)
        z = rng.uniform(-2, 0, (10, 10, 1)).astype(np.float32)
        res = softmax_splat(img, flow, z)
        covered = res.coverage > 1e-7
        np.testing.assert_allclose(res.values[covered], 0.42, atol=1e-6)
        assert (res.coverage >= 0).all()

    def test_large_z_does_not_overflow(self):
        img = np.ones((3, 3, 1), np.float32)
        z = np.full((3, 3, 1), 800.0, np.float32)
        res = softmax_splat(img, np.zeros((3, 3, 2), np.float32), z)
        np.testing.assert_allclose(res.values, 1.0)

    def test_size_mismatch(self):
        with pytest.raises(InvalidInputError):
            softmax_splat(np.zeros((4, 4, 3)), np.zeros((4, 4, 2)), np.zeros((3, 4, 1)))


class TestOcclusionMask:
    def test_zero_flow_all_true(self):
        assert occlusion_mask(np.zeros((12, 12, 2), np.float32)).all()

    def test_shift_right_eight(self):
        flow = uniform_flow(10, 16, 8, 0)
        _, cov = brute_splat(np.ones((10, 16, 1)), flow, np.zeros((10, 16)))
        expected = brute_open(cov > 0.5, 5)
        out = occlusion_mask(flow)
        np.testing.assert_array_equal(out, expected)
        assert not out[:, :8].any() and out[:, 8:].all()

    def test_all_out_of_bounds(self):
        assert not occlusion_mask(uniform_flow(8, 8, 50, 0)).any()

    def test_speckle_removed(self):
        # scattered sub-pixel flow leaves isolated covered dots that opening clears
        flow = np.full((16, 16, 2), 100.0, np.float32)
        flow[8, 8] = 0
        assert not occlusion_mask(flow).any()


class TestInfilledWarp:
    def test_identical_inputs_static(self, rng):
        f = rng.random((10, 10, 3)).astype(np.float32)
        zero = np.zeros((10, 10, 2), np.float32)
        np.testing.assert_allclose(infilled_warp(f, f, zero, zero), f, atol=1e-6)

    def test_constants_average(self):
        a = np.full((8, 8, 1), 0.2, np.float32)
        b = np.full((8, 8, 1), 0.6, np.float32)
        zero = np.zeros((8, 8, 2), np.float32)
        np.testing.assert_allclose(infilled_warp(a, b, zero, zero), 0.4, atol=1e-7)

    def test_one_sided_occlusion(self, rng):
        f0 = rng.random((8, 8, 3)).astype(np.float32)
        f1 = rng.random((8, 8, 3)).astype(np.float32)
        flow0 = uniform_flow(8, 8, 4, 0)
        zero = np.zeros((8, 8, 2), np.float32)
        w0, cov0 = brute_splat(f0, flow0, np.zeros((8, 8)))
        w1, cov1 = brute_splat(f1, zero, np.zeros((8, 8)))
        m0 = brute_open(cov0 > 0.5, 5)[:, :, None]
        m1 = brute_open(cov1 > 0.5, 5)[:, :, None]
        expected = 0.5 * (m0 * w0 + (1 - m0) * w1) + 0.5 * (m1 * w1 + (1 - m1) * w0)
        out, holes = infilled_warp(f0, f1, flow0, zero, return_holes=True)
        np.testing.assert_allclose(out, expected, atol=1e-6)
        # the 4-px covered band is thinner than the opening kernel, so f1 fills everything
        np.testing.assert_allclose(out, f1, atol=1e-6)
        assert not holes.any()

    def test_full_masks_reduce_to_average(self, rng):
        f0 = rng.random((12, 12, 3)).astype(np.float32)
        f1 = rng.random((12, 12, 3)).astype(np.float32)
        # sub-pixel uniform shifts leave every target pixel with coverage above one half
        flow = uniform_flow(12, 12, 0.3, 0.2)
        z = rng.uniform(-1, 0, (12, 12, 1)).astype(np.float32)
        w0, c0 = softmax_splat(f0, flow, z)
        w1, c1 = softmax_splat(f1, -flow, z)
        assert mask_from_coverage(c0).all() and mask_from_coverage(c1).all()
        np.testing.assert_allclose(infilled_warp(f0, f1, flow, -flow, z, z), 0.5 * (w0 + w1), atol=1e-6)

    def test_shared_holes_stay_zero(self):
        f = np.ones((8, 8, 1), np.float32)
        away = uniform_flow(8, 8, 20, 0)
        out, holes = infilled_warp(f, f, away, away, return_holes=True)
        assert holes.all()
        np.testing.assert_array_equal(out, 0.0)


class TestHalfwayGuess:
    def test_static_scene(self, rng):
        img = rng.random((12, 14, 3)).astype(np.float32)
        zero = np.zeros((12, 14, 2), np.float32)
        np.testing.assert_allclose(halfway_guess(img, img, zero, zero, 0.5), img, atol=1e-6)

    @pytest.mark.parametrize("t", [0.0, 1.0])
    def test_endpoints_with_zero_flow_average(self, rng, t):
        a = rng.random((8, 8, 3)).astype(np.float32)
        b = rng.random((8, 8, 3)).astype(np.float32)
        zero = np.zeros((8, 8, 2), np.float32)
        np.testing.assert_allclose(halfway_guess(a, b, zero, zero, t), (a + b) / 2, atol=1e-6)

    def test_translation(self):
        i0, i1, f01, f10, gt, valid = translation_scene()
        out = halfway_guess(i0, i1, f01, f10, 0.5)
        err = np.abs(out - gt)[valid]
        assert err.max() <= 1e-3
        assert valid.sum() > 0.5 * valid.size

    def test_symmetry(self, rng):
        a = rng.random((16, 16, 3)).astype(np.float32)
        b = rng.random((16, 16, 3)).astype(np.float32)
        f01 = rng.uniform(-3, 3, (16, 16, 2)).astype(np.float32)
        f10 = rng.uniform(-3, 3, (16, 16, 2)).astype(np.float32)
        for t in (0.25, 0.5, 0.8):
            np.testing.assert_allclose(halfway_guess(a, b, f01, f10, t), halfway_guess(b, a, f10, f01, 1 - t), atol=1e-6)

    def test_output_in_unit_range(self, rng):
        a = rng.random((10, 10, 3)).astype(np.float32)
        b = rng.random((10, 10, 3)).astype(np.float32)
        f = rng.uniform(-5, 5, (10, 10, 2)).astype(np.float32)
        out = halfway_guess(a, b, f, -f, 0.3)
        assert out.min() >= 0 and out.max() <= 1

    @pytest.mark.parametrize("t", [-0.1, 1.5])
    def test_bad_t(self, t):
        z = np.zeros((4, 4, 3), np.float32)
        with pytest.raises(InvalidParameterError):
            halfway_guess(z, z, z[..., :2], z[..., :2], t)
