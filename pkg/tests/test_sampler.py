"""Sampling operators: known-branch noising, strided steps, masking."""

import numpy as np
import pytest

from stereoweave.diffusion.codec import (
    AvgPoolCodec,
    IdentityCodec,
    downsample_mask,
)
from stereoweave.diffusion.endpoint import (
    DenoiserEndpoint,
    OracleDenoiser,
    ZeroDenoiser,
)
from stereoweave.diffusion.sampler import (
    boundary_reinject,
    combine_masked,
    denoise_step,
    resample_noise,
    sample_known,
)
from stereoweave.diffusion.schedule import make_schedule
from stereoweave.errors import InvalidRange, ShapeMismatch
from stereoweave.rng import KNOWN, stream

SCHED = make_schedule(T=40, steps=4, beta_lo=1e-3, beta_hi=0.05)


class _FixedRng:
    """Stands in for a Generator; returns a canned normal draw."""

    def __init__(self, eps):
        self.eps = np.asarray(eps, dtype=np.float32)

    def standard_normal(self, shape, dtype=np.float32):
        assert tuple(shape) == self.eps.shape
        return self.eps.copy()


class _ConstEndpoint(DenoiserEndpoint):
    def __init__(self, eps_value=0.0, var_value=0.0):
        self.eps_value = eps_value
        self.var_value = var_value

    def predict(self, z_seq, cond, t, *, tag=None):
        return (np.full_like(z_seq, self.eps_value),
                np.full_like(z_seq, self.var_value))


class TestSampleKnown:
    def test_level_zero_is_bit_exact_and_draws_nothing(self):
        z0 = np.random.default_rng(0).normal(size=(2, 3, 4, 4)) \
            .astype(np.float32)
        rng = stream(7, KNOWN, 0, 1)
        out = sample_known(SCHED, z0, 0, rng)
        assert out.dtype == np.float32
        assert (out == z0).all()
        # the generator must be untouched: its next draw matches a
        # fresh stream with the same key
        assert (rng.standard_normal(4, dtype=np.float32)
                == stream(7, KNOWN, 0, 1).standard_normal(
                    4, dtype=np.float32)).all()

    def test_formula_with_fixed_noise(self):
        z0 = np.array([1.0, -2.0, 0.5], dtype=np.float32)
        eps = np.array([0.3, 0.0, -1.0], dtype=np.float32)
        t = SCHED.step_plan[1]
        ab = SCHED.abar(t)
        want = (np.float32(np.sqrt(ab)) * z0
                + np.float32(np.sqrt(1 - ab)) * eps)
        out = sample_known(SCHED, z0, t, _FixedRng(eps))
        assert (out == want).all()

    def test_moments(self):
        n = 200_000
        z0 = np.full(n, 0.7, dtype=np.float32)
        t = SCHED.step_plan[0]
        ab = SCHED.abar(t)
        out = sample_known(SCHED, z0, t, np.random.default_rng(3))
        sd = np.sqrt(1 - ab)
        assert abs(out.mean() - np.sqrt(ab) * 0.7) < 4 * sd / np.sqrt(n)
        assert out.std() == pytest.approx(sd, rel=0.02)


class TestDenoiseStep:
    def test_zero_noise_prediction_rescales(self):
        z = np.random.default_rng(1).normal(size=(1, 2, 4, 4)) \
            .astype(np.float32)
        t = SCHED.step_plan[0]
        out = denoise_step(SCHED, z, "", t, ZeroDenoiser(), None,
                           deterministic=True)
        want = z / np.float32(np.sqrt(1 - SCHED.jump_beta(t)))
        assert np.allclose(out, want, atol=0)

    def test_oracle_contracts_residual_by_known_factor(self):
        # residual r(t) = z - sqrt(abar_t) target shrinks by exactly
        # sqrt(abar_t / abar_next) (1 - abar_next) / (1 - abar_t)
        rng = np.random.default_rng(2)
        target = rng.normal(size=(1, 2, 4, 4)).astype(np.float32)
        z = rng.normal(size=target.shape).astype(np.float32) * 3
        t = SCHED.step_plan[1]
        nxt = SCHED.next_step(t)
        out = denoise_step(SCHED, z, "", t, OracleDenoiser(SCHED, target),
                           None, deterministic=True)
        r_before = np.linalg.norm(z - np.sqrt(SCHED.abar(t)) * target)
        r_after = np.linalg.norm(out - np.sqrt(SCHED.abar(nxt)) * target)
        c = (np.sqrt(SCHED.abar(t) / SCHED.abar(nxt))
             * (1 - SCHED.abar(nxt)) / (1 - SCHED.abar(t)))
        assert r_after < r_before
        assert r_after == pytest.approx(c * r_before, rel=1e-4)

    def test_final_transition_recovers_target_from_any_state(self):
        rng = np.random.default_rng(3)
        target = rng.normal(size=(2, 2, 3, 3)).astype(np.float32)
        t = SCHED.step_plan[-1]
        assert SCHED.next_step(t) == 0
        for _ in range(3):
            z = rng.normal(size=target.shape).astype(np.float32) * 5
            out = denoise_step(SCHED, z, "", t,
                               OracleDenoiser(SCHED, target), None,
                               deterministic=True)
            assert np.allclose(out, target, atol=1e-5)

    def test_stochastic_uses_endpoint_variance(self):
        n = 100_000
        z = np.ones(n, dtype=np.float32)
        t = SCHED.step_plan[0]
        out = denoise_step(SCHED, z, "", t, _ConstEndpoint(0.0, 0.04),
                           np.random.default_rng(4))
        mu = 1.0 / np.sqrt(1 - SCHED.jump_beta(t))
        assert out.mean() == pytest.approx(mu, abs=4 * 0.2 / np.sqrt(n))
        assert out.std() == pytest.approx(0.2, rel=0.02)

    def test_negative_variance_rejected(self):
        z = np.zeros((1, 1, 2, 2), dtype=np.float32)
        with pytest.raises(InvalidRange):
            denoise_step(SCHED, z, "", SCHED.step_plan[0],
                         _ConstEndpoint(0.0, -1.0), None, deterministic=True)

    def test_shape_mismatch_rejected(self):
        class Bad(DenoiserEndpoint):
            def predict(self, z_seq, cond, t, *, tag=None):
                return np.zeros((1, 1, 1, 1), np.float32), \
                    np.zeros((1, 1, 1, 1), np.float32)

        z = np.zeros((1, 1, 2, 2), dtype=np.float32)
        with pytest.raises(ShapeMismatch):
            denoise_step(SCHED, z, "", SCHED.step_plan[0], Bad(), None,
                         deterministic=True)


class TestCombineMasked:
    def test_scalar_oracle(self):
        rng = np.random.default_rng(5)
        kn = rng.normal(size=(2, 3, 4, 5)).astype(np.float32)
        un = rng.normal(size=kn.shape).astype(np.float32)
        m = rng.integers(0, 2, size=(2, 4, 5)).astype(np.uint8)
        out = combine_masked(kn, un, m)
        for s in range(2):
            for c in range(3):
                for y in range(4):
                    for x in range(5):
                        want = kn[s, c, y, x] if m[s, y, x] else un[s, c, y, x]
                        assert out[s, c, y, x] == want

    def test_known_lanes_bit_identical(self):
        rng = np.random.default_rng(6)
        kn = (rng.normal(size=(1, 2, 8, 8)) * 1e-3).astype(np.float32)
        un = rng.normal(size=kn.shape).astype(np.float32)
        m = np.zeros((1, 8, 8), np.uint8)
        m[0, 2:5, 3:7] = 1
        out = combine_masked(kn, un, m)
        sel = m.astype(bool)
        assert (out[:, 0][sel] == kn[:, 0][sel]).all()
        assert (out[:, 1][sel] == kn[:, 1][sel]).all()
        assert (out[:, 0][~sel] == un[:, 0][~sel]).all()

    def test_plain_hw_mask_broadcasts(self):
        kn = np.ones((2, 3, 2, 2), np.float32)
        un = np.zeros_like(kn)
        m = np.array([[1, 0], [0, 1]], np.uint8)
        out = combine_masked(kn, un, m)
        assert (out[:, :, 0, 0] == 1).all() and (out[:, :, 0, 1] == 0).all()

    def test_mismatch_rejected(self):
        kn = np.ones((1, 1, 2, 2), np.float32)
        with pytest.raises(ShapeMismatch):
            combine_masked(kn, np.ones((1, 1, 2, 3), np.float32),
                           np.ones((2, 2), np.uint8))
        with pytest.raises(ShapeMismatch):
            combine_masked(kn, kn, np.ones((3, 3), np.uint8))


class TestResampleNoise:
    def test_formula_with_fixed_noise(self):
        z = np.array([0.5, -1.5], dtype=np.float32)
        eps = np.array([1.0, 2.0], dtype=np.float32)
        t = SCHED.step_plan[2]
        b = SCHED.jump_beta(t)
        want = (np.float32(np.sqrt(1 - b)) * z
                + np.float32(np.sqrt(b)) * eps)
        assert (resample_noise(SCHED, z, t, _FixedRng(eps)) == want).all()

    def test_vanishing_beta_is_identity(self):
        tiny = make_schedule(T=4, steps=2, beta_lo=1e-10, beta_hi=1e-10)
        z = np.random.default_rng(7).normal(size=(64,)).astype(np.float32)
        t = tiny.step_plan[0]
        out = resample_noise(tiny, z, t, np.random.default_rng(8))
        assert np.allclose(out, z, atol=1e-4)

    def test_moments(self):
        n = 200_000
        z = np.full(n, 0.5, dtype=np.float32)
        t = SCHED.step_plan[1]
        b = SCHED.jump_beta(t)
        out = resample_noise(SCHED, z, t, np.random.default_rng(9))
        assert out.mean() == pytest.approx(np.sqrt(1 - b) * 0.5,
                                           abs=4 * np.sqrt(b) / np.sqrt(n))
        assert out.std() == pytest.approx(np.sqrt(b), rel=0.02)

    def test_denoise_renoise_round_contracts_in_expectation(self):
        # one repetition (deterministic step down, renoise up) must pull
        # a far-off state toward the oracle target on average
        rng = np.random.default_rng(10)
        target = rng.normal(size=(1, 1, 4, 4)).astype(np.float32)
        ep = OracleDenoiser(SCHED, target)
        t = SCHED.step_plan[1]
        z = rng.normal(size=target.shape).astype(np.float32) * 10
        before = np.linalg.norm(z - np.sqrt(SCHED.abar(t)) * target)
        after = []
        for k in range(50):
            down = denoise_step(SCHED, z, "", t, ep, None,
                                deterministic=True)
            up = resample_noise(SCHED, down, t,
                                np.random.default_rng(100 + k))
            after.append(np.linalg.norm(
                up - np.sqrt(SCHED.abar(t)) * target))
        assert np.mean(after) < before


class TestDownsampleMask:
    def test_all_known_block(self):
        assert downsample_mask(np.ones((8, 8), np.uint8), 8).tolist() == [[1]]

    def test_single_unknown_pixel_vetoes(self):
        m = np.ones((8, 16), np.uint8)
        m[3, 12] = 0
        assert downsample_mask(m, 8).tolist() == [[1, 0]]

    def test_down_one_is_copy(self):
        m = np.array([[1, 0], [0, 1]], np.uint8)
        out = downsample_mask(m, 1)
        assert (out == m).all()
        out[0, 0] = 0
        assert m[0, 0] == 1

    def test_partial_border_block_ignores_padding(self):
        m = np.ones((10, 10), np.uint8)
        out = downsample_mask(m, 8)
        assert out.shape == (2, 2)
        assert (out == 1).all()
        m[9, 9] = 0
        assert downsample_mask(m, 8).tolist() == [[1, 1], [1, 0]]

    def test_rejects_bad_rank_and_down(self):
        with pytest.raises(ShapeMismatch):
            downsample_mask(np.ones((2, 2, 2), np.uint8), 2)
        with pytest.raises(InvalidRange):
            downsample_mask(np.ones((2, 2), np.uint8), 0)


class TestOracleDenoiser:
    def test_zero_noise_at_consistent_state(self):
        target = np.random.default_rng(11).normal(size=(1, 1, 3, 3)) \
            .astype(np.float32)
        t = SCHED.step_plan[0]
        z = np.float32(np.sqrt(SCHED.abar(t))) * target
        eps, var = OracleDenoiser(SCHED, target).predict(z, "", t)
        assert np.allclose(eps, 0, atol=1e-6)
        assert (var == 0).all()

    def test_tag_selects_target(self):
        a = np.zeros((1, 1, 2, 2), np.float32)
        b = np.ones((1, 1, 2, 2), np.float32)
        ep = OracleDenoiser(SCHED, targets_by_tag={("col", 0): a,
                                                   ("col", 1): b})
        t = SCHED.step_plan[-1]
        z = np.full((1, 1, 2, 2), 0.3, np.float32)
        eps_a, _ = ep.predict(z, "", t, tag=("col", 0))
        eps_b, _ = ep.predict(z, "", t, tag=("col", 1))
        assert not np.allclose(eps_a, eps_b)
        assert ep.calls == [(t, ("col", 0)), (t, ("col", 1))]
        with pytest.raises(ShapeMismatch):
            ep.predict(z, "", t, tag=("row", 5))


class TestBoundaryReinject:
    def _scene(self):
        rng = np.random.default_rng(12)
        x_true = rng.uniform(0.2, 0.8, size=(2, 8, 8, 3)).astype(np.float32)
        masks = np.ones((2, 8, 8), np.uint8)
        masks[:, 2:6, 3:7] = 0
        x_warp = x_true * masks[:, :, :, None]
        return x_true, x_warp, masks

    def test_identity_codec_touches_only_unknown_cells(self):
        x_true, x_warp, masks = self._scene()
        codec = IdentityCodec()
        sched = SCHED
        t = sched.step_plan[1]
        target = codec.encode(x_true)
        ep = OracleDenoiser(sched, target)
        z0_known = codec.encode(x_warp)
        z = sample_known(sched, target, t, np.random.default_rng(13))
        out = boundary_reinject(sched, z, z0_known, x_warp, masks, codec,
                                ep, "", t)
        sel = np.repeat(masks.astype(bool)[:, None], 3, axis=1)
        assert (out[sel] == z0_known[sel]).all()
        # oracle makes z0_tilde = target, so unknown cells pick up the
        # true content (up to float32 round trip)
        assert np.allclose(out[~sel], target[~sel], atol=1e-5)

    def test_all_known_mask_is_roundtrip_noop(self):
        x_true, _, _ = self._scene()
        masks = np.ones(x_true.shape[:3], np.uint8)
        codec = IdentityCodec()
        z0_known = codec.encode(x_true)
        z = np.random.default_rng(14).normal(
            size=z0_known.shape).astype(np.float32)
        out = boundary_reinject(SCHED, z, z0_known, x_true, masks, codec,
                                ZeroDenoiser(), "", SCHED.step_plan[0])
        assert (out == z0_known).all()

    def test_avgpool_boundary_band_error_strictly_decreases(self):
        # latent cells straddling the mask edge average true content
        # with the black hole; compositing the clean estimate before
        # re-encoding must bring them closer to the true encoding
        rng = np.random.default_rng(15)
        x_true = rng.uniform(0.2, 0.8, size=(2, 32, 32, 3)) \
            .astype(np.float32)
        masks = np.ones((2, 32, 32), np.uint8)
        masks[:, 9:23, 10:21] = 0  # hole off the 8-px block grid
        x_warp = x_true * masks[:, :, :, None]
        codec = AvgPoolCodec(8)
        z_true = codec.encode(x_true)
        z0_old = codec.encode(x_warp)
        ep = OracleDenoiser(SCHED, z_true)  # z0_tilde decodes the truth
        t = SCHED.step_plan[0]
        z = rng.normal(size=z_true.shape).astype(np.float32)
        z0_new = boundary_reinject(SCHED, z, z0_old, x_warp, masks, codec,
                                   ep, "", t)
        blocks = masks.reshape(2, 4, 8, 4, 8)
        band = ((blocks.min(axis=(2, 4)) == 0)
                & (blocks.max(axis=(2, 4)) == 1))  # partly known cells
        assert band.any()
        sel = np.repeat(band[:, None], 3, axis=1)
        err_old = np.mean((z0_old[sel] - z_true[sel]) ** 2)
        err_new = np.mean((z0_new[sel] - z_true[sel]) ** 2)
        assert err_new < err_old
