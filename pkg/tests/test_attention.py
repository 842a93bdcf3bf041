"""Mask-restricted multi-head attention, feed-forward, and cross attention."""

from dataclasses import replace

import numpy as np
import pytest

from htp.attention import (
    AttnWeights,
    CrossWeights,
    MlpWeights,
    attention_probs,
    cross_mhsa,
    ffn_block,
    sft_mhsa,
    to_additive_mask,
)
from htp.core import NEG_INF, RngStream
from htp.verify import _random_attn, _random_binary_mask, _random_mlp, naive_attention, naive_ffn


class TestAdditiveMask:
    def test_all_ones_maps_to_zeros(self):
        assert np.array_equal(to_additive_mask(np.ones((2, 3, 3))), np.zeros((2, 3, 3)))

    def test_identity_mask(self):
        out = to_additive_mask(np.eye(4))
        assert np.all(np.diag(out) == 0.0)
        assert np.all(out[~np.eye(4, dtype=bool)] == NEG_INF)

    def test_roundtrip_bijection(self):
        mask = _random_binary_mask(RngStream(1), 2, 5)
        add = to_additive_mask(mask)
        assert np.array_equal(add == 0.0, mask == 1.0)

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError, match="mask not binary"):
            to_additive_mask(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestMaskedAttention:
    def test_full_mask_equals_dense_oracle(self):
        rng = RngStream(2)
        for trial in range(10):
            heads = (1, 2)[trial % 2]
            dim = 4 * heads
            tokens = rng.normal((2, 4, dim))
            w = _random_attn(rng, dim, heads)
            full = to_additive_mask(np.ones((2, 4, 4)))
            assert np.max(np.abs(sft_mhsa(tokens, full, w) - naive_attention(tokens, None, w))) < 1e-12

    def test_masked_two_head_instance(self):
        # J=1, F=4, D=4, h=2 with a random mask against the loop oracle
        rng = RngStream(3)
        tokens = rng.normal((1, 4, 4))
        w = _random_attn(rng, 4, 2)
        mask = _random_binary_mask(rng, 1, 4)
        add = to_additive_mask(mask)
        probs = attention_probs(tokens, add, w)
        assert np.all(probs[np.broadcast_to((mask == 0.0)[:, None], probs.shape)] == 0.0)
        assert np.max(np.abs(probs.sum(axis=-1) - 1.0)) < 1e-12
        assert np.max(np.abs(sft_mhsa(tokens, add, w) - naive_attention(tokens, add, w))) < 1e-12

    def test_output_is_combination_of_supported_values_only(self):
        # zeroing a value row outside the support of a query must not change it
        rng = RngStream(4)
        tokens = rng.normal((1, 4, 4))
        w = _random_attn(rng, 4, 2)
        mask = np.ones((1, 4, 4))
        mask[0, 0, 3] = mask[0, 3, 0] = 0.0
        out = sft_mhsa(tokens, to_additive_mask(mask), w)
        tokens_mod = tokens.copy()
        tokens_mod[0, 3] += 100.0  # frame 3 is outside frame 0's support
        out_mod = sft_mhsa(tokens_mod, to_additive_mask(mask), w)
        assert np.array_equal(out[0, 0], out_mod[0, 0])

    def test_zero_value_projection_is_residual(self):
        rng = RngStream(5)
        tokens = rng.normal((2, 3, 4))
        w = replace(_random_attn(rng, 4, 2), wv=np.zeros((4, 4)))
        assert np.array_equal(sft_mhsa(tokens, None, w), tokens)

    def test_all_masked_row_raises(self):
        rng = RngStream(6)
        tokens = rng.normal((1, 3, 4))
        add = np.zeros((1, 3, 3))
        add[0, 1, :] = NEG_INF  # manually broken row
        with pytest.raises(ValueError, match="empty support"):
            sft_mhsa(tokens, add, _random_attn(rng, 4, 2))

    def test_frame_permutation_consistency(self):
        rng = RngStream(7)
        tokens = rng.normal((2, 5, 8))
        w = _random_attn(rng, 8, 4)
        add = to_additive_mask(_random_binary_mask(rng, 2, 5))
        perm = np.array([4, 2, 0, 3, 1])
        out = sft_mhsa(tokens, add, w)
        out_p = sft_mhsa(tokens[:, perm], add[:, perm][:, :, perm], w)
        assert np.max(np.abs(out_p - out[:, perm])) < 1e-12


class TestFfn:
    def test_zero_mlp_is_identity(self):
        tokens = RngStream(8).normal((2, 3, 4))
        mlp = MlpWeights(
            w1=np.zeros((4, 8)), b1=np.zeros(8), w2=np.zeros((8, 4)), b2=np.zeros(4),
            ln_scale=np.ones(4), ln_shift=np.zeros(4),
        )
        assert np.array_equal(ffn_block(tokens, mlp), tokens)

    def test_constant_rows_see_zero_mean_input(self):
        # LN of a constant row is ~0, so the MLP contributes only its bias path
        mlp = MlpWeights(
            w1=np.full((4, 4), 100.0), b1=np.zeros(4), w2=np.eye(4), b2=np.zeros(4),
            ln_scale=np.ones(4), ln_shift=np.zeros(4),
        )
        tokens = np.full((1, 2, 4), 7.0)
        out = ffn_block(tokens, mlp)
        assert np.max(np.abs(out - tokens)) < 1e-2

    def test_matches_loop_oracle(self):
        rng = RngStream(9)
        for _ in range(5):
            tokens = rng.normal((2, 3, 4))
            mlp = _random_mlp(rng, 4, 8)
            assert np.max(np.abs(ffn_block(tokens, mlp) - naive_ffn(tokens, mlp))) < 1e-12


class TestCrossAttention:
    def _weights(self, rng, dim, heads):
        a = _random_attn(rng, dim, heads)
        return CrossWeights(
            wq=a.wq, wk=a.wk, wv=a.wv, wo=a.wo, heads=heads,
            ln_q_scale=a.ln_scale, ln_q_shift=a.ln_shift,
            ln_kv_scale=a.ln_scale, ln_kv_shift=a.ln_shift,
        )

    def test_degenerates_to_self_attention(self):
        # condensed == full with shared norms reproduces masked-free self-attention
        rng = RngStream(10)
        tokens = rng.normal((2, 4, 8))
        w = self._weights(rng, 8, 2)
        self_attn = AttnWeights(
            wq=w.wq, wk=w.wk, wv=w.wv, wo=w.wo, heads=2,
            ln_scale=w.ln_q_scale, ln_shift=w.ln_q_shift,
        )
        assert np.array_equal(cross_mhsa(tokens, tokens, w), sft_mhsa(tokens, None, self_attn))

    def test_output_length_restored(self):
        rng = RngStream(11)
        full = rng.normal((3, 7, 8))
        for kept in (1, 3, 7):
            out = cross_mhsa(full, rng.normal((3, kept, 8)), self._weights(rng, 8, 2))
            assert out.shape == (3, 7, 8)

    def test_single_condensed_token_gets_all_attention(self):
        rng = RngStream(12)
        full = rng.normal((1, 5, 4))
        condensed = rng.normal((1, 1, 4))
        w = self._weights(rng, 4, 2)
        from htp.core import layer_norm, linear

        kv = layer_norm(condensed, w.ln_kv_scale, w.ln_kv_shift)
        expected = linear(np.repeat(linear(kv, w.wv), 5, axis=1), w.wo) + full
        assert np.max(np.abs(cross_mhsa(full, condensed, w) - expected)) < 1e-12

    def test_empty_condensed_rejected(self):
        rng = RngStream(13)
        with pytest.raises(ValueError):
            cross_mhsa(rng.normal((1, 4, 4)), rng.normal((1, 0, 4)), self._weights(rng, 4, 2))
