"""Co-attention normalization and the query-conditioned clip fusion."""

import numpy as np
import pytest
import torch

from oracles import check_gradient, matmul_oracle
from qdvmr.fusion import (
    VisualFusion,
    clip_level_text,
    normalize_similarity,
    query_aware_video,
)


class TestNormalizeSimilarity:
    def test_uniform_on_zeros(self):
        s = torch.zeros(2, 2)  # N x L
        s_rows, _ = normalize_similarity(s)
        assert torch.allclose(s_rows, torch.full((2, 2), 0.5))

    def test_saturation(self):
        s = torch.zeros(2, 2)
        s[1, 0] += 100.0  # dominant word-1/clip-0 entry
        s_rows, _ = normalize_similarity(s)
        assert s_rows[0, 1] == pytest.approx(1.0, abs=1e-6)

    def test_sums_random(self):
        rng = np.random.default_rng(0)
        s = torch.tensor(rng.normal(size=(4, 3)))  # N=4 words, L=3 clips
        s_rows, s_cols = normalize_similarity(s)
        assert s_rows.shape == (3, 4) and s_cols.shape == (3, 4)
        np.testing.assert_allclose(s_rows.sum(dim=-1).numpy(), np.ones(3), atol=1e-6)
        np.testing.assert_allclose(s_cols.sum(dim=-2).numpy(), np.ones(4), atol=1e-6)

    def test_sums_under_random_padding(self):
        rng = np.random.default_rng(1)
        for trial in range(10):
            N, L = int(rng.integers(2, 6)), int(rng.integers(2, 7))
            s = torch.tensor(rng.normal(size=(N, L)))
            token_mask = torch.tensor(rng.integers(0, 2, size=N).astype(bool))
            clip_mask = torch.tensor(rng.integers(0, 2, size=L).astype(bool))
            token_mask[0] = True
            clip_mask[0] = True
            s_rows, s_cols = normalize_similarity(s, token_mask, clip_mask)
            row_sums = s_rows.sum(dim=-1)[clip_mask]
            np.testing.assert_allclose(row_sums.numpy(), 1.0, atol=1e-6)
            col_sums = s_cols.sum(dim=-2)[token_mask]
            np.testing.assert_allclose(col_sums.numpy(), 1.0, atol=1e-6)
            assert s_rows[:, ~token_mask].abs().sum() == 0
            assert s_cols[~clip_mask].abs().sum() == 0


class TestClipLevelText:
    def test_one_hot_selection(self):
        s_rows = torch.tensor([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        text = torch.arange(9, dtype=torch.float32).reshape(3, 3)
        out = clip_level_text(s_rows, text)
        assert torch.equal(out[0], text[1])
        assert torch.equal(out[1], text[0])

    def test_uniform_average(self):
        s_rows = torch.full((2, 4), 0.25)
        text = torch.randn(4, 5)
        out = clip_level_text(s_rows, text)
        assert torch.allclose(out[0], text.mean(dim=0), atol=1e-6)

    def test_matmul_oracle(self):
        rng = np.random.default_rng(2)
        s = rng.normal(size=(4, 3))
        t = rng.normal(size=(3, 6))
        out = clip_level_text(torch.tensor(s), torch.tensor(t)).numpy()
        np.testing.assert_allclose(out, matmul_oracle(s, t), atol=1e-6)


class TestQueryAwareVideo:
    def test_identity_composition(self):
        eye = torch.eye(3)
        video = torch.randn(3, 5)
        out = query_aware_video(eye, eye, video)
        assert torch.allclose(out, video, atol=1e-6)

    def test_shape(self):
        out = query_aware_video(torch.rand(6, 4), torch.rand(6, 4), torch.randn(6, 8))
        assert out.shape == (6, 8)

    def test_composed_matmul_oracle(self):
        rng = np.random.default_rng(3)
        s_r = rng.normal(size=(5, 3))
        s_c = rng.normal(size=(5, 3))
        v = rng.normal(size=(5, 4))
        out = query_aware_video(
            torch.tensor(s_r), torch.tensor(s_c), torch.tensor(v)
        ).numpy()
        expected = matmul_oracle(matmul_oracle(s_r, s_c.T), v)
        np.testing.assert_allclose(out, expected, atol=1e-6)


class TestVisualFusion:
    def test_shape_contract(self):
        fusion = VisualFusion(64)
        out = fusion(
            torch.randn(9, 64), torch.randn(9, 64), torch.randn(9, 64), torch.randn(64)
        )
        assert fusion.proj.in_features == 320
        assert out.shape == (9, 64)

    def test_zero_weights_zero_output(self):
        fusion = VisualFusion(8)
        with torch.no_grad():
            fusion.proj.weight.zero_()
            fusion.proj.bias.zero_()
        out = fusion(torch.randn(3, 8), torch.randn(3, 8), torch.randn(3, 8), torch.randn(8))
        assert out.abs().sum() == 0

    def test_hadamard_terms_against_scalar_loop(self):
        rng = np.random.default_rng(4)
        H = 4
        video = torch.tensor(rng.normal(size=(3, H)), dtype=torch.float64)
        v2q = torch.tensor(rng.normal(size=(3, H)), dtype=torch.float64)
        q2v = torch.tensor(rng.normal(size=(3, H)), dtype=torch.float64)
        sentence = torch.tensor(rng.normal(size=(H,)), dtype=torch.float64)
        fusion = VisualFusion(H).double()
        with torch.no_grad():
            fusion.proj.weight.copy_(torch.eye(5 * H)[: H * 5 : 5].repeat(1, 1))
        # Check the concatenation layout directly through a identity-slice probe:
        # pick out each block with a crafted weight and compare elementwise.
        for block, source in enumerate([video, v2q, video * v2q, video * q2v]):
            with torch.no_grad():
                fusion.proj.weight.zero_()
                fusion.proj.bias.zero_()
                for h in range(H):
                    fusion.proj.weight[h, block * H + h] = 1.0
            out = fusion(video, v2q, q2v, sentence).detach().numpy()
            expected = np.zeros((3, H))
            for i in range(3):
                for h in range(H):
                    expected[i, h] = float(source[i, h])
            np.testing.assert_allclose(out, expected, atol=1e-9)

    def test_dim_mismatch(self):
        fusion = VisualFusion(8)
        with pytest.raises(ValueError):
            fusion(torch.randn(3, 6), torch.randn(3, 6), torch.randn(3, 6), torch.randn(6))


class TestPermutationEquivariance:
    def test_word_permutation_leaves_v2q_unchanged(self):
        rng = np.random.default_rng(5)
        s = torch.tensor(rng.normal(size=(4, 3)))  # N x L
        text = torch.tensor(rng.normal(size=(4, 6)))
        s_rows, _ = normalize_similarity(s)
        base = clip_level_text(s_rows, text)
        perm = torch.randperm(4)
        s_rows_p, _ = normalize_similarity(s[perm])
        permuted = clip_level_text(s_rows_p, text[perm])
        assert torch.allclose(base, permuted, atol=1e-6)


class TestFusionGradient:
    def test_full_path_gradient(self):
        """Differentiate the whole similarity -> enhanced-clip path."""
        torch.manual_seed(0)
        fusion = VisualFusion(6).double()
        rng = np.random.default_rng(6)
        probe = torch.tensor(rng.normal(size=(4, 6)))

        def loss_fn(s, video, text):
            s_rows, s_cols = normalize_similarity(s)
            v2q = clip_level_text(s_rows, text)
            q2v = query_aware_video(s_rows, s_cols, video)
            out = fusion(video, v2q, q2v, text.mean(dim=0))
            return (out * probe).sum()

        s = torch.tensor(rng.normal(size=(3, 4)))
        video = torch.tensor(rng.normal(size=(4, 6)))
        text = torch.tensor(rng.normal(size=(3, 6)))
        check_gradient(loss_fn, [s, video, text])
