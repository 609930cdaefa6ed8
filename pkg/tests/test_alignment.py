"""Projection contracts, cosine similarity, and the two alignment losses."""

import math

import numpy as np
import pytest
import torch

from oracles import check_gradient, cosine_matrix_oracle
from qdvmr.alignment import (
    FeatureProjection,
    clipwise_similarity,
    cosine_similarity,
    global_contrastive_loss,
    gpa_loss,
    masked_mean,
    part_aware_loss,
)


class TestProjection:
    def test_shape_contract(self):
        proj = FeatureProjection(32, 64)
        out = proj(torch.randn(20, 32))
        assert out.shape == (20, 64)

    def test_identity_single_layer(self):
        proj = FeatureProjection(8, 8, num_layers=1)
        with torch.no_grad():
            proj.net[0].weight.copy_(torch.eye(8))
            proj.net[0].bias.zero_()
        x = torch.randn(5, 8)
        assert torch.equal(proj(x), x)

    def test_weight_sharing_same_output(self):
        proj = FeatureProjection(6, 12)
        proj.eval()
        x = torch.randn(4, 6)
        assert torch.equal(proj(x), proj(x.clone()))

    def test_dim_mismatch(self):
        proj = FeatureProjection(6, 12)
        with pytest.raises(ValueError, match="trailing dim"):
            proj(torch.randn(3, 7))


class TestCosineSimilarity:
    def test_orthonormal_basis(self):
        t = torch.tensor([[1.0, 0.0]])
        v = torch.tensor([[1.0, 0.0], [0.0, 1.0]])
        s = cosine_similarity(t, v)
        assert torch.allclose(s, torch.tensor([[1.0, 0.0]]))

    def test_self_similarity(self):
        x = torch.randn(6, 8)
        s = cosine_similarity(x, x)
        assert torch.allclose(torch.diagonal(s), torch.ones(6), atol=1e-6)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(2)
        t = rng.normal(size=(5, 8))
        v = rng.normal(size=(7, 8))
        s = cosine_similarity(torch.tensor(t), torch.tensor(v)).numpy()
        np.testing.assert_allclose(s, cosine_matrix_oracle(t, v), atol=1e-6)

    def test_bounds_and_scale_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            t = torch.tensor(rng.normal(size=(4, 6)))
            v = torch.tensor(rng.normal(size=(5, 6)))
            s = cosine_similarity(t, v)
            assert (s.abs() <= 1 + 1e-6).all()
            scaled = t.clone()
            scaled[2] *= float(rng.uniform(0.1, 10.0))
            s2 = cosine_similarity(scaled, v)
            assert torch.allclose(s[2], s2[2], atol=1e-6)

    def test_zero_row_stays_finite(self):
        t = torch.zeros(2, 4)
        v = torch.randn(3, 4)
        assert torch.isfinite(cosine_similarity(t, v)).all()


class TestClipwiseSimilarity:
    def test_symmetric_mean(self):
        s = torch.tensor([[1.0, 0.0], [0.0, 1.0]])
        assert torch.allclose(clipwise_similarity(s), torch.tensor([0.5, 0.5]))

    def test_single_word_identity(self):
        s = torch.randn(1, 7)
        assert torch.equal(clipwise_similarity(s), s[0])

    def test_padded_words_excluded(self):
        s = torch.randn(3, 5)
        padded = torch.cat([s, torch.full((2, 5), 99.0)], dim=0)
        mask = torch.tensor([True, True, True, False, False])
        assert torch.allclose(
            clipwise_similarity(padded, mask), clipwise_similarity(s), atol=1e-6
        )


class TestPartAwareLoss:
    def test_confident_correct_near_zero(self):
        eps = 1e-6
        s = torch.tensor([1.0 - 2 * eps])  # p = 1 - eps
        loss = part_aware_loss(s, torch.tensor([1.0]), eps=eps)
        assert float(loss) <= 2 * eps

    def test_half_half_closed_form(self):
        s = torch.tensor([0.0, 0.0])  # p = 0.5 each
        loss = part_aware_loss(s, torch.tensor([1.0, 0.0]))
        assert float(loss) == pytest.approx(2 * math.log(2), abs=1e-6)

    def test_flipping_label_increases_loss(self):
        s = torch.tensor([0.9])
        low = part_aware_loss(s, torch.tensor([1.0]))
        high = part_aware_loss(s, torch.tensor([0.0]))
        assert float(high) > float(low)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            part_aware_loss(torch.zeros(3), torch.zeros(4))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        s = torch.tensor(rng.uniform(-1, 1, size=8))
        c = torch.tensor(rng.integers(0, 2, size=8).astype(float))
        perm = torch.randperm(8)
        assert float(part_aware_loss(s, c)) == pytest.approx(
            float(part_aware_loss(s[perm], c[perm])), abs=1e-12
        )

    def test_batch_mean_of_per_sample_sums(self):
        s = torch.zeros(2, 3)
        c = torch.tensor([[1.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        expected = (3 * math.log(2) + 3 * math.log(2)) / 2
        assert float(part_aware_loss(s, c)) == pytest.approx(expected, abs=1e-6)

    def test_padded_clips_excluded(self):
        s = torch.tensor([[0.5, -0.3, 42.0]])
        c = torch.tensor([[1.0, 0.0, 1.0]])
        mask = torch.tensor([[True, True, False]])
        trimmed = part_aware_loss(s[:, :2], c[:, :2])
        assert float(part_aware_loss(s, c, mask)) == pytest.approx(float(trimmed))


class TestGlobalContrastiveLoss:
    def test_single_sample_exact_zero(self):
        v = torch.randn(1, 8)
        t = torch.randn(1, 8)
        assert float(global_contrastive_loss(v, t, temperature=0.5)) == 0.0

    def test_orthogonal_pair_closed_form(self):
        v = torch.eye(2)
        t = torch.eye(2)
        loss = global_contrastive_loss(v, t, temperature=1.0)
        assert float(loss) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-6)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(9)
        v = torch.tensor(rng.normal(size=(5, 6)))
        t = torch.tensor(rng.normal(size=(5, 6)))
        perm = torch.randperm(5)
        a = global_contrastive_loss(v, t, 0.07)
        b = global_contrastive_loss(v[perm], t[perm], 0.07)
        assert float(a) == pytest.approx(float(b), rel=1e-9)

    def test_non_negative(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            v = torch.tensor(rng.normal(size=(4, 5)))
            t = torch.tensor(rng.normal(size=(4, 5)))
            assert float(global_contrastive_loss(v, t, 0.2)) >= 0.0

    def test_symmetric_flag(self):
        v = torch.randn(3, 4, dtype=torch.float64)
        t = torch.randn(3, 4, dtype=torch.float64)
        one_way = global_contrastive_loss(v, t, 0.1)
        reverse = global_contrastive_loss(t, v, 0.1)
        both = global_contrastive_loss(v, t, 0.1, symmetric=True)
        assert float(both) == pytest.approx((float(one_way) + float(reverse)) / 2, rel=1e-9)

    def test_temperature_validation(self):
        with pytest.raises(ValueError):
            global_contrastive_loss(torch.randn(2, 3), torch.randn(2, 3), temperature=0.0)


class TestGpaLoss:
    def test_zero(self):
        assert float(gpa_loss(torch.tensor(0.0), torch.tensor(0.0))) == 0.0

    def test_mean(self):
        assert float(gpa_loss(torch.tensor(2.0), torch.tensor(0.0))) == 1.0

    def test_symmetric(self):
        a, b = torch.tensor(0.7), torch.tensor(1.9)
        assert float(gpa_loss(a, b)) == float(gpa_loss(b, a))


class TestMaskedMean:
    def test_matches_trimmed_mean(self):
        x = torch.randn(2, 5, 3)
        mask = torch.tensor([[True] * 3 + [False] * 2, [True] * 5])
        out = masked_mean(x, mask)
        assert torch.allclose(out[0], x[0, :3].mean(dim=0), atol=1e-6)
        assert torch.allclose(out[1], x[1].mean(dim=0), atol=1e-6)


class TestAlignmentGradients:
    """Spot checks; the acceptance suite repeats these at higher counts."""

    def test_part_aware_gradient(self):
        rng = np.random.default_rng(7)
        text = torch.tensor(rng.normal(size=(4, 8)))
        video = torch.tensor(rng.normal(size=(4, 8)))
        labels = torch.tensor(rng.integers(0, 2, size=4).astype(float))

        def loss_fn(t, v):
            s = cosine_similarity(t, v)
            return part_aware_loss(clipwise_similarity(s), labels)

        check_gradient(loss_fn, [text, video])

    def test_global_contrastive_gradient(self):
        rng = np.random.default_rng(8)
        v = torch.tensor(rng.normal(size=(4, 8)))
        t = torch.tensor(rng.normal(size=(4, 8)))
        check_gradient(lambda a, b: global_contrastive_loss(a, b, 0.3), [v, t])
