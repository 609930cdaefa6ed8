"""Query expansion, video-grounded word attention, and the word-prediction loss."""

import math

import numpy as np
import pytest
import torch

from oracles import check_gradient
from qdvmr.debias import MlmHead, QueryExpander, WordContextAttention, mlm_loss
from qdvmr.detrhead import MomentTransformer


def _encoder(hidden_dim=64, layers=1, seed=0):
    torch.manual_seed(seed)
    tf = MomentTransformer(
        hidden_dim=hidden_dim, num_heads=4, num_encoder_layers=layers,
        num_decoder_layers=1, dropout=0.0,
    )
    tf.eval()
    return tf


class TestQueryExpander:
    def test_shape_contract(self):
        tf = _encoder()
        exp = QueryExpander(3, 64)
        out, _ = exp(torch.randn(7, 64), tf.run_encoder)
        assert out.shape == (10, 64)

    def test_layout_tail_is_original_text(self):
        tf = _encoder()
        exp = QueryExpander(3, 64)
        text = torch.randn(5, 64)
        out, _ = exp(text, tf.run_encoder)
        assert torch.equal(out[3:], text)

    def test_encoder_weights_are_shared(self):
        """Perturbing the span predictor's encoder must change the expansion."""
        tf = _encoder()
        exp = QueryExpander(2, 64)
        text = torch.randn(4, 64)
        before, _ = exp(text, tf.run_encoder)
        with torch.no_grad():
            tf.encoder_layers[0].linear1.weight.add_(0.5)
        after, _ = exp(text, tf.run_encoder)
        assert not torch.allclose(before[:2], after[:2])

    def test_deterministic(self):
        tf = _encoder()
        exp = QueryExpander(3, 64)
        text = torch.randn(6, 64)
        a, _ = exp(text, tf.run_encoder)
        b, _ = exp(text, tf.run_encoder)
        assert torch.equal(a, b)

    def test_batched_with_mask(self):
        tf = _encoder()
        exp = QueryExpander(2, 64)
        text = torch.randn(3, 5, 64)
        mask = torch.ones(3, 5, dtype=torch.bool)
        mask[1, 3:] = False
        out, out_mask = exp(text, tf.run_encoder, mask)
        assert out.shape == (3, 7, 64)
        assert out_mask[:, :2].all()
        assert out_mask[1].tolist() == [True, True, True, True, True, False, False]

    def test_hidden_dim_mismatch(self):
        tf = _encoder()
        exp = QueryExpander(2, 32)
        with pytest.raises(ValueError, match="hidden dim"):
            exp(torch.randn(4, 64), tf.run_encoder)


class TestWordContextAttention:
    def test_zero_mlp_gives_residual_identity(self):
        attn = WordContextAttention(8, num_heads=2)
        with torch.no_grad():
            attn.mlp[2].weight.zero_()
            attn.mlp[2].bias.zero_()
        words = torch.randn(5, 8)
        out, _ = attn(words, torch.randn(7, 8))
        assert torch.allclose(out, words, atol=1e-7)

    def test_identical_clips_convex_degeneracy(self):
        attn = WordContextAttention(8, num_heads=2)
        row = torch.randn(8)
        clips = row.expand(6, 8).clone()
        words = torch.randn(4, 8)
        out, weights = attn(words, clips)
        assert out.shape == (4, 8)
        expected = words + attn.mlp(row.expand(4, 8))
        assert torch.allclose(out, expected, atol=1e-5)

    def test_weights_sum_to_one_with_padding(self):
        attn = WordContextAttention(16, num_heads=4)
        words = torch.randn(2, 5, 16)
        clips = torch.randn(2, 7, 16)
        mask = torch.ones(2, 7, dtype=torch.bool)
        mask[0, 4:] = False
        _, weights = attn(words, clips, mask)
        sums = weights.sum(dim=-1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-6)
        assert weights[0, :, :, 4:].abs().sum() == 0

    def test_all_clips_masked_degenerates_to_zero_context(self):
        attn = WordContextAttention(8, num_heads=2)
        words = torch.randn(1, 3, 8)
        clips = torch.randn(1, 4, 8)
        mask = torch.zeros(1, 4, dtype=torch.bool)
        out, weights = attn(words, clips, mask)
        assert weights.abs().sum() == 0
        expected = words + attn.mlp(torch.zeros_like(words))
        assert torch.allclose(out, expected, atol=1e-6)


class TestMlmLoss:
    def test_uniform_logits(self):
        head = MlmHead(16, vocab_size=100)
        with torch.no_grad():
            for layer in (head.net[0], head.net[2]):
                layer.weight.zero_()
                layer.bias.zero_()
        features = torch.randn(6, 16)
        loss = mlm_loss(features, [1, 4], [10, 20], head).detach()
        assert float(loss) == pytest.approx(math.log(100), abs=1e-6)

    def test_confident_correct(self):
        head = MlmHead(8, vocab_size=12)
        with torch.no_grad():
            head.net[0].weight.zero_()
            head.net[0].bias.zero_()
            head.net[2].weight.zero_()
            head.net[2].bias.fill_(-40.0)
            head.net[2].bias[3] = 40.0
        loss = mlm_loss(torch.randn(4, 8), [0, 2], [3, 3], head).detach()
        assert float(loss) <= 1e-6

    def test_matches_scalar_oracle(self):
        torch.manual_seed(1)
        head = MlmHead(8, vocab_size=15).double()
        features = torch.randn(6, 8, dtype=torch.float64)
        positions, golds = [0, 3, 5], [2, 7, 11]
        loss = mlm_loss(features, positions, golds, head).detach()
        logits = head(features).detach().numpy()
        expected = 0.0
        for p, g in zip(positions, golds):
            row = logits[p]
            log_norm = np.log(np.sum(np.exp(row - row.max()))) + row.max()
            expected += -(row[g] - log_norm)
        expected /= len(positions)
        assert float(loss) == pytest.approx(expected, abs=1e-6)

    def test_probability_rows_normalized(self):
        head = MlmHead(8, vocab_size=30)
        probs = head.probs(torch.randn(5, 8))
        assert torch.allclose(probs.sum(dim=-1), torch.ones(5), atol=1e-5)
        assert (probs >= 0).all()

    def test_empty_mask_set(self):
        head = MlmHead(8, vocab_size=10)
        with pytest.raises(ValueError):
            mlm_loss(torch.randn(3, 8), [], [], head)

    def test_all_positions_variant(self):
        head = MlmHead(8, vocab_size=10).double()
        features = torch.randn(4, 8, dtype=torch.float64)
        gold = [1, 2, 3, 4]
        loss = mlm_loss(features, [0], [1], head, all_positions=True, all_gold_ids=gold).detach()
        log_probs = head.log_probs(features).detach()
        expected = -float(np.mean([log_probs[i, g] for i, g in enumerate(gold)]))
        assert float(loss) == pytest.approx(expected, abs=1e-9)


class TestDebiasGradients:
    def test_mlm_gradient_wrt_words_and_clips(self):
        torch.manual_seed(2)
        attn = WordContextAttention(8, num_heads=2).double()
        head = MlmHead(8, vocab_size=9).double()
        words = torch.randn(5, 8, dtype=torch.float64)
        clips = torch.randn(6, 8, dtype=torch.float64)

        def loss_fn(w, v):
            grounded, _ = attn(w, v)
            return mlm_loss(grounded, [1, 3], [2, 5], head)

        check_gradient(loss_fn, [words, clips])


class TestScoreSelect:
    def test_score_select_shape_and_difference(self):
        tf = _encoder()
        text = torch.randn(6, 64)
        default = QueryExpander(3, 64, score_select=False)
        scored = QueryExpander(3, 64, score_select=True)
        with torch.no_grad():
            scored.tokens.copy_(default.tokens)
        a, _ = default(text, tf.run_encoder)
        b, _ = scored(text, tf.run_encoder)
        assert a.shape == b.shape == (9, 64)
        assert torch.equal(a[3:], b[3:])  # original text is appended either way


class TestBatchMlmLoss:
    def test_pooled_over_batch(self):
        from qdvmr.debias import batch_mlm_loss

        head = MlmHead(8, vocab_size=10).double()
        feats = torch.randn(2, 4, 8, dtype=torch.float64)
        loss = batch_mlm_loss(feats, [[0, 2], [1]], [[3, 4], [5]], head).detach()
        log_probs = head.log_probs(feats).detach()
        expected = -(log_probs[0, 0, 3] + log_probs[0, 2, 4] + log_probs[1, 1, 5]) / 3
        assert float(loss) == pytest.approx(float(expected), abs=1e-9)

    def test_all_positions_with_mask(self):
        from qdvmr.debias import batch_mlm_loss

        head = MlmHead(8, vocab_size=10).double()
        feats = torch.randn(1, 3, 8, dtype=torch.float64)
        ids = torch.tensor([[2, 4, 0]])
        mask = torch.tensor([[True, True, False]])
        loss = batch_mlm_loss(feats, [[0]], [[2]], head, all_positions=True,
                              token_ids=ids, token_mask=mask).detach()
        log_probs = head.log_probs(feats).detach()
        expected = -(log_probs[0, 0, 2] + log_probs[0, 1, 4]) / 2
        assert float(loss) == pytest.approx(float(expected), abs=1e-9)
