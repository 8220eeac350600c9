from collections import Counter
import logging

import numpy as np
import pytest

from BugPrio.Checkpoint import ModelState
from BugPrio.Contrastive import (
    AugmentMethod,
    augment,
    clLoss,
    pretrainCL,
    represent,
    uniformity,
)
from BugPrio.Corpus import BugReport
from BugPrio.Encoder import EncoderConfig, EncoderParams, encodeSequence
from BugPrio.Graph import backward, parameter
from BugPrio.Tokenizer import MASK, frame
from BugPrio.Trainer import TrainLog
from BugPrio.Warning import AugmentError, DegenerateInputError


def bruteForceLoss(reps, positives, tau):
    n = len(reps)
    cos = lambda a, b: a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    total = 0.0
    for i in range(n):
        denominator = sum(np.exp(cos(reps[i], positives[j]) / tau) for j in range(n))
        total += -np.log(np.exp(cos(reps[i], positives[i]) / tau) / denominator)
    return total / n


class TestAugment:
    def test_swap_two_words(self, rng):
        assert augment("a b", "swap", rng) == "b a"

    def test_swap_keeps_words_and_spacing(self, rng):
        text = "null  pointer\tin parser"
        out = augment(text, AugmentMethod.SWAP_TWO_WORDS, rng)
        assert sorted(out.split()) == sorted(text.split())
        assert out != text
        assert "  " in out and "\t" in out

    def test_delete_frequencies(self):
        rng = np.random.default_rng(2)
        counts = Counter(augment("a b c", "delete", rng) for _ in range(3000))
        assert set(counts) == {"b c", "a c", "a b"}
        for text in counts:
            assert abs(counts[text] / 3000 - 1 / 3) < 0.03

    def test_too_short_for_word_methods(self, rng):
        with pytest.raises(AugmentError):
            augment("single", "swap", rng)
        with pytest.raises(AugmentError):
            augment("single", "delete", rng)

    def test_mask_one_token(self, rng):
        seq = frame([40, 41, 42], 8)
        out = augment(seq, "mask", rng)
        changed = [i for i in range(8) if out.ids[i] != seq.ids[i]]
        assert len(changed) == 1
        assert out.ids[changed[0]] == MASK
        assert changed[0] in seq.contentPositions()
        assert out.attentionMask == seq.attentionMask

    def test_mask_needs_content(self, rng):
        with pytest.raises(AugmentError):
            augment(frame([], 4), "mask", rng)

    def test_unknown_method(self, rng):
        with pytest.raises(ValueError):
            augment("a b", "shuffle", rng)


class TestRepresent:
    def params(self, rng, layers=1):
        config = EncoderConfig(vocabSize=300, layers=layers, heads=2, dModel=8, dff=16, maxLen=12)
        return EncoderParams.init(config, rng, dtype=np.float64, std=0.3)

    def test_constant_outputs(self, rng):
        params = self.params(rng, layers=0)
        params["positionEmbedding"].value[:] = 0
        params["tokenEmbedding"].value[:] = np.arange(8.0)
        np.testing.assert_allclose(represent(frame([1, 2, 3], 8), params), np.arange(8.0))

    def test_padding_invariance(self, rng):
        params = self.params(rng)
        np.testing.assert_allclose(represent(frame([5, 6, 7], 6), params), represent(frame([5, 6, 7], 12), params), atol=1e-12)

    def test_masked_row_mean(self, rng):
        params = self.params(rng)
        seq = frame([5, 6, 7, 8], 10)
        hidden = encodeSequence(seq, params).value
        np.testing.assert_allclose(represent(seq, params), hidden[:6].mean(axis=0))


class TestClLoss:
    def test_single_pair_is_zero(self, rng):
        assert clLoss(rng.normal(size=(1, 5)), rng.normal(size=(1, 5)), 0.05).item() == 0.0

    def test_orthonormal_pair(self):
        eye = np.eye(2)
        assert clLoss(eye, eye, 1.0).item() == pytest.approx(np.log(1 + np.exp(-1)), abs=1e-6)

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_brute_force(self, n):
        rng = np.random.default_rng(n)
        reps, positives = rng.normal(size=(n, 6)), rng.normal(size=(n, 6))
        assert abs(clLoss(reps, positives, 0.1).item() - bruteForceLoss(reps, positives, 0.1)) < 1e-9

    def test_scale_invariance(self, rng):
        reps, positives = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        base = clLoss(reps, positives, 0.05).item()
        assert abs(clLoss(3.7 * reps, 3.7 * positives, 0.05).item() - base) < 1e-6

    def test_non_negative(self, rng):
        for _ in range(20):
            assert clLoss(rng.normal(size=(5, 4)), rng.normal(size=(5, 4)), 0.5).item() >= 0

    def test_temperature_monotone(self, rng):
        reps = rng.normal(size=(4, 6))
        positives = reps + 0.05 * rng.normal(size=(4, 6))
        losses = [clLoss(reps, positives, tau).item() for tau in (1.0, 0.5, 0.1, 0.05)]
        assert losses == sorted(losses, reverse=True)

    def test_peaked_limit(self):
        eye = np.eye(3)
        assert clLoss(eye, eye, 0.01).item() < 1e-6

    def test_zero_vector(self, rng):
        reps = rng.normal(size=(2, 3))
        reps[1] = 0
        with pytest.raises(DegenerateInputError):
            clLoss(reps, rng.normal(size=(2, 3)), 0.05)

    def test_gradient_flows_to_both_sides(self, rng):
        reps = parameter(rng.normal(size=(3, 4)), name="reps")
        positives = parameter(rng.normal(size=(3, 4)), name="positives")
        backward(clLoss(reps, positives, 0.1))
        assert np.abs(reps.grad).sum() > 0
        assert np.abs(positives.grad).sum() > 0


class TestUniformity:
    def test_identical_rows(self):
        assert uniformity(np.ones((4, 3))) == pytest.approx(0.0)

    def test_spread_rows_lower(self):
        assert uniformity(np.eye(4)) < uniformity(np.ones((4, 4)) + 0.01 * np.eye(4))


class TestPretrainCL:
    def init(self, vocab, config):
        return ModelState.fresh(config.encoderConfig(vocab.size), vocab, np.random.default_rng(0))

    def test_tags_and_logs(self, corpus, vocab, tinyConfig, quietLog):
        state = pretrainCL(corpus, vocab, self.init(vocab, tinyConfig), tinyConfig, trainLog=quietLog)
        assert state.stage == "cl"
        assert state.run["method"] == "swap"
        assert state.run["tau"] == 0.05
        records = [r for r in quietLog.records if r["stage"] == "cl"]
        assert len(records) == 4
        assert {"alignment", "uniformity", "skipped", "loss", "lr", "step"} <= set(records[0])

    @pytest.mark.parametrize("method", ["swap", "delete", "mask"])
    def test_every_method_runs(self, corpus, vocab, tinyConfig, quietLog, method):
        state = pretrainCL(corpus[:20], vocab, self.init(vocab, tinyConfig), tinyConfig, method=method, tau=0.1, trainLog=quietLog)
        assert state.run["method"] == method
        assert state.run["tau"] == 0.1

    def test_short_reports_skipped(self, corpus, vocab, tinyConfig, quietLog, caplog):
        reports = corpus[:10] + [BugReport("short-1", "crash"), BugReport("short-2", "hang")]
        with caplog.at_level(logging.WARNING):
            state = pretrainCL(reports, vocab, self.init(vocab, tinyConfig), tinyConfig, trainLog=quietLog)
        assert state.run["skipped"] == 2
        assert quietLog.records[-1]["skipped"] == 2
        assert "2 reports too short" in caplog.text

    def test_nothing_to_augment(self, vocab, tinyConfig, quietLog):
        reports = [BugReport("1", "crash"), BugReport("2", "hang")]
        with pytest.raises(AugmentError):
            pretrainCL(reports, vocab, self.init(vocab, tinyConfig), tinyConfig, trainLog=quietLog)

    def test_reproducible(self, corpus, vocab, tinyConfig):
        a, b = TrainLog(quiet=True), TrainLog(quiet=True)
        pretrainCL(corpus, vocab, self.init(vocab, tinyConfig), tinyConfig, trainLog=a)
        pretrainCL(corpus, vocab, self.init(vocab, tinyConfig), tinyConfig, trainLog=b)
        assert a.records == b.records

    @pytest.mark.slow
    def test_alignment_increases(self, corpus, vocab, tinyConfig):
        improved = 0
        for seed in range(3):
            trainLog = TrainLog(quiet=True)
            config = tinyConfig.derive({"seed": seed, "cl.steps": 200, "cl.warmup": 20, "cl.lr": 1e-3})
            pretrainCL(corpus, vocab, self.init(vocab, config), config, trainLog=trainLog)
            align = [r["alignment"] for r in trainLog.records]
            improved += np.median(align[-20:]) > np.median(align[:20])
        assert improved >= 2
