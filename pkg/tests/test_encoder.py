import math

import numpy as np
import pytest

from BugPrio import Ops
from BugPrio.Encoder import (
    EVAL,
    TRAIN,
    EncoderConfig,
    EncoderParams,
    attentionHead,
    embed,
    encode,
    encodeSequence,
    encoderLayer,
    multiHead,
    parameterShapes,
)
from BugPrio.Graph import Tensor, gradCheckParams
from BugPrio.Tokenizer import frame
from BugPrio.Warning import ConfigError, ShapeError


def makeParams(rng, layers=1, heads=2, dModel=8, dff=16, maxLen=12, vocabSize=300, std=0.3):
    config = EncoderConfig(vocabSize=vocabSize, layers=layers, heads=heads, dModel=dModel, dff=dff, maxLen=maxLen)
    return EncoderParams.init(config.validate(), rng, dtype=np.float64, std=std)


def layerNormRef(y, gain, bias):
    mu = y.mean(axis=-1, keepdims=True)
    var = y.var(axis=-1, keepdims=True)
    return (y - mu) / np.sqrt(var + 1e-5) * gain + bias


def softmaxRef(s):
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def encoderLayerRef(x, p, mask, heads):
    v = {k: t.value for k, t in p.items()}
    Q, K, V = x @ v["wQ"], x @ v["wK"], x @ v["wV"]
    outs = []
    for h in range(heads):
        q, k, val = (M @ v["head%d.%s" % (h, name)] for M, name in ((Q, "wQ"), (K, "wK"), (V, "wV")))
        s = q @ k.T / math.sqrt(q.shape[-1])
        s[:, mask == 0] = -np.inf
        outs.append(softmaxRef(s) @ val)
    attended = np.concatenate(outs, axis=-1) @ v["wO"]
    hidden = layerNormRef(x + attended, v["ln1Gain"], v["ln1Bias"])
    ffn = np.maximum(hidden @ v["w1"] + v["b1"], 0) @ v["w2"] + v["b2"]
    return layerNormRef(hidden + ffn, v["ln2Gain"], v["ln2Bias"])


class TestEncoderConfig:
    def test_heads_must_divide_model_width(self):
        with pytest.raises(ConfigError):
            EncoderConfig(vocabSize=300, heads=3, dModel=32).validate()

    def test_vocab_must_hold_specials(self):
        with pytest.raises(ConfigError):
            EncoderConfig(vocabSize=260).validate()

    def test_shapes(self):
        shapes = parameterShapes(EncoderConfig(vocabSize=300, layers=2, heads=2, dModel=32, dff=128, maxLen=64))
        assert shapes["tokenEmbedding"] == (300, 32)
        assert shapes["positionEmbedding"] == (64, 32)
        assert shapes["layer1.head1.wV"] == (32, 16)
        assert shapes["layer0.wO"] == (32, 32)
        assert shapes["layer1.w1"] == (32, 128)


class TestEmbed:
    def test_single_token(self, rng):
        params = makeParams(rng)
        out = embed([42], params).value
        np.testing.assert_allclose(out[0], params["tokenEmbedding"].value[42] + params["positionEmbedding"].value[0])

    def test_zero_positions(self, rng):
        params = makeParams(rng)
        params["positionEmbedding"].value[:] = 0
        np.testing.assert_allclose(embed([3, 9, 4], params).value, params["tokenEmbedding"].value[[3, 9, 4]])

    def test_repeated_token(self, rng):
        params = makeParams(rng)
        out = embed([7, 7], params).value
        pos = params["positionEmbedding"].value
        np.testing.assert_allclose(out[1] - out[0], pos[1] - pos[0])

    def test_longer_than_position_table(self, rng):
        params = makeParams(rng, maxLen=4)
        with pytest.raises(ShapeError):
            embed([1, 2, 3, 4, 5], params)


class TestAttentionHead:
    def test_single_position(self, rng):
        V = rng.normal(size=(1, 4))
        out = attentionHead(rng.normal(size=(1, 4)), rng.normal(size=(1, 4)), V, np.ones(1)).value
        np.testing.assert_allclose(out, V)

    def test_identical_keys_average_unpadded_values(self, rng):
        K = np.tile(rng.normal(size=(1, 4)), (5, 1))
        V = rng.normal(size=(5, 4))
        mask = np.array([1, 1, 1, 0, 0])
        out = attentionHead(rng.normal(size=(5, 4)), K, V, mask).value
        np.testing.assert_allclose(out, np.tile(V[:3].mean(axis=0), (5, 1)))

    def test_matches_double_loop(self, rng):
        Q, K, V = (rng.normal(size=(3, 4)) for _ in range(3))
        out = attentionHead(Q, K, V, np.ones(3)).value
        expected = np.zeros((3, 4))
        for i in range(3):
            scores = [Q[i] @ K[j] / 2.0 for j in range(3)]
            weights = np.exp(scores) / np.sum(np.exp(scores))
            for j in range(3):
                expected[i] += weights[j] * V[j]
        np.testing.assert_allclose(out, expected)

    def test_pad_keys_get_no_weight(self, rng):
        Q, K, V = (rng.normal(size=(4, 4)) for _ in range(3))
        _, weights = attentionHead(Q, K, V, np.array([1, 1, 0, 0]), returnWeights=True)
        np.testing.assert_array_equal(weights.value[:, 2:], 0.0)
        np.testing.assert_allclose(weights.value.sum(axis=-1), 1.0)

    def test_batched(self, rng):
        Q, K, V = (rng.normal(size=(2, 3, 4)) for _ in range(3))
        mask = np.array([[1, 1, 1], [1, 1, 0]])
        out = attentionHead(Q, K, V, mask).value
        np.testing.assert_allclose(out[1], attentionHead(Q[1], K[1], V[1], mask[1]).value)


class TestMultiHead:
    def test_single_head(self, rng):
        params = makeParams(rng, heads=1)
        p = params.layer(0)
        x = rng.normal(size=(5, 8))
        mask = np.ones(5)
        out = multiHead(Tensor(x), p, mask, params.config).value

        v = {k: t.value for k, t in p.items()}
        head = attentionHead(x @ v["wQ"] @ v["head0.wQ"], x @ v["wK"] @ v["head0.wK"], x @ v["wV"] @ v["head0.wV"], mask)
        np.testing.assert_allclose(out, head.value @ v["wO"])

    def test_zeroed_second_head(self, rng):
        params = makeParams(rng, heads=2)
        p = params.layer(0)
        p["head1.wV"].value[:] = 0
        p["wO"].value[:] = np.eye(8)
        out = multiHead(Tensor(rng.normal(size=(4, 8))), p, np.ones(4), params.config).value
        np.testing.assert_allclose(out[:, 4:], 0.0)

    def test_permutation_equivariance(self, rng):
        params = makeParams(rng)
        x = rng.normal(size=(5, 8))
        perm = np.array([3, 0, 4, 1, 2])
        p = params.layer(0)
        out = encoderLayer(Tensor(x), p, np.ones(5), params.config).value
        permuted = encoderLayer(Tensor(x[perm]), p, np.ones(5), params.config).value
        np.testing.assert_allclose(permuted, out[perm], atol=1e-12)


class TestEncoderLayer:
    def test_matches_reference(self, rng):
        params = makeParams(rng)
        x = rng.normal(size=(6, 8))
        mask = np.array([1, 1, 1, 1, 0, 0])
        out = encoderLayer(Tensor(x), params.layer(0), mask, params.config, EVAL).value
        np.testing.assert_allclose(out, encoderLayerRef(x, params.layer(0), mask, 2), atol=1e-10)

    def test_zero_values_reduce_to_layer_norm(self, rng):
        params = makeParams(rng)
        p = params.layer(0)
        p["wV"].value[:] = 0
        x = rng.normal(size=(3, 8))
        hidden = encoderLayerRef(x, p, np.ones(3), 2)
        v = {k: t.value for k, t in p.items()}
        first = layerNormRef(x, v["ln1Gain"], v["ln1Bias"])
        ffn = np.maximum(first @ v["w1"] + v["b1"], 0) @ v["w2"] + v["b2"]
        np.testing.assert_allclose(hidden, layerNormRef(first + ffn, v["ln2Gain"], v["ln2Bias"]))
        out = encoderLayer(Tensor(x), p, np.ones(3), params.config).value
        np.testing.assert_allclose(out, hidden, atol=1e-10)

    def test_shape_preserved(self, rng):
        params = makeParams(rng)
        for length in (1, 4, 12):
            out = encoderLayer(Tensor(rng.normal(size=(length, 8))), params.layer(0), np.ones(length), params.config)
            assert out.shape == (length, 8)


class TestEncode:
    def test_no_layers_is_embedding(self, rng):
        params = makeParams(rng, layers=0)
        ids = np.array([5, 6, 7])
        np.testing.assert_array_equal(encode(ids, np.ones(3), params).value, embed(ids, params).value)

    def test_eval_is_deterministic(self, rng):
        params = makeParams(rng, layers=2)
        seq = frame([10, 11, 12, 13], 8)
        first = encodeSequence(seq, params, EVAL, np.random.default_rng(0)).value
        second = encodeSequence(seq, params, EVAL, np.random.default_rng(1)).value
        np.testing.assert_array_equal(first, second)

    def test_train_mode_applies_dropout(self, rng):
        params = makeParams(rng, layers=2)
        seq = frame([10, 11, 12, 13], 8)
        a = encodeSequence(seq, params, TRAIN, np.random.default_rng(0)).value
        b = encodeSequence(seq, params, TRAIN, np.random.default_rng(1)).value
        assert not np.allclose(a, b)

    def test_padding_does_not_change_content_rows(self, rng):
        params = makeParams(rng, layers=2)
        short = encodeSequence(frame([10, 11, 12], 6), params).value
        long = encodeSequence(frame([10, 11, 12], 12), params).value
        np.testing.assert_allclose(short[:5], long[:5], atol=1e-12)

    def test_batch_matches_single(self, rng):
        params = makeParams(rng, layers=2)
        seqs = [frame([10, 11, 12], 8), frame([20, 21, 22, 23, 24], 8)]
        ids = np.array([s.ids for s in seqs])
        mask = np.array([s.attentionMask for s in seqs])
        batched = encode(ids, mask, params).value
        np.testing.assert_allclose(batched[0], encodeSequence(seqs[0], params).value, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_of_full_encoder(self, seed):
        rng = np.random.default_rng(seed)
        params = makeParams(rng, layers=2, heads=2, dModel=32, dff=128, maxLen=8)
        seq = frame([30, 31, 32, 33, 34], 8)
        readout = Tensor(rng.normal(size=(8, 32)) / 64.0)

        def lossFn():
            return Ops.sumAll(Ops.mul(encodeSequence(seq, params), readout))

        worst = gradCheckParams(lossFn, params.tensors, coordsPerTensor=8, rng=np.random.default_rng(100 + seed))
        assert worst < 1e-4
