import math
from dataclasses import asdict, dataclass

import numpy as np

from BugPrio import Ops
from BugPrio.Graph import Tensor, constant, parameter
from BugPrio.Warning import ConfigError, ShapeError, invalid_config, shape_mismatch

TRAIN, EVAL = "train", "eval"


@dataclass
class EncoderConfig:
    vocabSize: int
    layers: int = 2
    heads: int = 2
    dModel: int = 32
    dff: int = 128
    maxLen: int = 64
    dropout: float = 0.1
    attentionDropout: float = 0.1

    @property
    def dHead(self):
        return self.dModel // self.heads

    def validate(self):
        problems = []
        if self.vocabSize <= 260:
            problems.append("vocabSize must exceed 260")
        if self.layers < 0:
            problems.append("layers must be >= 0")
        if self.heads < 1 or self.dModel % self.heads:
            problems.append("dModel (%d) must be divisible by heads (%d)" % (self.dModel, self.heads))
        if self.dff < 1:
            problems.append("dff must be positive")
        if self.maxLen < 3:
            problems.append("maxLen must be >= 3")
        for name in ("dropout", "attentionDropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                problems.append("%s must lie in [0, 1)" % name)
        if problems:
            raise ConfigError(invalid_config % "; ".join(problems))
        return self

    def toDict(self):
        return asdict(self)


def parameterShapes(config):
    """Name -> shape of every encoder tensor, in a fixed order."""

    d, dk = config.dModel, config.dHead
    shapes = {
        "tokenEmbedding": (config.vocabSize, d),
        "positionEmbedding": (config.maxLen, d),
    }
    for l in range(config.layers):
        prefix = "layer%d." % l
        for proj in ("wQ", "wK", "wV"):
            shapes[prefix + proj] = (d, d)
        for h in range(config.heads):
            for proj in ("wQ", "wK", "wV"):
                shapes[prefix + "head%d.%s" % (h, proj)] = (d, dk)
        shapes[prefix + "wO"] = (config.heads * dk, d)
        shapes[prefix + "ln1Gain"] = (d,)
        shapes[prefix + "ln1Bias"] = (d,)
        shapes[prefix + "w1"] = (d, config.dff)
        shapes[prefix + "b1"] = (config.dff,)
        shapes[prefix + "w2"] = (config.dff, d)
        shapes[prefix + "b2"] = (d,)
        shapes[prefix + "ln2Gain"] = (d,)
        shapes[prefix + "ln2Bias"] = (d,)
    return shapes


class EncoderParams:
    """
    All learnable tensors of the stacked encoder, keyed by name.
    Embedding tables are stored one row per token / position.
    """

    def __init__(self, config, tensors):
        self.config = config
        self.tensors = tensors

    @classmethod
    def init(cls, config, rng, dtype=np.float32, std=0.02):
        tensors = {}
        for name, shape in parameterShapes(config).items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf.endswith("Gain"):
                value = np.ones(shape)
            elif leaf.startswith("b") or leaf.endswith("Bias"):
                value = np.zeros(shape)
            else:
                value = rng.normal(0.0, std, size=shape)
            tensors[name] = parameter(value.astype(dtype), name=name)
        return cls(config, tensors)

    def layer(self, l):
        prefix = "layer%d." % l
        return {k[len(prefix):]: v for k, v in self.tensors.items() if k.startswith(prefix)}

    def __getitem__(self, name):
        return self.tensors[name]


def maskBias(padMask, dtype):
    # 0 where attended, -inf on pad keys; broadcasts over query rows
    padMask = np.asarray(padMask)
    bias = np.where(padMask > 0, 0.0, -np.inf).astype(dtype)
    return Tensor(np.expand_dims(bias, -2))


def embed(ids, params):
    ids = np.asarray(ids, dtype=np.int64)
    config = params.config
    length = ids.shape[-1]
    if length > config.maxLen:
        raise ShapeError(shape_mismatch % ("embed", ids.shape, (config.maxLen,)))
    tokens = Ops.embedding(params["tokenEmbedding"], ids)
    positions = Ops.embedding(params["positionEmbedding"], np.arange(length))
    return Ops.add(tokens, positions)


def attentionHead(Q, K, V, padMask, dropoutRate=0.0, rng=None, returnWeights=False):
    """
    softmax(Q K^T / sqrt(d_k)) V over the non-pad keys. Works on a single
    sequence (len x d_k) or a batch (B x len x d_k).
    """

    Q, K, V = constant(Q), constant(K), constant(V)
    if Q.shape[-1] != K.shape[-1] or K.shape[-2] != V.shape[-2]:
        raise ShapeError(shape_mismatch % ("attentionHead", Q.shape, K.shape))

    dk = Q.shape[-1]
    scores = Ops.scale(Ops.matmul(Q, Ops.transpose(K)), 1.0 / math.sqrt(dk))
    weights = Ops.softmax(Ops.add(scores, maskBias(padMask, Q.dtype)))
    out = Ops.matmul(Ops.dropout(weights, dropoutRate, rng), V)
    if returnWeights:
        return out, weights
    return out


def multiHead(x, layerParams, padMask, config, mode=EVAL, rng=None):
    # Q, K, V projections, then a second per-head projection, concat, W_O
    Q = Ops.matmul(x, layerParams["wQ"])
    K = Ops.matmul(x, layerParams["wK"])
    V = Ops.matmul(x, layerParams["wV"])

    rate = config.attentionDropout if mode == TRAIN else 0.0
    heads = []
    for h in range(config.heads):
        head = "head%d." % h
        heads.append(
            attentionHead(
                Ops.matmul(Q, layerParams[head + "wQ"]),
                Ops.matmul(K, layerParams[head + "wK"]),
                Ops.matmul(V, layerParams[head + "wV"]),
                padMask,
                rate,
                rng,
            )
        )
    return Ops.matmul(Ops.concat(heads, axis=-1), layerParams["wO"])


def encoderLayer(x, layerParams, padMask, config, mode=EVAL, rng=None):
    rate = config.dropout if mode == TRAIN else 0.0

    attended = Ops.dropout(multiHead(x, layerParams, padMask, config, mode, rng), rate, rng)
    hidden = Ops.layerNorm(Ops.add(x, attended), layerParams["ln1Gain"], layerParams["ln1Bias"])

    inner = Ops.relu(Ops.add(Ops.matmul(hidden, layerParams["w1"]), layerParams["b1"]))
    ffn = Ops.add(Ops.matmul(inner, layerParams["w2"]), layerParams["b2"])
    ffn = Ops.dropout(ffn, rate, rng)
    return Ops.layerNorm(Ops.add(hidden, ffn), layerParams["ln2Gain"], layerParams["ln2Bias"])


def encode(ids, padMask, params, mode=EVAL, rng=None):
    """
    Contextual vectors for framed token ids, (len,) -> (len, d_m) or
    (B, len) -> (B, len, d_m). Dropout only in train mode.
    """

    x = embed(ids, params)
    for l in range(params.config.layers):
        x = encoderLayer(x, params.layer(l), padMask, params.config, mode, rng)
    return x


def encodeSequence(seq, params, mode=EVAL, rng=None):
    return encode(np.asarray(seq.ids), np.asarray(seq.attentionMask), params, mode, rng)
