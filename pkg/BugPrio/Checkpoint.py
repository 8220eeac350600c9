import json
import struct

import numpy as np

from BugPrio.Corpus import PRIORITIES
from BugPrio.Encoder import EncoderConfig, EncoderParams, parameterShapes
from BugPrio.Graph import parameter
from BugPrio.Warning import (
    CheckpointError,
    StageError,
    bad_magic,
    bad_version,
    hash_mismatch,
    missing_tensor,
    tensor_shape,
    truncated,
    wrong_stage,
)

MAGIC = b"BUGPRIO\x00"
VERSION = 1
STAGE_TAGS = ("mlm", "cl", "finetuned")


def headShapes(config):
    return {
        "mlm.bias": (config.vocabSize,),
        "classifier.weight": (len(PRIORITIES), config.dModel),
    }


def expectedShapes(config):
    shapes = parameterShapes(config)
    shapes.update(headShapes(config))
    return shapes


class ModelState:
    """
    Everything a stage hands to the next one: encoder config, every named
    tensor (encoder, tied LM-head bias, priority classifier W), the stage
    tag and the hash of the vocabulary the model was trained with.
    """

    def __init__(self, config, tensors, stage, vocabHash, vocab=None):
        self.config = config
        self.tensors = tensors
        self.stage = stage
        self.vocabHash = vocabHash
        self.vocab = vocab
        self.run = {}

    @classmethod
    def fresh(cls, config, vocab, rng, dtype=np.float32):
        encoder = EncoderParams.init(config, rng, dtype=dtype)
        tensors = dict(encoder.tensors)
        tensors["mlm.bias"] = parameter(np.zeros(config.vocabSize, dtype=dtype), name="mlm.bias")
        tensors["classifier.weight"] = parameter(
            rng.normal(0.0, 0.02, size=headShapes(config)["classifier.weight"]).astype(dtype),
            name="classifier.weight",
        )
        return cls(config, tensors, "init", vocab.hash(), vocab)

    def encoderParams(self):
        names = parameterShapes(self.config)
        return EncoderParams(self.config, {k: self.tensors[k] for k in names})

    def arrays(self):
        return {k: t.value for k, t in self.tensors.items()}

    def clone(self, stage=None):
        tensors = {k: parameter(t.value, name=k) for k, t in self.tensors.items()}
        return ModelState(self.config, tensors, stage or self.stage, self.vocabHash, self.vocab)


def saveCheckpoint(state, path, run=None):
    entries = []
    chunks = []
    offset = 0
    for name in expectedShapes(state.config):
        data = np.ascontiguousarray(state.tensors[name].value, dtype="<f4").tobytes()
        entries.append({
            "name": name,
            "shape": list(state.tensors[name].shape),
            "offset": offset,
            "nbytes": len(data),
        })
        chunks.append(data)
        offset += len(data)

    header = {
        "version": VERSION,
        "stage": state.stage,
        "vocabHash": state.vocabHash,
        "config": state.config.toDict(),
        "run": run or {},
        "tensors": entries,
    }
    headerBytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(headerBytes)))
        fh.write(headerBytes)
        for chunk in chunks:
            fh.write(chunk)


def readHeader(path, data):
    if len(data) < len(MAGIC) + 8 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(bad_magic % path)
    version, headerLen = struct.unpack_from("<II", data, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(bad_version % (path, version, VERSION))
    start = len(MAGIC) + 8
    if len(data) < start + headerLen:
        raise CheckpointError(truncated % (path, "header"))
    try:
        header = json.loads(data[start:start + headerLen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(truncated % (path, exc))
    return header, data[start + headerLen:]


def loadCheckpoint(path, vocab=None):
    """
    Read a checkpoint, validating every tensor shape against the stored
    config and, when a vocabulary is supplied, its hash. Nothing is
    returned unless the whole file checks out.
    """

    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(truncated % (path, exc))

    header, blob = readHeader(path, data)
    try:
        config = EncoderConfig(**header["config"])
        stage = header["stage"]
        vocabHash = header["vocabHash"]
        entries = {e["name"]: e for e in header["tensors"]}
    except (KeyError, TypeError) as exc:
        raise CheckpointError(truncated % (path, "header field %s" % exc))

    if vocab is not None and vocab.hash() != vocabHash:
        raise CheckpointError(hash_mismatch % (vocabHash[:12], vocab.hash()[:12]))

    tensors = {}
    for name, shape in expectedShapes(config).items():
        entry = entries.get(name)
        if entry is None:
            raise CheckpointError(missing_tensor % name)
        if tuple(entry["shape"]) != tuple(shape):
            raise CheckpointError(tensor_shape % (name, tuple(entry["shape"]), tuple(shape)))
        end = entry["offset"] + entry["nbytes"]
        if entry["nbytes"] != 4 * int(np.prod(shape)) or end > len(blob):
            raise CheckpointError(truncated % (path, "tensor '%s'" % name))
        value = np.frombuffer(blob, dtype="<f4", count=int(np.prod(shape)), offset=entry["offset"])
        tensors[name] = parameter(value.reshape(shape).astype(np.float32), name=name)

    state = ModelState(config, tensors, stage, vocabHash, vocab)
    state.run = header.get("run", {})
    return state


def requireStage(state, allowed, command):
    if state.stage not in allowed:
        raise StageError(wrong_stage % (command, "/".join(allowed), state.stage))
