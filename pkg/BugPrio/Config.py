import json
import math
from types import SimpleNamespace

import numpy as np

from BugPrio.Encoder import EncoderConfig
from BugPrio.Presets import presets
from BugPrio.Warning import ConfigError, bad_config_line, bad_value, invalid_config, unknown_key

STAGES = {"vocab": 0, "split": 1, "init": 2, "mlm": 3, "cl": 4, "finetune": 5}
METHODS = ("swap", "delete", "mask")
CLASS_WEIGHTS = ("none", "balanced")


def stageRng(seed, stage):
    # every stage gets its own stream off the master seed
    return np.random.default_rng(np.random.SeedSequence([int(seed), STAGES[stage]]))


def readConfigFile(path):
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineNo, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(bad_config_line % (path, lineNo, line))
            key, raw = line.split("=", 1)
            values[key.strip()] = raw.strip()
    return values


def parseOverrides(pairs):
    values = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(bad_config_line % ("--set", 0, pair))
        key, raw = pair.split("=", 1)
        values[key.strip()] = raw.strip()
    return values


class RunConfig:
    """
    Flat key=value run configuration: a preset (desk or full), then a
    config file, then command-line overrides, later sources winning.
    """

    def __init__(self, scale="desk"):
        if scale not in presets:
            raise ConfigError(unknown_key % ("scale=" + scale))
        self.scale = scale
        self.values = dict(presets[scale])

    @classmethod
    def build(cls, path=None, overrides=None):
        fileValues = readConfigFile(path) if path else {}
        overrides = dict(overrides or {})
        scale = overrides.pop("scale", None) or fileValues.pop("scale", None) or "desk"
        config = cls(scale)
        for key, raw in fileValues.items():
            config.set(key, raw)
        for key, raw in overrides.items():
            config.set(key, raw)
        return config

    def set(self, key, raw):
        if key not in self.values:
            raise ConfigError(unknown_key % key)
        default = self.values[key]
        kind = type(default)
        if isinstance(raw, kind) or (kind is float and isinstance(raw, int)):
            self.values[key] = kind(raw)
            return
        try:
            self.values[key] = kind(str(raw))
        except ValueError:
            raise ConfigError(bad_value % (key, raw, kind.__name__))

    def derive(self, overrides):
        config = RunConfig(self.scale)
        config.values = dict(self.values)
        for key, value in overrides.items():
            config.set(key, value)
        return config

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self):
        return self.values["seed"]

    def stage(self, name):
        prefix = name + "."
        return SimpleNamespace(**{k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)})

    def encoderConfig(self, vocabSize):
        enc = self.stage("encoder")
        return EncoderConfig(
            vocabSize=vocabSize,
            layers=enc.layers,
            heads=enc.heads,
            dModel=enc.dModel,
            dff=enc.dff,
            maxLen=enc.maxLen,
            dropout=enc.dropout,
            attentionDropout=enc.attentionDropout,
        )

    def validate(self, encoderMaxLen=None):
        v = self.values
        problems = []
        if v["vocabSize"] <= 260:
            problems.append("vocabSize must exceed 260")
        if v["encoder.dModel"] % max(v["encoder.heads"], 1) or v["encoder.heads"] < 1:
            problems.append("encoder.dModel must be divisible by encoder.heads")
        maxLen = encoderMaxLen or v["encoder.maxLen"]
        for stage in ("mlm", "cl", "finetune"):
            if v[stage + ".batch"] < 1:
                problems.append("%s.batch must be positive" % stage)
            if v[stage + ".lr"] < 0:
                problems.append("%s.lr must be non-negative" % stage)
            if v[stage + ".warmup"] < 0:
                problems.append("%s.warmup must be non-negative" % stage)
            if not 3 <= v[stage + ".maxLen"] <= maxLen:
                problems.append("%s.maxLen must lie in [3, %d]" % (stage, maxLen))
        for stage in ("mlm", "cl"):
            if v[stage + ".steps"] <= 0 and v[stage + ".epochs"] <= 0:
                problems.append("%s needs steps or epochs" % stage)
        if v["finetune.epochs"] < 1:
            problems.append("finetune.epochs must be >= 1")
        if not 0 < v["mlm.maskRate"] < 1:
            problems.append("mlm.maskRate must lie in (0, 1)")
        if v["mlm.variants"] < 1:
            problems.append("mlm.variants must be >= 1")
        if v["cl.tau"] <= 0:
            problems.append("cl.tau must be positive")
        if v["cl.method"] not in METHODS:
            problems.append("cl.method must be one of %s" % ", ".join(METHODS))
        if v["finetune.classWeights"] not in CLASS_WEIGHTS:
            problems.append("finetune.classWeights must be one of %s" % ", ".join(CLASS_WEIGHTS))
        if not 0 <= v["optim.beta1"] < 1 or not 0 <= v["optim.beta2"] < 1:
            problems.append("optim betas must lie in [0, 1)")
        if problems:
            raise ConfigError(invalid_config % "; ".join(problems))
        self.encoderConfig(v["vocabSize"]).validate()
        return self

    def toDict(self):
        snapshot = dict(self.values)
        snapshot["scale"] = self.scale
        return snapshot

    def dumps(self):
        return json.dumps(self.toDict(), sort_keys=True)


def plannedSteps(nItems, batch, epochs, steps=0, variants=1):
    if steps > 0:
        return steps
    return epochs * max(1, math.ceil(nItems * variants / batch))
