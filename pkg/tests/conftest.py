import json

import numpy as np
import pytest

from BugPrio.Config import RunConfig
from BugPrio.Corpus import composeText
from BugPrio.Synthetic import makeCorpus
from BugPrio.Tokenizer import trainBPE
from BugPrio.Trainer import TrainLog

TINY = {
    "vocabSize": 320,
    "encoder.layers": 1,
    "encoder.heads": 2,
    "encoder.dModel": 16,
    "encoder.dff": 32,
    "encoder.maxLen": 32,
    "mlm.batch": 8,
    "mlm.steps": 6,
    "mlm.warmup": 2,
    "mlm.maxLen": 32,
    "mlm.variants": 2,
    "cl.batch": 8,
    "cl.steps": 4,
    "cl.warmup": 1,
    "cl.maxLen": 32,
    "finetune.batch": 8,
    "finetune.epochs": 2,
    "finetune.warmup": 1,
    "finetune.maxLen": 32,
    "ablate.seeds": 1,
}


@pytest.fixture(scope="session")
def corpus():
    return makeCorpus(60, seed=3)


@pytest.fixture(scope="session")
def vocab(corpus):
    return trainBPE([composeText(r) for r in corpus], 320)


@pytest.fixture
def tinyConfig():
    return RunConfig.build(overrides=TINY).validate()


@pytest.fixture
def quietLog():
    return TrainLog(quiet=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def writeJsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write((record if isinstance(record, str) else json.dumps(record)) + "\n")
    return str(path)
