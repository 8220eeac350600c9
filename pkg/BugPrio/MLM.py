import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from BugPrio import Ops
from BugPrio.Checkpoint import ModelState
from BugPrio.Config import plannedSteps, stageRng
from BugPrio.Corpus import composeText
from BugPrio.Encoder import TRAIN, encode
from BugPrio.Ops import IGNORE_INDEX
from BugPrio.Tokenizer import MASK, frame
from BugPrio.Trainer import TrainLog, Trainer, batchStream
from BugPrio.Warning import DegenerateInputError, no_content

log = logging.getLogger(__name__)

MASK_RATE = 0.15
# share of selected positions turned into MASK / a random token; the rest stay
MASK_SHARE, RANDOM_SHARE = 0.8, 0.1


@dataclass
class MaskedEntry:
    inputIds: List[int]
    attentionMask: List[int]
    targets: List[int]
    positions: List[int]
    kinds: List[str]


def maskCount(n, rate=MASK_RATE):
    # rounds half up; never zero
    return max(1, int(np.floor(rate * n + 0.5)))


def dynamicMask(seq, vocab, rng, rate=MASK_RATE):
    """
    Pick maskCount(n) content positions uniformly without replacement and
    corrupt them 80/10/10 (MASK / random non-special token / unchanged).
    Targets hold the original ids there and IGNORE_INDEX everywhere else.
    """

    content = seq.contentPositions()
    if not content:
        raise DegenerateInputError(no_content)

    chosen = sorted(int(p) for p in rng.choice(content, size=maskCount(len(content), rate), replace=False))
    inputs = list(seq.ids)
    targets = [IGNORE_INDEX] * len(seq.ids)
    kinds = []
    for pos in chosen:
        targets[pos] = seq.ids[pos]
        u = rng.random()
        if u < MASK_SHARE:
            inputs[pos] = MASK
            kinds.append("mask")
        elif u < MASK_SHARE + RANDOM_SHARE:
            inputs[pos] = vocab.randomTokenId(rng)
            kinds.append("random")
        else:
            kinds.append("keep")

    return MaskedEntry(inputs, list(seq.attentionMask), targets, chosen, kinds)


def expandVariants(seq, vocab, rng, k=10, rate=MASK_RATE):
    return [dynamicMask(seq, vocab, rng, rate) for _ in range(k)]


def mlmLoss(logits, targets):
    return Ops.crossEntropy(logits, targets, IGNORE_INDEX)


def mlmForward(state, entries, mode=TRAIN, rng=None):
    """Masked-LM loss of a batch of MaskedEntry, logits only at masked positions."""

    ids = np.array([e.inputIds for e in entries], dtype=np.int64)
    padMask = np.array([e.attentionMask for e in entries], dtype=np.float64)
    targets = np.array([e.targets for e in entries], dtype=np.int64).reshape(-1)

    hidden = encode(ids, padMask, state.encoderParams(), mode, rng)
    rows = np.flatnonzero(targets != IGNORE_INDEX)
    picked = Ops.gatherRows(hidden, rows)
    # output projection shares the token embedding table
    logits = Ops.add(Ops.matmul(picked, Ops.transpose(state.tensors["tokenEmbedding"])), state.tensors["mlm.bias"])
    return mlmLoss(logits, targets[rows])


def frameReports(reports, vocab, maxLen):
    return [frame(vocab.encode(composeText(r)), maxLen) for r in reports]


def pretrainMLM(reports, vocab, config, state=None, trainLog=None):
    """
    First pre-training stage. Starts from `state` or, when None, a fresh
    randomly initialized model; returns a new state tagged 'mlm'.

    Every epoch visits each report `mlm.variants` times, each visit drawing
    a fresh mask, so the k-fold variant expansion is never materialized.
    """

    stage = config.stage("mlm")
    trainLog = trainLog or TrainLog()
    if state is None:
        state = ModelState.fresh(config.encoderConfig(vocab.size), vocab, stageRng(config.seed, "init"))
    state = state.clone()
    rng = stageRng(config.seed, "mlm")

    maxLen = min(stage.maxLen, state.config.maxLen)
    seqs = [s for s in frameReports(reports, vocab, maxLen) if s.contentPositions()]
    if not seqs:
        raise DegenerateInputError(no_content)

    total = plannedSteps(len(seqs), stage.batch, stage.epochs, stage.steps, stage.variants)
    log.info("MLM pre-training: %d reports, %d steps", len(seqs), total)
    trainer = Trainer(state, config, "mlm", total, trainLog)
    batches = batchStream(len(seqs), stage.batch, rng, repeats=stage.variants)

    while not trainer.done:
        index = next(batches)
        entries = [dynamicMask(seqs[i], vocab, rng, stage.maskRate) for i in index]
        trainer.step(lambda: (mlmForward(state, entries, TRAIN, rng), {}))

    state.stage = "mlm"
    state.run = {
        "stage": "mlm",
        "seed": config.seed,
        "batch": stage.batch,
        "lr": stage.lr,
        "epochs": stage.epochs,
        "warmup": stage.warmup,
        "maxLen": maxLen,
        "maskRate": stage.maskRate,
        "variants": stage.variants,
        "plannedSteps": total,
        "reports": len(seqs),
    }
    return state
