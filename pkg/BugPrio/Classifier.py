import logging
import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from BugPrio import Ops
from BugPrio.Config import stageRng
from BugPrio.Corpus import PRIORITIES, composeText, labelHistogram
from BugPrio.Encoder import EVAL, TRAIN, encode
from BugPrio.Metrics import argmaxLabels, bucketAccuracy, evaluatePredictions, wordCount
from BugPrio.Tokenizer import collate, frame
from BugPrio.Trainer import TrainLog, Trainer, epochOrder
from BugPrio.Warning import DegenerateInputError, absent_class, empty_test, empty_train

log = logging.getLogger(__name__)

DEFAULT_MAX_LEN = 256
PREDICT_BATCH = 64


@dataclass
class PriorityDistribution:
    probs: Dict[str, float]

    @property
    def label(self):
        # first maximum wins, i.e. the lowest class index
        values = [self.probs[p] for p in PRIORITIES]
        return PRIORITIES[int(np.argmax(values))]

    def toDict(self):
        return {"probs": dict(self.probs), "label": self.label}


def meanPool(outputs, padMask):
    return Ops.maskedMean(outputs, padMask)


def classifierLogits(state, ids, padMask, mode=EVAL, rng=None):
    hidden = encode(ids, padMask, state.encoderParams(), mode, rng)
    pooled = meanPool(hidden, padMask)
    return Ops.matmul(pooled, Ops.transpose(state.tensors["classifier.weight"]))


def effectiveMaxLen(state, maxLen):
    return min(maxLen or DEFAULT_MAX_LEN, state.config.maxLen)


def encodeReports(reports, vocab, maxLen):
    return [frame(vocab.encode(composeText(r)), maxLen) for r in reports]


def predictBatch(reports, state, maxLen=DEFAULT_MAX_LEN):
    """Class probabilities (N x 5) for a list of reports, in eval mode."""

    maxLen = effectiveMaxLen(state, maxLen)
    seqs = encodeReports(reports, state.vocab, maxLen)
    out = []
    for start in range(0, len(seqs), PREDICT_BATCH):
        ids, padMask = collate(seqs[start:start + PREDICT_BATCH])
        logits = classifierLogits(state, ids, padMask, EVAL)
        out.append(Ops.softmaxArray(logits.value.astype(np.float64), -1))
    if not out:
        return np.zeros((0, len(PRIORITIES)))
    return np.concatenate(out, axis=0)


def predict(report, state, maxLen=DEFAULT_MAX_LEN):
    probs = predictBatch([report], state, maxLen)[0]
    return PriorityDistribution({p: float(v) for p, v in zip(PRIORITIES, probs)})


def weightedF1(reports, state, maxLen):
    probs = predictBatch(reports, state, maxLen)
    pred, _ = argmaxLabels(probs)
    return evaluatePredictions([r.label for r in reports], pred).weighted["f1"]


def classWeights(labels, mode, nClass=len(PRIORITIES)):
    """
    Per-class loss weights. "balanced" gives class c the weight
    n / (k * n_c) over the k classes present; absent classes get 0.
    """

    if mode == "none":
        return None
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=nClass).astype(np.float64)
    present = counts > 0
    weights = np.zeros(nClass)
    weights[present] = counts.sum() / (present.sum() * counts[present])
    return weights


def finetune(train, valid, state, config, trainLog=None, maxLen=None):
    """
    Train encoder and priority head jointly with cross entropy over the
    labeled training reports. After every epoch the validation weighted F1
    is computed; the returned state (tagged 'finetuned') is a copy of the
    parameters at the best epoch, the later one on ties. Without validation reports the last
    epoch is kept.
    """

    if not train:
        raise DegenerateInputError(empty_train)

    stage = config.stage("finetune")
    maxLen = effectiveMaxLen(state, maxLen or stage.maxLen)
    trainLog = trainLog or TrainLog()
    state = state.clone()
    rng = stageRng(config.seed, "finetune")

    for label, count in labelHistogram(train).counts.items():
        if count == 0:
            log.warning(absent_class % label)

    seqs = encodeReports(train, state.vocab, maxLen)
    labels = np.array([r.label for r in train], dtype=np.int64)
    weights = classWeights(labels, stage.classWeights)
    stepsPerEpoch = math.ceil(len(seqs) / stage.batch)
    total = stage.epochs * stepsPerEpoch
    trainer = Trainer(state, config, "finetune", total, trainLog)

    best, bestF1, bestEpoch = state.clone(), -1.0, 0
    for epoch in range(1, stage.epochs + 1):
        order = epochOrder(len(seqs), rng)
        for start in range(0, len(order), stage.batch):
            index = order[start:start + stage.batch]
            ids, padMask = collate([seqs[i] for i in index])
            batchLabels = labels[index]
            trainer.step(
                lambda: (Ops.crossEntropy(classifierLogits(state, ids, padMask, TRAIN, rng), batchLabels, weights=weights), {"epoch": epoch})
            )

        if valid:
            score = weightedF1(valid, state, maxLen)
            trainLog.write(stage="finetune", epoch=epoch, validF1=score)
            if score >= bestF1:
                best, bestF1, bestEpoch = state.clone(), score, epoch
        else:
            best, bestEpoch = state.clone(), epoch

    best.stage = "finetuned"
    best.run = {
        "stage": "finetune",
        "seed": config.seed,
        "batch": stage.batch,
        "lr": stage.lr,
        "epochs": stage.epochs,
        "warmup": stage.warmup,
        "maxLen": maxLen,
        "classWeights": stage.classWeights,
        "plannedSteps": total,
        "reports": len(seqs),
        "bestEpoch": bestEpoch,
        "bestValidF1": bestF1 if valid else None,
    }
    return best


def lengthBucketReport(test, state, maxLen=DEFAULT_MAX_LEN, probs=None):
    if probs is None:
        probs = predictBatch(test, state, maxLen)
    pred = np.asarray(probs).argmax(axis=-1)
    lengths = [wordCount(composeText(r)) for r in test]
    return bucketAccuracy(lengths, [r.label for r in test], pred)


def evaluate(test, state, maxLen=DEFAULT_MAX_LEN):
    if not test:
        raise DegenerateInputError(empty_test)

    probs = predictBatch(test, state, maxLen)
    pred, ties = argmaxLabels(probs)
    report = evaluatePredictions([r.label for r in test], pred)
    report.ties = ties
    report.lengthBuckets = lengthBucketReport(test, state, maxLen, probs)
    return report
