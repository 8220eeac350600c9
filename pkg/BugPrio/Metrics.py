import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from BugPrio.Corpus import PRIORITIES
from BugPrio.Warning import DegenerateInputError, argmax_ties, empty_test

log = logging.getLogger(__name__)

BUCKETS = ("0-100", "100-200", "200-300", "300-400", "400-500", ">500")


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    zeroSupport: bool = False

    def toDict(self):
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "zeroSupport": self.zeroSupport,
        }


@dataclass
class EvalReport:
    perClass: Dict[str, ClassMetrics]
    weighted: Dict[str, float]
    accuracy: float
    confusion: List[List[int]]
    lengthBuckets: Dict[str, float] = field(default_factory=dict)
    ties: int = 0

    def toDict(self):
        return {
            "perClass": {label: m.toDict() for label, m in self.perClass.items()},
            "weighted": dict(self.weighted),
            "accuracy": self.accuracy,
            "confusion": self.confusion,
            "lengthBuckets": dict(self.lengthBuckets),
            "ties": self.ties,
        }

    def toJson(self):
        return json.dumps(self.toDict(), sort_keys=True, indent=2)


def labelIndex(label):
    if isinstance(label, str):
        return PRIORITIES.index(label)
    return int(label)


def argmaxLabels(probs):
    """
    Row-wise argmax, lowest class index on ties. Returns the labels and
    the number of rows that had a tie at the top.
    """

    probs = np.asarray(probs)
    top = probs.max(axis=-1, keepdims=True)
    ties = int(((probs == top).sum(axis=-1) > 1).sum())
    if ties:
        log.warning(argmax_ties % ties)
    return probs.argmax(axis=-1), ties


def confusionMatrix(gold, pred, nClass=len(PRIORITIES)):
    # rows gold, columns predicted
    confusion = np.zeros((nClass, nClass), dtype=np.int64)
    for g, p in zip(gold, pred):
        confusion[labelIndex(g), labelIndex(p)] += 1
    return confusion


def safeDivide(a, b):
    return a / b if b else 0.0


def scoreConfusion(confusion):
    """
    Per-class precision, recall and F1, their support-weighted averages
    and accuracy from a confusion matrix. Classes with no gold items score
    0 and carry the zeroSupport flag; their weight in the averages is 0.
    """

    confusion = np.asarray(confusion, dtype=np.int64)
    total = int(confusion.sum())
    if total == 0:
        raise DegenerateInputError(empty_test)

    perClass = {}
    weighted = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    for i, label in enumerate(PRIORITIES):
        tp = int(confusion[i, i])
        predicted = int(confusion[:, i].sum())
        support = int(confusion[i, :].sum())

        precision = safeDivide(tp, predicted)
        recall = safeDivide(tp, support)
        f1 = safeDivide(2 * precision * recall, precision + recall)
        perClass[label] = ClassMetrics(precision, recall, f1, support, zeroSupport=support == 0)

        share = support / total
        weighted["precision"] += share * precision
        weighted["recall"] += share * recall
        weighted["f1"] += share * f1

    return EvalReport(
        perClass=perClass,
        weighted=weighted,
        accuracy=float(np.trace(confusion)) / total,
        confusion=confusion.tolist(),
    )


def evaluatePredictions(gold, pred):
    if len(gold) == 0:
        raise DegenerateInputError(empty_test)
    return scoreConfusion(confusionMatrix(gold, pred))


def wordCount(text):
    return len(text.split())


def lengthBucket(words):
    # upper bound inclusive: 100 words still falls in 0-100
    if words > 500:
        return BUCKETS[-1]
    return BUCKETS[max(0, (words - 1) // 100)]


def bucketAccuracy(lengths, gold, pred):
    hits = {}
    for n, g, p in zip(lengths, gold, pred):
        bucket = lengthBucket(n)
        right, seen = hits.get(bucket, (0, 0))
        hits[bucket] = (right + int(labelIndex(g) == labelIndex(p)), seen + 1)
    return {b: hits[b][0] / hits[b][1] for b in BUCKETS if b in hits}
