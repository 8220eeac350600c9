import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from BugPrio.Warning import (
    CorpusError,
    bad_encoding,
    bad_field,
    bad_json,
    bad_priority,
    duplicate_id,
    formatProblem,
    too_few_reports,
    unlabeled_only,
    unreadable_file,
)

log = logging.getLogger(__name__)

PRIORITIES = ("P1", "P2", "P3", "P4", "P5")


@dataclass(frozen=True)
class BugReport:
    id: str
    summary: str
    description: str = ""
    priority: Optional[str] = None

    @property
    def label(self):
        # class index 0..4, or None when unlabeled
        if self.priority is None:
            return None
        return PRIORITIES.index(self.priority)

    def toRecord(self):
        record = {"id": self.id, "summary": self.summary, "description": self.description}
        if self.priority is not None:
            record["priority"] = self.priority
        return record


@dataclass
class DatasetSplit:
    train: List[BugReport]
    valid: List[BugReport]
    test: List[BugReport]
    seed: int


@dataclass
class LabelHistogram:
    counts: Dict[str, int] = field(default_factory=lambda: {p: 0 for p in PRIORITIES})

    @property
    def total(self):
        return sum(self.counts.values())

    def format(self):
        return "  ".join("%s:%d" % (p, self.counts[p]) for p in PRIORITIES)


class CorpusFile:
    """
    A JSONL bug-report corpus, read on construction.
    Every line is decoded and validated on its own; problems are
    collected in `errors` as (lineNumber, message) pairs and the
    remaining lines are still read.
    """

    def __init__(self, path):
        self.path = path
        self.reports = []
        self.errors = []
        self.process()

    def process(self):
        try:
            with open(self.path, "rb") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise CorpusError([(0, unreadable_file % (self.path, exc))])

        seen = set()
        for lineNo, raw in enumerate(lines, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                self.errors.append((lineNo, bad_encoding % exc.reason))
                continue
            if not line.strip():
                continue
            report = readRecord(lineNo, line, self.errors)
            if report is None:
                continue
            if report.id in seen:
                self.errors.append((lineNo, duplicate_id % report.id))
                continue
            seen.add(report.id)
            self.reports.append(report)

        log.info("Number of reports loaded from %s: %d", self.path, len(self.reports))


def readRecord(lineNo, line, errors):
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        errors.append((lineNo, bad_json % exc.msg))
        return None
    if not isinstance(record, dict):
        errors.append((lineNo, bad_json % "not an object"))
        return None

    rid = record.get("id")
    if isinstance(rid, int) and not isinstance(rid, bool):
        rid = str(rid)
    if not isinstance(rid, str) or not rid:
        errors.append((lineNo, bad_field % ("id", "must be a non-empty string")))
        return None

    summary = record.get("summary")
    if not isinstance(summary, str) or not summary.strip():
        errors.append((lineNo, bad_field % ("summary", "must be non-empty text")))
        return None

    description = record.get("description", "")
    if description is None:
        description = ""
    if not isinstance(description, str):
        errors.append((lineNo, bad_field % ("description", "must be text")))
        return None

    priority = record.get("priority")
    if priority is not None and priority not in PRIORITIES:
        errors.append((lineNo, bad_priority % priority))
        return None

    return BugReport(rid, summary, description, priority)


def parseReport(text):
    # a single record outside a corpus file; the id may be left out
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError([(1, bad_json % exc.msg)])
    if isinstance(record, dict) and "id" not in record:
        record["id"] = "stdin"
    errors = []
    report = readRecord(1, json.dumps(record), errors)
    if report is None:
        raise CorpusError(errors)
    return report


def loadCorpus(path, strict=True):
    corpus = CorpusFile(path)
    if corpus.errors and strict:
        raise CorpusError(corpus.errors)
    for lineNo, message in corpus.errors:
        log.warning("%s: %s", corpus.path, formatProblem(lineNo, message))
    return corpus.reports


def saveCorpus(reports, path):
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.toRecord(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def composeText(report):
    # summary first, one space, description; no other normalization
    if report.description:
        return report.summary + " " + report.description
    return report.summary


def splitDataset(reports, seed):
    n = len(reports)
    if n < 10:
        raise CorpusError([(0, too_few_reports % n)])

    order = np.random.default_rng(seed).permutation(n)
    nTrain = (8 * n) // 10
    nValid = n // 10

    shuffled = [reports[i] for i in order]
    return DatasetSplit(
        train=shuffled[:nTrain],
        valid=shuffled[nTrain:nTrain + nValid],
        test=shuffled[nTrain + nValid:],
        seed=seed,
    )


def filterLabeled(reports):
    labeled = [r for r in reports if r.priority is not None]
    if reports and not labeled:
        log.warning(unlabeled_only)
    return labeled


def labelHistogram(reports):
    histogram = LabelHistogram()
    for report in reports:
        if report.priority is not None:
            histogram.counts[report.priority] += 1
    return histogram
