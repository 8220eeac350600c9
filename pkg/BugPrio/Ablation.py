import json
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from BugPrio.Classifier import evaluate, finetune
from BugPrio.Contrastive import pretrainCL
from BugPrio.Corpus import PRIORITIES, filterLabeled, splitDataset
from BugPrio.MLM import pretrainMLM
from BugPrio.Presets import grids
from BugPrio.Trainer import TrainLog
from BugPrio.Warning import ConfigError, ablation_reversal, maxlen_skipped, unknown_key

log = logging.getLogger(__name__)


@dataclass
class AblationRow:
    grid: str
    value: object
    runs: List[Dict] = field(default_factory=list)

    @property
    def label(self):
        if self.grid == "cl-onoff":
            return "w/ CL" if self.value else "w/o CL"
        return str(self.value)

    def median(self, key):
        return float(np.median([run[key] for run in self.runs]))

    def medianClassF1(self):
        return {p: float(np.median([run["perClassF1"][p] for run in self.runs])) for p in PRIORITIES}

    def toDict(self):
        return {
            "grid": self.grid,
            "value": self.value,
            "label": self.label,
            "f1": self.median("f1"),
            "accuracy": self.median("accuracy"),
            "seconds": self.median("seconds"),
            "perClassF1": self.medianClassF1(),
            "runs": self.runs,
        }


def runCell(grid, value, split, vocab, mlmState, config, trainLog, clState=None):
    """
    One ablation cell on one seed: the contrastive stage (unless switched
    off), fine-tuning and test evaluation. Returns the scores and the
    wall-clock time spent training.
    """

    train, valid, test = filterLabeled(split.train), filterLabeled(split.valid), filterLabeled(split.test)
    maxLen = None

    started = time.perf_counter()
    if grid == "augment":
        state = pretrainCL(split.train, vocab, mlmState, config, method=value, trainLog=trainLog)
    elif grid == "cl-onoff" and not value:
        state = mlmState
    elif clState is not None:
        state = clState
    else:
        state = pretrainCL(split.train, vocab, mlmState, config, trainLog=trainLog)

    if grid == "lr":
        config = config.derive({"finetune.lr": value})
    elif grid == "maxlen":
        maxLen = value

    state = finetune(train, valid, state, config, trainLog, maxLen=maxLen)
    seconds = time.perf_counter() - started

    report = evaluate(test, state, maxLen or config["finetune.maxLen"])
    return {
        "seed": config.seed,
        "f1": report.weighted["f1"],
        "accuracy": report.accuracy,
        "perClassF1": {p: m.f1 for p, m in report.perClass.items()},
        "seconds": seconds,
    }


def ablate(reports, vocab, config, grid, seeds=None, trainLog=None):
    """
    Run every cell of `grid` on the same seed set. Per seed the corpus is
    split and MLM pre-training runs once; the cells then differ only in
    the grid variable.
    """

    if grid not in grids:
        raise ConfigError(unknown_key % ("grid=" + grid))
    trainLog = trainLog or TrainLog()
    seeds = list(seeds) if seeds is not None else [config.seed + i for i in range(config["ablate.seeds"])]

    values = []
    for value in grids[grid]:
        if grid == "maxlen" and value > config["encoder.maxLen"]:
            log.warning(maxlen_skipped % (value, config["encoder.maxLen"]))
            continue
        values.append(value)
    rows = [AblationRow(grid, value) for value in values]

    for seed in seeds:
        seedConfig = config.derive({"seed": seed})
        split = splitDataset(reports, seed)
        mlmState = pretrainMLM(split.train, vocab, seedConfig, trainLog=trainLog)
        clState = None
        if grid in ("lr", "maxlen"):
            # the grid variable only touches fine-tuning, so one CL run serves every cell
            clState = pretrainCL(split.train, vocab, mlmState, seedConfig, trainLog=trainLog)
        for row in rows:
            row.runs.append(runCell(grid, row.value, split, vocab, mlmState, seedConfig, trainLog, clState))

    if grid == "cl-onoff" and len(rows) == 2:
        without, withCl = rows[0].median("f1"), rows[1].median("f1")
        if withCl < without:
            log.warning(ablation_reversal % (withCl, without))

    return rows


def formatTable(rows):
    header = ["grid", "setting", "weighted F1", "accuracy"] + ["F1 " + p for p in PRIORITIES] + ["train s"]
    lines = ["\t".join(header)]
    for row in rows:
        classF1 = row.medianClassF1()
        cells = [row.grid, row.label, "%.4f" % row.median("f1"), "%.4f" % row.median("accuracy")]
        cells += ["%.4f" % classF1[p] for p in PRIORITIES]
        cells.append("%.1f" % row.median("seconds"))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def writeResults(rows, jsonPath, tablePath):
    with open(jsonPath, "w", encoding="utf-8") as fh:
        json.dump([row.toDict() for row in rows], fh, sort_keys=True, indent=2)
    with open(tablePath, "w", encoding="utf-8") as fh:
        fh.write(formatTable(rows))
