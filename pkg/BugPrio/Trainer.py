import json
import sys

import numpy as np

from BugPrio.Graph import backward
from BugPrio.Optim import AdamW, lrSchedule


class TrainLog:
    """
    One JSON object per line, keys sorted and no timestamps, so two runs
    with the same seed produce identical logs.
    """

    def __init__(self, stream=None, quiet=False):
        self.stream = stream if stream is not None else sys.stdout
        self.quiet = quiet
        self.records = []

    def write(self, **record):
        self.records.append(record)
        if not self.quiet:
            self.stream.write(json.dumps(record, sort_keys=True) + "\n")
            self.stream.flush()

    def losses(self, stage):
        return [r["loss"] for r in self.records if r.get("stage") == stage and "loss" in r]


def epochOrder(n, rng, repeats=1):
    # every index `repeats` times, shuffled
    return rng.permutation(np.tile(np.arange(n), repeats))


def batchStream(n, batch, rng, repeats=1):
    while True:
        order = epochOrder(n, rng, repeats)
        for start in range(0, len(order), batch):
            yield order[start:start + batch]


class Trainer:
    """
    AdamW with linear warmup then linear decay over `totalSteps`, applied
    to every tensor of a ModelState.
    """

    def __init__(self, state, config, stageName, totalSteps, log):
        stage = config.stage(stageName)
        optim = config.stage("optim")
        self.state = state
        self.stageName = stageName
        self.totalSteps = totalSteps
        self.warmup = min(stage.warmup, totalSteps)
        self.peakLr = stage.lr
        self.log = log
        self.stepCount = 0
        self.optimizer = AdamW(
            state.tensors,
            beta1=optim.beta1,
            beta2=optim.beta2,
            epsilon=optim.epsilon,
            weightDecay=optim.weightDecay,
        )

    @property
    def done(self):
        return self.stepCount >= self.totalSteps

    def step(self, lossFn):
        lr = lrSchedule(self.stepCount, self.warmup, self.totalSteps, self.peakLr)
        self.optimizer.zeroGrad()
        loss, extras = lossFn()
        backward(loss)
        self.optimizer.step(lr)
        self.optimizer.zeroGrad()

        self.stepCount += 1
        value = loss.item()
        self.log.write(stage=self.stageName, step=self.stepCount, lr=lr, loss=value, **extras)
        return value
