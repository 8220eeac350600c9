import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import List

import numpy as np

from BugPrio import Ops
from BugPrio.Config import plannedSteps, stageRng
from BugPrio.Corpus import composeText
from BugPrio.Encoder import EVAL, TRAIN, encode, encodeSequence
from BugPrio.Tokenizer import MASK, TokenSequence, collate, frame
from BugPrio.Trainer import TrainLog, Trainer, batchStream
from BugPrio.Warning import AugmentError, bad_augment, skipped_augment

log = logging.getLogger(__name__)

WORD_SPLIT = re.compile(r"(\s+)")


class AugmentMethod(Enum):
    SWAP_TWO_WORDS = "swap"
    DELETE_ONE_WORD = "delete"
    MASK_ONE_TOKEN = "mask"

    @property
    def onText(self):
        return self is not AugmentMethod.MASK_ONE_TOKEN


@dataclass
class PairBatch:
    originals: List[TokenSequence]
    positives: List[TokenSequence]

    @property
    def size(self):
        return len(self.originals)


def splitWords(text):
    # words at the odd/even slots of the split, separators kept verbatim
    parts = WORD_SPLIT.split(text)
    words = [i for i, p in enumerate(parts) if p and not p.isspace()]
    return parts, words


def swapTwoWords(text, rng):
    parts, words = splitWords(text)
    if len(words) < 2:
        raise AugmentError(bad_augment % ("swap", "at least 2 words", len(words)))
    a, b = (words[int(k)] for k in rng.choice(len(words), size=2, replace=False))
    parts[a], parts[b] = parts[b], parts[a]
    return "".join(parts)


def deleteOneWord(text, rng):
    parts, words = splitWords(text)
    if len(words) < 2:
        raise AugmentError(bad_augment % ("delete", "at least 2 words", len(words)))
    i = words[int(rng.integers(len(words)))]
    # drop the word with one neighbouring separator
    if i + 1 < len(parts) and parts[i + 1].isspace():
        del parts[i:i + 2]
    elif i > 0 and parts[i - 1].isspace():
        del parts[i - 1:i + 1]
    else:
        del parts[i]
    return "".join(parts)


def maskOneToken(seq, rng):
    content = seq.contentPositions()
    if not content:
        raise AugmentError(bad_augment % ("mask", "at least 1 content token", 0))
    pos = content[int(rng.integers(len(content)))]
    ids = list(seq.ids)
    ids[pos] = MASK
    return TokenSequence(ids, list(seq.attentionMask), seq.length)


def augment(item, method, rng):
    """
    Positive instance for `item`: a text for swap/delete, a framed
    TokenSequence for mask.
    """

    method = AugmentMethod(method)
    if method is AugmentMethod.SWAP_TWO_WORDS:
        return swapTwoWords(item, rng)
    if method is AugmentMethod.DELETE_ONE_WORD:
        return deleteOneWord(item, rng)
    return maskOneToken(item, rng)


def canAugment(text, seq, method):
    if method.onText:
        return len(splitWords(text)[1]) >= 2
    return bool(seq.contentPositions())


def represent(seq, params, mode=EVAL, rng=None):
    hidden = encodeSequence(seq, params, mode, rng)
    return Ops.maskedMean(hidden, np.asarray(seq.attentionMask)).value


def clLoss(reps, positives, tau):
    """
    Mean over i of -log softmax_j(cos(r_i, r_j+) / tau) at j = i, the other
    positives of the batch acting as negatives.
    """

    sims = Ops.matmul(Ops.normalizeRows(reps), Ops.transpose(Ops.normalizeRows(positives)))
    sims = Ops.scale(sims, 1.0 / tau)
    return Ops.crossEntropy(sims, np.arange(sims.shape[0]))


def alignment(reps, positives):
    a = reps / np.linalg.norm(reps, axis=-1, keepdims=True)
    b = positives / np.linalg.norm(positives, axis=-1, keepdims=True)
    return float((a * b).sum(axis=-1).mean())


def uniformity(reps):
    # log of the mean Gaussian potential over distinct pairs of normalized rows
    u = np.asarray(reps, dtype=np.float64)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    n = u.shape[0]
    if n < 2:
        return 0.0
    sq = ((u[:, None, :] - u[None, :, :]) ** 2).sum(axis=-1)
    upper = sq[np.triu_indices(n, k=1)]
    return float(np.log(np.mean(np.exp(-2.0 * upper))))


def makePairs(texts, seqs, index, method, maxLen, vocab, rng):
    originals, positives = [], []
    for i in index:
        originals.append(seqs[i])
        if method.onText:
            positives.append(frame(vocab.encode(augment(texts[i], method, rng)), maxLen))
        else:
            positives.append(augment(seqs[i], method, rng))
    return PairBatch(originals, positives)


def pairForward(state, pairs, tau, mode=TRAIN, rng=None):
    ids, padMask = collate(pairs.originals + pairs.positives)
    hidden = encode(ids, padMask, state.encoderParams(), mode, rng)
    pooled = Ops.maskedMean(hidden, padMask)
    n = pairs.size
    reps = Ops.gatherRows(pooled, np.arange(n))
    pos = Ops.gatherRows(pooled, np.arange(n, 2 * n))
    return clLoss(reps, pos, tau), reps.value, pos.value


def pretrainCL(reports, vocab, state, config, method=None, tau=None, trainLog=None):
    """
    Second pre-training stage: contrastive training of the encoder
    against augmented copies of each report, the other positives in the
    batch serving as negatives. Returns a new state tagged 'cl'.
    """

    stage = config.stage("cl")
    method = AugmentMethod(method or stage.method)
    tau = stage.tau if tau is None else tau
    trainLog = trainLog or TrainLog()
    state = state.clone()
    rng = stageRng(config.seed, "cl")

    maxLen = min(stage.maxLen, state.config.maxLen)
    texts = [composeText(r) for r in reports]
    seqs = [frame(vocab.encode(t), maxLen) for t in texts]
    keep = [i for i in range(len(texts)) if canAugment(texts[i], seqs[i], method)]
    skipped = len(texts) - len(keep)
    if skipped:
        log.warning(skipped_augment % (skipped, method.value))
    if not keep:
        raise AugmentError(bad_augment % (method.value, "reports long enough to augment", 0))
    texts = [texts[i] for i in keep]
    seqs = [seqs[i] for i in keep]

    total = plannedSteps(len(seqs), stage.batch, stage.epochs, stage.steps)
    log.info("CL pre-training: %d reports, %d steps, method %s", len(seqs), total, method.value)
    trainer = Trainer(state, config, "cl", total, trainLog)
    batches = batchStream(len(seqs), stage.batch, rng)

    def lossFn(pairs):
        loss, reps, pos = pairForward(state, pairs, tau, TRAIN, rng)
        return loss, {
            "alignment": alignment(reps, pos),
            "uniformity": uniformity(reps),
            "skipped": skipped,
        }

    while not trainer.done:
        pairs = makePairs(texts, seqs, next(batches), method, maxLen, vocab, rng)
        trainer.step(lambda: lossFn(pairs))

    state.stage = "cl"
    state.run = {
        "stage": "cl",
        "seed": config.seed,
        "batch": stage.batch,
        "lr": stage.lr,
        "epochs": stage.epochs,
        "warmup": stage.warmup,
        "maxLen": maxLen,
        "method": method.value,
        "tau": tau,
        "plannedSteps": total,
        "reports": len(seqs),
        "skipped": skipped,
    }
    return state
