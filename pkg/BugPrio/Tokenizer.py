import functools
import hashlib
import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import List

import numpy as np

from BugPrio.Warning import (
    VocabError,
    bad_vocab_file,
    empty_texts,
    frame_too_short,
    unknown_token,
    vocab_too_small,
)

log = logging.getLogger(__name__)

CLS, EOS, MASK, PAD = 256, 257, 258, 259
SPECIALS = {"CLS": CLS, "EOS": EOS, "MASK": MASK, "PAD": PAD}
SPECIAL_STRINGS = {CLS: "<cls>", EOS: "<eos>", MASK: "<mask>", PAD: "<pad>"}
FIRST_MERGE = 260
# distinct pre-token chunks kept per vocabulary
CHUNK_CACHE = 4096

FORMAT_VERSION = 1

# a word keeps its leading space, so the space byte doubles as the word-start marker
PRETOKEN = re.compile(r" ?\S+|\s+(?!\S)|\s+")


@dataclass
class TokenSequence:
    ids: List[int]
    attentionMask: List[int]
    length: int

    def contentPositions(self):
        # everything between CLS and EOS
        return list(range(1, self.length - 1))


def collate(seqs):
    ids = np.array([s.ids for s in seqs], dtype=np.int64)
    mask = np.array([s.attentionMask for s in seqs], dtype=np.float64)
    return ids, mask


def pairCounts(words):
    counts = Counter()
    for word, freq in words.items():
        for pair in zip(word, word[1:]):
            counts[pair] += freq
    return counts


def mergePair(ids, pair, newId):
    merged = []
    i = 0
    while i < len(ids):
        if i < len(ids) - 1 and ids[i] == pair[0] and ids[i + 1] == pair[1]:
            merged.append(newId)
            i += 2
        else:
            merged.append(ids[i])
            i += 1
    return tuple(merged)


class Vocabulary:
    """
    Byte-level BPE vocabulary.

    Ids 0..255 are the raw bytes, 256..259 the special tokens
    (CLS, EOS, MASK, PAD) and every id from 260 on is a learned merge,
    numbered in the order it was learned. Any UTF-8 text is encodable
    since all 256 bytes are present.
    """

    def __init__(self, merges):
        self.merges = [tuple(m) for m in merges]
        self.tokenBytes = {i: bytes([i]) for i in range(256)}
        self.ranks = {}

        for rank, (a, b) in enumerate(self.merges):
            newId = FIRST_MERGE + rank
            if a not in self.tokenBytes or b not in self.tokenBytes:
                raise VocabError("merge %d refers to unknown or special token (%d, %d)" % (rank, a, b))
            self.tokenBytes[newId] = self.tokenBytes[a] + self.tokenBytes[b]
            self.ranks[(a, b)] = newId

        self.idToToken = []
        for i in range(self.size):
            if i in SPECIAL_STRINGS:
                self.idToToken.append(SPECIAL_STRINGS[i])
            else:
                self.idToToken.append(self.tokenBytes[i])
        self.tokenToId = {token: i for i, token in enumerate(self.idToToken)}
        self.encodeChunk = functools.lru_cache(maxsize=CHUNK_CACHE)(self.mergeChunk)

    @property
    def size(self):
        return FIRST_MERGE + len(self.merges)

    @property
    def specials(self):
        return dict(SPECIALS)

    def mergeChunk(self, chunk):
        ids = tuple(chunk.encode("utf-8"))
        while len(ids) >= 2:
            best = None
            for pair in zip(ids, ids[1:]):
                newId = self.ranks.get(pair)
                if newId is not None and (best is None or newId < self.ranks[best]):
                    best = pair
            if best is None:
                break
            ids = mergePair(ids, best, self.ranks[best])
        return ids

    def encode(self, text):
        ids = []
        for chunk in PRETOKEN.findall(text):
            ids.extend(self.encodeChunk(chunk))
        return ids

    def decode(self, ids):
        out = bytearray()
        for i in ids:
            i = int(i)
            if i < 0 or i >= self.size:
                raise VocabError(unknown_token % (i, self.size))
            if i in SPECIAL_STRINGS:
                continue
            out += self.tokenBytes[i]
        return out.decode("utf-8", errors="replace")

    def frame(self, ids, maxLen):
        return frame(ids, maxLen)

    def tokenString(self, i):
        if i in SPECIAL_STRINGS:
            return SPECIAL_STRINGS[i]
        return self.tokenBytes[i].decode("utf-8", errors="replace").replace(" ", "Ġ")

    def pieces(self, text):
        return [self.tokenString(i) for i in self.encode(text)]

    def randomTokenId(self, rng):
        # uniform over non-special ids
        k = int(rng.integers(0, self.size - len(SPECIALS)))
        return k if k < CLS else k + len(SPECIALS)

    def serialize(self):
        lines = [
            "#bugprio-vocab %d size=%d merges=%d specials=%d"
            % (FORMAT_VERSION, self.size, len(self.merges), len(SPECIALS))
        ]
        for a, b in self.merges:
            lines.append("%d %d" % (a, b))
        lines.append("[specials]")
        for name, i in SPECIALS.items():
            lines.append("%s %d" % (name, i))
        return "\n".join(lines) + "\n"

    def hash(self):
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.serialize())

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise VocabError(bad_vocab_file % (path, exc))

        if not lines or not lines[0].startswith("#bugprio-vocab"):
            raise VocabError(bad_vocab_file % (path, "missing header"))
        try:
            keys = lines[0].split()
            version = int(keys[1])
            fields = dict(k.split("=") for k in keys[2:])
            nMerges = int(fields["merges"])
            size = int(fields["size"])
        except (IndexError, KeyError, ValueError):
            raise VocabError(bad_vocab_file % (path, "malformed header"))
        if version != FORMAT_VERSION:
            raise VocabError(bad_vocab_file % (path, "version %d" % version))

        try:
            merges = [tuple(int(x) for x in line.split()) for line in lines[1:1 + nMerges]]
            table = lines[1 + nMerges:]
            specials = dict((k, int(v)) for k, v in (line.split() for line in table[1:]))
        except ValueError:
            raise VocabError(bad_vocab_file % (path, "malformed body"))
        if any(len(m) != 2 for m in merges) or specials != SPECIALS:
            raise VocabError(bad_vocab_file % (path, "unexpected merge or special table"))

        vocab = cls(merges)
        if vocab.size != size:
            raise VocabError(bad_vocab_file % (path, "size mismatch"))
        return vocab


def trainBPE(texts, targetSize):
    if targetSize <= FIRST_MERGE:
        raise VocabError(vocab_too_small % (targetSize, FIRST_MERGE, len(SPECIALS)))
    if not texts:
        raise VocabError(empty_texts)

    words = Counter()
    for text in texts:
        for chunk in PRETOKEN.findall(text):
            words[tuple(chunk.encode("utf-8"))] += 1

    tokenBytes = {i: bytes([i]) for i in range(256)}
    merges = []
    while FIRST_MERGE + len(merges) < targetSize:
        counts = pairCounts(words)
        if not counts:
            break
        # highest count first, ties by the bytes of the pair
        pair, count = min(
            counts.items(),
            key=lambda kv: (-kv[1], tokenBytes[kv[0][0]], tokenBytes[kv[0][1]]),
        )
        if count < 2:
            break

        newId = FIRST_MERGE + len(merges)
        merges.append(pair)
        tokenBytes[newId] = tokenBytes[pair[0]] + tokenBytes[pair[1]]

        merged = Counter()
        for word, freq in words.items():
            merged[mergePair(word, pair, newId)] += freq
        words = merged

    log.info("Number of merges learned: %d (vocabulary size %d)", len(merges), FIRST_MERGE + len(merges))
    return Vocabulary(merges)


def frame(ids, maxLen):
    if maxLen < 3:
        raise VocabError(frame_too_short % maxLen)

    content = list(ids)[: maxLen - 2]
    body = [CLS] + content + [EOS]
    nPad = maxLen - len(body)
    return TokenSequence(
        ids=body + [PAD] * nPad,
        attentionMask=[1] * len(body) + [0] * nPad,
        length=len(body),
    )
