"""
Synthetic bug-report corpora with label-correlated keywords, for smoke
runs and tests. Label shares follow a real tracker's imbalance
(P1:P2:P3:P4:P5 = 35:33:103:3:4), so P4 and P5 are rare.
"""

import numpy as np

from BugPrio.Corpus import PRIORITIES, BugReport

RATIOS = (35, 33, 103, 3, 4)

keywords = {
    "P1": ["crash", "segfault", "dataloss", "hang", "security", "deadlock"],
    "P2": ["regression", "broken", "fails", "exception", "timeout", "leak"],
    "P3": ["incorrect", "layout", "option", "wrong", "misaligned", "slow"],
    "P4": ["typo", "cosmetic", "tooltip", "spelling", "wording", "icon"],
    "P5": ["enhancement", "wishlist", "someday", "nicety", "idea", "polish"],
}

components = ["editor", "parser", "debugger", "toolbar", "preferences", "compiler", "search", "console"]

filler = [
    "when", "opening", "the", "a", "file", "after", "clicking", "on", "in", "view",
    "with", "project", "workspace", "build", "run", "window", "dialog", "menu",
    "save", "load", "user", "reports", "that", "this", "is", "it", "occurs", "steps",
    "to", "reproduce", "expected", "result", "actual", "version", "plugin", "and",
]


def classCounts(n, ratios=RATIOS):
    # largest remainder, every class gets at least one report when n >= 5
    shares = np.asarray(ratios, dtype=np.float64) / sum(ratios) * n
    counts = np.floor(shares).astype(int)
    if n >= len(ratios):
        counts = np.maximum(counts, 1)
    while counts.sum() > n:
        counts[int(np.argmax(counts))] -= 1
    order = np.argsort(-(shares - np.floor(shares)), kind="stable")
    i = 0
    while counts.sum() < n:
        counts[order[i % len(order)]] += 1
        i += 1
    return counts


def makeReport(index, label, rng):
    words = keywords[label]
    component = components[int(rng.integers(len(components)))]
    summary = "%s %s in %s" % (words[int(rng.integers(len(words)))], " ".join(rng.choice(filler, 2)), component)

    body = list(rng.choice(filler, size=int(rng.integers(6, 20))))
    for _ in range(2):
        body.insert(int(rng.integers(len(body) + 1)), words[int(rng.integers(len(words)))])
    return BugReport(
        id="BUG-%05d" % index,
        summary=summary,
        description=" ".join(body),
        priority=label,
    )


def makeCorpus(n, seed=0, unlabeled=0.0):
    """
    `n` reports in shuffled order; a fraction `unlabeled` of them has its
    priority dropped (still usable for pre-training).
    """

    rng = np.random.default_rng(seed)
    labels = [p for p, c in zip(PRIORITIES, classCounts(n)) for _ in range(c)]
    labels = [labels[i] for i in rng.permutation(len(labels))]

    reports = []
    for index, label in enumerate(labels):
        report = makeReport(index, label, rng)
        if unlabeled and rng.random() < unlabeled:
            report = BugReport(report.id, report.summary, report.description, None)
        reports.append(report)
    return reports
