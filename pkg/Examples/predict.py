import sys

from BugPrio.Checkpoint import loadCheckpoint
from BugPrio.Classifier import predict
from BugPrio.Corpus import BugReport
from BugPrio.Tokenizer import Vocabulary


def main():

    vocab = Vocabulary.load(sys.argv[1])
    state = loadCheckpoint(sys.argv[2], vocab)

    report = BugReport("example", "Editor crashes when saving", "Segfault after clicking save in the toolbar")
    dist = predict(report, state, state.run.get("maxLen"))

    for label, p in dist.probs.items():
        print("%s  %.3f" % (label, p))
    print("predicted:", dist.label)


main()
