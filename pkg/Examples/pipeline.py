from BugPrio.Classifier import evaluate, finetune
from BugPrio.Config import RunConfig
from BugPrio.Contrastive import pretrainCL
from BugPrio.Corpus import composeText, filterLabeled, splitDataset
from BugPrio.MLM import pretrainMLM
from BugPrio.Synthetic import makeCorpus
from BugPrio.Tokenizer import trainBPE


def main():

    reports = makeCorpus(400, seed=0)
    config = RunConfig.build(overrides={"mlm.steps": 200, "cl.steps": 100, "finetune.epochs": 5}).validate()

    vocab = trainBPE([composeText(r) for r in reports], 1000)
    split = splitDataset(reports, config.seed)

    # MLM, then contrastive pre-training, then the priority classifier
    state = pretrainMLM(split.train, vocab, config)
    state = pretrainCL(split.train, vocab, state, config)
    state = finetune(filterLabeled(split.train), filterLabeled(split.valid), state, config)

    report = evaluate(filterLabeled(split.test), state, config["finetune.maxLen"])
    print(report.toJson())


main()
