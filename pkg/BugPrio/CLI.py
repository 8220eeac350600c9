import argparse
import json
import logging
import os
import sys

from BugPrio import __version__
from BugPrio.Ablation import ablate, formatTable, writeResults
from BugPrio.Checkpoint import ModelState, loadCheckpoint, requireStage, saveCheckpoint
from BugPrio.Classifier import evaluate, finetune, predict
from BugPrio.Config import METHODS, RunConfig, parseOverrides, stageRng
from BugPrio.Contrastive import pretrainCL
from BugPrio.Corpus import (
    composeText,
    filterLabeled,
    labelHistogram,
    loadCorpus,
    parseReport,
    saveCorpus,
    splitDataset,
)
from BugPrio.MLM import pretrainMLM
from BugPrio.Presets import grids
from BugPrio.Tokenizer import Vocabulary, trainBPE
from BugPrio.Trainer import TrainLog
from BugPrio.Warning import BugPrioError, StageError, wrong_stage

log = logging.getLogger("BugPrio")


def buildConfig(args, flags=None):
    overrides = parseOverrides(args.set)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    for key, value in (flags or {}).items():
        if value is not None:
            overrides[key] = value
    return RunConfig.build(args.config, overrides).validate()


def writeManifest(outPath, config, state=None, extra=None):
    manifest = {"config": config.toDict()}
    if state is not None:
        manifest.update(stage=state.stage, vocabHash=state.vocabHash, run=state.run)
    manifest.update(extra or {})
    with open(outPath + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)


def saveStage(state, config, outPath):
    saveCheckpoint(state, outPath, run=state.run)
    writeManifest(outPath, config, state)
    log.info("Checkpoint (%s) written to %s", state.stage, outPath)


def trainLogFor(args):
    return TrainLog(quiet=args.quiet)


def cmdBuildVocab(args):
    config = buildConfig(args, {"vocabSize": args.size})
    reports = loadCorpus(args.corpus)
    vocab = trainBPE([composeText(r) for r in reports], config["vocabSize"])
    vocab.save(args.out)
    log.info("Vocabulary (%d tokens, hash %s) written to %s", vocab.size, vocab.hash()[:12], args.out)
    return 0


def cmdSplit(args):
    reports = loadCorpus(args.corpus)
    split = splitDataset(reports, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    for name in ("train", "valid", "test"):
        part = getattr(split, name)
        saveCorpus(part, os.path.join(args.out_dir, name + ".jsonl"))
        print("%-5s %6d  %s" % (name, len(part), labelHistogram(part).format()))
    return 0


def cmdPretrainMLM(args):
    config = buildConfig(args)
    vocab = Vocabulary.load(args.vocab)
    reports = loadCorpus(args.corpus)
    state = None
    if args.init:
        state = loadCheckpoint(args.init, vocab)
        requireStage(state, ("mlm",), "pretrain-mlm")
    state = pretrainMLM(reports, vocab, config, state, trainLogFor(args))
    saveStage(state, config, args.out)
    return 0


def cmdPretrainCL(args):
    config = buildConfig(args, {"cl.method": args.method, "cl.tau": args.tau})
    vocab = Vocabulary.load(args.vocab)
    reports = loadCorpus(args.corpus)

    if args.init:
        state = loadCheckpoint(args.init, vocab)
        allowed = ("mlm", "cl") if args.allow_any_init else ("mlm",)
        requireStage(state, allowed, "pretrain-cl")
    elif args.allow_any_init:
        state = ModelState.fresh(config.encoderConfig(vocab.size), vocab, stageRng(config.seed, "init"))
    else:
        raise StageError(wrong_stage % ("pretrain-cl", "mlm", "none"))

    state = pretrainCL(reports, vocab, state, config, trainLog=trainLogFor(args))
    saveStage(state, config, args.out)
    return 0


def cmdFinetune(args):
    config = buildConfig(args, {"finetune.lr": args.lr, "finetune.maxLen": args.max_len})
    vocab = Vocabulary.load(args.vocab)
    train = filterLabeled(loadCorpus(args.train))
    valid = filterLabeled(loadCorpus(args.valid)) if args.valid else []
    state = loadCheckpoint(args.init, vocab)
    requireStage(state, ("mlm", "cl"), "finetune")

    state = finetune(train, valid, state, config, trainLogFor(args))
    saveStage(state, config, args.out)
    return 0


def cmdEvaluate(args):
    vocab = Vocabulary.load(args.vocab)
    test = filterLabeled(loadCorpus(args.test))
    state = loadCheckpoint(args.model, vocab)
    requireStage(state, ("finetuned",), "evaluate")

    maxLen = args.max_len or state.run.get("maxLen")
    report = evaluate(test, state, maxLen)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.toJson() + "\n")
        log.info("Weighted F1 %.4f, accuracy %.4f; report written to %s", report.weighted["f1"], report.accuracy, args.report)
    else:
        sys.stdout.write(report.toJson() + "\n")
    return 0


def cmdPredict(args):
    vocab = Vocabulary.load(args.vocab)
    state = loadCheckpoint(args.model, vocab)
    requireStage(state, ("finetuned",), "predict")

    report = parseReport(sys.stdin.read())
    dist = predict(report, state, args.max_len or state.run.get("maxLen"))
    sys.stdout.write(json.dumps(dist.toDict(), sort_keys=True) + "\n")
    return 0


def cmdAblate(args):
    config = buildConfig(args, {"ablate.seeds": args.seeds})
    vocab = Vocabulary.load(args.vocab)
    reports = loadCorpus(args.corpus)

    rows = ablate(reports, vocab, config, args.grid, trainLog=trainLogFor(args))
    tablePath = os.path.splitext(args.out)[0] + ".txt"
    writeResults(rows, args.out, tablePath)
    sys.stderr.write(formatTable(rows))
    return 0


def buildParser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
    common.add_argument("--seed", type=int, help="master seed (default: from the configuration)")
    common.add_argument("--quiet", action="store_true", help="do not print the JSON training log")
    common.add_argument("--verbose", action="store_true", help="debug-level messages on standard error")

    parser = argparse.ArgumentParser(prog="bugprio", description="Bug report priority prediction")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", parents=[common], help="learn a byte-level BPE vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-size", dest="size", type=int, help="target vocabulary size (> 260)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmdBuildVocab)

    p = sub.add_parser("split", help="split a corpus 8:1:1 into train/valid/test")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(handler=cmdSplit)

    p = sub.add_parser("pretrain-mlm", parents=[common], help="masked language model pre-training")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--init", help="continue from an mlm checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmdPretrainMLM)

    p = sub.add_parser("pretrain-cl", parents=[common], help="contrastive pre-training")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--init", help="mlm checkpoint to start from")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--tau", type=float)
    p.add_argument("--allow-any-init", action="store_true",
                   help="accept a cl checkpoint, or start from scratch without --init")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmdPretrainCL)

    p = sub.add_parser("finetune", parents=[common], help="fine-tune the priority classifier")
    p.add_argument("--train", required=True)
    p.add_argument("--valid")
    p.add_argument("--vocab", required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--lr", type=float)
    p.add_argument("--max-len", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmdFinetune)

    p = sub.add_parser("evaluate", help="score a fine-tuned model on a labeled test set")
    p.add_argument("--test", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--max-len", type=int)
    p.add_argument("--report", help="write the JSON report here instead of standard output")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(handler=cmdEvaluate)

    p = sub.add_parser("predict", help="priority distribution for one JSON report on standard input")
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--max-len", type=int)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(handler=cmdPredict)

    p = sub.add_parser("ablate", parents=[common], help="run an ablation grid")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--grid", required=True, choices=sorted(grids))
    p.add_argument("--seeds", type=int, help="number of seeds per cell")
    p.add_argument("--out", required=True, help="JSON results; the text table goes next to it")
    p.set_defaults(handler=cmdAblate)

    return parser


def configureLogging(verbose):
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def run(argv=None):
    parser = buildParser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code

    configureLogging(getattr(args, "verbose", False))
    try:
        return args.handler(args)
    except BugPrioError as exc:
        log.error(str(exc).strip())
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
