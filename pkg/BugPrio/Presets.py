
presets = {
    "desk": {
        "seed": 0,
        "vocabSize": 8192,
        "encoder.layers": 2,
        "encoder.heads": 2,
        "encoder.dModel": 32,
        "encoder.dff": 128,
        "encoder.maxLen": 64,
        "encoder.dropout": 0.1,
        "encoder.attentionDropout": 0.1,
        "optim.beta1": 0.9,
        "optim.beta2": 0.999,
        "optim.epsilon": 1e-8,
        "optim.weightDecay": 0.01,
        "mlm.batch": 16,
        "mlm.lr": 1e-3,
        "mlm.epochs": 1,
        "mlm.steps": 500,
        "mlm.warmup": 50,
        "mlm.maxLen": 64,
        "mlm.maskRate": 0.15,
        "mlm.variants": 10,
        "cl.batch": 16,
        "cl.lr": 1e-4,
        "cl.epochs": 1,
        "cl.steps": 200,
        "cl.warmup": 20,
        "cl.maxLen": 64,
        "cl.tau": 0.05,
        "cl.method": "swap",
        "finetune.batch": 16,
        "finetune.lr": 2e-3,
        "finetune.epochs": 30,
        "finetune.warmup": 10,
        "finetune.maxLen": 64,
        "finetune.classWeights": "balanced",
        "ablate.seeds": 3,
    },
    "full": {
        "seed": 0,
        "vocabSize": 8192,
        "encoder.layers": 12,
        "encoder.heads": 12,
        "encoder.dModel": 768,
        "encoder.dff": 3072,
        "encoder.maxLen": 512,
        "encoder.dropout": 0.1,
        "encoder.attentionDropout": 0.1,
        "optim.beta1": 0.9,
        "optim.beta2": 0.999,
        "optim.epsilon": 1e-8,
        "optim.weightDecay": 0.01,
        "mlm.batch": 16,
        "mlm.lr": 5e-5,
        "mlm.epochs": 20,
        "mlm.steps": 275000,
        "mlm.warmup": 1000,
        "mlm.maxLen": 512,
        "mlm.maskRate": 0.15,
        "mlm.variants": 10,
        "cl.batch": 32,
        "cl.lr": 3e-5,
        "cl.epochs": 5,
        "cl.steps": 0,
        "cl.warmup": 1000,
        "cl.maxLen": 512,
        "cl.tau": 0.05,
        "cl.method": "swap",
        "finetune.batch": 64,
        "finetune.lr": 5e-6,
        "finetune.epochs": 10,
        "finetune.warmup": 1000,
        "finetune.maxLen": 256,
        "finetune.classWeights": "none",
        "ablate.seeds": 5,
    },
}

# grid values swept by the ablation subcommand
grids = {
    "augment": ["mask", "delete", "swap"],
    "lr": [1e-6, 2.5e-6, 5e-6, 7.5e-6, 1e-5],
    "cl-onoff": [False, True],
    "maxlen": [64, 128, 256, 512],
}
