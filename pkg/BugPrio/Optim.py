import numpy as np

from BugPrio.Warning import GraphError, ShapeError, bad_schedule, bad_step, shape_mismatch


def adamwStep(params, grads, state, lr, beta1=0.9, beta2=0.999, epsilon=1e-8, weightDecay=0.01):
    """
    One AdamW update with decoupled weight decay and bias-corrected
    moments. `params` and `grads` map names to arrays; params are
    updated in place. `state` holds the step count and both moments and
    is created on the first call when empty.
    """

    if not state:
        state["step"] = 0
        state["m"] = {name: np.zeros_like(p) for name, p in params.items()}
        state["v"] = {name: np.zeros_like(p) for name, p in params.items()}

    state["step"] += 1
    t = state["step"]
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t

    for name, p in params.items():
        g = grads[name]
        m = state["m"][name]
        v = state["v"][name]
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeError(shape_mismatch % ("adamw:" + name, p.shape, g.shape))

        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g

        update = (m / c1) / (np.sqrt(v / c2) + epsilon)
        p -= (lr * (update + weightDecay * p)).astype(p.dtype)

    return params, state


def lrSchedule(step, warmupSteps, totalSteps, peakLr):
    # linear 0 -> peak over warmup, then linear peak -> 0 at totalSteps
    if warmupSteps > totalSteps:
        raise GraphError(bad_schedule % (warmupSteps, totalSteps))
    if step < 0 or step > totalSteps:
        raise GraphError(bad_step % (step, totalSteps))

    if step < warmupSteps:
        return peakLr * step / warmupSteps
    if totalSteps == warmupSteps:
        return peakLr
    return peakLr * (totalSteps - step) / (totalSteps - warmupSteps)


class AdamW:
    """
    AdamW over a dict of parameter Tensors, stepping with the gradients
    left by backward().
    """

    def __init__(self, params, beta1=0.9, beta2=0.999, epsilon=1e-8, weightDecay=0.01):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.weightDecay = weightDecay
        self.state = {}

    def step(self, lr):
        values = {name: p.value for name, p in self.params.items()}
        grads = {
            name: (p.grad if p.grad is not None else np.zeros_like(p.value))
            for name, p in self.params.items()
        }
        adamwStep(values, grads, self.state, lr, self.beta1, self.beta2, self.epsilon, self.weightDecay)

    def zeroGrad(self):
        for p in self.params.values():
            p.zeroGrad()
