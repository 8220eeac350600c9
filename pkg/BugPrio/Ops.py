"""
Differentiable primitives over Tensor.

Forward values are plain numpy; each op registers the closure that maps
the output gradient onto its parents. Shapes are checked up front and a
mismatch reports both operands.
"""

import numpy as np

from BugPrio.Graph import Tensor, constant
from BugPrio.Warning import (
    DegenerateInputError,
    ShapeError,
    all_pad,
    no_targets,
    shape_mismatch,
    zero_norm,
)

IGNORE_INDEX = -100
LN_EPSILON = 1e-5


def node(value, parents, backwardFn):
    parents = tuple(parents)
    if any(p.requiresGrad for p in parents):
        return Tensor(value, parents=parents, backwardFn=backwardFn, requiresGrad=True)
    return Tensor(value)


def unbroadcast(grad, shape):
    # sum out axes that were broadcast to reach grad.shape
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def broadcastShape(opName, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(shape_mismatch % (opName, a.shape, b.shape))


def matmul(a, b):
    a, b = constant(a), constant(b)
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(shape_mismatch % ("matmul", a.shape, b.shape))
    try:
        out = np.matmul(a.value, b.value)
    except ValueError:
        raise ShapeError(shape_mismatch % ("matmul", a.shape, b.shape))

    def backwardFn(g):
        ga = unbroadcast(np.matmul(g, np.swapaxes(b.value, -1, -2)), a.shape)
        gb = unbroadcast(np.matmul(np.swapaxes(a.value, -1, -2), g), b.shape)
        return ga, gb

    return node(out, (a, b), backwardFn)


def add(a, b):
    a, b = constant(a), constant(b)
    broadcastShape("add", a, b)

    def backwardFn(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return node(a.value + b.value, (a, b), backwardFn)


def mul(a, b):
    a, b = constant(a), constant(b)
    broadcastShape("mul", a, b)

    def backwardFn(g):
        return unbroadcast(g * b.value, a.shape), unbroadcast(g * a.value, b.shape)

    return node(a.value * b.value, (a, b), backwardFn)


def scale(a, c):
    a = constant(a)
    c = float(c)
    return node(a.value * c, (a,), lambda g: (g * c,))


def relu(a):
    a = constant(a)
    active = a.value > 0
    return node(np.where(active, a.value, 0).astype(a.dtype), (a,), lambda g: (g * active,))


def softmax(a, axis=-1):
    a = constant(a)
    y = softmaxArray(a.value, axis)

    def backwardFn(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return node(y, (a,), backwardFn)


def softmaxArray(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    # rows that are entirely -inf come out as zeros instead of NaN
    m = np.where(np.isfinite(m), m, 0)
    e = np.exp(x - m)
    s = np.sum(e, axis=axis, keepdims=True)
    return e / np.where(s == 0, 1, s)


def layerNorm(x, gain, bias, epsilon=LN_EPSILON):
    x, gain, bias = constant(x), constant(gain), constant(bias)
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise ShapeError(shape_mismatch % ("layerNorm", x.shape, gain.shape))

    mu = x.value.mean(axis=-1, keepdims=True)
    centered = x.value - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + epsilon)
    xhat = centered * inv
    out = xhat * gain.value + bias.value

    def backwardFn(g):
        gxhat = g * gain.value
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        gGain = (g * xhat).reshape(-1, x.shape[-1]).sum(axis=0)
        gBias = g.reshape(-1, x.shape[-1]).sum(axis=0)
        return gx, gGain, gBias

    return node(out, (x, gain, bias), backwardFn)


def embedding(table, ids):
    table = constant(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.value.ndim != 2 or ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(shape_mismatch % ("embedding", table.shape, ids.shape))

    def backwardFn(g):
        gt = np.zeros_like(table.value)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (gt,)

    return node(table.value[ids], (table,), backwardFn)


def maskedMean(x, mask):
    # mean over the rows of axis -2 whose mask entry is non-zero
    x = constant(x)
    mask = np.asarray(mask, dtype=x.dtype)
    if mask.shape != x.shape[:-1]:
        raise ShapeError(shape_mismatch % ("maskedMean", x.shape, mask.shape))
    counts = mask.sum(axis=-1, keepdims=True)
    empty = np.flatnonzero(counts.reshape(-1) == 0)
    if empty.size:
        raise DegenerateInputError(all_pad % empty[0])

    weights = (mask / counts)[..., None]
    out = (x.value * weights).sum(axis=-2)

    def backwardFn(g):
        return (np.expand_dims(g, -2) * weights,)

    return node(out, (x,), backwardFn)


def concat(tensors, axis=-1):
    tensors = [constant(t) for t in tensors]
    try:
        out = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(shape_mismatch % ("concat", tensors[0].shape, [t.shape for t in tensors[1:]]))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backwardFn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return node(out, tensors, backwardFn)


def transpose(a):
    # swap the last two axes
    a = constant(a)
    return node(np.swapaxes(a.value, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a, shape):
    a = constant(a)
    try:
        out = a.value.reshape(shape)
    except ValueError:
        raise ShapeError(shape_mismatch % ("reshape", a.shape, tuple(shape)))
    return node(out, (a,), lambda g: (g.reshape(a.shape),))


def gatherRows(x, index):
    # rows of x flattened to (-1, d)
    x = constant(x)
    index = np.asarray(index, dtype=np.int64)
    flat = x.value.reshape(-1, x.shape[-1])
    if index.size and (index.min() < 0 or index.max() >= flat.shape[0]):
        raise ShapeError(shape_mismatch % ("gatherRows", x.shape, index.shape))

    def backwardFn(g):
        gx = np.zeros_like(flat)
        np.add.at(gx, index, g)
        return (gx.reshape(x.shape),)

    return node(flat[index], (x,), backwardFn)


def normalizeRows(x):
    x = constant(x)
    norms = np.sqrt((x.value * x.value).sum(axis=-1, keepdims=True))
    zero = np.flatnonzero(norms.reshape(-1) == 0)
    if zero.size:
        raise DegenerateInputError(zero_norm % zero[0])
    y = x.value / norms

    def backwardFn(g):
        return ((g - y * (g * y).sum(axis=-1, keepdims=True)) / norms,)

    return node(y, (x,), backwardFn)


def sumAll(a):
    a = constant(a)
    return node(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def dropout(x, rate, rng):
    if rng is None or rate <= 0:
        return x
    x = constant(x)
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return mul(x, Tensor(keep))


def crossEntropy(logits, targets, ignoreIndex=IGNORE_INDEX, weights=None):
    """
    Mean negative log-likelihood of `targets` under softmax(logits) over
    the last axis; positions holding ignoreIndex do not count.

    With per-class `weights` each position counts weights[target] times
    and the mean is taken over the summed weights.
    """

    logits = constant(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise ShapeError(shape_mismatch % ("crossEntropy", logits.shape, targets.shape))

    nClass = logits.shape[-1]
    flat = logits.value.reshape(-1, nClass)
    t = targets.reshape(-1)
    valid = t != ignoreIndex
    nValid = int(valid.sum())
    if nValid == 0:
        raise DegenerateInputError(no_targets)
    if t[valid].min() < 0 or t[valid].max() >= nClass:
        raise ShapeError(shape_mismatch % ("crossEntropy", logits.shape, targets.shape))

    rows = np.flatnonzero(valid)
    rowWeight = np.zeros(len(t))
    if weights is None:
        rowWeight[rows] = 1.0
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (nClass,):
            raise ShapeError(shape_mismatch % ("crossEntropy", logits.shape, weights.shape))
        rowWeight[rows] = weights[t[rows]]
    total = rowWeight.sum()
    if total <= 0:
        raise DegenerateInputError(no_targets)

    m = flat.max(axis=-1, keepdims=True)
    logSumExp = m[:, 0] + np.log(np.exp(flat - m).sum(axis=-1))
    loss = (rowWeight[rows] * (logSumExp[rows] - flat[rows, t[rows]])).sum() / total

    def backwardFn(g):
        p = softmaxArray(flat, -1)
        p[rows, t[rows]] -= 1
        p *= (rowWeight * (g / total))[:, None]
        p[~valid] = 0
        return (p.reshape(logits.shape).astype(logits.dtype),)

    return node(np.asarray(loss, dtype=logits.dtype), (logits,), backwardFn)
