import numpy as np

from BugPrio.Warning import GraphError, non_scalar_loss, stale_gradient


class Tensor:
    """
    A node of the reverse-mode graph: a dense numpy value, the parents it
    was computed from and the rule mapping its gradient onto theirs.

    Leaves created with requiresGrad=True are parameters; backward()
    leaves their gradient in `grad`.
    """

    def __init__(self, value, parents=(), backwardFn=None, requiresGrad=False, name=None, dtype=None):
        self.value = np.asarray(value, dtype=dtype)
        self.parents = tuple(parents)
        self.backwardFn = backwardFn
        self.requiresGrad = requiresGrad
        self.name = name
        self.grad = None
        self._consumed = False

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    @property
    def isLeaf(self):
        return self.backwardFn is None

    def item(self):
        return float(self.value)

    def zeroGrad(self):
        self.grad = None

    def __repr__(self):
        label = self.name or ("leaf" if self.isLeaf else "node")
        return "Tensor(%s, shape=%s)" % (label, self.shape)


def parameter(value, name=None):
    return Tensor(np.array(value, copy=True), requiresGrad=True, name=name)


def constant(value, dtype=None):
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def topoOrder(root):
    # iterative post-order DFS; parents always precede children
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss, params=None):
    """
    Back-propagate from a scalar loss. Every node is visited once, in
    reverse topological order; gradients reaching a node through several
    paths are summed before it is visited.

    Returns {name: gradient} for `params` when given (zeros for
    parameters the loss does not depend on).
    """

    if loss.value.size != 1:
        raise GraphError(non_scalar_loss % (loss.shape,))
    if loss._consumed:
        raise GraphError(stale_gradient % (loss.name or "loss"))

    order = topoOrder(loss)
    for node in order:
        if node.isLeaf and node.requiresGrad and node.grad is not None:
            raise GraphError(stale_gradient % (node.name or "unnamed"))

    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.isLeaf:
            if node.requiresGrad:
                node.grad = g
            continue
        for parent, pg in zip(node.parents, node.backwardFn(g)):
            if pg is None or not parent.requiresGrad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg

    loss._consumed = True

    if params is None:
        return None
    return {
        name: (p.grad if p.grad is not None else np.zeros_like(p.value))
        for name, p in params.items()
    }


def zeroGrads(params):
    for p in params.values():
        p.zeroGrad()


def relativeError(analytic, numeric, floor=1e-6):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradCheck(f, point, step=1e-5, coords=None):
    """
    Central finite-difference check of f at `point` (64-bit).
    Returns the worst relative error over the checked coordinates.
    """

    x = parameter(np.array(point, dtype=np.float64), name="x")
    backward(f(x))
    analytic = x.grad if x.grad is not None else np.zeros_like(x.value)

    base = x.value.reshape(-1)
    if coords is None:
        coords = range(base.size)

    worst = 0.0
    for i in coords:
        shifted = base.copy()
        shifted[i] += step
        fPlus = f(Tensor(shifted.reshape(x.shape))).item()
        shifted[i] -= 2 * step
        fMinus = f(Tensor(shifted.reshape(x.shape))).item()
        numeric = (fPlus - fMinus) / (2 * step)
        worst = max(worst, relativeError(analytic.reshape(-1)[i], numeric))
    return worst


def gradCheckParams(lossFn, params, step=1e-5, coordsPerTensor=None, rng=None):
    """
    Finite-difference check over a dict of named parameters.
    `lossFn()` rebuilds the graph from the current parameter values.
    With coordsPerTensor, that many coordinates are sampled per tensor.
    """

    zeroGrads(params)
    grads = backward(lossFn(), params)
    rng = rng if rng is not None else np.random.default_rng(0)

    worst = 0.0
    for name, p in params.items():
        flat = p.value.reshape(-1)
        if coordsPerTensor is None or coordsPerTensor >= flat.size:
            coords = range(flat.size)
        else:
            coords = rng.choice(flat.size, size=coordsPerTensor, replace=False)

        for i in coords:
            orig = flat[i]
            flat[i] = orig + step
            fPlus = lossFn().item()
            flat[i] = orig - step
            fMinus = lossFn().item()
            flat[i] = orig
            numeric = (fPlus - fMinus) / (2 * step)
            worst = max(worst, relativeError(grads[name].reshape(-1)[i], numeric))

    zeroGrads(params)
    return worst
