"""Minimal dense-tensor kernel with reverse-mode automatic differentiation.

Covers exactly the operations the model needs, on float64 numpy storage.
Every primitive records its parents and a backward closure; ``Tape`` walks
the recorded graph once, in topological order, to accumulate gradients.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


class NumericsError(Exception):
    pass


class ShapeMismatch(NumericsError):
    pass


class EmptyMask(NumericsError):
    pass


class NonFiniteValue(NumericsError):
    pass


_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording (inference / finite differences)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        Tape(self).backward()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _result(data, parents, backward) -> Tensor:
    """Build an op result; record the graph only when a parent needs grads."""
    track = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=track)
    if track:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


class Tape:
    """Topologically ordered record of the ops reachable from an output."""

    def __init__(self, output: Tensor):
        order: list[Tensor] = []
        seen = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.output = output
        self.order = order  # parents precede consumers

    def backward(self, seed: np.ndarray | None = None):
        if seed is None:
            seed = np.ones_like(self.output.data)
        _accumulate(self.output, seed)
        for node in reversed(self.order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _check_finite(arr: np.ndarray, op: str):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"non-finite value produced by {op}")


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, (a, b), backward)


def scalar_mul(c: float, a: Tensor) -> Tensor:
    c = float(c)

    def backward(g):
        _accumulate(a, c * g)

    return _result(c * a.data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        if bd.ndim == 1:
            _accumulate(a, np.outer(g, bd))
            _accumulate(b, ad.T @ g)
        else:
            _accumulate(a, g @ bd.T)
            _accumulate(b, ad.T @ g)

    return _result(ad @ bd, (a, b), backward)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or a.shape != b.shape:
        raise ShapeMismatch(f"dot: {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        _accumulate(a, g * bd)
        _accumulate(b, g * ad)

    with np.errstate(over="ignore"):
        out = ad @ bd
    if not math.isfinite(out):
        raise NonFiniteValue("non-finite value produced by dot")
    return _result(out, (a, b), backward)


def dots_with(anchor: Tensor, items: list[Tensor]) -> Tensor:
    """Row of dot products: out[k] = items[k] . anchor (one fused op)."""
    if anchor.data.ndim != 1:
        raise ShapeMismatch("dots_with expects a 1-D anchor")
    if not items:
        raise ShapeMismatch("dots_with over zero items")
    for t in items:
        if t.shape != anchor.shape:
            raise ShapeMismatch(f"dots_with: {t.shape} vs anchor {anchor.shape}")
    m = np.stack([t.data for t in items])
    av = anchor.data
    with np.errstate(over="ignore"):
        out = m @ av
    _check_finite(out, "dots_with")

    def backward(g):
        for k, t in enumerate(items):
            _accumulate(t, g[k] * av)
        _accumulate(anchor, g @ m)

    return _result(out, tuple(items) + (anchor,), backward)


def concat(parts: list[Tensor]) -> Tensor:
    if not parts:
        raise ShapeMismatch("concat of zero tensors")
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeMismatch("concat expects 1-D tensors")
    sizes = [p.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, s, e in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(p, g[s:e])

    return _result(np.concatenate([p.data for p in parts]), tuple(parts), backward)


def embedding_lookup(table: Tensor, index: int) -> Tensor:
    if table.data.ndim != 2:
        raise ShapeMismatch("embedding table must be 2-D")
    if not 0 <= index < table.shape[0]:
        raise ShapeMismatch(f"row {index} outside table of {table.shape[0]} rows")

    def backward(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            table.grad[index] += g

    return _result(table.data[index].copy(), (table,), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        _accumulate(a, g * mask)

    return _result(a.data * mask, (a,), backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NonFiniteValue("log of non-positive value")

    def backward(g):
        _accumulate(a, g / a.data)

    return _result(np.log(a.data), (a,), backward)


def sum_list(items: list[Tensor]) -> Tensor:
    if not items:
        raise ShapeMismatch("sum of zero tensors")
    shape = items[0].shape
    for t in items:
        if t.shape != shape:
            raise ShapeMismatch("sum_list over mixed shapes")

    def backward(g):
        for t in items:
            _accumulate(t, g)

    return _result(sum(t.data for t in items), tuple(items), backward)


def mean_over_list(items: list[Tensor]) -> Tensor:
    if not items:
        raise ShapeMismatch("mean of zero tensors")
    shape = items[0].shape
    for t in items:
        if t.shape != shape:
            raise ShapeMismatch("mean_over_list over mixed shapes")
    inv = 1.0 / len(items)

    def backward(g):
        for t in items:
            _accumulate(t, inv * g)

    return _result(sum(t.data for t in items) * inv, tuple(items), backward)


def weighted_sum(items: list[Tensor], weights: Tensor) -> Tensor:
    """sum_k weights[k] * items[k]; gradient flows to both sides."""
    if weights.data.ndim != 1 or len(items) != weights.shape[0]:
        raise ShapeMismatch(f"{len(items)} items vs weights {weights.shape}")
    shape = items[0].shape
    for t in items:
        if t.shape != shape:
            raise ShapeMismatch("weighted_sum over mixed shapes")
    w = weights.data

    def backward(g):
        for k, t in enumerate(items):
            _accumulate(t, w[k] * g)
        if weights.requires_grad:
            wg = np.array([float(np.sum(g * t.data)) for t in items])
            _accumulate(weights, wg)

    out = np.zeros(shape)
    for k, t in enumerate(items):
        out += w[k] * t.data
    return _result(out, tuple(items) + (weights,), backward)


def _masked_softmax_parts(logits: list, mask: list[bool]):
    active = [k for k, m in enumerate(mask) if m]
    if not active:
        raise EmptyMask("softmax over an empty active set")
    if len(logits) != len(mask):
        raise ShapeMismatch("logits and mask length differ")
    vals = np.array([float(logits[k].data) for k in active])
    _check_finite(vals, "masked softmax logits")
    m = vals.max()
    ex = np.exp(vals - m)
    z = ex.sum()
    return active, vals, m, ex, z


def softmax_over_masked_set(logits: list, mask: list[bool]) -> Tensor:
    """Softmax over scalar logits at active positions; exact zeros elsewhere.

    ``logits`` entries at masked positions may be None.
    """
    active, _, _, ex, z = _masked_softmax_parts(logits, mask)
    probs = ex / z
    out = np.zeros(len(mask))
    out[active] = probs
    parents = tuple(logits[k] for k in active)

    def backward(g):
        ga = g[active]
        inner = float(probs @ ga)
        for t, p, gk in zip(parents, probs, ga):
            _accumulate(t, np.asarray(p * (gk - inner)))

    return _result(out, parents, backward)


def log_softmax_over_masked_set(logits: list, mask: list[bool]) -> Tensor:
    """Log-probabilities at active positions; masked positions hold 0.0."""
    active, vals, m, ex, z = _masked_softmax_parts(logits, mask)
    logz = m + np.log(z)
    out = np.zeros(len(mask))
    out[active] = vals - logz
    probs = ex / z
    parents = tuple(logits[k] for k in active)

    def backward(g):
        ga = g[active]
        total = float(ga.sum())
        for t, p, gk in zip(parents, probs, ga):
            _accumulate(t, np.asarray(gk - p * total))

    return _result(out, parents, backward)


def log_softmax_vector(logits: Tensor) -> Tensor:
    """Log-softmax of a 1-D tensor over all of its entries."""
    if logits.data.ndim != 1 or logits.shape[0] == 0:
        raise ShapeMismatch("log_softmax_vector expects a non-empty 1-D tensor")
    x = logits.data
    m = x.max()
    ex = np.exp(x - m)
    z = ex.sum()
    out = x - (m + np.log(z))
    probs = ex / z

    def backward(g):
        _accumulate(logits, g - probs * g.sum())

    return _result(out, (logits,), backward)


def cross_entropy_with_logits(logits: Tensor, gold: int) -> Tensor:
    if logits.data.ndim != 1:
        raise ShapeMismatch("cross entropy expects a 1-D logit vector")
    if not 0 <= gold < logits.shape[0]:
        raise ShapeMismatch(f"gold index {gold} outside {logits.shape[0]} classes")
    x = logits.data
    m = x.max()
    ex = np.exp(x - m)
    z = ex.sum()
    loss = m + np.log(z) - x[gold]
    _check_finite(np.asarray(loss), "cross_entropy_with_logits")
    probs = ex / z

    def backward(g):
        d = probs.copy()
        d[gold] -= 1.0
        _accumulate(logits, float(g) * d)

    return _result(loss, (logits,), backward)


# ---------------------------------------------------------------------------
# Verification and optimization
# ---------------------------------------------------------------------------

def grad_check(f, xs, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` must be scalar-valued; relative error per coordinate is
    |analytic - numeric| / max(1, |analytic|).
    """
    if not 0 < eps <= 1e-2:
        raise ValueError("eps must lie in (0, 1e-2]")
    if isinstance(xs, Tensor):
        xs = [xs]
    for x in xs:
        x.requires_grad = True
        x.grad = None
    out = f(*xs)
    if out.data.shape != ():
        raise ShapeMismatch("grad_check needs a scalar-valued function")
    out.backward()
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy()
                for x in xs]

    max_err = 0.0
    with no_grad():
        for x, ga in zip(xs, analytic):
            flat = x.data.reshape(-1)
            gflat = ga.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                fp = float(f(*xs).data)
                flat[i] = orig - eps
                fm = float(f(*xs).data)
                flat[i] = orig
                numeric = (fp - fm) / (2.0 * eps)
                if not np.isfinite(numeric):
                    raise NonFiniteValue("non-finite finite-difference probe")
                err = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]))
                if err > max_err:
                    max_err = err
    return max_err


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params], t=0)


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState,
              lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8):
    """One bias-corrected Adam update, in place."""
    b1, b2 = betas
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params / grads / state length mismatch")
    state.t += 1
    t = state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape:
            raise ShapeMismatch(f"grad {g.shape} vs param {p.data.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
