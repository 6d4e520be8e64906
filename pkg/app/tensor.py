"""
Dense tensors with reverse-mode automatic differentiation.

Every differentiable operation executed while a ``GradientTape`` is active
(and with at least one input that ``requires_grad``) is recorded with its
input node ids, output node id and a backward rule.  ``backward`` replays
the tape in reverse and accumulates gradients into every reachable node.

All values are 64-bit floats.

Public API
----------
Tensor, GradientTape, backward(loss)
matmul, transpose, add, sub, mul, div, neg, exp, log, absolute
total_sum, row_sum, mean, concat, take_rows, gather, detach
leaky_relu, elu, sigmoid, row_softmax, row_log_softmax, l2_normalize_rows
l1_distance, cross_entropy_logits
AdamState, adam_step, Adam
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.errors import DegenerateRowError, DimensionError, UndefinedSimilarityError

Array = NDArray[np.float64]
BackwardFn = Callable[[Array], tuple[Union[Array, None], ...]]


# ---------------------------------------------------------------------------
# Tensor
# ---------------------------------------------------------------------------
class Tensor:
    """A dense float64 array that may take part in a gradient tape."""

    __slots__ = ("data", "requires_grad", "node", "tape")
    __array_priority__ = 100.0

    def __init__(self, data: ArrayLike, requires_grad: bool = False) -> None:
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.node: int | None = None
        self.tape: GradientTape | None = None

    @classmethod
    def parameter(cls, data: ArrayLike) -> Tensor:
        """A trainable leaf (tracked whenever a tape is active)."""
        return cls(np.array(data, dtype=np.float64), requires_grad=True)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def T(self) -> Tensor:  # noqa: N802
        return transpose(self)

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() needs a single value, got shape {self.shape}.")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.data.copy()

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- operators -------------------------------------------------------
    def __add__(self, other: TensorLike) -> Tensor:
        return add(self, other)

    def __radd__(self, other: TensorLike) -> Tensor:
        return add(other, self)

    def __sub__(self, other: TensorLike) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: TensorLike) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: TensorLike) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: TensorLike) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: TensorLike) -> Tensor:
        return div(self, other)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)


TensorLike = Union[Tensor, float, int, NDArray]


def as_tensor(value: TensorLike) -> Tensor:
    """Wrap constants; tensors pass through."""
    return value if isinstance(value, Tensor) else Tensor(value)


# ---------------------------------------------------------------------------
# Gradient tape
# ---------------------------------------------------------------------------
@dataclass
class TapeRecord:
    """One recorded operation."""

    inputs: tuple[int | None, ...]
    output: int
    backward: BackwardFn


_local = threading.local()


def _tape_stack() -> list[GradientTape]:
    """Tapes active on this thread, innermost last."""
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> GradientTape | None:
    """The innermost recording tape, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class GradientMap(dict):
    """Node id -> accumulated gradient, with tensor-keyed lookup."""

    def __init__(self, tape: GradientTape, grads: dict[int, Array]) -> None:
        super().__init__(grads)
        self._tape = tape

    def of(self, tensor: Tensor) -> Array | None:
        """Gradient of *tensor*; zeros if tracked but unreachable, None if untracked."""
        if not tensor.requires_grad:
            return None
        if tensor.tape is self._tape and tensor.node in self:
            return self[tensor.node]
        return np.zeros_like(tensor.data)


class GradientTape:
    """Records differentiable operations of the current thread.

    Usage::

        with GradientTape() as tape:
            loss = f(params)
        grads = tape.gradient(loss, params)
    """

    def __init__(self) -> None:
        self.records: list[TapeRecord] = []
        self._next_id = 0

    def __enter__(self) -> GradientTape:
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc: object) -> None:
        _tape_stack().remove(self)

    def watch(self, tensor: Tensor) -> int:
        """Assign *tensor* a node id on this tape (idempotent)."""
        if tensor.tape is not self or tensor.node is None:
            tensor.node = self._next_id
            tensor.tape = self
            self._next_id += 1
        return tensor.node

    def record(
        self,
        inputs: Sequence[Tensor],
        output: Tensor,
        backward_fn: BackwardFn,
    ) -> None:
        """Append one op with its backward rule."""
        ids = tuple(self.watch(t) if t.requires_grad else None for t in inputs)
        out_id = self.watch(output)
        # topological order holds because outputs are numbered after inputs
        self.records.append(TapeRecord(ids, out_id, backward_fn))

    def backward(self, loss: Tensor) -> GradientMap:
        """Accumulate d(loss)/d(node) for every node reachable from *loss*."""
        if loss.size != 1:
            raise DimensionError(
                f"backward needs a scalar loss, got shape {loss.shape}."
            )
        if loss.tape is not self or not loss.requires_grad:
            return GradientMap(self, {})
        grads: dict[int, Array] = {loss.node: np.ones_like(loss.data)}
        for rec in reversed(self.records):
            upstream = grads.get(rec.output)
            if upstream is None:
                continue
            for node, grad in zip(rec.inputs, rec.backward(upstream)):
                if node is None or grad is None:
                    continue
                grads[node] = grads[node] + grad if node in grads else grad
        return GradientMap(self, grads)

    def gradient(
        self,
        loss: Tensor,
        sources: Iterable[Tensor],
    ) -> list[Array | None]:
        """One gradient per source, zeros where the loss does not depend on it."""
        grads = self.backward(loss)
        return [grads.of(t) for t in sources]


def backward(loss: Tensor) -> GradientMap:
    """Run the backward pass on the tape that produced *loss*."""
    if loss.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}.")
    if loss.tape is None:
        return GradientMap(GradientTape(), {})
    return loss.tape.backward(loss)


def _result(data: Array, inputs: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """New tensor, recorded on the active tape with *backward_fn* when an input is tracked."""
    tape = active_tape()
    tracked = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=tracked)
    if tracked:
        tape.record(inputs, out, backward_fn)
    return out


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum *grad* down to *shape* (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------
def add(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise ``a + b`` with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise ``a - b`` with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise ``a * b`` with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        ),
    )


def div(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise ``a / b`` with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    """``-a``."""
    return _result(-a.data, (a,), lambda g: (-g,))


def exp(a: Tensor) -> Tensor:
    """Elementwise exponential."""
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    """Elementwise natural log."""
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def absolute(a: Tensor) -> Tensor:
    """Elementwise ``|a|``; the subgradient at 0 is 0."""
    return _result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


# ---------------------------------------------------------------------------
# Linear algebra and reductions
# ---------------------------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}.")
    return _result(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(a: Tensor) -> Tensor:
    """Matrix transpose."""
    return _result(a.data.T.copy(), (a,), lambda g: (g.T,))


def total_sum(a: Tensor) -> Tensor:
    """Sum of every entry, as a scalar."""
    return _result(
        np.asarray(a.data.sum()),
        (a,),
        lambda g: (np.broadcast_to(g, a.shape).copy(),),
    )


def row_sum(a: Tensor) -> Tensor:
    """Sum over columns, keeping an ``(n, 1)`` shape."""
    return _result(
        a.data.sum(axis=1, keepdims=True),
        (a,),
        lambda g: (np.broadcast_to(g, a.shape).copy(),),
    )


def mean(a: Tensor) -> Tensor:
    """Mean of every entry, as a scalar."""
    n = a.size
    return _result(
        np.asarray(a.data.mean()),
        (a,),
        lambda g: (np.broadcast_to(g / n, a.shape).copy(),),
    )


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along *axis*."""
    if not tensors:
        raise DimensionError("concat needs at least one tensor.")
    other = 1 - axis
    if len({t.shape[other] for t in tensors}) != 1:
        raise DimensionError(
            f"concat along axis {axis}: shapes {[t.shape for t in tensors]}."
        )
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def _backward(g: Array) -> tuple[Array, ...]:
        if axis == 0:
            return tuple(g[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))
        return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _result(
        np.concatenate([t.data for t in tensors], axis=axis),
        tuple(tensors),
        _backward,
    )


def take_rows(a: Tensor, rows: ArrayLike) -> Tensor:
    """Rows of *a* at *rows*."""
    idx = np.asarray(rows, dtype=np.intp)

    def _backward(g: Array) -> tuple[Array]:
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _result(a.data[idx], (a,), _backward)


def gather(a: Tensor, rows: ArrayLike, cols: ArrayLike) -> Tensor:
    """Entries ``a[rows[k], cols[k]]`` as a 1-D tensor."""
    r = np.asarray(rows, dtype=np.intp)
    c = np.asarray(cols, dtype=np.intp)

    def _backward(g: Array) -> tuple[Array]:
        full = np.zeros_like(a.data)
        np.add.at(full, (r, c), g)
        return (full,)

    return _result(a.data[r, c], (a,), _backward)


def detach(a: Tensor) -> Tensor:
    """Same values, cut from the tape."""
    return Tensor(a.data)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------
def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    """``a`` where positive, ``slope * a`` elsewhere."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}.")
    positive = a.data >= 0
    return _result(
        np.where(positive, a.data, slope * a.data),
        (a,),
        lambda g: (np.where(positive, g, slope * g),),
    )


def elu(a: Tensor) -> Tensor:
    """``a`` where positive, ``exp(a) - 1`` elsewhere."""
    positive = a.data > 0
    negative_part = np.expm1(np.minimum(a.data, 0.0))
    return _result(
        np.where(positive, a.data, negative_part),
        (a,),
        lambda g: (np.where(positive, g, g * (negative_part + 1.0)),),
    )


def _stable_sigmoid(x: Array) -> Array:
    """Logistic function without overflow for large ``|x|``."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    """Elementwise logistic function."""
    out = _stable_sigmoid(a.data)
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),))


def _check_mask(a: Tensor, mask: ArrayLike | None) -> NDArray[np.bool_] | None:
    """Boolean mask shaped like *a*; a row without admissible entries raises."""
    if mask is None:
        return None
    m = np.asarray(mask.data if isinstance(mask, Tensor) else mask).astype(bool)
    if m.shape != a.shape:
        raise DimensionError(f"mask shape {m.shape} != input shape {a.shape}.")
    empty = np.flatnonzero(~m.any(axis=1))
    if empty.size:
        raise DegenerateRowError(f"row {int(empty[0])} is fully masked.")
    return m


def row_softmax(a: Tensor, mask: ArrayLike | None = None) -> Tensor:
    """Softmax over each row; masked entries are exactly 0."""
    m = _check_mask(a, mask)
    z = a.data if m is None else np.where(m, a.data, -np.inf)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    s = e / e.sum(axis=1, keepdims=True)
    return _result(
        s,
        (a,),
        lambda g: (s * (g - (g * s).sum(axis=1, keepdims=True)),),
    )


def row_log_softmax(a: Tensor, mask: ArrayLike | None = None) -> Tensor:
    """Log-softmax over each row; masked entries are reported as 0 and get no gradient."""
    m = _check_mask(a, mask)
    z = a.data if m is None else np.where(m, a.data, -np.inf)
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - lse
    s = np.exp(out)
    if m is not None:
        out = np.where(m, out, 0.0)

    def _backward(g: Array) -> tuple[Array]:
        if m is not None:
            g = np.where(m, g, 0.0)
        return (g - s * g.sum(axis=1, keepdims=True),)

    return _result(out, (a,), _backward)


def l2_normalize_rows(a: Tensor) -> Tensor:
    """Rows scaled to unit L2 norm."""
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    zero = np.flatnonzero(norms[:, 0] == 0.0)
    if zero.size:
        raise UndefinedSimilarityError(f"row {int(zero[0])} has zero norm.")
    out = a.data / norms
    return _result(
        out,
        (a,),
        lambda g: ((g - out * (g * out).sum(axis=1, keepdims=True)) / norms,),
    )


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------
def l1_distance(a: Tensor, b: Tensor) -> Tensor:
    """Sum of absolute differences (subgradient 0 at ties)."""
    if a.shape != b.shape:
        raise DimensionError(f"l1_distance shape mismatch: {a.shape} vs {b.shape}.")
    return total_sum(absolute(a - b))


def cross_entropy_logits(logits: Tensor, labels: ArrayLike) -> Tensor:
    """Mean over rows of ``-log softmax(logits)[label]``."""
    y = np.asarray(labels, dtype=np.intp)
    n, c = logits.shape
    if y.shape != (n,):
        raise DimensionError(f"labels shape {y.shape} does not match {n} rows.")
    if n == 0:
        raise DimensionError("cross_entropy_logits on an empty batch.")
    if y.min() < 0 or y.max() >= c:
        raise ValueError(f"labels must lie in [0, {c}), got range [{y.min()}, {y.max()}].")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(n), y].mean()

    def _backward(g: Array) -> tuple[Array]:
        grad = np.exp(log_probs)
        grad[np.arange(n), y] -= 1.0
        return (g * grad / n,)

    return _result(np.asarray(loss), (logits,), _backward)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------
@dataclass
class AdamState:
    """Moment accumulators of one parameter group."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[Array] = field(default_factory=list)
    v: list[Array] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], lr: float) -> AdamState:
        """Zero moments for *params*."""
        return cls(
            lr=lr,
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[Array | None],
    state: AdamState,
) -> tuple[Sequence[Tensor], AdamState]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if not (len(params) == len(grads) == len(state.m)):
        raise DimensionError("params, grads and Adam moments are not aligned.")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}.")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


class Adam:
    """Adam over a fixed parameter group."""

    def __init__(self, params: Sequence[Tensor], lr: float) -> None:
        self.params = list(params)
        self.state = AdamState.for_params(self.params, lr)

    def step(self, grads: Sequence[Array | None]) -> None:
        """One in-place Adam update."""
        adam_step(self.params, grads, self.state)
