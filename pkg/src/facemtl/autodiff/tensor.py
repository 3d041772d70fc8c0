"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a row-major numpy array. Operations on tensors (see
``ops``) record their backward rules onto the currently active ``Tape``;
calling ``backward(loss)`` replays the tape in reverse and deposits
gradients on every ``requires_grad`` leaf.

Two precision modes exist:

* ``"f64"`` (default): 64-bit floats, strict domain checks. Gradient
  checking is only reliable here.
* ``"f32"``: 32-bit floats for training / profiling runs.

The mode controls the dtype of newly created tensors; ops inherit the
dtype of their operands. A tape is single-use: one forward pass, one
backward pass, then it is consumed.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "DomainError",
    "TapeError",
    "set_mode",
    "current_mode",
    "default_dtype",
    "precision",
    "active_tape",
    "backward",
    "as_tensor",
]


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


class DomainError(ValueError):
    """Raised in 64-bit mode when an input leaves an op's domain."""


class TapeError(RuntimeError):
    """Raised on tape misuse (reuse after backward, non-scalar loss, ...)."""


_MODE = "f64"
_DTYPES = {"f64": np.float64, "f32": np.float32}


def set_mode(mode: str) -> None:
    """Select the global precision mode: 'f64' (test) or 'f32' (run)."""
    if mode not in _DTYPES:
        raise ValueError(f"unknown precision mode {mode!r}; expected 'f64' or 'f32'")
    global _MODE
    _MODE = mode


def current_mode() -> str:
    return _MODE


def default_dtype():
    return _DTYPES[_MODE]


class precision:
    """Context manager that temporarily switches the precision mode."""

    def __init__(self, mode: str):
        self._mode = mode
        self._prev = None

    def __enter__(self):
        self._prev = current_mode()
        set_mode(self._mode)
        return self

    def __exit__(self, *exc):
        set_mode(self._prev)
        return False


class Tensor:
    """A dense n-dimensional array, optionally tracked for gradients.

    Attributes:
        data: the underlying numpy array (row-major).
        requires_grad: whether this tensor is a differentiable leaf.
        grad: populated by ``backward`` for requires_grad leaves; same
            shape as ``data``.

    Tensors are immutable under ops; ``data`` is only rewritten by
    parameter initialization, the optimizer, and checkpoint loading.
    """

    __slots__ = ("data", "requires_grad", "grad", "_tape", "_node_id")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype or default_dtype())
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._tape = None
        self._node_id = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        """A constant view of this tensor: same data, no grad tracking."""
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype}{flag})"

    # Arithmetic sugar; the actual rules live in ops.py.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __pow__(self, p):
        from . import ops
        return ops.power(self, p)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    """Coerce scalars / arrays to a constant Tensor (dtype follows ``like``)."""
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else default_dtype()
    return Tensor(np.asarray(value, dtype=dtype))


class _Node:
    """One tape entry: the op that produced a value and how to reverse it.

    ``backward_fn`` maps the output gradient to a tuple of input
    gradients aligned with ``input_ids`` (entries for constant inputs
    are ignored). Leaf nodes have no backward_fn and instead carry the
    leaf tensor so its ``grad`` can be filled in.
    """

    __slots__ = ("op", "input_ids", "backward_fn", "leaf")

    def __init__(self, op, input_ids, backward_fn, leaf=None):
        self.op = op
        self.input_ids = input_ids
        self.backward_fn = backward_fn
        self.leaf = leaf


_ACTIVE_TAPE: "Tape | None" = None


def active_tape() -> "Tape | None":
    return _ACTIVE_TAPE


class Tape:
    """Append-only record of differentiable operations.

    Node ids are assigned in execution order, so every node's inputs
    have strictly smaller ids; ``backward`` walks ids in decreasing
    order exactly once. A tape is consumed by its first backward pass.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._consumed = False
        self._prev = None

    def __enter__(self):
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        return False

    def __len__(self):
        return len(self._nodes)

    def tracks(self, t: Tensor) -> bool:
        return t._tape is self and t._node_id is not None

    def _leaf_id(self, t: Tensor) -> int | None:
        """Node id of ``t`` on this tape, registering requires_grad leaves."""
        if self.tracks(t):
            return t._node_id
        if t.requires_grad:
            node_id = len(self._nodes)
            self._nodes.append(_Node("leaf", (), None, leaf=t))
            t._tape = self
            t._node_id = node_id
            return node_id
        return None

    def record(self, out: Tensor, inputs, backward_fn, op: str) -> None:
        if self._consumed:
            raise TapeError("tape already consumed by backward; open a new Tape")
        input_ids = tuple(self._leaf_id(t) for t in inputs)
        node_id = len(self._nodes)
        self._nodes.append(_Node(op, input_ids, backward_fn))
        out._tape = self
        out._node_id = node_id

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every requires_grad leaf's grad."""
        if self._consumed:
            raise TapeError("tape already consumed; gradients were already computed")
        if loss.data.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
        if not self.tracks(loss):
            raise TapeError("loss is not on this tape")
        self._consumed = True

        grads: dict[int, np.ndarray] = {
            loss._node_id: np.ones_like(loss.data)
        }
        for node_id in range(loss._node_id, -1, -1):
            g = grads.pop(node_id, None)
            if g is None:
                continue
            node = self._nodes[node_id]
            if node.leaf is not None:
                leaf = node.leaf
                if leaf.grad is None:
                    leaf.grad = g.copy()
                else:
                    leaf.grad = leaf.grad + g
                continue
            input_grads = node.backward_fn(g)
            for in_id, ig in zip(node.input_ids, input_grads):
                if in_id is None or ig is None:
                    continue
                if in_id in grads:
                    grads[in_id] = grads[in_id] + ig
                else:
                    grads[in_id] = ig


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from ``loss`` over its tape."""
    if loss._tape is None:
        raise TapeError("loss was not computed under an active Tape")
    loss._tape.backward(loss)
