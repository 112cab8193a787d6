"""Dense float64 tensors and the define-by-run gradient tape.

A tensor only records its history while a ``GradTape`` is active. Outside a
tape every operation produces a plain constant, which is how inference and
finite-difference evaluation run.
"""

import contextvars
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from types import TracebackType
from typing import Any

import numpy as np

from cape.exceptions import CapeError, NonScalarError

BackwardFn = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]

_ACTIVE_TAPE: contextvars.ContextVar["GradTape | None"] = contextvars.ContextVar(
    "cape_active_tape", default=None
)


@dataclass(eq=False)
class TapeNode:
    """One recorded operation: its output, parents and backward closure."""

    index: int
    op: str
    output: "Tensor"
    parents: tuple["Tensor", ...]
    backward: BackwardFn


class Tensor:
    """Dense n-dimensional array of 64-bit floats with an optional tape handle."""

    __slots__ = ("data", "grad", "requires_grad", "tape_node", "name")

    # numpy operands defer to the reflected Tensor operators.
    __array_ufunc__ = None

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: str | None = None,
        *,
        copy: bool = True,
    ) -> None:
        """Create a tensor.

        Args:
            data: Array-like values; always stored as contiguous float64.
            requires_grad: Whether gradients should be accumulated for this tensor.
            name: Optional label used in diagnostics.
            copy: Copy the input buffer (set False only for freshly computed arrays).
        """
        if copy or not isinstance(data, np.ndarray) or data.dtype != np.float64:
            data = np.array(data, dtype=np.float64)
        self.data: np.ndarray = np.ascontiguousarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.tape_node: TapeNode | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        """Extents of the tensor."""
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def T(self) -> "Tensor":  # noqa: N802
        return ops.transpose(self)

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        if self.data.size != 1:
            raise NonScalarError(self.shape)
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a copy of the values."""
        return self.data.copy()

    def detach(self) -> "Tensor":
        """Return a constant tensor sharing this tensor's values."""
        return Tensor(self.data, copy=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def __add__(self, other: Any) -> "Tensor":
        return ops.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return ops.add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return ops.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return ops.mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        return ops.div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        return ops.div(other, self)

    def __neg__(self) -> "Tensor":
        return ops.neg(self)

    def __matmul__(self, other: Any) -> "Tensor":
        return ops.matmul(self, other)

    def __rmatmul__(self, other: Any) -> "Tensor":
        return ops.matmul(other, self)

    def __getitem__(self, index: Any) -> "Tensor":
        return ops.getitem(self, index)

    def sum(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        return ops.reshape(self, shape)


class GradTape:
    """Ordered record of operations for one forward pass.

    Nodes are appended in execution order, so every node's parents precede it.
    Use as a context manager around the forward pass, then call ``backward``.
    """

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []
        self._token: contextvars.Token[GradTape | None] | None = None

    def __enter__(self) -> "GradTape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def append(
        self, op: str, output: Tensor, parents: tuple[Tensor, ...], backward: BackwardFn
    ) -> TapeNode:
        """Record an operation whose output was just computed."""
        node = TapeNode(len(self.nodes), op, output, parents, backward)
        self.nodes.append(node)
        output.tape_node = node
        return node

    def _owns(self, tensor: Tensor) -> bool:
        node = tensor.tape_node
        return node is not None and node.index < len(self.nodes) and self.nodes[node.index] is node

    def backward(self, loss: Tensor) -> None:
        """Propagate gradients from a scalar loss to every reachable tensor.

        Leaf tensors (parameters) accumulate into ``.grad``; intermediate
        tensors receive their gradient once, in reverse recording order.

        Raises:
            NonScalarError: If the loss has more than one element.
        """
        if loss.data.size != 1:
            raise NonScalarError(loss.shape)
        seed = np.ones_like(loss.data)
        if not loss.requires_grad:
            loss.grad = seed
            return
        if not self._owns(loss):
            raise CapeError("backward() called with a loss recorded on a different tape")

        assert loss.tape_node is not None
        pending: dict[int, np.ndarray] = {loss.tape_node.index: seed}
        for node in reversed(self.nodes[: loss.tape_node.index + 1]):
            grad = pending.pop(node.index, None)
            if grad is None:
                continue
            node.output.grad = grad
            parent_grads = node.backward(grad)
            for parent, parent_grad in zip(node.parents, parent_grads, strict=True):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if self._owns(parent):
                    assert parent.tape_node is not None
                    idx = parent.tape_node.index
                    if idx in pending:
                        pending[idx] = pending[idx] + parent_grad
                    else:
                        pending[idx] = parent_grad
                elif parent.grad is None:
                    parent.grad = np.array(parent_grad, dtype=np.float64)
                else:
                    parent.grad = parent.grad + parent_grad


def active_tape() -> GradTape | None:
    """Return the tape currently recording, if any."""
    return _ACTIVE_TAPE.get()


def record(
    op: str, data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn
) -> Tensor:
    """Wrap a computed array as a tensor, recording it when a tape is active."""
    tape = _ACTIVE_TAPE.get()
    requires_grad = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires_grad, copy=False)
    if requires_grad and tape is not None:
        tape.append(op, out, tuple(parents), backward)
    return out


from cape.autodiff import ops  # noqa: E402
