"""Small reverse-mode autodiff engine over float64 numpy arrays.

Only the primitives needed by the sentence encoder and the noisy-label loss
are provided. Operations are batch-aware but there is no general
broadcasting: every binary op checks shapes when the node is built.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when two composed primitives disagree on shape."""


def _shape_error(op: str, a: tuple, b: tuple) -> ShapeError:
    return ShapeError(f"{op}: incompatible shapes {a} and {b}")


class Tensor:
    """A node in the computation graph.

    Leaves created by :class:`ParamStore` keep their ``grad`` between
    backward passes (it is the accumulator); intermediate nodes get a fresh
    gradient on every :meth:`backward` call.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "live_dropout")

    def __init__(self, data, requires_grad: bool = False, parents: Sequence["Tensor"] = (),
                 backward: Callable[[np.ndarray], None] | None = None, op: str = "leaf"):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = tuple(parents)
        self._backward = backward
        self.op = op
        self.live_dropout = False

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def nodes(self) -> list["Tensor"]:
        """Topologically ordered list of every node feeding this one."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = self.nodes()
        for node in order:
            if node._parents:
                node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.requires_grad and node.grad is not None:
                node._backward(node.grad)

    # operator sugar for the elementwise ops
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, neg(other))


def _node(data, parents, backward, op) -> Tensor:
    rg = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=rg, parents=parents, backward=backward if rg else None, op=op)


def constant(data) -> Tensor:
    return Tensor(data)


# elementwise -------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise _shape_error("add", a.shape, b.shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _node(a.data + b.data, (a, b), backward, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise _shape_error("mul", a.shape, b.shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _node(a.data * b.data, (a, b), backward, "mul")


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: a._accumulate(-g), "neg")


def scale(a: Tensor, factor) -> Tensor:
    """Multiply by a constant array of the same shape (or a python scalar)."""
    factor = np.asarray(factor, dtype=DTYPE)
    if factor.ndim and factor.shape != a.shape:
        raise _shape_error("scale", a.shape, factor.shape)
    return _node(a.data * factor, (a,), lambda g: a._accumulate(g * factor), "scale")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _node(out, (a,), lambda g: a._accumulate(g * (1.0 - out * out)), "tanh")


def total(a: Tensor) -> Tensor:
    """Sum of all elements, as a 0-d tensor."""
    return _node(a.data.sum(), (a,), lambda g: a._accumulate(np.broadcast_to(g, a.shape)), "sum")


def dot(a: Tensor, weights) -> Tensor:
    """Weighted sum ``sum(a * weights)`` with constant weights."""
    weights = np.asarray(weights, dtype=DTYPE)
    if weights.shape != a.shape:
        raise _shape_error("dot", a.shape, weights.shape)
    return _node(np.dot(a.data.ravel(), weights.ravel()), (a,),
                 lambda g: a._accumulate(g * weights), "dot")


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None = None,
            mask: np.ndarray | None = None) -> Tensor:
    """Inverted dropout.

    Pass ``rng`` to draw a live mask or ``mask`` to reuse a frozen one (the
    mask already holds the ``1/(1-rate)`` scaling). A node built from a live
    draw is flagged so :func:`gradient_check` can refuse it.
    """
    if mask is None:
        if rng is None:
            raise ValueError("dropout needs either an rng or a frozen mask")
        mask = dropout_mask(a.shape, rate, rng)
        live = True
    else:
        mask = np.asarray(mask, dtype=DTYPE)
        if mask.shape != a.shape:
            raise _shape_error("dropout", a.shape, mask.shape)
        live = False
    out = _node(a.data * mask, (a,), lambda g: a._accumulate(g * mask), "dropout")
    out.live_dropout = live
    return out


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep.astype(DTYPE) / (1.0 - rate)


# structural --------------------------------------------------------------

def gather(table: Tensor, index) -> Tensor:
    """Embedding lookup: rows of a 2-d table selected by an integer array."""
    index = np.asarray(index, dtype=np.intp)
    if table.data.ndim != 2:
        raise ShapeError(f"gather: table must be 2-d, got shape {table.shape}")
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise IndexError(f"gather: index out of range for table with {table.shape[0]} rows")

    def backward(g):
        acc = np.zeros_like(table.data)
        np.add.at(acc, index.ravel(), g.reshape(-1, table.shape[1]))
        table._accumulate(acc)

    return _node(table.data[index], (table,), backward, "gather")


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    shapes = [p.shape for p in parts]
    ax = axis % len(shapes[0])
    for s in shapes[1:]:
        if len(s) != len(shapes[0]) or any(x != y for i, (x, y) in enumerate(zip(s, shapes[0])) if i != ax):
            raise _shape_error("concat", shapes[0], s)
    bounds = np.cumsum([s[ax] for s in shapes])[:-1]

    def backward(g):
        for p, gp in zip(parts, np.split(g, bounds, axis=ax)):
            if p.requires_grad:
                p._accumulate(gp)

    return _node(np.concatenate([p.data for p in parts], axis=ax), tuple(parts), backward, "concat")


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """``x @ weight.T + bias`` for x of shape (N, n), weight (K, n), bias (K,)."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise _shape_error("affine", x.shape, weight.shape)
    if bias.shape != (weight.shape[0],):
        raise _shape_error("affine bias", weight.shape, bias.shape)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g @ weight.data)
        if weight.requires_grad:
            weight._accumulate(g.T @ x.data)
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0))

    return _node(x.data @ weight.data.T + bias.data, (x, weight, bias), backward, "affine")


def _windows(x: np.ndarray, width: int) -> np.ndarray:
    # (N, L, d) -> (N, L-width+1, width*d), window-major then feature
    n, length, d = x.shape
    w = np.lib.stride_tricks.sliding_window_view(x, width, axis=1)  # (N, T, d, width)
    return np.ascontiguousarray(w.transpose(0, 1, 3, 2)).reshape(n, length - width + 1, width * d)


def conv1d(x: Tensor, filters: Tensor, bias: Tensor) -> Tensor:
    """Valid 1-d convolution.

    x is (N, L, d), filters (m, l, d), bias (m,). Output (N, L-l+1, m) where
    ``out[n, i, t] = sum(filters[t] * x[n, i:i+l]) + bias[t]``.
    """
    if x.data.ndim != 3 or filters.data.ndim != 3 or x.shape[2] != filters.shape[2]:
        raise _shape_error("conv1d", x.shape, filters.shape)
    if bias.shape != (filters.shape[0],):
        raise _shape_error("conv1d bias", filters.shape, bias.shape)
    m, width, d = filters.shape
    n, length, _ = x.shape
    if length < width:
        raise _shape_error("conv1d (sequence shorter than window)", x.shape, filters.shape)
    win = _windows(x.data, width)
    flat = filters.data.reshape(m, width * d)
    out = win @ flat.T + bias.data
    steps = length - width + 1

    def backward(g):
        if filters.requires_grad:
            filters._accumulate((g.reshape(-1, m).T @ win.reshape(-1, width * d)).reshape(m, width, d))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 1)))
        if x.requires_grad:
            dwin = (g @ flat).reshape(n, steps, width, d)
            dx = np.zeros_like(x.data)
            for k in range(width):
                dx[:, k:k + steps, :] += dwin[:, :, k, :]
            x._accumulate(dx)

    return _node(out, (x, filters, bias), backward, "conv1d")


def segment_max(c: Tensor, segments, n_segments: int = 3) -> Tensor:
    """Per-segment max over the position axis.

    c is (N, T, m); ``segments`` is an int array (N, T) assigning each
    position to a segment in ``[0, n_segments)`` or -1 (ignored padding).
    Output is (N, m * n_segments) laid out filter-major:
    ``[p_11, p_12, p_13, p_21, ...]``. Empty segments yield 0 and pass no
    gradient; ties route the gradient to the lowest position.
    """
    segments = np.asarray(segments)
    if c.data.ndim != 3 or segments.shape != c.shape[:2]:
        raise _shape_error("segment_max", c.shape, segments.shape)
    n, steps, m = c.shape
    out = np.zeros((n, m, n_segments), dtype=DTYPE)
    arg = np.zeros((n, m, n_segments), dtype=np.intp)
    present = np.zeros((n, n_segments), dtype=bool)
    for s in range(n_segments):
        member = segments == s  # (N, T)
        present[:, s] = member.any(axis=1)
        masked = np.where(member[:, :, None], c.data, -np.inf)
        a = masked.argmax(axis=1)  # first maximum -> lowest index on ties
        arg[:, :, s] = a
        vals = np.take_along_axis(c.data, a[:, None, :], axis=1)[:, 0, :]
        out[:, :, s] = np.where(present[:, s, None], vals, 0.0)

    def backward(g):
        g = g.reshape(n, m, n_segments) * present[:, None, :]
        dc = np.zeros_like(c.data)
        rows = np.arange(n)[:, None]
        cols = np.arange(m)[None, :]
        for s in range(n_segments):
            np.add.at(dc, (rows, arg[:, :, s], cols), g[:, :, s])
        c._accumulate(dc)

    return _node(out.reshape(n, m * n_segments), (c,), backward, "segment_max")


def structured_transition(h: Tensor, column: Tensor) -> Tensor:
    """Apply the first-column transition to logits.

    h is (N, K), column (K,). ``out[:, 0] = column[0] * h[:, 0]`` and
    ``out[:, k] = column[k] * h[:, 0] + h[:, k]`` for k >= 1, i.e. the
    product with the matrix whose first column is ``column``, whose other
    diagonal entries are 1, and which is 0 elsewhere.
    """
    if h.data.ndim != 2 or column.shape != (h.shape[1],):
        raise _shape_error("structured_transition", h.shape, column.shape)
    h1 = h.data[:, :1]
    out = h1 * column.data[None, :]
    out[:, 1:] += h.data[:, 1:]

    def backward(g):
        if h.requires_grad:
            dh = g.copy()
            dh[:, 0] = g @ column.data
            h._accumulate(dh)
        if column.requires_grad:
            column._accumulate(h1[:, 0] @ g)

    return _node(out, (h, column), backward, "structured_transition")


def logsumexp(x: Tensor) -> Tensor:
    """Stable log-sum-exp over the last axis: (N, K) -> (N,)."""
    top = x.data.max(axis=-1, keepdims=True)
    e = np.exp(x.data - top)
    s = e.sum(axis=-1, keepdims=True)
    out = (np.log(s) + top)[..., 0]
    soft = e / s
    return _node(out, (x,), lambda g: x._accumulate(g[..., None] * soft), "logsumexp")


def pick(x: Tensor, index) -> Tensor:
    """Select one column per row: (N, K), (N,) -> (N,)."""
    index = np.asarray(index, dtype=np.intp)
    if x.data.ndim != 2 or index.shape != (x.shape[0],):
        raise _shape_error("pick", x.shape, index.shape)
    rows = np.arange(x.shape[0])

    def backward(g):
        d = np.zeros_like(x.data)
        d[rows, index] = g
        x._accumulate(d)

    return _node(x.data[rows, index], (x,), backward, "pick")


# parameters --------------------------------------------------------------

class ParamStore:
    """Named trainable tensors with gradient accumulators and Adam state."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.moment1: dict[str, np.ndarray] = {}
        self.moment2: dict[str, np.ndarray] = {}
        self.steps: dict[str, int] = {}

    def add(self, name: str, value, trainable: bool = True) -> Tensor:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already exists")
        t = Tensor(np.array(value, dtype=DTYPE), requires_grad=trainable, op=f"param:{name}")
        t.grad = np.zeros_like(t.data)
        self._params[name] = t
        self.reset_state(name)
        return t

    def reset_state(self, name: str) -> None:
        shape = self._params[name].shape
        self.moment1[name] = np.zeros(shape, dtype=DTYPE)
        self.moment2[name] = np.zeros(shape, dtype=DTYPE)
        self.steps[name] = 0

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def is_trainable(self, name: str) -> bool:
        return self._params[name].requires_grad

    def set_trainable(self, name: str, flag: bool) -> None:
        self._params[name].requires_grad = flag

    def set_value(self, name: str, value) -> None:
        t = self._params[name]
        value = np.asarray(value, dtype=DTYPE)
        if value.shape != t.shape:
            raise _shape_error(f"set_value({name})", t.shape, value.shape)
        t.data = value.copy()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def values(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for k, t in self._params.items():
            other.add(k, t.data, trainable=t.requires_grad)
        return other


def forward_backward(loss_fn: Callable[[ParamStore], Tensor], params: ParamStore) -> float:
    """Zero gradients, build the loss graph, backpropagate, return the loss."""
    params.zero_grad()
    loss = loss_fn(params)
    if loss.data.size != 1:
        raise ShapeError(f"loss must be a scalar, got shape {loss.shape}")
    loss.backward()
    return loss.item()


class GradCheckReport:
    def __init__(self, errors: dict[str, float], tolerance: float):
        self.errors = errors
        self.tolerance = tolerance
        # strict "<": a zero tolerance always flags
        self.flagged = any(not (e < tolerance) for e in errors.values())

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def __repr__(self) -> str:
        body = ", ".join(f"{k}={v:.2e}" for k, v in self.errors.items())
        return f"GradCheckReport(flagged={self.flagged}, {body})"


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps near-zero gradients from exploding."""
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def gradient_check(loss_fn: Callable[[ParamStore], Tensor], params: ParamStore, step: float = 1e-5,
                   tolerance: float = 1e-4, names: Iterable[str] | None = None,
                   max_elements: int | None = None, seed: int = 0,
                   floor: float = 1e-6) -> GradCheckReport:
    """Compare analytic gradients to central finite differences.

    ``max_elements`` caps how many entries per parameter are perturbed
    (sampled with ``seed``); by default every entry is checked.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    probe = loss_fn(params)
    if any(node.live_dropout for node in probe.nodes()):
        raise RuntimeError("graph contains live dropout; pass a frozen mask so the loss is deterministic")
    forward_backward(loss_fn, params)
    analytic = {k: t.grad.copy() for k, t in params.items()}
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name in (names if names is not None else params.names()):
        t = params[name]
        if not t.requires_grad:
            continue
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            idx = np.sort(rng.choice(flat.size, size=max_elements, replace=False))
        numeric = np.empty(idx.size)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(params).item()
            flat[i] = orig - step
            down = loss_fn(params).item()
            flat[i] = orig
            numeric[j] = (up - down) / (2 * step)
        errors[name] = float(relative_error(analytic[name].reshape(-1)[idx], numeric, floor).max(initial=0.0))
    return GradCheckReport(errors, tolerance)
