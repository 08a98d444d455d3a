"""Dense float64 arrays with tape-based reverse-mode differentiation.

Only what the relation networks and the exploration policy need is here.
Shapes are never broadcast implicitly: a bias add is its own op, elementwise
ops require identical shapes.
"""
from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64
BCE_EPS = 1e-7


class ShapeError(ValueError):
    pass


class Tensor:
    """A dense array plus the bookkeeping needed to differentiate through it."""

    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Callable | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    # operator sugar; all of it routes through the explicit-shape ops below
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Records ops while active. Creation order is already a topological order."""

    _active: list["Tape"] = []

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        Tape._active.append(self)
        return self

    def __exit__(self, *exc) -> None:
        Tape._active.pop()

    @classmethod
    def current(cls) -> "Tape | None":
        return cls._active[-1] if cls._active else None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor(data)
    tape = Tape.current()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
        tape.nodes.append(out)
    if not np.all(np.isfinite(out.data)):
        raise FloatingPointError(f"non-finite values produced (shape {out.shape})")
    return out


def _same_shape(opname: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{opname}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# forward ops


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return _result(a.data @ b.data, (a, b), bw)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("mul", a, b)
    return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _result(a.data * c, (a,), lambda g: (g * c,))


def add_bias(x, b) -> Tensor:
    """x (m, k) plus b (k,) added to every row."""
    x, b = as_tensor(x), as_tensor(b)
    if x.data.ndim != 2 or b.data.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: shape mismatch {x.shape} vs {b.shape}")
    return _result(x.data + b.data, (x, b), lambda g: (g, g.sum(axis=0)))


def relu(x) -> Tensor:
    x = as_tensor(x)
    y = np.maximum(x.data, 0.0)
    return _result(y, (x,), lambda g: (g * (y > 0),))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    z = x.data
    # stable in both tails
    e = np.exp(-np.abs(z))
    s = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _result(s, (x,), lambda g: (g * s * (1.0 - s),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):  # overflow is reported by _result as non-finite
        y = np.exp(x.data)
    return _result(y, (x,), lambda g: (g * y,))


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise FloatingPointError("log of non-positive value")
    return _result(np.log(x.data), (x,), lambda g: (g / x.data,))


def softmax(x) -> Tensor:
    """Softmax over the last axis."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _result(s, (x,), bw)


def log_softmax(x) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    s = np.exp(y)

    def bw(g):
        return (g - s * g.sum(axis=-1, keepdims=True),)

    return _result(y, (x,), bw)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    ndim = ts[0].data.ndim
    ax = axis % ndim
    for t in ts[1:]:
        if t.data.ndim != ndim or any(
            t.shape[d] != ts[0].shape[d] for d in range(ndim) if d != ax
        ):
            raise ShapeError(f"concat: shape mismatch {ts[0].shape} vs {t.shape}")
    sizes = np.cumsum([t.shape[ax] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, sizes, axis=ax))

    return _result(np.concatenate([t.data for t in ts], axis=ax), ts, bw)


def take_rows(x, idx) -> Tensor:
    """Gather rows x[idx] along axis 0 (indices may repeat)."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    shape = x.shape

    def bw(g):
        out = np.zeros(shape, dtype=DTYPE)
        np.add.at(out, idx, g)
        return (out,)

    return _result(x.data[idx], (x,), bw)


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"transpose: expected 2-d, got {x.shape}")
    return _result(x.data.T.copy(), (x,), lambda g: (g.T,))


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    return _result(np.array(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def mean(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    if axis is None:
        n = x.data.size
        return _result(np.array(x.data.mean()), (x,), lambda g: (np.full(shape, float(g) / n),))
    ax = axis % x.data.ndim
    n = shape[ax]
    return _result(
        x.data.mean(axis=ax),
        (x,),
        lambda g: (np.broadcast_to(np.expand_dims(g, ax) / n, shape).copy(),),
    )


def max_reduce(x, axis: int) -> Tensor:
    """Max over one axis; the gradient goes to the first maximiser."""
    x = as_tensor(x)
    ax = axis % x.data.ndim
    arg = np.argmax(x.data, axis=ax)
    out = np.take_along_axis(x.data, np.expand_dims(arg, ax), axis=ax).squeeze(ax)
    shape = x.shape

    def bw(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.put_along_axis(full, np.expand_dims(arg, ax), np.expand_dims(g, ax), axis=ax)
        return (full,)

    return _result(out, (x,), bw)


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp into [lo, hi]; gradient passes only strictly inside the interval."""
    x = as_tensor(x)
    inside = (x.data > lo) & (x.data < hi)
    return _result(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


def minimum(a, b) -> Tensor:
    """Elementwise min; ties send the gradient to ``b``."""
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("minimum", a, b)
    pick_a = a.data < b.data
    return _result(
        np.where(pick_a, a.data, b.data), (a, b), lambda g: (g * pick_a, g * ~pick_a)
    )


def linear(x, w, b=None) -> Tensor:
    y = matmul(x, w)
    return y if b is None else add_bias(y, b)


# ---------------------------------------------------------------------------
# loss


def bce_loss(pred, target, weight=None) -> Tensor:
    """Binary cross entropy on probabilities, weighted mean over all entries."""
    pred = as_tensor(pred)
    t = np.asarray(target, dtype=DTYPE)
    if t.shape != pred.shape:
        t = np.broadcast_to(t, pred.shape)
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValueError("bce_loss: targets must be 0 or 1")
    w = np.ones(pred.shape) if weight is None else np.asarray(weight, dtype=DTYPE)
    p = clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    one = Tensor(np.ones(pred.shape))
    ll = add(mul(Tensor(t * w), log(p)), mul(Tensor((1.0 - t) * w), log(sub(one, p))))
    return scale(sum_all(ll), -1.0 / w.sum())


# ---------------------------------------------------------------------------
# backward


def backward(loss: Tensor, tape: Tape) -> dict[int, np.ndarray]:
    """Gradients of a scalar loss, keyed by ``id`` of every tensor on the path."""
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss.backward_fn is None:
        raise ValueError("backward: loss was not produced under an active tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape, dtype=DTYPE)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.array(pg, dtype=DTYPE, copy=True)
    return grads


# ---------------------------------------------------------------------------
# parameters and optimizer


CKPT_MAGIC = b"FGCKPT"
CKPT_VERSION = 1


class CheckpointError(ValueError):
    pass


class ParamStore:
    """Named trainable tensors with Adam state."""

    def __init__(self, lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.steps = 0
        self.lr = lr
        self.betas = betas
        self.eps = eps

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=DTYPE), requires_grad=True, name=name)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self) -> int:
        return len(self.params)

    def gradients(self, grads: dict[int, np.ndarray]) -> dict[str, np.ndarray]:
        return {
            name: grads.get(id(t), np.zeros_like(t.data)) for name, t in self.params.items()
        }

    def step(self, grads: dict[str, np.ndarray]) -> None:
        """One Adam update. Any non-finite gradient aborts before touching state."""
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        self.steps += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1**self.steps
        c2 = 1.0 - b2**self.steps
        for name, t in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(t.data)
            m = self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            t.data = t.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> "OrderedDict[str, np.ndarray]":
        out: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for name, t in self.params.items():
            out[name] = t.data
        for name in self.params:
            out["adam.m/" + name] = self.m[name]
            out["adam.v/" + name] = self.v[name]
        out["adam.steps"] = np.array([float(self.steps)])
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.params.items():
            if name not in arrays:
                raise CheckpointError(f"checkpoint lacks parameter {name!r}")
            if arrays[name].shape != t.shape:
                raise CheckpointError(
                    f"parameter {name!r}: checkpoint shape {arrays[name].shape} vs {t.shape}"
                )
            t.data = np.array(arrays[name], dtype=DTYPE)
            self.m[name] = np.array(arrays.get("adam.m/" + name, np.zeros_like(t.data)))
            self.v[name] = np.array(arrays.get("adam.v/" + name, np.zeros_like(t.data)))
        if "adam.steps" in arrays:
            self.steps = int(arrays["adam.steps"][0])

    def save(self, path) -> None:
        save_tensors(path, self.state_arrays())

    def load(self, path) -> None:
        self.load_arrays(load_tensors(path))


def save_tensors(path, arrays: "dict[str, np.ndarray]") -> None:
    """Write named float64 arrays: magic, version, count, then (name, shape, LE data)."""
    chunks = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(arrays))]
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_tensors(path) -> "OrderedDict[str, np.ndarray]":
    buf = Path(path).read_bytes()
    if not buf.startswith(CKPT_MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    pos = len(CKPT_MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointError(f"{path}: truncated checkpoint")
        chunk = buf[pos : pos + n]
        pos += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version}, expected {CKPT_VERSION}")
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim)) if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).astype(DTYPE)
    return out


def init_weight(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """He-uniform init for ReLU stacks."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def numeric_grad(f: Callable[[], float], params: Iterable[Tensor], h: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences of ``f`` w.r.t. each tensor, in place perturbation."""
    out = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = f()
            flat[k] = orig - h
            fm = f()
            flat[k] = orig
            gflat[k] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out
