"""Dense float64 tensors with reverse-mode differentiation.

Every tensor op in the package goes through :func:`apply`, which records the
computation graph on the output tensor.  :func:`backward` walks that graph in
reverse topological order and accumulates gradients into every reachable
tensor with ``requires_grad``.  :func:`grad_check` validates analytic
gradients against central finite differences.

The kernel deliberately supports no broadcasting beyond scalar-times-tensor;
row-wise parameter application (layer norm gain/bias) happens inside fused
primitives.  Values are float64 throughout so gradient checks can hit 1e-4
relative error without noise.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, ShapeError

# Largest exponent argument that keeps exp() finite in float64.
_EXP_MAX = 700.0
_LN_VAR_FLOOR = 1e-12


class Tensor:
    """A dense float64 array plus optional gradient buffer and graph record."""

    __slots__ = ("values", "requires_grad", "grad", "op", "parents", "attrs")

    def __init__(self, values, requires_grad=False, op=None, parents=(), attrs=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = op
        self.parents = tuple(parents)
        self.attrs = attrs or {}

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def item(self):
        return float(self.values)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = self.op or ("param" if self.requires_grad else "const")
        return f"Tensor(shape={self.values.shape}, {tag})"


def tensor(values, requires_grad=False):
    return Tensor(values, requires_grad=requires_grad)


def constant(values):
    return Tensor(values, requires_grad=False)


def parameter(values):
    return Tensor(values, requires_grad=True)


# ---------------------------------------------------------------------------
# primitive registry
# ---------------------------------------------------------------------------

_OPS = {}


def _op(kind):
    def register(cls):
        _OPS[kind] = cls
        return cls

    return register


def _require(cond, msg):
    if not cond:
        raise ShapeError(msg)


def _swap(a):
    return np.swapaxes(a, -1, -2)


@_op("matmul")
class _MatMul:
    @staticmethod
    def forward(vals, attrs):
        a, b = vals
        ta, tb = attrs.get("transpose_a", False), attrs.get("transpose_b", False)
        _require(a.ndim in (2, 3) and b.ndim in (2, 3),
                 f"matmul expects rank-2/3 operands, got {a.shape} @ {b.shape}")
        aa = _swap(a) if ta else a
        bb = _swap(b) if tb else b
        if aa.ndim == 3 and bb.ndim == 3:
            _require(aa.shape[0] == bb.shape[0],
                     f"matmul batch mismatch: {a.shape} @ {b.shape}")
        _require(aa.shape[-1] == bb.shape[-2],
                 f"matmul inner-dim mismatch: {a.shape} @ {b.shape}"
                 f" (transpose_a={ta}, transpose_b={tb})")
        return np.matmul(aa, bb)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        a, b = vals
        ta, tb = attrs.get("transpose_a", False), attrs.get("transpose_b", False)
        aa = _swap(a) if ta else a
        bb = _swap(b) if tb else b
        da = db = None
        if needs[0]:
            daa = np.matmul(g, _swap(bb))
            if aa.ndim == 2 and daa.ndim == 3:
                daa = daa.sum(axis=0)
            da = _swap(daa) if ta else daa
        if needs[1]:
            dbb = np.matmul(_swap(aa), g)
            if bb.ndim == 2 and dbb.ndim == 3:
                dbb = dbb.sum(axis=0)
            db = _swap(dbb) if tb else dbb
        return [da, db]


@_op("add")
class _Add:
    @staticmethod
    def forward(vals, attrs):
        a, b = vals
        _require(a.shape == b.shape, f"add shape mismatch: {a.shape} vs {b.shape}")
        return a + b

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        return [g if needs[0] else None, g if needs[1] else None]


@_op("multiply")
class _Multiply:
    @staticmethod
    def forward(vals, attrs):
        a, b = vals
        _require(a.shape == b.shape, f"multiply shape mismatch: {a.shape} vs {b.shape}")
        return a * b

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        a, b = vals
        return [g * b if needs[0] else None, g * a if needs[1] else None]


@_op("scale")
class _Scale:
    @staticmethod
    def forward(vals, attrs):
        (a,) = vals
        return a * float(attrs["c"])

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        return [g * float(attrs["c"]) if needs[0] else None]


@_op("concat")
class _Concat:
    @staticmethod
    def forward(vals, attrs):
        axis = attrs.get("axis", 0)
        ndim = vals[0].ndim
        _require(ndim >= 1, "concat expects rank >= 1")
        ax = axis % ndim
        ref = list(vals[0].shape)
        for v in vals[1:]:
            other = list(v.shape)
            if v.ndim == ndim:
                other[ax] = ref[ax]
            _require(v.ndim == ndim and other == ref,
                     f"concat shape mismatch along axis {axis}: "
                     f"{[tuple(x.shape) for x in vals]}")
        return np.concatenate(vals, axis=axis)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        axis = attrs.get("axis", 0)
        sizes = [v.shape[axis] for v in vals]
        splits = np.cumsum(sizes)[:-1]
        pieces = np.split(g, splits, axis=axis)
        return [p if need else None for p, need in zip(pieces, needs)]


@_op("embedding-lookup")
class _EmbeddingLookup:
    @staticmethod
    def forward(vals, attrs):
        (table,) = vals
        idx = np.asarray(attrs["indices"], dtype=np.int64)
        _require(table.ndim == 2, f"embedding-lookup expects 2-D table, got {table.shape}")
        _require(idx.ndim == 1, f"embedding-lookup expects 1-D indices, got {idx.shape}")
        if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
            raise ShapeError(
                f"embedding-lookup index out of range for table {table.shape}")
        return table[idx]

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        if not needs[0]:
            return [None]
        (table,) = vals
        idx = np.asarray(attrs["indices"], dtype=np.int64)
        acc = np.zeros_like(table)
        if idx.size:
            order = np.argsort(idx, kind="stable")
            si = idx[order]
            sg = g[order]
            starts = np.flatnonzero(np.r_[True, si[1:] != si[:-1]])
            acc[si[starts]] = np.add.reduceat(sg, starts, axis=0)
        return [acc]


@_op("row-softmax")
class _RowSoftmax:
    @staticmethod
    def forward(vals, attrs):
        (x,) = vals
        _require(x.ndim >= 1, "row-softmax expects rank >= 1")
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        if not needs[0]:
            return [None]
        inner = (g * out).sum(axis=-1, keepdims=True)
        return [out * (g - inner)]


@_op("layer-norm")
class _LayerNorm:
    @staticmethod
    def forward(vals, attrs):
        x, gain, bias = vals
        d = x.shape[-1]
        _require(gain.shape == (d,) and bias.shape == (d,),
                 f"layer-norm gain/bias must be ({d},), got {gain.shape}/{bias.shape}")
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = np.maximum((xc * xc).mean(axis=-1, keepdims=True), _LN_VAR_FLOOR)
        xhat = xc / np.sqrt(var)
        return xhat * gain + bias

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        x, gain, bias = vals
        d = x.shape[-1]
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        raw_var = (xc * xc).mean(axis=-1, keepdims=True)
        var = np.maximum(raw_var, _LN_VAR_FLOOR)
        inv = 1.0 / np.sqrt(var)
        xhat = xc * inv
        dx = dgain = dbias = None
        if needs[0]:
            gy = g * gain
            active = (raw_var > _LN_VAR_FLOOR).astype(np.float64)
            term = active * xhat * (gy * xhat).mean(axis=-1, keepdims=True)
            dx = inv * (gy - gy.mean(axis=-1, keepdims=True) - term)
        if needs[1]:
            dgain = (g * xhat).reshape(-1, d).sum(axis=0)
        if needs[2]:
            dbias = g.reshape(-1, d).sum(axis=0)
        return [dx, dgain, dbias]


_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_K = 0.044715


@_op("gelu")
class _Gelu:
    @staticmethod
    def forward(vals, attrs):
        (x,) = vals
        t = np.tanh(_GELU_C * (x + _GELU_K * (x * x * x)))
        return 0.5 * x * (1.0 + t)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        if not needs[0]:
            return [None]
        (x,) = vals
        t = np.tanh(_GELU_C * (x + _GELU_K * (x * x * x)))
        du = _GELU_C * (1.0 + 3.0 * _GELU_K * (x * x))
        return [g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)]


@_op("cosine-similarity")
class _CosineSimilarity:
    @staticmethod
    def forward(vals, attrs):
        a, b = vals
        _require(a.shape == b.shape and a.ndim in (1, 2),
                 f"cosine-similarity expects matching rank-1/2 shapes, "
                 f"got {a.shape} vs {b.shape}")
        na = np.linalg.norm(a, axis=-1)
        nb = np.linalg.norm(b, axis=-1)
        dot = (a * b).sum(axis=-1)
        denom = na * nb
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(denom > 0.0, dot / np.where(denom > 0.0, denom, 1.0), 0.0)
        return s

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        a, b = vals
        na = np.linalg.norm(a, axis=-1, keepdims=True)
        nb = np.linalg.norm(b, axis=-1, keepdims=True)
        ok = (na * nb) > 0.0
        na_s = np.where(ok, na, 1.0)
        nb_s = np.where(ok, nb, 1.0)
        s = out[..., None] if a.ndim == 2 else out
        ge = g[..., None] if a.ndim == 2 else g
        da = db = None
        if needs[0]:
            da = np.where(ok, ge * (b / (na_s * nb_s) - s * a / (na_s * na_s)), 0.0)
        if needs[1]:
            db = np.where(ok, ge * (a / (na_s * nb_s) - s * b / (nb_s * nb_s)), 0.0)
        return [da, db]


@_op("cross-entropy-with-logits")
class _CrossEntropyWithLogits:
    @staticmethod
    def forward(vals, attrs):
        (logits,) = vals
        labels = np.asarray(attrs["labels"], dtype=np.int64)
        _require(logits.ndim == 2, f"cross-entropy expects (batch, classes), got {logits.shape}")
        _require(labels.shape == (logits.shape[0],),
                 f"cross-entropy labels shape {labels.shape} does not match batch {logits.shape[0]}")
        if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
            raise ShapeError(f"cross-entropy label out of range for {logits.shape[1]} classes")
        m = logits.max(axis=-1, keepdims=True)
        lse = np.log(np.exp(logits - m).sum(axis=-1)) + m[:, 0]
        picked = logits[np.arange(logits.shape[0]), labels]
        return lse - picked

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        if not needs[0]:
            return [None]
        (logits,) = vals
        labels = np.asarray(attrs["labels"], dtype=np.int64)
        z = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=-1, keepdims=True)
        p[np.arange(logits.shape[0]), labels] -= 1.0
        return [p * g[:, None]]


@_op("mean")
class _Mean:
    @staticmethod
    def forward(vals, attrs):
        (x,) = vals
        return np.asarray(x.mean())

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        if not needs[0]:
            return [None]
        (x,) = vals
        return [np.full_like(x, float(g) / x.size)]


@_op("sum")
class _Sum:
    @staticmethod
    def forward(vals, attrs):
        (x,) = vals
        axis = attrs.get("axis")
        return np.asarray(x.sum(axis=axis))

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        if not needs[0]:
            return [None]
        (x,) = vals
        axis = attrs.get("axis")
        if axis is None:
            return [np.full_like(x, float(g))]
        return [np.broadcast_to(np.expand_dims(g, axis), x.shape).copy()]


@_op("exp")
class _Exp:
    @staticmethod
    def forward(vals, attrs):
        (x,) = vals
        if x.size and x.max() > _EXP_MAX:
            raise NumericalError(f"exp overflow: max input {x.max():.3g} > {_EXP_MAX:g}")
        return np.exp(x)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        return [g * out if needs[0] else None]


@_op("log")
class _Log:
    @staticmethod
    def forward(vals, attrs):
        (x,) = vals
        if x.size and x.min() <= 0.0:
            raise NumericalError(f"log domain: min input {x.min():.3g} <= 0")
        return np.log(x)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        return [g / vals[0] if needs[0] else None]


# Internal kernel extensions used by the encoders and baselines.  They follow
# the same registry/gradient-check discipline as the public primitive set.

@_op("reshape")
class _Reshape:
    @staticmethod
    def forward(vals, attrs):
        (x,) = vals
        shape = tuple(attrs["shape"])
        _require(int(np.prod(shape)) == x.size,
                 f"reshape {x.shape} -> {shape} changes element count")
        return x.reshape(shape)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        return [g.reshape(vals[0].shape) if needs[0] else None]


@_op("relu")
class _Relu:
    @staticmethod
    def forward(vals, attrs):
        return np.maximum(vals[0], 0.0)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        return [g * (vals[0] > 0.0) if needs[0] else None]


@_op("softplus")
class _Softplus:
    @staticmethod
    def forward(vals, attrs):
        return np.logaddexp(0.0, vals[0])

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        if not needs[0]:
            return [None]
        x = vals[0]
        e = np.exp(-np.abs(x))
        sig = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return [g * sig]


@_op("l2-normalize-rows")
class _L2NormalizeRows:
    @staticmethod
    def forward(vals, attrs):
        (x,) = vals
        _require(x.ndim == 2, f"l2-normalize-rows expects rank 2, got {x.shape}")
        n = np.linalg.norm(x, axis=-1, keepdims=True)
        return np.where(n > 0.0, x / np.where(n > 0.0, n, 1.0), 0.0)

    @staticmethod
    def vjp(g, vals, out, attrs, needs):
        if not needs[0]:
            return [None]
        (x,) = vals
        n = np.linalg.norm(x, axis=-1, keepdims=True)
        ok = n > 0.0
        n_s = np.where(ok, n, 1.0)
        inner = (g * out).sum(axis=-1, keepdims=True)
        return [np.where(ok, (g - out * inner) / n_s, 0.0)]


PRIMITIVE_KINDS = tuple(sorted(_OPS))


def apply(kind, inputs, **attrs):
    """Run one primitive and record it on the output tensor.

    Raises ShapeError for unknown kinds or non-conforming shapes.
    """
    op = _OPS.get(kind)
    if op is None:
        raise ShapeError(f"unknown primitive kind: {kind!r}")
    inputs = tuple(inputs)
    out_values = op.forward([t.values for t in inputs], attrs)
    requires = any(t.requires_grad for t in inputs)
    return Tensor(out_values, requires_grad=requires, op=kind, parents=inputs,
                  attrs=attrs)


# Convenience wrappers keep call sites readable.

def matmul(a, b, transpose_a=False, transpose_b=False):
    return apply("matmul", (a, b), transpose_a=transpose_a, transpose_b=transpose_b)


def add(a, b):
    return apply("add", (a, b))


def multiply(a, b):
    return apply("multiply", (a, b))


def scale(a, c):
    return apply("scale", (a,), c=float(c))


def concat(tensors, axis=0):
    return apply("concat", tuple(tensors), axis=axis)


def embedding_lookup(table, indices):
    return apply("embedding-lookup", (table,),
                 indices=np.asarray(indices, dtype=np.int64))


def row_softmax(x):
    return apply("row-softmax", (x,))


def layer_norm(x, gain, bias):
    return apply("layer-norm", (x, gain, bias))


def gelu(x):
    return apply("gelu", (x,))


def cosine_similarity(a, b):
    return apply("cosine-similarity", (a, b))


def cross_entropy_with_logits(logits, labels):
    return apply("cross-entropy-with-logits", (logits,),
                 labels=np.asarray(labels, dtype=np.int64))


def mean(x):
    return apply("mean", (x,))


def tsum(x, axis=None):
    return apply("sum", (x,), axis=axis)


def texp(x):
    return apply("exp", (x,))


def tlog(x):
    return apply("log", (x,))


def reshape(x, shape):
    return apply("reshape", (x,), shape=tuple(shape))


def relu(x):
    return apply("relu", (x,))


def softplus(x):
    return apply("softplus", (x,))


def l2_normalize_rows(x):
    return apply("l2-normalize-rows", (x,))


# ---------------------------------------------------------------------------
# graph walking: record, replay, backward
# ---------------------------------------------------------------------------

def linearize(root):
    """Topologically ordered list of graph nodes ending at ``root``.

    Parents always precede children, so the list doubles as a replayable
    record of the forward pass.
    """
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def replay(root):
    """Re-execute the recorded forward pass; returns recomputed root values."""
    values = {}
    for node in linearize(root):
        if node.op is None:
            values[id(node)] = node.values
        else:
            op = _OPS[node.op]
            values[id(node)] = op.forward([values[id(p)] for p in node.parents],
                                          node.attrs)
    return values[id(root)]


def backward(loss):
    """Accumulate gradients of a scalar loss into every reachable tensor.

    Returns a map {tensor: gradient array} covering every ``requires_grad``
    tensor the loss depends on; tensors absent from the map have zero
    gradient.  Gradients also accumulate into each tensor's ``grad`` buffer.
    """
    if loss.values.shape != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.values.shape}")
    order = linearize(loss)
    grads = {id(loss): np.ones((), dtype=np.float64)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node.op is None or not node.requires_grad:
            continue
        op = _OPS[node.op]
        needs = [p.requires_grad for p in node.parents]
        parent_grads = op.vjp(g, [p.values for p in node.parents], node.values,
                              node.attrs, needs)
        for p, pg in zip(node.parents, parent_grads):
            if pg is None:
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
    result = {}
    for node in order:
        if node.op is None and node.requires_grad and id(node) in grads:
            g = np.asarray(grads[id(node)], dtype=np.float64)
            result[node] = g
            node.grad = g.copy() if node.grad is None else node.grad + g
    return result


def grad_check(fn, points, epsilon=1e-5, max_coords=None, seed=0):
    """Max relative error between analytic and central-difference gradients.

    ``fn`` maps a list of tensors to a scalar Tensor and must be
    deterministic; non-determinism under identical inputs is rejected.
    ``max_coords`` caps how many coordinates per input are perturbed
    (a seeded subsample), which keeps composed-model checks tractable.
    """
    if isinstance(points, Tensor):
        points = [points]
    for p in points:
        p.requires_grad = True
        p.zero_grad()
    out = fn(points)
    if out.values.shape != ():
        raise ShapeError("grad_check target must return a scalar")
    if fn(points).values.tobytes() != out.values.tobytes():
        raise NumericalError("grad_check target is not deterministic")
    grads = backward(out)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in points:
        analytic = np.asarray(grads.get(p, np.zeros_like(p.values)))
        flat = p.values.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            hi = float(fn(points).values)
            flat[c] = orig - epsilon
            lo = float(fn(points).values)
            flat[c] = orig
            numeric = (hi - lo) / (2.0 * epsilon)
            err = abs(analytic.reshape(-1)[c] - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst
