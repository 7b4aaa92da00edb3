"""Shared test fixtures: gradient-check case builders for every primitive."""

from __future__ import annotations

import numpy as np

from kgaudit import tensor as T


def _scalarize(out, rng):
    """Dot an op output against a fixed random functional to get a scalar."""
    probe = T.constant(rng.normal(size=out.shape))
    return T.tsum(T.multiply(out, probe))


def build_primitive_case(name, rng):
    """Return (fn, points) where fn(points) exercises one primitive.

    ``points`` are the differentiated inputs; every other tensor involved is
    a constant fixed by the closure, so repeated calls are deterministic.
    """
    if name == "matmul":
        a = T.tensor(rng.normal(size=(3, 4)))
        b = T.tensor(rng.normal(size=(4, 2)))
        return (lambda pts: _scalarize(T.matmul(pts[0], pts[1]),
                                       np.random.default_rng(7)), [a, b])
    if name == "matmul-batched":
        a = T.tensor(rng.normal(size=(2, 3, 4)))
        b = T.tensor(rng.normal(size=(4, 5)))
        return (lambda pts: _scalarize(T.matmul(pts[0], pts[1]),
                                       np.random.default_rng(7)), [a, b])
    if name == "matmul-transpose":
        a = T.tensor(rng.normal(size=(2, 3, 4)))
        b = T.tensor(rng.normal(size=(2, 5, 4)))
        return (lambda pts: _scalarize(
            T.matmul(pts[0], pts[1], transpose_b=True),
            np.random.default_rng(7)), [a, b])
    if name == "add":
        a, b = T.tensor(rng.normal(size=5)), T.tensor(rng.normal(size=5))
        return (lambda pts: _scalarize(T.add(pts[0], pts[1]),
                                       np.random.default_rng(7)), [a, b])
    if name == "multiply":
        a, b = T.tensor(rng.normal(size=5)), T.tensor(rng.normal(size=5))
        return (lambda pts: _scalarize(T.multiply(pts[0], pts[1]),
                                       np.random.default_rng(7)), [a, b])
    if name == "scale":
        a = T.tensor(rng.normal(size=7))
        return (lambda pts: _scalarize(T.scale(pts[0], 1.7),
                                       np.random.default_rng(7)), [a])
    if name == "concat":
        a = T.tensor(rng.normal(size=(2, 3)))
        b = T.tensor(rng.normal(size=(4, 3)))
        return (lambda pts: _scalarize(T.concat([pts[0], pts[1]], axis=0),
                                       np.random.default_rng(7)), [a, b])
    if name == "embedding-lookup":
        table = T.tensor(rng.normal(size=(6, 4)))
        idx = np.array([0, 2, 2, 5, 2])
        return (lambda pts: _scalarize(T.embedding_lookup(pts[0], idx),
                                       np.random.default_rng(7)), [table])
    if name == "row-softmax":
        x = T.tensor(rng.normal(size=(3, 5)))
        return (lambda pts: _scalarize(T.row_softmax(pts[0]),
                                       np.random.default_rng(7)), [x])
    if name == "layer-norm":
        x = T.tensor(rng.normal(size=(4, 6)))
        g = T.tensor(rng.normal(size=6) * 0.3 + 1.0)
        b = T.tensor(rng.normal(size=6) * 0.1)
        return (lambda pts: _scalarize(T.layer_norm(pts[0], pts[1], pts[2]),
                                       np.random.default_rng(7)), [x, g, b])
    if name == "gelu":
        x = T.tensor(rng.normal(size=11))
        return (lambda pts: _scalarize(T.gelu(pts[0]),
                                       np.random.default_rng(7)), [x])
    if name == "cosine-similarity":
        a = T.tensor(rng.normal(size=(3, 8)) + np.sign(rng.normal(size=(3, 8))) * 0.2)
        b = T.tensor(rng.normal(size=(3, 8)) + np.sign(rng.normal(size=(3, 8))) * 0.2)
        return (lambda pts: _scalarize(T.cosine_similarity(pts[0], pts[1]),
                                       np.random.default_rng(7)), [a, b])
    if name == "cross-entropy-with-logits":
        logits = T.tensor(rng.normal(size=(4, 7)))
        labels = rng.integers(0, 7, size=4)
        return (lambda pts: _scalarize(
            T.cross_entropy_with_logits(pts[0], labels),
            np.random.default_rng(7)), [logits])
    if name == "mean":
        x = T.tensor(rng.normal(size=9))
        return (lambda pts: T.mean(pts[0]), [x])
    if name == "sum":
        x = T.tensor(rng.normal(size=(3, 4)))
        return (lambda pts: _scalarize(T.tsum(pts[0], axis=1),
                                       np.random.default_rng(7)), [x])
    if name == "exp":
        x = T.tensor(rng.normal(size=5))
        return (lambda pts: _scalarize(T.texp(pts[0]),
                                       np.random.default_rng(7)), [x])
    if name == "log":
        x = T.tensor(rng.uniform(0.5, 3.0, size=5))
        return (lambda pts: _scalarize(T.tlog(pts[0]),
                                       np.random.default_rng(7)), [x])
    if name == "reshape":
        x = T.tensor(rng.normal(size=(2, 6)))
        return (lambda pts: _scalarize(T.reshape(pts[0], (3, 4)),
                                       np.random.default_rng(7)), [x])
    if name == "relu":
        vals = rng.normal(size=9)
        vals[np.abs(vals) < 0.05] = 0.5  # keep clear of the kink
        return (lambda pts: _scalarize(T.relu(pts[0]),
                                       np.random.default_rng(7)),
                [T.tensor(vals)])
    if name == "softplus":
        x = T.tensor(rng.normal(size=9))
        return (lambda pts: _scalarize(T.softplus(pts[0]),
                                       np.random.default_rng(7)), [x])
    if name == "l2-normalize-rows":
        x = T.tensor(rng.normal(size=(4, 5)) + np.sign(rng.normal(size=(4, 5))) * 0.2)
        return (lambda pts: _scalarize(T.l2_normalize_rows(pts[0]),
                                       np.random.default_rng(7)), [x])
    raise KeyError(name)


GRAD_CHECK_CASES = (
    "matmul", "matmul-batched", "matmul-transpose", "add", "multiply", "scale",
    "concat", "embedding-lookup", "row-softmax", "layer-norm", "gelu",
    "cosine-similarity", "cross-entropy-with-logits", "mean", "sum", "exp",
    "log", "reshape", "relu", "softplus", "l2-normalize-rows",
)
