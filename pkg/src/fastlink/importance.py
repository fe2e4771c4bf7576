"""Gradient-based feature importance and its distilled transmitter-side evaluator.

Importance of feature k is the global average of dL/dA_k over its h x w
entries, min-max normalized across features. Because the loss is only known
at the receiver, a ridge regressor from the feature tensor to the importance
vector is distilled from (A, omega) pairs and used at the transmitter.
"""

from dataclasses import dataclass

import numpy as np

from . import binfmt
from .codec import _pixels, _received, decode_batch, draw_channel, encode_batch
from .errors import ConfigurationError, ParseError
from .fading import derive_seed

__all__ = [
    "ImportanceVector",
    "EvaluatorModel",
    "POOLING_MODES",
    "normalize",
    "feature_gradient",
    "grad_importance",
    "build_distill_dataset",
    "distill_train",
    "evaluate",
    "save_evaluator",
    "load_evaluator",
    "save_pairs",
    "load_pairs",
]

POOLING_MODES = ("signed", "abs", "relu")
EVALUATOR_MAGIC = b"FLEVAL01"
PAIRS_MAGIC = b"FLPAIRS1"
MIN_PAIRS = 32


@dataclass(frozen=True)
class ImportanceVector:
    """Min-max normalized scores; ``tied`` marks the all-equal case (all zeros)."""

    scores: np.ndarray
    tied: bool = False

    def __len__(self):
        return len(self.scores)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.scores, dtype=dtype)


def normalize(raw):
    raw = np.asarray(raw, dtype=float).ravel()
    if not np.all(np.isfinite(raw)):
        raise ConfigurationError("importance scores must be finite")
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return ImportanceVector(np.zeros_like(raw), tied=True)
    return ImportanceVector((raw - lo) / (hi - lo))


def feature_gradient(model, s, s_hat):
    """Omega = dL/dA for L = (1/l)||s_hat - s||^2, through the affine decoder.

    Returned with shape (c, h, w).
    """
    s, s_hat = _pixels(s), _pixels(s_hat)
    if s.shape != (model.l,) or s_hat.shape != (model.l,):
        raise ConfigurationError(f"image length must be {model.l}")
    g = (2.0 / model.l) * (model.W2.T @ (s_hat - s))
    return g.reshape(model.feature_shape)


def _pool(grad, pooling):
    if pooling == "signed":
        return grad.mean(axis=(-2, -1))
    if pooling == "abs":
        return np.abs(grad).mean(axis=(-2, -1))
    if pooling == "relu":
        return np.maximum(grad, 0).mean(axis=(-2, -1))
    raise ConfigurationError(f"unknown pooling {pooling!r}; choose from {POOLING_MODES}")


def grad_importance(model, A, s, s_hat, pooling="signed"):
    """Importance of each feature of A given the pass (s, s_hat = decode(A)).

    ``pooling`` selects how each gradient matrix is averaged: the plain
    signed mean (default), the mean absolute value, or the mean of the
    positive part.
    """
    A = np.asarray(A, dtype=float)
    if A.size != model.n:
        raise ConfigurationError(f"feature tensor has {A.size} entries, expected {model.n}")
    return normalize(_pool(feature_gradient(model, s, s_hat), pooling))


def build_distill_dataset(model, dataset, channel, seed=0, pooling="signed", seeds=None):
    """(A, omega) pairs: encode, pass through a fresh channel draw, decode, label.

    ``seeds`` optionally fixes the channel seed of each image; otherwise
    it is derived from ``seed`` and the image index.
    """
    pairs = []
    hw = model.h * model.w
    for i, s in enumerate(dataset):
        px = _pixels(s)
        img_seed = derive_seed(seed, i) if seeds is None else seeds[i]
        draw = draw_channel(channel, 1, model.c, hw, img_seed)
        A = encode_batch(model, px[None])
        A_hat, _ = _received(A, draw, model.k)
        s_hat = decode_batch(model, A_hat)[0]
        omega = grad_importance(model, A_hat, px, s_hat, pooling)
        pairs.append((A[0].reshape(model.feature_shape), omega))
    return pairs


@dataclass(frozen=True)
class EvaluatorModel:
    """Linear map flattened A -> c scores, ``scores = coef @ a + intercept``."""

    coef: np.ndarray
    intercept: np.ndarray
    feature_shape: tuple
    fitted: bool = True
    sample_count: int = 0
    source_id: str = ""
    ridge: float = 0.0


def _pair_arrays(pairs):
    X = np.stack([np.asarray(a, dtype=float).ravel() for a, _ in pairs])
    Y = np.stack([np.asarray(w, dtype=float).ravel() for _, w in pairs])
    return X, Y


def distill_train(pairs, ridge=1e-3, source_id=""):
    """Closed-form ridge regression (unpenalized intercept).

    The penalty is ``ridge`` times the mean diagonal of the centred Gram
    matrix, so it is scale free.
    """
    if len(pairs) < MIN_PAIRS:
        raise ConfigurationError(f"need at least {MIN_PAIRS} pairs, got {len(pairs)}")
    shape = tuple(np.asarray(pairs[0][0]).shape)
    X, Y = _pair_arrays(pairs)
    xm, ym = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - xm, Y - ym
    p = X.shape[1]
    gram = Xc.T @ Xc
    lam = ridge * np.trace(gram) / p
    if lam > 0:
        coef = np.linalg.solve(gram + lam * np.eye(p), Xc.T @ Yc).T
    else:
        coef = np.linalg.lstsq(Xc, Yc, rcond=None)[0].T
    intercept = ym - coef @ xm
    return EvaluatorModel(coef, intercept, shape, True, len(pairs), source_id, float(ridge))


def raw_predict(evaluator, A):
    """Unclipped regression output for one tensor or a batch of rows."""
    A = np.asarray(A, dtype=float)
    flat = A.reshape(-1, evaluator.coef.shape[1])
    out = flat @ evaluator.coef.T + evaluator.intercept
    return out[0] if A.size == evaluator.coef.shape[1] else out


def evaluate(evaluator, A):
    """Transmitter-side importance, clipped to [0, 1]."""
    if not evaluator.fitted:
        raise ConfigurationError("importance evaluator has not been fitted")
    A = np.asarray(A, dtype=float)
    if A.size != evaluator.coef.shape[1]:
        raise ConfigurationError(f"feature tensor has {A.size} entries, expected {evaluator.coef.shape[1]}")
    scores = np.clip(raw_predict(evaluator, A), 0.0, 1.0)
    return ImportanceVector(scores, tied=bool(np.all(scores == scores[0])))


def save_evaluator(evaluator, path):
    c, n = evaluator.coef.shape
    dims = [c, n, *evaluator.feature_shape, evaluator.sample_count]
    binfmt.write(path, EVALUATOR_MAGIC, dims, [evaluator.coef, evaluator.intercept])


def load_evaluator(path):
    dims, flat = binfmt.read(path, EVALUATOR_MAGIC)
    c, n, fc, fh, fw, count = dims
    if flat.size != c * n + c:
        raise ParseError(f"payload has {flat.size} values, expected {c * n + c}")
    return EvaluatorModel(flat[: c * n].reshape(c, n), flat[c * n:], (fc, fh, fw), True, count)


def save_pairs(pairs, path):
    """Distillation records: dims (count, c, h, w), then each A followed by omega."""
    c, h, w = np.asarray(pairs[0][0]).shape
    rows = [np.concatenate([np.ravel(a), np.ravel(om.scores if hasattr(om, "scores") else om)])
            for a, om in pairs]
    binfmt.write(path, PAIRS_MAGIC, [len(pairs), c, h, w], rows)


def load_pairs(path):
    dims, flat = binfmt.read(path, PAIRS_MAGIC)
    count, c, h, w = dims
    rec = c * h * w + c
    if flat.size != count * rec:
        raise ParseError(f"payload has {flat.size} values, expected {count * rec}")
    flat = flat.reshape(count, rec)
    return [(row[: c * h * w].reshape(c, h, w), ImportanceVector(row[c * h * w:])) for row in flat]
