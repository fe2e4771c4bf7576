"""CSI prediction.

Two predictors share one interface: an oracle that replays the true future
(the known-CSI case) and a linear MMSE one-step predictor fitted by ridge
least squares on the sampled history and iterated for multi-step horizons.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fading import CsiSequence

__all__ = [
    "PredictorState",
    "RIDGE_SCALE",
    "fit",
    "oracle",
    "predict",
    "predict_mimo",
    "fit_mimo",
    "oracle_mimo",
    "nmse",
    "hold_last",
]

RIDGE_SCALE = 1e-12


@dataclass(frozen=True)
class PredictorState:
    kind: str  # "oracle" or "linear"
    order: int = 0
    coeffs: np.ndarray | None = None
    window: np.ndarray | None = None  # last `order` samples, oldest first
    future: np.ndarray | None = None
    fitted: bool = False
    slot_period: float = 1.0


def _regression(history, p):
    n = len(history)
    # row for target h[i] holds [h[i-1], h[i-2], ..., h[i-p]]
    X = np.stack([history[p - 1 - j: n - 1 - j] for j in range(p)], axis=1)
    return X, history[p:]


def fit(history, order, ridge_scale=RIDGE_SCALE, slot_period=1.0):
    """Fit a linear one-step predictor h_n ~ sum_i w_i h_{n-i} of the given order."""
    history = np.asarray(history, dtype=complex).ravel()
    p = int(order)
    if p < 1:
        raise ConfigurationError(f"predictor order must be >= 1, got {order}")
    if len(history) < 4 * p:
        raise ConfigurationError(
            f"history of length {len(history)} too short for order {p} (need >= {4 * p})"
        )
    X, y = _regression(history, p)
    gram_trace = np.sum(np.abs(X) ** 2)
    eps = ridge_scale * gram_trace / p
    if eps > 0:
        # ridge solution via the augmented least-squares system
        A = np.vstack([X, np.sqrt(eps) * np.eye(p)])
        rhs = np.concatenate([y, np.zeros(p)])
    else:
        A, rhs = X, y
    w, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if not np.all(np.isfinite(w)):
        raise ConfigurationError("predictor fit produced non-finite coefficients")
    return PredictorState("linear", p, w, history[-p:].copy(), None, True, slot_period)


def oracle(future, slot_period=1.0):
    """Known-CSI predictor: replays ``future`` exactly."""
    future = np.asarray(future, dtype=complex)
    return PredictorState("oracle", future=future, fitted=True, slot_period=slot_period)


def one_step_residuals(state, history):
    """In-sample one-step prediction errors of a fitted linear state."""
    history = np.asarray(history, dtype=complex).ravel()
    X, y = _regression(history, state.order)
    return y - X @ state.coeffs, y


def predict(state, steps):
    if not state.fitted:
        raise ConfigurationError("predictor has not been fitted")
    steps = int(steps)
    if state.kind == "oracle":
        if steps > len(state.future):
            raise ConfigurationError(f"oracle holds {len(state.future)} samples, asked for {steps}")
        return CsiSequence(state.future[:steps], state.slot_period)
    window = list(state.window)
    out = np.empty(steps, dtype=complex)
    w = state.coeffs
    for i in range(steps):
        # w[0] multiplies the most recent sample
        nxt = np.dot(w, window[::-1][: state.order])
        out[i] = nxt
        window.append(nxt)
    return CsiSequence(out, state.slot_period)


def fit_mimo(history, order, **kw):
    """Entrywise fit for a (t, nr, nt) history; returns an nr x nt object grid."""
    history = np.asarray(history, dtype=complex)
    _, nr, nt = history.shape
    grid = np.empty((nr, nt), dtype=object)
    for r in range(nr):
        for c in range(nt):
            grid[r, c] = fit(history[:, r, c], order, **kw)
    return grid


def oracle_mimo(future, slot_period=1.0):
    future = np.asarray(future, dtype=complex)
    _, nr, nt = future.shape
    grid = np.empty((nr, nt), dtype=object)
    for r in range(nr):
        for c in range(nt):
            grid[r, c] = oracle(future[:, r, c], slot_period)
    return grid


def predict_mimo(states, steps):
    """Independent per-link prediction assembled into (steps, nr, nt) matrices."""
    states = np.asarray(states, dtype=object)
    if states.ndim != 2:
        raise ConfigurationError(f"state grid must be 2-D, got shape {states.shape}")
    nr, nt = states.shape
    out = np.empty((int(steps), nr, nt), dtype=complex)
    period = 1.0
    for r in range(nr):
        for c in range(nt):
            seq = predict(states[r, c], steps)
            out[:, r, c] = seq.gains
            period = seq.slot_period
    return CsiSequence(out, period)


def nmse(predicted, actual):
    """sum |pred - true|^2 / sum |true|^2."""
    predicted = np.asarray(getattr(predicted, "gains", predicted))
    actual = np.asarray(getattr(actual, "gains", actual))
    den = np.sum(np.abs(actual) ** 2)
    num = np.sum(np.abs(predicted - actual) ** 2)
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(num / den)


def hold_last(history, steps):
    """Baseline: repeat the last observed sample."""
    history = np.asarray(history)
    return np.repeat(history[-1:], int(steps), axis=0)
