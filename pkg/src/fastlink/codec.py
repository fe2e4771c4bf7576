"""Affine semantic codec with exact gradients.

The encoder maps an image s (length l) to c features of shape h x w,
A = F1(s) = W1 (s - mu) + b1 (optionally followed by tanh), where mu is a
fixed, untrained input centre. Feature entries are
paired into complex symbols, feature-major, so feature k occupies h*w/2
consecutive symbols; the block is scaled to average power P. The decoder is
s_hat = W2 A_hat + b2. Training follows the basic end-to-end loop: draw a
batch, draw fading and noise, encode, transmit, decode, take an SGD step on
the per-pixel MSE.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import binfmt
from .errors import ConfigurationError, NumericalError, ParseError
from .fading import ChannelConfig, complex_noise, derive_seed, sos_ensemble
from .mimo import mmse_scalar_gain

__all__ = [
    "ImageSample",
    "CodecModel",
    "SymbolBlock",
    "ChannelDraw",
    "TrainResult",
    "encode",
    "decode",
    "encode_batch",
    "decode_batch",
    "loss",
    "to_symbols",
    "from_symbols",
    "draw_channel",
    "forward",
    "loss_and_grad",
    "train",
    "save_model",
    "load_model",
]

MODEL_MAGIC = b"FLCODEC1"


@dataclass(frozen=True)
class ImageSample:
    """Flattened image; ``pixels`` is row-major (height, width, channels)."""

    pixels: np.ndarray
    width: int
    height: int
    channels: int = 1

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float).ravel()
        if px.size != self.width * self.height * self.channels:
            raise ConfigurationError(
                f"{px.size} pixels do not match {self.height}x{self.width}x{self.channels}"
            )
        if not np.all(np.isfinite(px)):
            raise ConfigurationError("image has non-finite pixels")
        object.__setattr__(self, "pixels", px)

    @property
    def size(self):
        return self.pixels.size

    def as_array(self):
        shape = (self.height, self.width) if self.channels == 1 else (self.height, self.width, self.channels)
        return self.pixels.reshape(shape)

    def clamped(self, max_val=1.0):
        return replace(self, pixels=np.clip(self.pixels, 0.0, max_val))


@dataclass(frozen=True)
class CodecModel:
    """Encoder (W1, b1) and decoder (W2, b2) weights plus shape metadata."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    c: int
    h: int
    w: int
    image_shape: tuple = (16, 16, 1)  # (height, width, channels)
    use_tanh: bool = False
    center: np.ndarray | None = None  # fixed input offset, not trained

    def __post_init__(self):
        n, l = self.c * self.h * self.w, int(np.prod(self.image_shape))
        if n % 2:
            raise ConfigurationError(f"c*h*w = {n} must be even to pair into complex symbols")
        expect = {"W1": (n, l), "b1": (n,), "W2": (l, n), "b2": (l,)}
        for name, shape in expect.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ConfigurationError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "image_shape", tuple(int(v) for v in self.image_shape))
        center = np.zeros(l) if self.center is None else np.asarray(self.center, dtype=float)
        if center.shape != (l,):
            raise ConfigurationError(f"center has shape {center.shape}, expected {(l,)}")
        object.__setattr__(self, "center", center)

    @property
    def l(self):
        return self.W1.shape[1]

    @property
    def n(self):
        """Real feature entries c*h*w."""
        return self.W1.shape[0]

    @property
    def k(self):
        """Complex channel symbols."""
        return self.n // 2

    @property
    def feature_shape(self):
        return (self.c, self.h, self.w)

    @classmethod
    def identity(cls, c, h, w, image_shape=None):
        n = c * h * w
        image_shape = image_shape or (n, 1, 1)
        return cls(np.eye(n), np.zeros(n), np.eye(n), np.zeros(n), c, h, w, image_shape)

    @classmethod
    def random(cls, c, h, w, image_shape=(16, 16, 1), seed=0, use_tanh=False, mean=None):
        """Gaussian encoder, tied decoder W2 = W1^T; ``mean`` sets the input centre and decoder bias."""
        rng = np.random.default_rng(seed)
        n, l = c * h * w, int(np.prod(image_shape))
        W1 = rng.standard_normal((n, l)) / np.sqrt(l)
        W2 = W1.T.copy()
        mu = np.zeros(l) if mean is None else np.asarray(mean, dtype=float)
        return cls(W1, np.zeros(n), W2, mu.copy(), c, h, w, image_shape, use_tanh, mu.copy())

    @classmethod
    def pca(cls, images, c, h, w, image_shape=(16, 16, 1)):
        """Encoder rows are the leading principal directions, strongest first."""
        S = _stack(images)
        n = c * h * w
        if n > S.shape[1]:
            raise ConfigurationError(f"c*h*w = {n} exceeds image size {S.shape[1]}")
        mu = S.mean(axis=0)
        evals, evecs = np.linalg.eigh(np.cov(S, rowvar=False, bias=True))
        basis = evecs[:, ::-1][:, :n]
        # sign convention: largest-magnitude entry positive
        signs = np.sign(basis[np.argmax(np.abs(basis), axis=0), np.arange(n)])
        basis = basis * signs
        return cls(basis.T.copy(), np.zeros(n), basis.copy(), mu, c, h, w, image_shape,
                   center=mu.copy())


@dataclass(frozen=True)
class SymbolBlock:
    symbols: np.ndarray
    power: float
    scale: float


def _pixels(s):
    return s.pixels if isinstance(s, ImageSample) else np.asarray(s, dtype=float).ravel()


def _stack(images):
    return np.stack([_pixels(s) for s in images]) if len(images) else np.empty((0, 0))


def encode_batch(model, S):
    """(B, l) images -> (B, c*h*w) feature rows."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[1] != model.l:
        raise ConfigurationError(f"image length {S.shape[1]} != model input {model.l}")
    A = (S - model.center) @ model.W1.T + model.b1
    return np.tanh(A) if model.use_tanh else A


def decode_batch(model, A):
    A = np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, model.n)
    return A @ model.W2.T + model.b2


def encode(model, s):
    """Feature tensor of shape (c, h, w)."""
    return encode_batch(model, _pixels(s)[None])[0].reshape(model.feature_shape)


def decode(model, A):
    """Reconstruction as an ImageSample (not clamped)."""
    A = np.asarray(A, dtype=float)
    if A.size != model.n:
        raise ConfigurationError(f"feature tensor has {A.size} entries, model expects {model.n}")
    hgt, wid, ch = model.image_shape
    return ImageSample(decode_batch(model, A.ravel())[0], wid, hgt, ch)


def loss(s, s_hat):
    """Per-pixel mean squared error."""
    s, s_hat = _pixels(s), _pixels(s_hat)
    if s.shape != s_hat.shape:
        raise ConfigurationError(f"length mismatch {s.shape} vs {s_hat.shape}")
    return float(np.mean((s_hat - s) ** 2))


def to_symbols(A, power=1.0):
    """Pair consecutive reals into complex symbols scaled to average power P.

    An all-zero tensor maps to zero symbols with scale 1.
    """
    a = np.asarray(A, dtype=float).ravel()
    if a.size % 2:
        raise ConfigurationError(f"odd element count {a.size} cannot be paired")
    z = a[0::2] + 1j * a[1::2]
    k = z.size
    energy = float(np.sum(a * a))
    scale = 1.0 if energy == 0 else float(np.sqrt(k * power / energy))
    return SymbolBlock(scale * z, float(power), scale)


def from_symbols(block, shape=None, scale=None):
    """Inverse of :func:`to_symbols`; ``scale`` defaults to the block's."""
    if isinstance(block, SymbolBlock):
        z, scale = block.symbols, block.scale if scale is None else scale
    else:
        z = np.asarray(block, dtype=complex)
        scale = 1.0 if scale is None else scale
    z = np.asarray(z).ravel() / scale
    a = np.empty(2 * z.size)
    a[0::2] = z.real
    a[1::2] = z.imag
    return a if shape is None else a.reshape(shape)


@dataclass(frozen=True)
class ChannelDraw:
    """Per-entry effect of fading, noise and MMSE equalization on a batch.

    After equalization each real feature entry becomes
    ``beta * a + noise * ||a|| / sqrt(k P)``.
    """

    beta: np.ndarray
    noise: np.ndarray
    power: float

    @classmethod
    def clean(cls, batch, n, power=1.0):
        return cls(np.ones((batch, n)), np.zeros((batch, n)), power)


def draw_channel(config, batch, c, hw, seed):
    """Fading and AWGN for ``batch`` images with ``c`` one-feature slots."""
    n, k = c * hw, c * hw // 2
    s2 = config.noise_variance
    if config.kind == "rayleigh":
        h = sos_ensemble(config.num_paths, config.doppler_fd, config.sample_period,
                         c, batch, derive_seed(seed, 0))
    else:
        h = np.ones((batch, c), dtype=complex)
    g = mmse_scalar_gain(h, config.power, s2)
    beta = np.repeat((g * h).real, hw, axis=1)
    rng = np.random.default_rng(derive_seed(seed, 1))
    nz = np.repeat(g, hw // 2, axis=1) * complex_noise((batch, k), s2, rng)
    noise = np.empty((batch, n))
    noise[:, 0::2] = nz.real
    noise[:, 1::2] = nz.imag
    return ChannelDraw(beta, noise, config.power)


def _received(A, draw, k):
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    return draw.beta * A + draw.noise * norms / np.sqrt(k * draw.power), norms


def forward(model, S, draw):
    """Reconstructions for a batch under a fixed channel draw."""
    A = encode_batch(model, S)
    A_hat, _ = _received(A, draw, model.k)
    return decode_batch(model, A_hat)


def loss_and_grad(model, S, draw):
    """Batch-mean loss and its gradient with respect to every weight.

    Returns ``(loss, grads)`` with grads keyed W1, b1, W2, b2.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    B, l, k = S.shape[0], model.l, model.k
    A = encode_batch(model, S)
    A_hat, norms = _received(A, draw, k)
    S_hat = decode_batch(model, A_hat)
    R = S_hat - S
    value = float(np.mean(R * R))

    dS_hat = (2.0 / (B * l)) * R
    gW2 = dS_hat.T @ A_hat
    gb2 = dS_hat.sum(axis=0)
    dA_hat = dS_hat @ model.W2
    safe = np.where(norms > 0, norms, 1.0)
    proj = np.sum(dA_hat * draw.noise, axis=1, keepdims=True)
    dA = draw.beta * dA_hat + np.where(norms > 0, proj * A / (safe * np.sqrt(k * draw.power)), 0.0)
    if model.use_tanh:
        dA = dA * (1.0 - A * A)
    gW1 = dA.T @ (S - model.center)
    gb1 = dA.sum(axis=0)
    return value, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


@dataclass
class TrainResult:
    model: CodecModel
    epoch_loss: list


def train(model, dataset, channel=None, epochs=50, batch=64, lr=1.0, seed=0, verbose=False):
    """Plain minibatch SGD over the end-to-end link.

    A fresh fading realization and noise draw is made for every batch.
    Raises :class:`NumericalError` if the loss stops being finite.
    """
    S = _stack(dataset)
    if S.shape[0] == 0:
        raise ConfigurationError("training set is empty")
    channel = channel or ChannelConfig(kind="identity")
    hw = model.h * model.w
    rng = np.random.default_rng(seed)
    params = {"W1": model.W1.copy(), "b1": model.b1.copy(), "W2": model.W2.copy(), "b2": model.b2.copy()}
    history = []
    step = 0
    for epoch in range(int(epochs)):
        order = rng.permutation(S.shape[0])
        total = 0.0
        for start in range(0, len(order), batch):
            idx = order[start:start + batch]
            draw = draw_channel(channel, len(idx), model.c, hw, derive_seed(seed, epoch, step))
            current = replace(model, **params)
            with np.errstate(over="ignore", invalid="ignore"):
                value, grads = loss_and_grad(current, S[idx], draw)
            if not np.isfinite(value):
                raise NumericalError(f"training diverged at epoch {epoch} (loss {value})")
            for name in params:
                params[name] -= lr * grads[name]
            total += value * len(idx)
            step += 1
        history.append(total / S.shape[0])
        if verbose:
            print(f"epoch {epoch:4d}  loss {history[-1]:.6g}")
    return TrainResult(replace(model, **params), history)


def save_model(model, path):
    hgt, wid, ch = model.image_shape
    dims = [model.c, model.h, model.w, hgt, wid, ch, int(model.use_tanh)]
    binfmt.write(path, MODEL_MAGIC, dims, [model.W1, model.b1, model.W2, model.b2, model.center])


def load_model(path):
    dims, flat = binfmt.read(path, MODEL_MAGIC)
    c, h, w, hgt, wid, ch, tanh = dims
    n, l = c * h * w, hgt * wid * ch
    sizes = [n * l, n, l * n, l, l]
    if flat.size != sum(sizes):
        raise ParseError(f"payload has {flat.size} values, expected {sum(sizes)}")
    parts = np.split(flat, np.cumsum(sizes)[:-1])
    return CodecModel(parts[0].reshape(n, l), parts[1], parts[2].reshape(l, n), parts[3],
                      c, h, w, (hgt, wid, ch), bool(tanh), parts[4])
