"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored; list values are comma separated;
unknown keys are rejected so typos surface early.
"""

import math
from dataclasses import dataclass, field, fields, replace

from ..errors import ConfigurationError
from ..importance import POOLING_MODES

__all__ = ["LinkConfig", "MODES", "SCHEMES", "SURROGATE_PASSES", "parse_config", "load_config", "dump_config"]

MODES = ("siso", "mimo_mmse", "mimo_svd")
SCHEMES = ("jscc", "fast_kc", "fast_pc", "fast_kc_ie", "fast_pc_ie")
SURROGATE_PASSES = ("mean_channel", "noiseless")


@dataclass(frozen=True)
class LinkConfig:
    # link
    power: float = 1.0
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    modes: tuple = ("siso",)
    schemes: tuple = SCHEMES
    nt: int = 2
    nr: int = 2
    d: int = 2
    # codec shape
    image_size: int = 16
    c: int = 16
    h: int = 4
    w: int = 4
    # fading
    sos_paths: int = 32
    doppler_fd: float = 200.0
    sample_period: float = 1e-3
    # prediction
    predictor_order: int = 8
    history_length: int = 512
    # evaluation
    trials: int = 200
    seed: int = 1
    psnr_cap_db: float = 100.0
    ssim_window: int = 8
    image_dir: str = ""
    # synthetic data
    dataset_rho: float = 0.9
    train_images: int = 512
    distill_images: int = 512
    # codec training
    train_snr_db: float = 13.0
    train_epochs: int = 0
    train_batch: int = 64
    learning_rate: float = 20.0
    codec_init: str = "pca"
    codec_path: str = ""
    # importance
    importance_pooling: str = "abs"
    surrogate_pass: str = "mean_channel"
    evaluator_ridge: float = 10.0
    evaluator_path: str = ""
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.validate()

    @property
    def l(self):
        return self.image_size * self.image_size

    def noise_variance(self, snr_db):
        """sigma^2 = P / 10^(SNR/10); an infinite SNR is noiseless."""
        if math.isinf(snr_db) and snr_db > 0:
            return 0.0
        return self.power / 10 ** (snr_db / 10)

    def blocks_per_slot(self, mode):
        return {"siso": 1, "mimo_mmse": self.nt, "mimo_svd": self.d}[mode]

    def validate(self):
        err = ConfigurationError
        if not self.power > 0:
            raise err(f"power must be > 0, got {self.power}")
        if not self.snr_db:
            raise err("snr_db must list at least one value")
        for m in self.modes:
            if m not in MODES:
                raise err(f"unknown mode {m!r}; choose from {MODES}")
        for s in self.schemes:
            if s not in SCHEMES:
                raise err(f"unknown scheme {s!r}; choose from {SCHEMES}")
        if min(self.nt, self.nr, self.d) < 1:
            raise err("nt, nr and d must be >= 1")
        if self.d > min(self.nr, self.nt):
            raise err(f"d = {self.d} exceeds min(nr, nt) = {min(self.nr, self.nt)}")
        n = self.c * self.h * self.w
        if n % 2 or (self.h * self.w) % 2:
            raise err(f"h*w = {self.h * self.w} must be even so features pair into symbols")
        if n > self.l:
            raise err(f"c*h*w = {n} exceeds the image size l = {self.l}")
        for m in self.modes:
            b = self.blocks_per_slot(m)
            if self.c % b:
                raise err(f"c = {self.c} not divisible by {b} blocks per slot in mode {m}")
        if self.history_length < 4 * self.predictor_order:
            raise err("history_length must be >= 4 * predictor_order")
        if self.trials < 1:
            raise err("trials must be >= 1")
        if not 0 <= self.dataset_rho < 1:
            raise err("dataset_rho must be in [0, 1)")
        if self.codec_init not in ("pca", "random"):
            raise err(f"codec_init must be 'pca' or 'random', got {self.codec_init!r}")
        if self.importance_pooling not in POOLING_MODES:
            raise err(f"importance_pooling must be one of {POOLING_MODES}")
        if self.surrogate_pass not in SURROGATE_PASSES:
            raise err(f"surrogate_pass must be one of {SURROGATE_PASSES}")
        if self.ssim_window > self.image_size:
            raise err("ssim_window larger than the image")


_LISTS = {"snr_db": float, "modes": str, "schemes": str}
_ALIASES = {"mode": "modes", "scheme": "schemes", "P": "power"}


def _convert(name, raw, typ):
    if name in _LISTS:
        conv = _LISTS[name]
        items = [v.strip() for v in raw.split(",") if v.strip()]
        try:
            return tuple(conv(v) for v in items)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {name}: {raw!r}") from exc
    try:
        if typ is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {name}: {raw!r}") from exc


def parse_config(text, base=None, **overrides):
    """Parse config text into a LinkConfig (defaults fill missing keys)."""
    types = {f.name: f.type for f in fields(LinkConfig) if f.name != "extra"}
    types = {k: {"float": float, "int": int, "str": str, "tuple": tuple}.get(v, v) if isinstance(v, str) else v
             for k, v in types.items()}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in types:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw, types[key])
    values.update(overrides)
    return replace(base, **values) if base is not None else LinkConfig(**values)


def load_config(path, **overrides):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


def dump_config(cfg):
    """Render a LinkConfig back into the config format."""
    lines = []
    for f in fields(cfg):
        if f.name == "extra":
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
