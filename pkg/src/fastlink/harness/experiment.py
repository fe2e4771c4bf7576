"""End-to-end link simulation: codec + importance + allocation + channel.

Every trial draws one fading realization (history followed by the slots of
the transmission) and one noise realization per SNR; all schemes in a trial
share them, so scheme differences are paired.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import predictor
from ..allocator import inverse_allocate, match, side_info_bits, sinr_quality, svd_quality
from ..codec import (
    CodecModel,
    decode_batch,
    encode_batch,
    from_symbols,
    load_model,
    to_symbols,
    train,
)
from ..errors import ConfigurationError
from ..fading import ChannelConfig, SosParams, derive_seed, mimo_generate, sos_generate
from ..importance import build_distill_dataset, distill_train, evaluate, grad_importance, load_evaluator
from ..metrics import report
from ..mimo import mean_rayleigh_gain, mmse_equalizer, mmse_scalar_gain, svd_decompose
from .datasets import load_image, synth_dataset

__all__ = [
    "ResultRow",
    "Artifacts",
    "training_channel",
    "prepare_codec",
    "prepare_evaluator",
    "prepare",
    "eval_images",
    "run_experiment",
    "thread_count",
    "local_importance",
    "distill_pairs",
]

# seed-derivation tags
_TRAIN, _DISTILL, _TEST, _CSI, _NOISE = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    mode: str
    snr_db: float
    trial: int
    psnr: float
    ssim: float
    mse: float
    side_info_bits: int
    predictor_nmse: float


@dataclass(frozen=True)
class Artifacts:
    model: CodecModel
    evaluator: object = None


def training_channel(cfg, snr_db=None):
    return ChannelConfig("rayleigh", cfg.train_snr_db if snr_db is None else snr_db, cfg.power,
                         cfg.sos_paths, cfg.doppler_fd, cfg.sample_period)


def prepare_codec(cfg, verbose=False):
    """Load ``codec_path`` if set, else fit a codec on synthetic training images."""
    if cfg.codec_path:
        model = load_model(cfg.codec_path)
        _check_model(cfg, model)
        return model
    shape = (cfg.image_size, cfg.image_size, 1)
    images = synth_dataset(cfg.train_images, cfg.image_size, cfg.dataset_rho, derive_seed(cfg.seed, _TRAIN))
    if cfg.codec_init == "pca":
        model = CodecModel.pca(images, cfg.c, cfg.h, cfg.w, shape)
    else:
        mean = np.mean([s.pixels for s in images], axis=0)
        model = CodecModel.random(cfg.c, cfg.h, cfg.w, shape, derive_seed(cfg.seed, _TRAIN, 0), mean=mean)
    if cfg.train_epochs > 0:
        model = train(model, images, training_channel(cfg), cfg.train_epochs, cfg.train_batch,
                      cfg.learning_rate, derive_seed(cfg.seed, _TRAIN, 1), verbose).model
    return model


def _check_model(cfg, model):
    want = (cfg.c, cfg.h, cfg.w, cfg.l)
    if (model.c, model.h, model.w, model.l) != want:
        raise ConfigurationError(
            f"codec shape (c, h, w, l) = {(model.c, model.h, model.w, model.l)} does not match config {want}"
        )


def distill_pairs(cfg, model):
    images = synth_dataset(cfg.distill_images, cfg.image_size, cfg.dataset_rho, derive_seed(cfg.seed, _DISTILL))
    return build_distill_dataset(model, images, training_channel(cfg), derive_seed(cfg.seed, _DISTILL, 1),
                                 cfg.importance_pooling)


def prepare_evaluator(cfg, model):
    if cfg.evaluator_path:
        ev = load_evaluator(cfg.evaluator_path)
        if ev.feature_shape != model.feature_shape:
            raise ConfigurationError(f"evaluator expects features {ev.feature_shape}, codec has {model.feature_shape}")
        return ev
    return distill_train(distill_pairs(cfg, model), cfg.evaluator_ridge)


def prepare(cfg, verbose=False):
    model = prepare_codec(cfg, verbose)
    needs_ie = any(s.endswith("_ie") for s in cfg.schemes)
    return Artifacts(model, prepare_evaluator(cfg, model) if needs_ie else None)


def eval_images(cfg):
    """``trials`` images: files from ``image_dir`` (cycled) or fresh synthetic ones."""
    if not cfg.image_dir:
        return synth_dataset(cfg.trials, cfg.image_size, cfg.dataset_rho, derive_seed(cfg.seed, _TEST))
    paths = sorted(p for p in Path(cfg.image_dir).iterdir() if p.suffix.lower() in (".pgm", ".ppm"))
    if not paths:
        raise ConfigurationError(f"no .pgm/.ppm files in {cfg.image_dir}")
    images = [load_image(p) for p in paths]
    for p, im in zip(paths, images):
        if im.size != cfg.l:
            raise ConfigurationError(f"{p.name} has {im.size} samples, codec expects {cfg.l}")
    return [images[i % len(images)] for i in range(cfg.trials)]


def thread_count():
    raw = os.environ.get("FASTLINK_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"FASTLINK_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


# --- physical layer -------------------------------------------------------

def _draw_csi(cfg, mode, slots, seed):
    """Fading history plus the ``slots`` transmission slots."""
    total = cfg.history_length + slots
    template = SosParams.draw(cfg.sos_paths, cfg.doppler_fd, cfg.sample_period, seed)
    if mode == "siso":
        return sos_generate(template, total).gains
    return mimo_generate(template, total, cfg.nr, cfg.nt, seed).gains


def _predict(cfg, history, slots):
    if history.ndim == 1:
        return predictor.predict(predictor.fit(history, cfg.predictor_order), slots).gains
    return predictor.predict_mimo(predictor.fit_mimo(history, cfg.predictor_order), slots).gains


def _noise(cfg, mode, slots, sym, seed):
    rng = np.random.default_rng(seed)
    shape = (slots, sym) if mode == "siso" else (slots, cfg.nr, sym)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _quality(cfg, mode, csi, noise_variance):
    """Slot-major flattened block qualities for the allocation."""
    if mode == "siso":
        return np.abs(csi)
    if mode == "mimo_mmse":
        return sinr_quality(csi, cfg.power / cfg.nt, noise_variance).flat
    return svd_quality(csi, cfg.d).flat


def _transmit(cfg, mode, A_t, H, unit_noise, noise_variance):
    """Send features (transmit order, shape (c, hw)) over the true channel.

    Returns the equalized features in transmit order.
    """
    P, s2 = cfg.power, noise_variance
    c, hw = A_t.shape
    block = to_symbols(A_t, P)
    z = block.symbols.reshape(c, hw // 2)
    n = np.sqrt(s2) * unit_noise
    if mode == "siso":
        g = mmse_scalar_gain(H, P, s2)
        x_hat = g[:, None] * (H[:, None] * z + n)
    else:
        per = cfg.nt if mode == "mimo_mmse" else cfg.d
        x_hat = np.empty_like(z)
        for s in range(c // per):
            X = z[s * per:(s + 1) * per] / np.sqrt(per)
            if mode == "mimo_mmse":
                G = mmse_equalizer(H[s], P / per, s2).G
                est = G @ (H[s] @ X + n[s])
            else:
                svd = svd_decompose(H[s])
                lam = svd.singular_values[:per]
                R = (svd.U.conj().T @ (H[s] @ (svd.precoder(per) @ X) + n[s]))[:per]
                est = (lam / (lam ** 2 + s2 / (P / per)))[:, None] * R
            x_hat[s * per:(s + 1) * per] = np.sqrt(per) * est
    return from_symbols(x_hat.ravel(), scale=block.scale).reshape(c, hw)


# --- trials ---------------------------------------------------------------

def local_importance(cfg, model, A, S, snr_db):
    """Transmitter-side surrogate labels from a local encode-decode pass.

    ``noiseless`` decodes A unchanged; ``mean_channel`` first scales A by the
    mean equalized Rayleigh gain at ``snr_db`` (no noise samples drawn).
    """
    gain = 1.0
    if cfg.surrogate_pass == "mean_channel":
        gain = mean_rayleigh_gain(cfg.power, cfg.noise_variance(snr_db))
    local = decode_batch(model, gain * A)
    return [grad_importance(model, a, s, r, cfg.importance_pooling).scores for a, s, r in zip(A, S, local)]


class _Context:
    def __init__(self, cfg, artifacts, images):
        self.cfg = cfg
        self.model = m = artifacts.model
        S = np.stack([s.pixels for s in images])
        self.images = images
        self.A = encode_batch(m, S)
        schemes = set(cfg.schemes)
        self.omega = {}
        if schemes & {"fast_kc", "fast_pc"}:
            if cfg.surrogate_pass == "noiseless":
                shared = local_importance(cfg, m, self.A, S, float("inf"))
                self.omega["local"] = [shared] * len(cfg.snr_db)
            else:
                self.omega["local"] = [local_importance(cfg, m, self.A, S, snr) for snr in cfg.snr_db]
        if schemes & {"fast_kc_ie", "fast_pc_ie"}:
            if artifacts.evaluator is None:
                raise ConfigurationError("IE schemes need a fitted importance evaluator")
            ie = [evaluate(artifacts.evaluator, a.reshape(m.feature_shape)).scores for a in self.A]
            self.omega["ie"] = [ie] * len(cfg.snr_db)


def _run_trial(ctx, mode_idx, trial):
    cfg, m = ctx.cfg, ctx.model
    mode = cfg.modes[mode_idx]
    per = cfg.blocks_per_slot(mode)
    slots = cfg.c // per
    hw = m.h * m.w
    csi = _draw_csi(cfg, mode, slots, derive_seed(cfg.seed, _CSI, mode_idx, trial))
    history, future = csi[: cfg.history_length], csi[cfg.history_length:]
    wants_pred = any(s in ("fast_pc", "fast_pc_ie") for s in cfg.schemes)
    predicted = _predict(cfg, history, slots) if wants_pred else None
    pred_nmse = predictor.nmse(predicted, future) if wants_pred else float("nan")
    image = ctx.images[trial]
    A = ctx.A[trial].reshape(cfg.c, hw)
    bits = side_info_bits(cfg.c)
    out = []
    for snr_idx, snr in enumerate(cfg.snr_db):
        s2 = cfg.noise_variance(snr)
        unit = _noise(cfg, mode, slots, per * hw // 2 if mode == "siso" else hw // 2,
                      derive_seed(cfg.seed, _NOISE, mode_idx, snr_idx, trial))
        if mode == "siso":
            unit = unit.reshape(cfg.c, hw // 2)
        quality = {}
        for scheme in cfg.schemes:
            if scheme == "jscc":
                eta, nm, sib = np.arange(cfg.c), float("nan"), 0
            else:
                known = scheme.startswith("fast_kc")
                src = "ie" if scheme.endswith("_ie") else "local"
                key = "kc" if known else "pc"
                if key not in quality:
                    quality[key] = _quality(cfg, mode, future if known else predicted, s2)
                _, eta = match(A, ctx.omega[src][snr_idx][trial], quality[key])
                nm, sib = (0.0 if known else pred_nmse), bits
            X_hat = _transmit(cfg, mode, A[eta], future, unit, s2)
            A_hat = inverse_allocate(X_hat, eta)
            s_hat = decode_batch(m, A_hat.ravel())[0]
            q = report(image, s_hat, 1.0, cfg.ssim_window, cfg.psnr_cap_db)
            out.append((scheme, snr_idx, ResultRow(scheme, mode, float(snr), trial, q.psnr, q.ssim, q.mse, sib, nm)))
    return mode_idx, out


def run_experiment(cfg, artifacts=None, images=None, threads=None, verbose=False):
    """All rows for every (mode, scheme, snr, trial), in that sort order."""
    cfg.validate()
    artifacts = artifacts or prepare(cfg, verbose)
    _check_model(cfg, artifacts.model)
    images = eval_images(cfg) if images is None else list(images)
    if len(images) < cfg.trials:
        raise ConfigurationError(f"need {cfg.trials} test images, got {len(images)}")
    ctx = _Context(cfg, artifacts, images[: cfg.trials])
    jobs = [(mi, t) for mi in range(len(cfg.modes)) for t in range(cfg.trials)]
    threads = thread_count() if threads is None else max(1, int(threads))
    if threads == 1:
        results = [_run_trial(ctx, mi, t) for mi, t in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _run_trial(ctx, *job), jobs))
    order = {s: i for i, s in enumerate(cfg.schemes)}
    keyed = [((mi, order[scheme], si, row.trial), row) for mi, rows in results for scheme, si, row in rows]
    keyed.sort(key=lambda kv: kv[0])
    return [row for _, row in keyed]
