"""Cascaded analytical-graph-filter (AGF) denoising, noise model, and metrics.

One AGF block runs two filtering stages on a patch. The first stage filters
on the diagonal-edge bipartite subgraph. The second filters its output on
the horizontal/vertical subgraph. Each stage is pre-filter, graph low-pass,
ReLU. Blocks are cascaded with one shared configuration.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import ndimage

from agf import io
from agf.bipartite import split_hv_diag
from agf.errors import ConfigError, InputError
from agf.graphbio import DEFAULT_DEGREES, EXACT_MODE_MAX_NODES, design_filterbank, lowpass_filter
from agf.pixelgraph import (
    PROVIDERS,
    Patch,
    build_8connected_graph,
    compute_features,
    partition_into_patches,
    reassemble_patches,
)

PEAK = 255.0
PREFILTERS = ("identity", "gaussian3x3", "external")
MODES = ("auto", "exact", "chebyshev")

_BINOMIAL_3X3 = np.outer([1.0, 2.0, 1.0], [1.0, 2.0, 1.0]) / 16.0


@dataclass(frozen=True)
class AgfConfig:
    """Knobs for :func:`denoise`.

    ``mode="auto"`` uses the eigendecomposition for patches of at most 1024
    pixels and the Chebyshev series above that. ``feature_dir`` and
    ``prefilter_dir`` hold per-patch AGFF files named ``<stem>_k<index>.agff``
    for the ``external`` provider and pre-filter.
    """

    m: int = 24
    cascades: int = 2
    eps: float = 0.2
    cheb_order: int = 30
    alpha: float = 0.0
    prefilter: str = "gaussian3x3"
    provider: str = "intensity+coords"
    mode: str = "auto"
    reuse_graph: bool = False
    degrees: tuple = DEFAULT_DEGREES
    feature_dir: str = None
    prefilter_dir: str = None
    stem: str = "image"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ConfigError(f"patch size m must be an integer >= 2, got {self.m}")
        if int(self.cascades) != self.cascades or self.cascades < 1:
            raise ConfigError(f"cascade count must be an integer >= 1, got {self.cascades}")
        if not self.eps > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.eps}")
        if int(self.cheb_order) != self.cheb_order or self.cheb_order < 1:
            raise ConfigError(f"Chebyshev order must be an integer >= 1, got {self.cheb_order}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.prefilter not in PREFILTERS:
            raise ConfigError(f"unknown prefilter {self.prefilter!r}; choose from {PREFILTERS}")
        if self.provider not in PROVIDERS:
            raise ConfigError(f"unknown feature provider {self.provider!r}; choose from {PROVIDERS}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.provider == "external" and not self.feature_dir:
            raise ConfigError("external feature provider requires feature_dir")
        if self.prefilter == "external" and not self.prefilter_dir:
            raise ConfigError("external prefilter requires prefilter_dir")

    def resolved_mode(self):
        if self.mode != "auto":
            return self.mode
        return "exact" if self.m * self.m <= EXACT_MODE_MAX_NODES else "chebyshev"


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ConfigError(f"noise sigma must be >= 0, got {self.sigma}")


@lru_cache(maxsize=8)
def default_filterbank(degrees=DEFAULT_DEGREES):
    return design_filterbank(*degrees)


def add_awgn(img, spec):
    """Add i.i.d. Gaussian noise from ``spec.seed``; no clipping."""
    img = np.asarray(img, dtype=np.float64)
    if spec.sigma == 0:
        return img.copy()
    rng = np.random.default_rng(spec.seed)
    return img + rng.normal(0.0, spec.sigma, size=img.shape)


def _values(patch):
    return patch.values if isinstance(patch, Patch) else np.asarray(patch, dtype=np.float64)


def _like(patch, values):
    return patch.with_values(values) if isinstance(patch, Patch) else values


def relu(patch):
    return _like(patch, np.maximum(_values(patch), 0.0))


def prefilter(patch, kind="identity", path=None):
    """Pre-filter a patch.

    ``gaussian3x3`` convolves with the normalized binomial kernel
    ``[1 2 1]^T [1 2 1] / 16`` using reflected borders. ``external`` reads
    an ``M x 1`` AGFF file from ``path``.
    """
    vals = _values(patch)
    if kind == "identity":
        return _like(patch, vals.copy())
    if kind == "gaussian3x3":
        return _like(patch, ndimage.convolve(vals, _BINOMIAL_3X3, mode="reflect"))
    if kind == "external":
        if path is None:
            raise InputError("external prefilter needs a file path")
        loaded = io.read_agff(path, expected_m=vals.size, expected_n=1)
        return _like(patch, loaded.reshape(vals.shape))
    raise ConfigError(f"unknown prefilter {kind!r}; choose from {PREFILTERS}")


def _feature_path(cfg, patch):
    return os.path.join(cfg.feature_dir, io.agff_name(cfg.stem, patch.index))


def _graph_pair(patch, cfg):
    path = _feature_path(cfg, patch) if cfg.provider == "external" else None
    fm = compute_features(patch, cfg.provider, path)
    return split_hv_diag(build_8connected_graph(fm, patch.m, cfg.eps), patch.m)


def _stage_prefilter(patch, cfg, first_input):
    # External pre-filtered data stands in for the pre-filter of the raw input
    # only; later stages have no file to draw from and pass through.
    if cfg.prefilter == "external":
        return first_input if first_input is not None else prefilter(patch, "identity")
    return prefilter(patch, cfg.prefilter)


def agf_block(patch, cfg, fb=None, pre_input=None):
    """One AGF block: diagonal stage, then horizontal/vertical stage.

    Features and graphs come from the current patch; the second stage
    rebuilds them from the first stage's output unless ``cfg.reuse_graph``.
    ``pre_input`` replaces the first pre-filter output (external pre-filter).
    """
    fb = fb if fb is not None else default_filterbank(tuple(cfg.degrees))
    mode = cfg.resolved_mode()
    m = patch.m
    pair = _graph_pair(patch, cfg)

    x = _stage_prefilter(patch, cfg, pre_input)
    y = lowpass_filter(fb, pair.diag, pair.coloring_diag, x.values.reshape(-1), cfg.alpha, mode, cfg.cheb_order)
    x_diag = relu(patch.with_values(y.reshape(m, m)))

    if not cfg.reuse_graph:
        pair = _graph_pair(x_diag, cfg)
    x = _stage_prefilter(x_diag, cfg, None)
    y = lowpass_filter(fb, pair.hv, pair.coloring_hv, x.values.reshape(-1), cfg.alpha, mode, cfg.cheb_order)
    return relu(patch.with_values(y.reshape(m, m)))


def denoise_patch(patch, cfg, fb=None):
    """Run all ``cfg.cascades`` blocks on one patch."""
    pre = None
    if cfg.prefilter == "external":
        path = os.path.join(cfg.prefilter_dir, io.agff_name(cfg.stem, patch.index))
        pre = prefilter(patch, "external", path)
    out = patch
    for _ in range(cfg.cascades):
        out = agf_block(out, cfg, fb, pre)
        pre = None
    return out


def denoise(img, cfg=None, fb=None, workers=1):
    """Denoise a grayscale image patch by patch and reassemble it.

    Patches are independent, so ``workers > 1`` processes them on a thread
    pool without changing the result.
    """
    cfg = cfg if cfg is not None else AgfConfig()
    img = np.asarray(img, dtype=np.float64)
    fb = fb if fb is not None else default_filterbank(tuple(cfg.degrees))
    patches = partition_into_patches(img, cfg.m)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            done = list(pool.map(lambda p: denoise_patch(p, cfg, fb), patches))
    else:
        done = [denoise_patch(p, cfg, fb) for p in patches]
    return reassemble_patches(done, img.shape)


def _pair(gt, out):
    gt = np.asarray(gt, dtype=np.float64)
    out = np.asarray(out, dtype=np.float64)
    if gt.shape != out.shape:
        raise InputError(f"image shapes differ: {gt.shape} vs {out.shape}")
    return gt, out


def mse(gt, out):
    gt, out = _pair(gt, out)
    return float(np.mean((gt - out) ** 2))


def psnr(gt, out, peak=PEAK):
    """PSNR in dB for an 8-bit peak; identical images give ``math.inf``."""
    err = mse(gt, out)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def with_overrides(cfg, **kw):
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
