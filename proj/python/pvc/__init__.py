"""Progressive visual compression toolkit: Python front end to the C++ core.

Configs are plain dicts with the same schema as the CLI's JSON files.
"""

import json

import numpy as np

from . import _pvc
from ._pvc import NumericalError, ValidationError, checksum, synthetic_image

__all__ = [
    "NumericalError",
    "ValidationError",
    "avg_pool",
    "ca_pool_zero_init",
    "checksum",
    "encode",
    "gradcheck",
    "pi_resize",
    "pixel_unshuffle_avg_init",
    "probe_image",
    "probe_items",
    "resize_map",
    "sweep_csv",
    "synthetic_image",
    "token_count",
]


def _dump(config):
    return json.dumps(config if config is not None else {})


def resize_map(channels, coarse, fine):
    """B with fine_patch = coarse_patch @ B."""
    return _pvc.resize_map(channels, coarse, fine)


def pi_resize(weight, bias, patch, channels, fine_patch):
    """Returns (weight, bias, report) for a kernel re-expressed at fine_patch."""
    w, b, report = _pvc.pi_resize(np.asarray(weight, dtype=np.float64), list(bias), patch, channels, fine_patch)
    return w, np.asarray(b), json.loads(report)


def avg_pool(tokens):
    return _pvc.avg_pool(tokens)


def ca_pool_zero_init(tokens, hidden=None, seed=0):
    tokens = np.asarray(tokens, dtype=np.float64)
    return _pvc.ca_pool_zero_init(tokens, hidden or tokens.shape[-1], seed)


def pixel_unshuffle_avg_init(tokens):
    return _pvc.pixel_unshuffle_avg_init(tokens)


def token_count(config, height, width):
    return _pvc.token_count(_dump(config), height, width)


def encode(image, config=None, seed=0):
    """Runs the encoder on an (H, W, C) float image; returns (tokens, summary)."""
    tokens, summary = _pvc.encode(np.asarray(image, dtype=np.float64), _dump(config), seed)
    return tokens, json.loads(summary)


def sweep_csv(config):
    return _pvc.sweep_csv(_dump(config))


def gradcheck(seed=0, dim=16, hidden=16, step=1e-5):
    return _pvc.gradcheck(seed, dim, hidden, step)


def probe_items(kind, count, seed=0):
    return [json.loads(s) for s in _pvc.probe_items(kind, count, seed)]


def probe_image(kind, index, seed=0):
    return _pvc.probe_image(kind, index, seed)
