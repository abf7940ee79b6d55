"""Point cloud part segmentation: seed region growing plus a self-trained graph network."""

import json as _json

from ._core import (
    Model,
    SrgnetError,
    __version__,
    estimate_normals,
    infer,
    make_fixture,
    miou,
)
from . import _core


def _settings(settings):
    return {str(k): str(v).lower() if isinstance(v, bool) else str(v) for k, v in (settings or {}).items()}


def config(**settings):
    """Resolved configuration for the given overrides."""
    return _json.loads(_core.config(_settings(settings)))


def srg(points, normals=None, settings=None):
    """Seed region growing labels; normals are estimated when omitted."""
    return _core.srg(points, normals, _settings(settings))


def kmeans(points, normals=None, settings=None):
    """K-means baseline labels on position and normal features."""
    return _core.kmeans(points, normals, _settings(settings))


def train(points, normals, srg_labels, settings=None):
    """Self-trains a model; returns (model, labels, history)."""
    return _core.train(points, normals, list(map(int, srg_labels)), _settings(settings))


def run_pipeline(input, out_dir, gt=None, **settings):
    """Runs the full pipeline into out_dir and returns the metrics dict."""
    return _json.loads(_core.run_pipeline(str(input), str(out_dir), None if gt is None else str(gt), _settings(settings)))


__all__ = [
    "Model",
    "SrgnetError",
    "__version__",
    "config",
    "estimate_normals",
    "infer",
    "kmeans",
    "make_fixture",
    "miou",
    "run_pipeline",
    "srg",
    "train",
]
