"""Model checkpoints as a single ``.npz`` archive.

The archive stores the JSON-encoded ModelConfig and training seed under
``__meta__`` and every parameter array under its ``<layer>.<name>`` key.
float64 arrays are stored raw, so save -> load is bit-exact.
"""
import json
import os
import tempfile

import numpy as np

from ..errors import FormatError
from ..ndcore import RngStream
from .model import ModelConfig, build_model

FORMAT_VERSION = 1


def save_checkpoint(model, path, seed=None):
    meta = {
        "format": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "seed": seed,
    }
    arrays = dict(model.named_params())
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npz.tmp")
    with os.fdopen(fd, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Returns ``(model, seed)``."""
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data.files:
            raise FormatError(f"{path}: not a checkpoint (missing metadata)")
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format") != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint format {meta.get('format')}")
        config = ModelConfig(**meta["config"])
        model = build_model(config, RngStream(0))
        params = {k: data[k] for k in data.files if k != "__meta__"}
    expected = set(model.named_params())
    if set(params) != expected:
        raise FormatError(f"{path}: parameter set does not match its config")
    model.load_params(params)
    return model, meta.get("seed")
