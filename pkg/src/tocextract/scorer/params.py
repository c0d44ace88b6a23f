"""Scorer configuration, parameter initialization and checkpoints."""

from __future__ import annotations

import dataclasses
import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..context import EDGE_DIM, NODE_DIM

CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScorerConfig:
    d_h: int = 128
    heads: int = 2
    n_d: int = 2
    text_buckets: int = 64
    use_gru: bool = True
    use_gnn: bool = True

    @property
    def text_dim(self) -> int:
        return self.text_buckets + 4

    @property
    def d_in(self) -> int:
        return self.text_dim + NODE_DIM

    @property
    def d_edge(self) -> int:
        return EDGE_DIM

    @property
    def gat_layers(self) -> int:
        return self.n_d if self.use_gnn else 0


@dataclass
class ScorerParams:
    config: ScorerConfig
    arrays: dict[str, np.ndarray]

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]

    def copy(self) -> ScorerParams:
        return ScorerParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    def check(self) -> None:
        expected = param_shapes(self.config)
        if set(expected) != set(self.arrays):
            raise ConfigError(f"parameter names differ from config: {sorted(set(expected) ^ set(self.arrays))}")
        for k, shape in expected.items():
            if self.arrays[k].shape != shape:
                raise ConfigError(f"{k}: shape {self.arrays[k].shape}, expected {shape}")
            if not np.all(np.isfinite(self.arrays[k])):
                raise ConfigError(f"{k}: non-finite values")


def param_shapes(cfg: ScorerConfig) -> dict[str, tuple[int, ...]]:
    d, k, de = cfg.d_h, cfg.heads, cfg.d_edge
    shapes = {
        "mlp.W1": (d, cfg.d_in),
        "mlp.b1": (d,),
        "mlp.W2": (d, d),
        "mlp.b2": (d,),
    }
    if cfg.use_gru:
        for direction in ("fwd", "bwd"):
            shapes[f"gru.{direction}.W_ih"] = (3 * d, d)
            shapes[f"gru.{direction}.W_hh"] = (3 * d, d)
            shapes[f"gru.{direction}.b_ih"] = (3 * d,)
            shapes[f"gru.{direction}.b_hh"] = (3 * d,)
        shapes["gru.W_p"] = (d, 2 * d)
        shapes["gru.b_p"] = (d,)
    for layer in range(cfg.gat_layers):
        p = f"gat{layer}."
        shapes[p + "Wl"] = (k, d, d)
        shapes[p + "Wr"] = (k, d, d)
        shapes[p + "Wm"] = (k, d, d)
        shapes[p + "We"] = (k, d, de)
        shapes[p + "U"] = (k, d, de)
        shapes[p + "a"] = (k, d)
        shapes[p + "c"] = (d,)
    shapes.update({
        "head.w_kp": (d,),
        "head.b_kp": (),
        "head.w_de": (d,),
        "head.b_de": (),
        "head.w_mv": (2 * d,),
        "head.b_mv": (),
    })
    return shapes


def init_params(cfg: ScorerConfig, seed: int = 0) -> ScorerParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("b") or leaf == "c":
            arrays[name] = np.zeros(shape)
        elif len(shape) == 1:
            limit = np.sqrt(3.0 / shape[0])
            arrays[name] = rng.uniform(-limit, limit, shape)
        else:
            fan_out, fan_in = shape[-2], shape[-1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arrays[name] = rng.uniform(-limit, limit, shape)
    return ScorerParams(cfg, arrays)


# Checkpoint layout: a zip (numpy .npz) holding one array per parameter plus
# "__meta__", a JSON string with {"version", "config"}.


def save_params(params: ScorerParams, path) -> None:
    meta = {"version": CHECKPOINT_VERSION, "config": dataclasses.asdict(params.config)}
    entries = {"__meta__": np.array(json.dumps(meta, sort_keys=True)), **params.arrays}
    buf = io.BytesIO()
    # same layout as np.savez, but with fixed entry timestamps so identical
    # parameters give identical bytes
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(entries):
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w", force_zip64=True) as fh:
                np.lib.format.write_array(fh, np.asarray(entries[name]), allow_pickle=False)
    Path(path).write_bytes(buf.getvalue())


def load_params(path) -> ScorerParams:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
            arrays = {k: data[k] for k in data.files if k != "__meta__"}
    except (zipfile.BadZipFile, ValueError, OSError, EOFError, KeyError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from None
    version = meta.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint {path} has version {version}, this build reads version {CHECKPOINT_VERSION}"
        )
    try:
        cfg = ScorerConfig(**meta["config"])
        params = ScorerParams(cfg, arrays)
        params.check()
    except (TypeError, ConfigError) as exc:
        raise CheckpointError(f"inconsistent checkpoint {path}: {exc}") from None
    return params
