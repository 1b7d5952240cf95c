"""Model files: one JSON document holding config, schema and named tensors."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import Schema
from .errors import SchemaError
from .model import ArmConfig, Model, init_params

FORMAT_VERSION = 1
_DTYPES = {"float64": np.float64, "float32": np.float32}


def model_to_json(model: Model, dtype: str = "float64", extra: dict | None = None) -> dict:
    """Serialisable document for ``model``.

    With ``dtype="float32"`` tensors are rounded to single precision on
    disk; the default keeps every bit, since JSON floats round-trip doubles.
    """
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be one of {sorted(_DTYPES)}")
    cast = _DTYPES[dtype]
    doc = {
        "format_version": FORMAT_VERSION,
        "model_kind": model.kind,
        "dtype": dtype,
        "config": model.cfg.to_json(),
        "schema": model.schema.to_json(),
        "tensors": {
            name: {"shape": list(p.shape), "data": p.astype(cast).astype(np.float64).ravel().tolist()}
            for name, p in model.store.params.items()
        },
    }
    if extra:
        doc["meta"] = extra
    return doc


def model_from_json(doc: dict) -> Model:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format_version {version!r}")
    try:
        cfg = ArmConfig.from_json(doc["config"])
        schema = Schema.from_json(doc["schema"])
        kind = doc["model_kind"]
        tensors = doc["tensors"]
    except KeyError as exc:
        raise SchemaError(f"model file lacks {exc.args[0]!r}") from None
    # build a store of the right layout, then overwrite every tensor
    store = init_params(kind, cfg, schema, seed=0)
    missing = set(store.names()) ^ set(tensors)
    if missing:
        raise SchemaError(f"model tensors do not match kind {kind!r}: {sorted(missing)}")
    store.load({
        name: np.asarray(t["data"], dtype=np.float64).reshape(t["shape"])
        for name, t in tensors.items()
    })
    return Model(kind, cfg, schema, store).freeze()


def save_model(model: Model, path: str | Path, dtype: str = "float64", extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_json(model, dtype, extra)))


def load_model(path: str | Path) -> Model:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a model file ({exc.msg} at line {exc.lineno})") from None
    return model_from_json(doc)


def read_meta(path: str | Path) -> dict:
    return json.loads(Path(path).read_text()).get("meta", {})
