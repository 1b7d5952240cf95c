import json

import numpy as np
import pytest

from armlet.data import SyntheticSpec, generate_synthetic
from armlet.errors import SchemaError
from armlet.model import MODEL_KINDS, ArmConfig, Model
from armlet.persist import FORMAT_VERSION, load_model, model_to_json, read_meta, save_model


@pytest.fixture(scope="module")
def data():
    return generate_synthetic(SyntheticSpec((7, 3, 9, 4), n=1000), 2).dataset


def perturbed(kind, schema, seed=0, scale=0.3):
    model = Model.create(kind, ArmConfig(m=4, n_e=4, K=2, o=3, alpha=1.5), schema, seed)
    rng = np.random.default_rng(seed)
    for name in model.store:
        model.store[name][...] += rng.normal(0, scale, model.store[name].shape)
    return model


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_roundtrip_is_exact(kind, data, tmp_path):
    model = perturbed(kind, data.schema)
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back.kind == kind and back.cfg == model.cfg and back.schema == model.schema
    np.testing.assert_array_equal(back.logits(data), model.logits(data))


def test_float32_within_tolerance(data, tmp_path):
    model = perturbed("arm", data.schema)
    path = tmp_path / "m.json"
    save_model(model, path, dtype="float32")
    doc = json.loads(path.read_text())
    assert doc["dtype"] == "float32"
    back = load_model(path)
    np.testing.assert_allclose(back.logits(data), model.logits(data), atol=1e-5)


def test_header(data):
    doc = model_to_json(perturbed("arm", data.schema))
    assert doc["format_version"] == FORMAT_VERSION
    assert doc["config"]["K"] == 2 and doc["model_kind"] == "arm"
    assert doc["tensors"]["arm.V"]["shape"] == [2, 4, 3]


def test_meta(data, tmp_path):
    path = tmp_path / "m.json"
    save_model(perturbed("lr", data.schema), path, extra={"seed": 4})
    assert read_meta(path) == {"seed": 4}


def test_loaded_model_is_frozen(data, tmp_path):
    path = tmp_path / "m.json"
    save_model(perturbed("arm", data.schema), path)
    assert load_model(path)._P is not None


@pytest.mark.parametrize("edit", [
    lambda d: d.update(format_version=99),
    lambda d: d.pop("schema"),
    lambda d: d["tensors"].pop("arm.Q"),
])
def test_rejects_bad_documents(edit, data, tmp_path):
    doc = model_to_json(perturbed("arm", data.schema))
    edit(doc)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_model(path)


def test_rejects_non_json(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("not json")
    with pytest.raises(SchemaError):
        load_model(path)
