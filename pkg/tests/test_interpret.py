import numpy as np
import pytest

from armlet.data import SyntheticSpec, generate_synthetic
from armlet.interpret import (
    InteractionTerm,
    count_interaction_terms,
    global_importance,
    interaction_catalog,
    local_attribution,
)
from armlet.model import ArmConfig, Model


def model_and_data(alpha=2.0, seed=0, scale=1.0, kind="arm", n=200, K=2, o=4):
    ds = generate_synthetic(SyntheticSpec((4, 5, 3, 6, 2), n=n), seed).dataset
    model = Model.create(kind, ArmConfig(m=5, n_e=3, K=K, o=o, alpha=alpha), ds.schema, seed)
    rng = np.random.default_rng(seed)
    for name in ("arm.emb", "arm.Q", "arm.V"):
        model.store[name][...] = rng.normal(0, scale, model.store[name].shape)
    return model, ds


class TestGlobalImportance:
    def test_hand_computed(self):
        model, _ = model_and_data()
        V = np.zeros((2, 5, 4))
        V[0, 1, :] = 1.0
        V[1, 3, 0] = -3.0
        model.store["arm.V"][...] = V
        g = global_importance(model)
        np.testing.assert_allclose(g.scores, [0, 4 / 7, 0, 3 / 7, 0])
        assert g.ranking()[:2] == [1, 3]

    def test_all_zero_is_uniform(self):
        model, _ = model_and_data()
        model.store["arm.V"][...] = 0.0
        g = global_importance(model)
        assert g.degenerate
        np.testing.assert_allclose(g.scores, 0.2)

    def test_rejects_baselines(self):
        ds = generate_synthetic(SyntheticSpec((3, 3), n=5), 0).dataset
        with pytest.raises(ValueError):
            global_importance(Model.create("fm", ArmConfig(m=2), ds.schema))


class TestLocalAttribution:
    def test_normalised_weight_mass(self):
        model, ds = model_and_data()
        loc = local_attribution(ds[3], model)
        w = np.abs(model.forward(ds.rows[3:4], ds.value[3:4]).attention.weights[0])
        np.testing.assert_allclose(loc.neurons, w)
        np.testing.assert_allclose(loc.scores, w.sum(0) / w.sum())
        assert loc.scores.sum() == pytest.approx(1.0)

    def test_dataset_index_matches_instance(self):
        model, ds = model_and_data()
        np.testing.assert_array_equal(local_attribution(ds, model, 7).scores,
                                      local_attribution(ds[7], model).scores)

    def test_degenerate(self):
        model, ds = model_and_data()
        model.store["arm.V"][...] = 0.0
        loc = local_attribution(ds[0], model)
        assert loc.degenerate
        np.testing.assert_allclose(loc.scores, 0.2)

    def test_ensemble_uses_arm_branch(self):
        model, ds = model_and_data(kind="arm_plus")
        arm = Model("arm", model.cfg, model.schema, model.store)
        np.testing.assert_array_equal(local_attribution(ds[0], model).scores,
                                      local_attribution(ds[0], arm).scores)


class TestCatalog:
    @pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
    @pytest.mark.parametrize("scale", [0.01, 1.0, 5.0])
    def test_conservation(self, alpha, scale):
        model, ds = model_and_data(alpha=alpha, scale=scale)
        tc = count_interaction_terms(ds, model, batch_size=64)
        assert tc.total_frequency + tc.degenerate_frequency == pytest.approx(8.0, abs=1e-12)

    def test_zero_values_count_as_degenerate(self):
        model, ds = model_and_data()
        model.store["arm.V"][0] = 0.0
        tc = count_interaction_terms(ds, model)
        assert tc.degenerate_frequency == pytest.approx(4.0)

    def test_matches_direct_count(self):
        model, ds = model_and_data(alpha=2.0, scale=3.0, n=60)
        tr = model.forward(ds.rows, ds.value)
        V = model.store["arm.V"].transpose(0, 2, 1).reshape(8, 5)
        counts = {}
        for b in range(ds.N):
            for i in range(8):
                key = tuple(int(j) for j in np.flatnonzero((tr.attention.gates[b, i] > 0) & (V[i] != 0)))
                counts[key] = counts.get(key, 0) + 1
        counts.pop((), None)
        terms = {t.fields: t.frequency for t in count_interaction_terms(ds, model).terms()}
        assert terms == pytest.approx({k: c / ds.N for k, c in counts.items()})

    def test_top_n_sorted(self):
        model, ds = model_and_data(alpha=2.0, scale=3.0)
        terms = interaction_catalog(ds, model, 8)
        assert len(terms) <= 8
        freqs = [t.frequency for t in terms]
        assert freqs == sorted(freqs, reverse=True)
        assert all(t.order == len(t.fields) for t in terms)

    def test_top_zero(self):
        model, ds = model_and_data()
        assert interaction_catalog(ds, model, 0) == []

    def test_term_json(self):
        t = InteractionTerm((0, 2), 1.5)
        assert t.to_json(["a", "b", "c"]) == {"fields": [0, 2], "frequency": 1.5, "order": 2,
                                              "names": ["a", "c"]}
