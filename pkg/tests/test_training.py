import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armlet.data import Dataset, PlantedTerm, SyntheticSpec, generate_synthetic, split
from armlet.errors import MetricError, TrainingError
from armlet.model import ArmConfig, Model
from armlet.training import TrainConfig, auc, evaluate, logloss, logloss_grad, sigmoid, train


def pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


@pytest.fixture(scope="module")
def small_split():
    spec = SyntheticSpec((6, 6, 6, 6), (PlantedTerm((0, 1), 3.0),), n=1500)
    return split(generate_synthetic(spec, 0).dataset, (0.8, 0.1, 0.1), 0)


class TestMetrics:
    def test_auc_perfect_and_reversed(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
        assert auc([1, 2, 3], [0, 1, 1]) == 1.0
        assert auc([3, 2, 1], [0, 1, 1]) == 0.0

    def test_auc_all_tied(self):
        assert auc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), min_size=2, max_size=40))
    def test_auc_matches_pairwise_oracle(self, pairs):
        scores = [float(s) for s, _ in pairs]
        labels = [y for _, y in pairs]
        if len(set(labels)) < 2:
            with pytest.raises(MetricError):
                auc(scores, labels)
        else:
            assert auc(scores, labels) == pytest.approx(pairwise_auc(scores, labels), abs=1e-15)

    def test_single_class(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.2], [1, 1])

    def test_logloss_matches_naive(self, rng):
        z = rng.normal(size=50) * 3
        y = rng.integers(0, 2, 50)
        p = 1 / (1 + np.exp(-z))
        naive = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert logloss(z, y) == pytest.approx(naive, rel=1e-12)

    def test_logloss_stable_for_huge_logits(self):
        assert logloss([800.0, -800.0], [1, 0]) == 0.0
        assert logloss([800.0], [0]) == pytest.approx(800.0)

    def test_logloss_grad_is_derivative(self, rng):
        z = rng.normal(size=7)
        y = rng.integers(0, 2, 7)
        h = 1e-6
        num = [(logloss(z + h * e, y) - logloss(z - h * e, y)) / (2 * h) for e in np.eye(7)]
        np.testing.assert_allclose(logloss_grad(z, y), num, atol=1e-9)

    def test_sigmoid_extremes(self):
        np.testing.assert_array_equal(sigmoid([-1000.0, 0.0, 1000.0]), [0.0, 0.5, 1.0])

    def test_evaluate_empty(self, small_split):
        tr = small_split[0]
        model = Model.create("lr", ArmConfig(m=4), tr.schema)
        with pytest.raises(MetricError):
            evaluate(model, tr.subset([]))


class TestTrainConfig:
    @pytest.mark.parametrize("kw", [dict(lr=-1.0), dict(batch_size=0), dict(patience=0),
                                    dict(eval_every=0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


class TestTrain:
    def test_learns_and_is_deterministic(self, small_split):
        tr, va, te = small_split
        cfg = ArmConfig(m=4, n_e=4, K=1, o=4, mlp_widths=(8,), n_h=8)
        tc = TrainConfig(lr=0.02, batch_size=64, max_epochs=4, patience=2, seed=3)
        a = train("arm", tr, va, cfg, tc)
        b = train("arm", tr, va, cfg, tc)
        assert [r.valid_auc for r in a.history] == [r.valid_auc for r in b.history]
        assert evaluate(a.model, te).auc > 0.6

    def test_restores_best_checkpoint(self, small_split):
        tr, va, _ = small_split
        tc = TrainConfig(lr=0.05, batch_size=128, max_epochs=6, patience=6, seed=0)
        res = train("fm", tr, va, ArmConfig(m=4, n_e=4), tc)
        assert res.best_valid_auc == max(r.valid_auc for r in res.history)
        assert evaluate(res.model, va).auc == pytest.approx(res.best_valid_auc, abs=1e-12)

    def test_early_stopping(self, small_split):
        tr, va, _ = small_split
        # lr = 0 never improves after the first evaluation
        tc = TrainConfig(lr=0.0, batch_size=256, max_epochs=20, patience=2)
        res = train("lr", tr, va, ArmConfig(m=4), tc)
        assert res.stopped_early and len(res.history) == 3

    def test_eval_every_steps(self, small_split):
        tr, va, _ = small_split
        tc = TrainConfig(lr=0.01, batch_size=100, max_epochs=1, patience=50, eval_every=4)
        res = train("lr", tr, va, ArmConfig(m=4), tc)
        assert [r.step for r in res.history] == list(range(4, 13, 4))

    def test_history_callback(self, small_split):
        tr, va, _ = small_split
        seen = []
        train("lr", tr, va, ArmConfig(m=4), TrainConfig(max_epochs=2), on_record=seen.append)
        assert [r.epoch for r in seen] == [1, 2]

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_diagnostics(self, small_split):
        tr, va, _ = small_split
        model = Model.create("lr", ArmConfig(m=4), tr.schema)
        model.store["lr.w"][...] = np.inf
        with pytest.raises(TrainingError) as err:
            train("lr", tr, va, ArmConfig(m=4), TrainConfig(max_epochs=1), model=model)
        assert "param_norms" in err.value.diagnostics or "grad_norms" in err.value.diagnostics
