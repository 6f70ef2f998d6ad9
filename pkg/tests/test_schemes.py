"""Scheme tests: init/learn/infer/utility, transcripts, serialization."""

import numpy as np
import pytest

from unlearn_arena.datasets import DatasetSpec, generate_pools, make_blobs, make_regression
from unlearn_arena.errors import DegenerateGram, DimensionMismatch, EmptyData
from unlearn_arena.numerics import RngStream
from unlearn_arena.schemes import (
    SCHEME_KNN,
    SCHEME_LINREG,
    SCHEME_LOGREG,
    SCHEME_MLP,
    Architecture,
    SchemeConfig,
    from_blob,
    infer,
    infer_batch,
    init,
    learn,
    param_count,
    states_equal,
    to_blob,
    utility,
)

DESK = SchemeConfig()  # 30 epochs, batch 32, lr 0.05, wd 5e-4


@pytest.fixture(scope="module")
def desk_pools():
    spec = DatasetSpec(num_classes=2, dims=8, spread=1.0)
    return generate_pools(spec, RngStream(7, 0).child("d2"))


class TestInit:
    def test_knn_empty_store(self):
        st = init(SCHEME_KNN, Architecture(4, 3), 128, RngStream(1, 0))
        assert st.store.features.shape == (0, 4)

    def test_seeded_parameters(self):
        a = init(SCHEME_MLP, Architecture(4, 3, (8,)), 128, RngStream(1, 1))
        b = init(SCHEME_MLP, Architecture(4, 3, (8,)), 128, RngStream(1, 1))
        np.testing.assert_array_equal(a.params, b.params)

    def test_untrained_utility_is_baseline(self):
        data = make_blobs(10, 150, 8, 1.0, RngStream(1, 2))
        test = data.view(data.example_ids[:1000])
        st = init(SCHEME_MLP, Architecture(8, 10, (32, 32)), 128, RngStream(1, 3))
        assert abs(utility(st, test) - 0.1) <= 0.05

    def test_logreg_rejects_hidden(self):
        with pytest.raises(ValueError):
            init(SCHEME_LOGREG, Architecture(4, 3, (8,)), 128, RngStream(1, 4))


class TestLearn:
    def test_knn_stores_data_and_cost(self):
        data = make_blobs(2, 5, 3, 1.0, RngStream(2, 0))
        st0 = init(SCHEME_KNN, Architecture(3, 2), 128, RngStream(2, 1))
        st, transcript, cost = learn(st0, data.view(data.example_ids),
                                     SchemeConfig(k=1), RngStream(2, 2))
        assert st.store.features.shape == (10, 3)
        assert cost.units == 10
        assert transcript.deltas == []

    def test_linreg_recovers_noise_free_generator(self):
        data = make_regression(60, 4, 0.0, RngStream(2, 3))
        st0 = init(SCHEME_LINREG, Architecture(4, 0), 128, RngStream(2, 4))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(),
                         RngStream(2, 5))
        np.testing.assert_allclose(infer_batch(st, data.features), data.labels,
                                   atol=1e-8)

    def test_degenerate_gram(self):
        data = make_regression(6, 5, 0.0, RngStream(2, 6))
        view = data.view(data.example_ids[:4])  # m=4 <= n=5
        st0 = init(SCHEME_LINREG, Architecture(5, 0), 128, RngStream(2, 7))
        with pytest.raises(DegenerateGram):
            learn(st0, view, SchemeConfig(ridge=0.0), RngStream(2, 8))

    def test_empty_data(self):
        data = make_blobs(2, 5, 3, 1.0, RngStream(2, 9))
        st0 = init(SCHEME_KNN, Architecture(3, 2), 128, RngStream(2, 10))
        with pytest.raises(EmptyData):
            learn(st0, data.view(np.empty(0, dtype=np.int64)), SchemeConfig(),
                  RngStream(2, 11))

    def test_desk_mlp_accuracy(self, desk_pools):
        # Regression fixture: the two-class desk configuration reaches
        # 0.956 test accuracy at this seed; guard the 0.9 floor.
        data, plan = desk_pools
        st0 = init(SCHEME_MLP, Architecture(8, 2, (32, 32)), 128,
                   RngStream(7, 0).child("i2"))
        st, _, cost = learn(st0, data.view(plan.train_ids), DESK,
                            RngStream(7, 0).child("l2"))
        assert utility(st, data.view(plan.test_ids)) >= 0.9
        assert cost.units == DESK.epochs * len(plan.train_ids)

    def test_transcript_replays_bitwise(self, desk_pools):
        data, plan = desk_pools
        train = data.view(plan.train_ids[:200])
        st0 = init(SCHEME_MLP, Architecture(8, 2, (16,)), 128, RngStream(3, 0))
        st, transcript, _ = learn(st0, train, SchemeConfig(epochs=5),
                                  RngStream(3, 1))
        np.testing.assert_array_equal(transcript.replay(), st.params)
        total = sum(len(ids) for ids in transcript.batch_ids)
        assert total == 5 * train.size

    def test_learn_is_deterministic(self, desk_pools):
        data, plan = desk_pools
        train = data.view(plan.train_ids[:100])
        st0 = init(SCHEME_MLP, Architecture(8, 2, (8,)), 128, RngStream(3, 2))
        a, _, _ = learn(st0, train, SchemeConfig(epochs=3), RngStream(3, 3))
        b, _, _ = learn(st0, train, SchemeConfig(epochs=3), RngStream(3, 3))
        np.testing.assert_array_equal(a.params, b.params)

    def test_entropy_witness_sgd(self, desk_pools):
        # Different init streams must give visibly different models.
        data, plan = desk_pools
        train = data.view(plan.train_ids[:100])
        cfg = SchemeConfig(epochs=3)
        a0 = init(SCHEME_MLP, Architecture(8, 2, (8,)), 128, RngStream(3, 4))
        b0 = init(SCHEME_MLP, Architecture(8, 2, (8,)), 128, RngStream(3, 5))
        a, _, _ = learn(a0, train, cfg, RngStream(3, 6))
        b, _, _ = learn(b0, train, cfg, RngStream(3, 6))
        assert np.max(np.abs(a.params - b.params)) >= 1e-3

    def test_determinism_witness_knn_linreg(self):
        # Deterministic schemes ignore the stream entirely.
        data = make_regression(40, 3, 0.1, RngStream(3, 7))
        st0 = init(SCHEME_LINREG, Architecture(3, 0), 128, RngStream(3, 8))
        a, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(),
                        RngStream(100, 1))
        b, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(),
                        RngStream(200, 2))
        np.testing.assert_array_equal(a.params, b.params)

        blobs = make_blobs(2, 10, 3, 1.0, RngStream(3, 9))
        k0 = init(SCHEME_KNN, Architecture(3, 2), 128, RngStream(3, 10))
        ka, _, _ = learn(k0, blobs.view(blobs.example_ids), SchemeConfig(k=1),
                         RngStream(100, 1))
        kb, _, _ = learn(k0, blobs.view(blobs.example_ids), SchemeConfig(k=1),
                         RngStream(200, 2))
        assert states_equal(ka, kb)


class TestInfer:
    def test_one_nn_own_point_is_onehot(self):
        data = make_blobs(3, 5, 2, 1.0, RngStream(4, 0))
        st0 = init(SCHEME_KNN, Architecture(2, 3), 128, RngStream(4, 1))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(k=1),
                         RngStream(4, 2))
        probs = infer(st, data.features[4])
        assert probs[data.labels[4]] == 1.0

    def test_softmax_normalized(self):
        st = init(SCHEME_MLP, Architecture(3, 4, (8,)), 128, RngStream(4, 3))
        p = infer(st, np.array([0.1, -0.5, 2.0]))
        assert abs(p.sum() - 1.0) <= 1e-12

    def test_dimension_mismatch(self):
        st = init(SCHEME_MLP, Architecture(3, 4, (8,)), 128, RngStream(4, 4))
        with pytest.raises(DimensionMismatch):
            infer(st, np.zeros(5))

    def test_linreg_prediction_matches_targets(self):
        data = make_regression(30, 3, 0.0, RngStream(4, 5))
        st0 = init(SCHEME_LINREG, Architecture(3, 0), 128, RngStream(4, 6))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(),
                         RngStream(4, 7))
        assert infer(st, data.features[0]) == pytest.approx(data.labels[0],
                                                            abs=1e-8)


class TestUtility:
    def test_perfect_classifier(self):
        data = make_blobs(2, 10, 3, 1.0, RngStream(5, 0))
        st0 = init(SCHEME_KNN, Architecture(3, 2), 128, RngStream(5, 1))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(k=1),
                         RngStream(5, 2))
        assert utility(st, data.view(data.example_ids)) == 1.0

    def test_regression_zero_mse(self):
        data = make_regression(30, 3, 0.0, RngStream(5, 3))
        st0 = init(SCHEME_LINREG, Architecture(3, 0), 128, RngStream(5, 4))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(),
                         RngStream(5, 5))
        assert utility(st, data.view(data.example_ids)) == pytest.approx(1.0)

    def test_empty_test_set(self):
        data = make_blobs(2, 5, 3, 1.0, RngStream(5, 6))
        st0 = init(SCHEME_KNN, Architecture(3, 2), 128, RngStream(5, 7))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(k=1),
                         RngStream(5, 8))
        with pytest.raises(EmptyData):
            utility(st, data.view(np.empty(0, dtype=np.int64)))


class TestSerialization:
    @pytest.mark.parametrize("scheme,arch", [
        (SCHEME_MLP, Architecture(4, 3, (8, 8))),
        (SCHEME_LOGREG, Architecture(4, 3)),
    ])
    def test_parametric_round_trip_bitwise(self, scheme, arch):
        data = make_blobs(3, 20, 4, 1.0, RngStream(6, 0))
        st0 = init(scheme, arch, 128, RngStream(6, 1))
        st, _, _ = learn(st0, data.view(data.example_ids),
                         SchemeConfig(epochs=2), RngStream(6, 2))
        back = from_blob(to_blob(st))
        assert states_equal(st, back)
        assert to_blob(back) == to_blob(st)

    def test_knn_round_trip_bitwise(self):
        data = make_blobs(3, 5, 4, 1.0, RngStream(6, 3))
        st0 = init(SCHEME_KNN, Architecture(4, 3), 128, RngStream(6, 4))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(k=2),
                         RngStream(6, 5))
        back = from_blob(to_blob(st))
        assert states_equal(st, back)

    def test_linreg_round_trip_preserves_cache(self):
        data = make_regression(30, 3, 0.1, RngStream(6, 6))
        st0 = init(SCHEME_LINREG, Architecture(3, 0), 128, RngStream(6, 7))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(),
                         RngStream(6, 8))
        back = from_blob(to_blob(st))
        np.testing.assert_array_equal(back.gram_inv, st.gram_inv)
        np.testing.assert_array_equal(back.xty, st.xty)

    def test_param_count(self):
        arch = Architecture(4, 3, (8,))
        assert param_count(arch) == 4 * 8 + 8 + 8 * 3 + 3
