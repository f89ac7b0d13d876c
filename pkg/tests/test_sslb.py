"""Tests for reference pairing, loss forms, confidence weights and schemes."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from sslpos.dataset import Dataset, featurize_batch
from sslpos.neural_net import (
    MlpParams,
    NetworkSpec,
    TrainConfig,
    TrainedModel,
    TrainingData,
    init_params,
    train,
)
from sslpos.sslb import (
    BANDWIDTH_FLOOR,
    SCHEMES,
    KdeModel,
    PseudoLabelSet,
    ReferencePair,
    _derive_seed,
    build_teacher_targets,
    confidence_weights,
    fit_kde,
    kde_eval,
    knn_reference,
    linear_confidence,
    nearest_reference_indices,
    pairwise_sq_dists,
    pseudo_label,
    run_scheme,
    scale_weights,
    scheme_position_errors,
    silverman_bandwidth,
    sslr_weighted_loss,
    student_loss,
    supervised_loss,
    teacher_loss,
    train_scheme_model,
    train_student,
    train_teacher,
    write_pseudo_jsonl,
)

TINY_DIM = 1024  # feature width for the 4-BS / 4-port / 16-tap fixtures


def small_spec() -> NetworkSpec:
    return NetworkSpec(input_dim=TINY_DIM, hidden_dims=(8, 6))


def quick_cfg(seed: int = 0, epochs: int = 4) -> TrainConfig:
    return TrainConfig(lr0=1e-2, batch_size=8, epochs=epochs, seed=seed)


class TestPairwiseDistances:
    def test_matches_brute_force(self, rng):
        q = rng.normal(size=(5, 3, 4)) + 1j * rng.normal(size=(5, 3, 4))
        r = rng.normal(size=(7, 3, 4)) + 1j * rng.normal(size=(7, 3, 4))
        d2 = pairwise_sq_dists(q, r)
        assert d2.shape == (5, 7)
        for i in range(5):
            for j in range(7):
                want = np.sum(np.abs(q[i] - r[j]) ** 2)
                assert d2[i, j] == pytest.approx(want, rel=1e-10)

    def test_self_distance_zero(self, rng):
        x = rng.normal(size=(4, 2, 3)) + 1j * rng.normal(size=(4, 2, 3))
        d2 = pairwise_sq_dists(x, x)
        assert np.allclose(np.diagonal(d2), 0.0, atol=1e-9)
        assert np.all(d2 >= 0.0)

    def test_nearest_indices(self):
        refs = np.array([[0.0], [1.0], [5.0]], dtype=complex).reshape(3, 1, 1)
        queries = np.array([[0.9], [4.0]], dtype=complex).reshape(2, 1, 1)
        idx = nearest_reference_indices(queries, refs)
        assert idx.tolist() == [1, 2]

    def test_nearest_tie_goes_to_lowest_index(self):
        refs = np.array([[2.0], [2.0]], dtype=complex).reshape(2, 1, 1)
        q = np.array([[2.0]], dtype=complex).reshape(1, 1, 1)
        assert nearest_reference_indices(q, refs).tolist() == [0]

    def test_exclude_diagonal_skips_self(self):
        cirs = np.array([[0.0], [1.0], [10.0]], dtype=complex).reshape(3, 1, 1)
        idx = nearest_reference_indices(cirs, cirs, exclude_diagonal=True)
        # without exclusion each row would pick itself
        assert idx.tolist() == [1, 0, 1]

    def test_exclude_diagonal_needs_square(self):
        a = np.zeros((2, 1, 1), dtype=complex)
        b = np.zeros((3, 1, 1), dtype=complex)
        with pytest.raises(ValueError, match="square"):
            nearest_reference_indices(a, b, exclude_diagonal=True)


class TestKnnReference:
    def test_fields(self, tiny_labeled):
        pair = knn_reference(tiny_labeled.cirs[0], tiny_labeled, exclude_index=0,
                             own_position=tiny_labeled.positions[0])
        assert isinstance(pair, ReferencePair)
        assert pair.ref_index != 0
        np.testing.assert_array_equal(pair.ref_cir,
                                      tiny_labeled.cirs[pair.ref_index])
        np.testing.assert_array_equal(pair.ref_position,
                                      tiny_labeled.positions[pair.ref_index])
        want_d = math.sqrt(np.sum(np.abs(
            tiny_labeled.cirs[0] - pair.ref_cir) ** 2))
        # the expanded-form distance loses a few digits vs direct |a-b|^2
        assert pair.distance == pytest.approx(want_d, rel=1e-6)
        np.testing.assert_allclose(
            pair.bias_target,
            tiny_labeled.positions[pair.ref_index] - tiny_labeled.positions[0])

    def test_without_own_position_bias_is_none(self, tiny_labeled):
        pair = knn_reference(tiny_labeled.cirs[3], tiny_labeled)
        assert pair.bias_target is None

    def test_self_query_without_exclusion_finds_itself(self, tiny_labeled):
        pair = knn_reference(tiny_labeled.cirs[5], tiny_labeled)
        assert pair.ref_index == 5
        assert pair.distance == pytest.approx(0.0, abs=1e-9)

    def test_unlabeled_reference_set_rejected(self, tiny_labeled, tiny_unlabeled):
        with pytest.raises(ValueError, match="labeled"):
            knn_reference(tiny_labeled.cirs[0], tiny_unlabeled)


class TestTeacherTargets:
    def test_matches_manual_construction(self, tiny_labeled):
        data = build_teacher_targets(tiny_labeled)
        idx = nearest_reference_indices(tiny_labeled.cirs, tiny_labeled.cirs,
                                        exclude_diagonal=True)
        assert np.all(idx != np.arange(len(tiny_labeled)))
        np.testing.assert_array_equal(
            data.features, featurize_batch(tiny_labeled.cirs,
                                           tiny_labeled.cirs[idx]))
        np.testing.assert_array_equal(data.pos_targets, tiny_labeled.positions)
        np.testing.assert_allclose(
            data.bias_targets,
            tiny_labeled.positions[idx] - tiny_labeled.positions)
        assert np.all(data.pos_coeff == 1.0)
        assert np.all(data.bias_coeff == 1.0)

    def test_needs_two_samples(self, tiny_labeled):
        with pytest.raises(ValueError, match="two"):
            build_teacher_targets(tiny_labeled.take([0]))


class TestLossForms:
    def test_supervised_mean_of_norms(self):
        pred = np.array([[3.0, 4.0], [0.0, 0.0]])
        target = np.zeros((2, 2))
        assert supervised_loss(pred, target) == pytest.approx(2.5)

    def test_teacher_adds_bias_term(self):
        pos_p = np.array([[5.0, 0.0]])
        bias_p = np.array([[0.0, 7.0]])
        zero = np.zeros((1, 2))
        assert teacher_loss(pos_p, zero, bias_p, zero) == pytest.approx(12.0)

    def test_scalar_weighted_form(self):
        # one labeled residual of norm 5, one pseudo residual of norm 10
        pl = np.array([[3.0, 4.0]])
        ps = np.array([[6.0, 8.0]])
        zero = np.zeros((1, 2))
        # w = 4 doubles the labeled norm, w* = 0.25 halves the pseudo norm
        got = sslr_weighted_loss(pl, zero, ps, zero, w=4.0, w_star=0.25)
        assert got == pytest.approx((2 * 5 + 0.5 * 10) / 2)

    def test_scalar_weighted_defaults_to_pooled_mean(self):
        pl = np.array([[3.0, 4.0]])
        ps = np.array([[6.0, 8.0]])
        zero = np.zeros((1, 2))
        assert sslr_weighted_loss(pl, zero, ps, zero) == pytest.approx(7.5)

    def test_student_per_sample_weights(self):
        pl = np.array([[3.0, 4.0]])
        ps = np.array([[6.0, 8.0]])
        zero = np.zeros((1, 2))
        assert student_loss(pl, zero, ps, zero, np.ones(1)) == pytest.approx(7.5)
        assert student_loss(pl, zero, ps, zero, np.array([4.0])) == \
            pytest.approx((5 + 20) / 2)

    def test_student_unit_weights_equal_scalar_form(self, rng):
        pl = rng.normal(size=(6, 2))
        tl = rng.normal(size=(6, 2))
        ps = rng.normal(size=(4, 2))
        ts = rng.normal(size=(4, 2))
        a = student_loss(pl, tl, ps, ts, np.ones(4))
        b = sslr_weighted_loss(pl, tl, ps, ts, w=1.0, w_star=1.0)
        assert a == pytest.approx(b, rel=1e-12)

    def test_student_weight_validation(self):
        p = np.zeros((1, 2))
        with pytest.raises(ValueError, match="per pseudo"):
            student_loss(p, p, p, p, np.ones(3))
        with pytest.raises(ValueError, match="non-negative"):
            student_loss(p, p, p, p, np.array([-1.0]))

    def test_empty_batches_rejected(self):
        e = np.zeros((0, 2))
        with pytest.raises(ValueError, match="empty"):
            student_loss(e, e, e, e, np.zeros(0))

    def test_scale_weights(self):
        np.testing.assert_allclose(scale_weights(np.array([1.0, 2.0]), 0.5),
                                   [0.5, 1.0])
        with pytest.raises(ValueError, match="non-negative"):
            scale_weights(np.ones(2), -0.1)


class TestKde:
    def test_silverman_two_point_oracle(self):
        # n=2, std(ddof=1)=sqrt(50), IQR=5.0 -> 0.9*(5/1.34)*2**-0.2
        got = silverman_bandwidth(np.array([0.0, 10.0]))
        assert got == pytest.approx(2.9234906976362374, rel=1e-12)

    def test_silverman_floor_for_constant_values(self):
        assert silverman_bandwidth(np.full(5, 3.0)) == BANDWIDTH_FLOOR

    def test_silverman_needs_two(self):
        with pytest.raises(ValueError, match="2"):
            silverman_bandwidth(np.array([1.0]))

    def test_fit_kde_copies_and_validates(self):
        vals = np.array([1.0, 2.0])
        model = fit_kde(vals, bandwidth=0.5)
        vals[0] = 99.0
        assert model.points[0] == 1.0
        assert model.bandwidth == 0.5
        with pytest.raises(ValueError, match="positive"):
            fit_kde(vals, bandwidth=0.0)

    def test_single_point_standard_normal_peak(self):
        model = KdeModel(points=np.array([0.0]), bandwidth=1.0)
        got = kde_eval(model, np.array([0.0]))[0]
        assert got == pytest.approx(0.3989422804014327, rel=1e-12)

    def test_kde_matches_brute_force(self, rng):
        pts = rng.normal(size=20)
        model = fit_kde(pts)
        queries = rng.normal(size=7)
        got = kde_eval(model, queries)
        h = model.bandwidth
        for k, x in enumerate(queries):
            want = np.mean(np.exp(-0.5 * ((x - pts) / h) ** 2)) / (
                h * math.sqrt(2 * math.pi))
            assert got[k] == pytest.approx(want, rel=1e-12)

    def test_scalar_query_is_vectorized(self):
        model = fit_kde(np.array([0.0, 1.0]))
        out = kde_eval(model, 0.5)
        assert out.shape == (1,)


class TestConfidenceWeights:
    def test_mean_one(self, rng):
        w = confidence_weights(rng.normal(size=50))
        assert w.mean() == pytest.approx(1.0, abs=1e-12)
        assert np.all(w >= 0)

    def test_dense_cluster_outweighs_outlier(self):
        w = confidence_weights(np.array([0.0, 0.0, 10.0]))
        assert w[0] == pytest.approx(w[1], rel=1e-12)
        assert w[0] > w[2]

    def test_needs_two_values(self):
        with pytest.raises(ValueError, match="2"):
            confidence_weights(np.array([1.0]))

    def test_linear_confidence_oracle(self):
        np.testing.assert_allclose(linear_confidence(np.array([0.0, 10.0])),
                                   [2.0, 0.0])

    def test_linear_confidence_mean_one(self, rng):
        w = linear_confidence(rng.uniform(size=30))
        assert w.mean() == pytest.approx(1.0, abs=1e-12)

    def test_linear_confidence_constant_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            linear_confidence(np.full(4, 2.0))


def constant_head_model(spec: NetworkSpec, pos: tuple, bias: tuple) -> TrainedModel:
    """All-zero network except the head biases: constant outputs."""
    params = init_params(spec, seed=0)
    for w in params.hidden_w:
        w[:] = 0.0
    params.w_pos[:] = 0.0
    params.w_bias[:] = 0.0
    params.b_pos[:] = np.asarray(pos)
    params.b_bias[:] = np.asarray(bias)
    return TrainedModel(params=params, spec=spec, train_config=TrainConfig(),
                        loss_history=[])


class TestPseudoLabel:
    def test_constant_teacher_outputs(self, tiny_labeled, tiny_unlabeled):
        model = constant_head_model(small_spec(), pos=(3.0, 4.0), bias=(1.0, 1.0))
        pseudo = pseudo_label(model, tiny_unlabeled, tiny_labeled)
        assert len(pseudo) == len(tiny_unlabeled)
        np.testing.assert_allclose(pseudo.positions,
                                   np.tile([3.0, 4.0], (len(pseudo), 1)))
        np.testing.assert_allclose(pseudo.d, np.full(len(pseudo), math.sqrt(2)))
        want_idx = nearest_reference_indices(tiny_unlabeled.cirs,
                                             tiny_labeled.cirs)
        np.testing.assert_array_equal(pseudo.ref_indices, want_idx)
        np.testing.assert_array_equal(
            pseudo.features,
            featurize_batch(tiny_unlabeled.cirs, tiny_labeled.cirs[want_idx]))

    def test_jsonl_round_trip(self, tmp_path, tiny_labeled, tiny_unlabeled):
        model = constant_head_model(small_spec(), pos=(1.0, 2.0), bias=(0.5, 0.0))
        pseudo = pseudo_label(model, tiny_unlabeled, tiny_labeled)
        weights = np.linspace(0.1, 2.0, len(pseudo))
        path = tmp_path / "pseudo.jsonl"
        write_pseudo_jsonl(pseudo, weights, str(path))
        lines = path.read_text().splitlines()
        assert len(lines) == len(pseudo)
        rec = json.loads(lines[3])
        assert rec["index"] == 3
        assert rec["position"] == pytest.approx([1.0, 2.0])
        assert rec["d"] == pytest.approx(0.5)
        assert rec["weight"] == pytest.approx(weights[3])


class TestSeedDerivation:
    def test_deterministic_and_tag_sensitive(self):
        assert _derive_seed(42, 11) == _derive_seed(42, 11)
        assert _derive_seed(42, 11) != _derive_seed(42, 17)
        assert _derive_seed(0, 11) != _derive_seed(1, 11)


class TestSchemeTraining:
    def test_sslr_weights_are_unit(self, tiny_labeled, tiny_unlabeled):
        _, pseudo, weights = train_scheme_model(
            "SSLR", tiny_labeled, tiny_unlabeled, small_spec(), quick_cfg())
        assert pseudo is not None
        np.testing.assert_array_equal(weights, np.ones(len(pseudo)))

    def test_confidence_none_matches_sslr_weights(self, tiny_labeled, tiny_unlabeled):
        _, _, weights = train_scheme_model(
            "SSLB", tiny_labeled, tiny_unlabeled, small_spec(), quick_cfg(),
            confidence="none")
        np.testing.assert_array_equal(weights, np.ones(len(tiny_unlabeled)))

    def test_sslb_weights_have_mean_one(self, tiny_labeled, tiny_unlabeled):
        _, _, weights = train_scheme_model(
            "SSLB", tiny_labeled, tiny_unlabeled, small_spec(), quick_cfg())
        assert weights.mean() == pytest.approx(1.0, abs=1e-9)

    def test_alpha_rescales_weights(self, tiny_labeled, tiny_unlabeled):
        _, _, w1 = train_scheme_model(
            "SSLB", tiny_labeled, tiny_unlabeled, small_spec(), quick_cfg())
        _, _, w2 = train_scheme_model(
            "SSLB", tiny_labeled, tiny_unlabeled, small_spec(), quick_cfg(),
            alpha=0.5)
        np.testing.assert_allclose(w2, 0.5 * w1, rtol=1e-12)

    def test_supervised_schemes_reject_missing_unlabeled(self, tiny_labeled):
        with pytest.raises(ValueError, match="unlabeled"):
            train_scheme_model("SSLB", tiny_labeled, None, small_spec(),
                               quick_cfg())

    def test_unknown_scheme_rejected(self, tiny_labeled):
        with pytest.raises(ValueError, match="unknown scheme"):
            train_scheme_model("SLX", tiny_labeled, None, small_spec(),
                               quick_cfg())

    def test_empty_pseudo_set_reduces_to_supervised(self, tiny_labeled):
        spec = small_spec()
        cfg = quick_cfg(seed=3)
        model = train_student(tiny_labeled, None, None, spec, cfg)

        data = build_teacher_targets(tiny_labeled)
        plain = TrainingData(features=data.features,
                             pos_targets=data.pos_targets,
                             pos_coeff=np.ones(len(tiny_labeled)))
        params = init_params(spec, _derive_seed(cfg.seed, 11))
        want = train(params, plain, cfg, spec)
        for a, b in zip(model.params.arrays(), want.params.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_teacher_self_paired_matches_sl_data(self, tiny_labeled):
        spec = small_spec()
        cfg = quick_cfg(seed=5, epochs=2)
        a = train_teacher(tiny_labeled, spec, cfg, self_paired=True)
        b, _, _ = train_scheme_model("SL", tiny_labeled, None, spec, cfg)
        for x, y in zip(a.params.arrays(), b.params.arrays()):
            np.testing.assert_array_equal(x, y)


class TestSchemeEvaluation:
    def test_sl_pairs_samples_with_themselves(self, tiny_labeled):
        model = constant_head_model(small_spec(), pos=(10.0, 20.0), bias=(0, 0))
        model.scheme = "SL"
        errs = scheme_position_errors(model, tiny_labeled, None)
        want = np.sqrt(((tiny_labeled.positions -
                         np.array([10.0, 20.0])) ** 2).sum(axis=1))
        np.testing.assert_allclose(errs, want, rtol=1e-9)

    def test_reference_schemes_need_labeled_set(self, tiny_labeled):
        model = constant_head_model(small_spec(), pos=(0, 0), bias=(0, 0))
        model.scheme = "SLR"
        with pytest.raises(ValueError, match="labeled"):
            scheme_position_errors(model, tiny_labeled, None)

    def test_reference_scheme_uses_nearest_neighbor_features(
            self, tiny_labeled, tiny_unlabeled, rng):
        spec = small_spec()
        model = TrainedModel(params=init_params(spec, seed=9), spec=spec,
                             train_config=TrainConfig(), loss_history=[],
                             scheme="SSLB")
        # unlabeled set lacks positions; rebuild a labeled stand-in
        test_set = Dataset(cirs=tiny_unlabeled.cirs,
                           positions=rng.uniform(0, 40, size=(16, 2)),
                           manifest=dict(tiny_unlabeled.manifest))
        errs = scheme_position_errors(model, test_set, tiny_labeled)
        idx = nearest_reference_indices(test_set.cirs, tiny_labeled.cirs)
        feats = featurize_batch(test_set.cirs, tiny_labeled.cirs[idx])
        from sslpos.neural_net import forward
        pred, _ = forward(model.params, feats)
        want = np.sqrt(((pred - test_set.positions) ** 2).sum(axis=1))
        np.testing.assert_allclose(errs, want, rtol=1e-12)

    def test_unlabeled_test_set_rejected(self, tiny_labeled, tiny_unlabeled):
        model = constant_head_model(small_spec(), pos=(0, 0), bias=(0, 0))
        model.scheme = "SL"
        with pytest.raises(ValueError, match="ground-truth"):
            scheme_position_errors(model, tiny_unlabeled, tiny_labeled)


class TestRunScheme:
    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_end_to_end_smoke(self, scheme, tiny_labeled, tiny_unlabeled):
        unlabeled = tiny_unlabeled if scheme in ("SSLR", "SSLB") else None
        model, report = run_scheme(
            scheme, tiny_labeled, unlabeled, tiny_labeled,
            small_spec(), quick_cfg(epochs=2), config_hash="abc")
        assert model.scheme == scheme
        assert report.scheme == scheme
        assert report.config_hash == "abc"
        assert np.isfinite(report.err_at_90)
        assert report.errors.shape == (len(tiny_labeled),)
        assert report.mean_err == pytest.approx(report.errors.mean())
        assert report.wall_time > 0

    def test_same_seed_reproduces_report(self, tiny_labeled, tiny_unlabeled):
        a = run_scheme("SSLB", tiny_labeled, tiny_unlabeled, tiny_labeled,
                       small_spec(), quick_cfg(seed=2, epochs=2))[1]
        b = run_scheme("SSLB", tiny_labeled, tiny_unlabeled, tiny_labeled,
                       small_spec(), quick_cfg(seed=2, epochs=2))[1]
        np.testing.assert_array_equal(a.errors, b.errors)
