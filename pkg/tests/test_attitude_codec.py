import math

import pytest
import numpy as np

from src.attitude_codec import (
    AttitudeCodebook,
    AttitudeConfig,
    build_codebook,
    decode_attitude,
    label_logits,
    load_codebook,
    losses,
    make_label,
    save_codebook,
    softmax,
    target_weights,
    top_n,
)
from src.errors import DataError, LabelMismatchError
from src.rng import stream
from src.rotations import UnitQuaternion, angular_distance, uniform_quaternion_array


def about_z(degrees):
    return UnitQuaternion.from_axis_angle([0, 0, 1], math.radians(degrees))


@pytest.fixture(scope="module")
def large_book():
    return build_codebook(1000, seed=7)


class TestCodebook:
    def test_deterministic_for_seed(self):
        assert np.array_equal(build_codebook(50, seed=1).quats, build_codebook(50, seed=1).quats)
        assert not np.array_equal(build_codebook(50, seed=1).quats, build_codebook(50, seed=2).quats)

    def test_smallest_codebook(self):
        assert build_codebook(2, seed=0).m == 2
        with pytest.raises(ValueError):
            build_codebook(1, seed=0)

    def test_entries_distinct(self, large_book):
        dots = np.abs(large_book.quats @ large_book.quats.T)
        np.fill_diagonal(dots, 0.0)
        assert dots.max() < 1.0 - 1e-12

    def test_file_round_trip(self, small_book, tmp_path):
        path = tmp_path / "codebook.txt"
        save_codebook(small_book, path)
        loaded = load_codebook(path)
        assert np.array_equal(loaded.quats, small_book.quats)
        assert loaded.seed == small_book.seed
        assert loaded.digest() == small_book.digest()

    def test_row_count_mismatch(self, small_book, tmp_path):
        path = tmp_path / "codebook.txt"
        lines = small_book.to_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DataError):
            load_codebook(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "codebook.txt"
        path.write_text("0 1 0 0 0\n")
        with pytest.raises(DataError):
            load_codebook(path)


class TestLabels:
    def test_exact_entry_single_class(self, small_book):
        label = make_label(small_book, small_book[17], 1)
        assert list(label.omega) == [17]
        assert label.alphas == pytest.approx([0.0], abs=1e-9)
        assert label.w_target == pytest.approx([1.0])
        assert label.v_target[17] == 1.0

    def test_equidistant_pair(self):
        book = AttitudeCodebook(np.array([UnitQuaternion.identity().as_array(), about_z(20).as_array()]), seed=0)
        label = make_label(book, about_z(10), 2)
        assert label.alphas[0] == pytest.approx(label.alphas[1], abs=1e-12)
        assert label.w_target == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_literal_weights(self):
        weights = target_weights(np.array([0.0, math.pi / 4]), "literal")
        assert weights == pytest.approx([0.52072, 0.47928], abs=1e-5)

    def test_squared_weights(self):
        weights = target_weights(np.array([0.0, math.pi / 4]), "squared")
        assert weights == pytest.approx([1.0 / 1.9375, 0.9375 / 1.9375])

    def test_targets_are_distributions(self, small_book, random_quaternions):
        for q in random_quaternions(20, seed=21):
            label = make_label(small_book, q, 3)
            assert label.v_target.sum() == pytest.approx(1.0)
            assert label.w_target.sum() == pytest.approx(1.0)
            assert np.all(np.diff(label.alphas) >= 0)
            # Nearer classes never weigh less
            assert np.all(np.diff(label.w_target) <= 1e-15)

    def test_n_out_of_range(self, small_book):
        with pytest.raises(LabelMismatchError):
            make_label(small_book, small_book[0], 0)
        with pytest.raises(LabelMismatchError):
            make_label(small_book, small_book[0], small_book.m + 1)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            target_weights(np.array([0.1, 0.2]), "cubic")


class TestSoftmax:
    def test_uniform(self):
        assert softmax(np.zeros(4)) == pytest.approx([0.25] * 4)

    def test_two_values(self):
        assert softmax(np.array([0.0, math.log(3.0)])) == pytest.approx([0.25, 0.75])

    def test_shift_invariant(self):
        x = stream(0, "softmax").normal(size=6)
        assert softmax(x + 1000.0) == pytest.approx(softmax(x), rel=1e-12)

    def test_restricted_support(self):
        p = softmax(np.array([5.0, 0.0, 5.0, 0.0]), support=[1, 3])
        assert p == pytest.approx([0.0, 0.5, 0.0, 0.5])

    def test_empty_support(self):
        with pytest.raises(ValueError):
            softmax(np.zeros(3), support=[])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            softmax(np.array([0.0, np.inf]))

    def test_top_n_ties(self):
        assert list(top_n(np.array([0.2, 0.4, 0.4, 0.0]), 2)) == [1, 2]


class TestLosses:
    def test_minimum_at_targets(self, small_book, random_quaternions):
        cfg = AttitudeConfig(m=small_book.m, n=3, lam=0.0, mu=1.0)
        label = make_label(small_book, random_quaternions(1, seed=22)[0], 3)
        v, w = label_logits(label, floor=-50.0)
        result = losses(v, w, label, (np.zeros(4), np.zeros(4)), cfg)
        assert result.l_class == pytest.approx(math.log(3), rel=1e-9)
        entropy = -float((label.w_target * np.log(label.w_target)).sum())
        assert result.l_reg == pytest.approx(entropy, rel=1e-9)
        assert result.l_total == pytest.approx(result.l_class + result.l_reg)

    def test_l2_penalty(self, small_book):
        cfg = AttitudeConfig(m=small_book.m, n=2, lam=0.1, mu=2.0)
        label = make_label(small_book, small_book[3], 2)
        v, w = label_logits(label, floor=-50.0)
        base = losses(v, w, label, (np.zeros(3), np.zeros(3)), cfg)
        penalized = losses(v, w, label, (np.ones(3), 2 * np.ones(3)), cfg)
        assert penalized.l_class - base.l_class == pytest.approx(0.3)
        assert penalized.l_reg - base.l_reg == pytest.approx(1.2)
        assert penalized.l_total - base.l_total == pytest.approx(0.3 + 2.0 * 1.2)

    def test_gradients_match_finite_differences(self, small_book, random_quaternions):
        cfg = AttitudeConfig(m=small_book.m, n=3, lam=0.05, mu=1.7)
        rng = stream(0, "loss-gradients")
        h = 1e-6
        for q in random_quaternions(5, seed=23):
            label = make_label(small_book, q, 3)
            point = {
                "v": rng.normal(size=cfg.m),
                "w": rng.normal(size=cfg.m),
                "theta_cls": rng.normal(size=6),
                "theta_reg": rng.normal(size=6),
            }

            def total(values):
                return losses(values["v"], values["w"], label,
                              (values["theta_cls"], values["theta_reg"]), cfg).l_total

            grads = losses(point["v"], point["w"], label, (point["theta_cls"], point["theta_reg"]), cfg).grad_total
            for name in point:
                analytic = getattr(grads, name)
                numeric = np.zeros_like(analytic)
                for k in range(len(numeric)):
                    plus = {key: val.copy() for key, val in point.items()}
                    minus = {key: val.copy() for key, val in point.items()}
                    plus[name][k] += h
                    minus[name][k] -= h
                    numeric[k] = (total(plus) - total(minus)) / (2 * h)
                scale = max(np.linalg.norm(analytic), 1e-12)
                assert np.linalg.norm(analytic - numeric) / scale < 1e-5, name

    def test_unused_weights_get_no_gradient(self, small_book):
        cfg = AttitudeConfig(m=small_book.m, n=3, lam=0.0, mu=1.0)
        label = make_label(small_book, small_book[9], 3)
        rng = stream(0, "unused-weights")
        result = losses(rng.normal(size=cfg.m), rng.normal(size=cfg.m), label, (np.zeros(1), np.zeros(1)), cfg)
        outside = np.setdiff1d(np.arange(cfg.m), label.omega)
        assert np.all(result.grad_reg.w[outside] == 0.0)

    def test_dimension_mismatch(self, small_book):
        cfg = AttitudeConfig(m=small_book.m, n=3)
        label = make_label(small_book, small_book[0], 2)
        with pytest.raises(LabelMismatchError):
            losses(np.zeros(cfg.m), np.zeros(cfg.m), label, (np.zeros(1), np.zeros(1)), cfg)
        label = make_label(small_book, small_book[0], 3)
        with pytest.raises(LabelMismatchError):
            losses(np.zeros(10), np.zeros(10), label, (np.zeros(1), np.zeros(1)), cfg)


class TestDecode:
    def test_single_class(self, small_book):
        v = np.zeros(small_book.m)
        v[5] = 10.0
        decoded = decode_attitude(v, np.zeros(small_book.m), small_book, 1)
        assert list(decoded.omega) == [5]
        assert decoded.gamma == pytest.approx([1.0])
        assert angular_distance(decoded.q, small_book[5]) < 1e-7

    def test_equal_pair_gives_midpoint(self):
        book = AttitudeCodebook(np.array([UnitQuaternion.identity().as_array(), about_z(20).as_array()]), seed=0)
        decoded = decode_attitude(np.zeros(2), np.zeros(2), book, 2)
        assert decoded.gamma == pytest.approx([0.5, 0.5])
        assert decoded.confidence == pytest.approx(1.0)
        assert angular_distance(decoded.q, about_z(10)) < 1e-6

    def test_wide_logit_gaps_rank_by_logit(self):
        book = AttitudeCodebook(np.array([UnitQuaternion.identity().as_array(), about_z(20).as_array(),
                                          about_z(40).as_array()]), seed=0)
        decoded = decode_attitude(np.array([-2000.0, -1000.0, 0.0]), np.zeros(3), book, 2)
        assert list(decoded.omega) == [2, 1]
        assert decoded.confidence == pytest.approx(1.0)

    def test_deterministic(self, small_book):
        rng = stream(0, "decode-determinism")
        v, w = rng.normal(size=small_book.m), rng.normal(size=small_book.m)
        first = decode_attitude(v, w, small_book, 3)
        second = decode_attitude(v, w, small_book, 3)
        assert np.array_equal(first.q.as_array(), second.q.as_array())

    def test_oracle_decode_bound(self, large_book):
        truths = uniform_quaternion_array(stream(0, "decode-bound"), 1000)
        decoded_errors, nearest_errors = [], []
        for row in truths:
            q_true = UnitQuaternion.from_array(row)
            label = make_label(large_book, q_true, 5)
            v, w = label_logits(label)
            decoded = decode_attitude(v, w, large_book, 5)
            error = angular_distance(decoded.q, q_true)
            assert error <= label.alphas.max() + 1e-9
            decoded_errors.append(error)
            nearest_errors.append(label.alphas[0])
        # Weighting several classes beats picking the nearest one
        assert np.mean(decoded_errors) < np.mean(nearest_errors)

    def test_quantization_floor(self, large_book):
        truths = uniform_quaternion_array(stream(0, "quantization"), 1000)
        from_labels = [make_label(large_book, UnitQuaternion.from_array(q), 1).alphas[0] for q in truths]
        dots = np.clip(np.abs(truths @ large_book.quats.T), 0.0, 1.0)
        brute_force = 2.0 * np.arccos(dots.max(axis=1))
        assert np.mean(from_labels) == pytest.approx(np.mean(brute_force), rel=0.05)

    def test_length_mismatch(self, small_book):
        with pytest.raises(LabelMismatchError):
            decode_attitude(np.zeros(3), np.zeros(3), small_book, 1)

