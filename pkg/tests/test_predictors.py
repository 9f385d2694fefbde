import pytest
import numpy as np

from src.attitude_codec import decode_attitude, softmax
from src.predictors import OraclePredictor, TruthPredictor
from src.predictors.base_predictor import BasePredictor, Prediction
from src.predictors.oracle_predictor import oracle_predictor
from src.rotations import angular_distance


@pytest.fixture(scope="module")
def record(small_records):
    return next(r for r in small_records if r.in_frame)


class TestTruthPredictor:
    def test_logits_reproduce_label(self, record):
        prediction = TruthPredictor().predict(record)
        label = record.label
        assert prediction.id == record.id
        assert prediction.box == record.box
        assert softmax(prediction.v) == pytest.approx(label.v_target, abs=1e-9)
        assert softmax(prediction.w, label.omega)[label.omega] == pytest.approx(label.w_target)

    def test_decode_stays_within_label(self, small_book, record):
        prediction = TruthPredictor().predict(record)
        decoded = decode_attitude(prediction.v, prediction.w, small_book, record.label.n)
        assert sorted(decoded.omega) == sorted(record.label.omega)
        assert angular_distance(decoded.q, record.pose.q) <= record.label.alphas.max() + 1e-9


class TestOraclePredictor:
    def test_zero_noise_keeps_ground_truth(self, small_book, record):
        out = oracle_predictor(record, small_book, sigma_att=0.0, sigma_box=0.0, seed=0)
        assert out.box == record.box
        assert angular_distance(out.q_perturbed, record.pose.q) == pytest.approx(0.0, abs=1e-7)

    def test_box_jitter_is_bounded(self, small_book, record):
        out = oracle_predictor(record, small_book, sigma_att=0.0, sigma_box=3.0, seed=5)
        shift = np.abs(out.box.as_array() - record.box.as_array())
        assert np.all(shift <= 3.0)
        assert np.any(shift > 0.0)

    def test_noise_reproducible_per_seed(self, small_book, record):
        a = oracle_predictor(record, small_book, 0.1, 2.0, seed=7)
        b = oracle_predictor(record, small_book, 0.1, 2.0, seed=7)
        c = oracle_predictor(record, small_book, 0.1, 2.0, seed=8)
        assert a.box == b.box
        assert np.array_equal(a.q_perturbed.as_array(), b.q_perturbed.as_array())
        assert a.box != c.box

    def test_negative_sigma_rejected(self, small_book, record):
        with pytest.raises(ValueError):
            oracle_predictor(record, small_book, sigma_att=-0.1, sigma_box=0.0, seed=0)
        with pytest.raises(ValueError):
            OraclePredictor(small_book, sigma_box=-1.0).predict(record)


class TestBasePredictor:
    def test_id_mismatch(self, record):
        class Shifted(BasePredictor):
            def _predict(self, rec):
                return Prediction(rec.id + 1, rec.box, np.zeros(4), np.zeros(4))

        with pytest.raises(ValueError, match=str(record.id)):
            Shifted().predict(record)

    def test_predict_many_keeps_order(self, small_records, caplog):
        records = small_records[:25]
        predictions = TruthPredictor().predict_many(records)
        assert [p.id for p in predictions] == [r.id for r in records]
        assert "100% complete" in caplog.text

    def test_predict_many_empty(self):
        assert TruthPredictor().predict_many([]) == []
