import pytest
import numpy as np
from scipy import stats

from src.attitude_codec import build_codebook, make_label
from src.camera_geometry import project_point
from src.errors import DataError, SamplingError
from src.rng import stream
from src.rotations import UnitQuaternion, angular_distance
from src.scene_generator import (
    GenConfig,
    check_codebook,
    generate_dataset,
    generate_records,
    load_dataset,
    pose_from_draw,
    record_to_row,
    sample_center,
    sample_pose,
    sample_range,
)
from src.selftest import haar_angle_cdf


@pytest.fixture
def gen_config(camera, target, small_book):
    def _make(count=20, seed=5, **kwargs):
        return GenConfig(count=count, seed=seed, camera=camera, model=target, codebook=small_book, n=3, **kwargs)
    return _make


class TestSampling:
    def test_pose_from_draw_hits_center(self, camera):
        pose = pose_from_draw(camera, UnitQuaternion.identity(), (1200.0, 300.0), 17.0)
        p = project_point(camera, pose, [0, 0, 0])
        assert (p.u, p.v) == pytest.approx((1200.0, 300.0))
        assert pose.range == pytest.approx(17.0)

    def test_range_rejection(self):
        rng = stream(0, "range")
        ranges = [sample_range(rng, 3.0, 10.0, (3.0, 50.0), 1000)[0] for _ in range(500)]
        assert min(ranges) >= 3.0 and max(ranges) <= 50.0

    def test_range_budget_exhausted(self):
        with pytest.raises(SamplingError):
            sample_range(stream(0), 1000.0, 1e-3, (3.0, 50.0), 5)

    def test_center_budget_exhausted(self, camera):
        with pytest.raises(SamplingError):
            sample_center(camera, stream(0), (1e6, 1e6), (1.0, 1.0), 5)

    def test_center_in_frame(self, camera):
        rng = stream(0, "center")
        for _ in range(200):
            (u, v), draws = sample_center(camera, rng, (960.0, 600.0), (4800.0, 3000.0), 10_000)
            assert 0.0 <= u <= camera.n_u and 0.0 <= v <= camera.n_v
            assert draws >= 1

    def test_sample_pose_streams(self, gen_config, camera):
        cfg = gen_config()
        first = sample_pose(cfg, 4)
        again = sample_pose(cfg, 4)
        redraw = sample_pose(cfg, 4, attempt=1)
        assert np.array_equal(first.t, again.t)
        assert np.array_equal(first.q.as_array(), again.q.as_array())
        assert not np.array_equal(first.t, redraw.t)
        lo, hi = cfg.range_bounds
        assert lo <= first.range <= hi
        origin = project_point(camera, first, [0, 0, 0])
        assert 0.0 <= origin.u <= camera.n_u and 0.0 <= origin.v <= camera.n_v


class TestDistributions:
    def test_center_accept_fraction(self, camera):
        rng = stream(0, "center-rate")
        mean = (camera.n_u / 2.0, camera.n_v / 2.0)
        spread = (2.5 * camera.n_u, 2.5 * camera.n_v)
        draws = sum(sample_center(camera, rng, mean, spread, 10_000)[1] for _ in range(2000))
        # Frame is +-0.2 sigma on each axis around the mean
        expected = (2.0 * stats.norm.cdf(0.2) - 1.0) ** 2
        assert 2000 / draws == pytest.approx(expected, rel=0.1)
        assert 2000 / draws == pytest.approx(0.025, abs=0.003)

    def test_range_matches_truncated_normal(self):
        rng = stream(0, "range-histogram")
        ranges = np.array([sample_range(rng, 3.0, 10.0, (3.0, 50.0), 10_000)[0] for _ in range(10_000)])
        truncated = stats.truncnorm(0.0, (50.0 - 3.0) / 10.0, loc=3.0, scale=10.0)
        edges = truncated.ppf(np.linspace(0.0, 1.0, 11))
        edges[0], edges[-1] = 3.0, 50.0
        observed, _ = np.histogram(ranges, bins=edges)
        assert stats.chisquare(observed, np.full(10, len(ranges) / 10)).pvalue > 0.01

    def test_attitudes_haar_distributed(self, gen_config):
        records = generate_records(gen_config(count=600, seed=9))
        angles = np.array([angular_distance(r.pose.q, UnitQuaternion.identity()) for r in records])
        assert stats.kstest(angles, haar_angle_cdf).pvalue > 0.01


class TestGenerateRecords:
    def test_deterministic(self, gen_config):
        first = [record_to_row(r) for r in generate_records(gen_config())]
        second = [record_to_row(r) for r in generate_records(gen_config())]
        assert first == second

    def test_prefix_stable_across_counts(self, gen_config):
        short = [record_to_row(r) for r in generate_records(gen_config(count=5))]
        long = [record_to_row(r) for r in generate_records(gen_config(count=12))]
        assert long[:5] == short

    def test_parallel_matches_serial(self, gen_config):
        serial = [record_to_row(r) for r in generate_records(gen_config(), jobs=1)]
        parallel = [record_to_row(r) for r in generate_records(gen_config(), jobs=2)]
        assert parallel == serial

    def test_records_are_consistent(self, gen_config, camera, small_book):
        for record in generate_records(gen_config()):
            assert 3.0 <= record.range <= 50.0
            origin = project_point(camera, record.pose, [0, 0, 0])
            assert 0.0 <= origin.u <= camera.n_u and 0.0 <= origin.v <= camera.n_v
            expected = make_label(small_book, record.pose.q, 3)
            assert np.array_equal(record.label.omega, expected.omega)
            assert record.in_frame == record.box.in_frame(camera)

    def test_invalid_config(self, gen_config):
        with pytest.raises(ValueError):
            gen_config(count=0)
        with pytest.raises(ValueError):
            gen_config(range_bounds=(10.0, 5.0))


class TestDatasetFiles:
    def test_round_trip(self, gen_config, small_book, tmp_path):
        cfg = gen_config()
        generate_dataset(cfg, tmp_path)
        dataset = load_dataset(tmp_path)
        assert [record_to_row(r) for r in dataset.records] == [record_to_row(r) for r in generate_records(cfg)]
        assert dataset.manifest["count"] == "20"
        assert dataset.manifest["m"] == str(small_book.m)
        check_codebook(dataset, small_book)

    def test_byte_identical(self, gen_config, tmp_path):
        generate_dataset(gen_config(), tmp_path / "a")
        generate_dataset(gen_config(), tmp_path / "b")
        for name in ("manifest.txt", "records.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_codebook_mismatch(self, gen_config, tmp_path):
        generate_dataset(gen_config(count=3), tmp_path)
        with pytest.raises(DataError):
            check_codebook(load_dataset(tmp_path), build_codebook(64, seed=99))

    def test_malformed_row_names_line(self, gen_config, tmp_path):
        _, records_path = generate_dataset(gen_config(count=3), tmp_path)
        lines = records_path.read_text().splitlines()
        fields = lines[2].split(",")
        fields[1] = "not-a-number"
        lines[2] = ",".join(fields)
        records_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match=":3:"):
            load_dataset(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "absent")
