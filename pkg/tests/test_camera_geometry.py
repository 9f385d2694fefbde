import pytest
import numpy as np

from src.camera_geometry import (
    BoundingBox,
    PinholeCamera,
    load_camera,
    project_point,
    project_points,
    projection_jacobian_t,
    resolve_camera,
    save_camera,
    tight_bbox,
)
from src.errors import DegenerateBoxError, ModelFormatError, PointBehindCameraError
from src.rotations import Pose, UnitQuaternion

F_PX = 0.0176 / 5.86e-6


class TestPinholeCamera:
    def test_speed_preset(self, camera):
        assert (camera.n_u, camera.n_v) == (1920, 1200)
        assert camera.f_x == pytest.approx(3003.41, abs=0.01)
        assert (camera.c_x, camera.c_y) == (960.0, 600.0)

    def test_rejects_principal_point_outside_image(self):
        with pytest.raises(ValueError):
            PinholeCamera(n_u=100, n_v=100, f_x=50.0, f_y=50.0, c_x=150.0, c_y=50.0)

    def test_file_round_trip(self, camera, tmp_path):
        path = tmp_path / "camera.env"
        save_camera(camera, path)
        assert load_camera(path) == camera
        assert resolve_camera(str(path)) == camera

    def test_principal_point_defaults_to_center(self, tmp_path):
        path = tmp_path / "camera.env"
        path.write_text("N_u=640\nN_v=480\nf_x_px=500\nf_y_px=510\n")
        cam = load_camera(path)
        assert (cam.c_x, cam.c_y) == (320.0, 240.0)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "camera.env"
        path.write_text("N_u=640\nN_v=480\nf_x_px=500\n")
        with pytest.raises(ModelFormatError):
            load_camera(path)


class TestBoundingBox:
    def test_geometry(self):
        box = BoundingBox(0.0, 3.0, 0.0, 4.0)
        assert box.area == 12.0
        assert box.diagonal == 5.0
        assert box.center == (1.5, 2.0)

    def test_degenerate_box(self):
        with pytest.raises(DegenerateBoxError):
            BoundingBox(5.0, 5.0, 0.0, 4.0)
        with pytest.raises(ValueError):
            BoundingBox(0.0, 4.0, 3.0, 1.0)

    def test_in_frame_flag(self, camera):
        assert BoundingBox(10, 20, 10, 20).in_frame(camera)
        assert not BoundingBox(-5, 20, 10, 20).in_frame(camera)
        assert not BoundingBox(10, 1925, 10, 20).in_frame(camera)


class TestProjection:
    def test_on_axis_point(self, camera):
        p = project_point(camera, Pose(UnitQuaternion.identity(), [0, 0, 10]), [0, 0, 0])
        assert (p.u, p.v, p.w) == (camera.c_x, camera.c_y, 10.0)

    def test_lateral_offset(self, camera):
        p = project_point(camera, Pose(UnitQuaternion.identity(), [0, 0, 10]), [0.1, 0, 0])
        assert p.u - camera.c_x == pytest.approx(30.034, abs=1e-3)

    def test_point_behind_camera(self, camera):
        with pytest.raises(PointBehindCameraError):
            project_point(camera, Pose(UnitQuaternion.identity(), [0, 0, -1]), [0, 0, 0])

    def test_vectorized_matches_single(self, camera, random_quaternions):
        q = random_quaternions(1, seed=2)[0]
        pose = Pose(q, [0.3, -0.2, 12.0])
        X = np.random.default_rng(0).normal(size=(10, 3))
        uv, w = project_points(camera, pose, X)
        for k, x in enumerate(X):
            p = project_point(camera, pose, x)
            assert (p.u, p.v, p.w) == pytest.approx((uv[k, 0], uv[k, 1], w[k]), rel=1e-12)


class TestProjectionJacobian:
    def test_on_axis(self, camera):
        J = projection_jacobian_t(camera, Pose(UnitQuaternion.identity(), [0, 0, 10]), [0, 0, 0])
        assert np.allclose(J, [[camera.f_x / 10, 0, 0], [0, camera.f_y / 10, 0]])

    def test_matches_finite_differences(self, camera, random_quaternions):
        rng = np.random.default_rng(1)
        h = 1e-5
        for q in random_quaternions(20, seed=3):
            t = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(5, 30)])
            X = rng.normal(scale=0.5, size=3)
            J = projection_jacobian_t(camera, Pose(q, t), X)
            numeric = np.zeros((2, 3))
            for k in range(3):
                dt = np.zeros(3)
                dt[k] = h
                plus = project_point(camera, Pose(q, t + dt), X)
                minus = project_point(camera, Pose(q, t - dt), X)
                numeric[:, k] = [(plus.u - minus.u) / (2 * h), (plus.v - minus.v) / (2 * h)]
            assert np.linalg.norm(J - numeric) <= 1e-4 * np.linalg.norm(J)

    def test_first_order_shift(self, camera):
        pose = Pose(UnitQuaternion.identity(), [0, 0, 10])
        delta = 1e-4
        before = project_point(camera, pose, [0, 0, 0])
        after = project_point(camera, Pose(pose.q, [delta, 0, 10]), [0, 0, 0])
        assert after.u - before.u == pytest.approx(camera.f_x / 10 * delta, rel=1e-9)


class TestTightBBox:
    def test_unit_cube_on_axis(self, camera, unit_cube):
        box = tight_bbox(camera, Pose(UnitQuaternion.identity(), [0, 0, 10]), unit_cube)
        # Near face at depth 9.5 m sets the extent
        half_width = F_PX * 0.5 / 9.5
        assert box.center == pytest.approx((camera.c_x, camera.c_y))
        assert box.width / 2 == pytest.approx(half_width)
        assert box.width / 2 == pytest.approx(150.17, rel=0.06)

    def test_lateral_target(self, camera, unit_cube):
        t = np.array([300.0 / F_PX * 200.0, 0.0, 200.0])
        box = tight_bbox(camera, Pose(UnitQuaternion.identity(), t), unit_cube)
        assert box.center[0] == pytest.approx(camera.c_x + 300.0, abs=1.0)

    def test_matches_vertexwise_projection(self, camera, target, random_quaternions):
        pose = Pose(random_quaternions(1, seed=4)[0], [0.5, 0.2, 8.0])
        box = tight_bbox(camera, pose, target)
        points = [project_point(camera, pose, x) for x in target.vertices]
        expected = [min(p.u for p in points), max(p.u for p in points),
                    min(p.v for p in points), max(p.v for p in points)]
        assert box.as_array() == pytest.approx(expected, rel=1e-12)

    def test_paraxial_scaling(self, camera, unit_cube):
        small = unit_cube.scaled(0.01)
        near = tight_bbox(camera, Pose(UnitQuaternion.identity(), [0, 0, 10]), small)
        far = tight_bbox(camera, Pose(UnitQuaternion.identity(), [0, 0, 20]), small)
        assert far.width == pytest.approx(near.width / 2, rel=0.01)

    def test_vertex_permutation_invariant(self, camera, target, random_quaternions):
        from src.wireframe_model import WireframeModel

        pose = Pose(random_quaternions(1, seed=5)[0], [0, 0, 9.0])
        shuffled = WireframeModel("shuffled", target.vertices[::-1])
        expected = tight_bbox(camera, pose, target).as_array()
        assert tight_bbox(camera, pose, shuffled).as_array() == pytest.approx(expected, rel=1e-12)
