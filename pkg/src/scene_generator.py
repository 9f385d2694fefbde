"""Synthetic scene sampling and ground-truth labeling.

Poses follow the reference dataset recipe: Haar-uniform attitude, a box
center drawn from a wide normal around the image center (redrawn until it
falls inside the frame), and a range drawn from a normal truncated to
[3, 50] m by rejection. Nothing is rendered; each record carries the pose,
its tight box and its attitude label.
"""

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import dotenv_values

from .attitude_codec import AttitudeCodebook, AttitudeLabel, make_label
from .camera_geometry import BoundingBox, PinholeCamera, tight_bbox
from .config import Config
from .errors import DataError, DegenerateBoxError, PointBehindCameraError, SamplingError
from .logger import setup_logger
from .position_solver import ray_direction
from .rng import stream
from .rotations import Pose, UnitQuaternion, uniform_quaternion_array
from .wireframe_model import WireframeModel

logger = setup_logger()

MANIFEST_NAME = "manifest.txt"
RECORDS_NAME = "records.csv"
FORMAT_VERSION = "1"
RECORD_COLUMNS = [
    "id", "qw", "qx", "qy", "qz", "tx", "ty", "tz",
    "b1", "b2", "b3", "b4", "in_frame", "omega", "alphas", "w_target",
]
_MAX_REDRAWS = 1000


@dataclass(frozen=True, eq=False)
class SceneRecord:
    id: int
    pose: Pose
    box: BoundingBox
    in_frame: bool
    label: AttitudeLabel

    @property
    def range(self) -> float:
        return self.pose.range


@dataclass(frozen=True, eq=False)
class GenConfig:
    count: int
    seed: int
    camera: PinholeCamera
    model: WireframeModel
    codebook: AttitudeCodebook
    n: int = Config.CODEBOOK_N
    center_mean: Optional[Tuple[float, float]] = None
    center_spread: Optional[Tuple[float, float]] = None
    center_spread_factor: float = Config.CENTER_SPREAD_FACTOR  # spread in image sizes when center_spread is unset
    range_mean: float = Config.RANGE_MEAN
    range_spread: float = Config.RANGE_SPREAD
    range_bounds: Tuple[float, float] = (Config.RANGE_MIN, Config.RANGE_MAX)
    weight_rule: str = Config.WEIGHT_RULE
    max_draws: int = Config.MAX_DRAWS
    camera_ref: str = "speed"
    model_ref: str = "mock"

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be at least 1, got {self.count}")
        lo, hi = self.range_bounds
        if not (0 < lo < hi):
            raise ValueError(f"Range bounds must satisfy 0 < min < max, got {self.range_bounds}")
        if not (1 <= self.n <= self.codebook.m):
            raise ValueError(f"Need 1 <= n <= m, got n={self.n}, m={self.codebook.m}")
        if self.center_spread_factor <= 0:
            raise ValueError(f"center_spread_factor must be positive, got {self.center_spread_factor}")
        if self.center_mean is None:
            object.__setattr__(self, "center_mean", (self.camera.n_u / 2.0, self.camera.n_v / 2.0))
        if self.center_spread is None:
            f = self.center_spread_factor
            object.__setattr__(self, "center_spread", (f * self.camera.n_u, f * self.camera.n_v))

    def describe(self) -> Dict[str, str]:
        """Settings that determine the generated records, for the manifest and config hash."""
        return {
            "count": str(self.count),
            "seed": str(self.seed),
            "camera": self.camera_ref,
            "model": self.model_ref,
            "n": str(self.n),
            "center_mean": " ".join(f"{c:.17g}" for c in self.center_mean),
            "center_spread": " ".join(f"{c:.17g}" for c in self.center_spread),
            "range_mean": f"{self.range_mean:.17g}",
            "range_spread": f"{self.range_spread:.17g}",
            "range_bounds": " ".join(f"{c:.17g}" for c in self.range_bounds),
            "weight_rule": self.weight_rule,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.describe(), sort_keys=True).encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class Dataset:
    manifest: Dict[str, str]
    records: List[SceneRecord]


def sample_center(cam: PinholeCamera, rng: np.random.Generator, mean: Sequence[float],
                  spread: Sequence[float], max_draws: int) -> Tuple[Tuple[float, float], int]:
    """Box center from the bearing normal, redrawn until inside the frame; also returns draws used."""
    for draw in range(1, max_draws + 1):
        u, v = rng.normal(mean, spread)
        if 0.0 <= u <= cam.n_u and 0.0 <= v <= cam.n_v:
            return (float(u), float(v)), draw
    raise SamplingError(f"No in-frame center after {max_draws} draws; check the bearing spread")


def sample_range(rng: np.random.Generator, mean: float, spread: float,
                 bounds: Tuple[float, float], max_draws: int) -> Tuple[float, int]:
    lo, hi = bounds
    for draw in range(1, max_draws + 1):
        r = rng.normal(mean, spread)
        if lo <= r <= hi:
            return float(r), draw
    raise SamplingError(f"No range inside [{lo}, {hi}] m after {max_draws} draws")


def pose_from_draw(cam: PinholeCamera, q: UnitQuaternion, center: Tuple[float, float], rng_range: float) -> Pose:
    """Place the body origin at the given range on the ray through the given pixel."""
    alpha = np.arctan((center[0] - cam.c_x) / cam.f_x)
    beta = np.arctan((center[1] - cam.c_y) / cam.f_y)
    return Pose(q, rng_range * ray_direction(alpha, beta))


def sample_pose(cfg: GenConfig, draw_index: int, attempt: int = 0) -> Pose:
    """Pose for one draw index; every index (and redraw attempt) has its own stream."""
    rng = stream(cfg.seed, draw_index, attempt)
    q = UnitQuaternion.from_array(uniform_quaternion_array(rng, 1)[0])
    center, _ = sample_center(cfg.camera, rng, cfg.center_mean, cfg.center_spread, cfg.max_draws)
    rng_range, _ = sample_range(rng, cfg.range_mean, cfg.range_spread, cfg.range_bounds, cfg.max_draws)
    return pose_from_draw(cfg.camera, q, center, rng_range)


def make_record(cfg: GenConfig, record_id: int) -> SceneRecord:
    for attempt in range(_MAX_REDRAWS):
        pose = sample_pose(cfg, record_id, attempt)
        try:
            box = tight_bbox(cfg.camera, pose, cfg.model)
        except (PointBehindCameraError, DegenerateBoxError):
            continue
        label = make_label(cfg.codebook, pose.q, cfg.n, cfg.weight_rule)
        return SceneRecord(record_id, pose, box, box.in_frame(cfg.camera), label)
    raise SamplingError(f"Record {record_id}: no valid pose after {_MAX_REDRAWS} redraws")


def _make_records(args) -> List[SceneRecord]:
    cfg, ids = args
    return [make_record(cfg, i) for i in ids]


def generate_records(cfg: GenConfig, jobs: int = 1) -> List[SceneRecord]:
    ids = list(range(cfg.count))
    if jobs <= 1 or cfg.count < 2 * jobs:
        records = []
        step = max(1, cfg.count // 20)
        for i in ids:
            records.append(make_record(cfg, i))
            if cfg.count >= 20 and (i + 1) % step == 0:
                logger.info(f"Generated {int((i + 1) / cfg.count * 100)}% of records")
        return records

    chunks = [ids[k::jobs] for k in range(jobs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_make_records, [(cfg, chunk) for chunk in chunks]))
    by_id = {r.id: r for part in parts for r in part}
    return [by_id[i] for i in ids]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def record_to_row(record: SceneRecord) -> List[str]:
    q, t, b, lab = record.pose.q, record.pose.t, record.box, record.label
    return (
        [str(record.id)]
        + [_fmt(c) for c in (q.w, q.x, q.y, q.z)]
        + [_fmt(c) for c in t]
        + [_fmt(c) for c in (b.b1, b.b2, b.b3, b.b4)]
        + ["1" if record.in_frame else "0"]
        + [";".join(str(int(i)) for i in lab.omega),
           ";".join(_fmt(a) for a in lab.alphas),
           ";".join(_fmt(w) for w in lab.w_target)]
    )


def row_to_record(row: Dict[str, str], m: int) -> SceneRecord:
    q = UnitQuaternion(float(row["qw"]), float(row["qx"]), float(row["qy"]), float(row["qz"]))
    t = np.array([float(row["tx"]), float(row["ty"]), float(row["tz"])])
    box = BoundingBox(float(row["b1"]), float(row["b2"]), float(row["b3"]), float(row["b4"]))
    label = AttitudeLabel(
        m=m,
        omega=np.array([int(i) for i in row["omega"].split(";")]),
        alphas=np.array([float(a) for a in row["alphas"].split(";")]),
        w_target=np.array([float(w) for w in row["w_target"].split(";")]),
    )
    return SceneRecord(int(row["id"]), Pose(q, t), box, row["in_frame"] == "1", label)


def write_dataset(cfg: GenConfig, records: List[SceneRecord], out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / RECORDS_NAME
    with open(records_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for record in records:
            writer.writerow(record_to_row(record))

    manifest = {"format": FORMAT_VERSION, **cfg.describe(), "m": str(cfg.codebook.m),
                "codebook_sha256": cfg.codebook.digest(), "config_sha256": cfg.digest()}
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w") as f:
        for key, value in manifest.items():
            f.write(f'{key}="{value}"\n')
    logger.info(f"Dataset of {len(records)} records written to {out_dir}")
    return manifest_path, records_path


def generate_dataset(cfg: GenConfig, out_dir: Union[str, Path], jobs: int = 1) -> Tuple[Path, Path]:
    logger.info(f"Generating {cfg.count} scenes (seed {cfg.seed}, {jobs} job(s))")
    records = generate_records(cfg, jobs)
    out_of_frame = sum(not r.in_frame for r in records)
    if out_of_frame:
        logger.warning(f"{out_of_frame} of {len(records)} boxes extend past the image border")
    return write_dataset(cfg, records, out_dir)


def load_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    manifest_path, records_path = path / MANIFEST_NAME, path / RECORDS_NAME
    if not manifest_path.is_file() or not records_path.is_file():
        raise FileNotFoundError(f"Dataset directory {path} needs {MANIFEST_NAME} and {RECORDS_NAME}")
    manifest = {k: v for k, v in dotenv_values(manifest_path).items() if v is not None}
    try:
        m = int(manifest["m"])
    except (KeyError, ValueError) as e:
        raise DataError(f"{manifest_path}: missing or invalid class count 'm'") from e

    records = []
    with open(records_path, newline="") as f:
        reader = csv.DictReader(f)
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(row_to_record(row, m))
            except (KeyError, ValueError, TypeError) as e:
                raise DataError(f"{records_path}:{lineno}: {e}") from e
    logger.info(f"Loaded {len(records)} records from {path}")
    return Dataset(manifest, records)


def check_codebook(dataset: Dataset, book: AttitudeCodebook) -> None:
    expected = dataset.manifest.get("codebook_sha256")
    if expected and expected != book.digest():
        raise DataError("Codebook does not match the one the dataset was labeled with")
