import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .attitude_codec import AttitudeCodebook, decode_attitude
from .camera_geometry import BoundingBox, PinholeCamera
from .config import Config
from .errors import DataError
from .logger import setup_logger
from .position_solver import SolveReport, SolverConfig, solve_position
from .predictors.base_predictor import BasePredictor
from .rotations import UnitQuaternion
from .wireframe_model import WireframeModel, characteristic_length

logger = setup_logger()

PREDICTION_COLUMNS = [
    "id", "qw", "qx", "qy", "qz", "tx", "ty", "tz",
    "b1", "b2", "b3", "b4", "confidence", "iterations", "residual_px", "converged",
]
SOLVE_COLUMNS = ["id", "tx", "ty", "tz", "iterations", "residual_px", "converged"]


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    """Full pose estimate for one scene, as written to a predictions CSV."""

    id: int
    q: UnitQuaternion
    t: np.ndarray
    box: BoundingBox
    confidence: float = float("nan")
    iterations: int = 0
    residual: float = float("nan")
    converged: bool = False


class PosePipeline:
    """
    Predictor front end followed by attitude decoding and box-constrained position solving.
    """

    def __init__(self, camera: PinholeCamera, model: WireframeModel, book: AttitudeCodebook,
                 predictor: BasePredictor, n: int = None, solver: Optional[SolverConfig] = None,
                 l_c: float = None) -> None:
        self.camera = camera
        self.model = model
        self.book = book
        self.predictor = predictor
        self.n = n or Config.CODEBOOK_N
        self.solver = solver or SolverConfig()
        self.l_c = l_c if l_c is not None else characteristic_length(model, Config.LC_METHOD)
        if not (1 <= self.n <= book.m):
            raise ValueError(f"Need 1 <= n <= m, got n={self.n}, m={book.m}")

    def process_record(self, record) -> PoseEstimate:
        """
        Predict box and logits, decode the attitude, then solve for the position.

        Args:
            record: SceneRecord handed to the predictor.

        Returns:
            PoseEstimate: Estimated attitude, position and solver diagnostics.
        """
        prediction = self.predictor.predict(record)
        decoded = decode_attitude(prediction.v, prediction.w, self.book, self.n)
        report = solve_position(self.camera, self.model, decoded.q, prediction.box, self.l_c, self.solver)
        if not report.converged:
            logger.warning(f"Scene {record.id}: solver stopped after {report.iterations} iterations "
                           f"(residual {report.final_residual:.4g} px)")
        return PoseEstimate(
            id=record.id,
            q=decoded.q,
            t=report.t,
            box=prediction.box,
            confidence=decoded.confidence,
            iterations=report.iterations,
            residual=report.final_residual,
            converged=report.converged,
        )

    def _process_chunk(self, records: Sequence) -> List[PoseEstimate]:
        return [self.process_record(r) for r in records]

    def process_records(self, records: Sequence, jobs: int = 1) -> List[PoseEstimate]:
        """Estimate every record; results come back in input order."""
        logger.info(f"Estimating {len(records)} poses with the {self.predictor.name} predictor ({jobs} job(s))")
        if jobs <= 1 or len(records) < 2 * jobs:
            results = []
            step = max(1, len(records) // 20)
            for done, record in enumerate(records, start=1):
                results.append(self.process_record(record))
                if len(records) >= 20 and done % step == 0:
                    logger.info(f"Pose estimation {int(done / len(records) * 100)}% complete")
            return results

        chunks = [list(records[k::jobs]) for k in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(self._process_chunk, chunks))
        by_id = {e.id: e for part in parts for e in part}
        return [by_id[r.id] for r in records]


def _solve_chunk(args) -> List[Tuple[int, SolveReport]]:
    camera, model, l_c, cfg, items = args
    return [(record.id, solve_position(camera, model, q, record.box, l_c, cfg)) for record, q in items]


def solve_records(camera: PinholeCamera, model: WireframeModel, records: Sequence,
                  attitudes: Optional[Dict[int, UnitQuaternion]] = None, l_c: float = None,
                  cfg: Optional[SolverConfig] = None, jobs: int = 1) -> List[Tuple[int, SolveReport]]:
    """Solve each record's position from its box, with the true attitude or one supplied per id."""
    cfg = cfg or SolverConfig()
    l_c = l_c if l_c is not None else characteristic_length(model, Config.LC_METHOD)
    items = []
    for record in records:
        if attitudes is None:
            items.append((record, record.pose.q))
        elif record.id in attitudes:
            items.append((record, attitudes[record.id]))
        else:
            raise DataError(f"Scene {record.id} has no attitude estimate")

    if jobs <= 1 or len(items) < 2 * jobs:
        return _solve_chunk((camera, model, l_c, cfg, items))
    chunks = [(camera, model, l_c, cfg, items[k::jobs]) for k in range(jobs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_solve_chunk, chunks))
    by_id = dict(pair for part in parts for pair in part)
    return [(record.id, by_id[record.id]) for record in records]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_predictions(estimates: Sequence[PoseEstimate], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PREDICTION_COLUMNS)
        for e in estimates:
            writer.writerow(
                [e.id]
                + [_fmt(c) for c in e.q.as_array()]
                + [_fmt(c) for c in e.t]
                + [_fmt(c) for c in e.box.as_array()]
                + [_fmt(e.confidence), e.iterations, _fmt(e.residual), int(e.converged)]
            )
    logger.info(f"{len(estimates)} predictions written to {path}")


def load_predictions(path: Union[str, Path]) -> List[PoseEstimate]:
    """Read a predictions CSV; only id, q, t and box are required."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Predictions file not found: {path}")
    estimates = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.DictReader(f), start=2):
            try:
                estimates.append(PoseEstimate(
                    id=int(row["id"]),
                    q=UnitQuaternion(*(float(row[k]) for k in ("qw", "qx", "qy", "qz"))),
                    t=np.array([float(row[k]) for k in ("tx", "ty", "tz")]),
                    box=BoundingBox(*(float(row[k]) for k in ("b1", "b2", "b3", "b4"))),
                    confidence=float(row.get("confidence") or "nan"),
                    iterations=int(row.get("iterations") or 0),
                    residual=float(row.get("residual_px") or "nan"),
                    converged=(row.get("converged") or "0") == "1",
                ))
            except (KeyError, ValueError, TypeError) as e:
                raise DataError(f"{path}:{lineno}: {e}") from e
    return estimates


def write_solve_csv(results: Sequence[Tuple[int, SolveReport]], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SOLVE_COLUMNS)
        for record_id, report in results:
            writer.writerow([record_id] + [_fmt(c) for c in report.t]
                            + [report.iterations, _fmt(report.final_residual), int(report.converged)])
    failed = sum(not report.converged for _, report in results)
    if failed:
        logger.warning(f"{failed} of {len(results)} solves did not converge")
    logger.info(f"{len(results)} solutions written to {path}")
