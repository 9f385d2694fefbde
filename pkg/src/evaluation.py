"""Per-record pose metrics and range-binned summaries."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .camera_geometry import BoundingBox
from .errors import DataError
from .logger import setup_logger
from .rotations import UnitQuaternion, angular_distance

logger = setup_logger()

METRICS = ("iou", "et_x", "et_y", "et_z", "er_deg")
STATS = ("mean", "median", "p25", "p75")


@dataclass(frozen=True, eq=False)
class EvalRecord:
    id: int
    iou: float
    e_t: np.ndarray  # |t - t_est| per axis, m
    e_r: float  # rad
    range: float  # ground-truth ||t||, m

    def metric_values(self) -> Dict[str, float]:
        return {
            "iou": self.iou,
            "et_x": float(self.e_t[0]),
            "et_y": float(self.e_t[1]),
            "et_z": float(self.e_t[2]),
            "er_deg": math.degrees(self.e_r),
        }


@dataclass(frozen=True)
class BinStats:
    index: int
    count: int
    mean_range: float
    stats: Dict[str, Dict[str, float]]


@dataclass(frozen=True)
class BinnedReport:
    bin_size: int
    bins: Tuple[BinStats, ...]

    @property
    def total(self) -> int:
        return sum(b.count for b in self.bins)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two axis-aligned boxes; 0 when disjoint."""
    inter_w = max(0.0, min(a.b2, b.b2) - max(a.b1, b.b1))
    inter_h = max(0.0, min(a.b4, b.b4) - max(a.b3, b.b3))
    intersection = inter_w * inter_h
    union = a.area + b.area - intersection
    if union <= 0:
        return 0.0
    return intersection / union


def translation_error(t: Sequence[float], t_est: Sequence[float]) -> np.ndarray:
    return np.abs(np.asarray(t, dtype=float) - np.asarray(t_est, dtype=float))


def attitude_error(q: UnitQuaternion, q_est: UnitQuaternion) -> float:
    """2 acos|z_s| for z = q * conj(q_est), radians."""
    return angular_distance(q, q_est)


def describe(values: Sequence[float]) -> Dict[str, float]:
    """Mean, median and quartiles; quartiles interpolate linearly between order statistics."""
    values = np.asarray(values, dtype=float)
    p25, median, p75 = np.percentile(values, [25, 50, 75], method="linear")
    return {"mean": float(values.mean()), "median": float(median), "p25": float(p25), "p75": float(p75)}


def binned_report(records: Sequence[EvalRecord], bin_size: int = 100) -> BinnedReport:
    """Sort by true range and summarize consecutive bins of ``bin_size`` records (last may be short)."""
    if not records:
        raise ValueError("Cannot build a report from zero records")
    if bin_size < 1:
        raise ValueError(f"bin_size must be at least 1, got {bin_size}")

    ordered = sorted(records, key=lambda r: (r.range, r.id))
    bins = []
    for index, start in enumerate(range(0, len(ordered), bin_size)):
        chunk = ordered[start:start + bin_size]
        columns = {name: [r.metric_values()[name] for r in chunk] for name in METRICS}
        bins.append(BinStats(
            index=index,
            count=len(chunk),
            mean_range=float(np.mean([r.range for r in chunk])),
            stats={name: describe(values) for name, values in columns.items()},
        ))
    return BinnedReport(bin_size, tuple(bins))


def summary_report(records: Sequence[EvalRecord]) -> Dict[str, Dict[str, float]]:
    """Statistics of every metric over all records."""
    if not records:
        raise ValueError("Cannot summarize zero records")
    return {name: describe([r.metric_values()[name] for r in records]) for name in METRICS}


def evaluate(truth: Sequence, predictions: Sequence) -> List[EvalRecord]:
    """Pair ground-truth scene records with pose estimates by id, in truth order.

    Both sides must cover exactly the same ids, each once.
    """
    predicted = {}
    for p in predictions:
        if p.id in predicted:
            raise DataError(f"Prediction {p.id} appears more than once")
        predicted[p.id] = p
    truth_ids = {r.id for r in truth}
    for record in truth:
        if record.id not in predicted:
            raise DataError(f"Scene {record.id} has no prediction")
    for p in predictions:
        if p.id not in truth_ids:
            raise DataError(f"Prediction {p.id} has no ground-truth scene")

    results = []
    for record in truth:
        p = predicted[record.id]
        results.append(EvalRecord(
            id=record.id,
            iou=iou(record.box, p.box),
            e_t=translation_error(record.pose.t, p.t),
            e_r=attitude_error(record.pose.q, p.q),
            range=record.range,
        ))
    return results


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_records_csv(records: Sequence[EvalRecord], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "range_m", "iou", "et_x_m", "et_y_m", "et_z_m", "er_deg"])
        for r in records:
            writer.writerow([r.id, _fmt(r.range), _fmt(r.iou)] + [_fmt(e) for e in r.e_t] + [_fmt(math.degrees(r.e_r))])


def write_binned_csv(report: BinnedReport, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bin_index", "mean_range_m"] + [f"{m}_{s}" for m in METRICS for s in STATS] + ["count"])
        for b in report.bins:
            writer.writerow([b.index, _fmt(b.mean_range)]
                            + [_fmt(b.stats[m][s]) for m in METRICS for s in STATS] + [b.count])


def write_summary_csv(summary: Dict[str, Dict[str, float]], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["metric"] + list(STATS))
        for name in METRICS:
            writer.writerow([name] + [_fmt(summary[name][s]) for s in STATS])


def write_reports(records: Sequence[EvalRecord], out_dir: Union[str, Path], bin_size: int = 100) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out_dir / "per_record.csv",
        "binned": out_dir / "binned.csv",
        "summary": out_dir / "summary.csv",
    }
    write_records_csv(records, paths["records"])
    write_binned_csv(binned_report(records, bin_size), paths["binned"])
    summary = summary_report(records)
    write_summary_csv(summary, paths["summary"])
    logger.info(
        f"Evaluated {len(records)} records: mean IoU {summary['iou']['mean']:.4f}, "
        f"mean E_R {summary['er_deg']['mean']:.3f} deg, "
        f"mean E_T [{summary['et_x']['mean']:.4f} {summary['et_y']['mean']:.4f} {summary['et_z']['mean']:.4f}] m"
    )
    return paths
