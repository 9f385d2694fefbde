"""Noise-controlled oracle: ground truth degraded by box jitter and attitude noise.

Isolates decoder and solver behaviour from learning quality.
"""

from dataclasses import dataclass

import numpy as np

from ..attitude_codec import AttitudeCodebook, label_logits, make_label
from ..camera_geometry import BoundingBox
from ..config import Config
from ..rng import stream
from ..rotations import UnitQuaternion, compose
from .base_predictor import BasePredictor, Prediction


@dataclass(frozen=True, eq=False)
class OracleOutput:
    box: BoundingBox
    v: np.ndarray
    w: np.ndarray
    q_perturbed: UnitQuaternion


def oracle_predictor(truth, book: AttitudeCodebook, sigma_att: float, sigma_box: float,
                     seed: int, n: int = None, weight_rule: str = None) -> OracleOutput:
    """Jitter each box edge by U(-sigma_box, sigma_box) px and rotate the attitude by |N(0, sigma_att)| rad.

    The logits are those of the label built for the perturbed attitude.
    """
    if sigma_att < 0 or sigma_box < 0:
        raise ValueError("Noise levels must be non-negative")
    n = n or truth.label.n
    rng = stream(seed, "oracle", truth.id)

    edges = truth.box.as_array() + rng.uniform(-sigma_box, sigma_box, size=4)
    box = BoundingBox(*(float(e) for e in edges))

    axis = rng.normal(size=3)
    while np.linalg.norm(axis) == 0.0:
        axis = rng.normal(size=3)
    angle = abs(rng.normal(0.0, sigma_att)) if sigma_att > 0 else 0.0
    q_pert = compose(truth.pose.q, UnitQuaternion.from_axis_angle(axis, angle))

    v, w = label_logits(make_label(book, q_pert, n, weight_rule), Config.ORACLE_LOGIT_FLOOR)
    return OracleOutput(box, v, w, q_pert)


class OraclePredictor(BasePredictor):
    name = "oracle"

    def __init__(self, book: AttitudeCodebook, sigma_att: float = 0.0, sigma_box: float = 0.0,
                 seed: int = 0, n: int = None, weight_rule: str = None):
        self.book = book
        self.sigma_att = sigma_att
        self.sigma_box = sigma_box
        self.seed = seed
        self.n = n
        self.weight_rule = weight_rule

    def _predict(self, record) -> Prediction:
        out = oracle_predictor(record, self.book, self.sigma_att, self.sigma_box, self.seed,
                               self.n, self.weight_rule)
        return Prediction(record.id, out.box, out.v, out.w)
