from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..camera_geometry import BoundingBox
from ..logger import logger


@dataclass(frozen=True, eq=False)
class Prediction:
    """What a front end hands to the geometric back end for one scene."""

    id: int
    box: BoundingBox
    v: np.ndarray  # classification logits, length m
    w: np.ndarray  # class-weight logits, length m


class BasePredictor(ABC):
    name = "base"

    def predict(self, record) -> Prediction:
        """Box and attitude logits for one scene record.

        Args:
            record: SceneRecord carrying the ground truth the predictor may use

        Returns:
            Prediction for the record's id
        """
        prediction = self._predict(record)
        if prediction.id != record.id:
            raise ValueError(f"Predictor returned id {prediction.id} for scene {record.id}")
        return prediction

    def predict_many(self, records: Sequence) -> List[Prediction]:
        """Predict a batch in input order, logging progress every 5%."""
        total = len(records)
        if total > 0:
            logger.info(f"Running {self.name} predictor on {total} scenes")
        results = []
        for done, record in enumerate(records, start=1):
            results.append(self.predict(record))
            if total >= 20 and done % (total // 20) == 0:
                logger.info(f"Prediction {int(done / total * 100)}% complete")
        return results

    @abstractmethod
    def _predict(self, record) -> Prediction:
        """Internal prediction method implemented by subclasses."""
        pass
