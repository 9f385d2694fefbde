from ..attitude_codec import label_logits
from .base_predictor import BasePredictor, Prediction


class TruthPredictor(BasePredictor):
    """Ground-truth box and logits that reproduce the stored label exactly."""

    name = "truth"

    def __init__(self, logit_floor: float = None):
        self.logit_floor = logit_floor

    def _predict(self, record) -> Prediction:
        v, w = label_logits(record.label, self.logit_floor)
        return Prediction(record.id, record.box, v, w)
