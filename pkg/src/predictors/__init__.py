from .base_predictor import BasePredictor, Prediction
from .truth_predictor import TruthPredictor
from .oracle_predictor import OracleOutput, OraclePredictor, oracle_predictor
from .toy_predictor import (
    FeatureVector,
    ToyModel,
    ToyPredictor,
    TrainConfig,
    learning_rate,
    load_toy_model,
    occupancy_grid,
    predict,
    save_toy_model,
    silhouette_features,
    train_toy,
)

__all__ = [
    'BasePredictor',
    'Prediction',
    'TruthPredictor',
    'OracleOutput',
    'OraclePredictor',
    'oracle_predictor',
    'FeatureVector',
    'ToyModel',
    'ToyPredictor',
    'TrainConfig',
    'learning_rate',
    'load_toy_model',
    'occupancy_grid',
    'predict',
    'save_toy_model',
    'silhouette_features',
    'train_toy',
]
