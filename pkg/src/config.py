import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv

load_dotenv()  # Load variables from .env file


def _env(name: str, default: str) -> str:
    return os.getenv(f"SPNKIT_{name}", default)


def _env_bool(name: str, default: str) -> bool:
    return _env(name, default).strip().lower() in ("1", "true", "yes", "on")


class Config:
    # Logging
    LOG_LEVEL = _env("LOG_LEVEL", "INFO").upper()
    LOG_FILE = _env("LOG_FILE", "") or None

    # Worker pool size for per-record fan-out
    JOBS = int(_env("JOBS", str(os.cpu_count() or 1)))

    # Attitude classes and losses
    CODEBOOK_M = int(_env("CODEBOOK_M", "1000"))
    CODEBOOK_N = int(_env("CODEBOOK_N", "5"))
    L2_LAMBDA = float(_env("L2_LAMBDA", "1e-4"))
    LOSS_MU = float(_env("LOSS_MU", "1.0"))
    WEIGHT_RULE = _env("WEIGHT_RULE", "literal")

    # Wireframe model
    LC_METHOD = _env("LC_METHOD", "cuboid")

    # Toy training schedule
    LEARNING_RATE = float(_env("LEARNING_RATE", "0.003"))
    LR_DECAY = float(_env("LR_DECAY", "0.95"))
    LR_DECAY_STEPS = int(_env("LR_DECAY_STEPS", "1000"))
    BATCH_SIZE = int(_env("BATCH_SIZE", "16"))
    TRAIN_FRACTION = float(_env("TRAIN_FRACTION", "0.8"))
    GRID = int(_env("GRID", "16"))
    EDGE_SAMPLES = int(_env("EDGE_SAMPLES", "32"))
    ORACLE_LOGIT_FLOOR = float(_env("ORACLE_LOGIT_FLOOR", "-30"))

    # Position solver
    SOLVER_MAX_ITERATIONS = int(_env("SOLVER_MAX_ITERATIONS", "50"))
    SOLVER_STEP_TOL = float(_env("SOLVER_STEP_TOL", "1e-6"))
    SOLVER_RESIDUAL_TOL = float(_env("SOLVER_RESIDUAL_TOL", "1e-3"))
    SOLVER_LAMBDA = float(_env("SOLVER_LAMBDA", "1e-3"))
    SOLVER_LAMBDA_DOWN = float(_env("SOLVER_LAMBDA_DOWN", "0.3"))
    SOLVER_LAMBDA_UP = float(_env("SOLVER_LAMBDA_UP", "10"))
    COMPOSED_BEARING = _env_bool("COMPOSED_BEARING", "false")

    # Scene sampling
    RANGE_MEAN = float(_env("RANGE_MEAN", "3"))
    RANGE_SPREAD = float(_env("RANGE_SPREAD", "10"))
    RANGE_MIN = float(_env("RANGE_MIN", "3"))
    RANGE_MAX = float(_env("RANGE_MAX", "50"))
    CENTER_SPREAD_FACTOR = float(_env("CENTER_SPREAD_FACTOR", "2.5"))
    MAX_DRAWS = int(float(_env("MAX_DRAWS", "1e6")))

    # Dataset presets
    TRAIN_COUNT = int(_env("TRAIN_COUNT", "12000"))
    TEST_COUNT = int(_env("TEST_COUNT", "3000"))

    # Evaluation
    BIN_SIZE = int(_env("BIN_SIZE", "100"))

    @classmethod
    def load_file(cls, path: Optional[Union[str, Path]]) -> Dict[str, str]:
        """Read a dotenv-style config file (keys without the SPNKIT_ prefix).

        Returns an empty mapping when no path is given.
        """
        if not path:
            return {}
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file not found: {path}")
        values = dotenv_values(path)
        return {k.upper().removeprefix("SPNKIT_"): v for k, v in values.items() if v is not None}

    @classmethod
    def resolve(cls, key: str, flag_value: Any, file_values: Mapping[str, str], cast=str) -> Any:
        """Pick a setting with precedence flag > config file > environment/preset."""
        if flag_value is not None:
            return flag_value
        if key in file_values:
            return cast(file_values[key])
        return getattr(cls, key)


if __name__ == "__main__":
    # Test config loading
    print("\nAttitude Settings:")
    print(f"m: {Config.CODEBOOK_M}")
    print(f"n: {Config.CODEBOOK_N}")
    print(f"lambda: {Config.L2_LAMBDA}")

    print("\nSolver Settings:")
    print(f"Max iterations: {Config.SOLVER_MAX_ITERATIONS}")
    print(f"Step tolerance: {Config.SOLVER_STEP_TOL} m")
