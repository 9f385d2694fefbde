"""Built-in numerical checks run by ``selftest``.

- gradient suite: analytic loss gradients against central differences
- Haar suite: rotation angles of sampled quaternions against the
  (theta - sin theta) / pi distribution of a uniform rotation
"""

import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from scipy.stats import kstest

from .attitude_codec import AttitudeConfig, build_codebook, losses, make_label
from .logger import setup_logger
from .rng import stream
from .rotations import UnitQuaternion, uniform_quaternion_array

logger = setup_logger()

GRADIENT_TOL = 1e-5
FD_STEP = 1e-6
HAAR_TOL = 0.02
_LOSS_NAMES = ("class", "reg", "total")
_BLOCKS = ("v", "w", "theta_cls", "theta_reg")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float  # worst relative gradient error, or KS statistic
    threshold: float

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.3e} (limit {self.threshold:g})"


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a|| + ||n||, 1e-3)."""
    scale = max(float(np.linalg.norm(analytic) + np.linalg.norm(numeric)), 1e-3)
    return float(np.linalg.norm(analytic - numeric)) / scale


def numeric_gradient(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences of a vector-valued f; row k is the gradient of output k."""
    x = np.array(x, dtype=float)
    columns = []
    for i in range(x.size):
        original = x[i]
        x[i] = original + h
        plus = np.asarray(f(x), dtype=float)
        x[i] = original - h
        minus = np.asarray(f(x), dtype=float)
        x[i] = original
        columns.append((plus - minus) / (2.0 * h))
    return np.array(columns).reshape(x.size, -1).T


def _loss_value(result, which: str) -> float:
    return {"class": result.l_class, "reg": result.l_reg, "total": result.l_total}[which]


def _grad_block(result, which: str, block: str) -> np.ndarray:
    grads = {"class": result.grad_class, "reg": result.grad_reg, "total": result.grad_total}[which]
    return getattr(grads, block)


def gradient_suite(instances: int = 100, m: int = 64, n: int = 3, theta_size: int = 8,
                   seed: int = 0) -> CheckResult:
    """Every loss gradient against central differences on random instances."""
    book = build_codebook(m, seed)
    worst = 0.0
    for k in range(instances):
        rng = stream(seed, "gradient-suite", k)
        q_true = UnitQuaternion.from_array(uniform_quaternion_array(rng, 1)[0])
        label = make_label(book, q_true, n)
        cfg = AttitudeConfig(m=m, n=n, lam=float(rng.uniform(0.01, 0.5)), mu=float(rng.uniform(0.5, 2.0)))
        point = {
            "v": rng.normal(size=m),
            "w": rng.normal(size=m),
            "theta_cls": rng.normal(size=theta_size),
            "theta_reg": rng.normal(size=theta_size),
        }
        result = losses(point["v"], point["w"], label, (point["theta_cls"], point["theta_reg"]), cfg)

        for block in _BLOCKS:
            def f(x, block=block):
                args = dict(point, **{block: x})
                r = losses(args["v"], args["w"], label, (args["theta_cls"], args["theta_reg"]), cfg)
                return [_loss_value(r, which) for which in _LOSS_NAMES]

            numeric = numeric_gradient(f, point[block])
            for row, which in zip(numeric, _LOSS_NAMES):
                worst = max(worst, relative_error(_grad_block(result, which, block), row))
    return CheckResult("gradients", worst <= GRADIENT_TOL, worst, GRADIENT_TOL)


def haar_angle_cdf(theta: np.ndarray) -> np.ndarray:
    """CDF of the rotation angle of a uniformly random rotation."""
    theta = np.clip(theta, 0.0, math.pi)
    return (theta - np.sin(theta)) / math.pi


def haar_suite(samples: int = 10_000, seed: int = 0) -> CheckResult:
    quats = uniform_quaternion_array(stream(seed, "haar-suite"), samples)
    angles = 2.0 * np.arctan2(np.linalg.norm(quats[:, 1:], axis=1), np.abs(quats[:, 0]))
    statistic = float(kstest(angles, haar_angle_cdf).statistic)
    return CheckResult("haar", statistic < HAAR_TOL, statistic, HAAR_TOL)


def run_selftest(seed: int = 0) -> List[CheckResult]:
    results = []
    for suite in (gradient_suite, haar_suite):
        result = suite(seed=seed)
        log = logger.info if result.passed else logger.error
        log(result.summary())
        results.append(result)
    return results
