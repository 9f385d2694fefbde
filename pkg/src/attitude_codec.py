"""Attitude classes: codebook, training targets, losses and decoding.

An attitude is represented by m fixed class quaternions. Training targets
spread probability 1/n over the n classes nearest the true attitude and
give those classes relative weights that shrink with angular distance.
Decoding averages the top-n classes with the predicted weights.
"""

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import log_softmax, softmax as _softmax

from .config import Config
from .errors import DataError, LabelMismatchError
from .logger import setup_logger
from .rng import stream
from .rotations import UnitQuaternion, angular_distances, uniform_quaternion_array, weighted_average

logger = setup_logger()

WEIGHT_RULES = ("literal", "squared")
_HEADER_PREFIX = "# spnkit-codebook"


@dataclass(frozen=True, eq=False)
class AttitudeCodebook:
    quats: np.ndarray  # (m, 4), scalar-first
    seed: int

    def __post_init__(self):
        quats = np.array(self.quats, dtype=float)
        if quats.ndim != 2 or quats.shape[1] != 4:
            raise ValueError(f"Codebook must be an (m, 4) array, got shape {quats.shape}")
        norms = np.linalg.norm(quats, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("Codebook quaternions must be unit-norm")
        quats.flags.writeable = False
        object.__setattr__(self, "quats", quats)

    @property
    def m(self) -> int:
        return self.quats.shape[0]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, index: int) -> UnitQuaternion:
        return UnitQuaternion.from_array(self.quats[index])

    def to_text(self) -> str:
        lines = [f"{_HEADER_PREFIX} m={self.m} seed={self.seed} order=wxyz subgroup=xyzw"]
        for i, (w, x, y, z) in enumerate(self.quats):
            lines.append(f"{i} {w:.17g} {x:.17g} {y:.17g} {z:.17g}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class AttitudeLabel:
    m: int
    omega: np.ndarray  # (n,) class indices, ascending by angular gap
    alphas: np.ndarray  # (n,) angular gaps, rad
    w_target: np.ndarray  # (n,) target weights on omega

    @property
    def n(self) -> int:
        return len(self.omega)

    @property
    def v_target(self) -> np.ndarray:
        v = np.zeros(self.m)
        v[self.omega] = 1.0 / self.n
        return v

    def w_target_full(self) -> np.ndarray:
        w = np.zeros(self.m)
        w[self.omega] = self.w_target
        return w


@dataclass(frozen=True)
class AttitudeConfig:
    m: int = Config.CODEBOOK_M
    n: int = Config.CODEBOOK_N
    lam: float = Config.L2_LAMBDA
    mu: float = Config.LOSS_MU
    weight_rule: str = Config.WEIGHT_RULE

    def __post_init__(self):
        if not (1 <= self.n <= self.m):
            raise ValueError(f"Need 1 <= n <= m, got n={self.n}, m={self.m}")
        if self.lam < 0:
            raise ValueError(f"L2 strength must be non-negative, got {self.lam}")
        if self.mu <= 0:
            raise ValueError(f"Loss mix must be positive, got {self.mu}")
        if self.weight_rule not in WEIGHT_RULES:
            raise ValueError(f"Unknown weight rule '{self.weight_rule}', expected one of {WEIGHT_RULES}")


@dataclass(frozen=True, eq=False)
class LossGradients:
    v: np.ndarray
    w: np.ndarray
    theta_cls: np.ndarray
    theta_reg: np.ndarray


@dataclass(frozen=True, eq=False)
class LossResult:
    l_class: float
    l_reg: float
    l_total: float
    grad_class: LossGradients
    grad_reg: LossGradients
    grad_total: LossGradients


@dataclass(frozen=True, eq=False)
class DecodedAttitude:
    q: UnitQuaternion
    omega: np.ndarray
    gamma: np.ndarray
    confidence: float  # classification mass on omega


def build_codebook(m: int, seed: int) -> AttitudeCodebook:
    if m < 2:
        raise ValueError(f"A codebook needs at least 2 classes, got m={m}")
    book = AttitudeCodebook(uniform_quaternion_array(stream(seed), m), seed)
    logger.info(f"Built codebook with {m} classes (seed {seed})")
    return book


def save_codebook(book: AttitudeCodebook, path: Union[str, Path]) -> None:
    Path(path).write_text(book.to_text())
    logger.info(f"Codebook written to {path}")


def load_codebook(path: Union[str, Path]) -> AttitudeCodebook:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Codebook file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise DataError(f"{path}: missing codebook header")
    try:
        header = dict(item.split("=", 1) for item in lines[0][len(_HEADER_PREFIX):].split())
        m, seed = int(header["m"]), int(header["seed"])
        rows = [line.split() for line in lines[1:] if line.strip()]
        quats = np.array([[float(c) for c in row[1:5]] for row in rows])
        indices = [int(row[0]) for row in rows]
    except (KeyError, ValueError, IndexError) as e:
        raise DataError(f"{path}: malformed codebook: {e}") from e
    if len(rows) != m or indices != list(range(m)):
        raise DataError(f"{path}: header declares {m} classes but found {len(rows)} rows")
    return AttitudeCodebook(quats, seed)


def target_weights(alphas: np.ndarray, rule: str = None) -> np.ndarray:
    """Relative weights of the n nearest classes from their angular gaps.

    ``literal`` scales by alpha / pi^2; ``squared`` by (alpha / pi)^2.
    """
    rule = rule or Config.WEIGHT_RULE
    alphas = np.asarray(alphas, dtype=float)
    if rule == "literal":
        scaled = alphas / math.pi**2
    elif rule == "squared":
        scaled = (alphas / math.pi) ** 2
    else:
        raise ValueError(f"Unknown weight rule '{rule}'")
    return (1.0 - scaled) / (len(alphas) - scaled.sum())


def make_label(book: AttitudeCodebook, q_true: UnitQuaternion, n: int, weight_rule: str = None) -> AttitudeLabel:
    if not (1 <= n <= book.m):
        raise LabelMismatchError(f"Need 1 <= n <= m, got n={n}, m={book.m}")
    distances = angular_distances(book.quats, q_true)
    # Stable sort: equal gaps keep the lower class index first
    omega = np.argsort(distances, kind="stable")[:n]
    alphas = distances[omega]
    return AttitudeLabel(m=book.m, omega=omega, alphas=alphas, w_target=target_weights(alphas, weight_rule))


def softmax(x: np.ndarray, support: Optional[Sequence[int]] = None) -> np.ndarray:
    """Max-shifted softmax, optionally restricted to an index set (zeros elsewhere)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax input must be finite")
    if support is None:
        return _softmax(x)
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ValueError("softmax support must not be empty")
    out = np.zeros_like(x)
    out[support] = _softmax(x[support])
    return out


def top_n(p: np.ndarray, n: int) -> np.ndarray:
    """Indices of the n largest entries, lower index first on ties."""
    return np.argsort(-np.asarray(p), kind="stable")[:n]


def losses(v: np.ndarray, w: np.ndarray, label: AttitudeLabel,
           theta: Tuple[np.ndarray, np.ndarray], cfg: AttitudeConfig) -> LossResult:
    """Classification, weight-regression and total losses with analytic gradients.

    ``theta`` is the (classification, regression) pair of parameter blocks
    that produced v and w; each carries its own L2 penalty.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    theta_cls, theta_reg = (np.asarray(t, dtype=float) for t in theta)
    if v.shape != (cfg.m,) or w.shape != (cfg.m,):
        raise LabelMismatchError(f"Expected logits of length {cfg.m}, got {v.shape} and {w.shape}")
    if label.m != cfg.m or label.n != cfg.n:
        raise LabelMismatchError(
            f"Label is for m={label.m}, n={label.n} but config has m={cfg.m}, n={cfg.n}"
        )

    v_target = label.v_target
    log_p = log_softmax(v)
    l_class = float(-(v_target * log_p).sum() + cfg.lam * (theta_cls**2).sum())

    omega = label.omega
    log_g = log_softmax(w[omega])
    l_reg = float(-(label.w_target * log_g).sum() + cfg.lam * (theta_reg**2).sum())

    # Targets sum to one, so the cross-entropy gradient is prediction minus target
    dv = np.exp(log_p) - v_target
    dw = np.zeros(cfg.m)
    dw[omega] = np.exp(log_g) - label.w_target
    zeros_v, zeros_cls, zeros_reg = np.zeros(cfg.m), np.zeros_like(theta_cls), np.zeros_like(theta_reg)

    grad_class = LossGradients(dv, zeros_v, 2.0 * cfg.lam * theta_cls, zeros_reg)
    grad_reg = LossGradients(zeros_v, dw, zeros_cls, 2.0 * cfg.lam * theta_reg)
    grad_total = LossGradients(dv, cfg.mu * dw, grad_class.theta_cls, cfg.mu * grad_reg.theta_reg)
    return LossResult(
        l_class=l_class,
        l_reg=l_reg,
        l_total=l_class + cfg.mu * l_reg,
        grad_class=grad_class,
        grad_reg=grad_reg,
        grad_total=grad_total,
    )


def decode_attitude(v: np.ndarray, w: np.ndarray, book: AttitudeCodebook, n: int) -> DecodedAttitude:
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != (book.m,) or w.shape != (book.m,):
        raise LabelMismatchError(f"Expected logits of length {book.m}, got {v.shape} and {w.shape}")
    p = softmax(v)
    # Rank on log-probabilities; p underflows to exact zeros for wide logit gaps
    omega = top_n(log_softmax(v), n)
    gamma = _softmax(w[omega])
    q = weighted_average([book[i] for i in omega], gamma)
    return DecodedAttitude(q=q, omega=omega, gamma=gamma, confidence=float(p[omega].sum()))


def label_logits(label: AttitudeLabel, floor: float = None) -> Tuple[np.ndarray, np.ndarray]:
    """Logits whose softmax reproduces the label targets (floor where a target is zero)."""
    floor = Config.ORACLE_LOGIT_FLOOR if floor is None else floor
    v = np.full(label.m, floor)
    v[label.omega] = math.log(1.0 / label.n)
    w = np.full(label.m, floor)
    w[label.omega] = np.log(label.w_target)
    return v, w
