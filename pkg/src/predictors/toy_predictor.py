"""Depth-one stand-in for the attitude branches.

Each scene is reduced to a G x G occupancy grid of its projected wireframe,
normalized to the bounding box. Two affine maps turn the grid into the
classification logits v and the class-weight logits w. Training runs SGD on
the total attitude loss with the step-decay learning-rate schedule; the L2
penalty is applied as an implicit shrink after each step so large penalties
stay stable.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import torch

from ..attitude_codec import AttitudeCodebook, AttitudeConfig, AttitudeLabel, losses
from ..camera_geometry import BoundingBox, PinholeCamera, project_points
from ..config import Config
from ..errors import DataError, DegenerateBoxError, GradientCheckError, LabelMismatchError
from ..logger import logger
from ..rng import stream, unit_hash
from ..rotations import Pose
from ..wireframe_model import WireframeModel
from .base_predictor import BasePredictor, Prediction

_EMPTY = np.zeros(0)
_GRADIENT_TOL = 1e-5
_FD_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray  # G*G occupancy, row-major
    grid: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size != self.grid * self.grid:
            raise ValueError(f"Expected {self.grid * self.grid} features, got {values.size}")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("Features must lie in [0, 1]")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class ToyModel:
    W_cls: np.ndarray
    b_cls: np.ndarray
    W_reg: np.ndarray
    b_reg: np.ndarray
    grid: int
    n: int
    seed: int = 0
    steps: int = 0
    final_loss: float = float("nan")
    loss_trace: Tuple[float, ...] = field(default_factory=tuple)
    val_trace: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        m, d = self.W_cls.shape
        if d != self.grid * self.grid:
            raise ValueError(f"Weights expect {d} features but grid {self.grid} gives {self.grid ** 2}")
        if self.W_reg.shape != (m, d) or self.b_cls.shape != (m,) or self.b_reg.shape != (m,):
            raise ValueError("Inconsistent parameter shapes")
        for name in ("W_cls", "b_cls", "W_reg", "b_reg"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"Parameter {name} is not finite")

    @property
    def m(self) -> int:
        return self.W_cls.shape[0]

    def weight_norm(self) -> float:
        return float(np.sqrt((self.W_cls**2).sum() + (self.W_reg**2).sum()))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    seed: int = 0
    grid: int = Config.GRID
    n: int = Config.CODEBOOK_N
    lam: float = Config.L2_LAMBDA
    mu: float = Config.LOSS_MU
    lr: float = Config.LEARNING_RATE
    lr_decay: float = Config.LR_DECAY
    lr_decay_steps: int = Config.LR_DECAY_STEPS
    batch_size: int = Config.BATCH_SIZE
    train_fraction: float = Config.TRAIN_FRACTION
    edge_samples: int = Config.EDGE_SAMPLES
    gradient_check: bool = True

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.grid < 1:
            raise ValueError("epochs must be >= 0, batch_size and grid >= 1")
        if self.lr < 0 or not (0 < self.lr_decay <= 1) or self.lr_decay_steps < 1:
            raise ValueError("Invalid learning-rate schedule")
        if not (0 < self.train_fraction <= 1):
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")


def learning_rate(step: int, cfg: TrainConfig) -> float:
    """lr * decay ** floor(step / decay_steps)."""
    return cfg.lr * cfg.lr_decay ** (step // cfg.lr_decay_steps)


def occupancy_grid(uv: np.ndarray, box: BoundingBox, grid: int) -> np.ndarray:
    """Mark the cells of a G x G box-normalized grid hit by any point (row-major, flattened).

    Points on or past the box border fall into the border cells.
    """
    if box.area <= 0:
        raise DegenerateBoxError("Cannot rasterize into a zero-area box")
    uv = np.atleast_2d(uv)
    cols = np.clip(np.floor((uv[:, 0] - box.b1) / box.width * grid), 0, grid - 1).astype(int)
    rows = np.clip(np.floor((uv[:, 1] - box.b3) / box.height * grid), 0, grid - 1).astype(int)
    cells = np.zeros((grid, grid))
    cells[rows, cols] = 1.0
    return cells.reshape(-1)


def wireframe_points(model: WireframeModel, edge_samples: int = None) -> np.ndarray:
    """Vertices followed by evenly spaced samples along every edge (endpoints included)."""
    edge_samples = edge_samples or Config.EDGE_SAMPLES
    if not model.edges:
        return model.vertices
    s = np.linspace(0.0, 1.0, edge_samples)[:, None]
    samples = [model.vertices[i] + s * (model.vertices[j] - model.vertices[i]) for i, j in model.edges]
    return np.vstack([model.vertices] + samples)


def silhouette_features(cam: PinholeCamera, pose: Pose, model: WireframeModel, box: BoundingBox,
                        grid: int, edge_samples: int = None) -> FeatureVector:
    uv, _ = project_points(cam, pose, wireframe_points(model, edge_samples))
    return FeatureVector(occupancy_grid(uv, box, grid), grid)


def predict(model: ToyModel, f: Union[FeatureVector, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    values = f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=float)
    if values.shape != (model.W_cls.shape[1],):
        raise DataError(f"Model expects {model.W_cls.shape[1]} features, got shape {values.shape}")
    return model.W_cls @ values + model.b_cls, model.W_reg @ values + model.b_reg


def _batch_loss_and_grads(params: Sequence[np.ndarray], F: np.ndarray, labels: Sequence[AttitudeLabel],
                          acfg: AttitudeConfig) -> Tuple[float, List[np.ndarray]]:
    """Mean total loss over a batch (with the L2 penalty counted once) and its parameter gradients."""
    W_cls, b_cls, W_reg, b_reg = params
    V = F @ W_cls.T + b_cls
    Wl = F @ W_reg.T + b_reg
    G_v = np.zeros_like(V)
    G_w = np.zeros_like(Wl)
    total = 0.0
    for k, label in enumerate(labels):
        result = losses(V[k], Wl[k], label, (_EMPTY, _EMPTY), acfg)
        total += result.l_total
        G_v[k] = result.grad_total.v
        G_w[k] = result.grad_total.w
    count = len(labels)
    penalty = acfg.lam * ((W_cls**2).sum() + acfg.mu * (W_reg**2).sum())
    grads = [
        G_v.T @ F / count + 2.0 * acfg.lam * W_cls,
        G_v.mean(axis=0),
        G_w.T @ F / count + 2.0 * acfg.mu * acfg.lam * W_reg,
        G_w.mean(axis=0),
    ]
    return total / count + penalty, grads


def check_training_gradients(params: Sequence[np.ndarray], F: np.ndarray, labels: Sequence[AttitudeLabel],
                             acfg: AttitudeConfig, seed: int = 0, coords_per_block: int = 8) -> Dict[str, float]:
    """Compare analytic parameter gradients with central differences at a perturbed point.

    Returns the relative error per parameter block; raises if any exceeds 1e-5.
    """
    rng = stream(seed, "gradient-check")
    point = [p + 0.01 * rng.standard_normal(p.shape) for p in params]
    _, analytic = _batch_loss_and_grads(point, F, labels, acfg)
    active = np.flatnonzero(F.any(axis=0))
    if active.size == 0:
        active = np.arange(F.shape[1])

    errors = {}
    for b, name in enumerate(("W_cls", "b_cls", "W_reg", "b_reg")):
        p = point[b]
        if p.ndim == 2:
            coords = [(int(rng.integers(p.shape[0])), int(rng.choice(active))) for _ in range(coords_per_block)]
        else:
            coords = [(int(rng.integers(p.shape[0])),) for _ in range(coords_per_block)]
        a_vals, n_vals = [], []
        for c in coords:
            original = p[c]
            p[c] = original + _FD_STEP
            plus, _ = _batch_loss_and_grads(point, F, labels, acfg)
            p[c] = original - _FD_STEP
            minus, _ = _batch_loss_and_grads(point, F, labels, acfg)
            p[c] = original
            a_vals.append(analytic[b][c])
            n_vals.append((plus - minus) / (2.0 * _FD_STEP))
        a_vals, n_vals = np.array(a_vals), np.array(n_vals)
        scale = max(np.linalg.norm(a_vals) + np.linalg.norm(n_vals), 1e-3)
        errors[name] = float(np.linalg.norm(a_vals - n_vals) / scale)

    worst = max(errors, key=errors.get)
    if errors[worst] > _GRADIENT_TOL:
        raise GradientCheckError(f"Gradient check failed for {worst}: relative error {errors[worst]:.3g}")
    return errors


def split_ids(ids: Sequence[int], train_fraction: float) -> Tuple[List[int], List[int]]:
    """Deterministic train/validation split by hashed scene id."""
    train, val = [], []
    for i in ids:
        (train if unit_hash("split", i) < train_fraction else val).append(i)
    return train, val


def train_toy(records: Sequence, book: AttitudeCodebook, cfg: TrainConfig,
              camera: PinholeCamera, wireframe: WireframeModel) -> ToyModel:
    """Fit the linear softmax model on scene records labeled against ``book``."""
    if not records:
        raise DataError("Cannot train on an empty dataset")
    for record in records:
        if record.label.m != book.m or record.label.n != cfg.n:
            raise LabelMismatchError(
                f"Scene {record.id} is labeled for m={record.label.m}, n={record.label.n}; "
                f"training expects m={book.m}, n={cfg.n}"
            )
    acfg = AttitudeConfig(m=book.m, n=cfg.n, lam=cfg.lam, mu=cfg.mu)

    logger.info(f"Extracting {cfg.grid}x{cfg.grid} silhouette features for {len(records)} scenes")
    F = np.array([
        silhouette_features(camera, r.pose, wireframe, r.box, cfg.grid, cfg.edge_samples).values
        for r in records
    ])
    labels = [r.label for r in records]
    position = {r.id: k for k, r in enumerate(records)}
    train_ids, val_ids = split_ids([r.id for r in records], cfg.train_fraction)
    if not train_ids:
        raise DataError("Train/validation split left no training scenes")
    train_idx = np.array([position[i] for i in train_ids])
    val_idx = np.array([position[i] for i in val_ids], dtype=int)
    logger.info(f"Training on {len(train_idx)} scenes, validating on {len(val_idx)}")

    d = cfg.grid * cfg.grid
    params = [
        torch.zeros((book.m, d), dtype=torch.float64, requires_grad=True),
        torch.zeros(book.m, dtype=torch.float64, requires_grad=True),
        torch.zeros((book.m, d), dtype=torch.float64, requires_grad=True),
        torch.zeros(book.m, dtype=torch.float64, requires_grad=True),
    ]

    def as_numpy():
        return [p.detach().numpy() for p in params]

    def split_loss(idx):
        if len(idx) == 0:
            return float("nan")
        loss, _ = _batch_loss_and_grads(as_numpy(), F[idx], [labels[k] for k in idx], acfg)
        return float(loss)

    if cfg.gradient_check:
        micro = train_idx[:5]
        errors = check_training_gradients(as_numpy(), F[micro], [labels[k] for k in micro], acfg, cfg.seed)
        logger.info(f"Gradient self-test passed (worst relative error {max(errors.values()):.2e})")

    optimizer = torch.optim.SGD(params, lr=cfg.lr)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=cfg.lr_decay_steps, gamma=cfg.lr_decay)
    shrink = (2.0 * cfg.lam, 0.0, 2.0 * cfg.mu * cfg.lam, 0.0)

    loss_trace = [split_loss(train_idx)]
    val_trace = [split_loss(val_idx)]
    logger.info(f"Epoch 0: train loss {loss_trace[0]:.6f}")
    steps = 0
    for epoch in range(1, cfg.epochs + 1):
        order = stream(cfg.seed, "epoch", epoch).permutation(train_idx)
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            data_acfg = AttitudeConfig(m=acfg.m, n=acfg.n, lam=0.0, mu=acfg.mu)
            _, grads = _batch_loss_and_grads(as_numpy(), F[batch], [labels[k] for k in batch], data_acfg)
            lr = optimizer.param_groups[0]["lr"]
            for p, g in zip(params, grads):
                p.grad = torch.from_numpy(g)
            optimizer.step()
            with torch.no_grad():
                for p, coeff in zip(params, shrink):
                    if coeff:
                        p.div_(1.0 + lr * coeff)
            scheduler.step()
            steps += 1
        loss_trace.append(split_loss(train_idx))
        val_trace.append(split_loss(val_idx))
        logger.info(f"Epoch {epoch}: train loss {loss_trace[-1]:.6f}, validation loss {val_trace[-1]:.6f}")

    W_cls, b_cls, W_reg, b_reg = (p.copy() for p in as_numpy())
    return ToyModel(W_cls, b_cls, W_reg, b_reg, grid=cfg.grid, n=cfg.n, seed=cfg.seed, steps=steps,
                    final_loss=loss_trace[-1], loss_trace=tuple(loss_trace), val_trace=tuple(val_trace))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_toy_model(model: ToyModel, path: Union[str, Path]) -> None:
    with open(path, "w") as f:
        f.write(f"# spnkit-toy m={model.m} G={model.grid} n={model.n} seed={model.seed} steps={model.steps}\n")
        f.write("final_loss " + _fmt(model.final_loss) + "\n")
        f.write("loss_trace " + " ".join(_fmt(x) for x in model.loss_trace) + "\n")
        f.write("val_trace " + " ".join(_fmt(x) for x in model.val_trace) + "\n")
        for name in ("W_cls", "b_cls", "W_reg", "b_reg"):
            array = np.atleast_2d(getattr(model, name))
            f.write(f"[{name}] {array.shape[0]} {array.shape[1]}\n")
            for row in array:
                f.write(" ".join(_fmt(x) for x in row) + "\n")
    logger.info(f"Toy model written to {path}")


def load_toy_model(path: Union[str, Path]) -> ToyModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Toy model file not found: {path}")
    lines = path.read_text().splitlines()
    try:
        header = dict(item.split("=", 1) for item in lines[0].split()[2:])
        scalars = {}
        arrays = {}
        k = 1
        while k < len(lines):
            line = lines[k]
            if line.startswith("["):
                name, rows, cols = line[1:].replace("]", "").split()
                rows, cols = int(rows), int(cols)
                values = [[float(x) for x in lines[k + 1 + r].split()] for r in range(rows)]
                arrays[name] = np.array(values).reshape(rows, cols)
                k += 1 + rows
                continue
            key, *values = line.split()
            scalars[key] = tuple(float(x) for x in values)
            k += 1
        return ToyModel(
            W_cls=arrays["W_cls"],
            b_cls=arrays["b_cls"].reshape(-1),
            W_reg=arrays["W_reg"],
            b_reg=arrays["b_reg"].reshape(-1),
            grid=int(header["G"]),
            n=int(header["n"]),
            seed=int(header["seed"]),
            steps=int(header["steps"]),
            final_loss=scalars["final_loss"][0],
            loss_trace=scalars.get("loss_trace", ()),
            val_trace=scalars.get("val_trace", ()),
        )
    except (KeyError, ValueError, IndexError) as e:
        raise DataError(f"{path}: malformed toy model file: {e}") from e


class ToyPredictor(BasePredictor):
    """Trained toy model on silhouette features; the box comes from ground truth."""

    name = "toy"

    def __init__(self, model: ToyModel, camera: PinholeCamera, wireframe: WireframeModel,
                 edge_samples: int = None):
        self.model = model
        self.camera = camera
        self.wireframe = wireframe
        self.edge_samples = edge_samples

    def _predict(self, record) -> Prediction:
        features = silhouette_features(self.camera, record.pose, self.wireframe, record.box,
                                       self.model.grid, self.edge_samples)
        v, w = predict(self.model, features)
        return Prediction(record.id, record.box, v, w)
