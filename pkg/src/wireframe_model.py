"""Target wireframe model: vertices X_i in the body frame plus display edges.

File format, one record per line (``#`` starts a comment)::

    o <name>
    v <x> <y> <z>
    e <i> <j>
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist

from .config import Config
from .errors import ModelFormatError
from .logger import setup_logger

logger = setup_logger()

COPLANAR_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class WireframeModel:
    name: str
    vertices: np.ndarray
    edges: Tuple[Tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ModelFormatError(f"Vertices must be an (N, 3) array, got shape {vertices.shape}")
        if vertices.shape[0] < 4:
            raise ModelFormatError(f"Model needs at least 4 vertices, got {vertices.shape[0]}")
        if not np.all(np.isfinite(vertices)):
            raise ModelFormatError("Model vertices contain non-finite coordinates")
        if np.linalg.matrix_rank(vertices[1:] - vertices[0], tol=COPLANAR_TOL) < 3:
            raise ModelFormatError("Model vertices are coplanar")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        n = vertices.shape[0]
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ModelFormatError(f"Edge ({i}, {j}) references a vertex outside 0..{n - 1}")
        vertices.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)

    @property
    def extents(self) -> np.ndarray:
        return self.vertices.max(axis=0) - self.vertices.min(axis=0)

    def scaled(self, factor: float) -> "WireframeModel":
        return WireframeModel(self.name, self.vertices * factor, self.edges)


def characteristic_length(model: WireframeModel, method: str = None) -> float:
    """L_C: diagonal of the axis-aligned bounding cuboid, or the max pairwise vertex distance."""
    method = method or Config.LC_METHOD
    if method == "cuboid":
        return float(np.linalg.norm(model.extents))
    if method == "pairwise":
        return float(pdist(model.vertices).max())
    raise ValueError(f"Unknown characteristic length method: {method}")


def _box_corners(lo: np.ndarray, hi: np.ndarray) -> List[np.ndarray]:
    return [np.array([x, y, z]) for z in (lo[2], hi[2]) for y in (lo[1], hi[1]) for x in (lo[0], hi[0])]


def _box_edges(offset: int) -> List[Tuple[int, int]]:
    pairs = [(0, 1), (2, 3), (4, 5), (6, 7), (0, 2), (1, 3), (4, 6), (5, 7), (0, 4), (1, 5), (2, 6), (3, 7)]
    return [(i + offset, j + offset) for i, j in pairs]


def mock_target() -> WireframeModel:
    """Box body 0.8 x 0.75 x 0.32 m with a 0.8 x 0.75 m panel 0.05 m behind it.

    The panel is a 0.01 m slab so it contributes eight vertices; four struts
    link the body's rear corners to it.
    """
    body_lo, body_hi = np.array([-0.4, -0.375, -0.16]), np.array([0.4, 0.375, 0.16])
    panel_lo, panel_hi = np.array([-0.4, -0.375, -0.22]), np.array([0.4, 0.375, -0.21])
    vertices = _box_corners(body_lo, body_hi) + _box_corners(panel_lo, panel_hi)
    # Rear body corners are 0-3, front panel corners are 12-15
    struts = [(i, 12 + i) for i in range(4)]
    edges = _box_edges(0) + _box_edges(8) + struts
    return WireframeModel("mock-target", np.array(vertices), tuple(edges))


def save_model(model: WireframeModel, path: Union[str, Path]) -> None:
    with open(path, "w") as f:
        f.write(f"o {model.name}\n")
        for x, y, z in model.vertices:
            f.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for i, j in model.edges:
            f.write(f"e {i} {j}\n")
    logger.info(f"Model '{model.name}' written to {path}")


def load_model(path: Union[str, Path]) -> WireframeModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Model file not found: {path}")

    name = path.stem
    vertices, edges = [], []
    with open(path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *fields = line.split()
            try:
                if tag == "o":
                    name = " ".join(fields)
                elif tag == "v" and len(fields) == 3:
                    vertices.append([float(c) for c in fields])
                elif tag == "e" and len(fields) == 2:
                    edges.append((int(fields[0]), int(fields[1])))
                else:
                    raise ValueError(f"unrecognized record '{line}'")
            except ValueError as e:
                raise ModelFormatError(f"{path}:{lineno}: {e}") from e

    if not vertices:
        raise ModelFormatError(f"{path}: no vertices found")
    try:
        model = WireframeModel(name, np.array(vertices), tuple(edges))
    except ModelFormatError as e:
        raise ModelFormatError(f"{path}: {e}") from e

    lo, hi = model.vertices.min(axis=0), model.vertices.max(axis=0)
    logger.info(
        f"Loaded model '{model.name}': {len(model.vertices)} vertices, "
        f"bounding cuboid {lo.tolist()} .. {hi.tolist()}"
    )
    return model


def resolve_model(ref: str) -> WireframeModel:
    """Model from a file path, or the built-in target for "mock"."""
    if ref.lower() == "mock":
        return mock_target()
    return load_model(ref)
