"""Rectangular IRS panels in 3D space.

A panel is a ``count_a x count_b`` grid of elements spaced ``spacing`` apart
along two orthonormal base directions, with element (0, 0) at ``anchor``.
Grid indices are 0-based pairs internally; the 1-based linear element index
``k = ka + 1 + kb * count_a`` only appears at the :func:`index_map` boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, NamedTuple

import numpy as np

ORTHONORMAL_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid panel or point geometry."""


class GridIndexError(IndexError):
    """Grid or linear index outside the panel bounds."""


class SingularDistanceError(GeometryError):
    """A point coincides with an element, so the path loss is undefined."""


class Point3(NamedTuple):
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def as_point(value: Any) -> Point3:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise GeometryError(f"expected 3 coordinates, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"non-finite coordinates {arr.tolist()}")
    return Point3(float(arr[0]), float(arr[1]), float(arr[2]))


class GridIndex(NamedTuple):
    ka: int
    kb: int


class AnglePair(NamedTuple):
    omega_a: float
    omega_b: float


def validate_panel(panel: Any) -> list[str]:
    """Return every violated panel invariant; an empty list means valid.

    ``panel`` may be a :class:`PanelGeometry` or any mapping / object with the
    fields ``anchor, dir_a, dir_b, count_a, count_b, spacing``.
    """
    if isinstance(panel, Mapping):
        get = panel.get
    else:
        get = lambda name: getattr(panel, name, None)  # noqa: E731

    problems = []
    vectors = {}
    for name in ("anchor", "dir_a", "dir_b"):
        raw = get(name)
        try:
            vec = np.asarray(raw, dtype=float).reshape(-1)
        except (TypeError, ValueError):
            problems.append(f"{name} is not a numeric vector")
            continue
        if vec.shape != (3,):
            problems.append(f"{name} must have 3 coordinates")
        elif not np.all(np.isfinite(vec)):
            problems.append(f"{name} has non-finite coordinates")
        else:
            vectors[name] = vec

    for name in ("dir_a", "dir_b"):
        if name in vectors and abs(np.linalg.norm(vectors[name]) - 1.0) > ORTHONORMAL_TOL:
            problems.append(f"{name} not unit norm")
    if "dir_a" in vectors and "dir_b" in vectors:
        if abs(float(vectors["dir_a"] @ vectors["dir_b"])) > ORTHONORMAL_TOL:
            problems.append("directions not orthogonal")

    for name in ("count_a", "count_b"):
        count = get(name)
        if not isinstance(count, (int, np.integer)) or isinstance(count, bool) or count < 1:
            problems.append(f"{name} must be a positive integer")
    spacing = get("spacing")
    try:
        ok = spacing is not None and math.isfinite(float(spacing)) and float(spacing) > 0
    except (TypeError, ValueError):
        ok = False
    if not ok:
        problems.append("spacing must be positive")
    return problems


@dataclass(frozen=True)
class PanelGeometry:
    """A rectangular IRS. Rejected at construction if not orthonormal."""

    anchor: Point3
    dir_a: Point3
    dir_b: Point3
    count_a: int
    count_b: int
    spacing: float

    def __post_init__(self):
        problems = validate_panel(self)
        if problems:
            raise GeometryError("invalid panel: " + "; ".join(problems))
        object.__setattr__(self, "anchor", as_point(self.anchor))
        object.__setattr__(self, "dir_a", as_point(self.dir_a))
        object.__setattr__(self, "dir_b", as_point(self.dir_b))
        object.__setattr__(self, "count_a", int(self.count_a))
        object.__setattr__(self, "count_b", int(self.count_b))
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def size(self) -> int:
        """Total element count K = count_a * count_b."""
        return self.count_a * self.count_b

    def grid_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """(ka, kb) arrays for all elements, in linear-index order."""
        k = np.arange(self.size)
        return k % self.count_a, k // self.count_a

    def positions(self) -> np.ndarray:
        """Element coordinates, shape (K, 3), row k-1 holds element k."""
        ka, kb = self.grid_indices()
        offsets = (ka[:, None] * np.asarray(self.dir_a) + kb[:, None] * np.asarray(self.dir_b))
        return np.asarray(self.anchor) + self.spacing * offsets

    def with_counts(self, count_a: int, count_b: int) -> PanelGeometry:
        return PanelGeometry(self.anchor, self.dir_a, self.dir_b, count_a, count_b, self.spacing)


def _check_grid(panel: PanelGeometry, g: GridIndex) -> GridIndex:
    ka, kb = g
    if not (0 <= ka < panel.count_a and 0 <= kb < panel.count_b):
        raise GridIndexError(
            f"grid index ({ka}, {kb}) outside {panel.count_a}x{panel.count_b} panel"
        )
    return GridIndex(int(ka), int(kb))


def index_map(panel: PanelGeometry, g: GridIndex) -> int:
    """1-based linear index of grid element ``g``."""
    ka, kb = _check_grid(panel, g)
    return ka + 1 + kb * panel.count_a


def grid_index(panel: PanelGeometry, k: int) -> GridIndex:
    """Inverse of :func:`index_map`."""
    if not 1 <= k <= panel.size:
        raise GridIndexError(f"linear index {k} outside 1..{panel.size}")
    kb, ka = divmod(k - 1, panel.count_a)
    return GridIndex(ka, kb)


def element_position(panel: PanelGeometry, g: GridIndex) -> Point3:
    ka, kb = _check_grid(panel, g)
    offset = ka * np.asarray(panel.dir_a) + kb * np.asarray(panel.dir_b)
    return as_point(np.asarray(panel.anchor) + panel.spacing * offset)


def boresight_angles(panel: PanelGeometry, direction) -> AnglePair:
    """Angles between ``direction`` and each of the panel's base directions."""
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if not norm > 0:
        raise GeometryError("direction must have nonzero length")
    u = d / norm
    # clip guards arccos against |cos| creeping past 1 by rounding
    cos_a = float(np.clip(u @ np.asarray(panel.dir_a), -1.0, 1.0))
    cos_b = float(np.clip(u @ np.asarray(panel.dir_b), -1.0, 1.0))
    return AnglePair(math.acos(cos_a), math.acos(cos_b))


def distance(p, q) -> float:
    return float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))


def point_to_element_distance(point, panel: PanelGeometry, g: GridIndex) -> float:
    d = distance(point, element_position(panel, g))
    if d == 0.0:
        raise SingularDistanceError(f"point {tuple(point)} coincides with element {tuple(g)}")
    return d


def point_to_panel_distances(point, panel: PanelGeometry) -> np.ndarray:
    """Distances from ``point`` to every element, in linear-index order."""
    d = np.linalg.norm(panel.positions() - np.asarray(point, dtype=float), axis=1)
    if np.any(d == 0.0):
        raise SingularDistanceError(f"point {tuple(point)} coincides with a panel element")
    return d


def pairwise_distances(tx_panel: PanelGeometry, rx_panel: PanelGeometry) -> np.ndarray:
    """Element-to-element distances, shape (K_rx, K_tx)."""
    diff = rx_panel.positions()[:, None, :] - tx_panel.positions()[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if np.any(d == 0.0):
        raise SingularDistanceError("panels have coincident elements")
    return d


def near_square_grid(count: int) -> tuple[int, int]:
    """Factor ``count`` as (a, b) with a the largest divisor not above sqrt(count)."""
    if count < 1:
        raise ValueError(f"element count must be positive, got {count}")
    a = max(d for d in range(1, math.isqrt(count) + 1) if count % d == 0)
    return a, count // a
