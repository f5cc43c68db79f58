"""Point-cloud containers and geometry kernels.

Everything here is deterministic and pure: farthest point sampling, kNN
grouping and Chamfer distance resolve distance ties by lowest index, so the
same input produces the same output on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, InvalidCount, InvalidConfig


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class PointCloud:
    """Ordered set of 3D points with optional per-point RGB colors in [0, 1].

    Arrays are stored read-only; every operation returns a new cloud.
    """

    __slots__ = ("points", "colors")

    def __init__(self, points, colors=None) -> None:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidConfig(f"points must be an (N, 3) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidConfig("points must be finite")
        self.points = _as_readonly(pts)
        if colors is None:
            self.colors = None
        else:
            col = np.asarray(colors, dtype=np.float64)
            if col.shape != pts.shape:
                raise InvalidConfig(
                    f"colors must match points shape {pts.shape}, got {col.shape}"
                )
            if not np.all(np.isfinite(col)) or col.min(initial=0.0) < 0.0 or col.max(initial=0.0) > 1.0:
                raise InvalidConfig("colors must be finite and within [0, 1]")
            self.colors = _as_readonly(col)

    def __len__(self) -> int:
        return self.points.shape[0]

    def with_points(self, points: np.ndarray) -> "PointCloud":
        """Same colors, new coordinates. Point count must be unchanged."""
        if points.shape != self.points.shape:
            raise InvalidConfig("with_points must preserve the point count")
        return PointCloud(points, self.colors)

    def take(self, indices: np.ndarray) -> "PointCloud":
        """Subset by index, colors included."""
        idx = np.asarray(indices, dtype=np.int64)
        cols = self.colors[idx] if self.colors is not None else None
        return PointCloud(self.points[idx], cols)


@dataclass(frozen=True)
class SeedSet:
    """Indices selected by fps, in selection order."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.indices)) != len(self.indices):
            raise InvalidConfig("seed indices must be distinct")

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Neighborhood:
    """A seed centroid with its k member indices and centered offsets.

    relative[j] = points[member_indices[j]] - points[centroid_index], exactly.
    Members are ordered by (squared distance, index) with the centroid first.
    """

    centroid_index: int
    member_indices: tuple[int, ...]
    relative: np.ndarray  # (k, 3) float64, read-only

    def __post_init__(self) -> None:
        object.__setattr__(self, "relative", _as_readonly(np.asarray(self.relative, dtype=np.float64)))
        if self.relative.shape != (len(self.member_indices), 3):
            raise InvalidConfig("relative offsets must be one (x, y, z) row per member")
        if self.centroid_index not in self.member_indices:
            raise InvalidConfig("centroid must be among its own members")


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center at the centroid and scale so the farthest point has norm 1.

    A cloud whose points all coincide collapses to the origin.
    """
    if len(cloud) == 0:
        raise EmptyInput("cannot normalize an empty cloud")
    centered = cloud.points - cloud.points.mean(axis=0)
    scale = np.sqrt(np.max(np.sum(centered * centered, axis=1)))
    if scale > 0.0:
        centered = centered / scale
    return PointCloud(centered, cloud.colors)


def fps(cloud: PointCloud, n_s: int, start_index: int = 0) -> SeedSet:
    """Farthest point sampling: greedy maximin selection of n_s seed indices.

    Each pick maximizes the minimum squared distance to the already-selected
    set; ties break toward the lowest index. Deterministic given start_index.
    """
    n = len(cloud)
    if not 1 <= n_s <= n:
        raise InvalidCount(f"n_s must be within [1, {n}], got {n_s}")
    if not 0 <= start_index < n:
        raise InvalidCount(f"start_index must be within [0, {n}), got {start_index}")
    pts = cloud.points
    selected = np.empty(n_s, dtype=np.int64)
    selected[0] = start_index
    # min squared distance to the selected set; -1 marks selected indices so
    # argmax never re-picks them (unselected candidates are always >= 0)
    min_d2 = np.sum((pts - pts[start_index]) ** 2, axis=1)
    min_d2[start_index] = -1.0
    for i in range(1, n_s):
        nxt = int(np.argmax(min_d2))  # first occurrence = lowest index on ties
        selected[i] = nxt
        d2 = np.sum((pts - pts[nxt]) ** 2, axis=1)
        np.minimum(min_d2, d2, out=min_d2, where=min_d2 >= 0.0)
        min_d2[nxt] = -1.0
    return SeedSet(tuple(int(i) for i in selected))


def knn_group(cloud: PointCloud, seeds: SeedSet, k: int) -> list[Neighborhood]:
    """Group the k nearest points (centroid included) around each seed.

    Ties break toward the lowest index. Offsets are centered on the seed, so
    they are invariant to translating the whole cloud.
    """
    n = len(cloud)
    if not 1 <= k <= n:
        raise InvalidCount(f"k must be within [1, {n}], got {k}")
    pts = cloud.points
    out = []
    for c in seeds.indices:
        d2 = np.sum((pts - pts[c]) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")  # stable: equal distances keep index order
        members = [c] + [int(j) for j in order if int(j) != c][: k - 1]
        rel = pts[members] - pts[c]
        out.append(Neighborhood(int(c), tuple(members), rel))
    return out


def chamfer(a: PointCloud, b: PointCloud) -> float:
    """Symmetric Chamfer distance: mean squared nearest-neighbor distance,
    computed in both directions and summed."""
    if len(a) == 0 or len(b) == 0:
        raise EmptyInput("chamfer requires two non-empty clouds")
    return float(_directed_mean_min_sq(a.points, b.points) + _directed_mean_min_sq(b.points, a.points))


def _directed_mean_min_sq(p: np.ndarray, q: np.ndarray, block: int = 512) -> float:
    mins = np.empty(p.shape[0], dtype=np.float64)
    for lo in range(0, p.shape[0], block):
        hi = min(lo + block, p.shape[0])
        d2 = np.sum((p[lo:hi, None, :] - q[None, :, :]) ** 2, axis=2)
        mins[lo:hi] = d2.min(axis=1)
    return float(np.mean(mins))
