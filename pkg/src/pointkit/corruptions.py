"""Deterministic point-cloud corruptions and the train-style augmentation.

Every function is a pure function of (cloud, parameters, seed). Randomness
comes exclusively from the SplitMix64 stream in :mod:`pointkit.rng`, with the
draw order documented per function, so independent implementations can
reproduce outputs bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import EmptyInput, EmptyView, InvalidConfig
from .rng import SeededStream

KINDS = ("single_view", "jitter", "rotate", "augment")


@dataclass(frozen=True)
class CorruptionSpec:
    """Parameters for one corruption run.

    theta must lie in (0, pi], except that kind="augment" also accepts
    theta = 0 (the degenerate identity case).
    """

    kind: str
    sigma: float = 0.01
    theta: float = math.pi / 6.0
    fov_deg: float = 60.0
    bins: int = 128
    seed: int = 0
    distance: float = 2.0  # camera distance for single_view

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidConfig(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.sigma < 0.0:
            raise InvalidConfig(f"sigma must be >= 0, got {self.sigma}")
        if self.kind == "augment":
            if not 0.0 <= self.theta <= math.pi:
                raise InvalidConfig(f"theta must be within [0, pi] for augment, got {self.theta}")
        elif not 0.0 < self.theta <= math.pi:
            raise InvalidConfig(f"theta must be within (0, pi], got {self.theta}")
        if not 0.0 < self.fov_deg < 180.0:
            raise InvalidConfig(f"fov_deg must be within (0, 180), got {self.fov_deg}")
        if self.bins < 1:
            raise InvalidConfig(f"bins must be >= 1, got {self.bins}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must fit in u64")
        if self.distance <= 0.0:
            raise InvalidConfig(f"distance must be positive, got {self.distance}")


def jitter(cloud: PointCloud, spec: CorruptionSpec) -> PointCloud:
    """Add N(0, sigma^2) noise to every coordinate; colors untouched.

    Stream order: 3N normals consumed row-major (x, y, z per point).
    """
    if len(cloud) == 0:
        raise EmptyInput("cannot corrupt an empty cloud")
    stream = SeededStream(spec.seed)
    noise = stream.normal(3 * len(cloud)).reshape(-1, 3)
    return cloud.with_points(cloud.points + spec.sigma * noise)


def _euler_xyz(alpha: float, beta: float, gamma: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def rotate(cloud: PointCloud, spec: CorruptionSpec) -> PointCloud:
    """Rotate about the origin by R_z(gamma) R_y(beta) R_x(alpha) with the
    three Euler angles drawn uniformly from (-theta, theta).

    Stream order: 3 uniforms (alpha, beta, gamma).
    """
    if len(cloud) == 0:
        raise EmptyInput("cannot corrupt an empty cloud")
    stream = SeededStream(spec.seed)
    a, b, g = (-spec.theta + 2.0 * spec.theta * u for u in stream.uniform(3))
    rot = _euler_xyz(a, b, g)
    return cloud.with_points(cloud.points @ rot.T)


def _camera_frame(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    forward = -direction  # camera looks back at the origin
    helper = np.array([0.0, 0.0, 1.0]) if abs(forward[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    right = np.cross(helper, forward)
    right = right / np.sqrt(right @ right)
    up = np.cross(forward, right)
    return right, up, forward


def single_view_indices(cloud: PointCloud, spec: CorruptionSpec) -> np.ndarray:
    """Indices (ascending) of the points that survive a single-view cull.

    The camera sits at ``spec.distance`` along a uniformly sampled direction
    (stream order: 2 uniforms, cos(polar) = 1 - 2*u1, azimuth = 2*pi*u2) and
    looks at the origin. Points outside the full FoV cone are dropped; the
    rest are binned by (azimuth, elevation) on a bins x bins grid spanning
    [-pi, pi] x [-pi/2, pi/2] in the camera frame, and within each cell only
    points within delta = 0.01 * (input AABB diagonal) of the minimum camera
    range survive.
    """
    if len(cloud) == 0:
        raise EmptyInput("cannot corrupt an empty cloud")
    stream = SeededStream(spec.seed)
    u = stream.uniform(2)
    cos_t = 1.0 - 2.0 * u[0]
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * u[1]
    direction = np.array([sin_t * math.cos(phi), sin_t * math.sin(phi), cos_t])
    camera = spec.distance * direction
    right, up, forward = _camera_frame(direction)

    rel = cloud.points - camera
    rng_dist = np.sqrt(np.sum(rel * rel, axis=1))
    zc = rel @ forward
    half_fov = math.radians(spec.fov_deg) / 2.0
    with np.errstate(invalid="ignore"):
        in_cone = np.arccos(np.clip(zc / rng_dist, -1.0, 1.0)) <= half_fov
    idx = np.flatnonzero(in_cone)
    if idx.size == 0:
        raise EmptyView("no points inside the field of view")

    az = np.arctan2(rel[idx] @ right, zc[idx])
    el = np.arcsin(np.clip((rel[idx] @ up) / rng_dist[idx], -1.0, 1.0))
    ia = np.clip(((az + math.pi) / (2.0 * math.pi) * spec.bins).astype(np.int64), 0, spec.bins - 1)
    ie = np.clip(((el + math.pi / 2.0) / math.pi * spec.bins).astype(np.int64), 0, spec.bins - 1)
    cells = ia * spec.bins + ie

    aabb = cloud.points.max(axis=0) - cloud.points.min(axis=0)
    delta = 0.01 * math.sqrt(float(aabb @ aabb))
    nearest = np.full(spec.bins * spec.bins, np.inf)
    np.minimum.at(nearest, cells, rng_dist[idx])
    keep = rng_dist[idx] <= nearest[cells] + delta
    kept = idx[keep]
    if kept.size == 0:
        raise EmptyView("depth buffer removed every point")
    return kept


def single_view(cloud: PointCloud, spec: CorruptionSpec) -> PointCloud:
    """Subset of the cloud visible from one random viewpoint (see
    :func:`single_view_indices` for the survivor metadata)."""
    return cloud.take(single_view_indices(cloud, spec))


def augment(
    cloud: PointCloud,
    seed: int,
    theta: float = math.pi / 6.0,
    scale_range: tuple[float, float] = (2.0 / 3.0, 3.0 / 2.0),
    trans_range: float = 0.2,
) -> PointCloud:
    """Train-style augmentation: rotate, then scale, then translate.

    Stream order: 3 uniforms for the Euler angles, 1 for the scale factor in
    [scale_range), 3 for the translation in [-trans_range, trans_range).
    Degenerate parameters (theta=0, scale_range=(1,1), trans_range=0) give
    the identity.
    """
    if len(cloud) == 0:
        raise EmptyInput("cannot corrupt an empty cloud")
    if not 0.0 <= theta <= math.pi:
        raise InvalidConfig(f"theta must be within [0, pi], got {theta}")
    if scale_range[1] < scale_range[0] or scale_range[0] <= 0.0:
        raise InvalidConfig(f"bad scale range {scale_range}")
    if trans_range < 0.0:
        raise InvalidConfig(f"trans_range must be >= 0, got {trans_range}")
    stream = SeededStream(int(seed))
    a, b, g = (-theta + 2.0 * theta * u for u in stream.uniform(3))
    rot = _euler_xyz(a, b, g)
    lo, hi = scale_range
    scale = lo + (hi - lo) * float(stream.uniform(1)[0])
    trans = -trans_range + 2.0 * trans_range * stream.uniform(3)
    return cloud.with_points(scale * (cloud.points @ rot.T) + trans)


def apply_corruption(cloud: PointCloud, spec: CorruptionSpec) -> PointCloud:
    """Dispatch on spec.kind. augment uses spec.theta and its own defaults."""
    if spec.kind == "jitter":
        return jitter(cloud, spec)
    if spec.kind == "rotate":
        return rotate(cloud, spec)
    if spec.kind == "single_view":
        return single_view(cloud, spec)
    return augment(cloud, spec.seed, theta=spec.theta)
