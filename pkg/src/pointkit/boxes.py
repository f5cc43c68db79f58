"""Oriented 6-DoF bounding boxes: text codec, pose conversions, exact IoU.

Corners follow a fixed sign-pattern order over the box's local axes:
(---, --+, -+-, -++, +--, +-+, ++-, +++), i.e. x slowest, z fastest. A corner
is center + R @ (signs * half_extents).

IoU is exact: box A's polyhedron is clipped successively by the six face
half-spaces of box B, and the intersection volume comes from a
divergence-theorem sum over the clipped faces. No sampling.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, InvalidBox, InvalidPose, ParseError

_SIGNS = np.array(
    [
        [-1, -1, -1],
        [-1, -1, 1],
        [-1, 1, -1],
        [-1, 1, 1],
        [1, -1, -1],
        [1, -1, 1],
        [1, 1, -1],
        [1, 1, 1],
    ],
    dtype=np.float64,
)

# vertex indices of the six faces, wound so normals point outward
_FACES = (
    (0, 1, 3, 2),  # -x
    (4, 6, 7, 5),  # +x
    (0, 4, 5, 1),  # -y
    (2, 3, 7, 6),  # +y
    (0, 2, 6, 4),  # -z
    (1, 5, 7, 3),  # +z
)

_MIN_EXTENT = 1e-9
_SHAPE_TOL = 1e-6  # max corner deviation from the fitted parallelepiped


class OrientedBox:
    """8-corner oriented box with derived center, half extents and rotation."""

    __slots__ = ("corners", "center", "half_extents", "rotation")

    def __init__(self, corners, center, half_extents, rotation) -> None:
        self.corners = np.asarray(corners, dtype=np.float64).reshape(8, 3)
        self.center = np.asarray(center, dtype=np.float64).reshape(3)
        self.half_extents = np.asarray(half_extents, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        for a in (self.corners, self.center, self.half_extents, self.rotation):
            a.setflags(write=False)

    @property
    def volume(self) -> float:
        return float(8.0 * self.half_extents[0] * self.half_extents[1] * self.half_extents[2])

    @classmethod
    def from_pose(cls, center, half_extents, rotation) -> "OrientedBox":
        center = np.asarray(center, dtype=np.float64).reshape(3)
        h = np.asarray(half_extents, dtype=np.float64).reshape(3)
        rot = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(center)) or not np.all(np.isfinite(h)) or not np.all(np.isfinite(rot)):
            raise InvalidPose("pose must be finite")
        if np.any(h <= 0.0):
            raise InvalidPose(f"half extents must be positive, got {h.tolist()}")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-6 or np.linalg.det(rot) < 0.0:
            raise InvalidPose("rotation must be orthonormal with determinant +1")
        corners = center + (_SIGNS * h) @ rot.T
        return cls(corners, center, h, rot)

    @classmethod
    def from_corners(cls, corners) -> "OrientedBox":
        c = np.asarray(corners, dtype=np.float64)
        if c.shape != (8, 3) or not np.all(np.isfinite(c)):
            raise InvalidBox(f"corners must be a finite (8, 3) array, got shape {c.shape}")
        center, half_axes = _fit_linear(c)
        h = np.sqrt(np.sum(half_axes * half_axes, axis=0))
        if np.any(h <= _MIN_EXTENT):
            raise InvalidBox(f"degenerate extent {h.tolist()}")
        # parallelepiped test: the least-squares fit must explain every corner
        rebuilt = center + _SIGNS @ half_axes.T
        if np.max(np.abs(rebuilt - c)) > _SHAPE_TOL:
            raise InvalidBox("corners do not form a parallelepiped")
        frame = half_axes / h
        if np.linalg.det(frame) < 0.0:
            raise InvalidBox("corner order encodes a reflection, not a rotation")
        # rectangularity: corner noise within _SHAPE_TOL tilts a fitted axis
        # direction by up to _SHAPE_TOL / h, so the cosine budget scales with
        # the inverse extents instead of being a fixed constant
        for a, b in ((0, 1), (0, 2), (1, 2)):
            budget = 2.0 * _SHAPE_TOL * (1.0 / h[a] + 1.0 / h[b]) + 1e-9
            if abs(float(frame[:, a] @ frame[:, b])) > budget:
                raise InvalidBox("box edges are not mutually orthogonal")
        return cls(c, center, h, _snap_rotation(frame))


def _fit_linear(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares parallelepiped through canonically ordered corners:
    center plus one half-axis column per sign slot (no orthogonality)."""
    center = c.mean(axis=0)
    # average the four parallel edges per axis; each is 2 * h * axis
    ex = (c[4] - c[0]) + (c[5] - c[1]) + (c[6] - c[2]) + (c[7] - c[3])
    ey = (c[2] - c[0]) + (c[3] - c[1]) + (c[6] - c[4]) + (c[7] - c[5])
    ez = (c[1] - c[0]) + (c[3] - c[2]) + (c[5] - c[4]) + (c[7] - c[6])
    half_axes = np.stack([ex, ey, ez], axis=1) / 8.0  # columns = h_a * axis_a
    return center, half_axes


def _snap_rotation(frame: np.ndarray) -> np.ndarray:
    """Nearest rotation to a near-orthonormal frame (polar factor)."""
    uu, _, vv = np.linalg.svd(frame)
    rot = uu @ vv
    if np.linalg.det(rot) < 0.0:
        uu[:, -1] = -uu[:, -1]
        rot = uu @ vv
    return rot


def corners_from_pose(center, half_extents, rotation) -> OrientedBox:
    """Box from pose; corners come out in the canonical sign-pattern order."""
    return OrientedBox.from_pose(center, half_extents, rotation)


def fit_pose_from_corners(corners) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Recover (center, half_extents, rotation) from 8 rectangular corners.

    Canonically ordered corners round-trip exactly; any other ordering of a
    rectangular corner set is re-canonicalized (the recovered pose regenerates
    the same corner set, possibly in a different order).
    """
    c = np.asarray(corners, dtype=np.float64)
    if c.shape != (8, 3) or not np.all(np.isfinite(c)):
        raise InvalidBox(f"corners must be a finite (8, 3) array, got shape {c.shape}")
    try:
        box = OrientedBox.from_corners(c)
        return box.center, box.half_extents, box.rotation
    except InvalidBox:
        pass
    center = c.mean(axis=0)
    diffs = c[1:] - c[0]
    scale = float(np.max(np.abs(diffs))) or 1.0
    edges = None
    for combo in itertools.combinations(range(7), 3):
        trio = diffs[list(combo)]
        dots = [abs(float(trio[a] @ trio[b])) for a, b in ((0, 1), (0, 2), (1, 2))]
        if max(dots) <= 1e-6 * scale * scale:
            edges = trio
            break
    if edges is None:
        raise InvalidBox("corners do not form a rectangular parallelepiped")
    h = np.sqrt(np.sum(edges * edges, axis=1)) / 2.0
    order = np.argsort(-h, kind="stable")  # longest axis first, deterministic
    h = h[order]
    if np.any(h <= _MIN_EXTENT):
        raise InvalidBox(f"degenerate extent {h.tolist()}")
    axes = edges[order] / (2.0 * h[:, None])
    rot = axes.T
    if np.linalg.det(rot) < 0.0:
        rot = rot.copy()
        rot[:, 2] = -rot[:, 2]  # flipping one axis direction keeps the corner set
    rebuilt = center + (_SIGNS * h) @ rot.T
    # corner sets must match as sets; order is free for non-canonical input
    d2 = np.sum((rebuilt[:, None, :] - c[None, :, :]) ** 2, axis=2)
    if np.max(np.min(d2, axis=1)) > _SHAPE_TOL**2 * 64.0:
        raise InvalidBox("corners do not form a rectangular parallelepiped")
    return center, h, rot


_NUM_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")
_WS_RE = re.compile(r"\s*")


class _Scanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        self.pos = _WS_RE.match(self.text, self.pos).end()

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            found = self.text[self.pos] if self.pos < len(self.text) else "end of input"
            raise ParseError(f"expected '{ch}' at position {self.pos}, found {found!r}")
        self.pos += 1

    def number(self) -> float:
        self.skip_ws()
        m = _NUM_RE.match(self.text, self.pos)
        if m is None:
            raise ParseError(f"expected a decimal number at position {self.pos}")
        self.pos = m.end()
        return float(m.group())

    def end(self) -> None:
        self.skip_ws()
        if self.pos != len(self.text):
            raise ParseError(f"trailing characters at position {self.pos}")


def parse_box(text: str) -> OrientedBox:
    """Parse ``[[x1, y1, z1], ..., [x8, y8, z8]]`` into an OrientedBox.

    The grammar is plain decimals (no exponent notation) with commas and
    arbitrary whitespace. Grammar violations raise ParseError; a parseable
    list that is not a rectangular box raises InvalidBox.
    """
    if not isinstance(text, str):
        raise ParseError("box text must be a string")
    sc = _Scanner(text)
    sc.expect("[")
    corners = []
    for i in range(8):
        if i > 0:
            sc.expect(",")
        sc.expect("[")
        triple = [sc.number()]
        for _ in range(2):
            sc.expect(",")
            triple.append(sc.number())
        sc.expect("]")
        corners.append(triple)
    sc.expect("]")
    sc.end()
    return OrientedBox.from_corners(np.asarray(corners))


def format_box(box: OrientedBox) -> str:
    """Serialize corners with 6 fractional digits, no exponent notation."""
    triples = ", ".join(
        "[" + ", ".join(f"{v:.6f}" for v in corner) + "]" for corner in box.corners
    )
    return f"[{triples}]"


def _box_polyhedron(box: OrientedBox) -> list[np.ndarray]:
    corners = box.center + (_SIGNS * box.half_extents) @ box.rotation.T
    return [corners[list(f)] for f in _FACES]


def _halfspaces(box: OrientedBox):
    for axis in range(3):
        n = box.rotation[:, axis]
        base = float(n @ box.center)
        h = float(box.half_extents[axis])
        yield n, base + h
        yield -n, -(base - h)


def _clip_polygon(poly: np.ndarray, dist: np.ndarray, eps: float):
    """Clip one convex polygon to dist <= 0; returns kept loop + crossing points."""
    kept: list[np.ndarray] = []
    crossings: list[np.ndarray] = []
    m = len(poly)
    for a in range(m):
        b = (a + 1) % m
        da, db = dist[a], dist[b]
        a_in, b_in = da <= eps, db <= eps
        if a_in:
            kept.append(poly[a])
        if a_in != b_in:
            t = da / (da - db)
            t = min(max(t, 0.0), 1.0)
            p = poly[a] + t * (poly[b] - poly[a])
            kept.append(p)
            crossings.append(p)
    return kept, crossings


def _dedupe(points: list[np.ndarray], tol: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= tol for q in out):
            out.append(p)
    return out


def _clip_by_halfspace(faces: list[np.ndarray], n: np.ndarray, d: float) -> list[np.ndarray]:
    eps = 1e-12 * max(1.0, abs(d))
    new_faces: list[np.ndarray] = []
    cap_points: list[np.ndarray] = []
    for poly in faces:
        dist = poly @ n - d
        if np.all(dist <= eps):
            new_faces.append(poly)
            continue
        if np.all(dist >= -eps):
            continue
        kept, crossings = _clip_polygon(poly, dist, eps)
        if len(kept) >= 3:
            new_faces.append(np.asarray(kept))
        cap_points.extend(crossings)
    cap = _dedupe(cap_points, 1e-9 * max(1.0, abs(d)))
    if new_faces and len(cap) >= 3:
        # the cap is convex: order its vertices by angle around the plane normal
        centroid = np.mean(cap, axis=0)
        helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        t1 = np.cross(n, helper)
        t1 /= np.sqrt(t1 @ t1)
        t2 = np.cross(n, t1)
        rel = np.asarray(cap) - centroid
        ang = np.arctan2(rel @ t2, rel @ t1)
        ordered = np.asarray(cap)[np.argsort(ang, kind="stable")]
        # wind the cap so its normal points along +n (outward of the kept region)
        span = ordered - ordered[0]
        area = sum(np.cross(span[a], span[a + 1]) for a in range(1, len(ordered) - 1))
        if float(area @ n) < 0.0:
            ordered = ordered[::-1]
        new_faces.append(ordered)
    return new_faces


def _volume(faces: list[np.ndarray]) -> float:
    total = 0.0
    for poly in faces:
        p0 = poly[0]
        for a in range(1, len(poly) - 1):
            total += float(p0 @ np.cross(poly[a], poly[a + 1]))
    return total / 6.0


def intersection_volume(a: OrientedBox, b: OrientedBox) -> float:
    """Exact volume of the intersection polytope of two oriented boxes."""
    faces = _box_polyhedron(a)
    for n, d in _halfspaces(b):
        faces = _clip_by_halfspace(faces, n, d)
        if not faces:
            return 0.0
    return max(_volume(faces), 0.0)


def iou(a: OrientedBox, b: OrientedBox) -> float:
    """Intersection over union, exact up to float rounding, clamped to [0, 1]."""
    inter = intersection_volume(a, b)
    union = a.volume + b.volume - inter
    return min(max(inter / union, 0.0), 1.0)


@dataclass(frozen=True)
class GroundingResult:
    predicted: OrientedBox
    ground_truth: OrientedBox
    iou: float
    hit: bool


def ground(predicted: OrientedBox, ground_truth: OrientedBox, threshold: float = 0.25) -> GroundingResult:
    value = iou(predicted, ground_truth)
    return GroundingResult(predicted, ground_truth, value, value >= threshold)


def reg_accuracy(results, threshold: float = 0.25) -> float:
    """Fraction of (prediction, ground-truth) pairs with IoU >= threshold.

    Entries may be OrientedBox instances or box strings. Predictions that
    fail to parse or validate count as misses; a bad ground-truth box is an
    error, because it invalidates the benchmark rather than the prediction.
    """
    pairs = list(results)
    if not pairs:
        raise EmptyInput("reg_accuracy needs at least one pair")
    hits = 0
    for pred, gt in pairs:
        gt_box = parse_box(gt) if isinstance(gt, str) else gt
        try:
            pred_box = parse_box(pred) if isinstance(pred, str) else pred
        except (ParseError, InvalidBox):
            continue
        if iou(pred_box, gt_box) >= threshold:
            hits += 1
    return hits / len(pairs)
