"""Grasp candidate generation and ranking.

Candidates come from horizontal-ish chords between regularly spaced heights
on the two vertical edges of the target's bounding box: each chord is
intersected with the fitted contour, scored for worst-case quality, and kept
when the grasp is executable inside the shelf opening.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .geometry import Aabb2, ContactPair, Contour, PointCloud2
from .wrench import DisturbanceSet, GraspParams, grasp_quality


class EmptyInput(ValueError):
    """Ranking needs at least one candidate."""


@dataclass
class ShelfSpec:
    """Shelf opening: width x height, depth along the aisle, platform height.

    The opening spans y in [0, width] and z in [platform_height,
    platform_height + height] in the robot frame.
    """

    width: float
    height: float
    depth: float
    platform_height: float

    def __post_init__(self):
        for name in ("width", "height", "depth"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.platform_height < 0.0:
            raise ValueError("platform_height must be nonnegative")

    @property
    def z_top(self) -> float:
        return self.platform_height + self.height


SHELF_SPECS = {
    "bottom": ShelfSpec(width=0.91, height=0.42, depth=0.47, platform_height=0.60),
    "center": ShelfSpec(width=0.91, height=0.48, depth=0.56, platform_height=0.83),
    "top": ShelfSpec(width=0.91, height=0.42, depth=0.56, platform_height=1.46),
}


@dataclass
class EffectorGeom:
    """Effector tip approximated by a disk in the shelf plane."""

    radius: float = 0.02
    approach_offset: float = 0.02  # meters from the contact, against the normal

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")
        if self.approach_offset < self.radius:
            raise ValueError("approach_offset below the radius would collide with the item")

    def approach_center(self, contact, normal) -> np.ndarray:
        contact = np.asarray(contact, dtype=float)
        normal = np.asarray(normal, dtype=float)
        return contact - self.approach_offset * normal


@dataclass
class PlannerConfig:
    edge_samples: int = 21
    alpha: float | None = None  # None: 3x median nearest-neighbor spacing
    min_contact_separation: float = 0.005
    disturbance: DisturbanceSet = field(default_factory=DisturbanceSet.default)

    def __post_init__(self):
        if self.edge_samples < 2:
            raise ValueError("edge_samples must be at least 2")


@dataclass
class GraspCandidate:
    pair: ContactPair
    quality: float
    heuristic: float
    reachable: bool
    chord_heights: tuple[float, float]
    normalized_heights: tuple[float, float]


@dataclass
class ChordEval:
    """One evaluated chord, kept for rendering and diagnostics."""

    chord_heights: tuple[float, float]
    pair: ContactPair | None
    quality: float
    reachable: bool
    reason: str  # "ok", "no_intersection", "tangent", "rejected", "unreachable", "saturated"


def center_heuristic(pair: ContactPair, item_box: Aabb2) -> float:
    """Penalty for grasping far from the item's vertical center.

    Contact heights are normalized to [-1, 1] by the box half-height; the
    penalty blows up as either contact approaches the top or bottom face
    (returns +inf when saturated within 1e-9).
    """
    half_h = float(item_box.half_extent[1])
    if half_h <= 0.0:
        return math.inf
    cz = item_box.center[1]
    total = 0.0
    for c in (pair.c_l, pair.c_r):
        nh = (float(c[1]) - cz) / half_h
        if abs(nh) >= 1.0 - 1e-9:
            return math.inf
        total += -math.log1p(-(nh ** 4))
    return total


def is_reachable(
    pair: ContactPair,
    shelf: ShelfSpec,
    ee: EffectorGeom,
    contour: Contour | None = None,
) -> bool:
    """True when both effector disks fit inside the shelf opening at their
    approach poses and stay clear of the target contour."""
    r = ee.radius
    for contact, normal in ((pair.c_l, pair.n_l), (pair.c_r, pair.n_r)):
        c = ee.approach_center(contact, normal)
        if not (r <= c[0] <= shelf.width - r):
            return False
        if not (shelf.platform_height + r <= c[1] <= shelf.z_top - r):
            return False
        if contour is not None:
            if contour.contains_point(c):
                return False
            if contour.distance_to_point(c) < r - 1e-9:
                return False
    return True


def _normalized_heights(pair: ContactPair, box: Aabb2) -> tuple[float, float]:
    half_h = max(float(box.half_extent[1]), 1e-12)
    cz = box.center[1]
    return (
        (float(pair.c_l[1]) - cz) / half_h,
        (float(pair.c_r[1]) - cz) / half_h,
    )


def evaluate_chords(
    cloud: PointCloud2,
    shelf: ShelfSpec,
    ee: EffectorGeom,
    params: GraspParams,
    config: PlannerConfig | None = None,
) -> tuple[Contour, Aabb2, list[ChordEval]]:
    """Fit the contour and score every chord; keeps rejected chords too."""
    config = config or PlannerConfig()
    box = geometry.compute_aabb(cloud.points)
    alpha = config.alpha if config.alpha is not None else geometry.default_alpha(cloud.points)
    contour = geometry.alpha_shape(cloud.points, alpha)

    center = box.center
    half_w = float(box.half_extent[0])
    if half_w <= 1e-9:
        raise geometry.DegenerateInput("target cloud has no horizontal extent")

    heights = np.linspace(box.lo[1], box.hi[1], config.edge_samples)
    evals: list[ChordEval] = []
    for z_l in heights:
        p_l = np.array([box.lo[0], z_l])
        for z_r in heights:
            p_r = np.array([box.hi[0], z_r])
            key = (float(z_l), float(z_r))
            try:
                pair = geometry.contact_from_chord(
                    contour, p_l, p_r, config.min_contact_separation
                )
            except geometry.NoIntersection:
                evals.append(ChordEval(key, None, math.inf, False, "no_intersection"))
                continue
            except geometry.TangentChord:
                evals.append(ChordEval(key, None, math.inf, False, "tangent"))
                continue
            scaled = pair.scaled(center, half_w)
            quality = grasp_quality(scaled, config.disturbance, params)
            if not math.isfinite(quality):
                evals.append(ChordEval(key, pair, math.inf, False, "rejected"))
                continue
            if not is_reachable(pair, shelf, ee, contour):
                evals.append(ChordEval(key, pair, quality, False, "unreachable"))
                continue
            if not math.isfinite(center_heuristic(pair, box)):
                evals.append(ChordEval(key, pair, quality, True, "saturated"))
                continue
            evals.append(ChordEval(key, pair, quality, True, "ok"))
    return contour, box, evals


def plan_grasps(
    cloud: PointCloud2,
    shelf: ShelfSpec,
    ee: EffectorGeom,
    params: GraspParams,
    config: PlannerConfig | None = None,
) -> list[GraspCandidate]:
    """Candidate grasps on the observed target: finite worst-case quality,
    finite center heuristic, executable inside the shelf opening.

    Candidates are ordered by chord enumeration (deterministic); use
    rank_plans for preference ordering.
    """
    contour, box, evals = evaluate_chords(cloud, shelf, ee, params, config)
    out = []
    for ev in evals:
        if ev.reason != "ok":
            continue
        heuristic = center_heuristic(ev.pair, box)
        if not math.isfinite(heuristic):
            continue
        out.append(
            GraspCandidate(
                pair=ev.pair,
                quality=ev.quality,
                heuristic=heuristic,
                reachable=True,
                chord_heights=ev.chord_heights,
                normalized_heights=_normalized_heights(ev.pair, box),
            )
        )
    return out


def rank_plans(entries):
    """Order (candidate, declutter plan) pairs, best first.

    No-op plans outrank any decluttering plan; decluttering plans order by
    cost. Among no-op plans, candidates within 150% of the best quality
    compete on heuristic*quality, the rest on quality alone. Ties break on
    quality, then summed |normalized contact height|, then contact
    coordinates, so equal inputs always rank identically.
    """
    entries = list(entries)
    if not entries:
        raise EmptyInput("no candidate plans to rank")
    best_quality = min(c.quality for c, _ in entries)
    threshold = 1.5 * best_quality

    def key(entry):
        cand, plan = entry
        noop = plan.is_noop
        if cand.quality <= threshold:
            sub = (0, cand.heuristic * cand.quality)
        else:
            sub = (1, cand.quality)
        center_sum = abs(cand.normalized_heights[0]) + abs(cand.normalized_heights[1])
        coords = (
            float(cand.pair.c_l[0]),
            float(cand.pair.c_l[1]),
            float(cand.pair.c_r[0]),
            float(cand.pair.c_r[1]),
        )
        return (
            0 if noop else 1,
            0.0 if noop else plan.cost,
            sub,
            cand.quality,
            center_sum,
            coords,
        )

    return sorted(entries, key=key)
