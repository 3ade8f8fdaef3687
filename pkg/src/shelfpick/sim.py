"""Deterministic quasi-static 2D shelf simulator.

World model: rigid axis-aligned items resting on a shelf platform, observed
from the aisle. Items move only laterally (pure y translation); pushes
propagate through touching chains and truncate at the walls. All randomness
flows from explicit integer seeds, so identical inputs reproduce identical
trials bit for bit.

The pick loop mirrors the planning stack end to end: observe, enumerate
grasp candidates, attach a declutter plan to each, rank, then either nudge
(and re-observe) or commit to the grasp. Grasp execution is validated in
three stages against the true scene: approach clearance, force closure on
the true contour, and a clear extraction corridor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import geometry
from .declutter import (
    DeclutterPlan,
    DeclutterWeights,
    ItemState,
    SceneState,
    assign_roles,
    plan_declutter,
    slot_boxes,
)
from .geometry import Aabb2, ContactPair, Contour, PointCloud2
from .planner import (
    SHELF_SPECS,
    EffectorGeom,
    GraspCandidate,
    PlannerConfig,
    ShelfSpec,
    plan_grasps,
    rank_plans,
)
from .wrench import DisturbanceSet, GraspParams, grasp_quality

SHELF_ORDER = ("bottom", "center", "top")

# Table of item extent distributions: (min, median, max) per axis, meters,
# and weight in kg.
ITEM_EXTENT_X = (0.06, 0.14, 0.29)
ITEM_EXTENT_Y = (0.14, 0.23, 0.41)
ITEM_EXTENT_Z = (0.12, 0.24, 0.41)
ITEM_WEIGHT = (0.900, 1.825, 3.098)

SCENE_SCHEMA = 1


class Unpackable(RuntimeError):
    """Scene generation could not fit the requested clutter on the shelf."""


class Outcome(Enum):
    SUCCESS = "Success"
    GRASP_FAILED = "GraspFailed"
    DECLUTTER_FAILED = "DeclutterFailed"
    INFEASIBLE = "Infeasible"


@dataclass
class NoiseConfig:
    """Observation corruption: per-point Gaussian jitter plus dropout."""

    point_sigma: float = 0.0
    dropout_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.point_sigma < 0.0:
            raise ValueError("point_sigma must be nonnegative")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must be in [0, 1]")


@dataclass
class ClutterParams:
    """Clutter layout distribution knobs (meters)."""

    align_prob: float = 0.35
    wall_gap: tuple[float, float] = (0.03, 0.09)
    neighbor_gap: tuple[float, float] = (0.002, 0.025)
    free_margin: float = 0.03

    def __post_init__(self):
        if not 0.0 <= self.align_prob <= 1.0:
            raise ValueError("align_prob must be in [0, 1]")
        for lo, hi in (self.wall_gap, self.neighbor_gap):
            if not 0.0 <= lo <= hi:
                raise ValueError("gap ranges must satisfy 0 <= lo <= hi")


@dataclass
class NudgeCommand:
    """One insert-push-retract primitive."""

    side: str  # which gap the effector inserts into: "left" or "right"
    insertion_z: float
    insertion_depth_fraction: float
    push_target_y: float

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if not 0.0 < self.insertion_depth_fraction <= 1.0:
            raise ValueError("insertion_depth_fraction must be in (0, 1]")


@dataclass
class NudgeStep:
    item: str
    command: NudgeCommand
    positions: dict[str, float]  # all item centers after this nudge


@dataclass
class NudgeResult:
    scene: SceneState
    steps: list[NudgeStep]
    achieved: dict[str, float]


@dataclass
class GraspResult:
    success: bool
    stage: str | None  # failed stage: "approach", "closure" or "extraction"
    quality: float = math.inf


@dataclass
class TrialResult:
    outcome: Outcome
    nudges_executed: int
    retries: int
    log: list[dict]


@dataclass
class Observation:
    """Segmented synthetic point clouds for one look at the scene."""

    item_clouds: dict[str, np.ndarray]
    target: PointCloud2
    adjacent: PointCloud2 | None
    shelf: PointCloud2
    index: int


@dataclass
class PickConfig:
    grasp: GraspParams = field(default_factory=GraspParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    ee: EffectorGeom = field(default_factory=EffectorGeom)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    weights: DeclutterWeights = field(default_factory=DeclutterWeights)
    i_max: int = 3
    declutter_enabled: bool = True
    observe_spacing: float = 0.008
    visibility_threshold: float = 0.01

    def __post_init__(self):
        if self.i_max < 0:
            raise ValueError("i_max must be nonnegative")
        if self.observe_spacing <= 0.0:
            raise ValueError("observe_spacing must be positive")


# ---------------------------------------------------------------------------
# Scene generation


def _pinned_triangular(rng: np.random.Generator, lo: float, med: float, hi: float) -> float:
    # even mixture of two tents peaked at the median pins the median exactly
    if rng.random() < 0.5:
        return float(rng.triangular(lo, med, med))
    return float(rng.triangular(med, med, hi))


def _sample_dims(rng: np.random.Generator) -> tuple[float, float, float, float]:
    dx = _pinned_triangular(rng, *ITEM_EXTENT_X)
    ey = _pinned_triangular(rng, *ITEM_EXTENT_Y)
    ez = _pinned_triangular(rng, *ITEM_EXTENT_Z)
    kg = _pinned_triangular(rng, *ITEM_WEIGHT)
    return dx, ey, ez, kg


def _rest_item(item_id: str, dims, y: float, shelf: ShelfSpec) -> ItemState:
    dx, ey, ez, kg = dims
    return ItemState(
        id=item_id, extent_y=ey, extent_z=ez, depth_x=dx, weight=kg,
        y=y, z=shelf.platform_height + 0.5 * ez,
    )


def generate_scene(
    seed: int,
    shelf_choice: str = "center",
    clutter: bool = True,
    clutter_params: ClutterParams | None = None,
) -> SceneState:
    """Sample a shelf scene; same arguments always yield the same scene.

    Uncluttered scenes hold a single centered target. Cluttered scenes hold
    left/target/right items with occluding gaps; with probability
    ``align_prob`` the cluster is aligned against a wall and the aligning
    non-target item dropped, so the wall provides one of the occlusions.
    Raises Unpackable when 100 attempts cannot fit the layout.
    """
    if shelf_choice not in SHELF_SPECS:
        raise ValueError(f"shelf_choice must be one of {sorted(SHELF_SPECS)}")
    shelf = SHELF_SPECS[shelf_choice]
    params = clutter_params or ClutterParams()
    rng = np.random.default_rng(
        [abs(int(seed)), SHELF_ORDER.index(shelf_choice), 1 if clutter else 0]
    )
    opening = shelf.height

    for _ in range(100):
        if not clutter:
            dims = _sample_dims(rng)
            if dims[2] > opening - 1e-3 or (shelf.width - dims[1]) * 0.5 < 0.06:
                continue
            target = _rest_item("target", dims, 0.5 * shelf.width, shelf)
            items = [target]
        else:
            dims_l = _sample_dims(rng)
            dims_t = _sample_dims(rng)
            dims_r = _sample_dims(rng)
            if max(dims_l[2], dims_t[2], dims_r[2]) > opening - 1e-3:
                continue
            align = rng.random() < params.align_prob
            g_l = rng.uniform(*params.neighbor_gap)
            g_r = rng.uniform(*params.neighbor_gap)
            if align:
                side = "left" if rng.random() < 0.5 else "right"
                wall_gap = rng.uniform(*params.wall_gap)
                if side == "left":
                    used = wall_gap + dims_t[1] + g_r + dims_r[1]
                    if shelf.width - used < params.free_margin:
                        continue
                    target = _rest_item("target", dims_t, wall_gap + 0.5 * dims_t[1], shelf)
                    right = _rest_item(
                        "right", dims_r, wall_gap + dims_t[1] + g_r + 0.5 * dims_r[1], shelf
                    )
                    items = [target, right]
                else:
                    used = dims_l[1] + g_l + dims_t[1] + wall_gap
                    if shelf.width - used < params.free_margin:
                        continue
                    t_hi = shelf.width - wall_gap
                    target = _rest_item("target", dims_t, t_hi - 0.5 * dims_t[1], shelf)
                    left = _rest_item(
                        "left", dims_l, t_hi - dims_t[1] - g_l - 0.5 * dims_l[1], shelf
                    )
                    items = [left, target]
            else:
                total = dims_l[1] + g_l + dims_t[1] + g_r + dims_r[1]
                span = shelf.width - total - 2.0 * params.free_margin
                if span < 0.0:
                    continue
                left_edge = params.free_margin + rng.uniform(0.0, span)
                left = _rest_item("left", dims_l, left_edge + 0.5 * dims_l[1], shelf)
                t_lo = left_edge + dims_l[1] + g_l
                target = _rest_item("target", dims_t, t_lo + 0.5 * dims_t[1], shelf)
                right = _rest_item(
                    "right", dims_r, t_lo + dims_t[1] + g_r + 0.5 * dims_r[1], shelf
                )
                items = [left, target, right]

        scene = assign_roles(items, "target", target.z, shelf, rng_seed=int(seed))
        try:
            scene.validate()
        except ValueError:
            continue
        return scene
    raise Unpackable(
        f"could not place clutter on the {shelf_choice} shelf after 100 attempts"
    )


# ---------------------------------------------------------------------------
# Scene files


def scene_to_dict(scene: SceneState) -> dict:
    return {
        "schema": SCENE_SCHEMA,
        "shelf": {
            "w": scene.shelf.width,
            "h": scene.shelf.height,
            "d": scene.shelf.depth,
            "platform": scene.shelf.platform_height,
        },
        "items": [
            {
                "id": it.id,
                "extent_yz": [it.extent_y, it.extent_z],
                "depth_x": it.depth_x,
                "weight": it.weight,
                "y": it.y,
                "z": it.z,
            }
            for it in scene.items
        ],
        "target_id": scene.target_id,
        "seed": scene.rng_seed,
    }


def scene_from_dict(data: dict) -> SceneState:
    if not isinstance(data, dict):
        raise ValueError("scene document must be a JSON object")
    known = {"schema", "shelf", "items", "target_id", "seed"}
    for key in data:
        if key not in known:
            raise ValueError(f"unknown scene field {key!r}")
    if data.get("schema") != SCENE_SCHEMA:
        raise ValueError(f"unsupported scene schema {data.get('schema')!r}")
    for key in known:
        if key not in data:
            raise ValueError(f"missing scene field {key!r}")
    shelf_doc = data["shelf"]
    for key in shelf_doc:
        if key not in {"w", "h", "d", "platform"}:
            raise ValueError(f"unknown shelf field {key!r}")
    shelf = ShelfSpec(
        width=float(shelf_doc["w"]),
        height=float(shelf_doc["h"]),
        depth=float(shelf_doc["d"]),
        platform_height=float(shelf_doc["platform"]),
    )
    items = []
    for entry in data["items"]:
        for key in entry:
            if key not in {"id", "extent_yz", "depth_x", "weight", "y", "z"}:
                raise ValueError(f"unknown item field {key!r}")
        items.append(
            ItemState(
                id=str(entry["id"]),
                extent_y=float(entry["extent_yz"][0]),
                extent_z=float(entry["extent_yz"][1]),
                depth_x=float(entry["depth_x"]),
                weight=float(entry["weight"]),
                y=float(entry["y"]),
                z=float(entry["z"]),
            )
        )
    target_id = str(data["target_id"])
    seed = int(data["seed"])
    target = next((it for it in items if it.id == target_id), None)
    if target is None:
        raise ValueError(f"target_id {target_id!r} not among items")
    scene = assign_roles(items, target_id, target.z, shelf, rng_seed=seed)
    scene.validate()
    return scene


def save_scene(scene: SceneState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2, sort_keys=True) + "\n")


def load_scene(path: str | Path) -> SceneState:
    return scene_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Observation


def _grid_counts(length: float, spacing: float) -> int:
    return max(2, int(round(length / spacing)) + 1)


def _side_gap(item: ItemState, scene: SceneState, side: int) -> float:
    """Clearance from an item's side face to the nearest z-overlapping
    obstacle on that side; the walls count as obstacles."""
    box = item.box
    z_lo, z_hi = item.z_interval
    if side < 0:
        gap = float(box.lo[0])
        for other in scene.items:
            if other.id == item.id or other.y >= item.y:
                continue
            o_lo, o_hi = other.z_interval
            if min(z_hi, o_hi) - max(z_lo, o_lo) > 1e-9:
                gap = min(gap, float(box.lo[0] - other.box.hi[0]))
        return gap
    gap = float(scene.shelf.width - box.hi[0])
    for other in scene.items:
        if other.id == item.id or other.y <= item.y:
            continue
        o_lo, o_hi = other.z_interval
        if min(z_hi, o_hi) - max(z_lo, o_lo) > 1e-9:
            gap = min(gap, float(other.box.lo[0] - box.hi[0]))
    return gap


def _corrupt(points: np.ndarray, noise: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    if noise.point_sigma > 0.0:
        points = points + rng.normal(0.0, noise.point_sigma, points.shape)
    if noise.dropout_prob > 0.0:
        keep = rng.random(len(points)) >= noise.dropout_prob
        if int(keep.sum()) >= 3:
            points = points[keep]
    return points


def observe(
    scene: SceneState,
    noise: NoiseConfig | None = None,
    index: int = 0,
    spacing: float = 0.008,
    visibility_threshold: float = 0.01,
) -> Observation:
    """Synthetic aisle-view point clouds, segmented per item.

    Each item contributes its front-face projection: top and bottom edges
    plus an interior grid fill are always visible; a side edge appears only
    when the lateral gap to the nearest z-overlapping obstacle (walls
    included) exceeds the visibility threshold. Gaussian jitter and dropout
    are applied per the noise config; everything is a pure function of
    (scene, noise, index).
    """
    noise = noise or NoiseConfig()
    rng = np.random.default_rng(
        [noise.seed & 0xFFFFFFFF, scene.rng_seed & 0xFFFFFFFF, int(index)]
    )
    item_clouds: dict[str, np.ndarray] = {}
    for item in scene.items:
        box = item.box
        y0, z0 = float(box.lo[0]), float(box.lo[1])
        y1, z1 = float(box.hi[0]), float(box.hi[1])
        ys = np.linspace(y0, y1, _grid_counts(y1 - y0, spacing))
        zs = np.linspace(z0, z1, _grid_counts(z1 - z0, spacing))
        chunks = [
            np.column_stack([ys, np.full(len(ys), z1)]),
            np.column_stack([ys, np.full(len(ys), z0)]),
        ]
        if _side_gap(item, scene, -1) > visibility_threshold:
            chunks.append(np.column_stack([np.full(len(zs), y0), zs]))
        if _side_gap(item, scene, +1) > visibility_threshold:
            chunks.append(np.column_stack([np.full(len(zs), y1), zs]))
        if len(ys) > 2 and len(zs) > 2:
            gy, gz = np.meshgrid(ys[1:-1], zs[1:-1])
            chunks.append(np.column_stack([gy.ravel(), gz.ravel()]))
        item_clouds[item.id] = _corrupt(np.vstack(chunks), noise, rng)

    shelf = scene.shelf
    wy = np.linspace(0.0, shelf.width, _grid_counts(shelf.width, 0.02))
    wz = np.linspace(shelf.platform_height, shelf.z_top, _grid_counts(shelf.height, 0.02))
    shelf_points = np.vstack(
        [
            np.column_stack([wy, np.full(len(wy), shelf.platform_height)]),
            np.column_stack([wy, np.full(len(wy), shelf.z_top)]),
            np.column_stack([np.zeros(len(wz)), wz]),
            np.column_stack([np.full(len(wz), shelf.width), wz]),
        ]
    )
    shelf_points = _corrupt(shelf_points, noise, rng)

    adjacent_arrays = [
        item_clouds[it.id] for it in scene.items if it.id != scene.target_id
    ]
    adjacent = (
        PointCloud2(np.vstack(adjacent_arrays), "adjacent") if adjacent_arrays else None
    )
    return Observation(
        item_clouds=item_clouds,
        target=PointCloud2(item_clouds[scene.target_id], "target"),
        adjacent=adjacent,
        shelf=PointCloud2(shelf_points, "shelf"),
        index=index,
    )


def estimate_items(scene: SceneState, obs: Observation) -> list[ItemState]:
    """Per-item state estimates from the observed clouds.

    Pose and lateral/vertical extents come from the cloud bounding box;
    depth and weight are carried over from the catalog entry (items are
    recognized, only their poses are uncertain).
    """
    estimates = []
    for item in scene.items:
        cloud = obs.item_clouds.get(item.id)
        if cloud is None or len(cloud) < 4:
            estimates.append(replace(item))
            continue
        box = geometry.compute_aabb(cloud)
        width = float(box.width)
        height = float(box.height)
        if width < 1e-6 or height < 1e-6:
            estimates.append(replace(item))
            continue
        estimates.append(
            replace(
                item,
                y=float(box.center[0]),
                z=float(box.center[1]),
                extent_y=width,
                extent_z=height,
            )
        )
    return estimates


# ---------------------------------------------------------------------------
# Nudge execution


NUDGE_FRACTIONS = (0.25, 0.5, 0.75, 1.0)


def _resolve_push(
    items: list[ItemState], mover: str, delta: float, shelf_width: float
) -> dict[str, float]:
    """New center positions after pushing one item laterally.

    Contacted z-overlapping items compact forward in a chain; the whole
    motion truncates so nothing crosses a wall. Only forward motion occurs
    (quasi-static push, no pulling, no rebound).
    """
    base = {it.id: it.y for it in items}
    if abs(delta) <= 1e-12:
        return base
    sign = 1.0 if delta > 0.0 else -1.0
    # mirror leftward pushes so the sweep always runs in +y
    def fold(y: float) -> float:
        return y if sign > 0 else shelf_width - y

    info = sorted(
        (
            (fold(it.y), it.half_width, it.z_interval, it.id)
            for it in items
        ),
        key=lambda rec: (rec[0], rec[3]),
    )
    step = abs(delta)
    for _ in range(len(items) + 2):
        pos = {rec[3]: rec[0] for rec in info}
        pos[mover] += step
        for j in range(len(info)):
            yj, hwj, zj, idj = info[j]
            for i in range(j):
                yi, hwi, zi, idi = info[i]
                if min(zi[1], zj[1]) - max(zi[0], zj[0]) <= 1e-9:
                    continue
                pen = pos[idi] + hwi + hwj - pos[idj]
                if pen > 1e-12:
                    pos[idj] += pen
        overshoot = max(
            (pos[rec[3]] + rec[1] - shelf_width for rec in info), default=0.0
        )
        if overshoot <= 1e-12:
            return {item_id: fold(y) for item_id, y in pos.items()}
        step = max(0.0, step - overshoot)
        if step <= 1e-12:
            return base
    return base


def run_nudge(scene: SceneState, plan: DeclutterPlan) -> NudgeResult:
    """Execute a declutter plan as per-item sequences of four nudges.

    Each moved item receives four pushes at cumulative fractions 1/4 .. 4/4
    of its planned displacement, inserting progressively deeper. Rightward
    movers run rightmost-first and leftward movers leftmost-first so planned
    displacements do not self-block. Pushes propagate through touching
    chains and stop at walls; partial progress is recorded, never an error.
    """
    if plan.is_noop:
        raise ValueError("run_nudge requires a plan with nonzero displacements")
    by_id = {it.id: it for it in scene.items}
    moves = [
        (item_id, dy)
        for item_id, dy in plan.displacements.items()
        if item_id in by_id and abs(dy) > 1e-9
    ]
    rightward = sorted(
        (m for m in moves if m[1] > 0), key=lambda m: -by_id[m[0]].y
    )
    leftward = sorted(
        (m for m in moves if m[1] < 0), key=lambda m: by_id[m[0]].y
    )

    items = [replace(it) for it in scene.items]
    steps: list[NudgeStep] = []
    start = {it.id: it.y for it in items}
    for item_id, dy in rightward + leftward:
        origin = start[item_id]
        for fraction in NUDGE_FRACTIONS:
            goal = origin + fraction * dy
            positions = _resolve_push(items, item_id, goal - _y_of(items, item_id),
                                      scene.shelf.width)
            items = [replace(it, y=positions[it.id]) for it in items]
            command = NudgeCommand(
                side="left" if dy > 0 else "right",
                insertion_z=by_id[item_id].z,
                insertion_depth_fraction=fraction,
                push_target_y=goal,
            )
            steps.append(NudgeStep(item=item_id, command=command,
                                   positions=dict(sorted(positions.items()))))

    new_scene = assign_roles(
        items, scene.target_id,
        next(it for it in items if it.id == scene.target_id).z,
        scene.shelf, scene.rng_seed,
    )
    achieved = {it.id: it.y - start[it.id] for it in items}
    return NudgeResult(scene=new_scene, steps=steps, achieved=achieved)


def _y_of(items: list[ItemState], item_id: str) -> float:
    return next(it.y for it in items if it.id == item_id)


# ---------------------------------------------------------------------------
# Grasp execution


def _disk_box_penetration(center: np.ndarray, radius: float, box: Aabb2) -> float:
    closest = np.clip(center, box.lo, box.hi)
    return radius - float(np.linalg.norm(center - closest))


def _true_contour(item: ItemState) -> Contour:
    box = item.box
    y0, z0 = float(box.lo[0]), float(box.lo[1])
    y1, z1 = float(box.hi[0]), float(box.hi[1])
    return Contour(np.array([[y0, z0], [y1, z0], [y1, z1], [y0, z1]]))


def run_grasp(
    scene: SceneState,
    pair: ContactPair,
    ee: EffectorGeom,
    params: GraspParams | None = None,
    disturbance: DisturbanceSet | None = None,
    min_separation: float = 0.005,
) -> GraspResult:
    """Validate a planned grasp against the true scene in three stages.

    Approach: both effector disks fit in the opening without penetrating any
    non-target item. Closure: the planned chord, re-intersected with the
    item's true contour, still yields a finite worst-case quality. Extract:
    the corridor swept toward the aisle (target box plus both effector
    footprints) holds no other item.
    """
    params = params or GraspParams()
    disturbance = disturbance or DisturbanceSet.default()
    target = scene.item_by_id(scene.target_id)
    others = [it for it in scene.items if it.id != scene.target_id]
    shelf = scene.shelf

    for contact, normal in ((pair.c_l, pair.n_l), (pair.c_r, pair.n_r)):
        center = ee.approach_center(contact, normal)
        if (
            center[0] < ee.radius - 1e-7
            or center[0] > shelf.width - ee.radius + 1e-7
            or center[1] < shelf.platform_height + ee.radius - 1e-7
            or center[1] > shelf.z_top - ee.radius + 1e-7
        ):
            return GraspResult(False, "approach")
        for item in others:
            if _disk_box_penetration(center, ee.radius, item.box) > 1e-7:
                return GraspResult(False, "approach")

    contour = _true_contour(target)
    box = target.box
    chord = pair.c_r - pair.c_l
    norm = float(np.linalg.norm(chord))
    if norm <= 0.0 or chord[0] / norm <= 1e-6:
        return GraspResult(False, "closure")
    direction = chord / norm
    reach_l = (float(pair.c_l[0] - box.lo[0]) + 0.1) / float(direction[0])
    reach_r = (float(box.hi[0] - pair.c_r[0]) + 0.1) / float(direction[0])
    p_l = pair.c_l - direction * max(reach_l, 0.1)
    p_r = pair.c_r + direction * max(reach_r, 0.1)
    try:
        true_pair = geometry.contact_from_chord(contour, p_l, p_r, min_separation)
    except (geometry.NoIntersection, geometry.TangentChord):
        return GraspResult(False, "closure")
    scaled = true_pair.scaled(box.center, float(box.half_extent[0]))
    quality = grasp_quality(scaled, disturbance, params)
    if not math.isfinite(quality):
        return GraspResult(False, "closure", quality)

    slot_l, slot_r = slot_boxes(pair, ee)
    for item in others:
        for region in (box, slot_l, slot_r):
            if region.overlaps(item.box, tol=1e-7):
                return GraspResult(False, "extraction", quality)
    return GraspResult(True, None, quality)


# ---------------------------------------------------------------------------
# Pick loop


def _chord_key(cand: GraspCandidate, box_bottom: float) -> tuple[int, int]:
    # chord heights quantized to 1 mm relative to the item bottom: stable
    # across lateral item motion between observations
    return (
        int(round((cand.chord_heights[0] - box_bottom) / 0.001)),
        int(round((cand.chord_heights[1] - box_bottom) / 0.001)),
    )


def _z_overlaps(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return min(a[1], b[1]) - max(a[0], b[0]) > 1e-9


def _declutter_cache_key(roles: SceneState, pair: ContactPair, ee: EffectorGeom):
    """Candidates whose packing problems are identical share one QP solve.

    The packing QP depends only on the roles, the slot offsets relative to
    the target, and which entities each slot z-overlaps; chords at many
    heights collapse to a handful of distinct problems.
    """
    slots = slot_boxes(pair, ee)
    role_items = [
        roles.target, roles.left_neighbor, roles.right_neighbor,
        roles.left_height, roles.right_height,
    ]
    role_ids = tuple(it.id if it is not None else "" for it in role_items)
    entities = []
    seen: set[str] = set()
    for it in role_items:
        if it is not None and it.id not in seen:
            seen.add(it.id)
            entities.append(it)
    offsets = tuple(
        round(float(slot.center[0]) - roles.target.y, 9) for slot in slots
    )
    z_fit = tuple(
        bool(
            slot.lo[1] >= roles.shelf.platform_height - 1e-9
            and slot.hi[1] <= roles.shelf.z_top + 1e-9
        )
        for slot in slots
    )
    pattern = tuple(
        tuple(
            _z_overlaps((float(slot.lo[1]), float(slot.hi[1])), it.z_interval)
            for it in entities
        )
        for slot in slots
    )
    return (role_ids, offsets, z_fit, pattern)


def _plan_round(
    scene: SceneState,
    est_items: list[ItemState],
    obs: Observation,
    config: PickConfig,
) -> tuple[list[GraspCandidate], list[tuple[GraspCandidate, DeclutterPlan, tuple]]]:
    """One planning pass: candidates from the observed target cloud, each
    with a declutter plan computed on the estimated scene (cached across
    candidates posing identical packing problems)."""
    try:
        candidates = plan_grasps(
            obs.target, scene.shelf, config.ee, config.grasp, config.planner
        )
    except (geometry.EmptyCloud, geometry.DegenerateInput, geometry.NoBoundary):
        return [], []
    if not candidates:
        return [], []

    est_target = next(it for it in est_items if it.id == scene.target_id)
    bottom = est_target.z_interval[0]
    entries = []
    cache: dict = {}
    role_cache: dict = {}
    for cand in candidates:
        key = _chord_key(cand, bottom)
        if config.declutter_enabled:
            ee_height = round(
                0.5 * (float(cand.pair.c_l[1]) + float(cand.pair.c_r[1])), 12
            )
            roles = role_cache.get(ee_height)
            if roles is None:
                roles = assign_roles(
                    est_items, scene.target_id, ee_height, scene.shelf, scene.rng_seed
                )
                role_cache[ee_height] = roles
            cache_key = _declutter_cache_key(roles, cand.pair, config.ee)
            if cache_key in cache:
                plan = cache[cache_key]
            else:
                plan = plan_declutter(cand.pair, roles, config.ee, config.weights)
                cache[cache_key] = plan
            if plan is None:
                continue
        else:
            plan = DeclutterPlan(
                displacements={},
                cost=0.0,
                static_entity="t",
                is_noop=True,
                slots=slot_boxes(cand.pair, config.ee),
            )
        entries.append((cand, plan, key))
    return candidates, entries


def scene_pickable(scene: SceneState, config: PickConfig | None = None) -> bool:
    """Whether a noise-free observation admits a reachable finite-quality
    grasp whose declutter packing is feasible. This is the planning-side
    success predicate the zero-noise pick loop realizes."""
    config = config or PickConfig()
    clean = NoiseConfig(point_sigma=0.0, dropout_prob=0.0, seed=config.noise.seed)
    obs = observe(scene, clean, 0, config.observe_spacing, config.visibility_threshold)
    est = estimate_items(scene, obs)
    _, entries = _plan_round(scene, est, obs, config)
    return bool(entries)


def run_pick(
    scene: SceneState,
    target_id: str | None = None,
    i_max: int | None = None,
    config: PickConfig | None = None,
) -> TrialResult:
    """Full pick trial: observe, plan, nudge while budget remains, grasp.

    Each retry unit is either a nudge round or a re-observation after an
    empty candidate set; at most ``i_max`` units are spent. When the best
    plan still needs decluttering with no budget left, the grasp is
    attempted anyway. A candidate whose declutter was already executed is
    not re-nudged; budget flows to other candidates instead.
    """
    config = config or PickConfig()
    budget = config.i_max if i_max is None else int(i_max)
    if target_id is not None and target_id != scene.target_id:
        scene = assign_roles(
            scene.items, target_id,
            scene.item_by_id(target_id).z, scene.shelf, scene.rng_seed,
        )
    scene.item_by_id(scene.target_id)

    retries = 0
    nudges = 0
    obs_index = 0
    nudged_keys: set = set()
    log: list[dict] = []
    current = scene

    while True:
        obs = observe(
            current, config.noise, obs_index,
            config.observe_spacing, config.visibility_threshold,
        )
        obs_index += 1
        est_items = estimate_items(current, obs)
        log.append(
            {
                "event": "observe",
                "index": obs.index,
                "target_points": int(len(obs.target.points)),
            }
        )
        candidates, entries = _plan_round(current, est_items, obs, config)
        log.append(
            {"event": "plan", "candidates": len(candidates), "feasible": len(entries)}
        )
        if not candidates:
            if retries < budget:
                retries += 1
                log.append({"event": "reobserve", "retries": retries})
                continue
            return TrialResult(Outcome.INFEASIBLE, nudges, retries, log)
        if not entries:
            return TrialResult(Outcome.DECLUTTER_FAILED, nudges, retries, log)

        key_of = {id(cand): key for cand, _, key in entries}
        ranked = rank_plans([(cand, plan) for cand, plan, _ in entries])
        best_cand, best_plan = ranked[0]

        def attempt(cand: GraspCandidate, plan: DeclutterPlan) -> TrialResult:
            result = run_grasp(
                current, cand.pair, config.ee, config.grasp,
                config.planner.disturbance, config.planner.min_contact_separation,
            )
            log.append(
                {
                    "event": "grasp",
                    "success": result.success,
                    "stage": result.stage or "",
                    "quality": result.quality,
                    "chord": [cand.chord_heights[0], cand.chord_heights[1]],
                    "contacts": [
                        [float(cand.pair.c_l[0]), float(cand.pair.c_l[1])],
                        [float(cand.pair.c_r[0]), float(cand.pair.c_r[1])],
                    ],
                    "normals": [
                        [float(cand.pair.n_l[0]), float(cand.pair.n_l[1])],
                        [float(cand.pair.n_r[0]), float(cand.pair.n_r[1])],
                    ],
                }
            )
            outcome = Outcome.SUCCESS if result.success else Outcome.GRASP_FAILED
            return TrialResult(outcome, nudges, retries, log)

        if best_plan.is_noop:
            return attempt(best_cand, best_plan)

        if retries >= budget:
            log.append({"event": "fallthrough", "reason": "budget"})
            return attempt(best_cand, best_plan)

        choice = None
        for cand, plan in ranked:
            if key_of[id(cand)] not in nudged_keys:
                choice = (cand, plan)
                break
        if choice is None:
            log.append({"event": "fallthrough", "reason": "nudged_exhausted"})
            return attempt(best_cand, best_plan)

        cand, plan = choice
        log.append(
            {
                "event": "select",
                "chord": [cand.chord_heights[0], cand.chord_heights[1]],
                "quality": cand.quality,
                "cost": plan.cost,
                "static": plan.static_entity,
            }
        )
        nudge_result = run_nudge(current, plan)
        for step in nudge_result.steps:
            log.append(
                {
                    "event": "nudge",
                    "item": step.item,
                    "side": step.command.side,
                    "fraction": step.command.insertion_depth_fraction,
                    "push_target_y": step.command.push_target_y,
                    "insertion_z": step.command.insertion_z,
                    "positions": step.positions,
                }
            )
        nudges += len(nudge_result.steps)
        nudged_keys.add(key_of[id(cand)])
        current = nudge_result.scene
        retries += 1
