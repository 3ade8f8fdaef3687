"""Declutter planning: pack effector room next to the target.

The planner treats the target, its lateral neighbors, the items at effector
height and the two effector footprints as intervals on the shelf axis and
solves a small QP: move entities as little as possible (weighted squared
displacement) so that everything fits inside the opening without overlap,
items only move away from the target (no pulling), and at least one of
{target, left-height item, right-height item} stays put. The last rule is
enforced by solving one QP per fixed entity and keeping the cheapest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Aabb2, ContactPair
from .planner import EffectorGeom, ShelfSpec
from .qp import QpProblem, QpStatus, solve_qp

Z_OVERLAP_TOL = 1e-9
NOOP_DISPLACEMENT = 1e-6
SLOT_KEYS = ("le", "re")


class TargetMissing(ValueError):
    """Scene has no item with the requested target id."""


@dataclass
class ItemState:
    """Rigid item resting on the shelf platform, AABB in the shelf plane."""

    id: str
    extent_y: float
    extent_z: float
    depth_x: float
    weight: float
    y: float
    z: float

    def __post_init__(self):
        if self.extent_y <= 0.0 or self.extent_z <= 0.0 or self.depth_x <= 0.0:
            raise ValueError(f"item {self.id!r} extents must be positive")
        if self.weight <= 0.0:
            raise ValueError(f"item {self.id!r} weight must be positive")

    @property
    def half_width(self) -> float:
        return 0.5 * self.extent_y

    @property
    def box(self) -> Aabb2:
        h = np.array([0.5 * self.extent_y, 0.5 * self.extent_z])
        c = np.array([self.y, self.z])
        return Aabb2(c - h, c + h)

    @property
    def z_interval(self) -> tuple[float, float]:
        return (self.z - 0.5 * self.extent_z, self.z + 0.5 * self.extent_z)


@dataclass
class SceneState:
    """Shelf plus items, with the roles the declutter model cares about."""

    shelf: ShelfSpec
    items: list[ItemState]
    target_id: str
    rng_seed: int
    target: ItemState | None = None
    left_neighbor: ItemState | None = None
    right_neighbor: ItemState | None = None
    left_height: ItemState | None = None
    right_height: ItemState | None = None
    effectors: tuple[Aabb2, Aabb2] | None = None

    def item_by_id(self, item_id: str) -> ItemState:
        for it in self.items:
            if it.id == item_id:
                return it
        raise TargetMissing(f"no item with id {item_id!r}")

    def validate(self) -> None:
        """Raise when items leave the opening or overlap each other."""
        self.item_by_id(self.target_id)
        w, z_lo, z_hi = self.shelf.width, self.shelf.platform_height, self.shelf.z_top
        for it in self.items:
            box = it.box
            if box.lo[0] < -1e-9 or box.hi[0] > w + 1e-9:
                raise ValueError(f"item {it.id!r} leaves the shelf opening laterally")
            if box.lo[1] < z_lo - 1e-9 or box.hi[1] > z_hi + 1e-9:
                raise ValueError(f"item {it.id!r} leaves the shelf opening vertically")
        for i, a in enumerate(self.items):
            for b in self.items[i + 1:]:
                if _intervals_overlap(a.z_interval, b.z_interval):
                    gap = max(a.box.lo[0] - b.box.hi[0], b.box.lo[0] - a.box.hi[0])
                    if gap < -1e-9:
                        raise ValueError(f"items {a.id!r} and {b.id!r} overlap")


def _intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return min(a[1], b[1]) - max(a[0], b[0]) > Z_OVERLAP_TOL


def assign_roles(
    items: list[ItemState],
    target_id: str,
    ee_height: float,
    shelf: ShelfSpec,
    rng_seed: int = 0,
) -> SceneState:
    """Identify the lateral neighbors and the items at effector height.

    Neighbors are the nearest items on each side whose z-interval overlaps
    the target's; height items are the nearest on each side whose z-interval
    contains ``ee_height``. Raises TargetMissing when the target id is
    absent.
    """
    target = None
    for it in items:
        if it.id == target_id:
            target = it
            break
    if target is None:
        raise TargetMissing(f"no item with id {target_id!r}")

    def nearest(side: int, predicate) -> ItemState | None:
        best = None
        for it in items:
            if it.id == target_id:
                continue
            if side < 0 and it.y >= target.y:
                continue
            if side > 0 and it.y <= target.y:
                continue
            if not predicate(it):
                continue
            if best is None or abs(it.y - target.y) < abs(best.y - target.y):
                best = it
        return best

    t_int = target.z_interval

    def overlaps_target(it: ItemState) -> bool:
        return _intervals_overlap(it.z_interval, t_int)

    def spans_height(it: ItemState) -> bool:
        z_lo, z_hi = it.z_interval
        return z_lo - Z_OVERLAP_TOL <= ee_height <= z_hi + Z_OVERLAP_TOL

    return SceneState(
        shelf=shelf,
        items=list(items),
        target_id=target_id,
        rng_seed=rng_seed,
        target=target,
        left_neighbor=nearest(-1, overlaps_target),
        right_neighbor=nearest(+1, overlaps_target),
        left_height=nearest(-1, spans_height),
        right_height=nearest(+1, spans_height),
    )


@dataclass
class DeclutterWeights:
    """Displacement weights and rest targets for the packing objective.

    Effector footprints always carry zero weight (they ride with the
    target). Rest targets default to current positions; sign constraints and
    the static-entity rule always use current positions regardless.
    """

    target_weight: float = 4.0
    neighbor_weight: float = 1.0
    overrides: dict[str, float] = field(default_factory=dict)
    rest_targets: dict[str, float] = field(default_factory=dict)

    def weight_for(self, key: str, is_target: bool) -> float:
        if key in SLOT_KEYS:
            return 0.0
        if key in self.overrides:
            return float(self.overrides[key])
        return float(self.target_weight if is_target else self.neighbor_weight)


@dataclass
class DeclutterPlan:
    """Planned lateral displacements; keys are item ids plus 'le'/'re'."""

    displacements: dict[str, float]
    cost: float
    static_entity: str  # "t", "lh" or "rh"
    is_noop: bool
    slots: tuple[Aabb2, Aabb2]
    case_costs: dict[str, float] = field(default_factory=dict)


@dataclass
class _Entity:
    key: str
    half_width: float
    z_interval: tuple[float, float]
    y0: float
    weight: float
    rest: float
    sign: int  # -1 move-left-only, +1 move-right-only, 0 free


def slot_boxes(pair: ContactPair, ee: EffectorGeom) -> tuple[Aabb2, Aabb2]:
    """Bounding boxes of the two approach disks; the footprints to pack in."""
    r = np.array([ee.radius, ee.radius])
    left = ee.approach_center(pair.c_l, pair.n_l)
    right = ee.approach_center(pair.c_r, pair.n_r)
    return (Aabb2(left - r, left + r), Aabb2(right - r, right + r))


def plan_declutter(
    pair: ContactPair,
    scene: SceneState,
    ee: EffectorGeom,
    weights: DeclutterWeights | None = None,
) -> DeclutterPlan | None:
    """Pack the effector footprints into the scene next to the contacts.

    Returns the cheapest feasible plan over the allowed static entities, a
    zero-cost no-op when the current layout already fits, or None when every
    case is infeasible (the scene cannot be decluttered for this grasp).
    """
    weights = weights or DeclutterWeights()
    if scene.target is None:
        scene = assign_roles(
            scene.items, scene.target_id,
            float(0.5 * (pair.c_l[1] + pair.c_r[1])), scene.shelf, scene.rng_seed,
        )
    slots = slot_boxes(pair, ee)

    # vertical fit cannot be repaired by lateral motion
    z_lo, z_hi = scene.shelf.platform_height, scene.shelf.z_top
    for slot in slots:
        if slot.lo[1] < z_lo - 1e-9 or slot.hi[1] > z_hi + 1e-9:
            return None

    target = scene.target
    entities: list[_Entity] = []
    seen: set[str] = set()
    role_items = (
        (target, 0),
        (scene.left_neighbor, -1),
        (scene.left_height, -1),
        (scene.right_neighbor, +1),
        (scene.right_height, +1),
    )
    for item, sign in role_items:
        if item is None or item.id in seen:
            continue
        seen.add(item.id)
        entities.append(
            _Entity(
                key=item.id,
                half_width=item.half_width,
                z_interval=item.z_interval,
                y0=item.y,
                weight=weights.weight_for(item.id, item.id == scene.target_id),
                rest=float(weights.rest_targets.get(item.id, item.y)),
                sign=sign,
            )
        )
    for key, slot in zip(SLOT_KEYS, slots):
        entities.append(
            _Entity(
                key=key,
                half_width=float(slot.half_extent[0]),
                z_interval=(float(slot.lo[1]), float(slot.hi[1])),
                y0=float(slot.center[0]),
                weight=0.0,
                rest=float(slot.center[0]),
                sign=0,
            )
        )

    n = len(entities)
    index = {e.key: i for i, e in enumerate(entities)}
    t_idx = index[scene.target_id]
    shelf_w = scene.shelf.width

    coupled = {
        frozenset((scene.target_id, "le")),
        frozenset((scene.target_id, "re")),
        frozenset(("le", "re")),
    }

    rows_C: list[np.ndarray] = []
    rhs_C: list[float] = []

    def add_row(coeffs: dict[int, float], bound: float) -> None:
        row = np.zeros(n)
        for i, c in coeffs.items():
            row[i] = c
        rows_C.append(row)
        rhs_C.append(bound)

    for i, e in enumerate(entities):
        add_row({i: -1.0}, -(e.half_width))            # y_i >= half_width
        add_row({i: 1.0}, shelf_w - e.half_width)       # y_i <= W - half_width
        if e.sign < 0:
            add_row({i: 1.0}, e.y0)                     # move left only
        elif e.sign > 0:
            add_row({i: -1.0}, -e.y0)                   # move right only

    order = sorted(range(n), key=lambda i: (entities[i].y0, entities[i].key))
    for a_pos in range(n):
        for b_pos in range(a_pos + 1, n):
            i, j = order[a_pos], order[b_pos]
            ei, ej = entities[i], entities[j]
            if frozenset((ei.key, ej.key)) in coupled:
                continue
            if not _intervals_overlap(ei.z_interval, ej.z_interval):
                continue
            add_row({i: 1.0, j: -1.0}, -(ei.half_width + ej.half_width))

    C = np.vstack(rows_C)
    d = np.array(rhs_C)
    y0 = np.array([e.y0 for e in entities])

    if float(np.max(C @ y0 - d)) <= 1e-9:
        return DeclutterPlan(
            displacements={e.key: 0.0 for e in entities},
            cost=0.0,
            static_entity="t",
            is_noop=True,
            slots=slots,
        )

    w = np.array([e.weight for e in entities])
    rest = np.array([e.rest for e in entities])
    H = 2.0 * np.diag(w)
    g = -2.0 * w * rest
    const = float(np.sum(w * rest * rest))

    couple_rows = []
    couple_rhs = []
    for key in SLOT_KEYS:
        row = np.zeros(n)
        row[index[key]] = 1.0
        row[t_idx] = -1.0
        couple_rows.append(row)
        couple_rhs.append(entities[index[key]].y0 - entities[t_idx].y0)

    cases: list[tuple[str, int]] = [("t", t_idx)]
    if scene.left_height is not None:
        cases.append(("lh", index[scene.left_height.id]))
    if scene.right_height is not None:
        cases.append(("rh", index[scene.right_height.id]))

    best: tuple[float, str, np.ndarray] | None = None
    case_costs: dict[str, float] = {}
    for label, fixed_idx in cases:
        fix_row = np.zeros(n)
        fix_row[fixed_idx] = 1.0
        A = np.vstack(couple_rows + [fix_row])
        b = np.array(couple_rhs + [entities[fixed_idx].y0])
        sol = solve_qp(QpProblem(H=H, g=g, A=A, b=b, C=C, d=d))
        if sol.status is not QpStatus.OPTIMAL:
            case_costs[label] = math.inf
            continue
        cost = max(0.0, float(sol.objective) + const)
        case_costs[label] = cost
        if best is None or cost < best[0] - 1e-15:
            best = (cost, label, sol.x.copy())

    if best is None:
        return None
    cost, label, y_star = best
    displacements = {e.key: float(y_star[i] - e.y0) for i, e in enumerate(entities)}
    is_noop = max(abs(v) for v in displacements.values()) <= NOOP_DISPLACEMENT
    return DeclutterPlan(
        displacements=displacements,
        cost=cost,
        static_entity=label,
        is_noop=is_noop,
        slots=slots,
        case_costs=case_costs,
    )
