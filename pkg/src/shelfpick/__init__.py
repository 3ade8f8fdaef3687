"""Planar bimanual grasp and declutter planning on simulated shelves.

The package splits into geometry primitives (alpha-shape contours, chord
extraction, contact frames), a dense active-set QP solver, maximin grasp
quality scoring against a disturbance wrench set, a packing-style declutter
planner, chord enumeration plus plan ranking, and a deterministic
quasi-static shelf simulator that closes the loop.
"""

from .declutter import (
    DeclutterPlan,
    DeclutterWeights,
    ItemState,
    SceneState,
    TargetMissing,
    assign_roles,
    plan_declutter,
    slot_boxes,
)
from .geometry import (
    Aabb2,
    ContactPair,
    Contour,
    DegenerateInput,
    EmptyCloud,
    NoBoundary,
    NoIntersection,
    PointCloud2,
    TangentChord,
    alpha_shape,
    compute_aabb,
    contact_from_chord,
    default_alpha,
)
from .planner import (
    SHELF_SPECS,
    ChordEval,
    EffectorGeom,
    GraspCandidate,
    PlannerConfig,
    ShelfSpec,
    center_heuristic,
    evaluate_chords,
    is_reachable,
    plan_grasps,
    rank_plans,
)
from .qp import (
    QpProblem,
    QpSolution,
    QpStatus,
    kkt_residuals,
    solve_qp,
)
from .sim import (
    ClutterParams,
    GraspResult,
    NoiseConfig,
    NudgeCommand,
    NudgeResult,
    Observation,
    Outcome,
    PickConfig,
    TrialResult,
    Unpackable,
    estimate_items,
    generate_scene,
    load_scene,
    observe,
    run_grasp,
    run_nudge,
    run_pick,
    save_scene,
    scene_from_dict,
    scene_pickable,
    scene_to_dict,
)
from .wrench import (
    BruteForceGrid,
    DisturbanceSet,
    GraspParams,
    brute_force_quality,
    contact_force_qp,
    disturbance_boundary_samples,
    grasp_quality,
)

__version__ = "0.1.0"

__all__ = [
    "Aabb2",
    "BruteForceGrid",
    "ChordEval",
    "ClutterParams",
    "ContactPair",
    "Contour",
    "DeclutterPlan",
    "DeclutterWeights",
    "DegenerateInput",
    "DisturbanceSet",
    "EffectorGeom",
    "EmptyCloud",
    "GraspCandidate",
    "GraspParams",
    "GraspResult",
    "ItemState",
    "NoBoundary",
    "NoIntersection",
    "NoiseConfig",
    "NudgeCommand",
    "NudgeResult",
    "Observation",
    "Outcome",
    "PickConfig",
    "PlannerConfig",
    "PointCloud2",
    "QpProblem",
    "QpSolution",
    "QpStatus",
    "SHELF_SPECS",
    "SceneState",
    "ShelfSpec",
    "TangentChord",
    "TargetMissing",
    "TrialResult",
    "Unpackable",
    "alpha_shape",
    "assign_roles",
    "brute_force_quality",
    "center_heuristic",
    "compute_aabb",
    "contact_from_chord",
    "contact_force_qp",
    "default_alpha",
    "disturbance_boundary_samples",
    "estimate_items",
    "evaluate_chords",
    "generate_scene",
    "grasp_quality",
    "is_reachable",
    "kkt_residuals",
    "load_scene",
    "observe",
    "plan_declutter",
    "plan_grasps",
    "rank_plans",
    "run_grasp",
    "run_nudge",
    "run_pick",
    "save_scene",
    "scene_from_dict",
    "scene_pickable",
    "scene_to_dict",
    "slot_boxes",
    "solve_qp",
    "__version__",
]
