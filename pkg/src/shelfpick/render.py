"""Hand-emitted SVG rendering of scenes, plans and trial frames.

Coordinates are meters in the shelf plane; the renderer flips z so up is
up on screen. All numbers are written with fixed precision so identical
inputs produce identical SVG bytes.
"""

from __future__ import annotations

import numpy as np

from .declutter import SceneState, slot_boxes
from .geometry import Aabb2, ContactPair, Contour
from .planner import EffectorGeom

COLOR_SHELF_FILL = "#e8dcc3"
COLOR_SHELF_EDGE = "#8a7348"
COLOR_ITEM_FILL = "#d7e3f4"
COLOR_ITEM_EDGE = "#46618a"
COLOR_TARGET_FILL = "#ffe2b8"
COLOR_TARGET_EDGE = "#b06f1f"
COLOR_CONTOUR = "#e8821e"
COLOR_CHORD_OK = "#00a6a0"
COLOR_CHORD_BAD = "#d64541"
COLOR_EFFECTOR = "#333333"
COLOR_ARROW = "#222222"
COLOR_CORRIDOR = "#7a5ca8"

_PAD = 0.05  # meters of margin around the drawing


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    """Collects SVG elements in meter coordinates, emits pixel text."""

    def __init__(self, y_range, z_range, px_per_m: float):
        self.y0, self.y1 = y_range
        self.z0, self.z1 = z_range
        self.s = float(px_per_m)
        self.width = (self.y1 - self.y0 + 2 * _PAD) * self.s
        self.height = (self.z1 - self.z0 + 2 * _PAD) * self.s
        self.parts: list[str] = []

    def px(self, y: float, z: float) -> tuple[float, float]:
        return (
            (y - self.y0 + _PAD) * self.s,
            (self.z1 - z + _PAD) * self.s,
        )

    def rect(self, box: Aabb2, fill: str, stroke: str, width=1.5, dash=None, opacity=None):
        x, top = self.px(float(box.lo[0]), float(box.hi[1]))
        w = (float(box.hi[0]) - float(box.lo[0])) * self.s
        h = (float(box.hi[1]) - float(box.lo[1])) * self.s
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        extra += f' fill-opacity="{opacity}"' if opacity is not None else ""
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(top)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{fill}" stroke="{stroke}" stroke-width="{width}"{extra}/>'
        )

    def line(self, p0, p1, stroke: str, width=1.5, dash=None):
        x0, y0 = self.px(float(p0[0]), float(p0[1]))
        x1, y1 = self.px(float(p1[0]), float(p1[1]))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y1)}" '
            f'stroke="{stroke}" stroke-width="{width}"{extra}/>'
        )

    def circle(self, center, radius_m: float, stroke: str, fill="none", dash=None):
        cx, cy = self.px(float(center[0]), float(center[1]))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(radius_m * self.s)}" '
            f'fill="{fill}" stroke="{stroke}" stroke-width="1.5"{extra}/>'
        )

    def polygon(self, vertices: np.ndarray, stroke: str, fill="none", width=1.5):
        pts = " ".join(
            f"{_fmt(x)},{_fmt(y)}"
            for x, y in (self.px(float(p[0]), float(p[1])) for p in vertices)
        )
        self.parts.append(
            f'<polygon points="{pts}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{width}"/>'
        )

    def arrow(self, p0, p1, stroke: str):
        self.line(p0, p1, stroke, width=2.0)
        # simple open arrowhead
        d = np.asarray(p1, dtype=float) - np.asarray(p0, dtype=float)
        n = float(np.hypot(d[0], d[1]))
        if n < 1e-9:
            return
        u = d / n
        left = np.array([-u[0] + u[1], -u[1] - u[0]]) * 0.012
        right = np.array([-u[0] - u[1], -u[1] + u[0]]) * 0.012
        self.line(p1, np.asarray(p1) + left, stroke, width=2.0)
        self.line(p1, np.asarray(p1) + right, stroke, width=2.0)

    def text(self, y: float, z: float, content: str, size=14, color="#333333"):
        x, py = self.px(y, z)
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(py)}" font-size="{size}" '
            f'font-family="sans-serif" fill="{color}">{content}</text>'
        )

    def emit(self) -> str:
        header = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" viewBox="0 0 {_fmt(self.width)} '
            f'{_fmt(self.height)}">'
        )
        background = (
            f'<rect x="0" y="0" width="{_fmt(self.width)}" height="{_fmt(self.height)}" '
            f'fill="white"/>'
        )
        return "\n".join([header, background, *self.parts, "</svg>"]) + "\n"


def scene_svg(
    scene: SceneState,
    *,
    contour: Contour | None = None,
    chords: list[tuple[np.ndarray, np.ndarray, bool]] | None = None,
    disks: list[tuple[np.ndarray, float]] | None = None,
    corridors: list[Aabb2] | None = None,
    arrows: list[tuple[np.ndarray, np.ndarray]] | None = None,
    caption: str = "",
    px_per_m: float = 1000.0,
    hide_target: bool = False,
) -> str:
    """Render one scene frame with optional planning overlays."""
    shelf = scene.shelf
    canvas = _Canvas(
        (0.0, shelf.width),
        (shelf.platform_height - 0.04, shelf.z_top),
        px_per_m,
    )
    # shelf structure: platform slab, side walls, ceiling line
    canvas.rect(
        Aabb2([0.0, shelf.platform_height - 0.04], [shelf.width, shelf.platform_height]),
        COLOR_SHELF_FILL, COLOR_SHELF_EDGE,
    )
    canvas.line([0.0, shelf.platform_height], [0.0, shelf.z_top], COLOR_SHELF_EDGE, 3.0)
    canvas.line(
        [shelf.width, shelf.platform_height], [shelf.width, shelf.z_top],
        COLOR_SHELF_EDGE, 3.0,
    )
    canvas.line([0.0, shelf.z_top], [shelf.width, shelf.z_top], COLOR_SHELF_EDGE, 3.0)

    for item in scene.items:
        if item.id == scene.target_id:
            if hide_target:
                continue
            canvas.rect(item.box, COLOR_TARGET_FILL, COLOR_TARGET_EDGE)
        else:
            canvas.rect(item.box, COLOR_ITEM_FILL, COLOR_ITEM_EDGE)
        canvas.text(
            float(item.box.lo[0]) + 0.005, float(item.box.hi[1]) - 0.015, item.id, 12
        )

    if contour is not None:
        canvas.polygon(contour.vertices, COLOR_CONTOUR)
    for p0, p1, ok in chords or []:
        canvas.line(p0, p1, COLOR_CHORD_OK if ok else COLOR_CHORD_BAD, 1.0)
    for box in corridors or []:
        canvas.rect(box, "none", COLOR_CORRIDOR, 1.5, dash="6,4")
    for center, radius in disks or []:
        canvas.circle(center, radius, COLOR_EFFECTOR, dash="4,3")
    for p0, p1 in arrows or []:
        canvas.arrow(p0, p1, COLOR_ARROW)
    if caption:
        canvas.text(0.01, shelf.z_top - 0.02, caption, 16)
    return canvas.emit()


def plan_svg(
    scene: SceneState,
    contour: Contour,
    evals,
    px_per_m: float = 1000.0,
) -> str:
    """Scene plus every evaluated chord, colored by acceptance."""
    chords = []
    for ev in evals:
        if ev.pair is None:
            continue
        chords.append((ev.pair.c_l, ev.pair.c_r, ev.reason == "ok"))
    return scene_svg(
        scene, contour=contour, chords=chords,
        caption="accepted chords teal, rejected red", px_per_m=px_per_m,
    )


def _positions_applied(scene: SceneState, positions: dict[str, float]) -> SceneState:
    from dataclasses import replace

    items = [
        replace(it, y=float(positions.get(it.id, it.y))) for it in scene.items
    ]
    return SceneState(
        shelf=scene.shelf, items=items, target_id=scene.target_id,
        rng_seed=scene.rng_seed, target=next(
            it for it in items if it.id == scene.target_id
        ),
    )


def trial_frames(
    scene: SceneState,
    events: list[dict],
    ee: EffectorGeom | None = None,
    px_per_m: float = 1000.0,
) -> list[tuple[str, str]]:
    """One SVG frame per nudge, plus approach and extract frames when the
    trial reached a grasp. Returns (name, svg) pairs in execution order."""
    ee = ee or EffectorGeom()
    frames: list[tuple[str, str]] = []
    current = scene
    nudge_no = 0
    for event in events:
        if event.get("event") == "nudge":
            nudge_no += 1
            before = {it.id: it.y for it in current.items}
            current = _positions_applied(current, event["positions"])
            moved = event["item"]
            arrow = None
            b = before.get(moved)
            a = event["positions"].get(moved)
            if b is not None and a is not None and abs(a - b) > 1e-9:
                item = current.item_by_id(moved)
                z = item.z
                arrow = [(np.array([b, z]), np.array([a, z]))]
            frames.append(
                (
                    f"nudge_{nudge_no:02d}",
                    scene_svg(
                        current,
                        arrows=arrow,
                        caption=f"nudge {nudge_no}: {moved}",
                        px_per_m=px_per_m,
                    ),
                )
            )
        elif event.get("event") == "grasp":
            contacts = event.get("contacts")
            normals = event.get("normals")
            if not contacts or not normals:
                continue
            pair = ContactPair(
                np.array(contacts[0]), np.array(contacts[1]),
                np.array(normals[0]), np.array(normals[1]),
            )
            disks = [
                (ee.approach_center(pair.c_l, pair.n_l), ee.radius),
                (ee.approach_center(pair.c_r, pair.n_r), ee.radius),
            ]
            chord = [(pair.c_l, pair.c_r, bool(event.get("success")))]
            frames.append(
                (
                    "approach",
                    scene_svg(
                        current, chords=chord, disks=disks,
                        caption="approach", px_per_m=px_per_m,
                    ),
                )
            )
            target_box = current.item_by_id(current.target_id).box
            corridors = [target_box, *slot_boxes(pair, ee)]
            frames.append(
                (
                    "extract",
                    scene_svg(
                        current, corridors=corridors, disks=disks,
                        caption=f"extract: {'ok' if event.get('success') else event.get('stage', '')}",
                        px_per_m=px_per_m,
                        hide_target=bool(event.get("success")),
                    ),
                )
            )
    if not frames:
        frames.append(("scene", scene_svg(current, px_per_m=px_per_m)))
    return frames
