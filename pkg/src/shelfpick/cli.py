"""Command line frontend: plan inspection, batch trials, SVG rendering.

Exit codes: 0 success, 1 usage or input error, 2 planning infeasibility.
All randomness is seeded through flags and config files; repeated runs with
identical inputs produce byte-identical outputs. Log verbosity comes from
the SHELFPICK_LOG environment variable (error, info or debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import render, sim
from .planner import (
    SHELF_SPECS,
    EffectorGeom,
    PlannerConfig,
    evaluate_chords,
    rank_plans,
)
from .sim import (
    NoiseConfig,
    Outcome,
    PickConfig,
    SHELF_ORDER,
    Unpackable,
    estimate_items,
    generate_scene,
    load_scene,
    observe,
    run_pick,
    scene_pickable,
    scene_to_dict,
)
from .wrench import DisturbanceSet, GraspParams

log = logging.getLogger("shelfpick")

CSV_HEADER = "seed,shelf,clutter,noise_sigma,outcome,nudges,retries,quality,pickable"

BATCH_KEYS = {
    "seeds", "shelf", "clutter", "noise_sigma", "dropout", "noise_seed",
    "i_max", "declutter", "mu", "n_max", "tau_max", "sigma_samples",
    "csv", "trial_dir", "predict",
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for
    # planning infeasibility, so usage errors remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _setup_logging() -> None:
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("SHELFPICK_LOG", "error").strip().lower()
    logging.basicConfig(
        level=levels.get(name, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _fmt(value: float) -> str:
    if value is None:
        return ""
    if math.isinf(value):
        return "inf"
    return format(float(value), ".9g")


def _grasp_params(args) -> GraspParams:
    return GraspParams(
        mu=args.mu,
        n_max=args.n_max,
        sample_density=args.sigma_samples / (2.0 * math.pi),
    )


def _planner_config(args) -> PlannerConfig:
    tau = args.tau_max
    return PlannerConfig(
        disturbance=DisturbanceSet(
            bias=(0.0, -0.5), radius=1.0, tau_min=-tau, tau_max=tau
        )
    )


def _add_grasp_flags(parser) -> None:
    parser.add_argument("--mu", type=float, default=0.5, help="friction coefficient")
    parser.add_argument("--n-max", type=float, default=10.0, help="normal force cap")
    parser.add_argument(
        "--tau-max", type=float, default=0.1,
        help="normalized torque disturbance bound",
    )
    parser.add_argument(
        "--sigma-samples", type=float, default=32.0,
        help="boundary samples per disturbance circle",
    )


# ---------------------------------------------------------------------------
# plan


def cmd_plan(args) -> int:
    try:
        scene = load_scene(args.scene)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: cannot load scene {args.scene!r}: {exc}", file=sys.stderr)
        return 1

    target_id = args.target or scene.target_id
    if not any(it.id == target_id for it in scene.items):
        print(f"error: target {target_id!r} not in scene", file=sys.stderr)
        return 1

    config = PickConfig(
        grasp=_grasp_params(args),
        planner=_planner_config(args),
        noise=NoiseConfig(point_sigma=args.noise_sigma, seed=args.seed),
    )
    obs = observe(scene, config.noise, 0, config.observe_spacing,
                  config.visibility_threshold)
    est = estimate_items(scene, obs)
    candidates, entries = sim._plan_round(scene, est, obs, config)

    print(f"scene {args.scene}: target {target_id!r}, "
          f"{len(scene.items)} item(s), {len(candidates)} grasp candidate(s)")
    if not candidates:
        print("no grasp candidates")
        return 2
    if not entries:
        print("declutter infeasible for all candidates")
        return 2

    ranked = rank_plans([(cand, plan) for cand, plan, _ in entries])
    print(f"{'rank':>4} {'chord_zl':>9} {'chord_zr':>9} {'quality':>9} "
          f"{'center_pen':>10} {'declutter':>10} {'static':>6}")
    for rank_no, (cand, plan) in enumerate(ranked[: args.top], start=1):
        cost = "noop" if plan.is_noop else format(plan.cost, ".4g")
        print(
            f"{rank_no:>4} {cand.chord_heights[0]:>9.4f} {cand.chord_heights[1]:>9.4f} "
            f"{cand.quality:>9.4f} {cand.heuristic:>10.4f} {cost:>10} "
            f"{plan.static_entity:>6}"
        )
    best_cand, best_plan = ranked[0]
    action = "grasp directly" if best_plan.is_noop else "declutter then grasp"
    print(f"best: chord z=({best_cand.chord_heights[0]:.4f}, "
          f"{best_cand.chord_heights[1]:.4f}), {action}")

    if args.render:
        contour, _, evals = evaluate_chords(
            obs.target, scene.shelf, config.ee, config.grasp, config.planner
        )
        svg = render.plan_svg(scene, contour, evals, px_per_m=args.px_per_m)
        try:
            Path(args.render).write_text(svg)
        except OSError as exc:
            print(f"error: cannot write {args.render!r}: {exc}", file=sys.stderr)
            return 1
        print(f"wrote {args.render}")
    return 0


# ---------------------------------------------------------------------------
# batch


def _expand_seeds(spec) -> list[int]:
    if isinstance(spec, dict):
        unknown = set(spec) - {"start", "count"}
        if unknown:
            raise ValueError(f"unknown seeds field {sorted(unknown)[0]!r}")
        start = int(spec.get("start", 0))
        count = int(spec["count"])
        return list(range(start, start + count))
    if isinstance(spec, list):
        return [int(s) for s in spec]
    raise ValueError("seeds must be a list or {start, count}")


def _batch_config(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise ValueError("batch config must be a JSON object")
    for key in doc:
        if key not in BATCH_KEYS:
            raise ValueError(f"unknown config field {key!r}")
    if "seeds" not in doc:
        raise ValueError("missing config field 'seeds'")
    shelf = doc.get("shelf", "mix")
    if shelf != "mix" and shelf not in SHELF_SPECS:
        raise ValueError(f"shelf must be 'mix' or one of {sorted(SHELF_SPECS)}")
    return {
        "seeds": _expand_seeds(doc["seeds"]),
        "shelf": shelf,
        "clutter": bool(doc.get("clutter", True)),
        "noise_sigma": float(doc.get("noise_sigma", 0.0)),
        "dropout": float(doc.get("dropout", 0.0)),
        "noise_seed": int(doc.get("noise_seed", 0)),
        "i_max": int(doc.get("i_max", 3)),
        "declutter": bool(doc.get("declutter", True)),
        "mu": float(doc.get("mu", 0.5)),
        "n_max": float(doc.get("n_max", 10.0)),
        "tau_max": float(doc.get("tau_max", 0.1)),
        "sigma_samples": float(doc.get("sigma_samples", 32.0)),
        "csv": doc.get("csv"),
        "trial_dir": doc.get("trial_dir"),
        "predict": bool(doc.get("predict", False)),
    }


def _pick_config(cfg: dict) -> PickConfig:
    tau = cfg["tau_max"]
    return PickConfig(
        grasp=GraspParams(
            mu=cfg["mu"], n_max=cfg["n_max"],
            sample_density=cfg["sigma_samples"] / (2.0 * math.pi),
        ),
        planner=PlannerConfig(
            disturbance=DisturbanceSet(
                bias=(0.0, -0.5), radius=1.0, tau_min=-tau, tau_max=tau
            )
        ),
        noise=NoiseConfig(
            point_sigma=cfg["noise_sigma"], dropout_prob=cfg["dropout"],
            seed=cfg["noise_seed"],
        ),
        i_max=cfg["i_max"],
        declutter_enabled=cfg["declutter"],
    )


def _trial_quality(result) -> float | None:
    for event in reversed(result.log):
        if event.get("event") == "grasp":
            return event.get("quality")
    return None


def _write_trial(trial_dir: Path, seed: int, shelf: str, scene, result, cfg) -> None:
    doc = {
        "schema": 1,
        "scene": scene_to_dict(scene),
        "result": {
            "outcome": result.outcome.value,
            "nudges_executed": result.nudges_executed,
            "retries": result.retries,
            "events": result.log,
        },
        "config": {
            "shelf": shelf,
            "noise_sigma": cfg["noise_sigma"],
            "i_max": cfg["i_max"],
            "declutter": cfg["declutter"],
            "ee_radius": EffectorGeom().radius,
            "approach_offset": EffectorGeom().approach_offset,
        },
    }
    path = trial_dir / f"trial_{seed:05d}_{shelf}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_batch(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
        cfg = _batch_config(doc)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: bad batch config: {exc}", file=sys.stderr)
        return 1

    csv_path = Path(args.csv or cfg["csv"] or "batch_results.csv")
    trial_dir = Path(cfg["trial_dir"]) if cfg["trial_dir"] else None
    if trial_dir is not None:
        trial_dir.mkdir(parents=True, exist_ok=True)
    pick_cfg = _pick_config(cfg)

    counts: dict[str, dict[str, int]] = {}
    echo = {k: v for k, v in cfg.items() if k not in ("csv", "trial_dir")}
    truncated = False
    rows_written = 0
    try:
        csv_file = csv_path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        print(f"error: cannot write {csv_path}: {exc}", file=sys.stderr)
        return 1
    with csv_file:
        csv_file.write(f"# config: {json.dumps(echo, sort_keys=True)}\n")
        csv_file.write(CSV_HEADER + "\n")
        csv_file.flush()
        try:
            for index, seed in enumerate(cfg["seeds"]):
                shelf = (
                    SHELF_ORDER[index % len(SHELF_ORDER)]
                    if cfg["shelf"] == "mix" else cfg["shelf"]
                )
                tally = counts.setdefault(
                    shelf,
                    {o.value: 0 for o in Outcome} | {"Unpackable": 0, "nudges": 0},
                )
                try:
                    scene = generate_scene(seed, shelf, cfg["clutter"])
                except Unpackable:
                    tally["Unpackable"] += 1
                    csv_file.write(
                        f"{seed},{shelf},{int(cfg['clutter'])},"
                        f"{_fmt(cfg['noise_sigma'])},Unpackable,0,0,,\n"
                    )
                    csv_file.flush()
                    rows_written += 1
                    continue
                result = run_pick(scene, config=pick_cfg)
                log.info("seed %d shelf %s: %s", seed, shelf, result.outcome.value)
                tally[result.outcome.value] += 1
                tally["nudges"] += result.nudges_executed
                quality = _trial_quality(result)
                pickable = ""
                if cfg["predict"]:
                    pickable = "1" if scene_pickable(scene, pick_cfg) else "0"
                csv_file.write(
                    f"{seed},{shelf},{int(cfg['clutter'])},{_fmt(cfg['noise_sigma'])},"
                    f"{result.outcome.value},{result.nudges_executed},"
                    f"{result.retries},"
                    f"{_fmt(quality) if quality is not None else ''},{pickable}\n"
                )
                csv_file.flush()
                rows_written += 1
                if trial_dir is not None:
                    _write_trial(trial_dir, seed, shelf, scene, result, cfg)
        except KeyboardInterrupt:
            truncated = True
            csv_file.write("# truncated\n")
            csv_file.flush()

    total = {"trials": 0}
    print(f"config: {json.dumps(echo, sort_keys=True)}")
    header = (
        f"{'shelf':<8} {'trials':>6} {'success':>8} {'grasp_fail':>10} "
        f"{'declut_fail':>11} {'infeasible':>10} {'unpackable':>10} {'nudges':>7}"
    )
    print(header)
    for shelf in (s for s in SHELF_ORDER if s in counts):
        tally = counts[shelf]
        trials = sum(
            tally[name]
            for name in (o.value for o in Outcome)
        ) + tally["Unpackable"]
        print(
            f"{shelf:<8} {trials:>6} {tally['Success']:>8} {tally['GraspFailed']:>10} "
            f"{tally['DeclutterFailed']:>11} {tally['Infeasible']:>10} "
            f"{tally['Unpackable']:>10} {tally['nudges']:>7}"
        )
        for key, val in tally.items():
            total[key] = total.get(key, 0) + val
        total["trials"] += trials
    if len(counts) > 1:
        print(
            f"{'total':<8} {total['trials']:>6} {total.get('Success', 0):>8} "
            f"{total.get('GraspFailed', 0):>10} {total.get('DeclutterFailed', 0):>11} "
            f"{total.get('Infeasible', 0):>10} {total.get('Unpackable', 0):>10} "
            f"{total.get('nudges', 0):>7}"
        )
    print(f"wrote {rows_written} row(s) to {csv_path}" + (" (truncated)" if truncated else ""))
    return 1 if truncated else 0


# ---------------------------------------------------------------------------
# render


def cmd_render(args) -> int:
    try:
        doc = json.loads(Path(args.input).read_text())
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: cannot read {args.input!r}: {exc}", file=sys.stderr)
        return 1

    try:
        if isinstance(doc, dict) and "result" in doc:
            scene = sim.scene_from_dict(doc["scene"])
            conf = doc.get("config", {})
            ee = EffectorGeom(
                radius=float(conf.get("ee_radius", 0.02)),
                approach_offset=float(conf.get("approach_offset", 0.02)),
            )
            frames = render.trial_frames(
                scene, doc["result"].get("events", []), ee, args.px_per_m
            )
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            for number, (name, svg) in enumerate(frames):
                path = out_dir / f"{number:03d}_{name}.svg"
                path.write_text(svg)
            print(f"wrote {len(frames)} frame(s) to {out_dir}")
            return 0
        scene = sim.scene_from_dict(doc)
        out = Path(args.out)
        if out.suffix != ".svg":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "scene.svg"
        out.write_text(render.scene_svg(scene, px_per_m=args.px_per_m))
        print(f"wrote {out}")
        return 0
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="shelfpick",
        description="Bimanual grasp and declutter planning on simulated shelves.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="rank grasp/declutter plans for a scene file")
    p_plan.add_argument("scene", help="scene JSON file")
    p_plan.add_argument("--target", default=None, help="target item id override")
    p_plan.add_argument("--seed", type=int, default=0, help="observation noise seed")
    p_plan.add_argument("--noise-sigma", type=float, default=0.0,
                        help="observation noise sigma in meters")
    p_plan.add_argument("--top", type=int, default=10, help="rows to print")
    p_plan.add_argument("--render", default=None, metavar="SVG",
                        help="write a chord diagram SVG")
    p_plan.add_argument("--px-per-m", type=float, default=1000.0)
    _add_grasp_flags(p_plan)
    p_plan.set_defaults(func=cmd_plan)

    p_batch = sub.add_parser("batch", help="run seeded pick trials from a config file")
    p_batch.add_argument("config", help="batch config JSON file")
    p_batch.add_argument("--csv", default=None, help="per-trial CSV output path")
    p_batch.set_defaults(func=cmd_batch)

    p_render = sub.add_parser("render", help="render a scene or trial log to SVG")
    p_render.add_argument("input", help="scene JSON or trial JSON file")
    p_render.add_argument("--out", required=True, help="output file or directory")
    p_render.add_argument("--px-per-m", type=float, default=1000.0)
    p_render.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
