"""Run one pick trial end to end and print the event log.

Usage: python scripts/demo_pick.py --seed 3 --shelf center --render out_dir
"""

import argparse
import json
from pathlib import Path

from shelfpick import NoiseConfig, PickConfig, generate_scene, run_pick
from shelfpick.render import trial_frames
from shelfpick.sim import SHELF_ORDER


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--shelf", default="center", choices=SHELF_ORDER)
    ap.add_argument("--clutter", action=argparse.BooleanOptionalAction, default=True)
    ap.add_argument("--noise-sigma", type=float, default=0.0)
    ap.add_argument("--i-max", type=int, default=3)
    ap.add_argument("--render", default=None, metavar="DIR",
                    help="write per-step SVG frames here")
    args = ap.parse_args()

    scene = generate_scene(args.seed, args.shelf, args.clutter)
    print(f"scene seed={args.seed} shelf={args.shelf}:")
    for item in scene.items:
        mark = "*" if item.id == scene.target_id else " "
        print(f" {mark} {item.id:<8} y={item.y:.3f} z={item.z:.3f} "
              f"w={item.extent_y:.3f} h={item.extent_z:.3f} kg={item.weight:.2f}")

    config = PickConfig(
        noise=NoiseConfig(point_sigma=args.noise_sigma, seed=args.seed),
        i_max=args.i_max,
    )
    result = run_pick(scene, config=config)
    print(f"outcome: {result.outcome.value}  nudges={result.nudges_executed} "
          f"retries={result.retries}")
    for event in result.log:
        print("  " + json.dumps(event, sort_keys=True, default=str)[:120])

    if args.render:
        out = Path(args.render)
        out.mkdir(parents=True, exist_ok=True)
        frames = trial_frames(scene, result.log, config.ee)
        for number, (name, svg) in enumerate(frames):
            (out / f"{number:03d}_{name}.svg").write_text(svg)
        print(f"wrote {len(frames)} frame(s) to {out}")
    return 0 if result.outcome.value == "Success" else 2


if __name__ == "__main__":
    raise SystemExit(main())
