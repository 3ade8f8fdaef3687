"""Generate a folder of seeded shelf scenes as JSON files.

Usage: python scripts/make_scenes.py out_dir --count 30 --shelf mix --clutter
"""

import argparse
from pathlib import Path

from shelfpick import Unpackable, generate_scene, save_scene
from shelfpick.sim import SHELF_ORDER


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("--count", type=int, default=30)
    ap.add_argument("--start", type=int, default=0)
    ap.add_argument("--shelf", default="mix", choices=("mix",) + SHELF_ORDER)
    ap.add_argument("--clutter", action=argparse.BooleanOptionalAction, default=True)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = skipped = 0
    for k in range(args.count):
        seed = args.start + k
        shelf = SHELF_ORDER[k % len(SHELF_ORDER)] if args.shelf == "mix" else args.shelf
        try:
            scene = generate_scene(seed, shelf, args.clutter)
        except Unpackable:
            skipped += 1
            continue
        save_scene(scene, out / f"scene_{seed:05d}_{shelf}.json")
        written += 1
    print(f"wrote {written} scene(s) to {out}" + (f", {skipped} unpackable" if skipped else ""))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
