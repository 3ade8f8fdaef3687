"""Success rate versus observation noise, with and without decluttering.

Usage: python scripts/sweep_noise.py --trials 30 --sigmas 0 0.001 0.003 0.005
"""

import argparse

from shelfpick import NoiseConfig, PickConfig, Unpackable, generate_scene, run_pick
from shelfpick.sim import SHELF_ORDER


def success_rate(trials: int, sigma: float, declutter: bool) -> tuple[float, int]:
    wins = total = 0
    for seed in range(trials):
        shelf = SHELF_ORDER[seed % len(SHELF_ORDER)]
        try:
            scene = generate_scene(seed, shelf, True)
        except Unpackable:
            continue
        config = PickConfig(
            noise=NoiseConfig(point_sigma=sigma, seed=seed),
            declutter_enabled=declutter,
        )
        result = run_pick(scene, config=config)
        wins += result.outcome.value == "Success"
        total += 1
    return (wins / total if total else 0.0), total


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--sigmas", type=float, nargs="+",
                    default=[0.0, 0.001, 0.003, 0.005])
    args = ap.parse_args()

    print(f"{'sigma_m':>8} {'declutter':>10} {'baseline':>9} {'trials':>7}")
    for sigma in args.sigmas:
        with_rate, total = success_rate(args.trials, sigma, True)
        without_rate, _ = success_rate(args.trials, sigma, False)
        print(f"{sigma:>8.4f} {with_rate:>10.3f} {without_rate:>9.3f} {total:>7}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
