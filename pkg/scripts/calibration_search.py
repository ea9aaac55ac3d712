"""Run the convention search without the pass/fail gate and print the table.

    python scripts/calibration_search.py [--samples 64] [--save constants.json]
"""

import argparse

from cyltomo.recon import calibrate_conventions


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--save")
    args = ap.parse_args()
    c = calibrate_conventions(search_samples=args.samples, log=print, strict=False)
    print("\nkappa/pi  s_h   C_rec          filtered delta_v")
    for kappa, s_h, cr, ci, d in sorted(c.search, key=lambda r: (r[4] is None, r[4])):
        print(f"{kappa:+8.2f} {s_h:+3d}   {complex(cr, ci)!s:14} {'-' if d is None else f'{d:.3f}'}")
    print(f"\nthreshold met: {c.threshold_met}")
    if args.save:
        c.save(args.save)


if __name__ == "__main__":
    main()
