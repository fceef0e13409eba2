"""Overfit the two-pair model on 8 scenes and report train RMSE and hole RMSE."""

import argparse
import json

from s2ml.harness.overfit import overfit_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--samples", type=int, default=8)
    ap.add_argument("--size", type=int, nargs=2, default=(96, 144))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    r = overfit_run(args.samples, args.steps, tuple(args.size), args.seed)
    print(json.dumps(r.to_dict(), indent=2))
    ok = r.rmse_fraction < 0.05 and r.hole_improvement >= 0.5
    print("PASS" if ok else "FAIL")


if __name__ == "__main__":
    main()
