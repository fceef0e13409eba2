"""Write the synthetic RGB-D benchmark (256 train / 64 test at 192x288 by default)."""

import argparse

from s2ml.datagen import generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/toy")
    ap.add_argument("--n", type=int, default=320)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    path = generate_dataset(args.out, n=args.n, seed=args.seed)
    print(f"dataset written to {path}")


if __name__ == "__main__":
    main()
