"""Variant sweep (V-1..V-5, full) and pair-count sweep (N=1..4), then the sensitivity table."""

import argparse
from pathlib import Path

from s2ml.harness.ablation import run_ablation, sensitivity
from s2ml.harness.config import RunConfig
from s2ml.harness.train import load_split
from s2ml.network import load_checkpoint


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/ablation_tiny.json")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = RunConfig.load(args.config)
    out = Path(args.out or cfg.out)
    run_ablation(cfg, out_dir=out)
    model, _ = load_checkpoint(out / "runs" / "S2ML" / "ckpt.npz")
    sensitivity(model, load_split(cfg, "test"), cfg.eval_batch, cfg.seed, out_dir=out / "sensitivity")


if __name__ == "__main__":
    main()
