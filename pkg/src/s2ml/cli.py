"""Command line entry point: ``s2ml <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np


def cmd_gen_data(args):
    from s2ml.datagen import generate_dataset

    crop = None if args.no_crop else tuple(args.crop)
    out = generate_dataset(args.out, n=args.n, seed=args.seed, n_test=args.n_test,
                           size=tuple(args.size), crop=crop)
    print(f"wrote {args.n} samples to {out}")


def cmd_train(args):
    from s2ml.harness.config import RunConfig
    from s2ml.harness.train import train

    cfg = RunConfig.load(args.config)
    if args.out:
        cfg.out = args.out
    res = train(cfg)
    print(json.dumps({"checkpoint": str(res.checkpoint), "final_loss": res.losses[-1] if res.losses else None,
                      "wall_time": res.wall_time}))


def cmd_eval(args):
    from s2ml.datagen import DegradationSpec, load_dataset
    from s2ml.harness.train import evaluate_model, write_report
    from s2ml.network import load_checkpoint

    model, _ = load_checkpoint(args.ckpt)
    samples = load_dataset(args.data, None if args.split == "all" else args.split)
    spec = DegradationSpec(args.degrade) if args.degrade else None
    rep, _, _ = evaluate_model(model, samples, args.batch, degrade=spec, degrade_seed=args.seed)
    if args.out:
        write_report(args.out, rep)
    print(json.dumps(rep.to_dict()))


def cmd_sensitivity(args):
    from s2ml.datagen import load_dataset
    from s2ml.harness.ablation import sensitivity
    from s2ml.network import load_checkpoint

    model, _ = load_checkpoint(args.ckpt)
    samples = load_dataset(args.data, args.split)
    sensitivity(model, samples, args.batch, args.seed, out_dir=args.out)


def cmd_ablate(args):
    from s2ml.harness.ablation import run_ablation
    from s2ml.harness.config import RunConfig

    cfg = RunConfig.load(args.config)
    run_ablation(cfg, out_dir=args.out)


def cmd_analyze_spectrum(args):
    from s2ml.datagen import carve_invalid, load_depth_png, spectrum_report

    gt = load_depth_png(args.depth)
    raw = carve_invalid(gt, args.coverage, args.seed)
    rep = spectrum_report(gt, raw, args.rho)
    d = rep.to_dict()
    d["invalid_fraction"] = float((raw == 0).mean())
    print(json.dumps(d, indent=2))


def cmd_visualize_residuals(args):
    from s2ml.datagen import load_dataset
    from s2ml.harness.ablation import residual_rows
    from s2ml.harness.figures import residual_grid
    from s2ml.network import load_checkpoint

    model, _ = load_checkpoint(args.ckpt)
    samples = load_dataset(args.data, args.split)[: args.n]
    rows = {}
    for k, s in enumerate(samples):
        (r_ff, r_fi), = residual_rows(model, s, pairs=[args.pair])
        rows[f"sample {s.meta.get('id', k)}"] = [s.raw_depth, r_ff, r_fi]
    out = Path(args.out or f"residuals_pair{args.pair}.png")
    residual_grid(rows, ["raw depth", "R_FF", "R_FI"], out, f"pair {args.pair}")
    print(f"wrote {out}")


def cmd_gradcheck(args):
    from s2ml.harness.gradcheck import MODULES, gradcheck

    reports = gradcheck(args.modules or MODULES, eps=args.eps, tol=args.tol, seed=args.seed)
    failed = False
    for name, r in reports.items():
        status = "ok" if r.ok else "FAIL"
        print(f"{name:15s} max_rel_err={r.max_rel_err:.3e} checked={r.n_checked:3d} {status}")
        for f in r.failures:
            print(f"    {f}")
        failed |= not r.ok
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="s2ml", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate the synthetic RGB-D benchmark")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=320)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-test", type=int, default=None)
    g.add_argument("--size", type=int, nargs=2, default=(240, 320), metavar=("H", "W"))
    g.add_argument("--crop", type=int, nargs=2, default=(192, 288), metavar=("H", "W"))
    g.add_argument("--no-crop", action="store_true")
    g.set_defaults(fn=cmd_gen_data)

    t = sub.add_parser("train", help="train from a JSON run config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", default=None)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--degrade", choices=["occlusion", "noise", "noise_plus", "pl", "pl_plus"])
    e.add_argument("--split", default="test", choices=["train", "test", "all"])
    e.add_argument("--batch", type=int, default=4)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None, help="write the MetricReport as JSON")
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("sensitivity", help="clean + degraded-RGB table for one checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", default="test", choices=["train", "test"])
    s.add_argument("--batch", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="runs/sensitivity")
    s.set_defaults(fn=cmd_sensitivity)

    a = sub.add_parser("ablate", help="variant and pair-count sweeps")
    a.add_argument("--config", required=True)
    a.add_argument("--out", default=None)
    a.set_defaults(fn=cmd_ablate)

    sp = sub.add_parser("analyze-spectrum", help="band energies before/after carving invalid areas")
    sp.add_argument("--depth", required=True, help="16-bit depth PNG in millimeters")
    sp.add_argument("--coverage", type=float, default=0.25)
    sp.add_argument("--rho", type=float, default=0.25)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_analyze_spectrum)

    v = sub.add_parser("visualize-residuals", help="R_FF / R_FI maps for one fusion pair")
    v.add_argument("--ckpt", required=True)
    v.add_argument("--pair", type=int, required=True)
    v.add_argument("--data", default="data/toy")
    v.add_argument("--split", default="test", choices=["train", "test"])
    v.add_argument("--n", type=int, default=4)
    v.add_argument("--out", default=None)
    v.set_defaults(fn=cmd_visualize_residuals)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient checks (float64)")
    gc.add_argument("--modules", nargs="*", default=None)
    gc.add_argument("--eps", type=float, default=1e-6)
    gc.add_argument("--tol", type=float, default=1e-3)
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    np.set_printoptions(precision=4)
    rc = args.fn(args)
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
