"""Spectral-fusion variant and pair-count sweeps, plus RGB degradation sensitivity."""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

import torch

from s2ml.datagen import DEGRADATION_KINDS, DegradationSpec, Sample
from s2ml.freq_fusion import FreqFusion
from s2ml.harness.config import RunConfig
from s2ml.harness.figures import residual_grid
from s2ml.harness.records import write_json, write_table
from s2ml.harness.train import evaluate_model, load_split, stack, train
from s2ml.network import S2ML, count_parameters
from s2ml.spectra import decompose, dft2

log = logging.getLogger(__name__)

VARIANT_LABELS = {"V1": "V-1", "V2": "V-2", "V3": "V-3", "V4": "V-4", "V5": "V-5", "full": "S2ML"}
PAIR_COUNTS = (1, 2, 3, 4)
COLUMNS = ["label", "rmse", "rel", "d1", "d2", "d3", "params", "wall_time"]


@torch.no_grad()
def removed_path_check(model: S2ML, rgb, raw) -> dict:
    """For every pair, whether fused amplitude / phase equal the depth-side ones bit-exactly."""
    _, rec = model.features(rgb, raw, trace=True)
    out = []
    for pair, r in zip(model.pair_list, rec):
        if not isinstance(pair.freq, FreqFusion):
            out.append({"amplitude_identity": None, "phase_identity": None})
            continue
        _, polar = pair.freq(r["depth_in"], r["rgb_side_in"], return_polar=True)
        depth = decompose(dft2(r["depth_in"]))
        out.append({
            "amplitude_identity": bool(torch.equal(polar.amplitude, depth.amplitude)),
            "phase_identity": bool(torch.equal(polar.phase, depth.phase)),
        })
    return {"pairs": out}


def residual_rows(model: S2ML, sample: Sample, pairs=None):
    rgb, raw, _ = stack([sample], next(model.parameters()).dtype)
    pairs = pairs or [model.cfg.pairs]
    maps = []
    for i in pairs:
        r_ff, r_fi = model.residual_maps(rgb, raw, i)
        maps.append((r_ff[0, 0].numpy(), r_fi[0, 0].numpy()))
    return maps


def run_ablation(base: RunConfig, train_samples=None, test_samples=None, out_dir=None) -> list[dict]:
    """Train every variant at N = base.model.pairs and the full model at N = 1..4.

    All runs share data, seed and schedule. The "N=<base>" row reuses the full
    model's run. Writes ablation.csv/.txt, checks.json and residual figures.
    """
    out = Path(out_dir or base.out)
    out.mkdir(parents=True, exist_ok=True)
    if train_samples is None:
        train_samples = load_split(base, "train")
    if test_samples is None:
        test_samples = load_split(base, "test")
    probe = test_samples[0]
    rgb, raw, _ = stack([probe])

    runs = {}

    def run(label, model_cfg):
        cfg = dataclasses.replace(base, model=model_cfg, out=str(out / "runs" / label))
        res = train(cfg, train_samples, test_samples[: base.val_samples], save=True)
        rep, _, _ = evaluate_model(res.model, test_samples, base.eval_batch)
        row = {"label": label, **{k: v for k, v in rep.to_dict().items() if k != "n_valid"},
               "params": count_parameters(res.model), "wall_time": res.wall_time}
        log.info("%s: rmse %.4f (%d params)", label, rep.rmse, row["params"])
        runs[label] = (res.model, row)
        return res.model, row

    rows = []
    checks = {}
    for variant in ("V1", "V2", "V3", "V4", "V5", "full"):
        label = VARIANT_LABELS[variant]
        model, row = run(label, dataclasses.replace(base.model, variant=variant))
        rows.append(row)
        checks[label] = removed_path_check(model, rgb, raw)

    full_model, full_row = runs["S2ML"]
    for n in PAIR_COUNTS:
        label = f"N={n}"
        if n == base.model.pairs:
            rows.append({**full_row, "label": label})
            continue
        _, row = run(label, dataclasses.replace(base.model, variant="full", pairs=n))
        rows.append(row)

    text = write_table(rows, out / "ablation.csv", out / "ablation.txt", COLUMNS)
    write_json(out / "checks.json", checks)

    fig_dir = out / "figures"
    fig_dir.mkdir(exist_ok=True)
    grid = {}
    for variant in ("V1", "V2", "V3", "V4", "V5", "full"):
        label = VARIANT_LABELS[variant]
        (r_ff, r_fi), = residual_rows(runs[label][0], probe)
        grid[label] = [r_ff, r_fi]
        residual_grid({label: [r_ff, r_fi]}, ["R_FF", "R_FI"], fig_dir / f"residuals_{label}.png")
    residual_grid(grid, ["R_FF", "R_FI"], fig_dir / "residuals_variants.png",
                  "residual maps of the last fusion pair")
    n4 = runs.get("N=4", runs.get("S2ML") if base.model.pairs == 4 else None)
    if n4 is not None:
        model = n4[0]
        maps = residual_rows(model, probe, pairs=list(range(1, model.cfg.pairs + 1)))
        residual_grid({"R_FI": [m[1] for m in maps]},
                      [f"pair {i}" for i in range(1, model.cfg.pairs + 1)],
                      fig_dir / "residuals_N4_pairs.png", "R_FI per fusion pair, N=4")
    (out / "ablation_summary.json").write_text(json.dumps({"rows": rows}, indent=2))
    print(text)
    return rows


def sensitivity(model: S2ML, test_samples: list[Sample], batch: int = 4, seed: int = 0,
                out_dir=None) -> list[dict]:
    """Clean plus five degraded-RGB evaluations of one model."""
    rows = []
    for kind in ("clean",) + DEGRADATION_KINDS:
        spec = None if kind == "clean" else DegradationSpec(kind)
        rep, _, _ = evaluate_model(model, test_samples, batch, degrade=spec, degrade_seed=seed)
        rows.append({"label": kind, **rep.to_dict()})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        text = write_table(rows, out / "sensitivity.csv", out / "sensitivity.txt",
                           ["label", "rmse", "rel", "d1", "d2", "d3", "n_valid"])
        print(text)
    return rows
