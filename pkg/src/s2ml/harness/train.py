"""Training loop and evaluation."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from s2ml.datagen import DegradationSpec, Sample, degrade_rgb, load_dataset, load_manifest
from s2ml.errors import TrainingError
from s2ml.harness.config import RunConfig
from s2ml.harness.records import METRIC_SCHEMA, write_json
from s2ml.network import S2ML, save_checkpoint
from s2ml.objective import MetricReport, evaluate_metrics, mean_report, total_loss

log = logging.getLogger(__name__)


def set_determinism(seed: int):
    torch.manual_seed(seed)
    np.random.seed(seed)
    torch.use_deterministic_algorithms(True)


def stack(samples: list[Sample], dtype=torch.float32):
    rgb = torch.from_numpy(np.stack([s.rgb for s in samples])).to(dtype)
    raw = torch.from_numpy(np.stack([s.raw_depth for s in samples])).to(dtype)
    gt = torch.from_numpy(np.stack([s.gt_depth for s in samples])).to(dtype)
    return rgb, raw, gt


def batch_schedule(n: int, batch: int, steps: int, seed: int):
    """Indices per step: reshuffle every epoch with a seeded generator, drop nothing."""
    g = torch.Generator().manual_seed(seed)
    perm = torch.randperm(n, generator=g).tolist()
    pos = 0
    for _ in range(steps):
        idx = []
        while len(idx) < min(batch, n):
            if pos == n:
                perm = torch.randperm(n, generator=g).tolist()
                pos = 0
            idx.append(perm[pos])
            pos += 1
        yield idx


def load_split(cfg: RunConfig, split: str) -> list[Sample]:
    try:
        load_manifest(cfg.data)
    except FileNotFoundError as e:
        raise TrainingError(f"dataset not found: {e}") from e
    samples = load_dataset(cfg.data, split)
    if split == "train" and cfg.train_subset:
        samples = samples[: cfg.train_subset]
    return samples


@torch.no_grad()
def predict(model: S2ML, samples: list[Sample], batch: int = 4, degrade: DegradationSpec | None = None,
            degrade_seed: int = 0):
    model.eval()
    dtype = next(model.parameters()).dtype
    preds = []
    for start in range(0, len(samples), batch):
        chunk = samples[start:start + batch]
        rgb, raw, _ = stack(chunk, dtype)
        if degrade is not None:
            rgb = torch.from_numpy(np.stack([
                degrade_rgb(s.rgb, degrade, seed=degrade_seed + start + k) for k, s in enumerate(chunk)
            ])).to(dtype)
        preds.append(model(rgb, raw))
    return torch.cat(preds) if preds else torch.empty(0)


def evaluate_model(model: S2ML, samples: list[Sample], batch: int = 4,
                   degrade: DegradationSpec | None = None, degrade_seed: int = 0):
    """Mean per-sample MetricReport over ``samples`` against their ground truth."""
    pred = predict(model, samples, batch, degrade, degrade_seed)
    reports = [evaluate_metrics(pred[i], torch.from_numpy(s.gt_depth).to(pred.dtype))
               for i, s in enumerate(samples)]
    return mean_report(reports), reports, pred


def hole_rmse(pred: torch.Tensor, raw: torch.Tensor, gt: torch.Tensor) -> float:
    """RMSE against gt restricted to pixels where raw depth is missing (and gt valid)."""
    m = (raw <= 0) & (gt > 0)
    if not m.any():
        return 0.0
    e = (pred.double() - gt.double())[m]
    return math.sqrt((e * e).mean().item())


@dataclass
class TrainResult:
    model: S2ML
    losses: list[float]
    log: list[dict] = field(default_factory=list)
    checkpoint: Path | None = None
    wall_time: float = 0.0


def _diagnose(model, step, loss, losses):
    bad = [n for n, p in model.named_parameters()
           if not torch.isfinite(p).all() or (p.grad is not None and not torch.isfinite(p.grad).all())]
    return (f"non-finite loss {loss} at step {step}; last losses {losses[-5:]}; "
            f"non-finite parameters/gradients: {bad[:10]}")


def train(cfg: RunConfig, train_samples: list[Sample] | None = None,
          val_samples: list[Sample] | None = None, save: bool = True) -> TrainResult:
    """Adam on the masked L1+L2 loss; writes ckpt.npz, log.jsonl and config.json to cfg.out."""
    if train_samples is None:
        train_samples = load_split(cfg, "train")
        if val_samples is None:
            val_samples = load_split(cfg, "test")[: cfg.val_samples]
    if not train_samples:
        raise TrainingError("empty training set")
    set_determinism(cfg.seed)
    model = S2ML(cfg.model)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=cfg.betas)
    rgb, raw, gt = stack(train_samples)
    losses, records = [], []
    t0 = time.time()
    model.train()
    for step, idx in enumerate(batch_schedule(len(train_samples), cfg.batch, cfg.steps, cfg.seed)):
        pred = model(rgb[idx], raw[idx])
        loss = total_loss(pred, gt[idx])
        lv = loss.item()
        if not math.isfinite(lv):
            raise TrainingError(_diagnose(model, step, lv, losses))
        opt.zero_grad(set_to_none=True)
        loss.backward()
        if cfg.grad_clip:
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        opt.step()
        losses.append(lv)
        records.append({"step": step, "loss": lv})
        last = step == cfg.steps - 1
        if val_samples and ((step + 1) % cfg.val_every == 0 or last):
            rep, _, _ = evaluate_model(model, val_samples, cfg.eval_batch)
            records.append({"step": step, "val": rep.to_dict()})
            log.info("step %d loss %.4f val rmse %.4f", step, lv, rep.rmse)
            model.train()
    model.eval()
    result = TrainResult(model=model, losses=losses, log=records, wall_time=time.time() - t0)
    if save:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg.save(out / "config.json")
        with open(out / "log.jsonl", "w") as fh:
            for r in records:
                fh.write(json.dumps(r) + "\n")
        result.checkpoint = out / "ckpt.npz"
        save_checkpoint(model, result.checkpoint, extra={"steps": cfg.steps, "seed": cfg.seed})
    return result


def write_report(path, rep: MetricReport):
    write_json(path, rep.to_dict(), METRIC_SCHEMA)
