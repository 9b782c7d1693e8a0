"""Optimiser, learning-rate schedule, training loop and evaluation."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from . import spkt
from .analysis.metrics import psnr, ssim
from .data import ImagePair, random_crops, to_chw
from .network import DerainNet, NetworkConfig, charbonnier_loss
from .nn import Parameter
from .tensor import no_grad

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2000
    batch_size: int = 2
    learning_rate: float = 2e-3
    min_learning_rate: float = 1e-5
    lr_schedule: Literal["cosine"] = "cosine"
    patch_size: int = 16
    loss: Literal["charbonnier"] = "charbonnier"
    charbonnier_eps: float = 1e-3
    log_interval: int = 50
    eval_interval: int = 250
    seed: int = 0

    def __post_init__(self):
        for name in ("iterations", "batch_size", "learning_rate", "patch_size", "charbonnier_eps", "log_interval", "eval_interval"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lr_schedule != "cosine" or self.loss != "charbonnier":
            raise ValueError("only the cosine schedule and Charbonnier loss are supported")


class Adam:
    def __init__(self, params: list[Parameter], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.step_count += 1
        c1 = 1.0 - self.b1**self.step_count
        c2 = 1.0 - self.b2**self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= self.b1
            m += (1.0 - self.b1) * p.grad
            v *= self.b2
            v += (1.0 - self.b2) * p.grad * p.grad
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def cosine_lr(it: int, cfg: TrainConfig) -> float:
    frac = min(it / max(cfg.iterations, 1), 1.0)
    return cfg.min_learning_rate + 0.5 * (cfg.learning_rate - cfg.min_learning_rate) * (1.0 + math.cos(math.pi * frac))


class TrainingDiverged(RuntimeError):
    pass


def derain(net: DerainNet, rainy_chw: np.ndarray, chunk: int = 8) -> np.ndarray:
    """Eval-mode inference on (B, 3, H, W) without building a graph."""
    was_training = net.training
    net.eval()
    try:
        with no_grad():
            outs = [net(rainy_chw[i : i + chunk]).data for i in range(0, len(rainy_chw), chunk)]
    finally:
        net.train(was_training)
    return np.concatenate(outs)


def evaluate(net: DerainNet, pairs: list[ImagePair]) -> dict:
    """Mean PSNR/SSIM of the derained outputs and of the rainy inputs."""
    rainy = to_chw(np.stack([p.rainy for p in pairs]))
    clean = to_chw(np.stack([p.clean for p in pairs]))
    out = derain(net, rainy)
    return {
        "psnr": float(np.mean([psnr(o, c) for o, c in zip(out, clean)])),
        "ssim": float(np.mean([ssim(o.transpose(1, 2, 0), c.transpose(1, 2, 0)) for o, c in zip(out, clean)])),
        "input_psnr": float(np.mean([psnr(r, c) for r, c in zip(rainy, clean)])),
    }


def save_network(path, net: DerainNet, extra: dict | None = None) -> None:
    manifest = {"network": net.cfg.to_dict(), "topology": net.topology(), **(extra or {})}
    spkt.save_checkpoint(path, net.state_dict(), manifest)


def load_network(path, **overrides) -> tuple[DerainNet, dict]:
    """Rebuild a network from a checkpoint. ``overrides`` replace config fields
    (e.g. ``neuron_variant="lif"``); tensors without a counterpart are skipped."""
    manifest, state = spkt.load_checkpoint(path)
    cfg = NetworkConfig.from_dict({**manifest["network"], **overrides})
    net = DerainNet(cfg)
    net.load_state_dict(state, strict=not overrides)
    return net, manifest


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    best_psnr: float = -math.inf
    best_iteration: int = 0
    best_state: dict | None = None


def train(
    net: DerainNet,
    train_pairs: list[ImagePair],
    cfg: TrainConfig,
    val_pairs: list[ImagePair] | None = None,
    out_dir=None,
) -> TrainResult:
    """Fit ``net`` with Adam on random crops. Deterministic for a fixed seed.

    Every ``eval_interval`` iterations (and at the end) the validation PSNR
    is measured; the best state is kept and, with ``out_dir``, written to
    ``best.ckpt``. ``metrics.jsonl`` gets one record per log interval.
    """
    if not train_pairs:
        raise ValueError("training set is empty")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_file = open(out / "metrics.jsonl", "w")
    else:
        log_file = None

    rng = np.random.default_rng(cfg.seed)
    params = net.parameters()
    opt = Adam(params, cfg.learning_rate)
    result = TrainResult()
    net.train()
    t0 = time.perf_counter()
    try:
        for it in range(1, cfg.iterations + 1):
            opt.lr = cosine_lr(it - 1, cfg)
            rainy, clean = random_crops(train_pairs, cfg.batch_size, cfg.patch_size, rng)
            pred = net(rainy)
            loss = charbonnier_loss(pred, clean, cfg.charbonnier_eps)
            value = loss.item()
            if not math.isfinite(value):
                if out is not None:
                    spkt.save_tensor(out / "diverged_rainy.spkt", rainy)
                    spkt.save_tensor(out / "diverged_clean.spkt", clean)
                raise TrainingDiverged(f"non-finite loss {value} at iteration {it}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            result.losses.append(value)

            record = None
            if it % cfg.log_interval == 0 or it == cfg.iterations:
                record = {
                    "iteration": it,
                    "loss": float(np.mean(result.losses[-cfg.log_interval :])),
                    "psnr": psnr(pred.data, clean),
                    "lr": opt.lr,
                    "wall_ms": round((time.perf_counter() - t0) * 1e3, 1),
                }
            if it % cfg.eval_interval == 0 or it == cfg.iterations:
                metrics = evaluate(net, val_pairs) if val_pairs else {"psnr": psnr(pred.data, clean)}
                record = record or {"iteration": it, "loss": value, "lr": opt.lr, "wall_ms": round((time.perf_counter() - t0) * 1e3, 1)}
                record["val_psnr"] = metrics["psnr"]
                if metrics["psnr"] > result.best_psnr:
                    result.best_psnr = metrics["psnr"]
                    result.best_iteration = it
                    result.best_state = net.state_dict()
                    if out is not None:
                        save_network(out / "best.ckpt", net, {"iteration": it, "val_psnr": metrics["psnr"]})
            if record is not None:
                result.history.append(record)
                logger.info("iter %d loss %.5f lr %.2e", it, record["loss"], record["lr"])
                if log_file is not None:
                    log_file.write(json.dumps(record) + "\n")
                    log_file.flush()
    finally:
        if log_file is not None:
            log_file.close()
    if out is not None:
        save_network(out / "last.ckpt", net, {"iteration": cfg.iterations})
    return result


def train_config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
