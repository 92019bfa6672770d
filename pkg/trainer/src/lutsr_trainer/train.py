"""Training loop: Adam on MSE over augmented crops, weight-file export.

The model starts at the skip path (nearest-neighbor x4), so the first
iterations already produce sane reconstructions and the modules learn
residual detail. Batches are indexed by iteration and prefetched by a small
thread pool; since each batch is a pure function of (seed, iteration), the
exported weights do not depend on the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import torch

from . import topo as T
from .data import CropDataset
from .net import LutNet
from .weights_io import write_weights


@dataclass
class TrainConfig:
    hr_dir: str
    variant: str = "S"
    v_f: int = 16
    iterations: int = 1000
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int = 32
    crop: int = 48  # LR crop side; HR crops are scale x larger
    seed: int = 0
    rotate: bool = True
    flip: bool = True
    loader_threads: int = 1


@dataclass
class TrainResult:
    net: LutNet
    losses: list[float] = field(default_factory=list)


def _check_config(cfg: TrainConfig) -> None:
    if cfg.iterations < 1:
        raise ValueError("need at least one iteration")
    if cfg.batch_size < 1:
        raise ValueError("batch size must be positive")
    if cfg.lr < 0:
        raise ValueError("learning rate must be non-negative")
    if cfg.loader_threads < 1:
        raise ValueError("loader_threads must be positive")


def train(cfg: TrainConfig, loss_log=None) -> TrainResult:
    """Run the full loop; optionally stream "iteration,loss" lines to a file."""
    _check_config(cfg)
    topology = T.builtin_topology(cfg.variant, cfg.v_f)
    dataset = CropDataset(cfg.hr_dir, cfg.crop, topology.scale)
    net = LutNet(topology, cfg.seed)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr, betas=cfg.betas, eps=cfg.eps)

    def fetch(it: int):
        return dataset.batch(cfg.seed, it, cfg.batch_size, cfg.rotate, cfg.flip)

    losses = []
    log = open(loss_log, "w", encoding="utf-8") if loss_log is not None else None
    try:
        with ThreadPoolExecutor(max_workers=cfg.loader_threads) as pool:
            window = cfg.loader_threads + 1
            pending = {
                it: pool.submit(fetch, it)
                for it in range(min(window, cfg.iterations))
            }
            for it in range(cfg.iterations):
                lr_b, hr_b = pending.pop(it).result()
                nxt = it + window
                if nxt < cfg.iterations:
                    pending[nxt] = pool.submit(fetch, nxt)
                sr = net.sr_planes(lr_b)
                n, h, w, c = hr_b.shape
                target = (
                    torch.from_numpy(hr_b)
                    .permute(0, 3, 1, 2)
                    .reshape(n * c, h, w)
                    .to(sr.dtype)
                )
                loss = torch.mean((sr - target) ** 2)
                opt.zero_grad()
                loss.backward()
                opt.step()
                losses.append(float(loss.detach()))
                if log is not None:
                    log.write(f"{it},{losses[-1]}\n")
    finally:
        if log is not None:
            log.close()
    return TrainResult(net, losses)


def export(net: LutNet, path) -> None:
    """Write the net's modules in the engine's binary weight format."""
    write_weights(path, net.topology, net.export_modules())
