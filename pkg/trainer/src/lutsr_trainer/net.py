"""Float replica of the engine's branch dataflow, built for gradient descent.

Every int8 table of the inference model is represented by its generating
network: four dense layers (head over the 4 pattern codes, two hidden
layers of width 64, linear output) with tanh-form gelu activations. The
forward pass runs the exact block structure of the engine — bit-plane
split, spatial 2x2 patterns, shifted pairwise aggregations, cross-channel
reads, skip connections, pixel shuffle — but keeps activations in float.
The only quantization kept during training is the aggregation output
(round half away from zero, clamp to [0, v_f)), wrapped in a
straight-through estimator so its gradient is the identity.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import topo as T

# The final stage's output layer starts near zero so the initial prediction
# collapses to the skip path (nearest-neighbor x4) and training learns
# residuals on top. Inner modules start at full scale: their job is to turn
# local patterns into informative aggregation codes, and a near-zero start
# there leaves the early stages with pure-noise gradients that random-walk
# the codes into the clamp rails.
_INIT_OUT_FRAC = 0.02


def round_half_away(x: torch.Tensor) -> torch.Tensor:
    """Round with ties away from zero (0.5 -> 1, -0.5 -> -1)."""
    return torch.copysign(torch.floor(x.abs() + 0.5), x)


def quantize_codes(x: torch.Tensor, bins: int) -> torch.Tensor:
    """Aggregation quantizer: round half away, clamp to [0, bins).

    Straight-through across the rounding: anywhere inside the code range the
    gradient is exactly the gradient of the unquantized sum. The clamp keeps
    its true gradient (zero beyond the rails) — if it were also treated as
    identity, a saturated code would keep feeling pressure to move outward
    while the forward pass stopped responding, and the early stages would
    run away into the rails and stay there.
    """
    rounded = round_half_away(x).detach() + (x - x.detach())
    return torch.clamp(rounded, 0.0, float(bins - 1))


def _prev_reflect(x: torch.Tensor, dim: int) -> torch.Tensor:
    # Value one step back along dim; index -1 reflects to 1.
    first = x.narrow(dim, 1, 1)
    return torch.cat([first, x.narrow(dim, 0, x.size(dim) - 1)], dim)


def _next_reflect(x: torch.Tensor, dim: int) -> torch.Tensor:
    # Value one step ahead along dim; index n reflects to n - 2.
    last = x.narrow(dim, x.size(dim) - 2, 1)
    return torch.cat([x.narrow(dim, 1, x.size(dim) - 1), last], dim)


class PatternModule(nn.Module):
    """Dense 4 -> 64 -> 64 -> 64 -> out_ch network over pattern codes."""

    def __init__(self, out_ch: int):
        super().__init__()
        widths = [4, T.HIDDEN, T.HIDDEN, T.HIDDEN, out_ch]
        self.net = nn.ModuleList(
            [nn.Linear(a, b) for a, b in zip(widths, widths[1:])]
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for lin in self.net[:-1]:
            x = F.gelu(lin(x), approximate="tanh")
        return self.net[-1](x)


def _module_key(branch: int, stage: int, slot: int) -> str:
    return f"b{branch}s{stage}t{slot}"


class LutNet(nn.Module):
    """Both branches of one variant; parameters are the mapping modules only."""

    def __init__(self, topology: T.Topology, seed: int = 0):
        super().__init__()
        self.topology = topology
        self._quantize_tables = False
        mods = {}
        for branch, stage, slot, kind, out_ch in T.module_specs(topology):
            mods[_module_key(branch, stage, slot)] = PatternModule(out_ch)
        self.mods = nn.ModuleDict(mods)
        self._init_params(seed)

    def _init_params(self, seed: int) -> None:
        # Head bounds shrink with the stage's code magnitude, hidden layers
        # use fan-in scaling; draw order is fixed so a seed pins every byte.
        gen = torch.Generator().manual_seed(seed & 0xFFFFFFFFFFFFFFFF)
        # With the input skip, features start at code scale (mean 7.5), so a
        # two-group aggregation sum would pin at the top clamp and starve the
        # query stages of signal. Shifting the spatial output bias centers
        # the sums at (v_f - 1) / 2 instead.
        sc1 = self.topology.skips[0]
        center = (self.topology.v_f - 1) / 4.0 - (7.5 if sc1 else 0.0)
        last = len(self.topology.blocks) - 1
        with torch.no_grad():
            for branch, stage, slot, kind, out_ch in T.module_specs(self.topology):
                bins = T.stage_bins(self.topology, stage)
                code_ms = (bins - 1) * (2 * bins - 1) / 6.0
                head_a = math.sqrt(6.0 / (4 * code_ms))
                hidden_a = math.sqrt(6.0 / T.HIDDEN)
                module = self.mods[_module_key(branch, stage, slot)]
                out_a = hidden_a * (_INIT_OUT_FRAC if stage == last else 1.0)
                for lin, a in zip(module.net, [head_a, hidden_a, hidden_a, out_a]):
                    lin.weight.uniform_(-a, a, generator=gen)
                    lin.bias.uniform_(-a / 2, a / 2, generator=gen)
                if stage == 0:
                    module.net[-1].bias.add_(center)

    def _mod(self, branch: int, stage: int, slot: int) -> PatternModule:
        return self.mods[_module_key(branch, stage, slot)]

    def _table_values(self, branch: int, stage: int, slot: int,
                      pats: torch.Tensor) -> torch.Tensor:
        # The engine stores every module output as an int8 entry with step
        # 2^scale_exp; values past that grid just clip at transfer. Training
        # through the same envelope (true clamp gradient) keeps the learned
        # modules representable instead of letting them outgrow the tables.
        module = self._mod(branch, stage, slot)
        if pats.dtype == next(module.parameters()).dtype:
            out = module(pats)
        else:
            # Functional pass with weights cast to the activation dtype, so
            # the quantized-eval path can run in float64.
            x = pats
            for lin in module.net[:-1]:
                x = F.gelu(
                    F.linear(x, lin.weight.to(x.dtype), lin.bias.to(x.dtype)),
                    approximate="tanh",
                )
            last = module.net[-1]
            out = F.linear(x, last.weight.to(x.dtype), last.bias.to(x.dtype))
        step = 2.0 ** T.stage_scale_exp(self.topology, stage)
        if self._quantize_tables:
            # Eval-only mirror of table transfer: snap onto the int8 grid.
            # All downstream arithmetic is exact on these dyadic values, so
            # this path reproduces the integer engine bit for bit.
            return torch.clamp(round_half_away(out / step), -128.0, 127.0) * step
        return torch.clamp(out, -128.0 * step, 127.0 * step)

    def _spatial(self, codes: torch.Tensor, branch: int) -> torch.Tensor:
        right = _next_reflect(codes, 2)
        down = _next_reflect(codes, 1)
        corner = _next_reflect(down, 2)
        pats = torch.stack([codes, right, down, corner], dim=-1)
        return self._table_values(branch, 0, 0, pats)

    def _query(self, feat: torch.Tensor, block: T.QueryBlock, branch: int, stage: int):
        bins = self.topology.v_f
        agg_codes = []
        for agg in block.aggregations:
            a, b = agg.groups
            ga = feat[..., 2 * a : 2 * a + 2]
            gb = feat[..., 2 * b : 2 * b + 2]
            dim = 2 if agg.direction == T.DIR_W else 1
            agg_codes.append(quantize_codes(_prev_reflect(ga, dim) + gb, bins))
        out = None
        for slot, lut in enumerate(block.luts):
            m = agg_codes[lut.source]
            dim = 2 if lut.kind == T.KIND_WC else 1
            n = _next_reflect(m, dim)
            pats = torch.stack([m[..., 0], n[..., 0], m[..., 1], n[..., 1]], dim=-1)
            vals = self._table_values(branch, stage, slot, pats)
            out = vals if out is None else out + vals
        return out

    def _branch(self, codes: torch.Tensor, branch: int, unit: int) -> torch.Tensor:
        topo = self.topology
        sc1, sc2, sc3 = topo.skips
        feat = self._spatial(codes, branch)
        if sc1:
            feat = feat + codes[..., None]
        last = len(topo.blocks) - 1
        for stage in range(1, last):
            out = self._query(feat, topo.blocks[stage], branch, stage)
            feat = out + feat if sc2 else out
        final = self._query(feat, topo.blocks[last], branch, last)
        if sc3:
            final = final + codes[..., None] * float(unit)
        # Pixel shuffle: channel dy*s + dx lands at offset (dy, dx).
        s = topo.scale
        n, h, w, _ = final.shape
        out = final.reshape(n, h, w, s, s).permute(0, 1, 3, 2, 4)
        return out.reshape(n, h * s, w * s)

    def forward(self, msb: torch.Tensor, lsb: torch.Tensor) -> torch.Tensor:
        """Sum of both branch outputs for (N, H, W) code planes."""
        return self._branch(msb, T.MSB, 16) + self._branch(lsb, T.LSB, 1)

    def sr_planes(self, images: np.ndarray) -> torch.Tensor:
        """Float SR planes for a uint8 (N, H, W, C) batch, channels folded in."""
        if images.dtype != np.uint8:
            raise ValueError("expected uint8 images")
        # Quantized eval runs in float64: the grid snap turns every value
        # dyadic, and double precision keeps the snap itself from flipping
        # on ties that float32 rounding of the module output would create.
        dtype = torch.float64 if self._quantize_tables else next(self.parameters()).dtype
        planes = torch.from_numpy(np.array(images, copy=True))
        n, h, w, c = planes.shape
        planes = planes.permute(0, 3, 1, 2).reshape(n * c, h, w)
        msb = (planes >> 4).to(dtype)
        lsb = (planes & 15).to(dtype)
        return self(msb, lsb)

    def predict(self, image: np.ndarray, quantize: bool = False) -> np.ndarray:
        """Upscale one (H, W, 3) uint8 image to uint8, engine-style rounding.

        With ``quantize=True`` module outputs are snapped onto the int8 entry
        grid first, which makes the result match the integer engine exactly.
        """
        self._quantize_tables = quantize
        try:
            with torch.no_grad():
                out = self.sr_planes(image[None])
        finally:
            self._quantize_tables = False
        s = self.topology.scale
        h, w = image.shape[:2]
        sr = torch.clamp(round_half_away(out), 0.0, 255.0).to(torch.uint8)
        return sr.reshape(1, 3, h * s, w * s).permute(0, 2, 3, 1).numpy()[0]

    def export_modules(self) -> dict:
        """Layer arrays in the weight-file layout: {(b, s, t): [(w, b) x 4]}."""
        out = {}
        for branch, stage, slot, kind, out_ch in T.module_specs(self.topology):
            module = self._mod(branch, stage, slot)
            out[(branch, stage, slot)] = [
                (
                    lin.weight.detach().cpu().numpy().astype(np.float32),
                    lin.bias.detach().cpu().numpy().astype(np.float32),
                )
                for lin in module.net
            ]
        return out

    def load_modules(self, modules: dict) -> None:
        """Inverse of export_modules."""
        with torch.no_grad():
            for branch, stage, slot, kind, out_ch in T.module_specs(self.topology):
                module = self._mod(branch, stage, slot)
                for lin, (w, b) in zip(module.net, modules[(branch, stage, slot)]):
                    lin.weight.copy_(torch.from_numpy(np.ascontiguousarray(w)))
                    lin.bias.copy_(torch.from_numpy(np.ascontiguousarray(b)))
