"""Joint latent optimization for a window of frames with a temporal
smoothness term: mean pairwise squared L2 distance among the window's
latent vectors, weighted into the summed per-frame objectives.
"""

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import DimensionError, OptimizationError
from .inpaint import (InpaintResult, OptimConfig, _contextual, _make_optimizer,
                      _perceptual, _to_tensors, blend, save_result)
from .models import _check_latents


@dataclass
class SequenceOptimConfig(OptimConfig):
    mu: float = 0.1

    def __post_init__(self):
        super().__post_init__()
        if self.mu < 0:
            raise ValueError("mu must be >= 0")


@dataclass
class SequenceWindow:
    frames: list  # damaged images
    masks: list
    results: list = field(default_factory=list)
    smoothness_trace: list = field(default_factory=list)  # (iteration, l_sm)


def smoothness_loss(latents):
    """Mean squared L2 distance over all unordered latent pairs."""
    if len(latents) < 2:
        raise DimensionError(f"smoothness loss needs >= 2 latents, got {len(latents)}")
    zs = [np.asarray(z, dtype=np.float64) for z in latents]
    d = zs[0].shape
    for z in zs:
        if z.shape != d:
            raise DimensionError("latents have unequal lengths")
    return float(_smoothness_torch([torch.as_tensor(z) for z in zs]))


def _smoothness_torch(z_list):
    W = len(z_list)
    total = None
    for i in range(W):
        for j in range(i + 1, W):
            sq = ((z_list[i] - z_list[j]) ** 2).sum()
            total = sq if total is None else total + sq
    return total / (W * (W - 1) / 2)


def smoothness_grad(latents):
    """Analytic gradient of the smoothness loss w.r.t. each latent."""
    zs = np.stack([np.asarray(z, dtype=np.float64) for z in latents])
    W = len(zs)
    n_pairs = W * (W - 1) / 2
    grads = np.zeros_like(zs)
    for i in range(W):
        grads[i] = (2.0 / n_pairs) * (W * zs[i] - zs.sum(axis=0))
    return grads


def optimize_window(window, z_inits, gan, config=None):
    """Jointly descend on sum of per-frame objectives + mu * smoothness.

    With mu=0 this decouples exactly into W independent single-frame
    optimizations (Adam updates are elementwise).
    """
    config = config or SequenceOptimConfig()
    W = len(window.frames)
    if len(window.masks) != W:
        raise DimensionError("frames and masks count mismatch")
    if len(z_inits) != W:
        raise DimensionError(f"expected {W} initial latents, got {len(z_inits)}")
    zs0 = _check_latents(z_inits, gan.latent_dim)
    tensors = [_to_tensors(f, m, gan) for f, m in zip(window.frames, window.masks)]
    G, D = gan.generator, gan.discriminator
    G.eval()
    D.eval()
    torch.manual_seed(config.seed)
    dtype = gan.dtype
    z_params = [torch.as_tensor(zs0[k][None]).to(dtype).clone().requires_grad_(True)
                for k in range(W)]
    opt = _make_optimizer(z_params, config)

    per_frame_traces = [[] for _ in range(W)]
    smoothness_trace = []
    best_J = math.inf
    best_zs = zs0.copy()
    for i in range(config.max_iters + 1):
        totals = []
        frame_stats = []
        for k in range(W):
            d_t, m_t = tensors[k]
            con_t, gen_t = _contextual(z_params[k], d_t, m_t, G)
            per_t = _perceptual(gen_t, D)
            total_t = con_t + config.eta * per_t
            totals.append(total_t)
            frame_stats.append((float(con_t.detach()), float(per_t.detach()), float(total_t.detach())))
        l_sm_t = _smoothness_torch([z.squeeze(0) for z in z_params]) if W >= 2 else None
        l_sm = float(l_sm_t.detach()) if l_sm_t is not None else 0.0
        J_t = totals[0]
        for t in totals[1:]:
            J_t = J_t + t
        if config.mu > 0 and l_sm_t is not None:
            J_t = J_t + config.mu * l_sm_t
        J = float(J_t.detach())
        if not math.isfinite(J):
            raise OptimizationError(f"non-finite joint loss at iteration {i}",
                                    trace=smoothness_trace)
        if i % config.record_every == 0 or i == config.max_iters:
            for k in range(W):
                per_frame_traces[k].append((i,) + frame_stats[k])
            smoothness_trace.append((i, l_sm))
        if J < best_J:
            best_J = J
            best_zs = np.stack([z.detach().cpu().numpy()[0] for z in z_params])
        if i == config.max_iters:
            break
        opt.zero_grad()
        J_t.backward()
        opt.step()

    results = []
    for k in range(W):
        with torch.no_grad():
            gen = G(torch.as_tensor(best_zs[k][None]).to(dtype))
        generated = gen[0].detach().cpu().numpy().transpose(1, 2, 0)
        inpainted = blend(np.asarray(window.frames[k]), window.masks[k], generated)
        results.append(InpaintResult(z_hat=best_zs[k].copy(), inpainted=inpainted,
                                     trace=per_frame_traces[k],
                                     iters_run=config.max_iters))
    return SequenceWindow(frames=window.frames, masks=window.masks,
                          results=results, smoothness_trace=smoothness_trace)


def save_window(window, directory):
    os.makedirs(directory, exist_ok=True)
    for k, res in enumerate(window.results):
        save_result(res, directory, prefix=f"frame{k:02d}_")
    with open(os.path.join(directory, "smoothness_trace.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "l_sm"])
        w.writerows(window.smoothness_trace)
