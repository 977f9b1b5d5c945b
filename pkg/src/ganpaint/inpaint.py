"""Single-image inpainting by iterative latent optimization.

Objective: contextual L1 loss on uncorrupted pixels plus a weighted
realism term log(1 - D(G(z))); the final output blends observed context
with generated content.
"""

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import DimensionError, OptimizationError
from .images import check_image, save_png
from .models import _check_latents

D_CLAMP_EPS = 1e-6


@dataclass
class OptimConfig:
    eta: float = 0.003
    max_iters: int = 700
    learning_rate: float = 0.1
    optimizer: str = "adam"  # or "sgd_momentum"
    record_every: int = 10
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")


@dataclass
class InpaintResult:
    z_hat: np.ndarray
    inpainted: np.ndarray
    trace: list  # (iteration, contextual, perceptual, total)
    iters_run: int


def _to_tensors(damaged, mask, checkpoint):
    res = (checkpoint.resolution, checkpoint.resolution)
    damaged = check_image(damaged, res)
    if mask.bits.shape != res:
        raise DimensionError(f"mask {mask.bits.shape} vs resolution {res}")
    dtype = checkpoint.dtype
    d = torch.as_tensor(np.asarray(damaged).transpose(2, 0, 1)[None]).to(dtype)
    m = torch.as_tensor(np.asarray(mask.bits, dtype=np.float64)[None, None]).to(dtype)
    return d, m


def _contextual(z_t, damaged_t, mask_t, generator):
    gen = generator(z_t)
    return (mask_t * (gen - damaged_t)).abs().sum(), gen


def _perceptual(gen_t, discriminator):
    p = discriminator.prob(gen_t).clamp(D_CLAMP_EPS, 1.0 - D_CLAMP_EPS)
    return torch.log(1.0 - p).squeeze(0)


def contextual_loss(z, damaged, mask, checkpoint):
    """Sum of |M * (G(z) - I_d)| over all pixels and channels."""
    zs = _check_latents([z], checkpoint.latent_dim)
    d, m = _to_tensors(damaged, mask, checkpoint)
    checkpoint.generator.eval()
    with torch.no_grad():
        loss, _ = _contextual(torch.as_tensor(zs).to(checkpoint.dtype), d, m, checkpoint.generator)
    return float(loss)


def perceptual_loss(z, checkpoint):
    """log(1 - D(G(z))), with D's output clamped away from {0, 1}."""
    zs = _check_latents([z], checkpoint.latent_dim)
    checkpoint.generator.eval()
    checkpoint.discriminator.eval()
    with torch.no_grad():
        gen = checkpoint.generator(torch.as_tensor(zs).to(checkpoint.dtype))
        loss = _perceptual(gen, checkpoint.discriminator)
    return float(loss)


def blend(damaged, mask, generated):
    """Observed context where mask=1, generated content where mask=0."""
    damaged = check_image(damaged)
    generated = check_image(generated)
    if damaged.shape != generated.shape or damaged.shape[:2] != mask.bits.shape:
        raise DimensionError("blend inputs disagree in shape")
    m = mask.bits[:, :, None]
    return np.where(m == 1, damaged, generated)


def _make_optimizer(params, config):
    if config.optimizer == "adam":
        return torch.optim.Adam(params, lr=config.learning_rate, betas=(0.9, 0.999))
    if config.optimizer == "sgd_momentum":
        return torch.optim.SGD(params, lr=config.learning_rate, momentum=0.9)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


def optimize_latent(damaged, mask, z_init, checkpoint, config=None):
    """Descend on contextual + eta*perceptual over z; return best-so-far iterate."""
    config = config or OptimConfig()
    zs = _check_latents([z_init], checkpoint.latent_dim)
    d_t, m_t = _to_tensors(damaged, mask, checkpoint)
    G, D = checkpoint.generator, checkpoint.discriminator
    G.eval()
    D.eval()
    torch.manual_seed(config.seed)
    z = torch.as_tensor(zs).to(checkpoint.dtype).clone().requires_grad_(True)
    opt = _make_optimizer([z], config)

    trace = []
    best_total = math.inf
    best_z = zs[0].copy()
    for i in range(config.max_iters + 1):
        con_t, gen_t = _contextual(z, d_t, m_t, G)
        per_t = _perceptual(gen_t, D)
        total_t = con_t + config.eta * per_t
        con = float(con_t.detach())
        per = float(per_t.detach())
        total = float(total_t.detach())
        if not math.isfinite(total):
            raise OptimizationError(f"non-finite loss at iteration {i}", trace=trace)
        if i % config.record_every == 0 or i == config.max_iters:
            trace.append((i, con, per, total))
        if total < best_total:
            best_total = total
            best_z = z.detach().cpu().numpy()[0].copy()
        if i == config.max_iters:
            break
        opt.zero_grad()
        total_t.backward()
        opt.step()

    with torch.no_grad():
        gen = G(torch.as_tensor(best_z[None]).to(checkpoint.dtype))
    generated = gen[0].detach().cpu().numpy().transpose(1, 2, 0)
    inpainted = blend(np.asarray(damaged), mask, generated)
    return InpaintResult(z_hat=best_z, inpainted=inpainted, trace=trace,
                         iters_run=config.max_iters)


def save_result(result, directory, prefix=""):
    """Persist one result: inpainted PNG, trace CSV, z_hat JSON."""
    os.makedirs(directory, exist_ok=True)
    save_png(result.inpainted, os.path.join(directory, f"{prefix}inpainted.png"))
    with open(os.path.join(directory, f"{prefix}trace.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "contextual", "perceptual", "total"])
        w.writerows(result.trace)
    with open(os.path.join(directory, f"{prefix}z_hat.json"), "w") as f:
        json.dump([float(v) for v in result.z_hat], f)
