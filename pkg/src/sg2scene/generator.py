"""Scene generator: layout -> target-domain image, trained without pairs.

The generator is an encoder / residual body / decoder stack. Its encoder
takes a channel-concatenated input of (layout channels, RGB channels) with
the absent half zeroed, so the same encoder (and the same taps) can embed
both a layout and a generated image; the patch-wise contrastive loss ties a
generated patch to its own input-layout patch against other locations of the
same scene, and the adversarial loss pulls the output toward the unpaired
target set. Nothing in the loss path reads any pairing between layouts and
target images.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from torch import nn

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import GeneratorConfig, NCEConfig, as_plain_dict, build_config
from .losses import gan_generator_objective, gan_loss
from .torchutil import TrainingDiverged, batch_indices, load_state_arrays, set_determinism, state_dict_arrays


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(channels, channels, 3, padding=1),
        )

    def forward(self, x):
        return x + self.body(x)


class GeneratorNet(nn.Module):
    """Encoder taps are the three stride-2 block outputs, ids 0..2."""

    def __init__(self, num_classes: int, base_channels: int = 24, res_blocks: int = 2):
        super().__init__()
        self.num_classes = num_classes
        b = base_channels
        self.stem = nn.Sequential(nn.Conv2d(num_classes + 3, b, 3, padding=1), nn.ReLU())
        self.enc1 = nn.Sequential(nn.Conv2d(b, b, 3, stride=2, padding=1), nn.ReLU())
        self.enc2 = nn.Sequential(nn.Conv2d(b, 2 * b, 3, stride=2, padding=1), nn.ReLU())
        self.enc3 = nn.Sequential(nn.Conv2d(2 * b, 4 * b, 3, stride=2, padding=1), nn.ReLU())
        self.body = nn.Sequential(*(ResidualBlock(4 * b) for _ in range(res_blocks)))
        self.dec1 = nn.Sequential(nn.Conv2d(4 * b, 2 * b, 3, padding=1), nn.ReLU())
        self.dec2 = nn.Sequential(nn.Conv2d(2 * b, b, 3, padding=1), nn.ReLU())
        self.dec3 = nn.Sequential(nn.Conv2d(b, b, 3, padding=1), nn.ReLU())
        self.out = nn.Conv2d(b, 3, 3, padding=1)

    @property
    def tap_channels(self) -> list[int]:
        b = self.stem[0].out_channels
        return [b, 2 * b, 4 * b]

    def pad_layout(self, layout: torch.Tensor) -> torch.Tensor:
        zeros = torch.zeros(layout.shape[0], 3, *layout.shape[2:], dtype=layout.dtype)
        return torch.cat([layout, zeros], dim=1)

    def pad_image(self, image: torch.Tensor) -> torch.Tensor:
        zeros = torch.zeros(image.shape[0], self.num_classes, *image.shape[2:], dtype=image.dtype)
        return torch.cat([zeros, image], dim=1)

    def encode(self, padded: torch.Tensor) -> list[torch.Tensor]:
        f0 = self.enc1(self.stem(padded))
        f1 = self.enc2(f0)
        f2 = self.enc3(f1)
        return [f0, f1, f2]

    def forward(self, layout: torch.Tensor) -> torch.Tensor:
        """(B, C, H, W) layout -> (B, 3, H, W) image in [0, 1]."""
        if layout.shape[1] != self.num_classes:
            raise ValueError(f"layout has {layout.shape[1]} channels, generator expects {self.num_classes}")
        taps = self.encode(self.pad_layout(layout))
        x = self.body(taps[-1])
        x = self.dec1(F.interpolate(x, scale_factor=2, mode="nearest"))
        x = self.dec2(F.interpolate(x, scale_factor=2, mode="nearest"))
        x = self.dec3(F.interpolate(x, scale_factor=2, mode="nearest"))
        return torch.sigmoid(self.out(x))


class PatchDiscriminator(nn.Module):
    """Stride-2 conv stack; more layers widen the patch receptive field."""

    def __init__(self, channels: int = 32, in_channels: int = 3, layers: int = 3):
        super().__init__()
        convs = []
        c_in, c_out = in_channels, channels
        for _ in range(layers):
            convs.append(nn.Conv2d(c_in, c_out, 4, stride=2, padding=1))
            c_in, c_out = c_out, min(2 * c_out, 8 * channels)
        self.convs = nn.ModuleList(convs)
        self.final = nn.Conv2d(c_in, 1, 3, padding=1)
        self.act = nn.LeakyReLU(0.2)

    def features(self, x: torch.Tensor) -> tuple[list[torch.Tensor], torch.Tensor]:
        taps = []
        for conv in self.convs:
            x = self.act(conv(x))
            taps.append(x)
        return taps, torch.sigmoid(self.final(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x)[1]


class NCEHeads(nn.Module):
    """One two-layer projection per tap; outputs are L2-normalized."""

    def __init__(self, tap_channels: Sequence[int], projection_dim: int):
        super().__init__()
        self.heads = nn.ModuleList(
            nn.Sequential(nn.Linear(c, projection_dim), nn.ReLU(), nn.Linear(projection_dim, projection_dim))
            for c in tap_channels
        )

    def project(self, tap: int, feats: torch.Tensor) -> torch.Tensor:
        out = self.heads[tap](feats)
        return F.normalize(out, dim=-1, eps=1e-8)


def sample_locations(height: int, width: int, patches: int, generator: torch.Generator) -> torch.Tensor:
    total = height * width
    if patches > total:
        raise ValueError(f"cannot sample {patches} patch locations from a {height}x{width} feature map")
    return torch.randperm(total, generator=generator)[:patches]


def patch_nce_loss(
    gen_feats: Sequence[torch.Tensor],
    src_feats: Sequence[torch.Tensor],
    heads: NCEHeads,
    cfg: NCEConfig,
    generator: torch.Generator,
) -> torch.Tensor:
    """Multilayer patch-wise contrastive loss with internal negatives.

    For every tap and sampled location, the projected generated feature is the
    query, the projected source feature at the same location is the positive,
    and source features at the other sampled locations of the same scene are
    the negatives; cross-entropy over the similarity logits at the configured
    temperature, averaged over taps, locations and batch.
    """
    if len(gen_feats) != len(src_feats):
        raise ValueError("generated and source tap lists differ in length")
    total = None
    for tap in cfg.taps:
        gen_f = gen_feats[tap]
        src_f = src_feats[tap]
        if gen_f.shape != src_f.shape:
            raise ValueError(f"tap {tap} shapes differ: {tuple(gen_f.shape)} vs {tuple(src_f.shape)}")
        b, c, h, w = gen_f.shape
        locs = sample_locations(h, w, cfg.patches, generator)
        s = len(locs)
        q = gen_f.flatten(2)[:, :, locs].permute(0, 2, 1).reshape(b * s, c)
        k = src_f.flatten(2)[:, :, locs].permute(0, 2, 1).reshape(b * s, c)
        q = heads.project(tap, q).reshape(b, s, -1)
        k = heads.project(tap, k).reshape(b, s, -1)
        logits = torch.bmm(q, k.transpose(1, 2)) / cfg.temperature
        labels = torch.arange(s).repeat(b)
        term = F.cross_entropy(logits.reshape(b * s, s), labels)
        total = term if total is None else total + term
    if total is None:
        raise ValueError("NCE config lists no taps")
    return total / len(cfg.taps)


def generate_image(layout: np.ndarray, net: GeneratorNet) -> np.ndarray:
    """(H, W, C) layout -> (H, W, 3) image; deterministic given params."""
    with torch.no_grad():
        t = torch.as_tensor(np.asarray(layout), dtype=torch.float32).permute(2, 0, 1)[None]
        img = net(t)[0].permute(1, 2, 0).numpy()
    return img


def generator_config_echo(cfg: GeneratorConfig, num_classes: int) -> dict[str, Any]:
    return {"generator": as_plain_dict(cfg), "num_classes": num_classes}


def train_generator(
    layouts: np.ndarray,
    target_images: np.ndarray,
    cfg: GeneratorConfig,
    seed: int = 0,
    deterministic: bool = False,
    out_dir: str | Path | None = None,
    log_every: int = 0,
) -> tuple[GeneratorNet, PatchDiscriminator, NCEHeads, list[dict[str, float]]]:
    """Alternating discriminator/generator updates on unpaired data.

    ``layouts``: (N, H, W, C) in [0, 1]; ``target_images``: (M, H, W, 3) in
    [0, 1]. Batch picks for layouts and targets are independent draws, and no
    loss term reads both a layout and a target at the same index, which is the
    unsupervised contract. Seeded and reproducible; non-finite losses abort.
    """
    layouts = np.asarray(layouts, dtype=np.float32)
    target_images = np.asarray(target_images, dtype=np.float32)
    if layouts.ndim != 4 or target_images.ndim != 4 or target_images.shape[3] != 3:
        raise ValueError("layouts must be (N, H, W, C) and target images (M, H, W, 3)")
    set_determinism(seed, deterministic)
    num_classes = layouts.shape[3]
    net = GeneratorNet(num_classes, cfg.base_channels, cfg.res_blocks)
    disc = PatchDiscriminator(cfg.disc_channels, layers=cfg.disc_layers)
    heads = NCEHeads([net.tap_channels[t] for t in range(len(net.tap_channels))], cfg.nce.projection_dim)
    opt_g = torch.optim.Adam(list(net.parameters()) + list(heads.parameters()), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.disc_lr, betas=(cfg.beta1, cfg.beta2))
    sampler = torch.Generator().manual_seed(seed + 1)
    nce_rng = torch.Generator().manual_seed(seed + 2)

    layouts_t = torch.from_numpy(layouts).permute(0, 3, 1, 2)
    targets_t = torch.from_numpy(target_images).permute(0, 3, 1, 2)

    history: list[dict[str, float]] = []
    start = time.time()
    for step in range(cfg.steps):
        li = batch_indices(len(layouts_t), cfg.batch_size, sampler)
        ti = batch_indices(len(targets_t), cfg.batch_size, sampler)
        layout_batch = layouts_t[li]
        target_batch = targets_t[ti]

        fake = net(layout_batch)

        opt_d.zero_grad()
        d_loss, _ = gan_loss(disc(target_batch), disc(fake.detach()), cfg.gan_mode, order_insensitive=deterministic)
        d_loss.backward()
        opt_d.step()

        opt_g.zero_grad()
        g_gan = gan_generator_objective(disc(fake), cfg.gan_mode, order_insensitive=deterministic)
        src_feats = net.encode(net.pad_layout(layout_batch))
        gen_feats = net.encode(net.pad_image(fake))
        nce = patch_nce_loss(gen_feats, src_feats, heads, cfg.nce, nce_rng)
        total = cfg.lambda_gan * g_gan + cfg.lambda_nce * nce
        total.backward()
        opt_g.step()

        record = {
            "step": step,
            "disc": float(d_loss.detach()),
            "gan": float(g_gan.detach()),
            "nce": float(nce.detach()),
            "total": float(total.detach()),
        }
        history.append(record)
        if not np.isfinite(record["total"]) or not np.isfinite(record["disc"]):
            raise TrainingDiverged(step)
        if log_every and step % log_every == 0:
            print(
                f"[generator {step}/{cfg.steps}] total={record['total']:.4f} gan={record['gan']:.4f} "
                f"nce={record['nce']:.4f} disc={record['disc']:.4f} ({time.time() - start:.0f}s)"
            )
        if out_dir and cfg.checkpoint_every and step and step % cfg.checkpoint_every == 0:
            save_generator_checkpoint(Path(out_dir) / f"generator-{step}.ckpt", net, disc, heads, cfg, num_classes, step)

    if out_dir:
        save_generator_checkpoint(Path(out_dir) / "generator.ckpt", net, disc, heads, cfg, num_classes, cfg.steps)
    return net, disc, heads, history


def save_generator_checkpoint(
    path: str | Path,
    net: GeneratorNet,
    disc: PatchDiscriminator,
    heads: NCEHeads,
    cfg: GeneratorConfig,
    num_classes: int,
    step: int,
) -> None:
    arrays = {f"net.{k}": v for k, v in state_dict_arrays(net).items()}
    arrays.update({f"disc.{k}": v for k, v in state_dict_arrays(disc).items()})
    arrays.update({f"heads.{k}": v for k, v in state_dict_arrays(heads).items()})
    save_checkpoint(path, Checkpoint(kind="generator", config=generator_config_echo(cfg, num_classes), step=step, arrays=arrays))


def load_generator_checkpoint(path: str | Path) -> tuple[GeneratorNet, PatchDiscriminator, NCEHeads, GeneratorConfig, int, int]:
    ckpt = load_checkpoint(path)
    if ckpt.kind != "generator":
        raise ValueError(f"{path} holds a {ckpt.kind!r} checkpoint, expected 'generator'")
    cfg = build_config(GeneratorConfig, ckpt.config["generator"], "$.generator")
    num_classes = ckpt.config["num_classes"]
    net = GeneratorNet(num_classes, cfg.base_channels, cfg.res_blocks)
    disc = PatchDiscriminator(cfg.disc_channels, layers=cfg.disc_layers)
    heads = NCEHeads(net.tap_channels, cfg.nce.projection_dim)
    load_state_arrays(net, {k[4:]: v for k, v in ckpt.arrays.items() if k.startswith("net.")})
    load_state_arrays(disc, {k[5:]: v for k, v in ckpt.arrays.items() if k.startswith("disc.")})
    load_state_arrays(heads, {k[6:]: v for k, v in ckpt.arrays.items() if k.startswith("heads.")})
    return net, disc, heads, cfg, num_classes, ckpt.step


class SceneGenerator(BaseEstimator, TransformerMixin):
    """Sklearn-style wrapper: fit on (layouts, unpaired target images),
    transform layouts into images."""

    def __init__(self, config: GeneratorConfig = GeneratorConfig(), seed: int = 0, deterministic: bool = False):
        self.config = config
        self.seed = seed
        self.deterministic = deterministic

    def fit(self, X: np.ndarray, y: np.ndarray, out_dir: str | Path | None = None, log_every: int = 0):
        net, disc, heads, history = train_generator(
            X, y, self.config, seed=self.seed, deterministic=self.deterministic, out_dir=out_dir, log_every=log_every
        )
        self.net_ = net
        self.disc_ = disc
        self.heads_ = heads
        self.history_ = history
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "net_"):
            raise NotFittedError("SceneGenerator is not fitted; call fit or load a checkpoint")
        arr = np.asarray(X, dtype=np.float32)
        if arr.ndim == 3:
            arr = arr[None]
        return np.stack([generate_image(layout, self.net_) for layout in arr])

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "SceneGenerator":
        net, disc, heads, cfg, _, _ = load_generator_checkpoint(path)
        est = cls(config=cfg)
        est.net_ = net
        est.disc_ = disc
        est.heads_ = heads
        est.history_ = []
        return est
