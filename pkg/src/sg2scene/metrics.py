"""Desk-scale evaluation metrics.

Fréchet probe distance plays the role FID plays at full scale, but against a
fixed seeded random convolutional probe instead of a pretrained classifier;
only relative (before/after) values are ever interpreted. Layout IoU is the
usual Jaccard index per class, with classes absent from both prediction and
ground truth excluded from the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy import linalg
from torch import nn

from .validation import check_image_batch, check_semantic_map


class FeatureProbe(nn.Module):
    """Frozen random conv net; features are deterministic given the seed."""

    def __init__(self, seed: int = 1234, channels: int = 16, feature_dim: int = 48):
        super().__init__()
        torch.manual_seed(seed)
        self.seed = seed
        self.net = nn.Sequential(
            nn.Conv2d(3, channels, 4, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(channels, channels * 2, 4, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(channels * 2, feature_dim, 4, stride=2, padding=1),
            nn.ReLU(),
        )
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.net(images).mean(dim=(2, 3))


def probe_features(images: np.ndarray, probe: FeatureProbe) -> np.ndarray:
    arr = check_image_batch(images)
    with torch.no_grad():
        t = torch.as_tensor(arr, dtype=torch.float32).permute(0, 3, 1, 2)
        return probe(t).numpy().astype(np.float64)


def gaussian_frechet_distance(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray, eps: float = 1e-6
) -> float:
    """d^2 = |mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), with epsilon
    regularization when the covariance product is near-singular."""
    diff = mu1 - mu2
    covmean, _ = linalg.sqrtm(sigma1 @ sigma2, disp=False)
    if not np.isfinite(covmean).all():
        offset = np.eye(sigma1.shape[0]) * eps
        covmean = linalg.sqrtm((sigma1 + offset) @ (sigma2 + offset))
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    d2 = float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2 * np.trace(covmean))
    return max(d2, 0.0)


def frechet_feature_distance(images_a: np.ndarray, images_b: np.ndarray, probe: FeatureProbe) -> float:
    """Fréchet distance between Gaussian fits of probe features of two sets."""
    feats_a = probe_features(images_a, probe)
    feats_b = probe_features(images_b, probe)
    if len(feats_a) < 2 or len(feats_b) < 2:
        raise ValueError("need at least 2 images per side to fit a covariance")
    mu_a, mu_b = feats_a.mean(axis=0), feats_b.mean(axis=0)
    sigma_a = np.cov(feats_a, rowvar=False)
    sigma_b = np.cov(feats_b, rowvar=False)
    return gaussian_frechet_distance(mu_a, sigma_a, mu_b, sigma_b)


@dataclass(frozen=True)
class LayoutIoU:
    per_class: dict[int, float]
    mean: float


def layout_iou(pred_layout: np.ndarray, gt_semantic: np.ndarray) -> LayoutIoU:
    """Per-class and mean IoU of a layout's argmax against a class map."""
    pred = np.asarray(pred_layout)
    if pred.ndim == 3:
        num_classes = pred.shape[2]
        pred = pred.argmax(axis=2)
    else:
        num_classes = int(max(pred.max(initial=0), gt_semantic.max(initial=0))) + 1
    gt = check_semantic_map(gt_semantic, num_classes)
    if pred.shape != gt.shape:
        raise ValueError(f"size mismatch: prediction {pred.shape} vs ground truth {gt.shape}")
    per_class: dict[int, float] = {}
    for c in range(num_classes):
        p = pred == c
        g = gt == c
        union = (p | g).sum()
        if union == 0:
            continue
        per_class[c] = float((p & g).sum() / union)
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return LayoutIoU(per_class=per_class, mean=mean)
