"""Adversarial and feature-matching losses shared by the mask and image GANs.

The adversarial form is the original cross-entropy game with a non-saturating
generator objective and epsilon-clamped logs; a least-squares variant sits
behind the ``mode`` flag. The discriminator objective is minimized, so at the
0.5/0.5 saddle it equals 2 log 2 and at the (1, 0) optimum it reaches 0.
"""

from __future__ import annotations

from typing import Sequence

import torch

from .torchutil import stable_mean

LOG_EPS = 1e-8


def _check_unit_range(name: str, t: torch.Tensor) -> None:
    if t.numel() == 0:
        raise ValueError(f"{name} is empty")
    if t.min() < 0 or t.max() > 1:
        raise ValueError(f"{name} outside (0, 1); apply the sigmoid before the loss")


def gan_generator_objective(
    d_fake: torch.Tensor,
    mode: str = "vanilla",
    eps: float = LOG_EPS,
    order_insensitive: bool = False,
) -> torch.Tensor:
    """Non-saturating generator objective (minimized)."""
    _check_unit_range("d_fake", d_fake)
    if mode == "vanilla":
        return -stable_mean(torch.log(d_fake.clamp(min=eps)), order_insensitive)
    if mode == "lsgan":
        return stable_mean((d_fake - 1) ** 2, order_insensitive)
    raise ValueError(f"unknown gan mode {mode!r}")


def gan_loss(
    d_real: torch.Tensor,
    d_fake: torch.Tensor,
    mode: str = "vanilla",
    eps: float = LOG_EPS,
    order_insensitive: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(discriminator objective, generator objective); both minimized.

    Inputs are post-sigmoid discriminator outputs in (0, 1), any shape.
    """
    _check_unit_range("d_real", d_real)
    _check_unit_range("d_fake", d_fake)
    if mode == "vanilla":
        d_obj = -stable_mean(torch.log(d_real.clamp(min=eps)), order_insensitive) - stable_mean(
            torch.log((1 - d_fake).clamp(min=eps)), order_insensitive
        )
    elif mode == "lsgan":
        d_obj = stable_mean((d_real - 1) ** 2, order_insensitive) + stable_mean(
            d_fake**2, order_insensitive
        )
    else:
        raise ValueError(f"unknown gan mode {mode!r}")
    return d_obj, gan_generator_objective(d_fake, mode, eps, order_insensitive)


def feature_matching_loss(
    real_acts: Sequence[torch.Tensor], fake_acts: Sequence[torch.Tensor]
) -> torch.Tensor:
    """Squared L2 between batch-mean activations, summed over taps."""
    if len(real_acts) != len(fake_acts):
        raise ValueError(f"tap count mismatch: {len(real_acts)} vs {len(fake_acts)}")
    total = None
    for k, (real, fake) in enumerate(zip(real_acts, fake_acts)):
        if real.shape[1:] != fake.shape[1:]:
            raise ValueError(f"tap {k} shape mismatch: {tuple(real.shape)} vs {tuple(fake.shape)}")
        diff = real.mean(dim=0) - fake.mean(dim=0)
        term = (diff**2).sum()
        total = term if total is None else total + term
    if total is None:
        raise ValueError("no activation taps given")
    return total
