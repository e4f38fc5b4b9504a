"""Class-balanced corpus subsampling.

Given per-graph class ratios (pixel shares of their layouts), pick the k
graphs whose aggregate ratio best matches a target distribution. Selection is
greedy: each step adds the candidate minimizing the KL divergence of the
running mean ratio to the target, with ties broken by corpus order. KL uses
additive epsilon smoothing so classes absent from one side stay finite.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .graph import SceneGraph
from .validation import check_layout, check_ratio

KL_EPSILON = 1e-6


def class_ratio_of_layout(layout: np.ndarray) -> np.ndarray:
    """Per-class pixel share of the layout's argmax channel; sums to 1."""
    arr = check_layout(layout)
    num_classes = arr.shape[2]
    winners = arr.argmax(axis=2)
    counts = np.bincount(winners.ravel(), minlength=num_classes).astype(np.float64)
    return counts / counts.sum()


def kl_divergence(p: np.ndarray, q: np.ndarray, eps: float = KL_EPSILON) -> float:
    """Smoothed KL(p || q); finite for any pair of same-length ratios."""
    p = np.asarray(p, dtype=np.float64) + eps
    q = np.asarray(q, dtype=np.float64) + eps
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sum(p * np.log(p / q)))


def greedy_balanced_indices(ratios: np.ndarray, target: np.ndarray, k: int) -> list[int]:
    """Indices of the greedy KL-minimizing subset, in selection order."""
    ratios = np.asarray(ratios, dtype=np.float64)
    n = ratios.shape[0]
    if k > n:
        raise ValueError(f"cannot select {k} graphs from a corpus of {n}")
    target = check_ratio(target, length=ratios.shape[1], name="target ratio")

    chosen: list[int] = []
    used = np.zeros(n, dtype=bool)
    running = np.zeros(ratios.shape[1], dtype=np.float64)
    for step in range(k):
        best_idx = -1
        best_kl = np.inf
        for i in range(n):
            if used[i]:
                continue
            candidate = (running + ratios[i]) / (step + 1)
            kl = kl_divergence(candidate, target)
            if kl < best_kl:
                best_kl = kl
                best_idx = i
        chosen.append(best_idx)
        used[best_idx] = True
        running += ratios[best_idx]
    return chosen


def balanced_subsample(
    corpus: Sequence[tuple[SceneGraph, np.ndarray]],
    target: np.ndarray,
    k: int,
) -> list[SceneGraph]:
    """Greedily pick k graphs whose mean class ratio tracks the target."""
    if not corpus:
        raise ValueError("corpus is empty")
    ratios = np.stack([check_ratio(r, name=f"corpus[{i}] ratio") for i, (_, r) in enumerate(corpus)])
    indices = greedy_balanced_indices(ratios, target, k)
    return [corpus[i][0] for i in indices]


def mean_ratio(ratios: np.ndarray) -> np.ndarray:
    arr = np.asarray(ratios, dtype=np.float64)
    return arr.mean(axis=0)
