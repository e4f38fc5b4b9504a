import math

import numpy as np
import pytest
import torch

from sg2scene.compose import (
    bilinear_warp,
    boxes_to_corners_t,
    compose_hard,
    compose_layout,
    compose_soft,
    paint_order,
)
from sg2scene.graph import SceneGraph, SceneNode


def oracle_warp_pixel(mask, corners, px, py, height, width):
    """Brute-force single-pixel bilinear warp, mirroring the contract."""
    m = mask.shape[0]
    x0, y0, x1, y1 = corners
    x = (px + 0.5) / width
    y = (py + 0.5) / height
    w = max(x1 - x0, 1e-8)
    h = max(y1 - y0, 1e-8)
    u = (x - x0) / w
    v = (y - y0) / h
    if not (0 <= u <= 1 and 0 <= v <= 1):
        return 0.0
    mu = u * m - 0.5
    mv = v * m - 0.5
    iu = math.floor(mu)
    iv = math.floor(mv)
    fu = mu - iu
    fv = mv - iv

    def at(jv, ju):
        return mask[min(max(jv, 0), m - 1), min(max(ju, 0), m - 1)]

    return (
        at(iv, iu) * (1 - fu) * (1 - fv)
        + at(iv, iu + 1) * fu * (1 - fv)
        + at(iv + 1, iu) * (1 - fu) * fv
        + at(iv + 1, iu + 1) * fu * fv
    )


def oracle_compose_hard(classes, zbins, is_bg, corners, masks, height, width, num_classes):
    """Per-pixel painter's algorithm, farthest first."""
    order = paint_order(classes, zbins, is_bg, corners, masks)
    layout = np.zeros((height, width, num_classes))
    for i in order:
        for py in range(height):
            for px in range(width):
                val = oracle_warp_pixel(masks[i], corners[i], px, py, height, width)
                if val > 0.5:
                    layout[py, px, :] = 0.0
                    layout[py, px, classes[i]] = val
    return layout


def random_scene(rng, n, num_classes=8, zmax=8, mask=16):
    classes = rng.integers(0, num_classes, size=n)
    zbins = rng.integers(0, zmax, size=n)
    is_bg = classes < 4
    cx = rng.uniform(0.2, 0.8, size=n)
    cy = rng.uniform(0.2, 0.8, size=n)
    w = rng.uniform(0.15, 0.6, size=n)
    h = rng.uniform(0.15, 0.6, size=n)
    corners = np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=1)
    masks = rng.uniform(0.0, 1.0, size=(n, mask, mask))
    return classes, zbins, is_bg, corners, masks


class TestWarp:
    def test_matches_pixel_oracle(self, rng):
        masks = rng.uniform(size=(3, 8, 8))
        corners = np.array([[0.1, 0.2, 0.7, 0.9], [0.0, 0.0, 1.0, 1.0], [0.4, 0.4, 0.5, 0.6]])
        warped = bilinear_warp(torch.tensor(masks), torch.tensor(corners), 12, 20).numpy()
        for i in range(3):
            for py in range(12):
                for px in range(20):
                    expect = oracle_warp_pixel(masks[i], corners[i], px, py, 12, 20)
                    assert warped[i, py, px] == pytest.approx(expect, abs=1e-12)

    def test_unit_box_all_ones_mask(self):
        masks = torch.ones(1, 16, 16, dtype=torch.float64)
        corners = torch.tensor([[0.0, 0.0, 1.0, 1.0]], dtype=torch.float64)
        warped = bilinear_warp(masks, corners, 8, 8)
        assert torch.allclose(warped, torch.ones(1, 8, 8, dtype=torch.float64))

    def test_zero_outside_box(self):
        masks = torch.ones(1, 8, 8, dtype=torch.float64)
        corners = torch.tensor([[0.4, 0.4, 0.6, 0.6]], dtype=torch.float64)
        warped = bilinear_warp(masks, corners, 10, 10)
        assert warped[0, 0, 0] == 0.0
        assert warped[0, 5, 5] == 1.0


class TestComposeHard:
    def test_single_full_node(self):
        g_classes = np.array([5])
        layout = compose_hard(
            g_classes,
            np.array([3]),
            np.array([False]),
            torch.tensor([[0.0, 0.0, 1.0, 1.0]], dtype=torch.float64),
            torch.ones(1, 16, 16, dtype=torch.float64),
            8,
            8,
            8,
        )
        assert torch.allclose(layout[:, :, 5], torch.ones(8, 8, dtype=torch.float64))
        assert layout.sum() == pytest.approx(64.0)

    def test_empty_scene(self):
        layout = compose_hard(
            np.zeros(0, int), np.zeros(0, int), np.zeros(0, bool), torch.zeros(0, 4), torch.zeros(0, 4, 4), 8, 8, 8
        )
        assert layout.shape == (8, 8, 8)
        assert layout.abs().sum() == 0

    def test_nearer_car_wins_overlap(self):
        # two overlapping cars at bins 2 (near) and 5 (far)
        classes = np.array([5, 6])
        corners = torch.tensor([[0.1, 0.1, 0.7, 0.7], [0.3, 0.3, 0.9, 0.9]], dtype=torch.float64)
        masks = torch.ones(2, 8, 8, dtype=torch.float64)
        layout = compose_hard(classes, np.array([2, 5]), np.array([False, False]), corners, masks, 16, 16, 8)
        # overlap pixel belongs to the near node's class channel
        assert layout[7, 7, 5] > 0.5
        assert layout[7, 7, 6] == 0.0

    def test_matches_bruteforce_oracle(self, rng):
        for case in range(50):
            n = int(rng.integers(1, 7))
            classes, zbins, is_bg, corners, masks = random_scene(rng, n)
            got = compose_hard(
                classes, zbins, is_bg, torch.tensor(corners), torch.tensor(masks), 16, 32, 8
            ).numpy()
            want = oracle_compose_hard(classes, zbins, is_bg, corners, masks, 16, 32, 8)
            assert (got.argmax(axis=2) == want.argmax(axis=2)).all(), f"case {case}"
            assert np.allclose(got, want, atol=1e-12)

    def test_at_most_one_channel_above_half(self, rng):
        for _ in range(20):
            n = int(rng.integers(0, 6))
            classes, zbins, is_bg, corners, masks = random_scene(rng, n)
            layout = compose_hard(
                classes, zbins, is_bg, torch.tensor(corners), torch.tensor(masks), 16, 16, 8
            ).numpy()
            assert ((layout > 0.5).sum(axis=2) <= 1).all()
            assert layout.min() >= 0 and layout.max() <= 1

    def test_background_painted_before_objects_at_equal_bin(self):
        classes = np.array([1, 5])  # road (bg) and car at the same bin
        corners = torch.tensor([[0.0, 0.0, 1.0, 1.0], [0.2, 0.2, 0.8, 0.8]], dtype=torch.float64)
        masks = torch.ones(2, 8, 8, dtype=torch.float64)
        layout = compose_hard(classes, np.array([4, 4]), np.array([True, False]), corners, masks, 8, 8, 8)
        assert layout[4, 4, 5] == 1.0  # car wins the interior
        assert layout[0, 0, 1] == 1.0  # road keeps the border

    def test_nearness_monotonicity(self, rng):
        # moving a node to a nearer bin never shrinks its visible pixels
        for _ in range(10):
            classes, zbins, is_bg, corners, masks = random_scene(rng, 5)
            masks = (masks > 0.3).astype(float)  # crisp masks
            counts = []
            for z in range(7, -1, -1):
                zb = zbins.copy()
                zb[0] = z
                layout = compose_hard(
                    classes, zb, is_bg, torch.tensor(corners), torch.tensor(masks), 16, 16, 8
                ).numpy()
                oracle = oracle_compose_hard(classes, zb, is_bg, corners, masks, 16, 16, 8)
                assert (layout.argmax(2) == oracle.argmax(2)).all()
                visible = ((layout[:, :, classes[0]] > 0.5) & (layout.argmax(2) == classes[0])).sum()
                counts.append(visible)
            assert all(a <= b for a, b in zip(counts, counts[1:]))


class TestComposeSoft:
    def test_values_in_unit_interval(self, rng):
        classes, zbins, is_bg, corners, masks = random_scene(rng, 5)
        layout = compose_soft(
            classes, zbins, is_bg, torch.tensor(corners), torch.tensor(masks), 16, 16, 8, total_bins=8
        )
        assert layout.min() >= 0 and layout.max() <= 1

    def test_channel_sums_at_most_one(self, rng):
        classes, zbins, is_bg, corners, masks = random_scene(rng, 4)
        layout = compose_soft(
            classes, zbins, is_bg, torch.tensor(corners), torch.tensor(masks), 16, 16, 8, total_bins=8
        )
        assert layout.sum(dim=2).max() <= 1.0 + 1e-9

    def test_single_node_close_to_hard(self):
        classes = np.array([5])
        corners = torch.tensor([[0.0, 0.0, 1.0, 1.0]], dtype=torch.float64)
        masks = torch.ones(1, 8, 8, dtype=torch.float64)
        soft = compose_soft(classes, np.array([0]), np.array([False]), corners, masks, 8, 8, 8, total_bins=8)
        assert soft[:, :, 5].min() > 0.99


class TestComposeLayoutApi:
    def test_graph_wrapper(self, cv, grid):
        g = SceneGraph(nodes=(SceneNode(5, 36, 2), SceneNode(0, 4, 7)))
        boxes = np.array([[0.5, 0.5, 0.4, 0.4], [0.5, 0.2, 1.0, 0.4]])
        masks = np.ones((2, 16, 16))
        layout = compose_layout(g, boxes, masks, 16, 32, cv, grid, mode="hard")
        assert layout.shape == (16, 32, 8)
        assert layout[:, :, 5].max() == 1.0

    def test_mismatched_lengths_rejected(self, cv, grid):
        g = SceneGraph(nodes=(SceneNode(5, 36, 2),))
        with pytest.raises(ValueError, match="1 nodes"):
            compose_layout(g, np.ones((2, 4)), np.ones((2, 8, 8)), 8, 8, cv, grid)

    def test_permutation_invariance(self, cv, grid, rng):
        nodes = tuple(SceneNode(int(rng.integers(0, 8)), int(rng.integers(0, 64)), int(rng.integers(0, 8))) for _ in range(5))
        g = SceneGraph(nodes=nodes)
        boxes = rng.uniform(0.2, 0.8, size=(5, 4))
        masks = rng.uniform(size=(5, 12, 12))
        base = compose_layout(g, boxes, masks, 16, 16, cv, grid)
        perm = list(rng.permutation(5))
        from sg2scene.graph import permute_nodes

        gp = permute_nodes(g, perm)
        boxes_p = np.empty_like(boxes)
        masks_p = np.empty_like(masks)
        for i, p in enumerate(perm):
            boxes_p[p] = boxes[i]
            masks_p[p] = masks[i]
        permuted = compose_layout(gp, boxes_p, masks_p, 16, 16, cv, grid)
        assert np.array_equal(base, permuted)


def test_corner_conversion_clamps_and_orders(rng):
    boxes = torch.tensor(rng.uniform(0.0, 1.2, size=(20, 4)))
    boxes[:, 0] -= 0.3  # centers may stray outside the unit square
    corners = boxes_to_corners_t(boxes)
    assert (corners[:, 0] <= corners[:, 2]).all()
    assert (corners[:, 1] <= corners[:, 3]).all()
    assert corners.min() >= 0 and corners.max() <= 1
