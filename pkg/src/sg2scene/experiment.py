"""End-to-end experiment rig.

One call runs the whole desk-scale pipeline: sample a graph corpus, attach
deterministic toy targets, train the processor, compose layouts, render an
unpaired toy target-image set from separately sampled scenes, train the
generator, and evaluate. Every stage is seeded; under the determinism flag a
rerun reproduces the metrics document byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np
import torch

from .balance import class_ratio_of_layout
from .boxes import box_iou, cxcywh_to_corners
from .checkpoint import checkpoint_hash
from .config import ExperimentConfig, as_plain_dict
from .derivation import DerivedTargets
from .generator import GeneratorNet, generate_image, train_generator
from .graph import SceneGraph, SceneNode
from .images import class_palette, image_grid, save_png
from .metrics import FeatureProbe, frechet_feature_distance, layout_iou
from .processor import ProcessorNet, encode_graph_batch, train_processor
from .sampling import sample_corpus
from .serialization import write_corpus
from .torchutil import set_determinism
from .toyworld import oracle_pixel_accuracy, render_toy_target, toy_semantic_map, toy_targets
from .vocab import DEFAULT_RELATIONS, get_class_vocab

METRICS_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "seed", "processor"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "seed": {"type": "integer"},
        "deterministic": {"type": "boolean"},
        "corpus_size": {"type": "integer", "minimum": 1},
        "processor": {
            "type": "object",
            "required": ["mean_box_iou", "object_box_iou", "layout_mean_iou", "final_box_mse", "car_area_by_bin"],
            "additionalProperties": False,
            "properties": {
                "mean_box_iou": {"type": "number", "minimum": 0, "maximum": 1},
                "object_box_iou": {"type": "number", "minimum": 0, "maximum": 1},
                "layout_mean_iou": {"type": "number", "minimum": 0, "maximum": 1},
                "final_box_mse": {"type": "number", "minimum": 0},
                "car_area_by_bin": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
        },
        "generator": {
            "type": "object",
            "required": ["ffd_init", "ffd_final", "ffd_reduction", "oracle_pixel_accuracy"],
            "additionalProperties": False,
            "properties": {
                "ffd_init": {"type": "number", "minimum": 0},
                "ffd_final": {"type": "number", "minimum": 0},
                "ffd_reduction": {"type": "number"},
                "oracle_pixel_accuracy": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "class_ratio_mean": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage


def build_toy_corpus(cfg: ExperimentConfig, seed_offset: int = 0, size: int | None = None):
    """Sampled graphs paired with their deterministic toy targets."""
    cv = get_class_vocab(cfg.vocab)
    graphs = sample_corpus(
        cfg.sampler, size or cfg.corpus_size, cfg.seed + seed_offset, cv, DEFAULT_RELATIONS, cfg.grid
    )
    return [(g, toy_targets(g, cv, cfg.grid, cfg.processor.mask_size)) for g in graphs]


def car_probe_graph(cfg: ExperimentConfig, depth_bin: int) -> SceneGraph:
    """Sky + road + one car at a fixed cell, car depth given by ``depth_bin``."""
    cv = get_class_vocab(cfg.vocab)
    grid = cfg.grid
    sky_cell = grid.cell_index(1, grid.grid_size // 2)
    road_cell = grid.cell_index(grid.grid_size - 2, grid.grid_size // 2)
    car_cell = grid.cell_index(grid.grid_size // 2 + 1, grid.grid_size // 2)
    return SceneGraph(
        nodes=(
            SceneNode(cv.index("sky"), sky_cell, grid.depth_bins - 1),
            SceneNode(cv.index("road"), road_cell, max(grid.depth_bins - 2, 0)),
            SceneNode(cv.index("car"), car_cell, depth_bin),
        ),
        classes=cfg.vocab,
    )


def car_area_by_bin(net: ProcessorNet, cfg: ExperimentConfig) -> list[float]:
    """Predicted car box area for each depth bin of the fixed probe scene."""
    areas = []
    with torch.no_grad():
        for z in range(cfg.grid.depth_bins):
            g = car_probe_graph(cfg, z)
            boxes, _ = net(encode_graph_batch([g]))
            corners = cxcywh_to_corners(boxes.numpy())[2]
            areas.append(float((corners[2] - corners[0]) * (corners[3] - corners[1])))
    return areas


def evaluate_processor(net: ProcessorNet, corpus, cfg: ExperimentConfig) -> dict[str, Any]:
    cv = get_class_vocab(cfg.vocab)
    ious, obj_ious, mses, layout_ious = [], [], [], []
    with torch.no_grad():
        for g, targets in corpus:
            if not g.nodes:
                continue
            boxes, masks = net(encode_graph_batch([g]))
            pred = boxes.numpy()
            gt = np.asarray(targets.boxes)
            iou = box_iou(cxcywh_to_corners(pred), cxcywh_to_corners(gt))
            ious.extend(iou.tolist())
            mses.append(float(((pred - gt) ** 2).mean()))
            for node, value in zip(g.nodes, iou):
                if not cv.is_background(node.object_class):
                    obj_ious.append(float(value))
            from .compose import compose_layout

            layout = compose_layout(g, pred, masks.numpy(), cfg.height, cfg.width, cv, cfg.grid, "hard")
            gt_sem = toy_semantic_map(g, cv, cfg.grid, cfg.height, cfg.width, cfg.processor.mask_size)
            layout_ious.append(layout_iou(layout, gt_sem).mean)
    return {
        "mean_box_iou": float(np.mean(ious)),
        "object_box_iou": float(np.mean(obj_ious)) if obj_ious else 1.0,
        "layout_mean_iou": float(np.mean(layout_ious)),
        "final_box_mse": float(np.mean(mses)),
        "car_area_by_bin": car_area_by_bin(net, cfg),
    }


def make_target_images(cfg: ExperimentConfig, seed_offset: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Unpaired target-domain images: toy renders of separately sampled scenes.

    Returns (images (M, H, W, 3), semantic maps (M, H, W))."""
    cv = get_class_vocab(cfg.vocab)
    graphs = sample_corpus(
        cfg.sampler, cfg.target_corpus_size, cfg.seed + seed_offset, cv, DEFAULT_RELATIONS, cfg.grid
    )
    sems = np.stack(
        [toy_semantic_map(g, cv, cfg.grid, cfg.height, cfg.width, cfg.processor.mask_size) for g in graphs]
    )
    images = np.stack([render_toy_target(s, cfg.toyworld, cv) for s in sems])
    return images.astype(np.float32), sems


def initial_generator(cfg: ExperimentConfig, num_classes: int) -> GeneratorNet:
    """The generator exactly as train_generator would initialize it."""
    set_determinism(cfg.seed, cfg.deterministic)
    return GeneratorNet(num_classes, cfg.generator.base_channels, cfg.generator.res_blocks)


def generate_batch(net: GeneratorNet, layouts: np.ndarray) -> np.ndarray:
    return np.stack([generate_image(layout, net) for layout in layouts])


def evaluate_generator(
    net: GeneratorNet,
    init_net: GeneratorNet,
    layouts: np.ndarray,
    target_images: np.ndarray,
    cfg: ExperimentConfig,
) -> dict[str, Any]:
    cv = get_class_vocab(cfg.vocab)
    probe = FeatureProbe(seed=cfg.probe_seed)
    subset = layouts[: min(len(layouts), cfg.target_corpus_size)]
    images_init = generate_batch(init_net, subset)
    images_final = generate_batch(net, subset)
    ffd_init = frechet_feature_distance(images_init, target_images, probe)
    ffd_final = frechet_feature_distance(images_final, target_images, probe)
    accs = [
        oracle_pixel_accuracy(img, layout.argmax(axis=2), cfg.toyworld, cv)
        for img, layout in zip(images_final, subset)
    ]
    return {
        "ffd_init": ffd_init,
        "ffd_final": ffd_final,
        "ffd_reduction": 1.0 - ffd_final / ffd_init if ffd_init > 0 else 0.0,
        "oracle_pixel_accuracy": float(np.mean(accs)),
    }


def _stage(name: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, ExperimentError):
                raise ExperimentError(name, exc) from exc
            return False

    return _Ctx()


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path, log_every: int = 0) -> dict[str, Any]:
    """sample -> train-processor -> compose -> train-generator -> eval.

    Writes corpus, checkpoints, layouts, metrics.json (schema-checked),
    report.md and a sample grid into ``out_dir``; returns the metrics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cv = get_class_vocab(cfg.vocab)
    rv = DEFAULT_RELATIONS

    with _stage("sample"):
        corpus = build_toy_corpus(cfg)
        write_corpus([g for g, _ in corpus], out / "corpus.jsonl")

    with _stage("train-processor"):
        net, disc, proc_history = train_processor(
            corpus, cfg.processor, cv, rv, cfg.grid,
            seed=cfg.seed, deterministic=cfg.deterministic, out_dir=out, log_every=log_every,
        )

    with _stage("compose"):
        layouts = np.zeros((len(corpus), cfg.height, cfg.width, len(cv)), dtype=np.float32)
        from .compose import compose_layout

        with torch.no_grad():
            for i, (g, _) in enumerate(corpus):
                boxes, masks = net(encode_graph_batch([g]))
                layouts[i] = compose_layout(
                    g, boxes.numpy(), masks.numpy(), cfg.height, cfg.width, cv, cfg.grid, "hard"
                )
        np.savez_compressed(out / "layouts.npz", layouts=layouts)

    with _stage("target-domain"):
        target_images, _ = make_target_images(cfg)
        targets_dir = out / "targets"
        targets_dir.mkdir(exist_ok=True)
        for i, img in enumerate(target_images[: min(16, len(target_images))]):
            save_png(targets_dir / f"target-{i:03d}.png", img)

    with _stage("train-generator"):
        init_net = initial_generator(cfg, len(cv))
        gen_net, gen_disc, heads, gen_history = train_generator(
            layouts, target_images, cfg.generator,
            seed=cfg.seed, deterministic=cfg.deterministic, out_dir=out, log_every=log_every,
        )

    with _stage("eval"):
        metrics = {
            "schema_version": 1,
            "seed": cfg.seed,
            "deterministic": cfg.deterministic,
            "corpus_size": cfg.corpus_size,
            "processor": evaluate_processor(net, corpus, cfg),
            "generator": evaluate_generator(gen_net, init_net, layouts, target_images, cfg),
            "class_ratio_mean": {
                cv.class_name(i): float(v)
                for i, v in enumerate(np.mean([class_ratio_of_layout(l) for l in layouts[:32]], axis=0))
            },
        }
        jsonschema.validate(metrics, METRICS_SCHEMA)
        (out / "metrics.json").write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        _write_report(out, cfg, metrics, proc_history, gen_history)
        _write_grid(out, cfg, corpus, layouts, gen_net, target_images)

    return metrics


def _write_report(out: Path, cfg: ExperimentConfig, metrics: dict, proc_history, gen_history) -> None:
    p = metrics["processor"]
    g = metrics["generator"]
    lines = [
        "# Experiment report",
        "",
        f"- seed: {cfg.seed}, deterministic: {cfg.deterministic}",
        f"- corpus: {cfg.corpus_size} sampled graphs at {cfg.height}x{cfg.width}",
        "",
        "## Processor",
        f"- mean box IoU: {p['mean_box_iou']:.3f} (objects only: {p['object_box_iou']:.3f})",
        f"- layout mean IoU vs toy ground truth: {p['layout_mean_iou']:.3f}",
        f"- final box MSE: {p['final_box_mse']:.5f}",
        f"- car box area by depth bin: {', '.join(f'{a:.4f}' for a in p['car_area_by_bin'])}",
        "",
        "## Generator",
        f"- Fréchet probe distance: {g['ffd_init']:.2f} -> {g['ffd_final']:.2f} "
        f"({100 * g['ffd_reduction']:.1f}% reduction)",
        f"- oracle segmenter accuracy on generated images: {g['oracle_pixel_accuracy']:.3f}",
        "",
        f"- processor loss first/last: {proc_history[0]['total']:.4f} / {proc_history[-1]['total']:.4f}",
        f"- generator loss first/last: {gen_history[0]['total']:.4f} / {gen_history[-1]['total']:.4f}",
        "",
    ]
    (out / "report.md").write_text("\n".join(lines), encoding="utf-8")


def _write_grid(out: Path, cfg: ExperimentConfig, corpus, layouts, gen_net: GeneratorNet, target_images) -> None:
    cv = get_class_vocab(cfg.vocab)
    palette = class_palette(cv, cfg.toyworld).astype(np.float64) / 255.0
    rows = []
    for i in range(min(4, len(corpus))):
        layout_rgb = palette[layouts[i].argmax(axis=2)]
        generated = generate_image(layouts[i], gen_net)
        target = target_images[i % len(target_images)]
        rows.append([layout_rgb, generated, target])
    save_png(out / "grid.png", image_grid(rows))
