"""Umbrella command line: sg2scene <subcommand>.

Every subcommand takes --config (strict JSON, unknown keys rejected); --seed
and --deterministic override the config. The SG2SCENE_DATA_DIR environment
variable supplies the artifact root when --out is omitted for `run`.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .balance import balanced_subsample, class_ratio_of_layout
from .compose import compose_layout
from .config import ConfigError, ExperimentConfig
from .derivation import derive_graph, iter_record_dirs, load_record, load_targets_npz, save_targets_npz
from .experiment import evaluate_generator, evaluate_processor, initial_generator, run_experiment
from .generator import generate_image, load_generator_checkpoint, train_generator
from .images import load_png, save_png
from .processor import encode_graph_batch, load_processor_checkpoint, train_processor
from .sampling import sample_corpus
from .serialization import ParseError, parse_graph, read_corpus, write_corpus
from .service import ServiceState, create_app
from .toyworld import toy_semantic_map, toy_targets
from .vocab import DEFAULT_RELATIONS, get_class_vocab


def _load_config(path: str | None, seed: int | None, deterministic: bool) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.load(path) if path else ExperimentConfig()
    except (ConfigError, OSError) as exc:
        raise click.ClickException(str(exc)) from None
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if deterministic:
        overrides["deterministic"] = True
    return cfg.with_overrides(**overrides) if overrides else cfg


def _config_option(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Experiment config JSON.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the config seed.")(fn)
    fn = click.option("--deterministic", is_flag=True, help="Pin threads and algorithms for bitwise reproducibility.")(fn)
    return fn


@click.group()
def main() -> None:
    """Scene-graph to traffic-scene synthesis, desk scale."""


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@_config_option
def derive(in_dir, out_file, config_path, seed, deterministic):
    """Derive scene graphs (and training targets) from annotation records."""
    cfg = _load_config(config_path, seed, deterministic)
    cv = get_class_vocab(cfg.vocab)
    graphs, targets = [], []
    dirs = iter_record_dirs(in_dir)
    if not dirs:
        raise click.ClickException(f"no annotation records under {in_dir}")
    for record_dir in dirs:
        g, t = derive_graph(load_record(record_dir), cfg.derivation, cv, DEFAULT_RELATIONS, cfg.processor.mask_size)
        graphs.append(g)
        targets.append(t)
    write_corpus(graphs, out_file)
    save_targets_npz(str(out_file) + ".targets.npz", targets)
    click.echo(f"derived {len(graphs)} graphs -> {out_file}")


@main.command()
@click.option("--n", "count", required=True, type=int)
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@_config_option
def sample(count, out_file, config_path, seed, deterministic):
    """Sample a random scene-graph corpus."""
    cfg = _load_config(config_path, seed, deterministic)
    cv = get_class_vocab(cfg.vocab)
    graphs = sample_corpus(cfg.sampler, count, cfg.seed, cv, DEFAULT_RELATIONS, cfg.grid)
    write_corpus(graphs, out_file)
    click.echo(f"sampled {count} graphs (seed {cfg.seed}) -> {out_file}")


@main.command()
@click.option("--in", "in_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--target", "target_file", required=True, type=click.Path(exists=True, dir_okay=False), help="JSON object {class name: probability}.")
@click.option("--k", required=True, type=int)
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@_config_option
def subsample(in_file, target_file, k, out_file, config_path, seed, deterministic):
    """Greedy class-balanced subsampling toward a target class ratio.

    Per-graph ratios come from the toy ground-truth layout of each graph."""
    cfg = _load_config(config_path, seed, deterministic)
    cv = get_class_vocab(cfg.vocab)
    graphs = read_corpus(in_file)
    raw = json.loads(Path(target_file).read_text(encoding="utf-8"))
    target = np.zeros(len(cv))
    for name, prob in raw.items():
        target[cv.index(name)] = prob
    ratios = []
    for g in graphs:
        sem = toy_semantic_map(g, cv, cfg.grid, cfg.height, cfg.width, cfg.processor.mask_size)
        counts = np.bincount(sem.ravel(), minlength=len(cv)).astype(np.float64)
        ratios.append(counts / counts.sum())
    chosen = balanced_subsample(list(zip(graphs, ratios)), target, k)
    write_corpus(chosen, out_file)
    click.echo(f"kept {k} of {len(graphs)} graphs -> {out_file}")


@main.command("train-processor")
@click.option("--corpus", "corpus_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_file", type=click.Path(exists=True, dir_okay=False), default=None, help="Targets npz from `derive`; defaults to toy targets.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_config_option
def train_processor_cmd(corpus_file, targets_file, out_dir, config_path, seed, deterministic):
    """Train the graph processor on a corpus."""
    cfg = _load_config(config_path, seed, deterministic)
    cv = get_class_vocab(cfg.vocab)
    graphs = read_corpus(corpus_file)
    if targets_file:
        targets = load_targets_npz(targets_file)
        if len(targets) != len(graphs):
            raise click.ClickException(f"{len(graphs)} graphs but {len(targets)} target entries")
    else:
        targets = [toy_targets(g, cv, cfg.grid, cfg.processor.mask_size) for g in graphs]
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    _, _, history = train_processor(
        list(zip(graphs, targets)), cfg.processor, cv, DEFAULT_RELATIONS, cfg.grid,
        seed=cfg.seed, deterministic=cfg.deterministic, out_dir=out_dir, log_every=100,
    )
    click.echo(f"trained {cfg.processor.steps} steps, final loss {history[-1]['total']:.4f} -> {out_dir}/processor.ckpt")


def _load_layouts(layouts_path: str, processor_path: str | None, cfg: ExperimentConfig) -> np.ndarray:
    import torch

    path = Path(layouts_path)
    if path.suffix == ".npz":
        return np.load(path)["layouts"]
    graphs = read_corpus(path)
    if processor_path is None:
        raise click.ClickException("corpus-file layouts need --processor to predict boxes and masks")
    net, _, pcfg, vocab, grid, _ = load_processor_checkpoint(processor_path)
    cv = get_class_vocab(vocab)
    layouts = np.zeros((len(graphs), cfg.height, cfg.width, len(cv)), dtype=np.float32)
    with torch.no_grad():
        for i, g in enumerate(graphs):
            boxes, masks = net(encode_graph_batch([g]))
            layouts[i] = compose_layout(g, boxes.numpy(), masks.numpy(), cfg.height, cfg.width, cv, grid, "hard")
    return layouts


@main.command("train-generator")
@click.option("--layouts", "layouts_path", required=True, type=click.Path(exists=True), help="layouts .npz or a corpus file (with --processor).")
@click.option("--processor", "processor_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--target", "target_dir", required=True, type=click.Path(exists=True, file_okay=False), help="Directory of target-domain PNG images.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_config_option
def train_generator_cmd(layouts_path, processor_path, target_dir, out_dir, config_path, seed, deterministic):
    """Train the scene generator on unpaired layouts and target images."""
    cfg = _load_config(config_path, seed, deterministic)
    layouts = _load_layouts(layouts_path, processor_path, cfg)
    images = [load_png(p) for p in sorted(Path(target_dir).glob("*.png"))]
    if len(images) < 2:
        raise click.ClickException(f"need at least 2 target PNGs in {target_dir}")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    _, _, _, history = train_generator(
        layouts, np.stack(images), cfg.generator,
        seed=cfg.seed, deterministic=cfg.deterministic, out_dir=out_dir, log_every=100,
    )
    click.echo(f"trained {cfg.generator.steps} steps, final loss {history[-1]['total']:.4f} -> {out_dir}/generator.ckpt")


@main.command()
@click.option("--graph", "graph_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--processor", "processor_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--generator", "generator_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@_config_option
def generate(graph_file, processor_path, generator_path, out_file, config_path, seed, deterministic):
    """Render one scene graph to an 8-bit RGB image."""
    import torch

    cfg = _load_config(config_path, seed, deterministic)
    try:
        graph = parse_graph(Path(graph_file).read_text(encoding="utf-8"))
    except ParseError as exc:
        raise click.ClickException(str(exc)) from None
    net, _, _, vocab, grid, _ = load_processor_checkpoint(processor_path)
    gen_net, _, _, _, num_classes, _ = load_generator_checkpoint(generator_path)
    cv = get_class_vocab(vocab)
    if num_classes != len(cv):
        raise click.ClickException("generator and processor checkpoints disagree on the class count")
    with torch.no_grad():
        boxes, masks = net(encode_graph_batch([graph]))
    layout = compose_layout(graph, boxes.numpy(), masks.numpy(), cfg.height, cfg.width, cv, grid, "hard")
    image = generate_image(layout.astype(np.float32), gen_net)
    save_png(out_file, image)
    click.echo(f"wrote {out_file}")


@main.command("eval")
@click.option("--processor", "processor_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--generator", "generator_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--corpus", "corpus_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--target", "target_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@_config_option
def eval_cmd(processor_path, generator_path, corpus_file, target_dir, out_file, config_path, seed, deterministic):
    """Evaluate checkpoints on a corpus; writes a schema-checked metrics doc."""
    import jsonschema

    from .experiment import METRICS_SCHEMA

    cfg = _load_config(config_path, seed, deterministic)
    cv = get_class_vocab(cfg.vocab)
    graphs = read_corpus(corpus_file)
    corpus = [(g, toy_targets(g, cv, cfg.grid, cfg.processor.mask_size)) for g in graphs]
    net, _, _, _, _, _ = load_processor_checkpoint(processor_path)
    metrics = {
        "schema_version": 1,
        "seed": cfg.seed,
        "deterministic": cfg.deterministic,
        "processor": evaluate_processor(net, corpus, cfg),
    }
    if generator_path and target_dir:
        gen_net, _, _, _, _, _ = load_generator_checkpoint(generator_path)
        layouts = _load_layouts(corpus_file, processor_path, cfg)
        images = np.stack([load_png(p) for p in sorted(Path(target_dir).glob("*.png"))]).astype(np.float32)
        metrics["generator"] = evaluate_generator(gen_net, initial_generator(cfg, len(cv)), layouts, images, cfg)
    jsonschema.validate(metrics, METRICS_SCHEMA)
    Path(out_file).write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {out_file}")


@main.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Defaults to $SG2SCENE_DATA_DIR/run or ./artifacts/run.")
@_config_option
def run(out_dir, config_path, seed, deterministic):
    """Full pipeline: sample, train both networks, evaluate, write artifacts."""
    cfg = _load_config(config_path, seed, deterministic)
    if out_dir is None:
        out_dir = str(Path(os.environ.get("SG2SCENE_DATA_DIR", "artifacts")) / "run")
    metrics = run_experiment(cfg, out_dir, log_every=100)
    click.echo(json.dumps(metrics, sort_keys=True, indent=2))


@main.command()
@click.option("--processor", "processor_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--generator", "generator_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--app-dir", "app_dir", type=click.Path(file_okay=False), default=None, help="Static UI assets to serve under /app (defaults to ./frontend/dist when present).")
def serve(processor_path, generator_path, port, host, app_dir):
    """Serve the manipulation endpoints (and the editor UI when built)."""
    try:
        import uvicorn
    except ImportError:
        raise click.ClickException("uvicorn is required to serve; pip install uvicorn") from None
    state = ServiceState.load(processor_path, generator_path)
    if app_dir is None and Path("frontend/dist").is_dir():
        app_dir = "frontend/dist"
    app = create_app(state, app_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    sys.exit(main())
