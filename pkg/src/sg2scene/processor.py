"""Graph processor: scene graph -> per-object boxes and masks -> layout.

Nodes are embedded from class/cell/depth lookup tables, refined by graph
convolution over relation triples, then decoded by a box MLP and a
deconvolution mask head. Training is supervised against simulation targets
with an MSE box term plus an adversarial and feature-matching term on masks,
the mask discriminator being a small conditional patch classifier.

The triple update follows the subject/object candidate scheme: a shared
two-layer perceptron maps (subject vector, relation embedding, object vector)
to candidate vectors for both endpoints, every node averages its incoming
candidates through an output projection, and isolated nodes fall back to a
self-update projection. The update is permutation-equivariant by
construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from torch import nn

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .compose import compose_layout
from .config import ProcessorConfig, as_plain_dict, build_config
from .graph import SceneGraph
from .losses import feature_matching_loss, gan_generator_objective, gan_loss
from .torchutil import TrainingDiverged, batch_indices, load_state_arrays, set_determinism, state_dict_arrays
from .vocab import DEFAULT_RELATIONS, ClassVocab, GridSpec, RelationVocab, get_class_vocab


class GraphConvLayer(nn.Module):
    def __init__(self, hidden_dim: int, relation_dim: int, edge_hidden: int):
        super().__init__()
        self.edge_mlp = nn.Sequential(
            nn.Linear(2 * hidden_dim + relation_dim, edge_hidden),
            nn.ReLU(),
            nn.Linear(edge_hidden, 2 * hidden_dim),
        )
        self.out_proj = nn.Linear(hidden_dim, hidden_dim)
        self.self_proj = nn.Linear(hidden_dim, hidden_dim)

    def forward(self, vectors: torch.Tensor, edge_index: torch.Tensor, rel_vecs: torch.Tensor) -> torch.Tensor:
        n, d = vectors.shape
        if edge_index.numel() == 0:
            return self.self_proj(vectors)
        subj = edge_index[:, 0]
        obj = edge_index[:, 1]
        h = self.edge_mlp(torch.cat([vectors[subj], rel_vecs, vectors[obj]], dim=1))
        cand_subj, cand_obj = h.chunk(2, dim=1)
        sums = torch.zeros_like(vectors)
        counts = torch.zeros(n, dtype=vectors.dtype)
        sums = sums.index_add(0, subj, cand_subj).index_add(0, obj, cand_obj)
        ones = torch.ones(len(subj), dtype=vectors.dtype)
        counts = counts.index_add(0, subj, ones).index_add(0, obj, ones)
        connected = counts > 0
        mean = sums / counts.clamp(min=1).unsqueeze(1)
        return torch.where(connected.unsqueeze(1), self.out_proj(mean), self.self_proj(vectors))


class BoxHead(nn.Module):
    def __init__(self, hidden_dim: int, box_hidden: int):
        super().__init__()
        self.mlp = nn.Sequential(nn.Linear(hidden_dim, box_hidden), nn.ReLU(), nn.Linear(box_hidden, 4))

    def forward(self, vectors: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.mlp(vectors))


class MaskHead(nn.Module):
    def __init__(self, hidden_dim: int, channels: int, mask_size: int):
        super().__init__()
        if mask_size not in (16, 32):
            raise ValueError("mask_size must be 16 or 32")
        self.seed_channels = channels
        self.fc = nn.Linear(hidden_dim, channels * 4 * 4)
        ups = []
        c = channels
        size = 4
        while size < mask_size:
            c_out = max(c // 2, 8)
            ups.append(nn.ConvTranspose2d(c, c_out, kernel_size=4, stride=2, padding=1))
            ups.append(nn.ReLU())
            c = c_out
            size *= 2
        self.ups = nn.Sequential(*ups)
        self.final = nn.Conv2d(c, 1, kernel_size=3, padding=1)

    def forward(self, vectors: torch.Tensor) -> torch.Tensor:
        x = self.fc(vectors).reshape(len(vectors), self.seed_channels, 4, 4)
        x = self.ups(x)
        return torch.sigmoid(self.final(x)).squeeze(1)


class MaskDiscriminator(nn.Module):
    """Patch classifier over masks, conditioned on a class one-hot plane.

    Activations are tanh so the intermediate taps stay bounded; the
    feature-matching term is a squared norm of mean activations and would
    otherwise be free to grow with the discriminator's feature scale.
    """

    def __init__(self, num_classes: int, channels: int):
        super().__init__()
        self.num_classes = num_classes
        self.conv1 = nn.Conv2d(1 + num_classes, channels, kernel_size=4, stride=2, padding=1)
        self.conv2 = nn.Conv2d(channels, channels * 2, kernel_size=4, stride=2, padding=1)
        self.final = nn.Conv2d(channels * 2, 1, kernel_size=3, padding=1)
        self.act = nn.Tanh()

    def features(self, masks: torch.Tensor, classes: torch.Tensor) -> tuple[list[torch.Tensor], torch.Tensor]:
        b, m, _ = masks.shape
        onehot = torch.zeros(b, self.num_classes, dtype=masks.dtype)
        onehot[torch.arange(b), classes] = 1.0
        x = torch.cat([masks.unsqueeze(1), onehot[:, :, None, None].expand(b, self.num_classes, m, m)], dim=1)
        f1 = self.act(self.conv1(x))
        f2 = self.act(self.conv2(f1))
        out = torch.sigmoid(self.final(f2))
        return [f1, f2], out

    def forward(self, masks: torch.Tensor, classes: torch.Tensor) -> torch.Tensor:
        return self.features(masks, classes)[1]


@dataclass
class GraphBatch:
    """Concatenated node/edge tensors for a list of graphs."""

    classes: torch.Tensor
    cells: torch.Tensor
    depth_bins: torch.Tensor
    edge_index: torch.Tensor
    edge_rel: torch.Tensor
    node_graph: torch.Tensor
    sizes: list[int]


def encode_graph_batch(graphs: Sequence[SceneGraph]) -> GraphBatch:
    classes, cells, zbins, node_graph = [], [], [], []
    edge_index, edge_rel = [], []
    offset = 0
    for gi, g in enumerate(graphs):
        for n in g.nodes:
            classes.append(n.object_class)
            cells.append(n.cell)
            zbins.append(n.depth_bin)
            node_graph.append(gi)
        for e in g.edges:
            edge_index.append((e.subject + offset, e.obj + offset))
            edge_rel.append(e.relation)
        offset += len(g.nodes)
    return GraphBatch(
        classes=torch.tensor(classes, dtype=torch.long),
        cells=torch.tensor(cells, dtype=torch.long),
        depth_bins=torch.tensor(zbins, dtype=torch.long),
        edge_index=torch.tensor(edge_index, dtype=torch.long).reshape(-1, 2),
        edge_rel=torch.tensor(edge_rel, dtype=torch.long),
        node_graph=torch.tensor(node_graph, dtype=torch.long),
        sizes=[len(g.nodes) for g in graphs],
    )


class ProcessorNet(nn.Module):
    def __init__(self, cfg: ProcessorConfig, num_classes: int, cells: int, depth_bins: int, num_relations: int):
        super().__init__()
        self.cfg = cfg
        self.class_embed = nn.Embedding(num_classes, cfg.class_dim)
        self.location_embed = nn.Embedding(cells, cfg.location_dim)
        self.depth_embed = nn.Embedding(depth_bins, cfg.depth_dim)
        self.relation_embed = nn.Embedding(num_relations, cfg.relation_dim)
        self.input_proj = nn.Linear(cfg.class_dim + cfg.location_dim + cfg.depth_dim, cfg.hidden_dim)
        self.gconvs = nn.ModuleList(
            GraphConvLayer(cfg.hidden_dim, cfg.relation_dim, cfg.edge_hidden) for _ in range(cfg.layers)
        )
        self.box_head = BoxHead(cfg.hidden_dim, cfg.box_hidden)
        self.mask_head = MaskHead(cfg.hidden_dim, cfg.mask_channels, cfg.mask_size)

    def embed_nodes(self, classes: torch.Tensor, cells: torch.Tensor, depth_bins: torch.Tensor) -> torch.Tensor:
        """Initial node vectors: three table lookups projected to hidden width."""
        looked = torch.cat(
            [self.class_embed(classes), self.location_embed(cells), self.depth_embed(depth_bins)], dim=1
        )
        return self.input_proj(looked)

    def run_graph_network(self, batch: GraphBatch) -> torch.Tensor:
        depth = batch.depth_bins
        if not self.cfg.use_depth_attribute:
            depth = torch.zeros_like(depth)
        vectors = self.embed_nodes(batch.classes, batch.cells, depth)
        edge_index = batch.edge_index
        rel_vecs = self.relation_embed(batch.edge_rel)
        if not self.cfg.use_relations:
            edge_index = torch.zeros(0, 2, dtype=torch.long)
            rel_vecs = rel_vecs[:0]
        for layer in self.gconvs:
            vectors = layer(vectors, edge_index, rel_vecs)
        return vectors

    def forward(self, batch: GraphBatch) -> tuple[torch.Tensor, torch.Tensor]:
        vectors = self.run_graph_network(batch)
        return self.box_head(vectors), self.mask_head(vectors)


def processor_loss(
    pred_boxes: torch.Tensor,
    pred_masks: torch.Tensor,
    gt_boxes: torch.Tensor,
    gt_masks: torch.Tensor,
    classes: torch.Tensor,
    disc: MaskDiscriminator,
    cfg: ProcessorConfig,
) -> dict[str, torch.Tensor]:
    """Supervised objective: lambda_box MSE + lambda_mask_gan GAN + lambda_fm FM."""
    if pred_boxes.shape != gt_boxes.shape or pred_masks.shape != gt_masks.shape:
        raise ValueError(
            f"prediction/target shape mismatch: boxes {tuple(pred_boxes.shape)} vs {tuple(gt_boxes.shape)}, "
            f"masks {tuple(pred_masks.shape)} vs {tuple(gt_masks.shape)}"
        )
    box_mse = ((pred_boxes - gt_boxes) ** 2).mean()
    real_taps, _ = disc.features(gt_masks, classes)
    fake_taps, d_fake = disc.features(pred_masks, classes)
    mask_gan = gan_generator_objective(d_fake)
    mask_fm = feature_matching_loss(real_taps, fake_taps)
    total = cfg.lambda_box * box_mse + cfg.lambda_mask_gan * mask_gan + cfg.lambda_fm * mask_fm
    return {"box_mse": box_mse, "mask_gan": mask_gan, "mask_fm": mask_fm, "total": total}


def processor_config_echo(cfg: ProcessorConfig, vocab: str, grid: GridSpec) -> dict[str, Any]:
    return {"processor": as_plain_dict(cfg), "vocab": vocab, "grid": as_plain_dict(grid)}


def train_processor(
    corpus: Sequence[tuple[SceneGraph, Any]],
    cfg: ProcessorConfig,
    cv: ClassVocab,
    rv: RelationVocab,
    grid: GridSpec = GridSpec(),
    seed: int = 0,
    deterministic: bool = False,
    out_dir: str | Path | None = None,
    log_every: int = 0,
) -> tuple[ProcessorNet, MaskDiscriminator, list[dict[str, float]]]:
    """Alternating mask-discriminator / processor updates over a target corpus.

    ``corpus`` pairs each graph with targets exposing ``boxes`` (N, 4) in
    (cx, cy, w, h) and ``masks`` (N, M, M). Seeded and reproducible; a
    non-finite loss aborts with the offending step.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    set_determinism(seed, deterministic)
    net = ProcessorNet(cfg, len(cv), grid.cells, grid.depth_bins, len(rv))
    disc = MaskDiscriminator(len(cv), cfg.disc_channels)
    if cfg.optimizer == "sgd":
        opt_p: torch.optim.Optimizer = torch.optim.SGD(net.parameters(), lr=cfg.lr, momentum=cfg.momentum)
    else:
        opt_p = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.disc_lr, betas=(0.5, 0.999))
    sampler = torch.Generator().manual_seed(seed + 1)

    gt_boxes_all = [torch.as_tensor(np.asarray(t.boxes), dtype=torch.float32) for _, t in corpus]
    gt_masks_all = [torch.as_tensor(np.asarray(t.masks), dtype=torch.float32) for _, t in corpus]

    history: list[dict[str, float]] = []
    start = time.time()
    for step in range(cfg.steps):
        idx = batch_indices(len(corpus), cfg.batch_size, sampler)
        batch = encode_graph_batch([corpus[i][0] for i in idx])
        gt_boxes = torch.cat([gt_boxes_all[i] for i in idx])
        gt_masks = torch.cat([gt_masks_all[i] for i in idx])

        pred_boxes, pred_masks = net(batch)

        opt_d.zero_grad()
        d_real = disc(gt_masks, batch.classes)
        d_fake = disc(pred_masks.detach(), batch.classes)
        d_loss, _ = gan_loss(d_real, d_fake)
        d_loss.backward()
        opt_d.step()

        opt_p.zero_grad()
        losses = processor_loss(pred_boxes, pred_masks, gt_boxes, gt_masks, batch.classes, disc, cfg)
        losses["total"].backward()
        opt_p.step()

        record = {k: float(v.detach()) for k, v in losses.items()}
        record["disc"] = float(d_loss.detach())
        record["step"] = step
        history.append(record)
        if not np.isfinite(record["total"]) or not np.isfinite(record["disc"]):
            raise TrainingDiverged(step)
        if log_every and step % log_every == 0:
            print(
                f"[processor {step}/{cfg.steps}] total={record['total']:.4f} "
                f"box={record['box_mse']:.5f} fm={record['mask_fm']:.4f} "
                f"({time.time() - start:.0f}s)"
            )
        if out_dir and cfg.checkpoint_every and step and step % cfg.checkpoint_every == 0:
            save_processor_checkpoint(Path(out_dir) / f"processor-{step}.ckpt", net, disc, cfg, cv.name, grid, step)

    if out_dir:
        save_processor_checkpoint(Path(out_dir) / "processor.ckpt", net, disc, cfg, cv.name, grid, cfg.steps)
    return net, disc, history


def save_processor_checkpoint(
    path: str | Path,
    net: ProcessorNet,
    disc: MaskDiscriminator,
    cfg: ProcessorConfig,
    vocab: str,
    grid: GridSpec,
    step: int,
) -> None:
    arrays = {f"net.{k}": v for k, v in state_dict_arrays(net).items()}
    arrays.update({f"disc.{k}": v for k, v in state_dict_arrays(disc).items()})
    save_checkpoint(path, Checkpoint(kind="processor", config=processor_config_echo(cfg, vocab, grid), step=step, arrays=arrays))


def load_processor_checkpoint(path: str | Path) -> tuple[ProcessorNet, MaskDiscriminator, ProcessorConfig, str, GridSpec, int]:
    ckpt = load_checkpoint(path)
    if ckpt.kind != "processor":
        raise ValueError(f"{path} holds a {ckpt.kind!r} checkpoint, expected 'processor'")
    cfg = build_config(ProcessorConfig, ckpt.config["processor"], "$.processor")
    grid = build_config(GridSpec, ckpt.config["grid"], "$.grid")
    vocab = ckpt.config["vocab"]
    cv = get_class_vocab(vocab)
    net = ProcessorNet(cfg, len(cv), grid.cells, grid.depth_bins, len(DEFAULT_RELATIONS))
    disc = MaskDiscriminator(len(cv), cfg.disc_channels)
    load_state_arrays(net, {k[4:]: v for k, v in ckpt.arrays.items() if k.startswith("net.")})
    load_state_arrays(disc, {k[5:]: v for k, v in ckpt.arrays.items() if k.startswith("disc.")})
    return net, disc, cfg, vocab, grid, ckpt.step


class GraphProcessor(BaseEstimator):
    """Sklearn-style wrapper: fit on (graphs, targets), predict boxes/masks,
    transform graphs into composed layouts."""

    def __init__(
        self,
        config: ProcessorConfig = ProcessorConfig(),
        vocab: str = "default",
        grid: GridSpec = GridSpec(),
        height: int = 64,
        width: int = 128,
        seed: int = 0,
        deterministic: bool = False,
    ):
        self.config = config
        self.vocab = vocab
        self.grid = grid
        self.height = height
        self.width = width
        self.seed = seed
        self.deterministic = deterministic

    def fit(self, X: Sequence[SceneGraph], y: Sequence[Any], out_dir: str | Path | None = None, log_every: int = 0):
        cv = get_class_vocab(self.vocab)
        net, disc, history = train_processor(
            list(zip(X, y)),
            self.config,
            cv,
            DEFAULT_RELATIONS,
            self.grid,
            seed=self.seed,
            deterministic=self.deterministic,
            out_dir=out_dir,
            log_every=log_every,
        )
        self.net_ = net
        self.disc_ = disc
        self.history_ = history
        return self

    def _check_fitted(self) -> ProcessorNet:
        if not hasattr(self, "net_"):
            raise NotFittedError("GraphProcessor is not fitted; call fit or load a checkpoint")
        return self.net_

    def predict(self, X: Sequence[SceneGraph]) -> list[dict[str, np.ndarray]]:
        """Per-graph boxes (cx, cy, w, h) and masks, as numpy arrays."""
        net = self._check_fitted()
        out = []
        with torch.no_grad():
            for g in X:
                if not g.nodes:
                    out.append(
                        {"boxes": np.zeros((0, 4), np.float32), "masks": np.zeros((0, self.config.mask_size, self.config.mask_size), np.float32)}
                    )
                    continue
                batch = encode_graph_batch([g])
                boxes, masks = net(batch)
                out.append({"boxes": boxes.numpy(), "masks": masks.numpy()})
        return out

    def transform(self, X: Sequence[SceneGraph], mode: str = "hard") -> np.ndarray:
        """Composed layouts, (len(X), H, W, C)."""
        net = self._check_fitted()
        cv = get_class_vocab(self.vocab)
        layouts = np.zeros((len(X), self.height, self.width, len(cv)), dtype=np.float32)
        preds = self.predict(X)
        for i, (g, pred) in enumerate(zip(X, preds)):
            layouts[i] = compose_layout(
                g, pred["boxes"], pred["masks"], self.height, self.width, cv, self.grid, mode
            )
        return layouts

    @classmethod
    def from_checkpoint(cls, path: str | Path, height: int = 64, width: int = 128) -> "GraphProcessor":
        net, disc, cfg, vocab, grid, _ = load_processor_checkpoint(path)
        est = cls(config=cfg, vocab=vocab, grid=grid, height=height, width=width)
        est.net_ = net
        est.disc_ = disc
        est.history_ = []
        return est
