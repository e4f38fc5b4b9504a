"""Toy-scale unsupervised traffic-scene synthesis from synthetic 3D scene graphs."""

from .balance import balanced_subsample, class_ratio_of_layout, kl_divergence
from .compose import compose_layout
from .config import ExperimentConfig
from .derivation import AnnotationRecord, derive_graph, grid_cell, pairwise_relation, quantize_depth
from .generator import SceneGenerator, generate_image, patch_nce_loss, train_generator
from .graph import (
    GraphEdit,
    SceneEdge,
    SceneGraph,
    SceneNode,
    apply_edit,
    class_histogram,
    permute_nodes,
    validate_graph,
)
from .losses import feature_matching_loss, gan_loss
from .metrics import frechet_feature_distance, layout_iou
from .processor import GraphProcessor, train_processor
from .sampling import sample_corpus, sample_graph
from .serialization import parse_graph, read_corpus, serialize_graph, write_corpus
from .toyworld import oracle_segment, render_toy_target
from .vocab import ClassVocab, GridSpec, RelationVocab, get_class_vocab

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "ClassVocab",
    "ExperimentConfig",
    "GraphEdit",
    "GraphProcessor",
    "GridSpec",
    "RelationVocab",
    "SceneEdge",
    "SceneGenerator",
    "SceneGraph",
    "SceneNode",
    "apply_edit",
    "balanced_subsample",
    "class_histogram",
    "class_ratio_of_layout",
    "compose_layout",
    "derive_graph",
    "feature_matching_loss",
    "frechet_feature_distance",
    "gan_loss",
    "generate_image",
    "get_class_vocab",
    "grid_cell",
    "kl_divergence",
    "layout_iou",
    "oracle_segment",
    "pairwise_relation",
    "parse_graph",
    "patch_nce_loss",
    "permute_nodes",
    "quantize_depth",
    "read_corpus",
    "render_toy_target",
    "sample_corpus",
    "sample_graph",
    "serialize_graph",
    "train_generator",
    "train_processor",
    "validate_graph",
    "write_corpus",
]
