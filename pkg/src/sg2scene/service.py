"""HTTP manipulation service.

Thin, read-only wrapper over the core operations: validate a scene-graph
document, compose a layout through a loaded processor checkpoint, and render
an image through a loaded generator checkpoint. Request and response bodies
use the canonical document format; images travel base64-encoded. State is
immutable after startup, so responses are pure functions of (body,
checkpoints) and identical requests return identical bytes.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
from fastapi import FastAPI, Request, Response
from fastapi.staticfiles import StaticFiles

from .boxes import cxcywh_to_corners
from .checkpoint import checkpoint_hash
from .compose import compose_layout
from .config import ToyWorldConfig
from .generator import GeneratorNet, load_generator_checkpoint
from .graph import SceneGraph, validate_graph
from .images import class_palette, indexed_png_bytes, png_bytes
from .processor import ProcessorNet, encode_graph_batch, load_processor_checkpoint
from .serialization import ParseError, canonical_json, parse_graph
from .vocab import DEFAULT_RELATIONS, ClassVocab, GridSpec, RelationVocab, get_class_vocab


@dataclass
class ServiceState:
    cv: ClassVocab
    rv: RelationVocab = DEFAULT_RELATIONS
    grid: GridSpec = GridSpec()
    height: int = 64
    width: int = 128
    processor: ProcessorNet | None = None
    generator: GeneratorNet | None = None
    processor_hash: str | None = None
    generator_hash: str | None = None
    toy_cfg: ToyWorldConfig = field(default_factory=ToyWorldConfig)

    @classmethod
    def load(
        cls,
        processor_path: str | Path | None = None,
        generator_path: str | Path | None = None,
        height: int = 64,
        width: int = 128,
    ) -> "ServiceState":
        cv = get_class_vocab("default")
        grid = GridSpec()
        processor = generator = None
        p_hash = g_hash = None
        if processor_path is not None:
            processor, _, _, vocab, grid, _ = load_processor_checkpoint(processor_path)
            processor.eval()
            cv = get_class_vocab(vocab)
            p_hash = checkpoint_hash(processor_path)
        if generator_path is not None:
            generator, _, _, _, num_classes, _ = load_generator_checkpoint(generator_path)
            generator.eval()
            if num_classes != len(cv):
                raise ValueError(
                    f"generator checkpoint expects {num_classes} layout channels but the vocabulary has {len(cv)}"
                )
            g_hash = checkpoint_hash(generator_path)
        return cls(
            cv=cv, grid=grid, height=height, width=width,
            processor=processor, generator=generator,
            processor_hash=p_hash, generator_hash=g_hash,
        )


def _json_response(payload: Any, status_code: int = 200) -> Response:
    return Response(content=canonical_json(payload), status_code=status_code, media_type="application/json")


def _error(status: int, message: str, where: str | None = None) -> Response:
    body: dict[str, Any] = {"error": message}
    if where is not None:
        body["where"] = where
    return _json_response(body, status)


def create_app(state: ServiceState, app_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="sg2scene", docs_url=None, redoc_url=None)

    async def _read_graph(request: Request) -> SceneGraph | Response:
        text = (await request.body()).decode("utf-8", errors="replace")
        try:
            return parse_graph(text, state.rv)
        except ParseError as exc:
            return _error(400, exc.message, exc.where)

    @app.get("/v1/health")
    def health() -> Response:
        return _json_response(
            {
                "status": "ok",
                "checkpoints": {"processor": state.processor_hash, "generator": state.generator_hash},
            }
        )

    @app.get("/v1/vocab")
    def vocab() -> Response:
        palette = class_palette(state.cv, state.toy_cfg)
        return _json_response(
            {
                "classes": list(state.cv.classes),
                "background_classes": list(state.cv.background_classes),
                "object_classes": list(state.cv.object_classes),
                "aliases": {a: t for a, t in state.cv.aliases},
                "relations": list(state.rv.relations),
                "duals": {a: b for a, b in state.rv.duals} | {b: a for a, b in state.rv.duals},
                "grid": {"grid_size": state.grid.grid_size, "depth_bins": state.grid.depth_bins},
                "palette": {name: palette[i].tolist() for i, name in enumerate(state.cv.classes)},
                "vocab_name": state.cv.name,
            }
        )

    @app.post("/v1/validate")
    async def validate(request: Request) -> Response:
        graph = await _read_graph(request)
        if isinstance(graph, Response):
            return graph
        violations = validate_graph(graph, state.cv, state.rv, state.grid)
        return _json_response(
            {"valid": not violations, "violations": [{"kind": v.kind, "where": v.where, "message": v.message} for v in violations]}
        )

    def _layout_payload(graph: SceneGraph) -> tuple[dict[str, Any], np.ndarray] | Response:
        if state.processor is None:
            return _error(409, "no processor checkpoint loaded")
        if graph.classes != state.cv.name:
            return _error(422, f"graph uses vocabulary {graph.classes!r} but the service runs {state.cv.name!r}")
        violations = validate_graph(graph, state.cv, state.rv, state.grid)
        if violations:
            return _error(422, "; ".join(f"{v.where}: {v.message}" for v in violations))
        palette = class_palette(state.cv, state.toy_cfg)
        if graph.nodes:
            with torch.no_grad():
                boxes_t, masks_t = state.processor(encode_graph_batch([graph]))
            boxes = boxes_t.numpy()
            masks = masks_t.numpy()
        else:
            boxes = np.zeros((0, 4), np.float32)
            masks = np.zeros((0, 8, 8), np.float32)
        layout = compose_layout(graph, boxes, masks, state.height, state.width, state.cv, state.grid, "hard")
        argmax = layout.argmax(axis=2).astype(np.int64)
        corners = cxcywh_to_corners(boxes)
        payload = {
            "boxes": [
                {
                    "class": state.cv.class_name(node.object_class),
                    "cxcywh": [float(v) for v in boxes[i]],
                    "corners": [float(v) for v in corners[i]],
                }
                for i, node in enumerate(graph.nodes)
            ],
            "masks": [
                {"mean": float(masks[i].mean()), "area_fraction": float((masks[i] > 0.5).mean())}
                for i in range(len(graph.nodes))
            ],
            "layout_png": base64.b64encode(indexed_png_bytes(argmax, palette)).decode("ascii"),
            "layout_argmax": argmax.tolist(),
            "height": state.height,
            "width": state.width,
        }
        return payload, layout

    @app.post("/v1/layout")
    async def layout(request: Request) -> Response:
        graph = await _read_graph(request)
        if isinstance(graph, Response):
            return graph
        result = _layout_payload(graph)
        if isinstance(result, Response):
            return result
        payload, _ = result
        return _json_response(payload)

    @app.post("/v1/generate")
    async def generate(request: Request) -> Response:
        graph = await _read_graph(request)
        if isinstance(graph, Response):
            return graph
        if state.generator is None:
            return _error(409, "no generator checkpoint loaded")
        result = _layout_payload(graph)
        if isinstance(result, Response):
            return result
        payload, layout = result
        from .generator import generate_image

        image = generate_image(layout.astype(np.float32), state.generator)
        payload["image_png"] = base64.b64encode(png_bytes(image)).decode("ascii")
        return _json_response(payload)

    if app_dir is not None and Path(app_dir).is_dir():
        app.mount("/app", StaticFiles(directory=str(app_dir), html=True), name="app")

    return app
