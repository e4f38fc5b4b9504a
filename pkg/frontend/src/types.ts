// Mirrors of the canonical scene-graph document and the /v1 wire formats.

export interface NodeDoc {
  class: string;
  cell: number;
  z: number;
}

export interface EdgeDoc {
  s: number;
  r: string;
  o: number;
}

export interface SceneGraphDoc {
  version: 1;
  classes: string;
  nodes: NodeDoc[];
  edges: EdgeDoc[];
  meta: Record<string, unknown>;
}

export interface VocabInfo {
  classes: string[];
  background_classes: string[];
  object_classes: string[];
  aliases: Record<string, string>;
  relations: string[];
  duals: Record<string, string>;
  grid: { grid_size: number; depth_bins: number };
  palette: Record<string, [number, number, number]>;
  vocab_name: string;
}

export interface BoxInfo {
  class: string;
  cxcywh: [number, number, number, number];
  corners: [number, number, number, number];
}

export interface LayoutResponse {
  boxes: BoxInfo[];
  masks: { mean: number; area_fraction: number }[];
  layout_png: string;
  layout_argmax: number[][];
  height: number;
  width: number;
}

export interface GenerateResponse extends LayoutResponse {
  image_png: string;
}

export interface Violation {
  kind: string;
  where: string;
  message: string;
}

export interface ValidateResponse {
  valid: boolean;
  violations: Violation[];
}

export function emptyGraph(classes = "default"): SceneGraphDoc {
  return { version: 1, classes, nodes: [], edges: [], meta: {} };
}

/** Area of a node's predicted box, in normalized image units. */
export function boxArea(box: BoxInfo): number {
  const [x0, y0, x1, y1] = box.corners;
  return Math.max(0, x1 - x0) * Math.max(0, y1 - y0);
}
