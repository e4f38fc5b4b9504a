// The GraphEdit algebra: pure application plus the client-side legality
// checks. The checks mirror what the server enforces for reasons the client
// can know locally (vocab membership, index ranges, self edges, duplicate
// edges, one relation per axis per pair), using the rule table fetched from
// /v1/vocab.

import type { EdgeDoc, NodeDoc, SceneGraphDoc, VocabInfo } from "./types.js";

export type GraphEdit =
  | { kind: "add_node"; node: NodeDoc }
  | { kind: "remove_node"; index: number }
  | { kind: "set_class"; index: number; className: string }
  | { kind: "set_depth_bin"; index: number; z: number }
  | { kind: "set_location"; index: number; cell: number }
  | { kind: "add_edge"; edge: EdgeDoc }
  | { kind: "remove_edge"; index: number }
  | { kind: "set_relation"; index: number; relation: string };

function axisOf(relation: string, vocab: VocabInfo): string {
  const dual = vocab.duals[relation];
  return [relation, dual].sort().join("/");
}

function canonicalClass(name: string, vocab: VocabInfo): string | null {
  const resolved = vocab.aliases[name] ?? name;
  return vocab.classes.includes(resolved) ? resolved : null;
}

/** Human-readable reason the edit is illegal, or null when it may apply. */
export function checkEdit(graph: SceneGraphDoc, edit: GraphEdit, vocab: VocabInfo): string | null {
  const cells = vocab.grid.grid_size * vocab.grid.grid_size;
  const checkNode = (node: NodeDoc): string | null => {
    if (canonicalClass(node.class, vocab) === null) return `unknown class "${node.class}"`;
    if (node.cell < 0 || node.cell >= cells) return `cell ${node.cell} outside 0..${cells - 1}`;
    if (node.z < 0 || node.z >= vocab.grid.depth_bins) {
      return `depth bin ${node.z} outside 0..${vocab.grid.depth_bins - 1}`;
    }
    return null;
  };
  const checkEdge = (edge: EdgeDoc, skipIndex: number | null): string | null => {
    if (edge.s === edge.o) return "an edge may not relate a node to itself";
    if (edge.s < 0 || edge.s >= graph.nodes.length || edge.o < 0 || edge.o >= graph.nodes.length) {
      return `edge endpoints (${edge.s},${edge.o}) reference missing nodes`;
    }
    if (!vocab.relations.includes(edge.r)) return `unknown relation "${edge.r}"`;
    for (let k = 0; k < graph.edges.length; k++) {
      if (k === skipIndex) continue;
      const other = graph.edges[k];
      if (other.s === edge.s && other.o === edge.o && other.r === edge.r) {
        return `edge (${edge.s},${edge.r},${edge.o}) already present`;
      }
      const samePair =
        (other.s === edge.s && other.o === edge.o) || (other.s === edge.o && other.o === edge.s);
      if (samePair && axisOf(other.r, vocab) === axisOf(edge.r, vocab)) {
        return `nodes ${edge.s} and ${edge.o} already related on the ${axisOf(edge.r, vocab)} axis`;
      }
    }
    return null;
  };

  switch (edit.kind) {
    case "add_node":
      return checkNode(edit.node);
    case "remove_node":
      return edit.index >= 0 && edit.index < graph.nodes.length ? null : `node ${edit.index} does not exist`;
    case "set_class": {
      if (edit.index < 0 || edit.index >= graph.nodes.length) return `node ${edit.index} does not exist`;
      return canonicalClass(edit.className, vocab) === null ? `unknown class "${edit.className}"` : null;
    }
    case "set_depth_bin": {
      if (edit.index < 0 || edit.index >= graph.nodes.length) return `node ${edit.index} does not exist`;
      return checkNode({ ...graph.nodes[edit.index], z: edit.z });
    }
    case "set_location": {
      if (edit.index < 0 || edit.index >= graph.nodes.length) return `node ${edit.index} does not exist`;
      return checkNode({ ...graph.nodes[edit.index], cell: edit.cell });
    }
    case "add_edge":
      return checkEdge(edit.edge, null);
    case "remove_edge":
      return edit.index >= 0 && edit.index < graph.edges.length ? null : `edge ${edit.index} does not exist`;
    case "set_relation": {
      if (edit.index < 0 || edit.index >= graph.edges.length) return `edge ${edit.index} does not exist`;
      return checkEdge({ ...graph.edges[edit.index], r: edit.relation }, edit.index);
    }
  }
}

/** Pure application; assumes checkEdit returned null. */
export function applyEdit(graph: SceneGraphDoc, edit: GraphEdit, vocab: VocabInfo): SceneGraphDoc {
  const next: SceneGraphDoc = {
    ...graph,
    nodes: graph.nodes.map((n) => ({ ...n })),
    edges: graph.edges.map((e) => ({ ...e })),
    meta: { ...graph.meta },
  };
  switch (edit.kind) {
    case "add_node":
      next.nodes.push({ ...edit.node, class: vocab.aliases[edit.node.class] ?? edit.node.class });
      break;
    case "remove_node": {
      next.nodes.splice(edit.index, 1);
      next.edges = next.edges
        .filter((e) => e.s !== edit.index && e.o !== edit.index)
        .map((e) => ({
          s: e.s - (e.s > edit.index ? 1 : 0),
          r: e.r,
          o: e.o - (e.o > edit.index ? 1 : 0),
        }));
      break;
    }
    case "set_class":
      next.nodes[edit.index].class = vocab.aliases[edit.className] ?? edit.className;
      break;
    case "set_depth_bin":
      next.nodes[edit.index].z = edit.z;
      break;
    case "set_location":
      next.nodes[edit.index].cell = edit.cell;
      break;
    case "add_edge":
      next.edges.push({ ...edit.edge });
      break;
    case "remove_edge":
      next.edges.splice(edit.index, 1);
      break;
    case "set_relation":
      next.edges[edit.index].r = edit.relation;
      break;
  }
  return next;
}
